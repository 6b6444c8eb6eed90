//! Report files and console tables.
//!
//! Every CSV file starts with `#` comment lines: the schema string, then
//! the run description. Numbers use fixed precision so repeated runs are
//! byte-identical; missing values are empty cells. JSON reports carry the
//! same schema string in a `schema` field.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use ddcp_core::models::{
    BessParams, BessPlan, LoadingStats, ReportStatus, UpgradePlan, ViolationReport,
};
use ddcp_core::pipeline::{HostingCapacity, SelectedUpgrade, StrategyResult};
use serde::Serialize;

pub const SCHEMA: &str = "ddcp-report/1";

/// Fixed-precision number, empty for NaN.
pub fn num(x: f64, digits: usize) -> String {
    if x.is_nan() {
        String::new()
    } else {
        // Avoid printing "-0.0000".
        let s = format!("{x:.digits$}");
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            s.trim_start_matches('-').to_string()
        } else {
            s
        }
    }
}

/// A machine-readable table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self {
            name,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV text with the schema and run header lines.
    pub fn to_csv(&self, run: &[String]) -> String {
        let mut out = format!("# schema={SCHEMA} table={}\n", self.name);
        for line in run {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory write");
        out.push_str(&String::from_utf8(body).expect("report cells are UTF-8"));
        out
    }
}

/// Writes `name.csv` under `dir`.
pub fn write_table(dir: &Path, run: &[String], table: &Table) -> io::Result<()> {
    std::fs::write(dir.join(format!("{}.csv", table.name)), table.to_csv(run))
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    schema: &'static str,
    run: &'a [String],
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with the schema string and run description.
pub fn to_json<T: Serialize>(run: &[String], body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Wrapped {
        schema: SCHEMA,
        run,
        body,
    })
    .expect("report types serialize");
    s.push('\n');
    s
}

/// Storage defaults as a header line.
pub fn bess_line(b: &BessParams) -> String {
    format!(
        "bess: e_min_kwh={} e_max_kwh={} soc_min={} soc_max={} eta_ch={} eta_dis={} \
         c_cap={} c_rate_ch={} c_rate_dis={} k_inv={} dt_h={}",
        b.e_min_kwh,
        b.e_max_kwh,
        b.soc_min,
        b.soc_max,
        b.eta_ch,
        b.eta_dis,
        b.c_cap,
        b.c_rate_ch,
        b.c_rate_dis,
        b.k_inv,
        b.dt_h
    )
}

/// One scenario of a violation sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaseKey {
    pub base_kv: f64,
    pub charger_kw: f64,
    pub penetration: f64,
}

impl CaseKey {
    fn cells(&self) -> Vec<String> {
        vec![
            num(self.base_kv, 3),
            num(self.charger_kw, 3),
            num(self.penetration * 100.0, 2),
        ]
    }
}

/// Aggregates of one solved scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellStats {
    /// Peak loading of every branch.
    pub loading: LoadingStats,
    /// Peak violation of overloaded branches.
    pub line_violation: LoadingStats,
    /// Lowest voltage of buses that fall below the limit, p.u.
    pub voltage_violation: LoadingStats,
}

impl CellStats {
    pub fn of(rep: &ViolationReport) -> Self {
        Self {
            loading: rep.loading_stats(),
            line_violation: rep.violation_stats(),
            voltage_violation: LoadingStats::of(&low_bus_voltages(rep)),
        }
    }
}

/// Minimum voltage of each bus that violates the lower limit at some step.
pub fn low_bus_voltages(rep: &ViolationReport) -> Vec<f64> {
    rep.voltage_pu
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .filter(|&v| v < rep.v_min - rep.tolerance.voltage_pu)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepCell {
    pub key: CaseKey,
    pub status: ReportStatus,
    /// `None` unless solved.
    pub stats: Option<CellStats>,
}

impl SweepCell {
    pub fn of(key: CaseKey, rep: &ViolationReport) -> Self {
        Self {
            key,
            status: rep.status,
            stats: rep.solved().then(|| CellStats::of(rep)),
        }
    }
}

pub fn status_label(s: ReportStatus) -> &'static str {
    match s {
        ReportStatus::Solved => "solved",
        ReportStatus::ModelCollapse => "model collapse",
        ReportStatus::SolverFailure => "solver failure",
    }
}

const METRICS: [(&str, &str); 3] = [
    ("loading", "LOADING LEVEL STATISTICS"),
    ("line_violation", "LINE VIOLATION STATISTICS"),
    ("voltage_violation", "VOLTAGE VIOLATION STATISTICS"),
];

fn metric(s: &CellStats, i: usize) -> LoadingStats {
    match i {
        0 => s.loading,
        1 => s.line_violation,
        _ => s.voltage_violation,
    }
}

/// Digits of loading and violation percentages, and of voltages.
const PCT_DIGITS: usize = 4;
const PU_DIGITS: usize = 6;

fn stat_cells(st: &LoadingStats, digits: usize) -> [String; 4] {
    if st.count == 0 {
        return [0.to_string(), String::new(), String::new(), String::new()];
    }
    [
        st.count.to_string(),
        num(st.min, digits),
        num(st.max, digits),
        num(st.avg, digits),
    ]
}

/// Long-format statistics: one row per scenario and metric.
pub fn stats_table(cells: &[SweepCell]) -> Table {
    let mut t = Table::new(
        "loading_stats",
        &[
            "base_kv",
            "charger_kw",
            "penetration_pct",
            "status",
            "metric",
            "count",
            "min",
            "max",
            "avg",
        ],
    );
    for c in cells {
        for (i, (name, _)) in METRICS.iter().enumerate() {
            let mut row = c.key.cells();
            row.push(status_label(c.status).into());
            row.push((*name).into());
            match &c.stats {
                Some(s) => {
                    let digits = if i == 2 { PU_DIGITS } else { PCT_DIGITS };
                    row.extend(stat_cells(&metric(s, i), digits));
                }
                None => row.extend([String::new(), String::new(), String::new(), String::new()]),
            }
            t.push(row);
        }
    }
    t
}

/// Per-branch peak values of every solved scenario.
pub fn violations_table(rows: &[(CaseKey, &str, &ViolationReport)]) -> Table {
    let mut t = Table::new(
        "violations",
        &[
            "base_kv",
            "charger_kw",
            "penetration_pct",
            "stage",
            "from",
            "to",
            "peak_current_a",
            "peak_loading_pct",
            "violation_pct",
        ],
    );
    for (key, stage, rep) in rows {
        if !rep.solved() {
            continue;
        }
        let cur = rep.peak_current_a();
        let ld = rep.peak_loading();
        for (k, &(from, to)) in rep.branches.iter().enumerate() {
            let mut row = key.cells();
            row.extend([
                (*stage).to_string(),
                from.to_string(),
                to.to_string(),
                num(cur[k], 3),
                num(ld[k], PCT_DIGITS),
                num(ddcp_core::models::violation_pct(ld[k]), PCT_DIGITS),
            ]);
            t.push(row);
        }
    }
    t
}

/// Per-bus voltage extremes of every solved scenario.
pub fn voltages_table(rows: &[(CaseKey, &str, &ViolationReport)]) -> Table {
    let mut t = Table::new(
        "voltages",
        &[
            "base_kv",
            "charger_kw",
            "penetration_pct",
            "stage",
            "bus",
            "v_min_pu",
            "hour_of_min",
            "v_max_pu",
            "below_limit",
        ],
    );
    for (key, stage, rep) in rows {
        if !rep.solved() {
            continue;
        }
        for (i, id) in rep.bus_ids.iter().enumerate() {
            let row_v = &rep.voltage_pu[i];
            let mut at = 0;
            for (s, &v) in row_v.iter().enumerate() {
                if v < row_v[at] {
                    at = s;
                }
            }
            let lo = row_v[at];
            let hi = row_v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut row = key.cells();
            row.extend([
                (*stage).to_string(),
                id.to_string(),
                num(lo, PU_DIGITS),
                rep.hours[at].to_string(),
                num(hi, PU_DIGITS),
                (lo < rep.v_min - rep.tolerance.voltage_pu).to_string(),
            ]);
            t.push(row);
        }
    }
    t
}

/// Cables chosen by the upgrade model.
pub fn upgrade_plan_table(plan: &UpgradePlan) -> Table {
    let mut t = upgrade_header();
    for u in &plan.upgrades {
        t.push(vec![
            u.from.to_string(),
            u.to.to_string(),
            u.old_cable.clone(),
            u.cable.name.clone(),
            num(u.cable.ampacity_a, 3),
            num(u.relaxed_peak_a, 3),
            num(u.cost, 2),
        ]);
    }
    t
}

/// Cables chosen for the top-ranked bottlenecks.
pub fn selected_table(upgrades: &[SelectedUpgrade]) -> Table {
    let mut t = upgrade_header();
    for u in upgrades {
        t.push(vec![
            u.from.to_string(),
            u.to.to_string(),
            u.old_cable.clone(),
            u.cable.name.clone(),
            num(u.cable.ampacity_a, 3),
            num(u.required_a / ddcp_core::models::MENU_MARGIN, 3),
            num(u.cost, 2),
        ]);
    }
    t
}

fn upgrade_header() -> Table {
    Table::new(
        "upgrade_plan",
        &[
            "from",
            "to",
            "old_cable",
            "new_cable",
            "ampacity_a",
            "relaxed_peak_a",
            "cost",
        ],
    )
}

/// Installed units, one row each.
pub fn bess_plan_table(plan: Option<&BessPlan>) -> Table {
    let mut t = Table::new(
        "bess_plan",
        &[
            "bus",
            "capacity_kwh",
            "inverter_kva",
            "cost",
            "cyclic_residual_kwh",
        ],
    );
    for u in plan.map_or(&[][..], |p| &p.units) {
        t.push(vec![
            u.bus.to_string(),
            num(u.capacity_kwh, 3),
            num(u.inverter_kva, 3),
            num(u.cost, 2),
            num(u.cyclic_residual_kwh, 9),
        ]);
    }
    t
}

/// Hourly schedule of every installed unit.
pub fn bess_schedule_table(plan: Option<&BessPlan>) -> Table {
    let mut t = Table::new(
        "bess_schedule",
        &[
            "bus",
            "hour",
            "p_ch_kw",
            "p_dis_kw",
            "q_inj_kvar",
            "q_abs_kvar",
            "energy_end_kwh",
            "soc_end",
        ],
    );
    let Some(plan) = plan else { return t };
    for u in &plan.units {
        for (s, &h) in plan.hours.iter().enumerate() {
            t.push(vec![
                u.bus.to_string(),
                h.to_string(),
                num(u.p_ch_kw[s], 3),
                num(u.p_dis_kw[s], 3),
                num(u.q_inj_kvar[s], 3),
                num(u.q_abs_kvar[s], 3),
                num(u.energy_kwh[s + 1], 3),
                num(u.soc[s + 1], 6),
            ]);
        }
    }
    t
}

pub fn hosting_table(results: &[HostingCapacity]) -> Table {
    let mut t = Table::new(
        "hosting_capacity",
        &[
            "base_kv",
            "charger_kw",
            "with_bess",
            "threshold_pct",
            "passes_at_zero",
            "evaluations",
        ],
    );
    for r in results {
        t.push(vec![
            num(r.base_kv, 3),
            num(r.charger_kw, 3),
            r.with_bess.to_string(),
            num(r.threshold_pct, 2),
            r.passes_at_zero.to_string(),
            r.evaluations.len().to_string(),
        ]);
    }
    t
}

pub fn compare_table(results: &[StrategyResult]) -> Table {
    let mut t = Table::new(
        "compare",
        &[
            "strategy",
            "feasible",
            "cable_cost",
            "bess_cost",
            "total_cost",
            "upgraded_branches",
            "bess_capacity_kwh",
            "residual_violations",
            "note",
        ],
    );
    for r in results {
        t.push(vec![
            r.strategy.label().into(),
            r.feasible.to_string(),
            num(r.cable_cost, 2),
            num(r.bess_cost, 2),
            num(r.total_cost, 2),
            r.upgraded_branches.to_string(),
            num(r.bess_capacity_kwh, 3),
            r.residual_violations.map_or(String::new(), |v| v.to_string()),
            r.note.clone(),
        ]);
    }
    t
}

const LABEL_W: usize = 10;
const CELL_W: usize = 16;

/// Fixed-width tables in the layout of a loading-statistics report: one
/// block per metric family and charger power, one row per voltage level
/// and statistic, one column per penetration. Cells hold exactly the text
/// written to `loading_stats.csv`; unsolved scenarios read
/// "model collapse" or "solver failure".
pub fn emit_summary(cells: &[SweepCell]) -> String {
    let mut chargers: Vec<f64> = Vec::new();
    for c in cells {
        if !chargers.contains(&c.key.charger_kw) {
            chargers.push(c.key.charger_kw);
        }
    }
    let mut out = String::new();
    for (mi, (_, title)) in METRICS.iter().enumerate() {
        if chargers.is_empty() {
            writeln!(out, "{title}").unwrap();
            writeln!(out, "{:<LABEL_W$}{:<LABEL_W$}", "base kV", "metric").unwrap();
            out.push('\n');
            continue;
        }
        for &kw in &chargers {
            let block: Vec<&SweepCell> = cells.iter().filter(|c| c.key.charger_kw == kw).collect();
            let mut pens: Vec<f64> = Vec::new();
            let mut kvs: Vec<f64> = Vec::new();
            for c in &block {
                if !pens.contains(&c.key.penetration) {
                    pens.push(c.key.penetration);
                }
                if !kvs.contains(&c.key.base_kv) {
                    kvs.push(c.key.base_kv);
                }
            }
            writeln!(out, "{title}, charger {} kW", num(kw, 1)).unwrap();
            write!(out, "{:<LABEL_W$}{:<LABEL_W$}", "base kV", "metric").unwrap();
            for p in &pens {
                write!(out, "{:>CELL_W$}", format!("{}%", num(p * 100.0, 1))).unwrap();
            }
            out.push('\n');
            let unit = if mi == 2 { "p.u." } else { "%" };
            let labels = [
                "Count".to_string(),
                format!("Min {unit}"),
                format!("Max {unit}"),
                format!("Avg {unit}"),
            ];
            let first = if mi == 0 { 1 } else { 0 };
            for &kv in &kvs {
                for (si, label) in labels.iter().enumerate().skip(first) {
                    let kv_label = if si == first { num(kv, 2) } else { String::new() };
                    write!(out, "{kv_label:<LABEL_W$}{label:<LABEL_W$}").unwrap();
                    for &p in &pens {
                        let cell = block
                            .iter()
                            .find(|c| c.key.base_kv == kv && c.key.penetration == p);
                        let text = match cell {
                            None => String::new(),
                            Some(c) => match &c.stats {
                                None => status_label(c.status).to_string(),
                                Some(s) => {
                                    let digits = if mi == 2 { PU_DIGITS } else { PCT_DIGITS };
                                    stat_cells(&metric(s, mi), digits)[si].clone()
                                }
                            },
                        };
                        write!(out, "{text:>CELL_W$}").unwrap();
                    }
                    out.push('\n');
                }
            }
            out.push('\n');
        }
    }
    out
}
