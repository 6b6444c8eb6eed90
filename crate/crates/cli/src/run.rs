use std::path::Path;

use ddcp_core::ev::{scenario_loads, EvConfig, LoadMode, LoadSet};
use ddcp_core::grid::{load_catalog, load_network_bundle, CableCatalog, NetworkCase};
use ddcp_core::models::{BessPlan, ReportStatus, ViolationReport};
use ddcp_core::pipeline::{
    check_violations, compare_strategies, diagnose_bottlenecks, hosting_capacity, run_ddcp_ranked,
    run_vcu, run_vmbp, Bottleneck, CompareOptions, DdcpRow, HostingOptions, NRange,
    PipelineError, PlanningParams, SelectedUpgrade,
};
use log::info;
use serde::Serialize;

use crate::args::{parse_list, parse_top_n, Command, Mode, TopN};
use crate::report::{self, CaseKey, SweepCell, Table};

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    /// Infeasible plan or model collapse; reports are still written.
    Infeasible = 1,
    Usage = 2,
}

#[derive(Debug)]
pub enum RunError {
    /// Bad flags or unreadable inputs.
    Usage(String),
    /// A workflow that could not finish.
    Failed(String),
}

impl From<PipelineError> for RunError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Grid(_) | PipelineError::Loads(_) | PipelineError::BadRange { .. } | PipelineError::Usage(_) => {
                RunError::Usage(e.to_string())
            }
            other => RunError::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Failed(format!("cannot write reports: {e}"))
    }
}

/// Everything a subcommand needs, resolved from the flags.
pub struct RunConfig {
    pub command: &'static str,
    pub net: NetworkCase,
    pub catalog: CableCatalog,
    pub penetrations: Vec<f64>,
    pub charger_kw: Vec<f64>,
    pub base_kv: Vec<f64>,
    pub seed: u32,
    pub pf: f64,
    pub top_n: TopN,
    pub mode: LoadMode,
    pub params: PlanningParams,
    pub uprate_kv: f64,
    /// Header lines written into every report.
    pub header: Vec<String>,
}

impl RunConfig {
    pub fn from_args(cmd: &Command) -> Result<Self, RunError> {
        let c = cmd.common();
        let usage = RunError::Usage;
        let bundle = load_network_bundle(&c.net).map_err(|e| usage(e.to_string()))?;
        let catalog = match &c.cables {
            Some(p) => load_catalog(p).map_err(|e| usage(e.to_string()))?,
            None => bundle.catalog.clone().unwrap_or_else(CableCatalog::bundled),
        };
        let mut params = match &c.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str::<PlanningParams>(&text)
                    .map_err(|e| usage(format!("bad config {}: {e}", p.display())))?
            }
            None => PlanningParams::default(),
        };
        if let Some(cost) = c.bess_cap_cost {
            params.bess.c_cap = cost;
        }
        params.bess.validate().map_err(|e| usage(e.to_string()))?;
        params.solver.deterministic = c.deterministic;
        if c.time_limit.is_some() {
            params.solver.time_limit = c.time_limit;
        }
        if params.solver.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(usage("--time-limit must be positive".into()));
        }
        let penetrations = parse_list(&c.penetration).map_err(usage)?;
        if let Some(p) = penetrations.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(usage(format!(
                "penetration {p} is outside [0, 1]; give fractions, not percent"
            )));
        }
        let charger_kw = parse_list(&c.charger_kw).map_err(usage)?;
        if charger_kw.iter().any(|&k| !(k > 0.0)) {
            return Err(usage("--charger-kw values must be positive".into()));
        }
        let base_kv = match &c.base_kv {
            Some(s) => parse_list(s).map_err(usage)?,
            None => vec![bundle.network.params().base_kv],
        };
        if base_kv.iter().any(|&k| !(k > 0.0)) {
            return Err(usage("--base-kv values must be positive".into()));
        }
        if !(c.pf > 0.0 && c.pf <= 1.0) {
            return Err(usage(format!("--pf must lie in (0, 1], got {}", c.pf)));
        }
        let top_n = parse_top_n(c.top_n.as_deref()).map_err(usage)?;
        let mode = match c.mode {
            Mode::Snapshot => LoadMode::Snapshot,
            Mode::Horizon => LoadMode::Horizon,
        };
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let net_params = bundle.network.params();
        let header = vec![
            format!(
                "run: command={} net={} seed={} pf={} penetration={} charger_kw={} base_kv={} mode={:?}",
                cmd.name(),
                c.net.display(),
                c.seed,
                c.pf,
                join(&penetrations),
                join(&charger_kw),
                join(&base_kv),
                c.mode,
            ),
            format!(
                "case: base_mva={} v_min={} v_max={} buses={} branches={}",
                net_params.base_mva,
                net_params.v_min,
                net_params.v_max,
                bundle.network.buses().len(),
                bundle.network.branches().len()
            ),
            report::bess_line(&params.bess),
        ];
        Ok(Self {
            command: cmd.name(),
            net: bundle.network,
            catalog,
            penetrations,
            charger_kw,
            base_kv,
            seed: c.seed,
            pf: c.pf,
            top_n,
            mode,
            params,
            uprate_kv: c.uprate_kv,
            header,
        })
    }

    fn ev(&self, penetration: f64, charger_kw: f64) -> EvConfig {
        EvConfig {
            power_factor: self.pf,
            ..EvConfig::new(penetration, charger_kw, self.seed)
        }
    }

    fn network_at(&self, kv: f64) -> Result<NetworkCase, RunError> {
        if kv == self.net.params().base_kv {
            Ok(self.net.clone())
        } else {
            Ok(self.net.rebase_voltage(kv).map_err(PipelineError::from)?)
        }
    }

    /// The one scenario of a non-sweep command.
    fn single(&self) -> Result<(CaseKey, NetworkCase, LoadSet), RunError> {
        let one = |v: &[f64], flag: &str| match v {
            [x] => Ok(*x),
            _ => Err(RunError::Usage(format!(
                "{} takes a single {flag} value",
                self.command
            ))),
        };
        let key = CaseKey {
            base_kv: one(&self.base_kv, "--base-kv")?,
            charger_kw: one(&self.charger_kw, "--charger-kw")?,
            penetration: one(&self.penetrations, "--penetration")?,
        };
        let net = self.network_at(key.base_kv)?;
        let loads = scenario_loads(&net, &self.ev(key.penetration, key.charger_kw), LoadMode::Horizon)
            .map_err(PipelineError::from)?;
        Ok((key, net, loads))
    }

    fn range(&self) -> Option<NRange> {
        match self.top_n {
            TopN::Default => None,
            TopN::All => Some(NRange::all()),
            TopN::Range(lo, hi) => Some(NRange { lo, hi }),
        }
    }
}

/// Files and console text produced by one run.
pub struct Output {
    pub exit: Exit,
    pub tables: Vec<Table>,
    pub json: Vec<(&'static str, String)>,
    pub summary: String,
}

impl Output {
    fn new(exit: Exit, summary: String) -> Self {
        Self {
            exit,
            tables: Vec::new(),
            json: Vec::new(),
            summary,
        }
    }

    /// Writes every file under `dir`, then `summary.txt`.
    pub fn write(&self, dir: &Path, header: &[String]) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for t in &self.tables {
            report::write_table(dir, header, t)?;
        }
        for (name, text) in &self.json {
            std::fs::write(dir.join(name), text)?;
        }
        std::fs::write(dir.join("summary.txt"), &self.summary)
    }
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Output, RunError> {
    match cmd {
        Command::Vdq(_) => vdq(cfg),
        Command::Vcu(_) => vcu(cfg),
        Command::Vmbp(_) => vmbp(cfg),
        Command::Ddcp(_) => ddcp(cfg),
        Command::HostingCapacity(_) => hosting(cfg),
        Command::Compare(_) => compare(cfg),
    }
}

fn collapsed(rep: &ViolationReport) -> bool {
    rep.status != ReportStatus::Solved
}

fn vdq(cfg: &RunConfig) -> Result<Output, RunError> {
    let mut cells = Vec::new();
    let mut reports = Vec::new();
    for &kv in &cfg.base_kv {
        let net = cfg.network_at(kv)?;
        for &kw in &cfg.charger_kw {
            for &p in &cfg.penetrations {
                let key = CaseKey {
                    base_kv: kv,
                    charger_kw: kw,
                    penetration: p,
                };
                let loads = scenario_loads(&net, &cfg.ev(p, kw), LoadMode::Horizon)
                    .map_err(PipelineError::from)?;
                let rep = check_violations(&net, &loads, cfg.mode, &cfg.params.solver)?;
                info!("{kv} kV, {kw} kW, {:.1}%: {:?}", p * 100.0, rep.status);
                cells.push(SweepCell::of(key, &rep));
                reports.push((key, rep));
            }
        }
    }
    let rows: Vec<_> = reports.iter().map(|(k, r)| (*k, "check", r)).collect();
    let exit = if reports.iter().any(|(_, r)| collapsed(r)) {
        Exit::Infeasible
    } else {
        Exit::Ok
    };
    let mut out = Output::new(exit, report::emit_summary(&cells));
    out.tables = vec![
        report::stats_table(&cells),
        report::violations_table(&rows),
        report::voltages_table(&rows),
    ];
    Ok(out)
}

fn check_line(label: &str, rep: &ViolationReport) -> String {
    if !rep.solved() {
        return format!("{label}: {}\n", report::status_label(rep.status));
    }
    format!(
        "{label}: {} overloaded branches, {} low-voltage points, max loading {} %, min voltage {} p.u.\n",
        rep.overloaded_branches().len(),
        rep.voltage_violations().len(),
        report::num(rep.loading_stats().max, 4),
        report::num(rep.min_voltage(), 6)
    )
}

fn vcu(cfg: &RunConfig) -> Result<Output, RunError> {
    let (key, net, loads) = cfg.single()?;
    let res = run_vcu(&net, &loads, &cfg.catalog, &cfg.params)?;
    let mut summary = String::from("CABLE UPGRADE\n");
    summary += &check_line("before", &res.before);
    let mut rows = vec![(key, "before", &res.before)];
    if let Some(after) = &res.after {
        rows.push((key, "after", after));
    }
    let mut tables = Vec::new();
    match &res.plan {
        Some(plan) => {
            summary += &format!(
                "{} branches upgraded, total cost {}\n",
                plan.upgrades.len(),
                report::num(plan.total_cost, 2)
            );
            for w in &plan.warnings {
                summary += &format!("warning: {w}\n");
            }
            tables.push(report::upgrade_plan_table(plan));
        }
        None => summary += &format!("no plan: solver status {:?}\n", res.status),
    }
    if let Some(after) = &res.after {
        summary += &check_line("after", after);
    }
    tables.push(report::violations_table(&rows));
    tables.push(report::voltages_table(&rows));
    let exit = if res.feasible() { Exit::Ok } else { Exit::Infeasible };
    let mut out = Output::new(exit, summary);
    out.tables = tables;
    Ok(out)
}

fn bess_summary(plan: &BessPlan) -> String {
    let mut s = format!(
        "{} units, {} kWh, cost {}\n",
        plan.units.len(),
        report::num(plan.total_capacity_kwh, 3),
        report::num(plan.total_cost, 2)
    );
    for u in &plan.units {
        s += &format!("  bus {}: {} kWh\n", u.bus, report::num(u.capacity_kwh, 3));
    }
    for w in &plan.warnings {
        s += &format!("warning: {w}\n");
    }
    s
}

fn vmbp(cfg: &RunConfig) -> Result<Output, RunError> {
    let (key, net, loads) = cfg.single()?;
    let res = run_vmbp(&net, &loads, &cfg.params)?;
    let mut summary = String::from("STORAGE PLAN\n");
    match &res.plan {
        Some(plan) => summary += &bess_summary(plan),
        None => summary += &format!("no plan: solver status {:?}\n", res.status),
    }
    let mut rows = Vec::new();
    if let Some(after) = &res.after {
        summary += &check_line("scheduled check", after);
        rows.push((key, "after", after));
    }
    let exit = if res.feasible() { Exit::Ok } else { Exit::Infeasible };
    let mut out = Output::new(exit, summary);
    out.tables = vec![
        report::bess_plan_table(res.plan.as_ref()),
        report::bess_schedule_table(res.plan.as_ref()),
        report::violations_table(&rows),
        report::voltages_table(&rows),
    ];
    Ok(out)
}

#[derive(Serialize)]
struct CheckSummary {
    status: ReportStatus,
    clean: bool,
    overloaded_branches: usize,
    low_voltage_points: usize,
    max_loading_pct: f64,
    min_voltage_pu: f64,
}

impl CheckSummary {
    fn of(rep: &ViolationReport) -> Self {
        Self {
            status: rep.status,
            clean: rep.is_clean(),
            overloaded_branches: rep.overloaded_branches().len(),
            low_voltage_points: rep.voltage_violations().len(),
            max_loading_pct: rep.loading_stats().max,
            min_voltage_pu: rep.min_voltage(),
        }
    }
}

#[derive(Serialize)]
struct DdcpJson<'a> {
    bottlenecks: &'a [Bottleneck],
    diagnostic_objective: f64,
    diagnostic_storage_kwh: f64,
    range: NRange,
    rows: &'a [DdcpRow],
    chosen_n: Option<usize>,
    total_cost: Option<f64>,
    upgrades: &'a [SelectedUpgrade],
    bess: Option<&'a BessPlan>,
    check: Option<CheckSummary>,
}

fn ddcp(cfg: &RunConfig) -> Result<Output, RunError> {
    let (key, net, loads) = cfg.single()?;
    let ranking = diagnose_bottlenecks(&net, &loads, &cfg.params)?;
    let mut notes = Vec::new();
    let range = match cfg.range() {
        Some(r) if r.hi != usize::MAX && r.hi > ranking.len() => {
            if r.lo > ranking.len() {
                return Err(RunError::Usage(format!(
                    "--top-n starts at {} but only {} bottleneck branches were found",
                    r.lo,
                    ranking.len()
                )));
            }
            notes.push(format!(
                "note: --top-n capped at {} bottleneck branches\n",
                ranking.len()
            ));
            Some(NRange { lo: r.lo, hi: ranking.len() })
        }
        r => r,
    };
    let res = run_ddcp_ranked(&net, &loads, &cfg.catalog, &cfg.params, ranking, range)?;
    let mut s = String::from("BOTTLENECKS\n");
    for n in &notes {
        s += n;
    }
    s += &format!(
        "{:>6}{:>8}{:>8}{:>14}{:>14}{:>14}\n",
        "rank", "from", "to", "slack_sum", "peak_a", "ampacity_a"
    );
    for (i, b) in res.ranking.ranked.iter().enumerate() {
        s += &format!(
            "{:>6}{:>8}{:>8}{:>14}{:>14}{:>14}\n",
            i + 1,
            b.from,
            b.to,
            report::num(b.slack_sum, 6),
            report::num(b.relaxed_peak_a, 3),
            report::num(b.ampacity_a, 3)
        );
    }
    s += "\nTOP-N SWEEP\n";
    s += &format!(
        "{:>4}{:>10}{:>16}{:>16}{:>16}{:>16}\n",
        "N", "feasible", "cable_cost", "bess_cost", "bess_kwh", "total_cost"
    );
    for r in &res.rows {
        s += &format!(
            "{:>4}{:>10}{:>16}{:>16}{:>16}{:>16}\n",
            r.n,
            r.feasible,
            report::num(r.cable_cost, 2),
            report::num(r.bess_cost, 2),
            report::num(r.bess_capacity_kwh, 3),
            report::num(r.total_cost, 2)
        );
    }
    match (res.chosen_n, res.total_cost) {
        (Some(n), Some(total)) => {
            s += &format!("\nchosen N = {n}, total cost {}\n", report::num(total, 2));
        }
        _ => s += "\nno upgrade count in the range is feasible\n",
    }
    let mut rows = Vec::new();
    if let Some(check) = &res.check {
        s += &check_line("final check", check);
        rows.push((key, "after", check));
    }
    let feasible = res.feasible() && res.check.as_ref().is_some_and(|c| c.is_clean());
    let body = DdcpJson {
        bottlenecks: &res.ranking.ranked,
        diagnostic_objective: res.ranking.objective,
        diagnostic_storage_kwh: res.ranking.storage_kwh,
        range: res.range,
        rows: &res.rows,
        chosen_n: res.chosen_n,
        total_cost: res.total_cost,
        upgrades: &res.upgrades,
        bess: res.bess.as_ref(),
        check: res.check.as_ref().map(CheckSummary::of),
    };
    let mut out = Output::new(if feasible { Exit::Ok } else { Exit::Infeasible }, s);
    out.json.push(("ddcp_result.json", report::to_json(&cfg.header, &body)));
    out.tables = vec![
        report::selected_table(&res.upgrades),
        report::bess_plan_table(res.bess.as_ref()),
        report::bess_schedule_table(res.bess.as_ref()),
        report::violations_table(&rows),
        report::voltages_table(&rows),
    ];
    Ok(out)
}

fn hosting(cfg: &RunConfig) -> Result<Output, RunError> {
    let mut results = Vec::new();
    for &kv in &cfg.base_kv {
        for &kw in &cfg.charger_kw {
            for with_bess in [false, true] {
                let opts = HostingOptions {
                    base_kv: Some(kv),
                    seed: cfg.seed,
                    power_factor: cfg.pf,
                    ..HostingOptions::new(kw, with_bess)
                };
                let r = hosting_capacity(&cfg.net, &opts, &cfg.params)?;
                info!("{kv} kV, {kw} kW, storage {with_bess}: {}%", r.threshold_pct);
                results.push(r);
            }
        }
    }
    let mut s = String::from("HOSTING CAPACITY\n");
    s += &format!(
        "{:>10}{:>12}{:>20}{:>20}\n",
        "base kV", "charger kW", "violation onset %", "storage limit %"
    );
    for pair in results.chunks(2) {
        s += &format!(
            "{:>10}{:>12}{:>20}{:>20}\n",
            report::num(pair[0].base_kv, 2),
            report::num(pair[0].charger_kw, 1),
            report::num(pair[0].threshold_pct, 2),
            report::num(pair[1].threshold_pct, 2)
        );
    }
    let mut out = Output::new(Exit::Ok, s);
    out.tables = vec![report::hosting_table(&results)];
    Ok(out)
}

fn compare(cfg: &RunConfig) -> Result<Output, RunError> {
    let (_, net, loads) = cfg.single()?;
    let opts = CompareOptions {
        uprate_kv: cfg.uprate_kv,
        ddcp_range: cfg.range(),
    };
    let results = compare_strategies(&net, &loads, &cfg.catalog, &cfg.params, &opts)?;
    let mut s = String::from("STRATEGY COMPARISON\n");
    s += &format!(
        "{:<12}{:>10}{:>16}{:>16}{:>16}{:>10}\n",
        "strategy", "feasible", "cable_cost", "bess_cost", "total_cost", "residual"
    );
    for r in &results {
        s += &format!(
            "{:<12}{:>10}{:>16}{:>16}{:>16}{:>10}\n",
            r.strategy.label(),
            r.feasible,
            report::num(r.cable_cost, 2),
            report::num(r.bess_cost, 2),
            report::num(r.total_cost, 2),
            r.residual_violations.map_or("-".to_string(), |v| v.to_string())
        );
    }
    let exit = if results.iter().any(|r| r.feasible) {
        Exit::Ok
    } else {
        Exit::Infeasible
    };
    let mut out = Output::new(exit, s);
    out.tables = vec![report::compare_table(&results)];
    Ok(out)
}
