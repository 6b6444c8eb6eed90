//! Network file formats.
//!
//! The canonical format is CSV. A network is either a directory holding
//! `case.csv`, `buses.csv`, `branches.csv` and optionally `cables.csv`, or a
//! single sectioned file where each table follows a `## <name>` marker line:
//!
//! ```text
//! ## case
//! key,value
//! base_kv,6.9
//! ## buses
//! id,kind,customers,p_kw_t0,p_kw_t1,q_kvar_t0,q_kvar_t1,bess_candidate
//! 1,substation,0,0,0,0,0,false
//! ## branches
//! from,to,r_ohm,x_ohm,ampacity_a,length_m,is_breaker,cable_type
//! ## cables
//! name,ampacity_a,r_ohm_per_km,x_ohm_per_km,cost_per_m,is_breaker,fixed_cost
//! ```
//!
//! Other lines starting with `#` are comments. `case` keys are `base_kv`,
//! `base_mva`, `v_min`, `v_max` and `substation_v` (a `;`-separated list
//! gives one setpoint per time step). The JSON mirror holds the same
//! tables as `{"case": .., "buses": [..], "branches": [..], "cables": [..]}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    BranchSpec, BusKind, BusSpec, CableCatalog, CableType, CaseParams, GridError, NetworkCase,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkFormat {
    Csv,
    Json,
}

impl NetworkFormat {
    /// `.json` files are JSON, everything else (including directories) is CSV.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => NetworkFormat::Json,
            _ => NetworkFormat::Csv,
        }
    }
}

/// A network together with the cable catalog shipped alongside it, if any.
#[derive(Clone, Debug)]
pub struct NetworkBundle {
    pub network: NetworkCase,
    pub catalog: Option<CableCatalog>,
}

#[derive(Serialize, Deserialize)]
struct JsonNetwork {
    case: CaseParams,
    buses: Vec<BusSpec>,
    branches: Vec<BranchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cables: Option<Vec<CableType>>,
}

fn read(path: &Path) -> Result<String, GridError> {
    std::fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_network(path: &Path, format: NetworkFormat) -> Result<NetworkCase, GridError> {
    Ok(load_bundle_as(path, format)?.network)
}

pub fn load_network_bundle(path: &Path) -> Result<NetworkBundle, GridError> {
    load_bundle_as(path, NetworkFormat::infer(path))
}

fn load_bundle_as(path: &Path, format: NetworkFormat) -> Result<NetworkBundle, GridError> {
    match format {
        NetworkFormat::Json => parse_json(&read(path)?),
        NetworkFormat::Csv if path.is_dir() => {
            let case = read(&path.join("case.csv"))?;
            let buses = read(&path.join("buses.csv"))?;
            let branches = read(&path.join("branches.csv"))?;
            let cables_path = path.join("cables.csv");
            let cables = if cables_path.exists() {
                Some(read(&cables_path)?)
            } else {
                None
            };
            from_tables(&case, &buses, &branches, cables.as_deref())
        }
        NetworkFormat::Csv => parse_sectioned_csv(&read(path)?),
    }
}

pub fn load_catalog(path: &Path) -> Result<CableCatalog, GridError> {
    parse_catalog_csv(&read(path)?)
}

pub fn parse_json(text: &str) -> Result<NetworkBundle, GridError> {
    let raw: JsonNetwork =
        serde_json::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
    let network = NetworkCase::new(raw.buses, raw.branches, raw.case)?;
    let catalog = raw.cables.map(CableCatalog::new).transpose()?;
    Ok(NetworkBundle { network, catalog })
}

pub fn write_network_json(net: &NetworkCase, catalog: Option<&CableCatalog>) -> String {
    let raw = JsonNetwork {
        case: net.params().clone(),
        buses: net.buses().to_vec(),
        branches: net.branches().to_vec(),
        cables: catalog.map(|c| c.entries().to_vec()),
    };
    serde_json::to_string_pretty(&raw).expect("network serializes")
}

pub fn parse_sectioned_csv(text: &str) -> Result<NetworkBundle, GridError> {
    let mut sections: BTreeMap<String, String> = BTreeMap::new();
    let mut current: Option<String> = None;
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix("##") {
            let name = name.trim().to_ascii_lowercase();
            if sections.contains_key(&name) {
                return Err(GridError::Parse(format!("section `{name}` appears twice")));
            }
            sections.insert(name.clone(), String::new());
            current = Some(name);
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match &current {
            Some(name) => {
                let body = sections.get_mut(name).expect("section exists");
                body.push_str(trimmed);
                body.push('\n');
            }
            None => {
                return Err(GridError::Parse(
                    "data before the first `## section` marker".into(),
                ))
            }
        }
    }
    let get = |name: &str| {
        sections
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| GridError::Parse(format!("missing `## {name}` section")))
    };
    from_tables(
        get("case")?,
        get("buses")?,
        get("branches")?,
        sections.get("cables").map(String::as_str),
    )
}

fn from_tables(
    case: &str,
    buses: &str,
    branches: &str,
    cables: Option<&str>,
) -> Result<NetworkBundle, GridError> {
    let params = parse_case(case)?;
    let buses = parse_buses(buses)?;
    let branches = parse_branches(branches)?;
    let network = NetworkCase::new(buses, branches, params)?;
    let catalog = cables.map(parse_catalog_csv).transpose()?;
    Ok(NetworkBundle { network, catalog })
}

struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn parse(text: &str, what: &str) -> Result<Self, GridError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| GridError::Parse(format!("{what}: {e}")))?
            .iter()
            .map(|h| h.to_ascii_lowercase())
            .collect();
        let rows = rdr
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| GridError::Parse(format!("{what}: {e}")))?;
        Ok(Self { headers, rows })
    }

    fn col(&self, name: &str, what: &str) -> Result<usize, GridError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| GridError::Parse(format!("{what}: missing column `{name}`")))
    }

    /// Columns `{prefix}0`, `{prefix}1`, ... in time order.
    fn series(&self, prefix: &str, what: &str) -> Result<Vec<usize>, GridError> {
        let mut cols: Vec<(usize, usize)> = Vec::new();
        for (i, h) in self.headers.iter().enumerate() {
            if let Some(rest) = h.strip_prefix(prefix) {
                let t: usize = rest
                    .parse()
                    .map_err(|_| GridError::Parse(format!("{what}: bad series column `{h}`")))?;
                cols.push((t, i));
            }
        }
        cols.sort();
        for (expect, (t, _)) in cols.iter().enumerate() {
            if *t != expect {
                return Err(GridError::Parse(format!(
                    "{what}: series `{prefix}` is missing step {expect}"
                )));
            }
        }
        Ok(cols.into_iter().map(|(_, i)| i).collect())
    }
}

fn field<'a>(row: &'a csv::StringRecord, col: usize, what: &str) -> Result<&'a str, GridError> {
    row.get(col).ok_or_else(|| {
        GridError::Parse(format!(
            "{what}: row {} is missing column {}",
            row.position().map_or(0, |p| p.line()),
            col + 1
        ))
    })
}

fn num<T: std::str::FromStr>(
    row: &csv::StringRecord,
    col: usize,
    what: &str,
) -> Result<T, GridError> {
    let s = field(row, col, what)?;
    s.parse().map_err(|_| {
        GridError::Parse(format!(
            "{what}: line {}: cannot parse `{s}`",
            row.position().map_or(0, |p| p.line())
        ))
    })
}

fn flag(row: &csv::StringRecord, col: usize, what: &str) -> Result<bool, GridError> {
    match field(row, col, what)?.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Ok(true),
        "false" | "0" | "no" | "n" | "" => Ok(false),
        other => Err(GridError::Parse(format!(
            "{what}: `{other}` is not a boolean"
        ))),
    }
}

fn parse_case(text: &str) -> Result<CaseParams, GridError> {
    let t = Table::parse(text, "case")?;
    let (kc, vc) = (t.col("key", "case")?, t.col("value", "case")?);
    let mut base_kv = None;
    let mut params = CaseParams::new(1.0);
    for row in &t.rows {
        let key = field(row, kc, "case")?.to_ascii_lowercase();
        let value = field(row, vc, "case")?;
        let parse = |s: &str| -> Result<f64, GridError> {
            s.trim()
                .parse()
                .map_err(|_| GridError::Parse(format!("case: `{key}` has bad value `{s}`")))
        };
        match key.as_str() {
            "base_kv" => base_kv = Some(parse(value)?),
            "base_mva" => params.base_mva = parse(value)?,
            "v_min" => params.v_min = parse(value)?,
            "v_max" => params.v_max = parse(value)?,
            "substation_v" => {
                params.substation_v = value.split(';').map(parse).collect::<Result<_, _>>()?;
            }
            other => return Err(GridError::Parse(format!("case: unknown key `{other}`"))),
        }
    }
    params.base_kv =
        base_kv.ok_or_else(|| GridError::Parse("case: `base_kv` is required".into()))?;
    Ok(params)
}

fn parse_buses(text: &str) -> Result<Vec<BusSpec>, GridError> {
    const W: &str = "buses";
    let t = Table::parse(text, W)?;
    let id = t.col("id", W)?;
    let kind = t.col("kind", W)?;
    let customers = t.col("customers", W)?;
    let cand = t.col("bess_candidate", W)?;
    let p = t.series("p_kw_t", W)?;
    let q = t.series("q_kvar_t", W)?;
    if p.len() != q.len() {
        return Err(GridError::HorizonMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    t.rows
        .iter()
        .map(|row| {
            let kind = match field(row, kind, W)?.to_ascii_lowercase().as_str() {
                "substation" | "slack" => BusKind::Substation,
                "load" | "pq" => BusKind::Load,
                other => return Err(GridError::Parse(format!("buses: unknown kind `{other}`"))),
            };
            let customers: i64 = num(row, customers, W)?;
            if customers < 0 {
                return Err(GridError::Unit(format!(
                    "buses: negative customer count {customers}"
                )));
            }
            Ok(BusSpec {
                id: num(row, id, W)?,
                kind,
                customers: customers as u32,
                load_p_kw: p
                    .iter()
                    .map(|&c| num(row, c, W))
                    .collect::<Result<_, _>>()?,
                load_q_kvar: q
                    .iter()
                    .map(|&c| num(row, c, W))
                    .collect::<Result<_, _>>()?,
                bess_candidate: flag(row, cand, W)?,
            })
        })
        .collect()
}

fn parse_branches(text: &str) -> Result<Vec<BranchSpec>, GridError> {
    const W: &str = "branches";
    let t = Table::parse(text, W)?;
    let cols = [
        "from",
        "to",
        "r_ohm",
        "x_ohm",
        "ampacity_a",
        "length_m",
        "is_breaker",
        "cable_type",
    ]
    .map(|c| t.col(c, W));
    let [from, to, r, x, amp, len, brk, ty] = cols;
    let (from, to, r, x, amp, len, brk, ty) = (from?, to?, r?, x?, amp?, len?, brk?, ty?);
    t.rows
        .iter()
        .map(|row| {
            Ok(BranchSpec {
                from: num(row, from, W)?,
                to: num(row, to, W)?,
                r_ohm: num(row, r, W)?,
                x_ohm: num(row, x, W)?,
                ampacity_a: num(row, amp, W)?,
                length_m: num(row, len, W)?,
                is_breaker: flag(row, brk, W)?,
                cable_type: field(row, ty, W)?.to_string(),
            })
        })
        .collect()
}

pub(crate) fn parse_catalog_csv(text: &str) -> Result<CableCatalog, GridError> {
    const W: &str = "cables";
    let t = Table::parse(text, W)?;
    let name = t.col("name", W)?;
    let amp = t.col("ampacity_a", W)?;
    let r = t.col("r_ohm_per_km", W)?;
    let x = t.col("x_ohm_per_km", W)?;
    let cost = t.col("cost_per_m", W)?;
    let brk = t.col("is_breaker", W)?;
    let fixed = t.col("fixed_cost", W)?;
    let entries = t
        .rows
        .iter()
        .map(|row| {
            Ok(CableType {
                name: field(row, name, W)?.to_string(),
                ampacity_a: num(row, amp, W)?,
                r_ohm_per_km: num(row, r, W)?,
                x_ohm_per_km: num(row, x, W)?,
                cost_per_m: num(row, cost, W)?,
                is_breaker: flag(row, brk, W)?,
                fixed_cost: num(row, fixed, W)?,
            })
        })
        .collect::<Result<Vec<_>, GridError>>()?;
    CableCatalog::new(entries)
}

/// Writes the sectioned single-file CSV form.
pub fn write_network_csv(net: &NetworkCase, catalog: Option<&CableCatalog>) -> String {
    let p = net.params();
    let mut out = String::new();
    out.push_str("## case\nkey,value\n");
    let _ = writeln!(out, "base_kv,{}", p.base_kv);
    let _ = writeln!(out, "base_mva,{}", p.base_mva);
    let _ = writeln!(out, "v_min,{}", p.v_min);
    let _ = writeln!(out, "v_max,{}", p.v_max);
    let sv: Vec<String> = p.substation_v.iter().map(f64::to_string).collect();
    let _ = writeln!(out, "substation_v,{}", sv.join(";"));
    out.push_str("## buses\nid,kind,customers");
    let horizon = net.horizon();
    for t in 0..horizon {
        let _ = write!(out, ",p_kw_t{t}");
    }
    for t in 0..horizon {
        let _ = write!(out, ",q_kvar_t{t}");
    }
    out.push_str(",bess_candidate\n");
    for b in net.buses() {
        let kind = match b.kind {
            BusKind::Substation => "substation",
            BusKind::Load => "load",
        };
        let _ = write!(out, "{},{},{}", b.id, kind, b.customers);
        for v in b.load_p_kw.iter().chain(&b.load_q_kvar) {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{}", b.bess_candidate);
    }
    out.push_str("## branches\nfrom,to,r_ohm,x_ohm,ampacity_a,length_m,is_breaker,cable_type\n");
    for br in net.branches() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            br.from,
            br.to,
            br.r_ohm,
            br.x_ohm,
            br.ampacity_a,
            br.length_m,
            br.is_breaker,
            br.cable_type
        );
    }
    if let Some(cat) = catalog {
        out.push_str("## cables\nname,ampacity_a,r_ohm_per_km,x_ohm_per_km,cost_per_m,is_breaker,fixed_cost\n");
        for c in cat.entries() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.name,
                c.ampacity_a,
                c.r_ohm_per_km,
                c.x_ohm_per_km,
                c.cost_per_m,
                c.is_breaker,
                c.fixed_cost
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
## case
key,value
base_kv,6.9
substation_v,1.0;1.01
## buses
id,kind,customers,p_kw_t0,p_kw_t1,q_kvar_t0,q_kvar_t1,bess_candidate
1,substation,0,0,0,0,0,false
2,load,3,50,60,10,12,true
3,load,2,40,30,8,6,false
## branches
from,to,r_ohm,x_ohm,ampacity_a,length_m,is_breaker,cable_type
1,2,0.1,0.05,300,500,false,legacy
3,2,0.2,0.1,200,800,false,legacy
";

    #[test]
    fn parses_sectioned_file() {
        let b = parse_sectioned_csv(SMALL).unwrap();
        let net = b.network;
        assert_eq!(net.buses().len(), 3);
        assert_eq!(net.horizon(), 2);
        assert_eq!(net.substation_v(1), 1.01);
        assert_eq!((net.branches()[1].from, net.branches()[1].to), (2, 3));
        assert!(b.catalog.is_none());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let net = parse_sectioned_csv(SMALL).unwrap().network;
        let again = parse_sectioned_csv(&write_network_csv(&net, None))
            .unwrap()
            .network;
        assert_eq!(net, again);
        let json = parse_json(&write_network_json(&net, Some(&CableCatalog::bundled()))).unwrap();
        assert_eq!(json.network, net);
        assert_eq!(json.catalog.unwrap(), CableCatalog::bundled());
    }

    #[test]
    fn malformed_row_is_a_parse_error() {
        let bad = SMALL.replace("0.2,0.1,200", "0.2,abc,200");
        assert!(matches!(
            parse_sectioned_csv(&bad),
            Err(GridError::Parse(_))
        ));
    }

    #[test]
    fn duplicate_branch_is_a_topology_error() {
        let bad = format!("{SMALL}2,3,0.2,0.1,200,800,false,legacy\n");
        assert!(matches!(
            parse_sectioned_csv(&bad),
            Err(GridError::Topology(_))
        ));
    }

    #[test]
    fn nonpositive_ampacity_is_a_unit_error() {
        let bad = SMALL.replace("0.1,0.05,300", "0.1,0.05,-3");
        assert!(matches!(parse_sectioned_csv(&bad), Err(GridError::Unit(_))));
    }
}
