use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ddcp",
    version,
    about = "Cable upgrade and battery storage co-planning for radial feeders",
    after_help = "Log verbosity is read from DDCP_LOG (error, warn, info, debug, trace)."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Loading and violation statistics over a penetration sweep.
    Vdq(Common),
    /// Cable upgrades for every overloaded branch.
    Vcu(Common),
    /// Battery siting and sizing without cable work.
    Vmbp(Common),
    /// Bottleneck diagnosis, top-N upgrades and storage sizing.
    Ddcp(Common),
    /// Largest penetration without violations, with and without storage.
    HostingCapacity(Common),
    /// Cable upgrades, storage only, co-planning and voltage uprating side by side.
    Compare(Common),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Vdq(_) => "vdq",
            Command::Vcu(_) => "vcu",
            Command::Vmbp(_) => "vmbp",
            Command::Ddcp(_) => "ddcp",
            Command::HostingCapacity(_) => "hosting-capacity",
            Command::Compare(_) => "compare",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Vdq(c)
            | Command::Vcu(c)
            | Command::Vmbp(c)
            | Command::Ddcp(c)
            | Command::HostingCapacity(c)
            | Command::Compare(c) => c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Peak-demand hour only.
    Snapshot,
    /// Every hour of the horizon.
    Horizon,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Network file (sectioned CSV or JSON) or CSV directory.
    #[arg(long)]
    pub net: PathBuf,
    /// Cable catalog CSV; defaults to the catalog in the network file, then
    /// the bundled one.
    #[arg(long)]
    pub cables: Option<PathBuf>,
    /// EV penetration as fractions: `0,0.2,0.5` or `0..1:0.1`.
    #[arg(long, default_value = "0")]
    pub penetration: String,
    /// Charger power in kW, list or range.
    #[arg(long = "charger-kw", default_value = "10")]
    pub charger_kw: String,
    /// Base voltage in kV, list or range; defaults to the network's.
    #[arg(long = "base-kv")]
    pub base_kv: Option<String>,
    #[arg(long, default_value_t = 42)]
    pub seed: u32,
    /// Charger power factor.
    #[arg(long, default_value_t = 1.0)]
    pub pf: f64,
    /// Upgrade counts for `ddcp` and `compare`: `N`, `LO..HI` or `all`.
    #[arg(long = "top-n")]
    pub top_n: Option<String>,
    /// Storage capital cost in $/kWh.
    #[arg(long = "bess-cap-cost")]
    pub bess_cap_cost: Option<f64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "ddcp-out")]
    pub out: PathBuf,
    /// Keep every solve on one thread.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub deterministic: bool,
    /// Wall-clock limit per branch-and-bound search, seconds.
    #[arg(long = "time-limit")]
    pub time_limit: Option<f64>,
    /// Load horizon of the violation check.
    #[arg(long, value_enum, default_value_t = Mode::Horizon)]
    pub mode: Mode,
    /// TOML file with `[solver]`, `[bess]`, `rho` and `lambda` settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Target voltage of the uprating strategy in `compare`, kV.
    #[arg(long = "uprate-kv", default_value_t = 13.8)]
    pub uprate_kv: f64,
}

/// Parses `a,b,c` items, each a number or an inclusive `lo..hi:step` range.
pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(format!("empty item in list '{text}'"));
        }
        match item.split_once("..") {
            None => out.push(parse_num(item)?),
            Some((lo, rest)) => {
                let (hi, step) = rest
                    .split_once(':')
                    .ok_or_else(|| format!("range '{item}' needs a step: lo..hi:step"))?;
                let (lo, hi, step) = (parse_num(lo)?, parse_num(hi)?, parse_num(step)?);
                if !(step > 0.0) || hi < lo {
                    return Err(format!("invalid range '{item}'"));
                }
                // Integer stepping avoids drift; round to 12 digits so
                // 0..1:0.1 yields 0.3, not 0.30000000000000004.
                let n = ((hi - lo) / step + 1e-9).floor() as usize;
                for i in 0..=n {
                    let v = lo + i as f64 * step;
                    out.push((v * 1e12).round() / 1e12);
                }
            }
        }
    }
    Ok(out)
}

fn parse_num(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("'{s}' is not a number"))
}

/// Upgrade-count selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopN {
    /// The default window near full upgrade.
    Default,
    All,
    Range(usize, usize),
}

pub fn parse_top_n(text: Option<&str>) -> Result<TopN, String> {
    let Some(t) = text.map(str::trim) else {
        return Ok(TopN::Default);
    };
    if t == "all" {
        return Ok(TopN::All);
    }
    let int = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| format!("'{s}' is not a count"))
    };
    match t.split_once("..") {
        None => {
            let n = int(t)?;
            Ok(TopN::Range(n, n))
        }
        Some((lo, hi)) => {
            let (lo, hi) = (int(lo)?, int(hi.trim_start_matches('='))?);
            if lo > hi {
                return Err(format!("empty range '{t}'"));
            }
            Ok(TopN::Range(lo, hi))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("0,0.5, 1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(
            parse_list("0..1:0.25").unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(parse_list("0..1:0.1").unwrap()[3], 0.3);
        assert_eq!(parse_list("5,10..15:5").unwrap(), vec![5.0, 10.0, 15.0]);
        assert!(parse_list("").is_err());
        assert!(parse_list("1..0:0.1").is_err());
        assert!(parse_list("0..1").is_err());
        assert!(parse_list("x").is_err());
    }

    #[test]
    fn top_n_forms() {
        assert_eq!(parse_top_n(None).unwrap(), TopN::Default);
        assert_eq!(parse_top_n(Some("all")).unwrap(), TopN::All);
        assert_eq!(parse_top_n(Some("2")).unwrap(), TopN::Range(2, 2));
        assert_eq!(parse_top_n(Some("0..3")).unwrap(), TopN::Range(0, 3));
        assert_eq!(parse_top_n(Some("1..=3")).unwrap(), TopN::Range(1, 3));
        assert!(parse_top_n(Some("3..1")).is_err());
    }
}
