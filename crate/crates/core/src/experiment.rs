//! Rate-target sweeps over cases, and their CSV form.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Deserialize;

use crate::channel::{
    generate_rayleigh, load_instance, Case, NetworkInstance, Order, RateTargets, StrategyConfig,
};
use crate::error::{Error, Result};
use crate::parallel::{map_items, Execution};
use crate::verify::{verify_duality, Feasibility, Tolerances};

pub const CSV_HEADER: &str = "case,rate_target,ul_power,dl_power,rel_gap,beta_resid,q_resid,status";

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Generated {
        seed: u64,
        relays: usize,
        users: usize,
        sigma2: f64,
        caps: Vec<f64>,
    },
    File(PathBuf),
    Inline(NetworkInstance),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Orders {
    /// Identity decoding and decompression orders.
    Natural,
    Explicit {
        tau: Order,
        rho: Order,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub source: InstanceSource,
    /// Symmetric per-user targets, strictly increasing.
    pub rates: Vec<f64>,
    pub cases: Vec<Case>,
    pub orders: Orders,
    pub output: Option<PathBuf>,
    pub tolerances: Tolerances,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            source: InstanceSource::Generated {
                seed: 7,
                relays: 3,
                users: 3,
                sigma2: 1.0,
                caps: vec![3.0; 3],
            },
            rates: (1..=8).map(|i| 0.25 * i as f64).collect(),
            cases: Case::ALL.to_vec(),
            orders: Orders::Natural,
            output: None,
            tolerances: Tolerances::default(),
        }
    }
}

impl SweepConfig {
    pub fn instance(&self) -> Result<NetworkInstance> {
        match &self.source {
            InstanceSource::Generated {
                seed,
                relays,
                users,
                sigma2,
                caps,
            } => {
                if *relays == 0 || *users == 0 {
                    return Err(Error::InvalidConfig("M and K must be positive".into()));
                }
                generate_rayleigh(*relays, *users, *seed)
                    .with_noise_power(*sigma2)?
                    .with_caps(caps.clone())
            }
            InstanceSource::File(path) => load_instance(path),
            InstanceSource::Inline(inst) => Ok(inst.clone()),
        }
    }

    pub fn strategy(&self, case: Case, instance: &NetworkInstance) -> Result<StrategyConfig> {
        let cfg = match &self.orders {
            Orders::Natural => StrategyConfig::natural(case, instance),
            Orders::Explicit { tau, rho } => StrategyConfig::new(case, tau.clone(), rho.clone()),
        };
        cfg.check(instance)?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without solving; returns the instance.
    pub fn validate(&self) -> Result<NetworkInstance> {
        if self.cases.is_empty() {
            return Err(Error::InvalidConfig("case set is empty".into()));
        }
        if self.rates.is_empty() {
            return Err(Error::InvalidConfig("rate grid is empty".into()));
        }
        if self.rates.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig(
                "rate grid must be strictly increasing".into(),
            ));
        }
        if self.rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidConfig(
                "rate targets must be finite and nonnegative".into(),
            ));
        }
        let inst = self.instance()?;
        for &case in &self.cases {
            self.strategy(case, &inst)?;
        }
        Ok(inst)
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CapsField {
    Uniform(f64),
    PerRelay(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RateField {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OrderField {
    Named(String),
    Explicit { tau: Vec<usize>, rho: Vec<usize> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct SweepFile {
    seed: Option<u64>,
    M: Option<usize>,
    K: Option<usize>,
    sigma2: Option<f64>,
    caps: Option<CapsField>,
    H: Option<serde_json::Value>,
    instance: Option<PathBuf>,
    rates: Option<RateField>,
    cases: Option<Vec<Case>>,
    orders: Option<OrderField>,
    output: Option<PathBuf>,
    tolerances: Option<Tolerances>,
}

fn rate_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(Error::InvalidConfig(format!(
            "bad rate range {start}..{stop} step {step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

/// Parses a sweep config; relative paths resolve against `base_dir`.
pub fn parse_sweep_config(text: &str, base_dir: &Path) -> Result<SweepConfig> {
    let file: SweepFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: Some(e.line()),
        field: None,
        message: e.to_string(),
    })?;
    let defaults = SweepConfig::default();
    let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };

    let source = match (&file.instance, &file.H, file.seed) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) | (None, Some(_), Some(_)) => {
            return Err(Error::InvalidConfig(
                "give exactly one of `instance`, inline `H`, or `seed`".into(),
            ))
        }
        (Some(path), None, None) => InstanceSource::File(resolve(path.clone())),
        (None, Some(h), None) => {
            let mut obj = serde_json::Map::new();
            obj.insert("M".into(), file.M.into());
            obj.insert("K".into(), file.K.into());
            obj.insert("sigma2".into(), file.sigma2.unwrap_or(1.0).into());
            let caps = match &file.caps {
                Some(CapsField::Uniform(c)) => vec![*c; file.M.unwrap_or(0)],
                Some(CapsField::PerRelay(v)) => v.clone(),
                None => vec![crate::channel::DEFAULT_CAP; file.M.unwrap_or(0)],
            };
            obj.insert("caps".into(), caps.into());
            obj.insert("H".into(), h.clone());
            let text = serde_json::to_string(&obj).expect("json");
            InstanceSource::Inline(crate::channel::parse_instance(&text)?)
        }
        (None, None, seed) => {
            let relays = file.M.unwrap_or(3);
            let caps = match &file.caps {
                Some(CapsField::Uniform(c)) => vec![*c; relays],
                Some(CapsField::PerRelay(v)) => v.clone(),
                None => vec![crate::channel::DEFAULT_CAP; relays],
            };
            InstanceSource::Generated {
                seed: seed.unwrap_or(7),
                relays,
                users: file.K.unwrap_or(3),
                sigma2: file.sigma2.unwrap_or(1.0),
                caps,
            }
        }
    };
    let rates = match file.rates {
        None => defaults.rates,
        Some(RateField::List(v)) => v,
        Some(RateField::Range { start, stop, step }) => rate_range(start, stop, step)?,
    };
    let orders = match file.orders {
        None => Orders::Natural,
        Some(OrderField::Named(s)) if s == "natural" => Orders::Natural,
        Some(OrderField::Named(s)) => {
            return Err(Error::InvalidConfig(format!("unknown order preset `{s}`")))
        }
        Some(OrderField::Explicit { tau, rho }) => Orders::Explicit {
            tau: Order::from_one_based(&tau)?,
            rho: Order::from_one_based(&rho)?,
        },
    };
    let cfg = SweepConfig {
        source,
        rates,
        cases: file.cases.unwrap_or(defaults.cases),
        orders,
        output: file.output.map(resolve),
        tolerances: file.tolerances.unwrap_or_default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_sweep_config(path: impl AsRef<Path>) -> Result<SweepConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_sweep_config(&text, path.parent().unwrap_or(Path::new(".")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Infeasible,
    /// One link feasible, the other not.
    Mismatch,
    /// Both feasible but some duality check failed.
    CheckFailed,
    /// A check failed at targets within the boundary margin of infeasibility.
    NearBoundary,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Infeasible => "infeasible",
            RowStatus::Mismatch => "mismatch",
            RowStatus::CheckFailed => "check_failed",
            RowStatus::NearBoundary => "near_boundary",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ok" => RowStatus::Ok,
            "infeasible" => RowStatus::Infeasible,
            "mismatch" => RowStatus::Mismatch,
            "check_failed" => RowStatus::CheckFailed,
            "near_boundary" => RowStatus::NearBoundary,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub case: Case,
    pub rate_target: f64,
    pub ul_power: Option<f64>,
    pub dl_power: Option<f64>,
    pub rel_gap: Option<f64>,
    pub beta_resid: Option<f64>,
    pub q_resid: Option<f64>,
    pub status: RowStatus,
}

impl SweepRow {
    /// The row as it reads back from CSV.
    pub fn rounded(&self) -> Self {
        let r = |x: Option<f64>| x.map(round_sig);
        Self {
            rate_target: round_sig(self.rate_target),
            ul_power: r(self.ul_power),
            dl_power: r(self.dl_power),
            rel_gap: r(self.rel_gap),
            beta_resid: r(self.beta_resid),
            q_resid: r(self.q_resid),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Solve time per row; not part of the CSV so output stays byte-stable.
    pub wall_times: Vec<Duration>,
}

impl SweepTable {
    pub fn all_infeasible(&self) -> bool {
        self.rows.iter().all(|r| r.status == RowStatus::Infeasible)
    }

    pub fn all_consistent(&self) -> bool {
        self.rows
            .iter()
            .all(|r| matches!(r.status, RowStatus::Ok | RowStatus::Infeasible))
    }

    pub fn rows_for(&self, case: Case) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.case == case)
    }
}

pub fn run_sweep(config: &SweepConfig, exec: Execution) -> Result<SweepTable> {
    let instance = config.validate()?;
    let mut cases = config.cases.clone();
    cases.sort();
    cases.dedup();
    let jobs: Vec<(Case, f64)> = cases
        .iter()
        .flat_map(|&c| config.rates.iter().map(move |&r| (c, r)))
        .collect();
    let strategies: Vec<(Case, StrategyConfig)> = cases
        .iter()
        .map(|&c| config.strategy(c, &instance).map(|s| (c, s)))
        .collect::<Result<_>>()?;
    let results = map_items(
        &jobs,
        exec,
        |&(case, rate)| -> Result<(SweepRow, Duration)> {
            let started = Instant::now();
            let strategy = &strategies
                .iter()
                .find(|(c, _)| *c == case)
                .expect("strategy per case")
                .1;
            let targets = RateTargets::symmetric(instance.num_users(), rate)?;
            let report = verify_duality(&instance, &targets, strategy, &config.tolerances)?;
            let status = match report.feasibility {
                Feasibility::BothInfeasible => RowStatus::Infeasible,
                Feasibility::UplinkOnly | Feasibility::DownlinkOnly => RowStatus::Mismatch,
                Feasibility::BothFeasible if report.pass => RowStatus::Ok,
                Feasibility::BothFeasible if report.near_boundary => RowStatus::NearBoundary,
                Feasibility::BothFeasible => RowStatus::CheckFailed,
            };
            let feasible = report.feasibility == Feasibility::BothFeasible;
            let keep = |x: Option<f64>| if feasible { x } else { None };
            let row = SweepRow {
                case,
                rate_target: rate,
                ul_power: keep(report.ul_sum_power),
                dl_power: keep(report.dl_sum_power),
                rel_gap: keep(report.rel_gap),
                beta_resid: keep(report.beta_resid),
                q_resid: keep(report.q_resid),
                status,
            };
            Ok((row, started.elapsed()))
        },
    );
    let mut table = SweepTable::default();
    for r in results {
        let (row, t) = r?;
        table.rows.push(row);
        table.wall_times.push(t);
    }
    Ok(table)
}

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("float round trip")
}

/// 12 significant digits, positional for moderate magnitudes and exponent form otherwise.
pub fn format_sig(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".into()
    } else if (1e-4..1e12).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

pub fn csv_string(table: &SweepTable) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let opt = |x: Option<f64>| x.map(format_sig).unwrap_or_default();
    w.write_record(CSV_HEADER.split(','))
        .expect("in-memory write");
    for r in &table.rows {
        w.write_record([
            r.case.to_string(),
            format_sig(r.rate_target),
            opt(r.ul_power),
            opt(r.dl_power),
            opt(r.rel_gap),
            opt(r.beta_resid),
            opt(r.q_resid),
            r.status.as_str().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn emit_csv(table: &SweepTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, csv_string(table)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_csv(text: &str) -> Result<SweepTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: Some(1),
            field: None,
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::Parse {
            line: Some(1),
            field: None,
            message: format!("unexpected header `{header}`"),
        });
    }
    let mut table = SweepTable::default();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line: Some(line),
            field: None,
            message: e.to_string(),
        })?;
        let bad = |field: &str, message: String| Error::Parse {
            line: Some(line),
            field: Some(field.into()),
            message,
        };
        let num = |idx: usize, field: &str| -> Result<Option<f64>> {
            let s = &rec[idx];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| bad(field, format!("{s}: {e}")))
            }
        };
        table.rows.push(SweepRow {
            case: rec[0]
                .parse()
                .map_err(|e: Error| bad("case", e.to_string()))?,
            rate_target: num(1, "rate_target")?
                .ok_or_else(|| bad("rate_target", "missing".into()))?,
            ul_power: num(2, "ul_power")?,
            dl_power: num(3, "dl_power")?,
            rel_gap: num(4, "rel_gap")?,
            beta_resid: num(5, "beta_resid")?,
            q_resid: num(6, "q_resid")?,
            status: RowStatus::parse(&rec[7])
                .ok_or_else(|| bad("status", format!("unknown status `{}`", &rec[7])))?,
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        assert_eq!(format_sig(0.25), "0.25");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(2.5e-13), "2.5e-13");
        assert_eq!(format_sig(123456789.12345679), "123456789.123");
    }

    #[test]
    fn ranges() {
        assert_eq!(rate_range(0.25, 2.0, 0.25).unwrap().len(), 8);
        assert!(rate_range(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn config_parsing() {
        let cfg = parse_sweep_config(
            r#"{"seed": 3, "M": 2, "K": 2, "caps": 2.5, "rates": [0.5, 1.0], "cases": ["I", "III"],
                "orders": {"tau": [2, 1], "rho": [1, 2]}, "output": "out.csv"}"#,
            Path::new("/tmp"),
        )
        .unwrap();
        assert_eq!(cfg.rates, vec![0.5, 1.0]);
        assert_eq!(cfg.cases, vec![Case::I, Case::III]);
        assert_eq!(cfg.output, Some(PathBuf::from("/tmp/out.csv")));
        assert_eq!(cfg.instance().unwrap().caps(), &[2.5, 2.5]);
        match cfg.orders {
            Orders::Explicit { tau, .. } => assert_eq!(tau.as_slice(), &[1, 0]),
            Orders::Natural => panic!("explicit orders expected"),
        }
    }

    #[test]
    fn config_errors() {
        let dir = Path::new(".");
        assert!(parse_sweep_config(r#"{"rates": [1.0, 0.5]}"#, dir).is_err());
        assert!(parse_sweep_config(r#"{"cases": []}"#, dir).is_err());
        assert!(parse_sweep_config(r#"{"ratez": [1.0]}"#, dir).is_err());
        assert!(parse_sweep_config(r#"{"orders": "reversed"}"#, dir).is_err());
        assert!(parse_sweep_config(
            r#"{"M": 2, "K": 2, "orders": {"tau": [1, 2, 3], "rho": [1, 2]}}"#,
            dir
        )
        .is_err());
    }
}
