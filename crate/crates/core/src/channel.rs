//! Network instances, rate targets and strategy configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::ComplexMatrix;
use crate::rng::SplitMix64;

/// Relays, users, channel, noise power and fronthaul capacities.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    channel: ComplexMatrix,
    noise_power: f64,
    caps: Vec<f64>,
}

impl NetworkInstance {
    pub fn new(channel: ComplexMatrix, noise_power: f64, caps: Vec<f64>) -> Result<Self> {
        if channel.rows() == 0 || channel.cols() == 0 {
            return Err(Error::DimensionMismatch(
                "instance needs at least one relay and one user".into(),
            ));
        }
        if caps.len() != channel.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} fronthaul caps for {} relays",
                caps.len(),
                channel.rows()
            )));
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        if let Some((m, c)) = caps
            .iter()
            .enumerate()
            .find(|(_, c)| !(**c > 0.0 && c.is_finite()))
        {
            return Err(Error::InvalidConfig(format!(
                "fronthaul cap of relay {m} must be positive, got {c}"
            )));
        }
        if channel
            .as_slice()
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidConfig(
                "channel entries must be finite".into(),
            ));
        }
        Ok(Self {
            channel,
            noise_power,
            caps,
        })
    }

    pub fn num_relays(&self) -> usize {
        self.channel.rows()
    }

    pub fn num_users(&self) -> usize {
        self.channel.cols()
    }

    /// The M x K channel, entry (m, k) is the gain from user k to relay m.
    pub fn channel(&self) -> &ComplexMatrix {
        &self.channel
    }

    #[inline]
    pub fn h(&self, m: usize, k: usize) -> Complex64 {
        self.channel.get(m, k)
    }

    /// Channel vector of user `k` across relays.
    pub fn user_channel(&self, k: usize) -> Vec<Complex64> {
        self.channel.column(k)
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn with_caps(mut self, caps: Vec<f64>) -> Result<Self> {
        let ch = std::mem::replace(&mut self.channel, ComplexMatrix::zeros(0, 0));
        Self::new(ch, self.noise_power, caps)
    }

    pub fn with_uniform_cap(self, cap: f64) -> Result<Self> {
        let m = self.num_relays();
        self.with_caps(vec![cap; m])
    }

    pub fn with_noise_power(self, sigma2: f64) -> Result<Self> {
        Self::new(self.channel, sigma2, self.caps)
    }

    /// Instance with a single relay and a single user.
    pub fn scalar(h: Complex64, sigma2: f64, cap: f64) -> Result<Self> {
        Self::new(ComplexMatrix::from_fn(1, 1, |_, _| h), sigma2, vec![cap])
    }
}

/// Per-user target rates in bits per symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateTargets(Vec<f64>);

impl RateTargets {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "rate targets must be finite and nonnegative, got {r}"
            )));
        }
        Ok(Self(rates))
    }

    pub fn symmetric(k: usize, rate: f64) -> Result<Self> {
        Self::new(vec![rate; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|r| r * s).collect())
    }

    /// `2^R_k - 1` per user.
    pub fn sinr_targets(&self) -> Vec<f64> {
        self.0.iter().map(|r| r.exp2() - 1.0).collect()
    }
}

/// Uplink and downlink coding strategy pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Case {
    /// IN + TIN uplink, IN + LIN downlink.
    I,
    /// IN + SIC uplink, IN + DPC downlink.
    II,
    /// WZ + TIN uplink, MV + LIN downlink.
    III,
    /// WZ + SIC uplink, MV + DPC downlink.
    IV,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::I, Case::II, Case::III, Case::IV];

    pub fn successive(self) -> bool {
        matches!(self, Case::II | Case::IV)
    }

    pub fn joint_compression(self) -> bool {
        matches!(self, Case::III | Case::IV)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::I => "I",
            Case::II => "II",
            Case::III => "III",
            Case::IV => "IV",
        })
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "1" => Ok(Case::I),
            "II" | "2" => Ok(Case::II),
            "III" | "3" => Ok(Case::III),
            "IV" | "4" => Ok(Case::IV),
            other => Err(Error::InvalidConfig(format!(
                "unknown case `{other}` (expected I, II, III or IV)"
            ))),
        }
    }
}

/// A permutation of `0..n`; position `i` holds the item processed `i`-th.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Order(Vec<usize>);

impl Order {
    pub fn new(items: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; items.len()];
        for &i in &items {
            if i >= items.len() || seen[i] {
                return Err(Error::InvalidConfig(format!(
                    "{items:?} is not a permutation of 0..{}",
                    items.len()
                )));
            }
            seen[i] = true;
        }
        Ok(Self(items))
    }

    /// Builds from 1-based labels.
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "{labels:?}: labels are 1-based"
            )));
        }
        Self::new(labels.iter().map(|l| l - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }

    /// Position of each item: `positions()[item] = i` where `self[i] = item`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (i, &item) in self.0.iter().enumerate() {
            pos[item] = i;
        }
        pos
    }

    /// Every permutation of `0..n` in lexicographic order.
    pub fn all(n: usize) -> Vec<Order> {
        fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Order>) {
            if prefix.len() == used.len() {
                out.push(Order(prefix.clone()));
                return;
            }
            for i in 0..used.len() {
                if !used[i] {
                    used[i] = true;
                    prefix.push(i);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[i] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; n], &mut out);
        out
    }
}

impl std::ops::Index<usize> for Order {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// Case plus the uplink decoding order over users and decompression order over relays.
/// Downlink orders are always the reversals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyConfig {
    pub case: Case,
    pub decode_order: Order,
    pub decompress_order: Order,
}

impl StrategyConfig {
    pub fn new(case: Case, decode_order: Order, decompress_order: Order) -> Self {
        Self {
            case,
            decode_order,
            decompress_order,
        }
    }

    pub fn natural(case: Case, instance: &NetworkInstance) -> Self {
        Self::new(
            case,
            Order::identity(instance.num_users()),
            Order::identity(instance.num_relays()),
        )
    }

    pub fn encode_order(&self) -> Order {
        self.decode_order.reversed()
    }

    pub fn compress_order(&self) -> Order {
        self.decompress_order.reversed()
    }

    pub fn check(&self, instance: &NetworkInstance) -> Result<()> {
        if self.decode_order.len() != instance.num_users() {
            return Err(Error::DimensionMismatch(format!(
                "decoding order has {} entries for {} users",
                self.decode_order.len(),
                instance.num_users()
            )));
        }
        if self.decompress_order.len() != instance.num_relays() {
            return Err(Error::DimensionMismatch(format!(
                "decompression order has {} entries for {} relays",
                self.decompress_order.len(),
                instance.num_relays()
            )));
        }
        Ok(())
    }
}

/// Default noise power of generated instances.
pub const DEFAULT_NOISE_POWER: f64 = 1.0;
/// Default per-relay fronthaul capacity of generated instances, bits per symbol.
pub const DEFAULT_CAP: f64 = 3.0;

/// i.i.d. CN(0, 1) channel entries drawn row-major from [`SplitMix64`], one Box-Muller pair per entry.
pub fn generate_rayleigh(m: usize, k: usize, seed: u64) -> NetworkInstance {
    assert!(m >= 1 && k >= 1, "need at least one relay and one user");
    let mut rng = SplitMix64::new(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let channel = ComplexMatrix::from_fn(m, k, |_, _| {
        let (a, b) = rng.normal_pair();
        Complex64::new(a * s, b * s)
    });
    NetworkInstance::new(channel, DEFAULT_NOISE_POWER, vec![DEFAULT_CAP; m])
        .expect("generated instance is valid")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    /// Relays receiving no beamformer energy.
    pub inactive_relays: Vec<usize>,
    /// Users whose beamformer is not unit norm.
    pub non_unit_columns: Vec<usize>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.inactive_relays.is_empty() && self.non_unit_columns.is_empty()
    }
}

pub fn validate(instance: &NetworkInstance, beamformers: &ComplexMatrix) -> ValidationReport {
    let (m, k) = (instance.num_relays(), instance.num_users());
    let mut report = ValidationReport::default();
    if beamformers.rows() != m || beamformers.cols() != k {
        report.inactive_relays = (0..m).collect();
        report.non_unit_columns = (0..k).collect();
        return report;
    }
    for r in 0..m {
        let load: f64 = (0..k).map(|u| beamformers.get(r, u).norm_sqr()).sum();
        if load <= 1e-12 {
            report.inactive_relays.push(r);
        }
    }
    for u in 0..k {
        let n2: f64 = (0..m).map(|r| beamformers.get(r, u).norm_sqr()).sum();
        if (n2 - 1.0).abs() > 1e-9 {
            report.non_unit_columns.push(u);
        }
    }
    report
}

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct InstanceFile {
    M: usize,
    K: usize,
    sigma2: f64,
    caps: Vec<f64>,
    H: ChannelEntries,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ChannelEntries {
    Flat(Vec<[f64; 2]>),
    Rows(Vec<Vec<[f64; 2]>>),
}

fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.find(&needle)
        .map(|pos| text[..pos].matches('\n').count() + 1)
}

fn field_error(text: &str, key: &str, field: String, message: String) -> Error {
    Error::Parse {
        line: line_of(text, key),
        field: Some(field),
        message,
    }
}

pub fn parse_instance(text: &str) -> Result<NetworkInstance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: Some(e.line()),
        field: None,
        message: e.to_string(),
    })?;
    instance_from_file(file, text)
}

fn instance_from_file(file: InstanceFile, text: &str) -> Result<NetworkInstance> {
    if file.M == 0 || file.K == 0 {
        return Err(field_error(
            text,
            "M",
            "M/K".into(),
            "dimensions must be positive".into(),
        ));
    }
    if !(file.sigma2 > 0.0 && file.sigma2.is_finite()) {
        return Err(field_error(
            text,
            "sigma2",
            "sigma2".into(),
            format!("noise power must be positive, got {}", file.sigma2),
        ));
    }
    if let Some((m, c)) = file
        .caps
        .iter()
        .enumerate()
        .find(|(_, c)| !(**c > 0.0 && c.is_finite()))
    {
        return Err(field_error(
            text,
            "caps",
            format!("caps[{m}]"),
            format!("capacities must be positive, got {c}"),
        ));
    }
    if file.caps.len() != file.M {
        return Err(Error::DimensionMismatch(format!(
            "{} caps declared for M = {}",
            file.caps.len(),
            file.M
        )));
    }
    let entries: Vec<[f64; 2]> = match file.H {
        ChannelEntries::Flat(v) => {
            if v.len() != file.M * file.K {
                return Err(Error::DimensionMismatch(format!(
                    "H has {} entries, expected M*K = {}",
                    v.len(),
                    file.M * file.K
                )));
            }
            v
        }
        ChannelEntries::Rows(rows) => {
            if rows.len() != file.M || rows.iter().any(|r| r.len() != file.K) {
                let cols = rows.first().map_or(0, |r| r.len());
                return Err(Error::DimensionMismatch(format!(
                    "H is {}x{}, declared M = {}, K = {}",
                    rows.len(),
                    cols,
                    file.M,
                    file.K
                )));
            }
            rows.into_iter().flatten().collect()
        }
    };
    let data = entries
        .into_iter()
        .map(|[re, im]| Complex64::new(re, im))
        .collect();
    let channel = ComplexMatrix::from_row_major(file.M, file.K, data)?;
    NetworkInstance::new(channel, file.sigma2, file.caps)
}

pub fn instance_to_json(instance: &NetworkInstance) -> String {
    let file = InstanceFile {
        M: instance.num_relays(),
        K: instance.num_users(),
        sigma2: instance.noise_power(),
        caps: instance.caps().to_vec(),
        H: ChannelEntries::Flat(
            instance
                .channel()
                .as_slice()
                .iter()
                .map(|z| [z.re, z.im])
                .collect(),
        ),
    };
    serde_json::to_string_pretty(&file).expect("instance serializes") + "\n"
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<NetworkInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_instance(&text)
}

pub fn save_instance(instance: &NetworkInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, instance_to_json(instance)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_is_deterministic_and_shaped() {
        let a = generate_rayleigh(3, 3, 42);
        let b = generate_rayleigh(3, 3, 42);
        assert_eq!(a, b);
        assert_eq!((a.num_relays(), a.num_users()), (3, 3));
        assert_eq!(a.noise_power(), 1.0);
        assert_eq!(a.caps(), &[3.0, 3.0, 3.0]);
        assert_ne!(a, generate_rayleigh(3, 3, 43));
    }

    #[test]
    fn rayleigh_unit_variance() {
        let inst = generate_rayleigh(1000, 100, 9);
        let entries = inst.channel().as_slice();
        let mean = entries.iter().map(|z| z.norm_sqr()).sum::<f64>() / entries.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean |h|^2 = {mean}");
        let re = entries.iter().map(|z| z.re * z.re).sum::<f64>() / entries.len() as f64;
        assert!((re - 0.5).abs() < 0.01, "real-part variance {re}");
    }

    #[test]
    fn validate_flags() {
        let inst = generate_rayleigh(2, 2, 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ones = ComplexMatrix::from_fn(2, 2, |_, _| Complex64::new(s, 0.0));
        assert!(validate(&inst, &ones).is_ok());

        let zero_row = ComplexMatrix::from_fn(2, 2, |i, _| {
            Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)
        });
        assert_eq!(validate(&inst, &zero_row).inactive_relays, vec![1]);

        let long = ComplexMatrix::from_fn(2, 2, |_, j| {
            Complex64::new(if j == 0 { 1.01 * s } else { s }, 0.0)
        });
        assert_eq!(validate(&inst, &long).non_unit_columns, vec![0]);
    }

    #[test]
    fn json_round_trip() {
        let inst = generate_rayleigh(3, 2, 5);
        let back = parse_instance(&instance_to_json(&inst)).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn zero_cap_is_parse_error() {
        let text = "{\n \"M\": 1,\n \"K\": 1,\n \"sigma2\": 1.0,\n \"caps\": [0.0],\n \"H\": [[1.0, 0.0]]\n}";
        match parse_instance(text).unwrap_err() {
            Error::Parse { line, field, .. } => {
                assert_eq!(line, Some(5));
                assert_eq!(field.as_deref(), Some("caps[0]"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn wrong_shape_is_dimension_mismatch() {
        let text = r#"{"M": 3, "K": 3, "sigma2": 1, "caps": [1, 1, 1],
            "H": [[[1,0],[1,0],[1,0]], [[1,0],[1,0],[1,0]]]}"#;
        assert!(matches!(
            parse_instance(text).unwrap_err(),
            Error::DimensionMismatch(_)
        ));
        let flat = r#"{"M": 3, "K": 3, "sigma2": 1, "caps": [1, 1, 1], "H": [[1,0],[1,0]]}"#;
        assert!(matches!(
            parse_instance(flat).unwrap_err(),
            Error::DimensionMismatch(_)
        ));
    }

    #[test]
    fn orders() {
        let o = Order::from_one_based(&[2, 3, 1]).unwrap();
        assert_eq!(o.as_slice(), &[1, 2, 0]);
        assert_eq!(o.reversed().as_slice(), &[0, 2, 1]);
        assert_eq!(o.positions(), vec![2, 0, 1]);
        assert!(Order::new(vec![0, 0]).is_err());
        assert_eq!(Order::all(3).len(), 6);
    }
}
