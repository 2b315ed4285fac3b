//! Rate and fronthaul-rate formulas for both link directions.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::channel::{NetworkInstance, Order};
use crate::error::{Error, Result};
use crate::hermitian::{inner, schur_complement, schur_given, ComplexMatrix, HermitianMatrix};

/// Uplink powers, quantization noise levels and unit-norm receive beamformers (columns of `w`).
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkPoint {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub w: ComplexMatrix,
}

impl UplinkPoint {
    pub fn sum_power(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// Downlink powers, quantization covariance and unit-norm transmit beamformers (columns of `v`).
#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkPoint {
    pub p: Vec<f64>,
    pub q_cov: HermitianMatrix,
    pub v: ComplexMatrix,
}

impl DownlinkPoint {
    /// Signal power plus quantization power across relays.
    pub fn sum_power(&self) -> f64 {
        self.p.iter().sum::<f64>() + self.q_cov.trace()
    }

    /// Beamformed signal power `sum_k p_k |v_{m,k}|^2` delivered to relay `m`.
    pub fn relay_load(&self, m: usize) -> f64 {
        self.p
            .iter()
            .enumerate()
            .map(|(k, pk)| pk * self.v.get(m, k).norm_sqr())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UplinkCompression {
    Independent,
    WynerZiv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UplinkDecoding {
    Tin,
    Sic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownlinkCompression {
    Independent,
    Multivariate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownlinkEncoding {
    Linear,
    Dpc,
}

/// `gains[j][k] = |b_j^H h_k|^2` for beamformer columns `b_j`.
pub fn beam_gains(instance: &NetworkInstance, b: &ComplexMatrix) -> Vec<Vec<f64>> {
    let k = instance.num_users();
    let hs: Vec<Vec<Complex64>> = (0..k).map(|u| instance.user_channel(u)).collect();
    (0..k)
        .map(|j| {
            let bj = b.column(j);
            hs.iter().map(|h| inner(&bj, h).norm_sqr()).collect()
        })
        .collect()
}

/// `sum_k p_k |h_{m,k}|^2` per relay.
pub fn received_signal_power(instance: &NetworkInstance, p: &[f64]) -> Vec<f64> {
    (0..instance.num_relays())
        .map(|m| {
            p.iter()
                .enumerate()
                .map(|(k, pk)| pk * instance.h(m, k).norm_sqr())
                .sum()
        })
        .collect()
}

/// `sum_k p_k h_k h_k^H + sigma^2 I + diag(q)` with rows and columns taken in order `rho`.
pub fn gamma_from(
    instance: &NetworkInstance,
    p: &[f64],
    q: &[f64],
    rho: &Order,
) -> HermitianMatrix {
    let m = instance.num_relays();
    let sigma2 = instance.noise_power();
    HermitianMatrix::from_fn(m, |i, j| {
        let (a, b) = (rho[i], rho[j]);
        let mut z: Complex64 = p
            .iter()
            .enumerate()
            .map(|(k, pk)| instance.h(a, k) * instance.h(b, k).conj() * *pk)
            .sum();
        if i == j {
            z += sigma2 + q[a];
        }
        z
    })
}

pub fn gamma_covariance(
    instance: &NetworkInstance,
    point: &UplinkPoint,
    rho: &Order,
) -> HermitianMatrix {
    gamma_from(instance, &point.p, &point.q, rho)
}

fn check_q(q: &[f64]) -> Result<()> {
    match q.iter().position(|&x| !(x > 0.0)) {
        Some(m) => Err(Error::ZeroQuantizationNoise { relay: m }),
        None => Ok(()),
    }
}

/// Per-relay fronthaul rates, indexed by relay id.
pub fn uplink_fronthaul_rates(
    instance: &NetworkInstance,
    point: &UplinkPoint,
    mode: UplinkCompression,
    rho: &Order,
) -> Result<Vec<f64>> {
    check_q(&point.q)?;
    let sigma2 = instance.noise_power();
    match mode {
        UplinkCompression::Independent => Ok(received_signal_power(instance, &point.p)
            .iter()
            .zip(&point.q)
            .map(|(s, q)| ((s + q + sigma2) / q).ln() / LN_2)
            .collect()),
        UplinkCompression::WynerZiv => {
            let gamma = gamma_covariance(instance, point, rho);
            let mut out = vec![0.0; instance.num_relays()];
            for i in 0..rho.len() {
                let relay = rho[i];
                out[relay] = (schur_complement(&gamma, i + 1)? / point.q[relay]).ln() / LN_2;
            }
            Ok(out)
        }
    }
}

/// Per-user uplink rates. Under SIC, user `tau[i]` is interfered only by `tau[j]`, `j > i`.
pub fn uplink_user_rates(
    instance: &NetworkInstance,
    point: &UplinkPoint,
    mode: UplinkDecoding,
    tau: &Order,
) -> Vec<f64> {
    let k = instance.num_users();
    let m = instance.num_relays();
    let g = beam_gains(instance, &point.w);
    let pos = tau.positions();
    (0..k)
        .map(|u| {
            let noise: f64 = (0..m)
                .map(|r| {
                    let w2 = point.w.get(r, u).norm_sqr();
                    (point.q[r] + instance.noise_power()) * w2
                })
                .sum();
            let interference: f64 = (0..k)
                .filter(|&j| j != u && (mode == UplinkDecoding::Tin || pos[j] > pos[u]))
                .map(|j| point.p[j] * g[u][j])
                .sum();
            (point.p[u] * g[u][u] / (interference + noise)).ln_1p() / LN_2
        })
        .collect()
}

/// Per-relay downlink fronthaul rates, indexed by relay id. Under multivariate compression,
/// relay `rho_dl[i]` is compressed given relays `rho_dl[..i]`.
pub fn downlink_fronthaul_rates(
    instance: &NetworkInstance,
    point: &DownlinkPoint,
    mode: DownlinkCompression,
    rho_dl: &Order,
) -> Result<Vec<f64>> {
    let m = instance.num_relays();
    let q = &point.q_cov;
    let floor = 1e-14 * q.max_diagonal().max(1e-300);
    let mut out = vec![0.0; m];
    for i in 0..m {
        let relay = rho_dl[i];
        let numerator = point.relay_load(relay) + q.diag(relay);
        let denominator = match mode {
            DownlinkCompression::Independent => {
                if !(q.diag(relay) > 0.0) {
                    return Err(Error::ZeroQuantizationNoise { relay });
                }
                q.diag(relay)
            }
            DownlinkCompression::Multivariate => {
                let d = schur_given(q, relay, &rho_dl.as_slice()[..i])
                    .map_err(|_| Error::SingularConditioningBlock { relay })?;
                if d <= floor {
                    return Err(Error::SingularConditioningBlock { relay });
                }
                d
            }
        };
        out[relay] = (numerator / denominator).ln() / LN_2;
    }
    Ok(out)
}

/// Per-user downlink rates. Under DPC, user `tau_dl[i]` is interfered only by `tau_dl[j]`, `j > i`,
/// the users whose codewords are chosen after its own.
pub fn downlink_user_rates(
    instance: &NetworkInstance,
    point: &DownlinkPoint,
    mode: DownlinkEncoding,
    tau_dl: &Order,
) -> Vec<f64> {
    let k = instance.num_users();
    let g = beam_gains(instance, &point.v);
    let pos = tau_dl.positions();
    (0..k)
        .map(|u| {
            let h = instance.user_channel(u);
            let noise = point.q_cov.quadratic_form(&h) + instance.noise_power();
            let interference: f64 = (0..k)
                .filter(|&j| j != u && (mode == DownlinkEncoding::Linear || pos[j] > pos[u]))
                .map(|j| point.p[j] * g[j][u])
                .sum();
            (point.p[u] * g[u][u] / (interference + noise)).ln_1p() / LN_2
        })
        .collect()
}
