//! Uplink sum-power minimization by fixed-point power control.

use num_complex::Complex64;

use crate::channel::{validate, Case, NetworkInstance, Order, RateTargets, StrategyConfig};
use crate::error::{Error, Link, Result};
use crate::hermitian::{cholesky, inner, schur_given, vec_norm, ComplexMatrix, HermitianMatrix};
use crate::rates::{
    beam_gains, gamma_from, received_signal_power, uplink_fronthaul_rates, uplink_user_rates,
    UplinkCompression, UplinkDecoding, UplinkPoint,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub divergence_power_cap: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            rel_tol: 1e-10,
            divergence_power_cap: 1e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UplinkSolution {
    pub point: UplinkPoint,
    pub achieved_rates: Vec<f64>,
    pub achieved_fronthauls: Vec<f64>,
    pub sum_power: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out before the relative change fell below tolerance.
    pub converged: bool,
}

pub fn q_in_closed_form(instance: &NetworkInstance, p: &[f64]) -> Vec<f64> {
    received_signal_power(instance, p)
        .iter()
        .zip(instance.caps())
        .map(|(s, c)| (s + instance.noise_power()) / (c.exp2() - 1.0))
        .collect()
}

/// Noise levels making every Wyner-Ziv fronthaul rate equal its cap, relay `rho[i]`
/// using the already fixed noises of `rho[..i]`.
pub fn q_wz_recursive(instance: &NetworkInstance, p: &[f64], rho: &Order) -> Vec<f64> {
    let m = instance.num_relays();
    let mut gamma = gamma_from(instance, p, &vec![0.0; m], rho);
    let mut q = vec![0.0; m];
    let cond: Vec<usize> = (0..m).collect();
    for i in 0..m {
        let relay = rho[i];
        let numerator = schur_given(&gamma, i, &cond[..i])
            .expect("noise-loaded covariance is positive definite");
        q[relay] = numerator / (instance.caps()[relay].exp2() - 1.0);
        let mut bump = vec![0.0; m];
        bump[i] = q[relay];
        gamma.add_diagonal(&bump);
    }
    q
}

pub fn quantization_noise(
    instance: &NetworkInstance,
    p: &[f64],
    config: &StrategyConfig,
) -> Vec<f64> {
    if config.case.joint_compression() {
        q_wz_recursive(instance, p, &config.decompress_order)
    } else {
        q_in_closed_form(instance, p)
    }
}

/// Interference-plus-noise covariance seen by `user` from the users in `interferers`.
fn interference_covariance(
    instance: &NetworkInstance,
    p: &[f64],
    q: &[f64],
    interferers: impl Iterator<Item = usize>,
) -> HermitianMatrix {
    let m = instance.num_relays();
    let mut x = HermitianMatrix::zeros(m);
    for j in interferers {
        if p[j] != 0.0 {
            x.add_outer(p[j], &instance.user_channel(j));
        }
    }
    x.add_diagonal(q);
    x.add_identity(instance.noise_power());
    x
}

fn interferers(
    k: usize,
    user: usize,
    sic_positions: Option<&[usize]>,
) -> impl Iterator<Item = usize> + '_ {
    (0..k).filter(move |&j| {
        j != user
            && match sic_positions {
                Some(pos) => pos[j] > pos[user],
                None => true,
            }
    })
}

/// For each user: the unnormalized MMSE direction `X^{-1} h_k` and the quadratic form `h_k^H X^{-1} h_k`.
fn mmse_directions(
    instance: &NetworkInstance,
    p: &[f64],
    q: &[f64],
    sic_order: Option<&Order>,
) -> Vec<(Vec<Complex64>, f64)> {
    let k = instance.num_users();
    let pos = sic_order.map(|o| o.positions());
    (0..k)
        .map(|u| {
            let x = interference_covariance(instance, p, q, interferers(k, u, pos.as_deref()));
            let h = instance.user_channel(u);
            let d = cholesky(&x)
                .expect("noise-loaded covariance is positive definite")
                .solve(&h);
            let quad = inner(&h, &d).re;
            (d, quad)
        })
        .collect()
}

fn normalize_directions(m: usize, dirs: &[(Vec<Complex64>, f64)]) -> ComplexMatrix {
    let cols: Vec<Vec<Complex64>> = dirs
        .iter()
        .map(|(d, _)| {
            let n = vec_norm(d);
            if n > 0.0 {
                d.iter().map(|z| z / n).collect()
            } else {
                d.clone()
            }
        })
        .collect();
    ComplexMatrix::from_columns(m, &cols)
}

/// Unit-norm MMSE receivers treating every other user as noise.
pub fn mmse_beamformers(instance: &NetworkInstance, p: &[f64], q: &[f64]) -> ComplexMatrix {
    normalize_directions(
        instance.num_relays(),
        &mmse_directions(instance, p, q, None),
    )
}

/// Unit-norm MMSE receivers for successive decoding in order `tau`: only users decoded later interfere.
pub fn mmse_beamformers_sic(
    instance: &NetworkInstance,
    p: &[f64],
    q: &[f64],
    tau: &Order,
) -> ComplexMatrix {
    normalize_directions(
        instance.num_relays(),
        &mmse_directions(instance, p, q, Some(tau)),
    )
}

pub fn adaptive_beamformers(
    instance: &NetworkInstance,
    p: &[f64],
    q: &[f64],
    config: &StrategyConfig,
) -> ComplexMatrix {
    if config.case.successive() {
        mmse_beamformers_sic(instance, p, q, &config.decode_order)
    } else {
        mmse_beamformers(instance, p, q)
    }
}

/// `I_k(p) = (2^R_k - 1) / (h_k^H X_k^{-1} h_k)` with MMSE receivers and `q = q(p)`.
pub fn interference_map(
    instance: &NetworkInstance,
    p: &[f64],
    targets: &RateTargets,
    config: &StrategyConfig,
) -> Vec<f64> {
    let q = quantization_noise(instance, p, config);
    let sic = config.case.successive().then_some(&config.decode_order);
    let t = targets.sinr_targets();
    mmse_directions(instance, p, &q, sic)
        .iter()
        .zip(&t)
        .map(|((_, quad), tk)| if *tk == 0.0 { 0.0 } else { tk / quad })
        .collect()
}

/// SINR inversion at fixed receivers: `(2^R_k - 1)` times interference plus noise at `w_k`, over `|w_k^H h_k|^2`.
pub fn interference_map_fixed(
    instance: &NetworkInstance,
    p: &[f64],
    targets: &RateTargets,
    config: &StrategyConfig,
    w: &ComplexMatrix,
) -> Vec<f64> {
    let q = quantization_noise(instance, p, config);
    fixed_map_with(
        instance,
        p,
        &q,
        &beam_gains(instance, w),
        targets,
        config,
        w,
    )
}

fn fixed_map_with(
    instance: &NetworkInstance,
    p: &[f64],
    q: &[f64],
    g: &[Vec<f64>],
    targets: &RateTargets,
    config: &StrategyConfig,
    w: &ComplexMatrix,
) -> Vec<f64> {
    let k = instance.num_users();
    let pos = config
        .case
        .successive()
        .then(|| config.decode_order.positions());
    let t = targets.sinr_targets();
    (0..k)
        .map(|u| {
            if t[u] == 0.0 {
                return 0.0;
            }
            let noise: f64 = (0..instance.num_relays())
                .map(|r| (q[r] + instance.noise_power()) * w.get(r, u).norm_sqr())
                .sum();
            let interference: f64 = interferers(k, u, pos.as_deref())
                .map(|j| p[j] * g[u][j])
                .sum();
            t[u] * (interference + noise) / g[u][u]
        })
        .collect()
}

enum Receivers<'a> {
    Adaptive,
    Fixed {
        w: &'a ComplexMatrix,
        gains: Vec<Vec<f64>>,
    },
}

impl Receivers<'_> {
    fn step(
        &self,
        instance: &NetworkInstance,
        p: &[f64],
        targets: &RateTargets,
        config: &StrategyConfig,
    ) -> Vec<f64> {
        match self {
            Receivers::Adaptive => interference_map(instance, p, targets, config),
            Receivers::Fixed { w, gains } => {
                let q = quantization_noise(instance, p, config);
                fixed_map_with(instance, p, &q, gains, targets, config, w)
            }
        }
    }

    fn at(
        &self,
        instance: &NetworkInstance,
        p: &[f64],
        q: &[f64],
        config: &StrategyConfig,
    ) -> ComplexMatrix {
        match self {
            Receivers::Adaptive => adaptive_beamformers(instance, p, q, config),
            Receivers::Fixed { w, .. } => (*w).clone(),
        }
    }
}

/// Picard iteration `p <- I(p)` from `p = 0`.
pub fn fixed_point_solve(
    instance: &NetworkInstance,
    targets: &RateTargets,
    config: &StrategyConfig,
    settings: &SolverSettings,
    fixed_beamformers: Option<&ComplexMatrix>,
) -> Result<UplinkSolution> {
    fixed_point_solve_from(
        instance,
        targets,
        config,
        settings,
        fixed_beamformers,
        &vec![0.0; instance.num_users()],
    )
}

pub fn fixed_point_solve_from(
    instance: &NetworkInstance,
    targets: &RateTargets,
    config: &StrategyConfig,
    settings: &SolverSettings,
    fixed_beamformers: Option<&ComplexMatrix>,
    p0: &[f64],
) -> Result<UplinkSolution> {
    config.check(instance)?;
    let k = instance.num_users();
    if targets.len() != k || p0.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} targets and {} initial powers for {k} users",
            targets.len(),
            p0.len()
        )));
    }
    let receivers = match fixed_beamformers {
        None => Receivers::Adaptive,
        Some(w) => {
            let report = validate(instance, w);
            if let Some(&relay) = report.inactive_relays.first() {
                return Err(Error::DegenerateRelay { relay });
            }
            if !report.non_unit_columns.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "beamformers for users {:?} are not unit norm",
                    report.non_unit_columns
                )));
            }
            let gains = beam_gains(instance, w);
            let t = targets.sinr_targets();
            if let Some(u) = (0..k).find(|&u| t[u] > 0.0 && !(gains[u][u] > 0.0)) {
                return Err(Error::infeasible(
                    Link::Uplink,
                    format!("receiver of user {u} is orthogonal to its channel"),
                ));
            }
            Receivers::Fixed { w, gains }
        }
    };

    let mut p = p0.to_vec();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iters {
        iterations += 1;
        let next = receivers.step(instance, &p, targets, config);
        if next
            .iter()
            .any(|x| !(x.is_finite() && *x <= settings.divergence_power_cap))
        {
            let q = quantization_noise(instance, &p, config);
            return Err(Error::Infeasible {
                link: Link::Uplink,
                reason: format!(
                    "power exceeded {:e} after {iterations} iterations",
                    settings.divergence_power_cap
                ),
                last_beamformers: Some(Box::new(receivers.at(instance, &p, &q, config))),
            });
        }
        let change = next
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = next.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
        p = next;
        if change <= settings.rel_tol * scale || scale == 0.0 {
            converged = true;
            break;
        }
    }

    let q = quantization_noise(instance, &p, config);
    let w = receivers.at(instance, &p, &q, config);
    let point = UplinkPoint { p, q, w };
    Ok(evaluate_uplink(
        instance, point, config, iterations, converged,
    ))
}

pub fn evaluate_uplink(
    instance: &NetworkInstance,
    point: UplinkPoint,
    config: &StrategyConfig,
    iterations: usize,
    converged: bool,
) -> UplinkSolution {
    let decoding = if config.case.successive() {
        UplinkDecoding::Sic
    } else {
        UplinkDecoding::Tin
    };
    let compression = if config.case.joint_compression() {
        UplinkCompression::WynerZiv
    } else {
        UplinkCompression::Independent
    };
    let achieved_rates = uplink_user_rates(instance, &point, decoding, &config.decode_order);
    let achieved_fronthauls =
        uplink_fronthaul_rates(instance, &point, compression, &config.decompress_order)
            .expect("closed-form noise levels are positive");
    UplinkSolution {
        sum_power: point.sum_power(),
        point,
        achieved_rates,
        achieved_fronthauls,
        iterations,
        converged,
    }
}

/// Convenience for the common adaptive-receiver call with default settings.
pub fn solve_uplink(
    instance: &NetworkInstance,
    targets: &RateTargets,
    case: Case,
) -> Result<UplinkSolution> {
    fixed_point_solve(
        instance,
        targets,
        &StrategyConfig::natural(case, instance),
        &SolverSettings::default(),
        None,
    )
}
