//! Executable duality checks over solved uplink/downlink pairs.

use serde::{Deserialize, Serialize};

use crate::barrier::BarrierSettings;
use crate::channel::{Case, NetworkInstance, Order, RateTargets, StrategyConfig};
use crate::downlink::{solve_downlink, DownlinkSolution, FronthaulDuals};
use crate::error::{Error, Result};
use crate::hermitian::{eigenvalues, schur_complement, ComplexMatrix};
use crate::rates::{gamma_covariance, uplink_fronthaul_rates, UplinkCompression, UplinkPoint};
use crate::rng::SplitMix64;
use crate::uplink::{fixed_point_solve, interference_map, SolverSettings, UplinkSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative sum-power gap, linear-program cases.
    pub lp_gap: f64,
    /// Relative sum-power gap, barrier cases.
    pub sdp_gap: f64,
    pub lp_dual: f64,
    pub sdp_dual: f64,
    pub tightness: f64,
    /// Second over first eigenvalue of each fronthaul dual block.
    pub rank_one: f64,
    /// Relative residual of `2^C_m Lambda_m = schur(Omega, m)`.
    pub omega: f64,
    /// Targets within this relative distance of infeasibility are flagged as near the boundary.
    pub boundary_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lp_gap: 1e-8,
            sdp_gap: 1e-4,
            lp_dual: 1e-6,
            sdp_dual: 1e-3,
            tightness: 1e-6,
            rank_one: 1e-5,
            omega: 1e-4,
            boundary_margin: 0.01,
        }
    }
}

impl Tolerances {
    pub fn gap(&self, case: Case) -> f64 {
        if case.joint_compression() {
            self.sdp_gap
        } else {
            self.lp_gap
        }
    }

    pub fn dual(&self, case: Case) -> f64 {
        if case.joint_compression() {
            self.sdp_dual
        } else {
            self.lp_dual
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    BothFeasible,
    BothInfeasible,
    UplinkOnly,
    DownlinkOnly,
}

impl Feasibility {
    pub fn agrees(self) -> bool {
        matches!(
            self,
            Feasibility::BothFeasible | Feasibility::BothInfeasible
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub case: Case,
    pub feasibility: Feasibility,
    pub near_boundary: bool,
    pub ul_sum_power: Option<f64>,
    pub dl_sum_power: Option<f64>,
    pub rel_gap: Option<f64>,
    pub beta_resid: Option<f64>,
    pub q_resid: Option<f64>,
    pub ul_rate_resid: Option<f64>,
    pub ul_fronthaul_resid: Option<f64>,
    pub dl_rate_resid: Option<f64>,
    pub dl_fronthaul_resid: Option<f64>,
    /// Largest second-to-first eigenvalue ratio over the fronthaul dual blocks (barrier cases).
    pub rank_one_ratio: Option<f64>,
    pub omega_resid: Option<f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl DualityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TightnessResiduals {
    pub rate: Vec<f64>,
    pub fronthaul: Vec<f64>,
}

impl TightnessResiduals {
    pub fn max_rate(&self) -> f64 {
        self.rate.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn max_fronthaul(&self) -> f64 {
        self.fronthaul.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn max(&self) -> f64 {
        self.max_rate().max(self.max_fronthaul())
    }
}

/// Solutions whose constraint values can be compared to targets and caps.
pub trait Constrained {
    fn rates(&self) -> &[f64];
    fn fronthauls(&self) -> &[f64];
    fn vacuous_fronthaul(&self, _relay: usize) -> bool {
        false
    }
}

impl Constrained for UplinkSolution {
    fn rates(&self) -> &[f64] {
        &self.achieved_rates
    }
    fn fronthauls(&self) -> &[f64] {
        &self.achieved_fronthauls
    }
}

impl Constrained for DownlinkSolution {
    fn rates(&self) -> &[f64] {
        &self.achieved_rates
    }
    fn fronthauls(&self) -> &[f64] {
        &self.achieved_fronthauls
    }
    fn vacuous_fronthaul(&self, relay: usize) -> bool {
        self.idle_relays.contains(&relay)
    }
}

/// `|rate_k - R_k|` and `|fronthaul_m - C_m|`; idle relays count as tight.
pub fn check_tightness(
    solution: &impl Constrained,
    targets: &RateTargets,
    caps: &[f64],
) -> TightnessResiduals {
    TightnessResiduals {
        rate: solution
            .rates()
            .iter()
            .zip(targets.as_slice())
            .map(|(r, t)| (r - t).abs())
            .collect(),
        fronthaul: solution
            .fronthauls()
            .iter()
            .zip(caps)
            .enumerate()
            .map(|(m, (f, c))| {
                if solution.vacuous_fronthaul(m) {
                    0.0
                } else {
                    (f - c).abs()
                }
            })
            .collect(),
    }
}

fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = b.iter().fold(0.0, |s: f64, y| s.max(y.abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Largest `lambda_2 / lambda_1` over the blocks.
pub fn rank_one_ratio(blocks: &[crate::hermitian::HermitianMatrix]) -> f64 {
    blocks
        .iter()
        .map(|b| {
            let ev = eigenvalues(b);
            if ev.len() < 2 {
                return 0.0;
            }
            let top = ev[ev.len() - 1];
            if top > 0.0 {
                ev[ev.len() - 2].max(0.0) / top
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Largest relative residual of `2^C_m Lambda_m = schur(Omega, m)` with
/// `Omega = sigma^2 I + sum_k beta_k h_k h_k^H + diag(Lambda)` in decompression order.
pub fn omega_residual(
    instance: &NetworkInstance,
    beta: &[f64],
    lambda_diag: &[f64],
    rho: &Order,
) -> Result<f64> {
    let omega = crate::rates::gamma_from(instance, beta, lambda_diag, rho);
    let mut worst: f64 = 0.0;
    for i in 0..rho.len() {
        let relay = rho[i];
        let lhs = instance.caps()[relay].exp2() * lambda_diag[relay];
        let rhs = schur_complement(&omega, i + 1)?;
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

enum UplinkVerdict {
    Feasible(UplinkSolution),
    Infeasible(Option<ComplexMatrix>),
}

fn uplink_verdict(
    instance: &NetworkInstance,
    targets: &RateTargets,
    config: &StrategyConfig,
    settings: &SolverSettings,
    fixed: Option<&ComplexMatrix>,
) -> Result<UplinkVerdict> {
    match fixed_point_solve(instance, targets, config, settings, fixed) {
        Ok(sol) if sol.converged => Ok(UplinkVerdict::Feasible(sol)),
        Ok(sol) => Ok(UplinkVerdict::Infeasible(Some(sol.point.w))),
        Err(Error::Infeasible {
            last_beamformers, ..
        }) => Ok(UplinkVerdict::Infeasible(last_beamformers.map(|b| *b))),
        Err(e) => Err(e),
    }
}

fn uplink_feasible(
    instance: &NetworkInstance,
    targets: &RateTargets,
    config: &StrategyConfig,
    settings: &SolverSettings,
    fixed: Option<&ComplexMatrix>,
) -> Result<bool> {
    Ok(matches!(
        uplink_verdict(instance, targets, config, settings, fixed)?,
        UplinkVerdict::Feasible(_)
    ))
}

pub fn verify_duality(
    instance: &NetworkInstance,
    targets: &RateTargets,
    config: &StrategyConfig,
    tolerances: &Tolerances,
) -> Result<DualityReport> {
    verify_duality_with(
        instance,
        targets,
        config,
        tolerances,
        &SolverSettings::default(),
        &BarrierSettings::default(),
    )
}

/// Solves both links, compares them, and records one check per property.
pub fn verify_duality_with(
    instance: &NetworkInstance,
    targets: &RateTargets,
    config: &StrategyConfig,
    tolerances: &Tolerances,
    settings: &SolverSettings,
    barrier: &BarrierSettings,
) -> Result<DualityReport> {
    config.check(instance)?;
    let case = config.case;
    let mut report = DualityReport {
        case,
        feasibility: Feasibility::BothInfeasible,
        near_boundary: false,
        ul_sum_power: None,
        dl_sum_power: None,
        rel_gap: None,
        beta_resid: None,
        q_resid: None,
        ul_rate_resid: None,
        ul_fronthaul_resid: None,
        dl_rate_resid: None,
        dl_fronthaul_resid: None,
        rank_one_ratio: None,
        omega_resid: None,
        checks: Vec::new(),
        pass: false,
    };

    let ul = match uplink_verdict(instance, targets, config, settings, None)? {
        UplinkVerdict::Feasible(ul) => ul,
        UplinkVerdict::Infeasible(last) => {
            // Any downlink solution at the last receivers would certify the uplink feasible at
            // those receivers, so the downlink must fail there too.
            let dl_ok = match last {
                Some(w) if crate::channel::validate(instance, &w).is_ok() => {
                    solve_downlink(instance, targets, &w, config, barrier)?.is_optimal()
                }
                _ => false,
            };
            report.feasibility = if dl_ok {
                Feasibility::DownlinkOnly
            } else {
                Feasibility::BothInfeasible
            };
            let relaxed = targets.scaled(1.0 / (1.0 + tolerances.boundary_margin))?;
            report.near_boundary = uplink_feasible(instance, &relaxed, config, settings, None)?;
            report.checks.push(Check {
                name: "feasibility_agreement".into(),
                value: if dl_ok { 1.0 } else { 0.0 },
                tolerance: 0.0,
                pass: !dl_ok,
            });
            report.pass = !dl_ok;
            return Ok(report);
        }
    };
    let tightened = targets.scaled(1.0 + tolerances.boundary_margin)?;
    report.near_boundary = !uplink_feasible(instance, &tightened, config, settings, None)?;
    report.ul_sum_power = Some(ul.sum_power);
    let ul_t = check_tightness(&ul, targets, instance.caps());
    report.ul_rate_resid = Some(ul_t.max_rate());
    report.ul_fronthaul_resid = Some(ul_t.max_fronthaul());

    let dl = solve_downlink(instance, targets, &ul.point.w, config, barrier)?;
    if !dl.is_optimal() {
        report.feasibility = Feasibility::UplinkOnly;
        report.checks.push(Check {
            name: "feasibility_agreement".into(),
            value: 1.0,
            tolerance: 0.0,
            pass: false,
        });
        return Ok(report);
    }
    report.feasibility = Feasibility::BothFeasible;
    report.dl_sum_power = Some(dl.sum_power);
    let dl_t = check_tightness(&dl, targets, instance.caps());
    report.dl_rate_resid = Some(dl_t.max_rate());
    report.dl_fronthaul_resid = Some(dl_t.max_fronthaul());
    let gap = if ul.sum_power > 0.0 {
        (ul.sum_power - dl.sum_power).abs() / ul.sum_power
    } else {
        (ul.sum_power - dl.sum_power).abs()
    };
    report.rel_gap = Some(gap);

    let duals = dl.duals.as_ref().ok_or(Error::DualsUnavailable)?;
    report.beta_resid = Some(rel_inf(&duals.beta, &ul.point.p));
    report.q_resid = Some(rel_inf(duals.fronthaul_values(), &ul.point.q));
    if let FronthaulDuals::Multivariate { diag, blocks } = &duals.fronthaul {
        report.rank_one_ratio = Some(rank_one_ratio(blocks));
        report.omega_resid = Some(omega_residual(
            instance,
            &duals.beta,
            diag,
            &config.decompress_order,
        )?);
    }

    let mut push = |name: &str, value: Option<f64>, tolerance: f64| {
        if let Some(value) = value {
            report.checks.push(Check {
                name: name.into(),
                value,
                tolerance,
                pass: value <= tolerance,
            });
        }
    };
    push("rel_gap", Some(gap), tolerances.gap(case));
    push("beta_resid", report.beta_resid, tolerances.dual(case));
    push("q_resid", report.q_resid, tolerances.dual(case));
    push("ul_rate_resid", report.ul_rate_resid, tolerances.tightness);
    push(
        "ul_fronthaul_resid",
        report.ul_fronthaul_resid,
        tolerances.tightness,
    );
    push("dl_rate_resid", report.dl_rate_resid, tolerances.tightness);
    push(
        "dl_fronthaul_resid",
        report.dl_fronthaul_resid,
        tolerances.tightness,
    );
    push("rank_one_ratio", report.rank_one_ratio, tolerances.rank_one);
    push("omega_resid", report.omega_resid, tolerances.omega);
    report.pass = report.checks.iter().all(|c| c.pass);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub trials: usize,
    /// Smallest `I_k(p)` seen over users with positive targets.
    pub min_value: f64,
    /// Smallest `(alpha I_k(p) - I_k(alpha p)) / (alpha I_k(p))`.
    pub min_scalability_margin: f64,
    /// Smallest `(I_k(p_bar) - I_k(p)) / I_k(p)` for `p_bar >= p`.
    pub min_monotonicity_margin: f64,
}

pub const SCALING_FACTORS: [f64; 3] = [1.5, 2.0, 10.0];

fn random_powers(rng: &mut SplitMix64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|_| {
            if rng.uniform(0.0, 1.0) < 0.15 {
                0.0
            } else {
                10f64.powf(rng.uniform(-2.0, 2.0))
            }
        })
        .collect()
}

/// Samples powers and scalings and checks positivity, strict sub-scalability and monotonicity of
/// the adaptive interference map. Fails on the first violation.
pub fn check_interference_properties(
    instance: &NetworkInstance,
    targets: &RateTargets,
    config: &StrategyConfig,
    trials: usize,
    seed: u64,
) -> Result<PropertyReport> {
    let k = instance.num_users();
    let mut rng = SplitMix64::new(seed);
    let mut report = PropertyReport {
        trials,
        min_value: f64::INFINITY,
        min_scalability_margin: f64::INFINITY,
        min_monotonicity_margin: f64::INFINITY,
    };
    let active: Vec<usize> = (0..k).filter(|&u| targets.as_slice()[u] > 0.0).collect();
    for _ in 0..trials {
        let p = random_powers(&mut rng, k);
        let ip = interference_map(instance, &p, targets, config);
        for &u in &active {
            report.min_value = report.min_value.min(ip[u]);
            if !(ip[u] > 0.0) {
                return Err(Error::PropertyViolation {
                    property: "positivity",
                    user: u,
                    alpha: 1.0,
                    margin: ip[u],
                    p,
                });
            }
        }
        let extra = rng.uniform(1.0, 20.0);
        for alpha in SCALING_FACTORS.iter().copied().chain([extra]) {
            let scaled: Vec<f64> = p.iter().map(|x| x * alpha).collect();
            let isc = interference_map(instance, &scaled, targets, config);
            for &u in &active {
                let margin = (alpha * ip[u] - isc[u]) / (alpha * ip[u]);
                report.min_scalability_margin = report.min_scalability_margin.min(margin);
                if !(margin > 0.0) {
                    return Err(Error::PropertyViolation {
                        property: "sub-scalability",
                        user: u,
                        alpha,
                        margin,
                        p,
                    });
                }
            }
        }
        let bumped: Vec<f64> = p
            .iter()
            .map(|x| {
                if rng.uniform(0.0, 1.0) < 0.5 {
                    x + 10f64.powf(rng.uniform(-3.0, 1.0))
                } else {
                    *x
                }
            })
            .collect();
        let ib = interference_map(instance, &bumped, targets, config);
        for &u in &active {
            let margin = (ib[u] - ip[u]) / ip[u];
            report.min_monotonicity_margin = report.min_monotonicity_margin.min(margin);
            // Round-off allowance only: users untouched by the bump leave I_k unchanged.
            if margin < -1e-12 {
                return Err(Error::PropertyViolation {
                    property: "monotonicity",
                    user: u,
                    alpha: 1.0,
                    margin,
                    p,
                });
            }
        }
    }
    Ok(report)
}

/// `|sum_m C^WZ_m - log2(det Gamma / prod q)|`.
pub fn check_wz_chain_rule(
    instance: &NetworkInstance,
    point: &UplinkPoint,
    rho: &Order,
) -> Result<f64> {
    let rates = uplink_fronthaul_rates(instance, point, UplinkCompression::WynerZiv, rho)?;
    let gamma = gamma_covariance(instance, point, rho);
    let log_det = crate::hermitian::cholesky(&gamma)?.log_det();
    let total = (log_det - point.q.iter().map(|q| q.ln()).sum::<f64>()) / std::f64::consts::LN_2;
    Ok((rates.iter().sum::<f64>() - total).abs())
}

/// Uplink and downlink feasibility at the same fixed beamformers.
pub fn fixed_beamformer_verdicts(
    instance: &NetworkInstance,
    targets: &RateTargets,
    config: &StrategyConfig,
    w: &ComplexMatrix,
    settings: &SolverSettings,
    barrier: &BarrierSettings,
) -> Result<(bool, bool)> {
    let ul = uplink_feasible(instance, targets, config, settings, Some(w))?;
    let dl = solve_downlink(instance, targets, w, config, barrier)?.is_optimal();
    Ok((ul, dl))
}

/// Largest symmetric target the fixed-beamformer uplink accepts, by bisection to relative `rel_tol`.
pub fn symmetric_boundary(
    instance: &NetworkInstance,
    config: &StrategyConfig,
    w: &ComplexMatrix,
    settings: &SolverSettings,
    rel_tol: f64,
) -> Result<f64> {
    let k = instance.num_users();
    let feasible = |r: f64| {
        uplink_feasible(
            instance,
            &RateTargets::symmetric(k, r)?,
            config,
            settings,
            Some(w),
        )
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::InvalidConfig(
                "no finite feasibility boundary".into(),
            ));
        }
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
