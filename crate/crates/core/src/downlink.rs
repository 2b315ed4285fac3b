//! Downlink sum-power minimization at fixed transmit beamformers, and the duality pipeline.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::barrier::{
    phase_one, solve_from, BarrierProblem, BarrierSettings, BarrierStatus, LinearConstraint,
    LmiConstraint, PhaseOne,
};
use crate::channel::{validate, NetworkInstance, RateTargets, StrategyConfig};
use crate::error::{Error, Link, Result};
use crate::hermitian::{ComplexMatrix, HermitianMatrix};
use crate::rates::{
    beam_gains, downlink_fronthaul_rates, downlink_user_rates, DownlinkCompression,
    DownlinkEncoding, DownlinkPoint,
};
use crate::uplink::{fixed_point_solve, SolverSettings, UplinkSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownlinkStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FronthaulDuals {
    /// One multiplier per relay fronthaul constraint.
    Independent(Vec<f64>),
    /// Per-relay matrix multipliers; `diag[m]` is the entry of block `m` belonging to relay `m` itself.
    Multivariate {
        diag: Vec<f64>,
        blocks: Vec<HermitianMatrix>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualVariables {
    /// Rate-constraint multipliers, in the units of uplink powers.
    pub beta: Vec<f64>,
    pub fronthaul: FronthaulDuals,
}

impl DualVariables {
    /// `lambda` for independent compression, the diagonal entries otherwise.
    pub fn fronthaul_values(&self) -> &[f64] {
        match &self.fronthaul {
            FronthaulDuals::Independent(l) => l,
            FronthaulDuals::Multivariate { diag, .. } => diag,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkSolution {
    pub point: DownlinkPoint,
    pub achieved_rates: Vec<f64>,
    /// Zero for relays listed in `idle_relays`.
    pub achieved_fronthauls: Vec<f64>,
    /// Relays carrying neither signal nor quantization noise; their fronthaul constraint is vacuous.
    pub idle_relays: Vec<usize>,
    pub sum_power: f64,
    pub duals: Option<DualVariables>,
    pub status: DownlinkStatus,
    pub diagnostic: Option<String>,
}

impl DownlinkSolution {
    fn failed(
        instance: &NetworkInstance,
        v: &ComplexMatrix,
        status: DownlinkStatus,
        why: String,
    ) -> Self {
        let (m, k) = (instance.num_relays(), instance.num_users());
        Self {
            point: DownlinkPoint {
                p: vec![0.0; k],
                q_cov: HermitianMatrix::zeros(m),
                v: v.clone(),
            },
            achieved_rates: vec![0.0; k],
            achieved_fronthauls: vec![0.0; m],
            idle_relays: Vec::new(),
            sum_power: 0.0,
            duals: None,
            status,
            diagnostic: Some(why),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == DownlinkStatus::Optimal
    }
}

fn check_beamformers(instance: &NetworkInstance, v: &ComplexMatrix) -> Result<()> {
    if v.rows() != instance.num_relays() || v.cols() != instance.num_users() {
        return Err(Error::DimensionMismatch(format!(
            "beamformers are {}x{}, instance is {}x{}",
            v.rows(),
            v.cols(),
            instance.num_relays(),
            instance.num_users()
        )));
    }
    let report = validate(instance, v);
    if let Some(&relay) = report.inactive_relays.first() {
        return Err(Error::DegenerateRelay { relay });
    }
    if !report.non_unit_columns.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "beamformers for users {:?} are not unit norm",
            report.non_unit_columns
        )));
    }
    Ok(())
}

/// Users interfering with each user on the downlink: everyone else under linear encoding,
/// the users encoded after it under DPC.
pub fn downlink_interferers(
    instance: &NetworkInstance,
    config: &StrategyConfig,
) -> Vec<Vec<usize>> {
    let k = instance.num_users();
    let pos = config.encode_order().positions();
    (0..k)
        .map(|u| {
            (0..k)
                .filter(|&j| j != u && (!config.case.successive() || pos[j] > pos[u]))
                .collect()
        })
        .collect()
}

fn modes(config: &StrategyConfig) -> (DownlinkEncoding, DownlinkCompression) {
    (
        if config.case.successive() {
            DownlinkEncoding::Dpc
        } else {
            DownlinkEncoding::Linear
        },
        if config.case.joint_compression() {
            DownlinkCompression::Multivariate
        } else {
            DownlinkCompression::Independent
        },
    )
}

fn evaluate(
    instance: &NetworkInstance,
    point: DownlinkPoint,
    config: &StrategyConfig,
    duals: Option<DualVariables>,
    status: DownlinkStatus,
) -> Result<DownlinkSolution> {
    let (encoding, compression) = modes(config);
    let achieved_rates = downlink_user_rates(instance, &point, encoding, &config.encode_order());
    let m = instance.num_relays();
    let idle_relays: Vec<usize> = (0..m)
        .filter(|&r| point.relay_load(r) == 0.0 && point.q_cov.diag(r) == 0.0)
        .collect();
    let achieved_fronthauls = if idle_relays.is_empty() {
        downlink_fronthaul_rates(instance, &point, compression, &config.compress_order())?
    } else {
        // Only reachable with diagonal covariances, where each relay is evaluated on its own.
        (0..m)
            .map(|r| {
                if idle_relays.contains(&r) {
                    0.0
                } else {
                    ((point.relay_load(r) + point.q_cov.diag(r)) / point.q_cov.diag(r)).log2()
                }
            })
            .collect()
    };
    Ok(DownlinkSolution {
        sum_power: point.sum_power(),
        point,
        achieved_rates,
        achieved_fronthauls,
        idle_relays,
        duals,
        status,
        diagnostic: None,
    })
}

/// Cases I and II: every rate and fronthaul constraint at equality gives a square linear system.
pub fn solve_in_tight_linear(
    instance: &NetworkInstance,
    targets: &RateTargets,
    v: &ComplexMatrix,
    config: &StrategyConfig,
) -> Result<DownlinkSolution> {
    config.check(instance)?;
    check_beamformers(instance, v)?;
    if config.case.joint_compression() {
        return Err(Error::InvalidConfig(format!(
            "case {} needs the barrier solver",
            config.case
        )));
    }
    let (m, k) = (instance.num_relays(), instance.num_users());
    let n = k + m;
    let sigma2 = instance.noise_power();
    let t = targets.sinr_targets();
    let g = beam_gains(instance, v);
    let sets = downlink_interferers(instance, config);

    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for u in 0..k {
        a[(u, u)] = g[u][u];
        for &j in &sets[u] {
            a[(u, j)] -= t[u] * g[j][u];
        }
        for r in 0..m {
            a[(u, k + r)] = -t[u] * instance.h(r, u).norm_sqr();
        }
        b[u] = t[u] * sigma2;
    }
    for r in 0..m {
        a[(k + r, k + r)] = instance.caps()[r].exp2() - 1.0;
        for u in 0..k {
            a[(k + r, u)] = -v.get(r, u).norm_sqr();
        }
    }

    let lu = a.clone().lu();
    let Some(x) = lu.solve(&b) else {
        return Ok(DownlinkSolution::failed(
            instance,
            v,
            DownlinkStatus::Infeasible,
            "tight system is singular".into(),
        ));
    };
    if let Some(i) = (0..n).find(|&i| !(x[i] >= -1e-9 && x[i].is_finite())) {
        return Ok(DownlinkSolution::failed(
            instance,
            v,
            DownlinkStatus::Infeasible,
            format!("tight system gives negative component {i} ({:e})", x[i]),
        ));
    }
    let c = DVector::from_element(n, sigma2);
    let y = a
        .transpose()
        .lu()
        .solve(&c)
        .ok_or(Error::DualsUnavailable)?;
    let duals = DualVariables {
        beta: (0..k).map(|u| y[u] * t[u]).collect(),
        fronthaul: FronthaulDuals::Independent((0..m).map(|r| y[k + r]).collect()),
    };
    let p: Vec<f64> = (0..k).map(|u| x[u].max(0.0)).collect();
    let q: Vec<f64> = (0..m).map(|r| x[k + r].max(0.0)).collect();
    let point = DownlinkPoint {
        p,
        q_cov: HermitianMatrix::diagonal(&q),
        v: v.clone(),
    };
    evaluate(
        instance,
        point,
        config,
        Some(duals),
        DownlinkStatus::Optimal,
    )
}

/// Real coordinates of a Hermitian `dim x dim` matrix: the diagonal, then real and imaginary
/// parts of each strictly lower entry `(i, j)`, `i > j`.
#[derive(Debug, Clone)]
struct HermitianCoords {
    dim: usize,
    offset: usize,
    pairs: Vec<(usize, usize)>,
}

impl HermitianCoords {
    fn new(dim: usize, offset: usize) -> Self {
        let pairs = (1..dim).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
        Self { dim, offset, pairs }
    }

    fn count(&self) -> usize {
        self.dim * self.dim
    }

    /// `(variable, basis matrix)` for every coordinate.
    fn basis(&self) -> Vec<(usize, Vec<Complex64>)> {
        let d = self.dim;
        let zero = Complex64::new(0.0, 0.0);
        let mut out = Vec::with_capacity(self.count());
        for i in 0..d {
            let mut e = vec![zero; d * d];
            e[i * d + i] = Complex64::new(1.0, 0.0);
            out.push((self.offset + i, e));
        }
        for (n, &(i, j)) in self.pairs.iter().enumerate() {
            let mut re = vec![zero; d * d];
            re[i * d + j] = Complex64::new(1.0, 0.0);
            re[j * d + i] = Complex64::new(1.0, 0.0);
            out.push((self.offset + d + 2 * n, re));
            let mut im = vec![zero; d * d];
            im[i * d + j] = Complex64::new(0.0, 1.0);
            im[j * d + i] = Complex64::new(0.0, -1.0);
            out.push((self.offset + d + 2 * n + 1, im));
        }
        out
    }

    fn matrix(&self, x: &[f64]) -> HermitianMatrix {
        let d = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            data[i * d + i] = Complex64::new(x[self.offset + i], 0.0);
        }
        for (n, &(i, j)) in self.pairs.iter().enumerate() {
            let z = Complex64::new(x[self.offset + d + 2 * n], x[self.offset + d + 2 * n + 1]);
            data[i * d + j] = z;
            data[j * d + i] = z.conj();
        }
        HermitianMatrix::new(d, data).expect("square")
    }

    fn identity_point(&self, x: &mut [f64]) {
        for i in 0..self.dim {
            x[self.offset + i] = 1.0;
        }
    }
}

fn quad(e: &[Complex64], h: &[Complex64]) -> f64 {
    let d = h.len();
    let mut s = Complex64::new(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            s += h[a].conj() * e[a * d + b] * h[b];
        }
    }
    s.re
}

/// The barrier problem for Cases III and IV together with its coordinates.
struct MvProgram {
    problem: BarrierProblem,
    coords: HermitianCoords,
    /// Conditioning relays of each relay's compression step.
    conditioning: Vec<Vec<usize>>,
}

fn build_mv_program(
    instance: &NetworkInstance,
    targets: &RateTargets,
    v: &ComplexMatrix,
    config: &StrategyConfig,
) -> MvProgram {
    let (m, k) = (instance.num_relays(), instance.num_users());
    let sigma2 = instance.noise_power();
    let coords = HermitianCoords::new(m, k);
    let n = k + coords.count();
    let basis = coords.basis();
    let t = targets.sinr_targets();
    let g = beam_gains(instance, v);
    let sets = downlink_interferers(instance, config);

    let mut c = vec![0.0; n];
    c[..k].iter_mut().for_each(|x| *x = sigma2);
    c[k..k + m].iter_mut().for_each(|x| *x = sigma2);

    let mut linear = Vec::with_capacity(2 * k);
    for u in 0..k {
        let h = instance.user_channel(u);
        let mut a = vec![0.0; n];
        a[u] = g[u][u];
        for &j in &sets[u] {
            a[j] -= t[u] * g[j][u];
        }
        for (var, e) in &basis {
            a[*var] -= t[u] * quad(e, &h);
        }
        linear.push(LinearConstraint {
            a,
            b: -t[u] * sigma2,
        });
    }
    for u in 0..k {
        let mut a = vec![0.0; n];
        a[u] = 1.0;
        linear.push(LinearConstraint { a, b: 0.0 });
    }

    let rho_dl = config.compress_order();
    let mut conditioning = vec![Vec::new(); m];
    let mut lmis = Vec::with_capacity(m + 1);
    for pos in 0..m {
        let relay = rho_dl[pos];
        conditioning[relay] = rho_dl.as_slice()[..pos].to_vec();
    }
    for relay in 0..m {
        let idx: Vec<usize> = std::iter::once(relay)
            .chain(conditioning[relay].iter().copied())
            .collect();
        let d = idx.len();
        let scale = instance.caps()[relay].exp2();
        let mut lmi = LmiConstraint::new(d);
        for (var, e) in &basis {
            let mut f = vec![Complex64::new(0.0, 0.0); d * d];
            for (a, &ia) in idx.iter().enumerate() {
                for (b, &ib) in idx.iter().enumerate() {
                    f[a * d + b] = e[ia * m + ib] * scale;
                }
            }
            f[0] -= e[relay * m + relay];
            lmi.add_term(*var, f);
        }
        for u in 0..k {
            let mut f = vec![Complex64::new(0.0, 0.0); d * d];
            f[0] = Complex64::new(-v.get(relay, u).norm_sqr(), 0.0);
            lmi.add_term(u, f);
        }
        lmis.push(lmi);
    }
    let mut psd = LmiConstraint::new(m);
    for (var, e) in basis {
        psd.add_term(var, e);
    }
    lmis.push(psd);

    MvProgram {
        problem: BarrierProblem { n, c, linear, lmis },
        coords,
        conditioning,
    }
}

/// The optimum `p = 0, Q = 0` sits on the boundary, where the matrix multipliers are not unique.
/// Returns the multipliers with diagonal `Omega = sigma^2 I + diag(lambda)`, for which
/// `2^{C_m} lambda_m = sigma^2 + lambda_m`.
fn zero_target_solution(
    instance: &NetworkInstance,
    v: &ComplexMatrix,
    config: &StrategyConfig,
    conditioning: &[Vec<usize>],
) -> Result<DownlinkSolution> {
    let (m, k) = (instance.num_relays(), instance.num_users());
    let diag: Vec<f64> = instance
        .caps()
        .iter()
        .map(|c| instance.noise_power() / (c.exp2() - 1.0))
        .collect();
    let blocks = (0..m)
        .map(|r| {
            let mut d = vec![0.0; 1 + conditioning[r].len()];
            d[0] = diag[r];
            HermitianMatrix::diagonal(&d)
        })
        .collect();
    let point = DownlinkPoint {
        p: vec![0.0; k],
        q_cov: HermitianMatrix::zeros(m),
        v: v.clone(),
    };
    let duals = DualVariables {
        beta: vec![0.0; k],
        fronthaul: FronthaulDuals::Multivariate { diag, blocks },
    };
    evaluate(
        instance,
        point,
        config,
        Some(duals),
        DownlinkStatus::Optimal,
    )
}

/// Cases III and IV by a log-barrier method over powers and the full quantization covariance.
pub fn solve_mv_barrier(
    instance: &NetworkInstance,
    targets: &RateTargets,
    v: &ComplexMatrix,
    config: &StrategyConfig,
    settings: &BarrierSettings,
) -> Result<DownlinkSolution> {
    config.check(instance)?;
    check_beamformers(instance, v)?;
    let (m, k) = (instance.num_relays(), instance.num_users());
    let prog = build_mv_program(instance, targets, v, config);
    if targets.as_slice().iter().all(|r| *r == 0.0) {
        return zero_target_solution(instance, v, config, &prog.conditioning);
    }
    let n = prog.problem.n;

    let mut x0 = vec![0.0; n];
    x0[..k].iter_mut().for_each(|x| *x = 1.0);
    prog.coords.identity_point(&mut x0);
    let mut bound = vec![0.0; n];
    bound[..k + m].iter_mut().for_each(|x| *x = -1.0);
    let bound = LinearConstraint {
        a: bound,
        b: settings.phase1_bound,
    };

    let start = match phase_one(&prog.problem, &x0, &[bound], settings) {
        PhaseOne::Feasible(x) => x,
        PhaseOne::Infeasible => {
            return Ok(DownlinkSolution::failed(
                instance,
                v,
                DownlinkStatus::Infeasible,
                "no strictly feasible point".into(),
            ))
        }
        PhaseOne::MaxIter => {
            return Ok(DownlinkSolution::failed(
                instance,
                v,
                DownlinkStatus::MaxIter,
                "phase I did not terminate".into(),
            ))
        }
    };
    let res = solve_from(&prog.problem, &start, settings)?;
    if res.status != BarrierStatus::Optimal {
        return Ok(DownlinkSolution::failed(
            instance,
            v,
            DownlinkStatus::MaxIter,
            format!("barrier stopped at t = {:e}", res.t),
        ));
    }
    let t = targets.sinr_targets();
    let beta = (0..k).map(|u| res.linear_duals[u] * t[u]).collect();
    let blocks: Vec<HermitianMatrix> = res.lmi_duals[..m].to_vec();
    let diag = blocks.iter().map(|z| z.diag(0)).collect();
    debug_assert!(prog.conditioning.len() == m);
    let duals = DualVariables {
        beta,
        fronthaul: FronthaulDuals::Multivariate { diag, blocks },
    };
    let point = DownlinkPoint {
        p: res.x[..k].iter().map(|x| x.max(0.0)).collect(),
        q_cov: prog.coords.matrix(&res.x),
        v: v.clone(),
    };
    evaluate(
        instance,
        point,
        config,
        Some(duals),
        DownlinkStatus::Optimal,
    )
}

/// Dispatches on the case: tight linear solve for I and II, barrier for III and IV.
pub fn solve_downlink(
    instance: &NetworkInstance,
    targets: &RateTargets,
    v: &ComplexMatrix,
    config: &StrategyConfig,
    settings: &BarrierSettings,
) -> Result<DownlinkSolution> {
    if config.case.joint_compression() {
        solve_mv_barrier(instance, targets, v, config, settings)
    } else {
        solve_in_tight_linear(instance, targets, v, config)
    }
}

/// Solves the uplink with MMSE receivers, then the downlink at `V = W` with reversed orders.
pub fn solve_downlink_via_duality(
    instance: &NetworkInstance,
    targets: &RateTargets,
    config: &StrategyConfig,
    settings: &SolverSettings,
) -> Result<(UplinkSolution, DownlinkSolution)> {
    solve_downlink_via_duality_with(
        instance,
        targets,
        config,
        settings,
        &BarrierSettings::default(),
    )
}

pub fn solve_downlink_via_duality_with(
    instance: &NetworkInstance,
    targets: &RateTargets,
    config: &StrategyConfig,
    settings: &SolverSettings,
    barrier: &BarrierSettings,
) -> Result<(UplinkSolution, DownlinkSolution)> {
    let ul = fixed_point_solve(instance, targets, config, settings, None)?;
    if !ul.converged {
        return Err(Error::Infeasible {
            link: Link::Uplink,
            reason: format!("no convergence within {} iterations", ul.iterations),
            last_beamformers: Some(Box::new(ul.point.w.clone())),
        });
    }
    let dl = solve_downlink(instance, targets, &ul.point.w, config, barrier)?;
    if !dl.is_optimal() {
        return Err(Error::infeasible(
            Link::Downlink,
            dl.diagnostic.unwrap_or_default(),
        ));
    }
    Ok((ul, dl))
}

pub fn extract_duals(solution: &DownlinkSolution) -> Result<DualVariables> {
    match (&solution.status, &solution.duals) {
        (DownlinkStatus::Optimal, Some(d)) => Ok(d.clone()),
        _ => Err(Error::DualsUnavailable),
    }
}
