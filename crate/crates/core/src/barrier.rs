//! Path-following log-barrier method for small dense problems with linear and
//! Hermitian linear-matrix-inequality constraints over real variables.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermitian::{cholesky_with_tol, eigenvalues, HermitianMatrix};

/// `a . x + b >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub a: Vec<f64>,
    pub b: f64,
}

impl LinearConstraint {
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.b
    }
}

/// `F(x) = F_0 + sum_l x_l F_l`, positive semidefinite. Matrices are dense row-major and Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiConstraint {
    pub dim: usize,
    pub constant: Vec<Complex64>,
    /// At most one coefficient matrix per variable.
    pub terms: Vec<(usize, Vec<Complex64>)>,
}

impl LmiConstraint {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            constant: vec![Complex64::new(0.0, 0.0); dim * dim],
            terms: Vec::new(),
        }
    }

    /// Adds `coef` to the coefficient matrix of variable `var`, merging with an existing one.
    pub fn add_term(&mut self, var: usize, coef: Vec<Complex64>) {
        debug_assert_eq!(coef.len(), self.dim * self.dim);
        if coef.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return;
        }
        match self.terms.iter_mut().find(|(v, _)| *v == var) {
            Some((_, m)) => m.iter_mut().zip(coef).for_each(|(a, b)| *a += b),
            None => self.terms.push((var, coef)),
        }
    }

    pub fn value(&self, x: &[f64]) -> HermitianMatrix {
        let mut data = self.constant.clone();
        for (var, coef) in &self.terms {
            let xv = x[*var];
            if xv != 0.0 {
                data.iter_mut().zip(coef).for_each(|(d, c)| *d += c * xv);
            }
        }
        HermitianMatrix::new(self.dim, data).expect("square LMI")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierProblem {
    pub n: usize,
    /// Minimize `c . x`.
    pub c: Vec<f64>,
    pub linear: Vec<LinearConstraint>,
    pub lmis: Vec<LmiConstraint>,
}

impl BarrierProblem {
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Total barrier degree: one per linear row plus the dimension of every LMI.
    pub fn degree(&self) -> usize {
        self.linear.len() + self.lmis.iter().map(|l| l.dim).sum::<usize>()
    }

    /// Smallest linear slack or LMI eigenvalue at `x`.
    pub fn min_slack(&self, x: &[f64]) -> f64 {
        let lin = self
            .linear
            .iter()
            .map(|c| c.slack(x))
            .fold(f64::INFINITY, f64::min);
        self.lmis
            .iter()
            .map(|l| {
                eigenvalues(&l.value(x))
                    .first()
                    .copied()
                    .unwrap_or(f64::INFINITY)
            })
            .fold(lin, f64::min)
    }

    fn barrier(&self, x: &[f64]) -> Option<f64> {
        let mut phi = 0.0;
        for c in &self.linear {
            let s = c.slack(x);
            if !(s > 0.0) {
                return None;
            }
            phi -= s.ln();
        }
        for l in &self.lmis {
            let f = cholesky_with_tol(&l.value(x), 0.0).ok()?;
            phi -= f.log_det();
        }
        phi.is_finite().then_some(phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSettings {
    pub t0: f64,
    pub mu: f64,
    /// Stop once `degree / t <= gap_tol * (1 + |objective|)`.
    pub gap_tol: f64,
    /// Newton decrement threshold on `lambda^2 / 2`.
    pub newton_tol: f64,
    pub alpha: f64,
    pub beta: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    /// Sum-power bound that keeps the phase-I problem bounded.
    pub phase1_bound: f64,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 10.0,
            gap_tol: 1e-8,
            newton_tol: 1e-10,
            alpha: 0.25,
            beta: 0.5,
            max_newton: 200,
            max_outer: 60,
            phase1_bound: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct BarrierResult {
    pub status: BarrierStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub t: f64,
    /// `1 / (t * slack)` per linear row.
    pub linear_duals: Vec<f64>,
    /// `F(x)^{-1} / t` per LMI.
    pub lmi_duals: Vec<HermitianMatrix>,
    /// Barrier parameter of the stage the duals were taken from.
    pub dual_t: f64,
    /// Relative stationarity residual of the reported duals.
    pub dual_residual: f64,
    pub newton_steps: usize,
}

struct Derivatives {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn derivatives(problem: &BarrierProblem, x: &[f64], t: f64) -> Option<Derivatives> {
    let n = problem.n;
    let mut grad = DVector::from_iterator(n, problem.c.iter().map(|c| t * c));
    let mut hess = DMatrix::zeros(n, n);
    for c in &problem.linear {
        let s = c.slack(x);
        let nz: Vec<(usize, f64)> =
            c.a.iter()
                .copied()
                .enumerate()
                .filter(|(_, a)| *a != 0.0)
                .collect();
        for &(i, ai) in &nz {
            grad[i] -= ai / s;
            for &(j, aj) in &nz {
                hess[(i, j)] += ai * aj / (s * s);
            }
        }
    }
    for l in &problem.lmis {
        let d = l.dim;
        let s_inv = cholesky_with_tol(&l.value(x), 0.0).ok()?.inverse();
        let products: Vec<(usize, Vec<Complex64>)> = l
            .terms
            .iter()
            .map(|(var, f)| {
                let mut a = vec![Complex64::new(0.0, 0.0); d * d];
                for r in 0..d {
                    for k in 0..d {
                        let s = s_inv.get(r, k);
                        if s != Complex64::new(0.0, 0.0) {
                            for col in 0..d {
                                a[r * d + col] += s * f[k * d + col];
                            }
                        }
                    }
                }
                (*var, a)
            })
            .collect();
        for (i, (vi, ai)) in products.iter().enumerate() {
            let tr: f64 = (0..d).map(|r| ai[r * d + r].re).sum();
            grad[*vi] -= tr;
            for (vj, aj) in &products[i..] {
                let mut h = 0.0;
                for r in 0..d {
                    for k in 0..d {
                        h += (ai[r * d + k] * aj[k * d + r]).re;
                    }
                }
                hess[(*vi, *vj)] += h;
                if vi != vj {
                    hess[(*vj, *vi)] += h;
                }
            }
        }
    }
    Some(Derivatives { grad, hess })
}

fn newton_direction(d: &Derivatives) -> Option<DVector<f64>> {
    let rhs = -&d.grad;
    if let Some(ch) = d.hess.clone().cholesky() {
        return Some(ch.solve(&rhs));
    }
    let n = d.hess.nrows();
    let ridge = 1e-12
        * (0..n)
            .map(|i| d.hess[(i, i)].abs())
            .fold(0.0, f64::max)
            .max(1e-300);
    let mut h = d.hess.clone();
    for i in 0..n {
        h[(i, i)] += ridge;
    }
    h.cholesky()
        .map(|ch| ch.solve(&rhs))
        .or_else(|| d.hess.clone().lu().solve(&rhs))
}

const POLISH_TOL: f64 = 1e-24;

/// Slacks and LMI log-determinants at a strictly feasible point.
struct BarrierState {
    slacks: Vec<f64>,
    log_dets: Vec<f64>,
}

fn state(problem: &BarrierProblem, x: &[f64]) -> Option<BarrierState> {
    let slacks: Vec<f64> = problem.linear.iter().map(|c| c.slack(x)).collect();
    if slacks.iter().any(|s| !(*s > 0.0)) {
        return None;
    }
    let log_dets = problem
        .lmis
        .iter()
        .map(|l| {
            cholesky_with_tol(&l.value(x), 0.0)
                .ok()
                .map(|f| f.log_det())
        })
        .collect::<Option<Vec<f64>>>()?;
    Some(BarrierState { slacks, log_dets })
}

/// Change of `t c.x + barrier` between two states, summed term by term so that the
/// large objective part cancels exactly instead of after rounding.
fn merit_change(from: &BarrierState, to: &BarrierState, t_c_dx: f64) -> f64 {
    let lin: f64 = from
        .slacks
        .iter()
        .zip(&to.slacks)
        .map(|(a, b)| -(b / a).ln())
        .sum();
    let lmi: f64 = from
        .log_dets
        .iter()
        .zip(&to.log_dets)
        .map(|(a, b)| a - b)
        .sum();
    t_c_dx + lin + lmi
}

/// Minimizes `t c.x + barrier(x)` from a strictly feasible `x`. Returns the Newton step count;
/// stops early when `early_exit` holds after an accepted step.
fn center(
    problem: &BarrierProblem,
    x: &mut Vec<f64>,
    t: f64,
    settings: &BarrierSettings,
    tol: f64,
    early_exit: &dyn Fn(&[f64]) -> bool,
) -> (usize, bool) {
    let mut steps = 0;
    let Some(mut here) = state(problem, x) else {
        return (0, false);
    };
    while steps < settings.max_newton {
        let Some(der) = derivatives(problem, x, t) else {
            break;
        };
        let Some(dx) = newton_direction(&der) else {
            break;
        };
        let slope = der.grad.dot(&dx);
        if !(slope < 0.0) || -slope / 2.0 <= tol {
            break;
        }
        let c_dx: f64 = problem.c.iter().zip(dx.iter()).map(|(c, d)| c * d).sum();
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-14 {
            let cand: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + step * d).collect();
            if let Some(there) = state(problem, &cand) {
                if merit_change(&here, &there, t * step * c_dx) <= settings.alpha * step * slope {
                    accepted = Some((cand, there));
                    break;
                }
            }
            step *= settings.beta;
        }
        let Some((cand, there)) = accepted else { break };
        if cand == *x {
            break;
        }
        *x = cand;
        here = there;
        steps += 1;
        if early_exit(x) {
            return (steps, true);
        }
    }
    (steps, false)
}

struct DualEstimate {
    linear: Vec<f64>,
    lmis: Vec<HermitianMatrix>,
    t: f64,
    residual: f64,
    score: f64,
}

/// Barrier-gradient duals at a centred point together with their stationarity residual
/// `max_l |c_l - sum_i mu_i a_il - sum_j Re tr(F_jl Z_j)| / max_l |c_l|`.
fn dual_estimate(problem: &BarrierProblem, x: &[f64], t: f64) -> DualEstimate {
    let linear: Vec<f64> = problem
        .linear
        .iter()
        .map(|c| 1.0 / (t * c.slack(x)))
        .collect();
    let lmis: Vec<HermitianMatrix> = problem
        .lmis
        .iter()
        .filter_map(|l| {
            cholesky_with_tol(&l.value(x), 0.0)
                .ok()
                .map(|f| f.inverse().scaled(1.0 / t))
        })
        .collect();
    let mut r = problem.c.clone();
    for (mu, c) in linear.iter().zip(&problem.linear) {
        r.iter_mut().zip(&c.a).for_each(|(r, a)| *r -= mu * a);
    }
    for (z, l) in lmis.iter().zip(&problem.lmis) {
        let d = l.dim;
        for (var, coef) in &l.terms {
            let mut tr = 0.0;
            for a in 0..d {
                for b in 0..d {
                    tr += (coef[a * d + b] * z.get(b, a)).re;
                }
            }
            r[*var] -= tr;
        }
    }
    let scale = problem
        .c
        .iter()
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(f64::MIN_POSITIVE);
    let residual = r.iter().fold(0.0f64, |m, r| m.max(r.abs())) / scale;
    let obj = problem.objective(x);
    let score = residual + problem.degree() as f64 / (t * (1.0 + obj.abs()));
    DualEstimate {
        linear,
        lmis,
        t,
        residual,
        score,
    }
}

fn finish(
    problem: &BarrierProblem,
    x: Vec<f64>,
    t: f64,
    status: BarrierStatus,
    newton_steps: usize,
    best: Option<DualEstimate>,
) -> BarrierResult {
    let last = dual_estimate(problem, &x, t);
    let duals = match best {
        Some(b) if b.score < last.score => b,
        _ => last,
    };
    BarrierResult {
        status,
        objective: problem.objective(&x),
        x,
        t,
        linear_duals: duals.linear,
        lmi_duals: duals.lmis,
        dual_t: duals.t,
        dual_residual: duals.residual,
        newton_steps,
    }
}

/// Phase II from a strictly feasible point.
pub fn solve_from(
    problem: &BarrierProblem,
    x0: &[f64],
    settings: &BarrierSettings,
) -> Result<BarrierResult> {
    if problem.barrier(x0).is_none() {
        return Err(Error::InvalidConfig(
            "barrier start point is not strictly feasible".into(),
        ));
    }
    let degree = problem.degree() as f64;
    let mut x = x0.to_vec();
    let mut t = settings.t0;
    let mut steps = 0;
    let mut best: Option<DualEstimate> = None;
    for _ in 0..settings.max_outer {
        steps += center(problem, &mut x, t, settings, settings.newton_tol, &|_| {
            false
        })
        .0;
        let obj = problem.objective(&x);
        if degree / t <= settings.gap_tol * (1.0 + obj.abs()) {
            steps += center(problem, &mut x, t, settings, POLISH_TOL, &|_| false).0;
            return Ok(finish(problem, x, t, BarrierStatus::Optimal, steps, best));
        }
        // Slack round-off grows like 1/(t s) at late stages, so the duals reported are the
        // ones with the smallest certified error over all stages.
        let est = dual_estimate(problem, &x, t);
        if best.as_ref().is_none_or(|b| est.score < b.score) {
            best = Some(est);
        }
        t *= settings.mu;
    }
    Ok(finish(
        problem,
        x,
        t / settings.mu,
        BarrierStatus::MaxIter,
        steps,
        best,
    ))
}

pub enum PhaseOne {
    Feasible(Vec<f64>),
    Infeasible,
    MaxIter,
}

/// Maximizes a common slack `s` subject to `linear - s >= 0`, `F - sI >= 0` and the unshifted `bounds`,
/// stopping as soon as `s > 0`.
pub fn phase_one(
    problem: &BarrierProblem,
    x0: &[f64],
    bounds: &[LinearConstraint],
    settings: &BarrierSettings,
) -> PhaseOne {
    let n = problem.n;
    if problem.min_slack(x0) > 0.0 && bounds.iter().all(|b| b.slack(x0) > 0.0) {
        return PhaseOne::Feasible(x0.to_vec());
    }
    let s_index = n;
    let mut linear: Vec<LinearConstraint> = problem
        .linear
        .iter()
        .map(|c| {
            let mut a = c.a.clone();
            a.push(-1.0);
            LinearConstraint { a, b: c.b }
        })
        .collect();
    linear.extend(bounds.iter().map(|c| {
        let mut a = c.a.clone();
        a.push(0.0);
        LinearConstraint { a, b: c.b }
    }));
    let lmis = problem
        .lmis
        .iter()
        .map(|l| {
            let mut l2 = l.clone();
            let mut shift = vec![Complex64::new(0.0, 0.0); l.dim * l.dim];
            for i in 0..l.dim {
                shift[i * l.dim + i] = Complex64::new(-1.0, 0.0);
            }
            l2.add_term(s_index, shift);
            l2
        })
        .collect();
    let mut c = vec![0.0; n + 1];
    c[s_index] = -1.0;
    let aux = BarrierProblem {
        n: n + 1,
        c,
        linear,
        lmis,
    };

    let mut x = x0.to_vec();
    x.push(problem.min_slack(x0) - 1.0);
    if aux.barrier(&x).is_none() {
        return PhaseOne::Infeasible;
    }
    let degree = aux.degree() as f64;
    let mut t = settings.t0;
    let positive = |z: &[f64]| z[s_index] > 0.0;
    for _ in 0..settings.max_outer {
        let (_, hit) = center(&aux, &mut x, t, settings, settings.newton_tol, &positive);
        if hit || positive(&x) {
            x.truncate(n);
            return PhaseOne::Feasible(x);
        }
        let s = x[s_index];
        if s + degree / t < 0.0 {
            return PhaseOne::Infeasible;
        }
        if degree / t <= settings.gap_tol * (1.0 + s.abs()) {
            return PhaseOne::Infeasible;
        }
        t *= settings.mu;
    }
    PhaseOne::MaxIter
}
