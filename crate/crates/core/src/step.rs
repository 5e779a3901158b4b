//! One time increment: equilibrium, the viscous damage subproblem with
//! box constraints `0 <= α <= α_prev`, their alternation and the history
//! update.
//!
//! The joint incremental problem is not solved globally. We alternate
//! between the two partial minimizations until the damage field stagnates;
//! the resulting pair satisfies equilibrium together with the first-order
//! (Kuhn-Tucker) conditions of the damage subproblem, which is what the
//! diagnostics check.

use serde::{Deserialize, Serialize};

use crate::energy::{dissipation_load, energy_parts};
use crate::error::{FieldError, SolveError};
use crate::fe::FeOperators;
use crate::laws::{MaterialLaws, Zeta};
use crate::sparse::{dot, max_abs, norm2, pcg, CgOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Projected-gradient tolerance, in density units (`d_i / m_i`).
    pub tol_pg: f64,
    /// Alternate-minimization stop: max nodal change between sweeps.
    pub tol_stag: f64,
    /// Kuhn-Tucker sign tolerance used by the gates, density units.
    pub tol_kkt: f64,
    pub max_pg_iters: usize,
    pub max_am_sweeps: usize,
    /// Relative residual target of the equilibrium solve.
    pub tol_eq: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_pg: 1e-11,
            tol_stag: 1e-9,
            tol_kkt: 1e-8,
            max_pg_iters: 500,
            max_am_sweeps: 200,
            tol_eq: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInputs {
    pub alpha_prev: Vec<f64>,
    pub v_prev: Vec<f64>,
    pub zeta_prev: Vec<Zeta>,
    /// Boundary datum as a nodal field; only Dirichlet entries are imposed.
    pub w_bc: Vec<f64>,
    pub eps: f64,
    pub tau: f64,
}

impl StepInputs {
    fn validate(&self, ops: &FeOperators) -> Result<(), SolveError> {
        ops.check_nodal(&self.alpha_prev)?;
        ops.check_nodal(&self.w_bc)?;
        ops.check_elemental(&self.v_prev)?;
        ops.check_elemental(&self.zeta_prev)?;
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(SolveError::Input(format!(
                "viscosity must be positive, got {}",
                self.eps
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(SolveError::Input(format!(
                "time step must be positive, got {}",
                self.tau
            )));
        }
        if let Some(a) = self.alpha_prev.iter().find(|a| !(-1e-10..=1.0 + 1e-10).contains(*a)) {
            return Err(SolveError::Input(format!("previous damage {a} outside [0, 1]")));
        }
        if let Some(v) = self.v_prev.iter().find(|v| !(**v >= 0.0)) {
            return Err(SolveError::Input(format!("previous cumulation {v} is negative")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepFlags {
    pub am_cap_hit: bool,
    pub damage_not_converged: bool,
}

impl StepFlags {
    pub fn any(&self) -> bool {
        self.am_cap_hit || self.damage_not_converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub alpha: Vec<f64>,
    pub u: Vec<f64>,
    pub grad_u: Vec<[f64; 2]>,
    pub zeta: Vec<Zeta>,
    pub v: Vec<f64>,
    pub am_iterations: usize,
    pub damage_iterations: usize,
    pub lower_bound_active: Vec<usize>,
    pub objective_decrease: f64,
    pub flags: StepFlags,
}

/// Equilibrium for fixed damage: `div(μ(α)∇u) = 0`, `u = w` on the
/// Dirichlet boundary, natural conditions elsewhere.
pub fn solve_equilibrium(
    alpha: &[f64],
    w_bc: &[f64],
    ops: &FeOperators,
    laws: &MaterialLaws,
    cfg: &SolverConfig,
) -> Result<Vec<f64>, SolveError> {
    ops.check_nodal(alpha)?;
    ops.check_nodal(w_bc)?;
    let mesh = ops.mesh();
    let n = ops.node_count();
    let weights: Vec<f64> = ops.element_averages(alpha).iter().map(|&a| laws.eval_mu(a).0).collect();
    let a = ops.weighted_stiffness(&weights);
    let free: Vec<bool> = (0..n).map(|i| !mesh.is_dirichlet(i)).collect();

    let mut u = w_bc.to_vec();
    if !free.iter().any(|&f| f) {
        return Ok(u);
    }
    let au = a.mul_vec(&u);
    let rhs: Vec<f64> = (0..n).map(|i| if free[i] { -au[i] } else { 0.0 }).collect();
    let diag: Vec<f64> = a
        .diagonal()
        .iter()
        .zip(&free)
        .map(|(&d, &f)| if f { d } else { 1.0 })
        .collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        let masked: Vec<f64> = x.iter().zip(&free).map(|(&v, &f)| if f { v } else { 0.0 }).collect();
        a.mul_vec_into(&masked, y);
        for i in 0..n {
            if !free[i] {
                y[i] = x[i];
            }
        }
    };
    let b_norm = norm2(&rhs);
    let tol = cfg.tol_eq * (1.0 + b_norm);
    let mut delta = vec![0.0; n];
    match pcg(apply, &diag, &rhs, &mut delta, tol, 20 * n + 100) {
        CgOutcome::Converged { .. } => {}
        CgOutcome::NonPositiveCurvature { .. } => return Err(SolveError::EquilibriumIndefinite),
        CgOutcome::MaxIterations { iterations, residual } => {
            if residual > 1e-10 * (1.0 + b_norm) {
                return Err(SolveError::EquilibriumNotConverged { iterations, residual });
            }
        }
    }
    for i in 0..n {
        if free[i] {
            u[i] += delta[i];
        }
    }
    Ok(u)
}

/// The damage subproblem for a frozen displacement, in nodal form:
///
/// `J(α) = Σ_e c_e μ(ᾱ_e) + ½ αᵀKα − Fᵀ(α − α_prev) + (ε/2τ) Σ_i m_i (α_i − α_prev_i)²`
///
/// with `c_e = ½|T_e||∇u_e|²`.
pub(crate) struct DamageProblem<'a> {
    ops: &'a FeOperators,
    laws: &'a MaterialLaws,
    elem_coef: Vec<f64>,
    load: Vec<f64>,
    alpha_prev: &'a [f64],
    visc: f64,
}

impl<'a> DamageProblem<'a> {
    pub(crate) fn new(
        ops: &'a FeOperators,
        laws: &'a MaterialLaws,
        grad_u: &[[f64; 2]],
        v_prev: &[f64],
        alpha_prev: &'a [f64],
        eps: f64,
        tau: f64,
    ) -> Self {
        let elem_coef = grad_u
            .iter()
            .zip(ops.mesh().areas())
            .map(|(g, area)| 0.5 * area * (g[0] * g[0] + g[1] * g[1]))
            .collect();
        Self {
            ops,
            laws,
            elem_coef,
            load: dissipation_load(v_prev, ops, laws),
            alpha_prev,
            visc: eps / tau,
        }
    }

    fn mass(&self) -> &[f64] {
        self.ops.lumped_mass()
    }

    /// `d = ∂J/∂α`.
    pub(crate) fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        let mut d = self.ops.stiffness().mul_vec(alpha);
        let abar = self.ops.element_averages(alpha);
        for ((tri, &a), &c) in self.ops.mesh().triangles().iter().zip(&abar).zip(&self.elem_coef) {
            let share = c * self.laws.eval_mu(a).1 / 3.0;
            for &i in tri {
                d[i] += share;
            }
        }
        let m = self.mass();
        for i in 0..d.len() {
            d[i] += -self.load[i] + self.visc * m[i] * (alpha[i] - self.alpha_prev[i]);
        }
        d
    }

    /// `J(trial) − J(alpha)`, formed from differences to limit cancellation.
    pub(crate) fn change(&self, alpha: &[f64], trial: &[f64]) -> f64 {
        let old = self.ops.element_averages(alpha);
        let new = self.ops.element_averages(trial);
        let elastic: f64 = old
            .iter()
            .zip(&new)
            .zip(&self.elem_coef)
            .map(|((&a, &b), &c)| c * (self.laws.eval_mu(b).0 - self.laws.eval_mu(a).0))
            .sum();
        let step: Vec<f64> = trial.iter().zip(alpha).map(|(t, a)| t - a).collect();
        let sum: Vec<f64> = trial.iter().zip(alpha).map(|(t, a)| t + a).collect();
        let gradient = 0.5 * dot(&step, &self.ops.stiffness().mul_vec(&sum));
        let m = self.mass();
        let mut rest = 0.0;
        for i in 0..step.len() {
            rest += -self.load[i] * step[i]
                + 0.5 * self.visc * m[i] * step[i] * (trial[i] + alpha[i] - 2.0 * self.alpha_prev[i]);
        }
        elastic + gradient + rest
    }

    /// Full objective value.
    #[cfg(test)]
    pub(crate) fn value(&self, alpha: &[f64]) -> f64 {
        self.change(self.alpha_prev, alpha)
            + self
                .ops
                .element_averages(self.alpha_prev)
                .iter()
                .zip(&self.elem_coef)
                .map(|(&a, &c)| c * self.laws.eval_mu(a).0)
                .sum::<f64>()
            + 0.5 * self.ops.stiffness().quad_form(self.alpha_prev)
    }

    /// Size of the rounding noise in the density `d_i / m_i` at `alpha`.
    fn rounding_floor(&self, alpha: &[f64]) -> f64 {
        let k = self.ops.stiffness();
        let m = self.mass();
        let mut elastic = vec![0.0; alpha.len()];
        let abar = self.ops.element_averages(alpha);
        for ((tri, &a), &c) in self.ops.mesh().triangles().iter().zip(&abar).zip(&self.elem_coef) {
            let share = (c * self.laws.eval_mu(a).1 / 3.0).abs();
            for &i in tri {
                elastic[i] += share;
            }
        }
        (0..alpha.len())
            .map(|i| {
                let row: f64 = k.row(i).map(|(j, v)| (v * alpha[j]).abs()).sum();
                let visc = self.visc * m[i] * (alpha[i].abs() + self.alpha_prev[i].abs());
                (row + elastic[i] + self.load[i] + visc) / m[i]
            })
            .fold(0.0, f64::max)
            * 32.0
            * f64::EPSILON
    }

    /// Hessian-vector product restricted to `free`; identity on the rest.
    /// With `convexify`, negative elastic curvature is dropped.
    fn hess_apply(&self, abar: &[f64], free: &[bool], convexify: bool, p: &[f64], out: &mut [f64]) {
        let masked: Vec<f64> = p.iter().zip(free).map(|(&v, &f)| if f { v } else { 0.0 }).collect();
        self.hess_full(abar, convexify, &masked, out);
        for i in 0..out.len() {
            if !free[i] {
                out[i] = p[i];
            }
        }
    }

    fn hess_full(&self, abar: &[f64], convexify: bool, masked: &[f64], out: &mut [f64]) {
        self.ops.stiffness().mul_vec_into(masked, out);
        let m = self.mass();
        for i in 0..out.len() {
            out[i] += self.visc * m[i] * masked[i];
        }
        for ((tri, &a), &c) in self.ops.mesh().triangles().iter().zip(abar).zip(&self.elem_coef) {
            let mut curv = self.laws.mu.eval2(a).2;
            if convexify {
                curv = curv.max(0.0);
            }
            if curv == 0.0 || c == 0.0 {
                continue;
            }
            let s = c * curv / 9.0 * (masked[tri[0]] + masked[tri[1]] + masked[tri[2]]);
            for &i in tri {
                out[i] += s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamageSolve {
    pub alpha: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final projected-gradient norm, density units.
    pub pg_norm: f64,
}

fn project(x: f64, hi: f64) -> f64 {
    x.clamp(0.0, hi.max(0.0))
}

fn projected_gradient_norm(alpha: &[f64], scaled: &[f64], hi: &[f64]) -> f64 {
    alpha
        .iter()
        .zip(scaled)
        .zip(hi)
        .map(|((&a, &s), &h)| (a - project(a - s, h)).abs())
        .fold(0.0, f64::max)
}

/// Newton direction on the free nodes with every other node moved to its
/// projected target. Free nodes whose Newton target leaves the box are
/// pinned to the violated bound and the reduced system is solved again,
/// until the step is feasible.
#[allow(clippy::too_many_arguments)]
fn bound_fixing_newton(
    problem: &DamageProblem,
    abar: &[f64],
    alpha: &[f64],
    hi: &[f64],
    d: &[f64],
    scaled: &[f64],
    mut free: Vec<bool>,
    hess_diag: &[f64],
) -> Option<Vec<f64>> {
    let n = alpha.len();
    let mut step: Vec<f64> = (0..n)
        .map(|i| {
            if free[i] {
                0.0
            } else {
                project(alpha[i] - scaled[i], hi[i]) - alpha[i]
            }
        })
        .collect();
    let mut tmp = vec![0.0; n];
    for _ in 0..=n {
        if !free.iter().any(|&f| f) {
            return Some(step);
        }
        let pinned: Vec<f64> = (0..n).map(|i| if free[i] { 0.0 } else { step[i] }).collect();
        problem.hess_full(abar, false, &pinned, &mut tmp);
        let rhs: Vec<f64> = (0..n).map(|i| if free[i] { -d[i] - tmp[i] } else { 0.0 }).collect();
        let rhs_norm = norm2(&rhs);
        let mut solved = None;
        if rhs_norm == 0.0 {
            solved = Some(vec![0.0; n]);
        } else {
            for convexify in [false, true] {
                let mut p = vec![0.0; n];
                let out = pcg(
                    |x, y| problem.hess_apply(abar, &free, convexify, x, y),
                    hess_diag,
                    &rhs,
                    &mut p,
                    1e-13 * rhs_norm,
                    10 * n + 50,
                );
                if !matches!(out, CgOutcome::NonPositiveCurvature { .. }) {
                    solved = Some(p);
                    break;
                }
            }
        }
        let p = solved?;
        let mut clipped = false;
        for i in 0..n {
            if !free[i] {
                continue;
            }
            let target = alpha[i] + p[i];
            if target < 0.0 {
                step[i] = -alpha[i];
            } else if target > hi[i] {
                step[i] = hi[i] - alpha[i];
            } else {
                step[i] = p[i];
                continue;
            }
            free[i] = false;
            clipped = true;
        }
        if !clipped {
            return Some(step);
        }
    }
    Some(step)
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Backtracking along the projection arc `t ↦ P(α + t p)`.
fn projected_search(problem: &DamageProblem, alpha: &[f64], d: &[f64], p: &[f64]) -> Option<Vec<f64>> {
    let hi = problem.alpha_prev;
    let mut t = 1.0;
    for _ in 0..MAX_HALVINGS {
        let trial: Vec<f64> = alpha
            .iter()
            .zip(p)
            .zip(hi)
            .map(|((&a, &pi), &h)| project(a + t * pi, h))
            .collect();
        let slope: f64 = d
            .iter()
            .zip(trial.iter().zip(alpha))
            .map(|(di, (x, a))| di * (x - a))
            .sum();
        if slope < 0.0 {
            let dj = problem.change(alpha, &trial);
            if dj <= ARMIJO * slope {
                return Some(trial);
            }
        }
        t *= 0.5;
    }
    None
}

/// Minimize the viscous damage subproblem over `0 <= α <= α_prev` for a
/// frozen displacement.
///
/// Projected Newton iteration: variables at a bound with the gradient
/// pushing outward are held, the reduced Newton system on the rest is
/// solved by conjugate gradients, and the step is safeguarded by an Armijo
/// search along the projection arc. A scaled projected-gradient step is
/// the fallback. Starts from `α_prev`, so a zero projected gradient there
/// returns `α_prev` untouched.
pub fn solve_damage_subproblem(
    u: &[f64],
    inputs: &StepInputs,
    ops: &FeOperators,
    laws: &MaterialLaws,
    cfg: &SolverConfig,
) -> Result<DamageSolve, SolveError> {
    inputs.validate(ops)?;
    let grad_u = ops.element_gradients(u)?;
    Ok(solve_damage_with_strain(&grad_u, inputs, ops, laws, cfg))
}

pub(crate) fn solve_damage_with_strain(
    grad_u: &[[f64; 2]],
    inputs: &StepInputs,
    ops: &FeOperators,
    laws: &MaterialLaws,
    cfg: &SolverConfig,
) -> DamageSolve {
    let problem = DamageProblem::new(
        ops,
        laws,
        grad_u,
        &inputs.v_prev,
        &inputs.alpha_prev,
        inputs.eps,
        inputs.tau,
    );
    let hi: Vec<f64> = inputs.alpha_prev.iter().map(|&a| a.clamp(0.0, 1.0)).collect();
    let m = ops.lumped_mass();
    let n = hi.len();
    let hess_diag: Vec<f64> = ops
        .stiffness()
        .diagonal()
        .iter()
        .zip(m)
        .map(|(k, mi)| k + problem.visc * mi)
        .collect();
    let mut alpha = hi.clone();
    let mut pg_norm;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let d = problem.gradient(&alpha);
        let density: Vec<f64> = d.iter().zip(m).map(|(di, mi)| di / mi).collect();
        pg_norm = projected_gradient_norm(&alpha, &density, &hi);
        let tol = cfg.tol_pg + problem.rounding_floor(&alpha);
        if pg_norm <= tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_pg_iters {
            break;
        }
        iterations += 1;

        let scaled: Vec<f64> = d.iter().zip(&hess_diag).map(|(di, hd)| di / hd).collect();
        let width = projected_gradient_norm(&alpha, &scaled, &hi).min(1e-6);
        let free: Vec<bool> = (0..n)
            .map(|i| {
                let at_lower = alpha[i] <= width && d[i] > 0.0;
                let at_upper = alpha[i] >= hi[i] - width && d[i] < 0.0;
                hi[i] > 0.0 && !at_lower && !at_upper
            })
            .collect();

        let abar = ops.element_averages(&alpha);
        let newton = bound_fixing_newton(&problem, &abar, &alpha, &hi, &d, &scaled, free, &hess_diag);

        let mut next = newton.as_ref().and_then(|p| projected_search(&problem, &alpha, &d, p));
        if next.is_none() {
            // Near the solution the decrease drops below the rounding level
            // of J; take the full Newton step if it halves the residual.
            if let Some(p) = &newton {
                let trial: Vec<f64> = (0..n).map(|i| project(alpha[i] + p[i], hi[i])).collect();
                let dt = problem.gradient(&trial);
                let dens: Vec<f64> = dt.iter().zip(m).map(|(di, mi)| di / mi).collect();
                if projected_gradient_norm(&trial, &dens, &hi) <= 0.5 * pg_norm {
                    next = Some(trial);
                }
            }
        }
        if next.is_none() {
            let p: Vec<f64> = scaled.iter().map(|s| -s).collect();
            next = projected_search(&problem, &alpha, &d, &p);
        }
        match next {
            Some(a) => alpha = a,
            None => {
                // no representable decrease left
                converged = pg_norm <= 10.0 * tol;
                break;
            }
        }
    }

    DamageSolve {
        alpha,
        iterations,
        converged,
        pg_norm,
    }
}

/// `V_new = V_prev + |ζ_new − ζ_prev|` elementwise.
pub fn update_history(zeta_prev: &[Zeta], zeta_new: &[Zeta], v_prev: &[f64]) -> Result<Vec<f64>, FieldError> {
    if zeta_prev.len() != zeta_new.len() || zeta_prev.len() != v_prev.len() {
        return Err(FieldError::Length {
            expected: v_prev.len(),
            actual: if zeta_prev.len() != v_prev.len() {
                zeta_prev.len()
            } else {
                zeta_new.len()
            },
        });
    }
    zeta_prev
        .iter()
        .zip(zeta_new)
        .zip(v_prev)
        .map(|((a, b), &v)| a.distance(b).map(|dz| v + dz).ok_or(FieldError::ZetaKind))
        .collect()
}

pub fn zeta_field(alpha: &[f64], grad_u: &[[f64; 2]], ops: &FeOperators, laws: &MaterialLaws) -> Vec<Zeta> {
    ops.element_averages(alpha)
        .iter()
        .zip(grad_u)
        .map(|(&a, &g)| laws.eval_g_zeta(a, g))
        .collect()
}

/// `E(α, u) + R(α − α_prev; V_prev) + (ε/2τ)‖α − α_prev‖²`.
pub fn joint_objective(
    alpha: &[f64],
    grad_u: &[[f64; 2]],
    inputs: &StepInputs,
    ops: &FeOperators,
    laws: &MaterialLaws,
) -> f64 {
    let e = energy_parts(alpha, grad_u, ops, laws).total;
    let load = dissipation_load(&inputs.v_prev, ops, laws);
    let m = ops.lumped_mass();
    let mut rest = 0.0;
    for i in 0..alpha.len() {
        let da = alpha[i] - inputs.alpha_prev[i];
        rest += -load[i] * da + 0.5 * inputs.eps / inputs.tau * m[i] * da * da;
    }
    e + rest
}

/// Alternate the equilibrium and damage solves until the damage field
/// changes by at most `tol_stag` between sweeps, then update ζ and V.
pub fn alternate_minimize(
    inputs: &StepInputs,
    ops: &FeOperators,
    laws: &MaterialLaws,
    cfg: &SolverConfig,
) -> Result<StepResult, SolveError> {
    inputs.validate(ops)?;
    let mut alpha: Vec<f64> = inputs.alpha_prev.iter().map(|&a| a.clamp(0.0, 1.0)).collect();
    let mut flags = StepFlags::default();
    let mut am_iterations = 0;
    let mut damage_iterations = 0;
    let mut start_objective = None;
    let mut u;
    let mut stalled_on_unchanged;

    loop {
        am_iterations += 1;
        u = solve_equilibrium(&alpha, &inputs.w_bc, ops, laws, cfg)?;
        let grad_u = ops.element_gradients(&u)?;
        if start_objective.is_none() {
            start_objective = Some(joint_objective(&alpha, &grad_u, inputs, ops, laws));
        }
        let solve = solve_damage_with_strain(&grad_u, inputs, ops, laws, cfg);
        damage_iterations += solve.iterations;
        flags.damage_not_converged = !solve.converged;
        let change = max_abs(&solve.alpha.iter().zip(&alpha).map(|(a, b)| a - b).collect::<Vec<_>>());
        stalled_on_unchanged = change == 0.0;
        alpha = solve.alpha;
        if change <= cfg.tol_stag {
            break;
        }
        if am_iterations >= cfg.max_am_sweeps {
            flags.am_cap_hit = true;
            break;
        }
    }
    if !stalled_on_unchanged {
        u = solve_equilibrium(&alpha, &inputs.w_bc, ops, laws, cfg)?;
    }
    let grad_u = ops.element_gradients(&u)?;
    let zeta = zeta_field(&alpha, &grad_u, ops, laws);
    let v = update_history(&inputs.zeta_prev, &zeta, &inputs.v_prev)?;
    let objective_decrease =
        start_objective.expect("at least one sweep") - joint_objective(&alpha, &grad_u, inputs, ops, laws);
    let lower_bound_active = alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a <= 0.0)
        .map(|(i, _)| i)
        .collect();

    Ok(StepResult {
        alpha,
        u,
        grad_u,
        zeta,
        v,
        am_iterations,
        damage_iterations,
        lower_bound_active,
        objective_decrease,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::build_fe_operators;
    use crate::laws::{CouplingLaw, FatigueLaw, MuLaw, ZetaVariant};
    use crate::mesh::{build_structured_mesh, Rect, Side};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laws(mu: MuLaw, f0: f64) -> MaterialLaws {
        MaterialLaws::new(
            mu,
            FatigueLaw::LinearClamped {
                f0,
                k: 0.1,
                f_inf: 0.05f64.min(0.5 * f0),
            },
            CouplingLaw::One,
            ZetaVariant::Vector,
        )
        .unwrap()
    }

    fn ops(n: usize, sides: &[Side]) -> FeOperators {
        build_fe_operators(build_structured_mesh(n, n, Rect::UNIT, sides).unwrap()).unwrap()
    }

    fn x_field(ops: &FeOperators, scale: f64) -> Vec<f64> {
        ops.mesh().nodes().iter().map(|p| scale * p[0]).collect()
    }

    fn inputs(ops: &FeOperators, l: &MaterialLaws, alpha: Vec<f64>, w: Vec<f64>, eps: f64, tau: f64) -> StepInputs {
        StepInputs {
            alpha_prev: alpha,
            v_prev: vec![0.0; ops.element_count()],
            zeta_prev: vec![l.zero_zeta(); ops.element_count()],
            w_bc: w,
            eps,
            tau,
        }
    }

    #[test]
    fn equilibrium_reproduces_affine_datum() {
        let o = ops(4, &Side::ALL);
        let l = laws(MuLaw::Smoothstep { min: 1.0, max: 3.0 }, 1.0);
        let w = x_field(&o, 1.0);
        let u = solve_equilibrium(&vec![0.7; o.node_count()], &w, &o, &l, &SolverConfig::default()).unwrap();
        for (a, b) in u.iter().zip(&w) {
            assert!((a - b).abs() < 1e-12);
        }
        let zero = vec![0.0; o.node_count()];
        let u0 = solve_equilibrium(&vec![0.7; o.node_count()], &zero, &o, &l, &SolverConfig::default()).unwrap();
        assert!(u0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equilibrium_residual_is_small_with_heterogeneous_damage() {
        let o = ops(6, &[Side::Left, Side::Right]);
        let l = laws(MuLaw::Smoothstep { min: 0.1, max: 3.0 }, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let alpha: Vec<f64> = (0..o.node_count()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let w: Vec<f64> = o.mesh().nodes().iter().map(|p| p[0] * (1.0 + p[1])).collect();
        let u = solve_equilibrium(&alpha, &w, &o, &l, &SolverConfig::default()).unwrap();
        let weights: Vec<f64> = o.element_averages(&alpha).iter().map(|&a| l.eval_mu(a).0).collect();
        let r = o.weighted_stiffness(&weights).mul_vec(&u);
        for i in 0..o.node_count() {
            if o.mesh().is_dirichlet(i) {
                assert_eq!(u[i], w[i]);
            } else {
                assert!(r[i].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dominant_dissipation_keeps_damage() {
        let o = ops(4, &[Side::Left, Side::Right]);
        let l = laws(MuLaw::Smoothstep { min: 0.1, max: 1.0 }, 1e6);
        let alpha = vec![0.6; o.node_count()];
        let inp = inputs(&o, &l, alpha.clone(), x_field(&o, 2.0), 0.1, 0.01);
        let u = solve_equilibrium(&alpha, &inp.w_bc, &o, &l, &SolverConfig::default()).unwrap();
        let s = solve_damage_subproblem(&u, &inp, &o, &l, &SolverConfig::default()).unwrap();
        assert_eq!(s.alpha, alpha);
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn dominant_viscosity_keeps_damage() {
        let o = ops(4, &[Side::Left, Side::Right]);
        let l = laws(MuLaw::Smoothstep { min: 0.1, max: 1.0 }, 0.01);
        let alpha = vec![0.6; o.node_count()];
        let inp = inputs(&o, &l, alpha.clone(), x_field(&o, 2.0), 1e9, 1.0);
        let u = solve_equilibrium(&alpha, &inp.w_bc, &o, &l, &SolverConfig::default()).unwrap();
        let s = solve_damage_subproblem(&u, &inp, &o, &l, &SolverConfig::default()).unwrap();
        assert!(s.converged, "pg {} its {}", s.pg_norm, s.iterations);
        for (a, b) in s.alpha.iter().zip(&alpha) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn damage_solution_satisfies_kuhn_tucker() {
        let o = ops(6, &[Side::Left, Side::Right]);
        let l = laws(MuLaw::Smoothstep { min: 0.05, max: 1.0 }, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = SolverConfig::default();
        for _ in 0..5 {
            let alpha: Vec<f64> = (0..o.node_count()).map(|_| rng.gen_range(0.2..1.0)).collect();
            let w: Vec<f64> = o.mesh().nodes().iter().map(|p| 2.0 * p[0] * (1.0 + p[1])).collect();
            let inp = inputs(&o, &l, alpha.clone(), w, 0.1, 0.05);
            let u = solve_equilibrium(&alpha, &inp.w_bc, &o, &l, &cfg).unwrap();
            let s = solve_damage_subproblem(&u, &inp, &o, &l, &cfg).unwrap();
            assert!(s.converged, "pg {} its {}", s.pg_norm, s.iterations);
            let grad_u = o.element_gradients(&u).unwrap();
            let p = DamageProblem::new(&o, &l, &grad_u, &inp.v_prev, &alpha, inp.eps, inp.tau);
            let d = p.gradient(&s.alpha);
            for i in 0..o.node_count() {
                let dens = d[i] / o.lumped_mass()[i];
                assert!(s.alpha[i] <= alpha[i] && s.alpha[i] >= 0.0);
                if s.alpha[i] == alpha[i] {
                    assert!(dens <= 1e-8);
                } else if s.alpha[i] == 0.0 {
                    assert!(dens >= -1e-8);
                } else {
                    assert!(dens.abs() <= 1e-8, "inactive node {i}: {dens}");
                }
            }
            assert!(p.value(&s.alpha) <= p.value(&alpha));
        }
    }

    #[test]
    fn objective_change_matches_values() {
        let o = ops(3, &[Side::Left]);
        let l = laws(MuLaw::Smoothstep { min: 0.05, max: 1.0 }, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let prev: Vec<f64> = (0..o.node_count()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let a: Vec<f64> = prev.iter().map(|p| p * rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = prev.iter().map(|p| p * rng.gen_range(0.0..1.0)).collect();
        let u: Vec<f64> = (0..o.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grad_u = o.element_gradients(&u).unwrap();
        let v: Vec<f64> = (0..o.element_count()).map(|_| rng.gen_range(0.0..3.0)).collect();
        let p = DamageProblem::new(&o, &l, &grad_u, &v, &prev, 0.1, 0.02);
        assert!((p.change(&a, &b) - (p.value(&b) - p.value(&a))).abs() < 1e-12);
    }

    #[test]
    fn stationary_step_is_a_fixed_point() {
        let o = ops(4, &[Side::Left, Side::Right]);
        let l = laws(MuLaw::Quadratic { min: 0.05, max: 1.0 }, 5.0);
        let alpha = vec![1.0; o.node_count()];
        let w = x_field(&o, 0.5);
        let cfg = SolverConfig::default();
        let u0 = solve_equilibrium(&alpha, &w, &o, &l, &cfg).unwrap();
        let grad_u0 = o.element_gradients(&u0).unwrap();
        let zeta0 = zeta_field(&alpha, &grad_u0, &o, &l);
        let inp = StepInputs {
            alpha_prev: alpha.clone(),
            v_prev: vec![0.3; o.element_count()],
            zeta_prev: zeta0.clone(),
            w_bc: w,
            eps: 0.1,
            tau: 0.01,
        };
        let r = alternate_minimize(&inp, &o, &l, &cfg).unwrap();
        assert_eq!(r.alpha, alpha);
        assert_eq!(r.u, u0);
        assert_eq!(r.am_iterations, 1);
        assert_eq!(r.v, inp.v_prev);
        assert_eq!(r.zeta, zeta0);
    }

    #[test]
    fn alternate_minimization_decreases_the_joint_objective() {
        let o = ops(5, &[Side::Left, Side::Right]);
        let l = laws(MuLaw::Smoothstep { min: 0.05, max: 1.0 }, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let alpha: Vec<f64> = (0..o.node_count()).map(|_| rng.gen_range(0.3..0.9)).collect();
        let w: Vec<f64> = o
            .mesh()
            .nodes()
            .iter()
            .map(|p| 1.5 * p[0] * (1.0 + 0.5 * p[1]))
            .collect();
        let inp = inputs(&o, &l, alpha.clone(), w, 0.1, 0.05);
        let cfg = SolverConfig::default();
        let r = alternate_minimize(&inp, &o, &l, &cfg).unwrap();
        let u_start = solve_equilibrium(&alpha, &inp.w_bc, &o, &l, &cfg).unwrap();
        let j_start = joint_objective(&alpha, &o.element_gradients(&u_start).unwrap(), &inp, &o, &l);
        let j_end = joint_objective(&r.alpha, &r.grad_u, &inp, &o, &l);
        assert!(j_end <= j_start + 1e-14);
        assert!(r.objective_decrease >= -1e-12);
        assert!(
            !r.flags.any(),
            "{:?} sweeps {} its {}",
            r.flags,
            r.am_iterations,
            r.damage_iterations
        );
        assert!(r.alpha.iter().zip(&alpha).all(|(a, p)| a <= p));
        assert!(r.v.iter().zip(&inp.v_prev).all(|(a, p)| a >= p));
        assert!(r.alpha.iter().zip(&alpha).any(|(a, p)| a < p), "expected some damage");
    }

    #[test]
    fn history_update() {
        let v = update_history(&[Zeta::Vector([0.0, 0.0])], &[Zeta::Vector([1.0, 0.0])], &[0.0]).unwrap();
        assert_eq!(v, vec![1.0]);
        let z = [Zeta::Vector([0.3, -2.0])];
        assert_eq!(update_history(&z, &z, &[2.5]).unwrap(), vec![2.5]);
        let v = update_history(&[Zeta::Scalar(2.0)], &[Zeta::Scalar(1.0)], &[3.0]).unwrap();
        assert_eq!(v, vec![4.0]);
        assert!(update_history(&z, &z, &[1.0, 2.0]).is_err());
        assert_eq!(
            update_history(&z, &[Zeta::Scalar(1.0)], &[0.0]),
            Err(FieldError::ZetaKind)
        );
    }

    #[test]
    fn clamping_at_zero_never_increases_the_objective() {
        // Nonobtuse mesh: K is an M-matrix, so truncation at the lower bound is a descent.
        let o = ops(4, &[Side::Left, Side::Right]);
        let l = laws(MuLaw::Smoothstep { min: 0.05, max: 1.0 }, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let prev: Vec<f64> = (0..o.node_count()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let u: Vec<f64> = (0..o.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let grad_u = o.element_gradients(&u).unwrap();
            let v: Vec<f64> = (0..o.element_count()).map(|_| rng.gen_range(0.0..2.0)).collect();
            let p = DamageProblem::new(&o, &l, &grad_u, &v, &prev, 0.1, 0.05);
            let trial: Vec<f64> = prev.iter().map(|&a| rng.gen_range(-0.5..1.0) * a).collect();
            let clamped: Vec<f64> = trial.iter().map(|a| a.max(0.0)).collect();
            assert!(p.value(&clamped) <= p.value(&trial) + 1e-13);
        }
    }
}
