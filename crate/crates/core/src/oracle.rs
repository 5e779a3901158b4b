//! Exhaustive active-set certification of the damage step on tiny convex
//! instances.
//!
//! With the linear μ law the damage subproblem is the box-constrained
//! quadratic program `min ½ xᵀQx + cᵀx`, `lo <= x <= hi`. Every
//! lower/upper/free pattern is tried; the Kuhn-Tucker points among them
//! contain the global minimizer.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::dissipation_load;
use crate::error::{FieldError, OracleError};
use crate::fe::{build_fe_operators, FeOperators};
use crate::laws::{CouplingLaw, FatigueLaw, MaterialLaws, MuLaw, ZetaVariant};
use crate::mesh::{build_structured_mesh, Rect, Side};
use crate::sparse::max_abs;
use crate::step::{solve_damage_subproblem, SolverConfig, StepInputs};

/// Largest number of variables accepted by the enumeration (`3^8` patterns).
pub const MAX_FREE: usize = 8;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleProblem {
    q: DMatrix<f64>,
    c: DVector<f64>,
    lo: DVector<f64>,
    hi: DVector<f64>,
}

impl OracleProblem {
    pub fn new(q: DMatrix<f64>, c: DVector<f64>, lo: DVector<f64>, hi: DVector<f64>) -> Result<Self, OracleError> {
        let n = c.len();
        if n > MAX_FREE {
            return Err(OracleError::TooLarge(n, MAX_FREE));
        }
        if q.nrows() != n || q.ncols() != n || lo.len() != n || hi.len() != n {
            return Err(FieldError::Length {
                expected: n,
                actual: q.nrows().max(lo.len()).max(hi.len()),
            }
            .into());
        }
        if let Some(i) = (0..n).find(|&i| !(lo[i] <= hi[i])) {
            return Err(OracleError::Bounds(i));
        }
        if n > 0 {
            let sym = (&q + q.transpose()) * 0.5;
            let min_eig = sym.symmetric_eigenvalues().min();
            let scale = 1.0 + sym.amax();
            if min_eig < -PSD_TOL * scale {
                return Err(OracleError::NotPsd(min_eig));
            }
        }
        Ok(Self { q, c, lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.c
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lo
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub kkt_points: usize,
    pub singular_patterns: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Lower,
    Upper,
    Free,
}

/// Global minimizer by enumeration of all `3ⁿ` bound patterns.
pub fn oracle_damage_step(problem: &OracleProblem) -> Result<OracleSolution, OracleError> {
    let n = problem.dim();
    let total = 3usize.pow(n as u32);
    let scale = 1.0 + problem.q.amax() + problem.c.amax();
    let tol = 1e-9 * scale;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut kkt_points = 0;
    let mut singular_patterns = 0;
    let mut pattern = vec![Slot::Lower; n];

    for code in 0..total {
        let mut rest = code;
        for slot in pattern.iter_mut() {
            *slot = match rest % 3 {
                0 => Slot::Lower,
                1 => Slot::Upper,
                _ => Slot::Free,
            };
            rest /= 3;
        }
        // a degenerate box has a single admissible pattern
        if (0..n).any(|i| problem.lo[i] == problem.hi[i] && pattern[i] != Slot::Lower) {
            continue;
        }
        let mut x = DVector::zeros(n);
        for i in 0..n {
            match pattern[i] {
                Slot::Lower => x[i] = problem.lo[i],
                Slot::Upper => x[i] = problem.hi[i],
                Slot::Free => {}
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == Slot::Free).collect();
        if !free.is_empty() {
            let k = free.len();
            let fixed_part = &problem.q * &x + &problem.c;
            let a = DMatrix::from_fn(k, k, |r, s| problem.q[(free[r], free[s])]);
            let b = DVector::from_fn(k, |r, _| -fixed_part[free[r]]);
            let Some(sol) = a.lu().solve(&b) else {
                singular_patterns += 1;
                continue;
            };
            for (r, &i) in free.iter().enumerate() {
                x[i] = sol[r];
            }
        }
        if (0..n).any(|i| x[i] < problem.lo[i] - tol || x[i] > problem.hi[i] + tol) {
            continue;
        }
        let g = problem.gradient(&x);
        let signs_ok = (0..n).all(|i| match pattern[i] {
            _ if problem.lo[i] == problem.hi[i] => true,
            Slot::Lower => g[i] >= -tol,
            Slot::Upper => g[i] <= tol,
            Slot::Free => true,
        });
        if !signs_ok {
            continue;
        }
        for i in 0..n {
            x[i] = x[i].clamp(problem.lo[i], problem.hi[i]);
        }
        kkt_points += 1;
        let value = problem.objective(&x);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, x));
        }
    }
    let (objective, x) = best.ok_or(OracleError::NoKktPoint)?;
    Ok(OracleSolution {
        x,
        objective,
        kkt_points,
        singular_patterns,
    })
}

/// The damage step of one time increment written as an [`OracleProblem`].
/// Nodes with `alpha_prev = 0` are fixed at zero and eliminated.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageQp {
    pub problem: OracleProblem,
    /// Node index of each oracle variable.
    pub nodes: Vec<usize>,
    pub node_count: usize,
}

impl DamageQp {
    pub fn from_damage_step(
        u: &[f64],
        inputs: &StepInputs,
        ops: &FeOperators,
        laws: &MaterialLaws,
    ) -> Result<Self, OracleError> {
        let MuLaw::Linear { min, max } = laws.mu else {
            return Err(OracleError::NonlinearMu);
        };
        ops.check_nodal(u)?;
        ops.check_nodal(&inputs.alpha_prev)?;
        ops.check_elemental(&inputs.v_prev)?;
        let slope = max - min;
        let visc = inputs.eps / inputs.tau;
        let m = ops.lumped_mass();
        let n = ops.node_count();
        let grad_u = ops.element_gradients(u)?;

        // linear part: elastic coefficient, minus load, minus viscous offset
        let mut lin = vec![0.0; n];
        for ((tri, g), area) in ops.mesh().triangles().iter().zip(&grad_u).zip(ops.mesh().areas()) {
            let share = 0.5 * area * (g[0] * g[0] + g[1] * g[1]) * slope / 3.0;
            for &i in tri {
                lin[i] += share;
            }
        }
        let load = dissipation_load(&inputs.v_prev, ops, laws);
        for i in 0..n {
            lin[i] += -load[i] - visc * m[i] * inputs.alpha_prev[i];
        }

        let nodes: Vec<usize> = (0..n).filter(|&i| inputs.alpha_prev[i] > 0.0).collect();
        if nodes.len() > MAX_FREE {
            return Err(OracleError::TooLarge(nodes.len(), MAX_FREE));
        }
        let k = ops.stiffness();
        let q = DMatrix::from_fn(nodes.len(), nodes.len(), |r, s| {
            let (i, j) = (nodes[r], nodes[s]);
            k.get(i, j) + if i == j { visc * m[i] } else { 0.0 }
        });
        let c = DVector::from_fn(nodes.len(), |r, _| lin[nodes[r]]);
        let lo = DVector::zeros(nodes.len());
        let hi = DVector::from_fn(nodes.len(), |r, _| inputs.alpha_prev[nodes[r]].min(1.0));
        Ok(Self {
            problem: OracleProblem::new(q, c, lo, hi)?,
            nodes,
            node_count: n,
        })
    }

    /// Full nodal field from oracle variables.
    pub fn expand(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut alpha = vec![0.0; self.node_count];
        for (r, &i) in self.nodes.iter().enumerate() {
            alpha[i] = x[r];
        }
        alpha
    }
}

/// A seeded random damage step on a small mesh.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub ops: FeOperators,
    pub laws: MaterialLaws,
    pub inputs: StepInputs,
    pub u: Vec<f64>,
}

/// Instance `index` of the batch with base `seed`; each index draws from
/// its own stream, so instances can be generated in any order.
pub fn random_instance(seed: u64, index: u64) -> OracleInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);

    let (nx, ny) = if rng.gen_bool(0.5) { (2, 2) } else { (3, 2) };
    let width = rng.gen_range(0.5..2.0);
    let sides = if rng.gen_bool(0.5) {
        vec![Side::Left, Side::Right]
    } else {
        vec![Side::Left]
    };
    let domain = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: width,
        y1: 1.0,
    };
    let mesh = build_structured_mesh(nx, ny, domain, &sides).expect("valid random mesh");
    let ops = build_fe_operators(mesh).expect("nondegenerate mesh");
    let n = ops.node_count();

    let min = rng.gen_range(0.05..0.5);
    let f0 = rng.gen_range(0.2..8.0);
    let laws = MaterialLaws::new(
        MuLaw::Linear {
            min,
            max: min + rng.gen_range(0.5..3.0),
        },
        FatigueLaw::LinearClamped {
            f0,
            k: rng.gen_range(0.0..0.5),
            f_inf: f0 * rng.gen_range(0.05..0.5),
        },
        CouplingLaw::One,
        ZetaVariant::Vector,
    )
    .expect("valid random laws");

    let n_free = rng.gen_range(2..=6usize);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut alpha_prev = vec![0.0; n];
    for &i in &order[..n_free] {
        alpha_prev[i] = rng.gen_range(0.2..=1.0);
    }
    let scale = rng.gen_range(0.3..2.5);
    let u: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    let v_prev: Vec<f64> = (0..ops.element_count()).map(|_| rng.gen_range(0.0..5.0)).collect();
    let eps = rng.gen_range(0.05..0.5);
    let tau = eps / rng.gen_range(0.5..20.0);
    let inputs = StepInputs {
        alpha_prev,
        v_prev,
        zeta_prev: vec![laws.zero_zeta(); ops.element_count()],
        w_bc: u.clone(),
        eps,
        tau,
    };
    OracleInstance { ops, laws, inputs, u }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCheck {
    pub index: u64,
    pub free_nodes: usize,
    pub lower_active: usize,
    pub upper_active: usize,
    pub max_deviation: f64,
    pub solver_converged: bool,
    pub matches: bool,
}

/// Solve one instance with the production solver and with the oracle and
/// compare nodewise.
pub fn check_instance(seed: u64, index: u64, tolerance: f64, cfg: &SolverConfig) -> Result<InstanceCheck, OracleError> {
    let inst = random_instance(seed, index);
    let qp = DamageQp::from_damage_step(&inst.u, &inst.inputs, &inst.ops, &inst.laws)?;
    let exact = oracle_damage_step(&qp.problem)?;
    let reference = qp.expand(&exact.x);
    let solved = solve_damage_subproblem(&inst.u, &inst.inputs, &inst.ops, &inst.laws, cfg).map_err(|e| match e {
        crate::error::SolveError::Field(f) => OracleError::Field(f),
        _ => OracleError::NoKktPoint,
    })?;
    let diff: Vec<f64> = solved.alpha.iter().zip(&reference).map(|(a, b)| a - b).collect();
    let max_deviation = max_abs(&diff);
    let lower_active = qp.nodes.iter().filter(|&&i| reference[i] <= 0.0).count();
    let upper_active = qp
        .nodes
        .iter()
        .filter(|&&i| reference[i] > 0.0 && reference[i] >= inst.inputs.alpha_prev[i])
        .count();
    Ok(InstanceCheck {
        index,
        free_nodes: qp.nodes.len(),
        lower_active,
        upper_active,
        max_deviation,
        solver_converged: solved.converged,
        matches: solved.converged && max_deviation <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBatchReport {
    pub seed: u64,
    pub count: u64,
    pub tolerance: f64,
    pub mismatches: usize,
    pub max_deviation: f64,
    pub instances: Vec<InstanceCheck>,
}

impl OracleBatchReport {
    pub fn from_checks(seed: u64, tolerance: f64, instances: Vec<InstanceCheck>) -> Self {
        Self {
            seed,
            count: instances.len() as u64,
            tolerance,
            mismatches: instances.iter().filter(|c| !c.matches).count(),
            max_deviation: instances.iter().map(|c| c.max_deviation).fold(0.0, f64::max),
            instances,
        }
    }
}

pub fn oracle_batch(
    seed: u64,
    count: u64,
    tolerance: f64,
    cfg: &SolverConfig,
) -> Result<OracleBatchReport, OracleError> {
    let checks = (0..count)
        .map(|i| check_instance(seed, i, tolerance, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OracleBatchReport::from_checks(seed, tolerance, checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed(q: &[f64], c: &[f64], hi: f64) -> OracleProblem {
        let n = c.len();
        OracleProblem::new(
            DMatrix::from_row_slice(n, n, q),
            DVector::from_row_slice(c),
            DVector::zeros(n),
            DVector::from_element(n, hi),
        )
        .unwrap()
    }

    #[test]
    fn closed_form_instances() {
        let p = boxed(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0], 0.7);
        assert_eq!(oracle_damage_step(&p).unwrap().x, DVector::zeros(2));
        let p = boxed(&[1.0], &[-1.0], 0.7);
        assert_eq!(oracle_damage_step(&p).unwrap().x[0], 0.7);
        let p = boxed(&[2.0], &[-0.5], 0.7);
        assert!((oracle_damage_step(&p).unwrap().x[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let e = OracleProblem::new(q, DVector::zeros(2), DVector::zeros(2), DVector::from_element(2, 1.0));
        assert!(matches!(e, Err(OracleError::NotPsd(_))));
        let e = OracleProblem::new(
            DMatrix::identity(1, 1),
            DVector::zeros(1),
            DVector::from_element(1, 1.0),
            DVector::zeros(1),
        );
        assert_eq!(e, Err(OracleError::Bounds(0)));
        let e = OracleProblem::new(
            DMatrix::identity(9, 9),
            DVector::zeros(9),
            DVector::zeros(9),
            DVector::zeros(9),
        );
        assert_eq!(e, Err(OracleError::TooLarge(9, MAX_FREE)));
    }

    #[test]
    fn instances_are_reproducible() {
        let a = random_instance(3, 17);
        let b = random_instance(3, 17);
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.u, b.u);
        assert_ne!(random_instance(3, 18).u, a.u);
    }

    #[test]
    fn smoothstep_is_refused() {
        let inst = random_instance(1, 0);
        let laws = MaterialLaws::default();
        assert_eq!(
            DamageQp::from_damage_step(&inst.u, &inst.inputs, &inst.ops, &laws),
            Err(OracleError::NonlinearMu)
        );
    }
}
