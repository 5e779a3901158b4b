//! Stored energy, its α-gradient and the fatigue dissipation potential.
//!
//! Nonlinear coefficients are integrated with one-point quadrature: on
//! element `e` the damage enters through the nodal average `ᾱ_e`. The
//! gradient returned by [`grad_alpha_energy`] is the exact derivative of
//! [`total_energy`] under that rule.

use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::fe::FeOperators;
use crate::laws::MaterialLaws;

/// Nonpositive entries above `-DIRECTION_TOL` are accepted as zero.
pub const DIRECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub alpha: Vec<f64>,
    pub u: Vec<f64>,
    pub grad_u: Vec<[f64; 2]>,
    pub v: Vec<f64>,
}

impl DiscreteState {
    pub fn new(ops: &FeOperators, alpha: Vec<f64>, u: Vec<f64>, v: Vec<f64>) -> Result<Self, FieldError> {
        ops.check_nodal(&alpha)?;
        ops.check_elemental(&v)?;
        let grad_u = ops.element_gradients(&u)?;
        Ok(Self { alpha, u, grad_u, v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub elastic: f64,
    pub gradient: f64,
    pub total: f64,
}

pub fn elastic_energy(alpha: &[f64], grad_u: &[[f64; 2]], ops: &FeOperators, laws: &MaterialLaws) -> f64 {
    let abar = ops.element_averages(alpha);
    abar.iter()
        .zip(grad_u)
        .zip(ops.mesh().areas())
        .map(|((&a, g), area)| 0.5 * area * laws.eval_mu(a).0 * (g[0] * g[0] + g[1] * g[1]))
        .sum()
}

pub fn energy_parts(alpha: &[f64], grad_u: &[[f64; 2]], ops: &FeOperators, laws: &MaterialLaws) -> EnergyBreakdown {
    let elastic = elastic_energy(alpha, grad_u, ops, laws);
    let gradient = 0.5 * ops.stiffness().quad_form(alpha);
    EnergyBreakdown {
        elastic,
        gradient,
        total: elastic + gradient,
    }
}

pub fn total_energy(state: &DiscreteState, ops: &FeOperators, laws: &MaterialLaws) -> EnergyBreakdown {
    energy_parts(&state.alpha, &state.grad_u, ops, laws)
}

/// Nodal gradient of the energy with respect to α, for a given strain field.
pub fn grad_alpha_from_parts(alpha: &[f64], grad_u: &[[f64; 2]], ops: &FeOperators, laws: &MaterialLaws) -> Vec<f64> {
    let mut grad = ops.stiffness().mul_vec(alpha);
    let abar = ops.element_averages(alpha);
    for (((tri, &a), g), area) in ops
        .mesh()
        .triangles()
        .iter()
        .zip(&abar)
        .zip(grad_u)
        .zip(ops.mesh().areas())
    {
        let share = area / 3.0 * 0.5 * laws.eval_mu(a).1 * (g[0] * g[0] + g[1] * g[1]);
        for &i in tri {
            grad[i] += share;
        }
    }
    grad
}

pub fn grad_alpha_energy(state: &DiscreteState, ops: &FeOperators, laws: &MaterialLaws) -> Vec<f64> {
    grad_alpha_from_parts(&state.alpha, &state.grad_u, ops, laws)
}

/// Assembled dissipation load `F_i = Σ_{e∋i} |T_e|/3 · f(V_e)`.
pub fn dissipation_load(v: &[f64], ops: &FeOperators, laws: &MaterialLaws) -> Vec<f64> {
    let mut load = vec![0.0; ops.node_count()];
    for ((tri, &ve), area) in ops.mesh().triangles().iter().zip(v).zip(ops.mesh().areas()) {
        let share = area / 3.0 * laws.f_value(ve);
        for &i in tri {
            load[i] += share;
        }
    }
    load
}

/// `R(β; V) = −Σ_i F_i β_i` for a nonpositive direction `β`.
pub fn dissipation_r(beta: &[f64], v: &[f64], ops: &FeOperators, laws: &MaterialLaws) -> Result<f64, FieldError> {
    ops.check_nodal(beta)?;
    ops.check_elemental(v)?;
    if let Some((index, &value)) = beta.iter().enumerate().find(|(_, &b)| b > DIRECTION_TOL) {
        return Err(FieldError::PositiveDirection { index, value });
    }
    let load = dissipation_load(v, ops, laws);
    Ok(-load.iter().zip(beta).map(|(f, b)| f * b).sum::<f64>())
}
