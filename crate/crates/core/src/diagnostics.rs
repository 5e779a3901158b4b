//! Per-step and per-run checks: Kuhn-Tucker conditions of the damage step,
//! the stability functional Ψ and the discrete energy-dissipation balance.

use serde::{Deserialize, Serialize};

use crate::energy::{dissipation_load, grad_alpha_from_parts};
use crate::error::{EvolutionError, FieldError};
use crate::evolution::EvolutionTrace;
use crate::fe::FeOperators;
use crate::laws::MaterialLaws;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktReport {
    /// `|⟨G, α̇⟩ + R(α̇; V_prev) + ε‖α̇‖²|` over the sum of the magnitudes.
    pub eq_residual: f64,
    /// Largest violated nodewise sign condition, density units.
    pub max_sign_violation: f64,
    /// Largest `|d_i| (α_prev − α)_i` over nodes off the lower bound.
    pub complementarity_max: f64,
    pub lower_active_count: usize,
}

/// Nodewise sign classes of the stationarity density `d` of the damage step.
///
/// Nodes strictly between the bounds need `d = 0`, nodes at the upper bound
/// `d <= 0`, nodes at zero `d >= 0`. Nodes with `alpha_prev = 0` are fixed
/// and carry no condition. Returns `(max_sign_violation, complementarity_max,
/// lower_active_count)`.
pub fn classify_kkt(density: &[f64], alpha: &[f64], alpha_prev: &[f64]) -> (f64, f64, usize) {
    let mut violation: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut lower = 0;
    for ((&d, &a), &p) in density.iter().zip(alpha).zip(alpha_prev) {
        if p <= 0.0 {
            continue;
        }
        let at_upper = a >= p;
        let at_lower = a <= 0.0;
        if at_lower {
            lower += 1;
            violation = violation.max(-d);
        } else {
            comp = comp.max((d * (p - a)).abs());
            if at_upper {
                violation = violation.max(d);
            } else {
                violation = violation.max(d.abs());
            }
        }
    }
    (violation.max(0.0), comp, lower)
}

/// `G − F`: energy gradient minus the dissipation load at cumulation `v`.
pub fn driving_force(
    alpha: &[f64],
    grad_u: &[[f64; 2]],
    v: &[f64],
    ops: &FeOperators,
    laws: &MaterialLaws,
) -> Vec<f64> {
    let mut g = grad_alpha_from_parts(alpha, grad_u, ops, laws);
    for (gi, fi) in g.iter_mut().zip(dissipation_load(v, ops, laws)) {
        *gi -= fi;
    }
    g
}

#[allow(clippy::too_many_arguments)]
pub fn kkt_residuals(
    alpha: &[f64],
    grad_u: &[[f64; 2]],
    alpha_prev: &[f64],
    v_prev: &[f64],
    ops: &FeOperators,
    laws: &MaterialLaws,
    eps: f64,
    tau: f64,
) -> Result<KktReport, FieldError> {
    ops.check_nodal(alpha)?;
    ops.check_nodal(alpha_prev)?;
    ops.check_elemental(grad_u)?;
    ops.check_elemental(v_prev)?;
    let m = ops.lumped_mass();
    let grad = grad_alpha_from_parts(alpha, grad_u, ops, laws);
    let load = dissipation_load(v_prev, ops, laws);
    let rate: Vec<f64> = alpha.iter().zip(alpha_prev).map(|(a, p)| (a - p) / tau).collect();

    let energy_term: f64 = grad.iter().zip(&rate).map(|(g, r)| g * r).sum();
    let dissipation: f64 = -load.iter().zip(&rate).map(|(f, r)| f * r).sum::<f64>();
    let viscous = eps * ops.lumped_inner(&rate, &rate);
    let scale = energy_term.abs() + dissipation.abs() + viscous.abs();
    let eq_residual = if scale > 0.0 {
        (energy_term + dissipation + viscous).abs() / scale
    } else {
        0.0
    };

    let density: Vec<f64> = (0..alpha.len())
        .map(|i| (grad[i] - load[i] + eps * m[i] * rate[i]) / m[i])
        .collect();
    let (max_sign_violation, complementarity_max, lower_active_count) = classify_kkt(&density, alpha, alpha_prev);
    Ok(KktReport {
        eq_residual,
        max_sign_violation,
        complementarity_max,
        lower_active_count,
    })
}

/// Lumped-L² norm of the positive part of the density `driving_i / m_i`.
pub fn psi_from_driving(driving: &[f64], mass: &[f64]) -> f64 {
    driving
        .iter()
        .zip(mass)
        .map(|(&d, &m)| {
            let p = (d / m).max(0.0);
            m * p * p
        })
        .sum::<f64>()
        .sqrt()
}

/// Ψ(α, u, f(V)): how far the driving force exceeds the fatigue threshold.
pub fn stability_psi(
    alpha: &[f64],
    u: &[f64],
    v: &[f64],
    ops: &FeOperators,
    laws: &MaterialLaws,
) -> Result<f64, FieldError> {
    ops.check_nodal(alpha)?;
    ops.check_elemental(v)?;
    let grad_u = ops.element_gradients(u)?;
    let driving = driving_force(alpha, &grad_u, v, ops, laws);
    Ok(psi_from_driving(&driving, ops.lumped_mass()))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BalanceReport {
    pub energy_start: f64,
    pub energy_end: f64,
    pub dissipated_total: f64,
    pub viscous_total: f64,
    pub work_total: f64,
    /// `energy_start + work_total − (energy_end + dissipated_total + viscous_total)`.
    pub residual: f64,
}

fn check_range(trace: &EvolutionTrace, i1: usize, i2: usize) -> Result<(), EvolutionError> {
    let steps = trace.step_count();
    if i1 >= i2 || i2 > steps {
        return Err(EvolutionError::Range {
            from: i1,
            to: i2,
            steps,
        });
    }
    Ok(())
}

/// Every term of the discrete balance restricted to the grid interval
/// `[t_{i1}, t_{i2}]`.
pub fn energy_balance_residual(trace: &EvolutionTrace, i1: usize, i2: usize) -> Result<BalanceReport, EvolutionError> {
    check_range(trace, i1, i2)?;
    let records = &trace.records[i1..i2];
    let energy_start = trace.energy[i1].total;
    let energy_end = trace.energy[i2].total;
    let dissipated_total: f64 = records.iter().map(|r| r.diss_inc).sum();
    let viscous_total: f64 = records.iter().map(|r| r.visc_inc).sum();
    let work_total: f64 = records.iter().map(|r| r.work_inc).sum();
    Ok(BalanceReport {
        energy_start,
        energy_end,
        dissipated_total,
        viscous_total,
        work_total,
        residual: energy_start + work_total - (energy_end + dissipated_total + viscous_total),
    })
}

/// Running residual `R(0, t_i)` for `i = 1..=n`.
pub fn running_balance(trace: &EvolutionTrace) -> Vec<f64> {
    let e0 = trace.energy[0].total;
    let mut acc = 0.0;
    trace
        .records
        .iter()
        .zip(&trace.energy[1..])
        .map(|(r, e)| {
            acc += r.work_inc - r.diss_inc - r.visc_inc;
            e0 + acc - e.total
        })
        .collect()
}

/// The balance with the viscous term replaced by `Σ τ ‖α̇_i‖ Ψ_i`.
///
/// Agrees with [`energy_balance_residual`] up to the gap between `ε‖α̇‖`
/// and Ψ, which vanishes at steps where the lower bound is inactive.
pub fn recast_balance(trace: &EvolutionTrace, i1: usize, i2: usize) -> Result<BalanceReport, EvolutionError> {
    let mut report = energy_balance_residual(trace, i1, i2)?;
    let tau = trace.tau;
    let eps = trace.problem.eps;
    report.viscous_total = trace.records[i1..i2]
        .iter()
        .map(|r| tau * (r.eps_alphadot_lumped / eps) * r.psi)
        .sum();
    report.residual =
        report.energy_start + report.work_total - (report.energy_end + report.dissipated_total + report.viscous_total);
    Ok(report)
}
