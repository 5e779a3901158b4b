//! Arc-length reparametrisation of a viscous trace, plateau detection,
//! cross-viscosity comparison and jump-transition profiles.
//!
//! Each time step contributes `Δs = τ + ‖Δα‖_{H¹} + ‖Δu‖_{W^{1,p}}`, so the
//! rescaled time `t°` advances at rate `τ/Δs <= 1`. Increments where that
//! rate is at most `delta` form plateaus: the physical time stands almost
//! still while the fields move.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{driving_force, psi_from_driving};
use crate::error::{EvolutionError, RescaleError};
use crate::evolution::{EvolutionProblem, EvolutionTrace};
use crate::fe::FeOperators;
use crate::laws::{MaterialLaws, Zeta};
use crate::variation::ZetaSeries;

/// Default rate threshold below which an increment counts as plateau.
pub const DEFAULT_DELTA: f64 = 0.1;
/// Default exponent of the displacement norm.
pub const DEFAULT_P: f64 = 4.0;
/// Ψ values at or below this refuse a jump profile.
pub const PSI_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcIncrement {
    pub dt: f64,
    pub dalpha_h1: f64,
    pub du_w1p: f64,
}

impl ArcIncrement {
    pub fn ds(&self) -> f64 {
        self.dt + self.dalpha_h1 + self.du_w1p
    }

    /// Discrete `ṫ°` on this increment.
    pub fn rate(&self) -> f64 {
        self.dt / self.ds()
    }
}

#[derive(Debug, Clone)]
pub struct RescaledEvolution {
    pub problem: EvolutionProblem,
    pub ops: FeOperators,
    pub p: f64,
    pub delta: f64,
    pub tau: f64,
    /// Cumulated arc length at each grid sample.
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub increments: Vec<ArcIncrement>,
    pub alpha: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<Zeta>>,
    /// Ψ at each sample; sample `j >= 1` uses the cumulation `V_{j−1}`.
    pub psi: Vec<f64>,
    /// `G − F` at each sample, same convention as `psi`.
    pub driving: Vec<Vec<f64>>,
    pub s_total: f64,
    /// Maximal runs of plateau increments as sample index pairs `(a, b)`.
    pub plateaus: Vec<(usize, usize)>,
}

fn plateau_runs(increments: &[ArcIncrement], delta: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, inc) in increments.iter().enumerate() {
        // increment i joins samples i and i + 1
        match (inc.rate() <= delta, start) {
            (true, None) => start = Some(i),
            (false, Some(a)) => {
                runs.push((a, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        runs.push((a, increments.len()));
    }
    runs
}

pub fn arc_length_rescale(trace: &EvolutionTrace, p: f64, delta: f64) -> Result<RescaledEvolution, RescaleError> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(RescaleError::Exponent(p));
    }
    let n = trace.step_count();
    if n == 0 {
        return Err(RescaleError::EmptyTrace);
    }
    let ops = trace
        .operators()
        .map_err(|e| RescaleError::Incompatible(e.to_string()))?;
    let laws = &trace.problem.laws;

    let mut increments = Vec::with_capacity(n);
    let mut s = vec![0.0];
    for i in 1..=n {
        let da: Vec<f64> = trace.alpha[i]
            .iter()
            .zip(&trace.alpha[i - 1])
            .map(|(a, b)| a - b)
            .collect();
        let du: Vec<f64> = trace.u[i].iter().zip(&trace.u[i - 1]).map(|(a, b)| a - b).collect();
        let inc = ArcIncrement {
            dt: trace.times[i] - trace.times[i - 1],
            dalpha_h1: ops.h1_norm(&da),
            du_w1p: ops.w1p_norm(&du, p),
        };
        s.push(s[i - 1] + inc.ds());
        increments.push(inc);
    }

    let mut psi = Vec::with_capacity(n + 1);
    let mut driving = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let v = &trace.v[j.saturating_sub(1)];
        let grad_u = ops.element_gradients(&trace.u[j]).expect("trace fields match the mesh");
        let d = driving_force(&trace.alpha[j], &grad_u, v, &ops, laws);
        psi.push(psi_from_driving(&d, ops.lumped_mass()));
        driving.push(d);
    }

    Ok(RescaledEvolution {
        problem: trace.problem.clone(),
        p,
        delta,
        tau: trace.tau,
        s_total: s[n],
        plateaus: plateau_runs(&increments, delta),
        s,
        t: trace.times.clone(),
        increments,
        alpha: trace.alpha.clone(),
        u: trace.u.clone(),
        v: trace.v.clone(),
        zeta: trace.zeta.clone(),
        psi,
        driving,
        ops,
    })
}

impl RescaledEvolution {
    pub fn sample_count(&self) -> usize {
        self.s.len()
    }

    fn laws(&self) -> &MaterialLaws {
        &self.problem.laws
    }

    /// `t°(s)`, piecewise affine between samples.
    pub fn time_at(&self, s: f64) -> Result<f64, EvolutionError> {
        if !(0.0..=self.s_total).contains(&s) {
            return Err(EvolutionError::TimeOutOfRange {
                t: s,
                t_final: self.s_total,
            });
        }
        let j = self.s.partition_point(|&x| x < s);
        if j == 0 || self.s[j] == s {
            return Ok(self.t[j]);
        }
        let theta = (s - self.s[j - 1]) / (self.s[j] - self.s[j - 1]);
        Ok(self.t[j - 1] + theta * (self.t[j] - self.t[j - 1]))
    }

    /// `t°(s₂) − t°(s₁) + ‖Δα°‖_{H¹} + ‖Δu°‖_{W^{1,p}}` between two samples.
    pub fn pair_increment(&self, j1: usize, j2: usize) -> f64 {
        let da: Vec<f64> = self.alpha[j2].iter().zip(&self.alpha[j1]).map(|(a, b)| a - b).collect();
        let du: Vec<f64> = self.u[j2].iter().zip(&self.u[j1]).map(|(a, b)| a - b).collect();
        (self.t[j2] - self.t[j1]) + self.ops.h1_norm(&da) + self.ops.w1p_norm(&du, self.p)
    }

    /// Total s-length of increments with rate at most `delta`.
    pub fn plateau_measure(&self, delta: f64) -> f64 {
        self.increments
            .iter()
            .filter(|i| i.rate() <= delta)
            .fold(0.0, |acc, i| acc + i.ds())
    }

    /// `Σ Ψ_j Δs_j` over increments with rate above `delta`.
    pub fn instability_measure(&self, delta: f64) -> f64 {
        self.increments
            .iter()
            .enumerate()
            .filter(|(_, inc)| inc.rate() > delta)
            .fold(0.0, |acc, (i, inc)| acc + self.psi[i + 1] * inc.ds())
    }

    /// Largest elementwise `f(V_coarse) − f(V°_end)`, where `V_coarse`
    /// counts every plateau as a single jump of ζ. Nonnegative by
    /// refinement monotonicity of the variation.
    pub fn fatigue_gap_proxy(&self, delta: f64) -> f64 {
        let plateaus = plateau_runs(&self.increments, delta);
        let last = self.sample_count() - 1;
        let mut keep = Vec::with_capacity(self.sample_count());
        let mut j = 0;
        while j <= last {
            keep.push(j);
            j = match plateaus.iter().find(|&&(a, _)| a == j) {
                Some(&(_, b)) => b,
                None => j + 1,
            };
        }
        let series = ZetaSeries::new(self.s.clone(), self.zeta.clone());
        let coarse = series
            .and_then(|s| s.subsample(&keep))
            .and_then(|s| s.essential_variation(0, s.len() - 1));
        let Ok(coarse) = coarse else { return 0.0 };
        let v0 = &self.v[0];
        let laws = self.laws();
        coarse
            .iter()
            .zip(v0)
            .zip(&self.v[last])
            .map(|((c, v0), v_end)| laws.f_value(v0 + c) - laws.f_value(*v_end))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub eps: f64,
    pub steps: usize,
    pub s_total: f64,
    pub plateau_measure: f64,
    pub instability_measure: f64,
    pub fatigue_gap_proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub delta: f64,
    pub p: f64,
    /// Sorted by decreasing viscosity.
    pub entries: Vec<SweepEntry>,
    /// `max S_ε / min S_ε`.
    pub s_ratio: f64,
    /// Whether the instability measure does not grow as ε decreases;
    /// absent for a single entry.
    pub instability_nonincreasing: Option<bool>,
}

fn comparable(p: &EvolutionProblem) -> EvolutionProblem {
    let mut q = p.clone();
    q.eps = 0.0;
    q.steps = 0;
    q
}

pub fn sweep_compare(rescaled: &[RescaledEvolution], delta: f64) -> Result<SweepReport, RescaleError> {
    let first = rescaled.first().ok_or(RescaleError::EmptyTrace)?;
    for r in rescaled {
        if comparable(&r.problem) != comparable(&first.problem) {
            return Err(RescaleError::Incompatible("entries differ beyond eps and steps".into()));
        }
        if r.p != first.p {
            return Err(RescaleError::Incompatible(format!(
                "norm exponents {} and {}",
                r.p, first.p
            )));
        }
    }
    let mut entries: Vec<SweepEntry> = rescaled
        .iter()
        .map(|r| SweepEntry {
            eps: r.problem.eps,
            steps: r.problem.steps,
            s_total: r.s_total,
            plateau_measure: r.plateau_measure(delta),
            instability_measure: r.instability_measure(delta),
            fatigue_gap_proxy: r.fatigue_gap_proxy(delta),
        })
        .collect();
    entries.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let s_max = entries.iter().map(|e| e.s_total).fold(f64::NEG_INFINITY, f64::max);
    let s_min = entries.iter().map(|e| e.s_total).fold(f64::INFINITY, f64::min);
    let instability_nonincreasing = (entries.len() >= 2).then(|| {
        entries
            .windows(2)
            .all(|w| w[1].instability_measure <= w[0].instability_measure)
    });
    Ok(SweepReport {
        delta,
        p: first.p,
        entries,
        s_ratio: s_max / s_min,
        instability_nonincreasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpProfile {
    pub s: Vec<f64>,
    /// Reparametrised time `ϱ`, starting at 0.
    pub rho: Vec<f64>,
    /// `α♯(ϱ_j) = α°(s_j)`.
    pub alpha_sharp: Vec<Vec<f64>>,
    /// Normalized residual of the transition equation per increment.
    pub residual: Vec<f64>,
    pub max_residual: f64,
}

impl JumpProfile {
    /// `α♯(ϱ)`, piecewise affine in `ϱ`.
    pub fn alpha_at(&self, rho: f64) -> Option<Vec<f64>> {
        let last = *self.rho.last()?;
        if !(0.0..=last).contains(&rho) {
            return None;
        }
        let j = self.rho.partition_point(|&r| r < rho);
        if j == 0 || self.rho[j] == rho {
            return Some(self.alpha_sharp[j].clone());
        }
        let theta = (rho - self.rho[j - 1]) / (self.rho[j] - self.rho[j - 1]);
        Some(
            self.alpha_sharp[j - 1]
                .iter()
                .zip(&self.alpha_sharp[j])
                .map(|(a, b)| a + theta * (b - a))
                .collect(),
        )
    }
}

/// Transition profile over samples `from..=to`, which must lie inside one
/// plateau with α moving on every increment and Ψ above [`PSI_FLOOR`].
///
/// `ϱ` integrates `‖α̇°‖/Ψ°` by the midpoint rule; the residual compares
/// `⟨G − F, α̇♯⟩` against `−‖α̇♯‖²`.
pub fn jump_profile(r: &RescaledEvolution, from: usize, to: usize) -> Result<JumpProfile, RescaleError> {
    if from >= to || to >= r.sample_count() {
        return Err(RescaleError::JumpProfile(format!("invalid sample range {from}..={to}")));
    }
    if !r.plateaus.iter().any(|&(a, b)| a <= from && to <= b) {
        return Err(RescaleError::JumpProfile(format!(
            "samples {from}..={to} are not inside a plateau"
        )));
    }
    if let Some(j) = (from..=to).find(|&j| r.psi[j] <= PSI_FLOOR) {
        return Err(RescaleError::JumpProfile(format!("Ψ = {:e} at sample {j}", r.psi[j])));
    }
    let mut rho = vec![0.0];
    let mut residual = Vec::with_capacity(to - from);
    for j in from + 1..=to {
        let da: Vec<f64> = r.alpha[j].iter().zip(&r.alpha[j - 1]).map(|(a, b)| a - b).collect();
        let norm = r.ops.lumped_norm(&da);
        if norm == 0.0 {
            return Err(RescaleError::JumpProfile(format!("α is constant on increment {j}")));
        }
        let psi_mid = 0.5 * (r.psi[j - 1] + r.psi[j]);
        let d_rho = norm / psi_mid;
        rho.push(rho.last().unwrap() + d_rho);
        let rate: Vec<f64> = da.iter().map(|x| x / d_rho).collect();
        let work: f64 = r.driving[j].iter().zip(&rate).map(|(g, x)| g * x).sum();
        let kinetic = r.ops.lumped_inner(&rate, &rate);
        residual.push((work + kinetic).abs() / (work.abs() + kinetic));
    }
    let max_residual = residual.iter().copied().fold(0.0, f64::max);
    Ok(JumpProfile {
        s: r.s[from..=to].to_vec(),
        rho,
        alpha_sharp: r.alpha[from..=to].to_vec(),
        residual,
        max_residual,
    })
}
