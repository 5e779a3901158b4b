//! Time-discrete evolution on the uniform grid `t_i = i T / k`.
//!
//! A trace stores every grid state together with the per-step accounting
//! needed by the balance and stability checks. Traces serialize to JSON
//! with round-trip floats, which is also the checkpoint format: a trace
//! cut after step `i` and resumed reproduces the uninterrupted run bit for
//! bit.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{driving_force, kkt_residuals, psi_from_driving, KktReport};
use crate::energy::{dissipation_load, energy_parts, EnergyBreakdown};
use crate::error::{EvolutionError, FieldError};
use crate::fe::{build_fe_operators, FeOperators};
use crate::laws::{MaterialLaws, Zeta};
use crate::mesh::{build_structured_mesh, Rect, Side};
use crate::step::{alternate_minimize, solve_equilibrium, zeta_field, SolverConfig, StepFlags, StepInputs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
    pub dirichlet_sides: Vec<Side>,
}

impl MeshSpec {
    pub fn operators(&self) -> Result<FeOperators, EvolutionError> {
        let mesh = build_structured_mesh(self.nx, self.ny, self.domain, &self.dirichlet_sides)
            .map_err(|e| EvolutionError::Setup(e.to_string()))?;
        build_fe_operators(mesh).map_err(|e| EvolutionError::Setup(e.to_string()))
    }
}

/// Spatial factor `φ` of the boundary datum `w(t, x) = W(t) φ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoadProfile {
    /// `φ = x₁`.
    X1,
    /// `φ = x₁ (1 + skew x₂)`, harmonic, with a stress gradient along `x₂`.
    SkewedX1 { skew: f64 },
}

impl LoadProfile {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match *self {
            LoadProfile::X1 => p[0],
            LoadProfile::SkewedX1 { skew } => p[0] * (1.0 + skew * p[1]),
        }
    }
}

/// Time factor `W(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `W = rate · t`.
    Ramp {
        rate: f64,
    },
    /// Rises linearly from 0 to `amplitude` over half a period, then back.
    Triangle {
        amplitude: f64,
        period: f64,
    },
    /// `W = amplitude · sin²(π t / period)`: pulsating between 0 and `amplitude`.
    Sine {
        amplitude: f64,
        period: f64,
    },
    Constant {
        value: f64,
    },
}

impl Schedule {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Schedule::Ramp { rate } => rate * t,
            Schedule::Triangle { amplitude, period } => {
                let phase = t / period - (t / period).floor();
                amplitude * (1.0 - (2.0 * phase - 1.0).abs())
            }
            Schedule::Sine { amplitude, period } => {
                let s = (std::f64::consts::PI * t / period).sin();
                amplitude * s * s
            }
            Schedule::Constant { value } => value,
        }
    }

    fn validate(&self) -> Result<(), EvolutionError> {
        let ok = match *self {
            Schedule::Ramp { rate } => rate.is_finite(),
            Schedule::Triangle { amplitude, period } | Schedule::Sine { amplitude, period } => {
                amplitude.is_finite() && period > 0.0 && period.is_finite()
            }
            Schedule::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(EvolutionError::Setup(format!("invalid load schedule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadProgram {
    pub profile: LoadProfile,
    pub schedule: Schedule,
    pub t_final: f64,
}

/// Early termination, checked after each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StopRule {
    /// Stop at the first step that lowers α anywhere.
    FirstDamage,
    /// Stop once `min α` drops below `value`.
    MinAlphaBelow { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionProblem {
    pub mesh: MeshSpec,
    pub laws: MaterialLaws,
    pub load: LoadProgram,
    /// Number of time steps `k`.
    pub steps: usize,
    pub eps: f64,
    /// Uniform initial damage.
    pub alpha0: f64,
    /// Uniform initial cumulation.
    pub v0: f64,
    pub solver: SolverConfig,
    pub stop: Option<StopRule>,
}

impl EvolutionProblem {
    pub fn tau(&self) -> f64 {
        self.load.t_final / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.load.t_final / self.steps as f64
    }

    pub fn validate(&self) -> Result<(), EvolutionError> {
        self.laws.validate()?;
        self.load.schedule.validate()?;
        if self.steps == 0 {
            return Err(EvolutionError::Setup("at least one time step is required".into()));
        }
        if !(self.load.t_final > 0.0 && self.load.t_final.is_finite()) {
            return Err(EvolutionError::Setup(format!(
                "final time must be positive, got {}",
                self.load.t_final
            )));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(EvolutionError::Setup(format!(
                "viscosity must be positive, got {}",
                self.eps
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha0) {
            return Err(EvolutionError::Setup(format!(
                "initial damage {} outside [0, 1]",
                self.alpha0
            )));
        }
        if !(self.v0 >= 0.0 && self.v0.is_finite()) {
            return Err(EvolutionError::Setup(format!(
                "initial cumulation {} is negative",
                self.v0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// `W(t_i)`.
    pub load: f64,
    /// `R(α_i − α_{i−1}; V_{i−1})`.
    pub diss_inc: f64,
    /// `(ε/τ)‖α_i − α_{i−1}‖²`.
    pub visc_inc: f64,
    /// `⟨μ(α_i)∇u_i, ∇(w_i − w_{i−1})⟩`.
    pub work_inc: f64,
    pub kkt: KktReport,
    /// Ψ at `(α_i, u_i, V_{i−1})`.
    pub psi: f64,
    /// `ε‖(α_i − α_{i−1})/τ‖`, lumped.
    pub eps_alphadot_lumped: f64,
    pub lower_active_count: usize,
    pub am_iterations: usize,
    pub damage_iterations: usize,
    pub objective_decrease: f64,
    pub flags: StepFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub problem: EvolutionProblem,
    pub tau: f64,
    /// Nodal values of the load profile `φ`.
    pub profile: Vec<f64>,
    /// Grid times `t_0, …, t_n` of the recorded states.
    pub times: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<Zeta>>,
    pub energy: Vec<EnergyBreakdown>,
    /// `records[i − 1]` describes the step from `t_{i−1}` to `t_i`.
    pub records: Vec<StepRecord>,
    /// Set when a stop rule ended the run before `t_final`.
    pub stopped_early: bool,
}

impl EvolutionTrace {
    pub fn step_count(&self) -> usize {
        self.records.len()
    }

    pub fn is_complete(&self) -> bool {
        self.stopped_early || self.records.len() == self.problem.steps
    }

    pub fn operators(&self) -> Result<FeOperators, EvolutionError> {
        self.problem.mesh.operators()
    }

    pub fn flagged_steps(&self) -> Vec<usize> {
        self.records.iter().filter(|r| r.flags.any()).map(|r| r.step).collect()
    }

    pub fn min_alpha(&self, i: usize) -> f64 {
        self.alpha[i].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_v(&self, i: usize) -> f64 {
        self.v[i].iter().copied().fold(0.0, f64::max)
    }

    /// JSON checkpoint of the whole trace.
    pub fn to_checkpoint(&self) -> String {
        serde_json::to_string(self).expect("trace is serializable")
    }

    /// Read a checkpoint and check that it belongs to `problem`.
    pub fn from_checkpoint(json: &str, problem: &EvolutionProblem) -> Result<Self, EvolutionError> {
        let trace: EvolutionTrace =
            serde_json::from_str(json).map_err(|e| EvolutionError::Checkpoint(e.to_string()))?;
        if &trace.problem != problem {
            return Err(EvolutionError::Checkpoint("problem definition differs".into()));
        }
        let n = trace.records.len();
        let lens = [
            trace.times.len(),
            trace.alpha.len(),
            trace.u.len(),
            trace.v.len(),
            trace.zeta.len(),
            trace.energy.len(),
        ];
        if lens.iter().any(|&l| l != n + 1) || n > problem.steps {
            return Err(EvolutionError::Checkpoint("inconsistent array lengths".into()));
        }
        Ok(trace)
    }
}

/// Boundary work integrand `⟨μ(ᾱ)∇u, ∇φ⟩` on the current state.
fn stress_against(
    alpha: &[f64],
    grad_u: &[[f64; 2]],
    grad_phi: &[[f64; 2]],
    ops: &FeOperators,
    laws: &MaterialLaws,
) -> f64 {
    ops.element_averages(alpha)
        .iter()
        .zip(grad_u)
        .zip(grad_phi)
        .zip(ops.mesh().areas())
        .map(|(((&a, g), h), area)| area * laws.eval_mu(a).0 * (g[0] * h[0] + g[1] * h[1]))
        .sum()
}

fn datum(profile: &[f64], w: f64) -> Vec<f64> {
    profile.iter().map(|p| w * p).collect()
}

/// Initial state only: `α₀`, `u₀` in equilibrium with `w(0)`, `ζ₀ = g(α₀)∇u₀`.
pub fn start_evolution(problem: &EvolutionProblem) -> Result<EvolutionTrace, EvolutionError> {
    problem.validate()?;
    let ops = problem.mesh.operators()?;
    let tau = problem.tau();
    if tau > problem.eps {
        log::warn!(
            "time step {tau} exceeds the viscosity {}; the scheme is meant for tau << eps",
            problem.eps
        );
    }
    let laws = &problem.laws;
    let profile: Vec<f64> = ops
        .mesh()
        .nodes()
        .iter()
        .map(|&p| problem.load.profile.eval(p))
        .collect();
    let alpha0 = vec![problem.alpha0; ops.node_count()];
    let w0 = problem.load.schedule.eval(0.0);
    let u0 = solve_equilibrium(&alpha0, &datum(&profile, w0), &ops, laws, &problem.solver)?;
    let grad_u0 = ops.element_gradients(&u0)?;
    let zeta0 = zeta_field(&alpha0, &grad_u0, &ops, laws);
    let energy0 = energy_parts(&alpha0, &grad_u0, &ops, laws);
    Ok(EvolutionTrace {
        problem: problem.clone(),
        tau,
        profile,
        times: vec![0.0],
        alpha: vec![alpha0],
        u: vec![u0],
        v: vec![vec![problem.v0; ops.element_count()]],
        zeta: vec![zeta0],
        energy: vec![energy0],
        records: Vec::new(),
        stopped_early: false,
    })
}

/// Advance an unfinished trace by at most `max_steps` steps.
pub fn advance_evolution(trace: &mut EvolutionTrace, max_steps: usize) -> Result<(), EvolutionError> {
    let problem = trace.problem.clone();
    let ops = problem.mesh.operators()?;
    let laws = &problem.laws;
    let m = ops.lumped_mass();
    let grad_phi = ops.element_gradients(&trace.profile)?;
    let tau = trace.tau;
    let eps = problem.eps;

    for _ in 0..max_steps {
        if trace.is_complete() {
            break;
        }
        let i = trace.records.len() + 1;
        let t = problem.time(i);
        let w_prev = problem.load.schedule.eval(problem.time(i - 1));
        let w = problem.load.schedule.eval(t);
        let alpha_prev = trace.alpha[i - 1].clone();
        let v_prev = trace.v[i - 1].clone();
        let inputs = StepInputs {
            alpha_prev,
            v_prev,
            zeta_prev: trace.zeta[i - 1].clone(),
            w_bc: datum(&trace.profile, w),
            eps,
            tau,
        };
        let step = alternate_minimize(&inputs, &ops, laws, &problem.solver)?;
        if step.flags.any() {
            log::warn!("step {i}: solver flags {:?}", step.flags);
        }

        let delta: Vec<f64> = step.alpha.iter().zip(&inputs.alpha_prev).map(|(a, p)| a - p).collect();
        let load = dissipation_load(&inputs.v_prev, &ops, laws);
        let diss_inc: f64 = load.iter().zip(&delta).map(|(f, d)| f * -d).fold(0.0, |acc, x| acc + x);
        let visc_inc = eps / tau * ops.lumped_inner(&delta, &delta);
        let work_inc = (w - w_prev) * stress_against(&step.alpha, &step.grad_u, &grad_phi, &ops, laws);
        let kkt = kkt_residuals(
            &step.alpha,
            &step.grad_u,
            &inputs.alpha_prev,
            &inputs.v_prev,
            &ops,
            laws,
            eps,
            tau,
        )?;
        let driving = driving_force(&step.alpha, &step.grad_u, &inputs.v_prev, &ops, laws);
        let psi = psi_from_driving(&driving, m);
        let eps_alphadot_lumped = eps * ops.lumped_norm(&delta) / tau;
        let energy = energy_parts(&step.alpha, &step.grad_u, &ops, laws);

        let damaged = delta.iter().any(|&d| d < 0.0);
        trace.records.push(StepRecord {
            step: i,
            t,
            load: w,
            diss_inc,
            visc_inc,
            work_inc,
            kkt,
            psi,
            eps_alphadot_lumped,
            lower_active_count: step.lower_bound_active.len(),
            am_iterations: step.am_iterations,
            damage_iterations: step.damage_iterations,
            objective_decrease: step.objective_decrease,
            flags: step.flags,
        });
        trace.times.push(t);
        trace.alpha.push(step.alpha);
        trace.u.push(step.u);
        trace.v.push(step.v);
        trace.zeta.push(step.zeta);
        trace.energy.push(energy);

        let stop = match problem.stop {
            None => false,
            Some(StopRule::FirstDamage) => damaged,
            Some(StopRule::MinAlphaBelow { value }) => trace.min_alpha(i) < value,
        };
        if stop && i < problem.steps {
            trace.stopped_early = true;
        }
    }
    Ok(())
}

/// Run the whole evolution.
pub fn run_evolution(problem: &EvolutionProblem) -> Result<EvolutionTrace, EvolutionError> {
    let mut trace = start_evolution(problem)?;
    advance_evolution(&mut trace, problem.steps)?;
    Ok(trace)
}

/// Continue a checkpointed trace to the end of its run.
pub fn resume_evolution(mut trace: EvolutionTrace) -> Result<EvolutionTrace, EvolutionError> {
    let remaining = trace.problem.steps - trace.records.len();
    advance_evolution(&mut trace, remaining)?;
    Ok(trace)
}

/// Load value at the first damaging step of a monotone ramp, bracketed
/// by the previous grid value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsetEstimate {
    pub step: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Run `problem` (expected to carry a ramp schedule) until α first drops.
pub fn ramp_onset(problem: &EvolutionProblem) -> Result<Option<OnsetEstimate>, EvolutionError> {
    let mut p = problem.clone();
    p.stop = Some(StopRule::FirstDamage);
    let trace = run_evolution(&p)?;
    for r in &trace.records {
        let i = r.step;
        if trace.alpha[i].iter().zip(&trace.alpha[i - 1]).any(|(a, b)| a < b) {
            return Ok(Some(OnsetEstimate {
                step: i,
                lower: p.load.schedule.eval(p.time(i - 1)),
                upper: r.load,
            }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub alpha: Vec<f64>,
    pub u: Vec<f64>,
    pub zeta: Vec<Zeta>,
    pub v: Vec<f64>,
}

/// Upper and lower piecewise-constant and piecewise-affine interpolants at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpolants {
    pub upper: Snapshot,
    pub lower: Snapshot,
    pub affine: Snapshot,
}

fn grid_snapshot(trace: &EvolutionTrace, i: usize) -> Snapshot {
    Snapshot {
        alpha: trace.alpha[i].clone(),
        u: trace.u[i].clone(),
        zeta: trace.zeta[i].clone(),
        v: trace.v[i].clone(),
    }
}

fn lerp(a: &[f64], b: &[f64], theta: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + theta * (y - x)).collect()
}

pub fn interpolate_trace(trace: &EvolutionTrace, t: f64) -> Result<Interpolants, EvolutionError> {
    let n = trace.step_count();
    let t_end = trace.times[n];
    if !(0.0..=t_end).contains(&t) {
        return Err(EvolutionError::TimeOutOfRange { t, t_final: t_end });
    }
    if let Some(i) = trace.times.iter().position(|&ti| ti == t) {
        let s = grid_snapshot(trace, i);
        return Ok(Interpolants {
            upper: s.clone(),
            lower: s.clone(),
            affine: s,
        });
    }
    // first grid time strictly above t
    let i = trace.times.partition_point(|&ti| ti < t);
    let theta = (t - trace.times[i - 1]) / (trace.times[i] - trace.times[i - 1]);
    let lower = grid_snapshot(trace, i - 1);
    let upper = grid_snapshot(trace, i);
    let zeta = lower
        .zeta
        .iter()
        .zip(&upper.zeta)
        .map(|(a, b)| a.lerp(b, theta).ok_or(FieldError::ZetaKind))
        .collect::<Result<Vec<_>, _>>()?;
    // V_lower + θ |ζ_i − ζ_{i−1}|
    let v = lower
        .zeta
        .iter()
        .zip(&upper.zeta)
        .zip(&lower.v)
        .map(|((a, b), &v)| a.distance(b).map(|d| v + theta * d).ok_or(FieldError::ZetaKind))
        .collect::<Result<Vec<_>, _>>()?;
    let affine = Snapshot {
        alpha: lerp(&lower.alpha, &upper.alpha, theta),
        u: lerp(&lower.u, &upper.u, theta),
        zeta,
        v,
    };
    Ok(Interpolants { upper, lower, affine })
}
