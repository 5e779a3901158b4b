use std::path::Path;

use fatigue_damage::diagnostics::{energy_balance_residual, BalanceReport};
use fatigue_damage::evolution::{run_evolution, EvolutionProblem, EvolutionTrace};
use fatigue_damage::oracle::{oracle_batch, OracleBatchReport};
use fatigue_damage::rescaling::{arc_length_rescale, sweep_compare, RescaledEvolution, SweepReport};
use fatigue_damage::variation::ZetaSeries;
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, VerifyConfig};
use crate::error::CliError;
use crate::output::{ensure_dir, vtk_snapshot, write_json, write_rescaled_csv, write_step_csv, write_text};

/// Nodewise tolerance of the oracle comparison.
pub const ORACLE_TOL: f64 = 1e-8;

/// Environment variable bounding the number of concurrent sweep runs.
pub const WORKERS_ENV: &str = "FATIGUE_WORKERS";

fn snapshot_steps(n: usize, every: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = if every == 0 {
        vec![0]
    } else {
        (0..=n).step_by(every).collect()
    };
    if steps.last() != Some(&n) {
        steps.push(n);
    }
    steps
}

fn write_manifest(dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    write_text(&dir.join("manifest.toml"), &cfg.to_toml())
}

pub struct SimulateOutput {
    pub trace: EvolutionTrace,
    pub balance: BalanceReport,
}

pub fn simulate(cfg: &RunConfig) -> Result<SimulateOutput, CliError> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    write_manifest(dir, cfg)?;
    let trace = run_evolution(&cfg.problem())?;
    let n = trace.step_count();
    info!("simulated {n} steps, min alpha {}", trace.min_alpha(n));
    write_step_csv(&dir.join("run.csv"), &trace)?;
    let snaps = dir.join("snapshots");
    ensure_dir(&snaps)?;
    let ops = trace.operators()?;
    for i in snapshot_steps(n, cfg.output.snapshot_every) {
        let text = vtk_snapshot(&trace, &ops, &trace.problem.laws, i);
        write_text(&snaps.join(format!("step_{i:06}.vtk")), &text)?;
    }
    let balance = energy_balance_residual(&trace, 0, n)?;
    write_json(&dir.join("balance.json"), &balance)?;
    Ok(SimulateOutput { trace, balance })
}

fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn sweep(cfg: &RunConfig) -> Result<SweepReport, CliError> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    write_manifest(dir, cfg)?;
    let problems: Vec<EvolutionProblem> = cfg.sweep.eps.iter().map(|&e| cfg.sweep_problem(e)).collect();
    let (p, delta) = (cfg.sweep.p, cfg.sweep.delta);
    let runs: Vec<Result<RescaledEvolution, CliError>> = worker_pool()?.install(|| {
        problems
            .par_iter()
            .map(|prob| {
                let trace = run_evolution(prob)?;
                write_step_csv(&dir.join(format!("run_eps_{}.csv", prob.eps)), &trace)?;
                let r = arc_length_rescale(&trace, p, delta)?;
                write_rescaled_csv(&dir.join(format!("rescaled_eps_{}.csv", prob.eps)), &r)?;
                info!("eps {}: {} steps, S = {}", prob.eps, prob.steps, r.s_total);
                Ok(r)
            })
            .collect()
    });
    let runs: Vec<RescaledEvolution> = runs.into_iter().collect::<Result<_, _>>()?;
    let report = sweep_compare(&runs, delta)?;
    write_json(&dir.join("sweep_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Gate {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub steps: usize,
    pub flagged_steps: Vec<usize>,
    pub gates: Vec<Gate>,
    pub balance: BalanceReport,
    pub passed: bool,
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

/// Invariant and diagnostic gates of one finished run.
pub fn gates(trace: &EvolutionTrace, tol: &VerifyConfig) -> Result<VerifyReport, CliError> {
    let n = trace.step_count();
    let recs = &trace.records;
    let mut gates = vec![
        Gate::at_most("solver_flags", trace.flagged_steps().len() as f64, 0.0),
        Gate::at_most(
            "eq_residual",
            max_of(recs.iter().map(|r| r.kkt.eq_residual)),
            tol.eq_residual,
        ),
        Gate::at_most(
            "psi_identity",
            max_of(
                recs.iter()
                    .filter(|r| r.lower_active_count == 0 && r.eps_alphadot_lumped > 0.0)
                    .map(|r| (r.eps_alphadot_lumped - r.psi).abs() / (r.eps_alphadot_lumped + r.psi + 1e-12)),
            ),
            tol.psi_identity,
        ),
    ];

    let mut increase: f64 = 0.0;
    let mut out_of_box: f64 = 0.0;
    let mut v_decrease: f64 = 0.0;
    for i in 0..=n {
        for &a in &trace.alpha[i] {
            out_of_box = out_of_box.max(-a).max(a - 1.0);
        }
        if i > 0 {
            for (a, b) in trace.alpha[i].iter().zip(&trace.alpha[i - 1]) {
                increase = increase.max(a - b);
            }
            for (a, b) in trace.v[i].iter().zip(&trace.v[i - 1]) {
                v_decrease = v_decrease.max(b - a);
            }
        }
    }
    gates.push(Gate::at_most("alpha_nonincreasing", increase, tol.bounds));
    gates.push(Gate::at_most("alpha_in_unit_interval", out_of_box, tol.bounds));
    gates.push(Gate::at_most("v_nondecreasing", v_decrease, 0.0));

    let var = ZetaSeries::from_trace(trace)
        .essential_variation(0, n)
        .expect("trace series is valid");
    let cumulation = max_of(
        trace.v[n]
            .iter()
            .zip(&trace.v[0])
            .zip(&var)
            .map(|((v, v0), w)| (v - v0 - w).abs() / (1.0 + v.abs())),
    );
    gates.push(Gate::at_most("cumulation_identity", cumulation, 1e-12));

    let r = arc_length_rescale(trace, 4.0, 0.1)?;
    let arc = max_of((1..r.sample_count()).map(|j| {
        let ds = r.s[j] - r.s[j - 1];
        (r.pair_increment(j - 1, j) - ds).abs() / ds
    }));
    gates.push(Gate::at_most("arc_length_increments", arc, 1e-10));

    let balance = energy_balance_residual(trace, 0, n)?;
    if let Some(limit) = tol.balance {
        let scale = balance.energy_start + balance.work_total;
        gates.push(Gate::at_most("energy_balance", balance.residual.abs() / scale, limit));
    }
    let passed = gates.iter().all(|g| g.passed);
    Ok(VerifyReport {
        steps: n,
        flagged_steps: trace.flagged_steps(),
        gates,
        balance,
        passed,
    })
}

pub fn verify(cfg: &RunConfig) -> Result<VerifyReport, CliError> {
    let dir = &cfg.output.dir;
    ensure_dir(dir)?;
    write_manifest(dir, cfg)?;
    let trace = run_evolution(&cfg.problem())?;
    write_step_csv(&dir.join("run.csv"), &trace)?;
    let report = gates(&trace, &cfg.verify)?;
    write_json(&dir.join("verify_report.json"), &report)?;
    Ok(report)
}

pub fn oracle_check(seed: u64, count: u64, out_dir: &Path) -> Result<OracleBatchReport, CliError> {
    ensure_dir(out_dir)?;
    let report = oracle_batch(seed, count, ORACLE_TOL, &Default::default())?;
    write_json(&out_dir.join("oracle_summary.json"), &report)?;
    Ok(report)
}
