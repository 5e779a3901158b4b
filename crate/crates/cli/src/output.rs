//! File writers: per-step CSV, legacy-VTK snapshots, JSON reports and the
//! manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fatigue_damage::diagnostics::running_balance;
use fatigue_damage::evolution::EvolutionTrace;
use fatigue_damage::fe::FeOperators;
use fatigue_damage::laws::MaterialLaws;
use fatigue_damage::rescaling::RescaledEvolution;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Serialize)]
struct StepRow {
    step: usize,
    t: f64,
    #[serde(rename = "E_elastic")]
    e_elastic: f64,
    #[serde(rename = "E_gradient")]
    e_gradient: f64,
    diss_inc: f64,
    visc_inc: f64,
    work_inc: f64,
    balance_residual_running: f64,
    min_alpha: f64,
    #[serde(rename = "max_V")]
    max_v: f64,
    kkt_eq: f64,
    kkt_sign: f64,
    am_iters: usize,
    psi: f64,
    eps_alphadot_lumped: f64,
    lower_active_count: usize,
}

#[derive(Debug, Serialize)]
struct RescaledRow {
    s: f64,
    t: f64,
    min_alpha: f64,
    psi: f64,
    /// 1 when the increment ending at this sample is a plateau increment.
    plateau: u8,
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_step_csv(path: &Path, trace: &EvolutionTrace) -> Result<(), CliError> {
    let running = running_balance(trace);
    let rows = trace.records.iter().zip(running).map(|(r, bal)| {
        let i = r.step;
        StepRow {
            step: i,
            t: r.t,
            e_elastic: trace.energy[i].elastic,
            e_gradient: trace.energy[i].gradient,
            diss_inc: r.diss_inc,
            visc_inc: r.visc_inc,
            work_inc: r.work_inc,
            balance_residual_running: bal,
            min_alpha: trace.min_alpha(i),
            max_v: trace.max_v(i),
            kkt_eq: r.kkt.eq_residual,
            kkt_sign: r.kkt.max_sign_violation,
            am_iters: r.am_iterations,
            psi: r.psi,
            eps_alphadot_lumped: r.eps_alphadot_lumped,
            lower_active_count: r.lower_active_count,
        }
    });
    write_rows(path, rows)
}

pub fn write_rescaled_csv(path: &Path, r: &RescaledEvolution) -> Result<(), CliError> {
    let rows = (0..r.sample_count()).map(|j| RescaledRow {
        s: r.s[j],
        t: r.t[j],
        min_alpha: r.alpha[j].iter().copied().fold(f64::INFINITY, f64::min),
        psi: r.psi[j],
        plateau: u8::from(j > 0 && r.increments[j - 1].rate() <= r.delta),
    });
    write_rows(path, rows)
}

fn vtk_scalars(out: &mut String, name: &str, values: &[f64]) {
    let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in values {
        let _ = writeln!(out, "{v}");
    }
}

/// Legacy-VTK ASCII unstructured grid of one recorded state.
pub fn vtk_snapshot(trace: &EvolutionTrace, ops: &FeOperators, laws: &MaterialLaws, i: usize) -> String {
    let mesh = ops.mesh();
    let (nn, ne) = (mesh.node_count(), mesh.element_count());
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "step {} t {}", i, trace.times[i]);
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nn} double");
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {} {}", ne, 4 * ne);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "5");
    }

    let _ = writeln!(s, "POINT_DATA {nn}");
    vtk_scalars(&mut s, "alpha", &trace.alpha[i]);
    vtk_scalars(&mut s, "u", &trace.u[i]);

    let v = &trace.v[i];
    let f: Vec<f64> = v.iter().map(|&x| laws.f_value(x)).collect();
    let grads = ops.element_gradients(&trace.u[i]).expect("trace fields match the mesh");
    let g: Vec<f64> = grads.iter().map(|g| g[0].hypot(g[1])).collect();
    let _ = writeln!(s, "CELL_DATA {ne}");
    vtk_scalars(&mut s, "V", v);
    vtk_scalars(&mut s, "f_of_V", &f);
    vtk_scalars(&mut s, "grad_u_norm", &g);
    s
}
