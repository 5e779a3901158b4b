#![allow(dead_code)]

use fatigue_damage::evolution::{EvolutionProblem, LoadProfile, LoadProgram, MeshSpec, Schedule};
use fatigue_damage::fe::{build_fe_operators, FeOperators};
use fatigue_damage::laws::{CouplingLaw, FatigueLaw, MaterialLaws, MuLaw, ZetaVariant};
use fatigue_damage::mesh::{build_structured_mesh, Rect, Side};
use fatigue_damage::step::SolverConfig;

pub fn ops(nx: usize, ny: usize, sides: &[Side]) -> FeOperators {
    build_fe_operators(build_structured_mesh(nx, ny, Rect::UNIT, sides).unwrap()).unwrap()
}

pub fn laws(mu: MuLaw) -> MaterialLaws {
    MaterialLaws::new(
        mu,
        FatigueLaw::LinearClamped {
            f0: 1.0,
            k: 0.05,
            f_inf: 0.1,
        },
        CouplingLaw::One,
        ZetaVariant::Vector,
    )
    .unwrap()
}

pub fn problem(n: usize, mu: MuLaw, schedule: Schedule, t_final: f64, steps: usize, eps: f64) -> EvolutionProblem {
    EvolutionProblem {
        mesh: MeshSpec {
            nx: n,
            ny: n,
            domain: Rect::UNIT,
            dirichlet_sides: vec![Side::Left, Side::Right],
        },
        laws: laws(mu),
        load: LoadProgram {
            profile: LoadProfile::SkewedX1 { skew: 0.5 },
            schedule,
            t_final,
        },
        steps,
        eps,
        alpha0: 1.0,
        v0: 0.0,
        solver: SolverConfig::default(),
        stop: None,
    }
}

pub const QUADRATIC: MuLaw = MuLaw::Quadratic { min: 0.05, max: 1.0 };
pub const SMOOTHSTEP: MuLaw = MuLaw::Smoothstep { min: 0.05, max: 1.0 };

/// Independent dense P1 evaluation of the stored energy, written from the
/// element formulas without the sparse operators.
pub fn dense_energy(nodes: &[[f64; 2]], tris: &[[usize; 3]], alpha: &[f64], u: &[f64], mu: impl Fn(f64) -> f64) -> f64 {
    let mut e = 0.0;
    for t in tris {
        let [a, b, c] = t.map(|i| nodes[i]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let area = 0.5 * det.abs();
        // gradient of the affine interpolant from the 2x2 system
        let grad = |f: &[f64]| {
            let (df1, df2) = (f[t[1]] - f[t[0]], f[t[2]] - f[t[0]]);
            let gx = (df1 * (c[1] - a[1]) - df2 * (b[1] - a[1])) / det;
            let gy = (df2 * (b[0] - a[0]) - df1 * (c[0] - a[0])) / det;
            gx * gx + gy * gy
        };
        let abar = (alpha[t[0]] + alpha[t[1]] + alpha[t[2]]) / 3.0;
        e += 0.5 * area * mu(abar) * grad(u) + 0.5 * area * grad(alpha);
    }
    e
}
