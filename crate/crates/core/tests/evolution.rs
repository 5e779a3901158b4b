mod common;

use common::QUADRATIC;
use fatigue_damage::diagnostics::{
    energy_balance_residual, psi_from_driving, recast_balance, running_balance, stability_psi,
};
use fatigue_damage::evolution::{interpolate_trace, run_evolution, EvolutionTrace, Schedule};
use fatigue_damage::laws::FatigueLaw;
use fatigue_damage::variation::ZetaSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn damaging_run() -> &'static EvolutionTrace {
    static TRACE: OnceLock<EvolutionTrace> = OnceLock::new();
    TRACE.get_or_init(|| {
        let p = common::problem(
            8,
            QUADRATIC,
            Schedule::Triangle {
                amplitude: 0.6,
                period: 1.0,
            },
            4.0,
            80,
            0.1,
        );
        run_evolution(&p).unwrap()
    })
}

fn elastic_balance(steps: usize) -> f64 {
    let mut p = common::problem(6, QUADRATIC, Schedule::Ramp { rate: 1.0 }, 1.0, steps, 0.1);
    p.laws.f = FatigueLaw::LinearClamped {
        f0: 1e6,
        k: 0.0,
        f_inf: 1e6,
    };
    let trace = run_evolution(&p).unwrap();
    assert!(trace.alpha.iter().all(|a| a.iter().all(|&x| x == 1.0)));
    let b = energy_balance_residual(&trace, 0, steps).unwrap();
    assert_eq!(b.dissipated_total, 0.0);
    assert_eq!(b.viscous_total, 0.0);
    b.residual.abs() / b.work_total
}

#[test]
fn damaging_run_is_clean_and_damages() {
    let t = damaging_run();
    assert!(t.is_complete());
    assert!(t.flagged_steps().is_empty());
    assert!(t.min_alpha(t.step_count()) < 0.99);
    // damage is irreversible and cumulation never decreases
    for i in 1..=t.step_count() {
        assert!(t.alpha[i].iter().zip(&t.alpha[i - 1]).all(|(a, b)| a <= b));
        assert!(t.v[i].iter().zip(&t.v[i - 1]).all(|(a, b)| a >= b));
    }
}

#[test]
fn stored_cumulation_equals_variation_of_zeta() {
    let t = damaging_run();
    let series = ZetaSeries::from_trace(t);
    let var = series.essential_variation(0, t.step_count()).unwrap();
    for (v, (w, v0)) in t.v[t.step_count()].iter().zip(var.iter().zip(&t.v[0])) {
        assert!((v - (v0 + w)).abs() <= 1e-12 * (1.0 + v.abs()));
    }
}

#[test]
fn balance_terms_are_additive() {
    let t = damaging_run();
    let n = t.step_count();
    let whole = energy_balance_residual(t, 0, n).unwrap().residual;
    let m = n / 3;
    let split = energy_balance_residual(t, 0, m).unwrap().residual + energy_balance_residual(t, m, n).unwrap().residual;
    assert!((whole - split).abs() <= 1e-12 * (1.0 + whole.abs()));
    let running = running_balance(t);
    assert!((running[n - 1] - whole).abs() <= 1e-12 * (1.0 + whole.abs()));
    assert!(energy_balance_residual(t, 5, 5).is_err());
    assert!(energy_balance_residual(t, 0, n + 1).is_err());
}

#[test]
fn viscous_term_matches_its_recast_form() {
    let t = damaging_run();
    let n = t.step_count();
    if t.records.iter().any(|r| r.lower_active_count > 0) {
        return;
    }
    let a = energy_balance_residual(t, 0, n).unwrap();
    let b = recast_balance(t, 0, n).unwrap();
    assert!((a.viscous_total - b.viscous_total).abs() <= 1e-5 * (1e-12 + a.viscous_total));
}

#[test]
fn stability_functional_equals_viscous_rate() {
    for r in &damaging_run().records {
        if r.lower_active_count == 0 {
            assert!(
                (r.psi - r.eps_alphadot_lumped).abs() <= 1e-5 * (1.0 + r.psi),
                "step {}",
                r.step
            );
        }
        assert!(r.kkt.eq_residual <= 1e-6);
    }
}

#[test]
fn stability_functional_is_a_dual_norm() {
    let t = damaging_run();
    let ops = t.operators().unwrap();
    let laws = &t.problem.laws;
    let i = t.step_count() / 2;
    let grad_u = ops.element_gradients(&t.u[i]).unwrap();
    let d = fatigue_damage::diagnostics::driving_force(&t.alpha[i], &grad_u, &t.v[i], &ops, laws);
    let m = ops.lumped_mass();
    let psi = psi_from_driving(&d, m);
    assert_eq!(psi, stability_psi(&t.alpha[i], &t.u[i], &t.v[i], &ops, laws).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let eta: Vec<f64> = (0..d.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let pairing: f64 = d.iter().zip(&eta).map(|(a, b)| a * b).sum();
        assert!(pairing <= psi * ops.lumped_norm(&eta) * (1.0 + 1e-12) + 1e-14);
    }
    // the supremum is attained at the positive part
    let plus: Vec<f64> = d.iter().zip(m).map(|(a, mi)| (a / mi).max(0.0)).collect();
    let pairing: f64 = d.iter().zip(&plus).map(|(a, b)| a * b).sum();
    assert!((pairing - psi * ops.lumped_norm(&plus)).abs() <= 1e-12 * (1.0 + pairing.abs()));
}

#[test]
fn interpolants_agree_at_grid_times() {
    let t = damaging_run();
    let i = 17;
    let at = interpolate_trace(t, t.times[i]).unwrap();
    assert_eq!(at.upper.alpha, t.alpha[i]);
    assert_eq!(at.lower.alpha, t.alpha[i]);
    assert_eq!(at.affine.alpha, t.alpha[i]);
    let mid = interpolate_trace(t, 0.5 * (t.times[i] + t.times[i + 1])).unwrap();
    assert_eq!(mid.upper.alpha, t.alpha[i + 1]);
    assert_eq!(mid.lower.alpha, t.alpha[i]);
    for ((a, lo), hi) in mid.affine.alpha.iter().zip(&t.alpha[i]).zip(&t.alpha[i + 1]) {
        assert!((a - 0.5 * (lo + hi)).abs() <= 1e-15);
    }
    assert!(interpolate_trace(t, 4.5).is_err());
}

#[test]
fn elastic_balance_defect_converges_at_first_order() {
    let coarse = elastic_balance(20);
    let fine = elastic_balance(40);
    assert!(coarse > 0.0);
    let order = (coarse / fine).log2();
    assert!((order - 1.0).abs() < 0.1, "observed order {order}");
}
