mod common;

use common::{QUADRATIC, SMOOTHSTEP};
use fatigue_damage::error::RescaleError;
use fatigue_damage::evolution::{run_evolution, EvolutionTrace, Schedule};
use fatigue_damage::rescaling::{arc_length_rescale, jump_profile, sweep_compare, DEFAULT_DELTA, DEFAULT_P};

fn resting(steps: usize) -> EvolutionTrace {
    let p = common::problem(4, QUADRATIC, Schedule::Constant { value: 0.0 }, 2.0, steps, 0.1);
    run_evolution(&p).unwrap()
}

#[test]
fn static_trace_keeps_physical_time() {
    let t = resting(10);
    let r = arc_length_rescale(&t, DEFAULT_P, DEFAULT_DELTA).unwrap();
    for (s, time) in r.s.iter().zip(&r.t) {
        assert!((s - time).abs() <= 1e-14);
    }
    assert!(r.plateaus.is_empty());
    assert_eq!(r.plateau_measure(DEFAULT_DELTA), 0.0);
}

#[test]
fn one_moving_step_adds_its_norms_to_the_length() {
    let mut t = resting(100);
    let ops = t.operators().unwrap();
    let bump: Vec<f64> = ops.mesh().nodes().iter().map(|p| p[0] * (1.0 - p[0]) * p[1]).collect();
    let a_scale = 0.4 / ops.h1_norm(&bump);
    let u_scale = 0.1 / ops.w1p_norm(&bump, DEFAULT_P);
    for i in 61..=100 {
        for (a, b) in t.alpha[i].iter_mut().zip(&bump) {
            *a -= a_scale * b;
        }
        for (u, b) in t.u[i].iter_mut().zip(&bump) {
            *u += u_scale * b;
        }
    }
    let r = arc_length_rescale(&t, DEFAULT_P, DEFAULT_DELTA).unwrap();
    assert!((r.s_total - 2.5).abs() <= 1e-12, "{}", r.s_total);
    assert_eq!(r.plateaus, vec![(60, 61)]);
    assert!((r.plateau_measure(DEFAULT_DELTA) - (0.02 + 0.5)).abs() <= 1e-12);
}

#[test]
fn rescaled_time_is_monotone_and_one_lipschitz() {
    let p = common::problem(6, QUADRATIC, Schedule::Ramp { rate: 1.0 }, 1.0, 60, 0.05);
    let r = arc_length_rescale(&run_evolution(&p).unwrap(), DEFAULT_P, DEFAULT_DELTA).unwrap();
    let grid: Vec<f64> = (0..=200).map(|j| r.s_total * j as f64 / 200.0).collect();
    let times: Vec<f64> = grid.iter().map(|&s| r.time_at(s).unwrap()).collect();
    for w in grid.windows(2).zip(times.windows(2)) {
        let (ds, dt) = (w.0[1] - w.0[0], w.1[1] - w.1[0]);
        assert!(dt >= 0.0 && dt <= ds * (1.0 + 1e-12));
    }
    assert!(r.time_at(r.s_total * 1.01).is_err());
    // the arc length between two samples dominates their direct distance
    let n = r.sample_count() - 1;
    for (j1, j2) in [(0, n), (3, 40), (10, 11)] {
        assert!(r.pair_increment(j1, j2) <= r.s[j2] - r.s[j1] + 1e-12);
    }
}

#[test]
fn invalid_requests_are_refused() {
    let t = resting(4);
    assert!(matches!(
        arc_length_rescale(&t, 1.5, DEFAULT_DELTA),
        Err(RescaleError::Exponent(_))
    ));
    let r = arc_length_rescale(&t, DEFAULT_P, DEFAULT_DELTA).unwrap();
    assert!(matches!(jump_profile(&r, 0, 2), Err(RescaleError::JumpProfile(_))));
    assert!(matches!(jump_profile(&r, 2, 2), Err(RescaleError::JumpProfile(_))));
    assert!(matches!(
        sweep_compare(&[], DEFAULT_DELTA),
        Err(RescaleError::EmptyTrace)
    ));
    let single = sweep_compare(std::slice::from_ref(&r), DEFAULT_DELTA).unwrap();
    assert_eq!(single.instability_nonincreasing, None);
    assert_eq!(single.s_ratio, 1.0);
    let other = common::problem(4, QUADRATIC, Schedule::Constant { value: 0.1 }, 2.0, 4, 0.1);
    let other = arc_length_rescale(&run_evolution(&other).unwrap(), DEFAULT_P, DEFAULT_DELTA).unwrap();
    assert!(matches!(
        sweep_compare(&[r, other], DEFAULT_DELTA),
        Err(RescaleError::Incompatible(_))
    ));
}

fn jump_residual(steps: usize) -> f64 {
    let mut p = common::problem(8, SMOOTHSTEP, Schedule::Ramp { rate: 1.5 }, 1.0, steps, 0.02);
    p.alpha0 = 0.9;
    let r = arc_length_rescale(&run_evolution(&p).unwrap(), DEFAULT_P, DEFAULT_DELTA).unwrap();
    let (a, b) = r.plateaus[0];
    jump_profile(&r, a + 1, b).unwrap().max_residual
}

#[test]
fn jump_transition_residual_shrinks_under_refinement() {
    let levels: Vec<f64> = [400, 800, 1600].into_iter().map(jump_residual).collect();
    assert!(levels.windows(2).all(|w| w[1] < w[0]), "{levels:?}");
    assert!(levels[2] <= 5e-2, "{levels:?}");
}

#[test]
fn fatigue_gap_proxy_is_nonnegative() {
    let p = common::problem(
        6,
        QUADRATIC,
        Schedule::Triangle {
            amplitude: 0.7,
            period: 1.0,
        },
        3.0,
        60,
        0.05,
    );
    let r = arc_length_rescale(&run_evolution(&p).unwrap(), DEFAULT_P, DEFAULT_DELTA).unwrap();
    assert!(r.fatigue_gap_proxy(DEFAULT_DELTA) >= 0.0);
}
