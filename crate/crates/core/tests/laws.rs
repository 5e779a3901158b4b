use fatigue_damage::error::LawError;
use fatigue_damage::laws::{CouplingLaw, FatigueLaw, MaterialLaws, MuLaw, Zeta, ZetaVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn with(mu: MuLaw, f: FatigueLaw, g: CouplingLaw, zeta: ZetaVariant) -> MaterialLaws {
    MaterialLaws::new(mu, f, g, zeta).unwrap()
}

fn default_f() -> FatigueLaw {
    FatigueLaw::LinearClamped {
        f0: 1.0,
        k: 0.5,
        f_inf: 0.1,
    }
}

#[test]
fn smoothstep_values() {
    let l = with(
        MuLaw::Smoothstep { min: 1.0, max: 10.0 },
        default_f(),
        CouplingLaw::One,
        ZetaVariant::Vector,
    );
    assert_eq!(l.eval_mu(0.5), (5.5, 13.5));
    assert_eq!(l.eval_mu(-3.0), (1.0, 0.0));
    assert_eq!(l.eval_mu(1.0).0, l.eval_mu(2.0).0);
}

#[test]
fn mu_derivative_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    for mu in [
        MuLaw::Smoothstep { min: 0.05, max: 1.0 },
        MuLaw::Linear { min: 0.2, max: 3.0 },
        MuLaw::Quadratic { min: 0.05, max: 1.0 },
    ] {
        let l = with(mu, default_f(), CouplingLaw::One, ZetaVariant::Vector);
        let mut checked = 0;
        while checked < 50 {
            let a: f64 = rng.gen_range(-0.5..1.5);
            if a.abs() < 2.0 * h || (a - 1.0).abs() < 2.0 * h {
                continue;
            }
            let fd = (l.eval_mu(a + h).0 - l.eval_mu(a - h).0) / (2.0 * h);
            assert!((fd - l.eval_mu(a).1).abs() <= 1e-6, "{mu:?} at {a}");
            checked += 1;
        }
    }
}

#[test]
fn mu_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let l = MaterialLaws::default();
    for _ in 0..1000 {
        let (a, b): (f64, f64) = (rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0));
        let (lo, hi) = (a.min(b), a.max(b));
        assert!(l.eval_mu(hi).0 >= l.eval_mu(lo).0);
        assert!(l.eval_mu(a).1 >= 0.0);
    }
}

#[test]
fn fatigue_weight_values() {
    let l = with(
        MuLaw::Linear { min: 1.0, max: 2.0 },
        default_f(),
        CouplingLaw::One,
        ZetaVariant::Vector,
    );
    assert_eq!(l.eval_f(0.0).unwrap(), (1.0, -0.5));
    assert_eq!(l.eval_f(10.0).unwrap(), (0.1, 0.0));
    assert_eq!(l.eval_f(-1.0), Err(LawError::NegativeCumulation(-1.0)));
    assert_eq!(l.frozen().eval_f(10.0).unwrap().0, 1.0);
}

#[test]
fn exponential_weight_is_monotone_with_bounded_slope() {
    let l = with(
        MuLaw::Linear { min: 1.0, max: 2.0 },
        FatigueLaw::Exponential {
            f0: 1.0,
            f_inf: 0.1,
            k: 2.0,
        },
        CouplingLaw::One,
        ZetaVariant::Vector,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let (a, b): (f64, f64) = (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
        let (lo, hi) = (a.min(b), a.max(b));
        assert!(l.f_value(hi) <= l.f_value(lo));
    }
    let tail: Vec<f64> = [1.0, 5.0, 10.0, 30.0].iter().map(|&v| l.f_value(v)).collect();
    assert!(tail.windows(2).all(|w| w[1] <= w[0]));
    assert!((tail[3] - 0.1).abs() < 1e-12);
}

#[test]
fn reported_lipschitz_constants_bound_difference_quotients() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for f in [
        default_f(),
        FatigueLaw::Exponential {
            f0: 2.0,
            f_inf: 0.5,
            k: 3.0,
        },
    ] {
        let l = with(
            MuLaw::Linear { min: 1.0, max: 2.0 },
            f,
            CouplingLaw::One,
            ZetaVariant::Vector,
        );
        let lip = l.f_lipschitz();
        for _ in 0..1000 {
            let (a, b): (f64, f64) = (rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0));
            if a == b {
                continue;
            }
            let q = (l.f_value(a) - l.f_value(b)).abs() / (a - b).abs();
            assert!(q <= lip * (1.0 + 1e-12), "{q} > {lip}");
        }
    }
}

#[test]
fn zeta_variants() {
    let l = with(
        MuLaw::Linear { min: 1.0, max: 2.0 },
        default_f(),
        CouplingLaw::One,
        ZetaVariant::Vector,
    );
    assert_eq!(l.eval_g_zeta(0.3, [2.0, 0.0]), Zeta::Vector([2.0, 0.0]));
    assert_eq!(l.eval_g_zeta(0.3, [0.0, 0.0]), Zeta::Vector([0.0, 0.0]));
    let l = with(
        MuLaw::Smoothstep { min: 1.0, max: 10.0 },
        default_f(),
        CouplingLaw::EqualsMu,
        ZetaVariant::ScalarPower { theta: 2.0 },
    );
    let Zeta::Scalar(z) = l.eval_g_zeta(1.0, [1.0, 1.0]) else {
        panic!("scalar variant")
    };
    assert!((z - 20.0).abs() < 1e-12);
    assert_eq!(l.eval_g_zeta(0.5, [0.0, 0.0]), Zeta::Scalar(0.0));
}

#[test]
fn law_parameters_are_validated() {
    assert!(MaterialLaws::new(
        MuLaw::Smoothstep { min: 0.0, max: 1.0 },
        default_f(),
        CouplingLaw::One,
        ZetaVariant::Vector
    )
    .is_err());
    assert!(MaterialLaws::new(
        MuLaw::Smoothstep { min: 0.1, max: 1.0 },
        default_f(),
        CouplingLaw::One,
        ZetaVariant::ScalarPower { theta: 5.0 }
    )
    .is_err());
}
