use fatigue_damage::error::VariationError;
use fatigue_damage::laws::Zeta;
use fatigue_damage::variation::ZetaSeries;
use proptest::prelude::*;

fn series(vals: &[(f64, f64)]) -> ZetaSeries {
    let times = (0..vals.len()).map(|i| i as f64).collect();
    let values = vals
        .iter()
        .map(|&(a, b)| vec![Zeta::Vector([a, b]), Zeta::Scalar(a)])
        .collect();
    ZetaSeries::new(times, values).unwrap()
}

fn samples() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..30)
}

proptest! {
    #[test]
    fn variation_is_additive(vals in samples(), cut in 0.0f64..1.0) {
        let s = series(&vals);
        let last = s.len() - 1;
        let mid = ((cut * last as f64) as usize).min(last);
        let whole = s.essential_variation(0, last).unwrap();
        let a = s.essential_variation(0, mid).unwrap();
        let b = s.essential_variation(mid, last).unwrap();
        for k in 0..whole.len() {
            prop_assert!((whole[k] - a[k] - b[k]).abs() <= 1e-12 * (1.0 + whole[k]));
        }
    }

    #[test]
    fn dropping_samples_never_increases_variation(vals in samples(), mask in prop::collection::vec(any::<bool>(), 30)) {
        let s = series(&vals);
        let last = s.len() - 1;
        let keep: Vec<usize> = (0..=last).filter(|&j| j == 0 || j == last || mask[j]).collect();
        let fine = s.essential_variation(0, last).unwrap();
        let coarse = s.subsample(&keep).unwrap();
        let coarse = coarse.essential_variation(0, coarse.len() - 1).unwrap();
        for k in 0..fine.len() {
            prop_assert!(coarse[k] <= fine[k] + 1e-12);
        }
    }
}

#[test]
fn malformed_series_are_rejected() {
    let z = || vec![Zeta::Scalar(0.0)];
    assert_eq!(
        ZetaSeries::new(vec![0.0, 0.0], vec![z(), z()]),
        Err(VariationError::Times(1))
    );
    assert!(matches!(
        ZetaSeries::new(vec![0.0, 1.0], vec![z(), vec![]]),
        Err(VariationError::Shape { index: 1, .. })
    ));
    assert_eq!(
        ZetaSeries::new(vec![0.0, 1.0], vec![z(), vec![Zeta::Vector([0.0, 0.0])]]),
        Err(VariationError::Kind)
    );
    let s = ZetaSeries::new(vec![0.0, 1.0], vec![z(), z()]).unwrap();
    assert!(matches!(s.essential_variation(1, 2), Err(VariationError::Range { .. })));
}
