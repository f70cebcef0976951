use critlab_core::criteria::{
    classify_model, classify_multivariate, classify_univariate, in_recurrence_region, in_transience_region, ray_grid,
    CriterionConfig, Side, Verdict,
};
use critlab_core::spectral::{perron_frobenius, NonNegativeMatrix, TOL_EIG};
use critlab_core::{BisexualModel, MultitypeModel, OffspringFamily, SpectralData};
use proptest::prelude::*;

fn half() -> SpectralData {
    let m = NonNegativeMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    perron_frobenius(&m, TOL_EIG).unwrap()
}

fn cfg(eps: f64) -> CriterionConfig {
    CriterionConfig { epsilon: eps, ..CriterionConfig::default() }
}

/// A two-piece power law `c₁x^p₁` below `knee`, `c₂x^p₂` above.
#[derive(Debug, Clone, Copy)]
struct Piecewise {
    c1: f64,
    p1: f64,
    c2: f64,
    p2: f64,
    knee: f64,
}

impl Piecewise {
    fn eval(&self, x: f64) -> f64 {
        if x < self.knee {
            self.c1 * x.powf(self.p1)
        } else {
            self.c2 * x.powf(self.p2)
        }
    }
}

fn piecewise(coeff: std::ops::Range<f64>, exp: std::ops::Range<f64>) -> impl Strategy<Value = Piecewise> {
    (coeff.clone(), exp.clone(), coeff, exp, 10.0f64..1e6)
        .prop_map(|(c1, p1, c2, p2, knee)| Piecewise { c1, p1, c2, p2, knee })
}

/// Drift-variance pairs spread across all three verdicts: `x·g` and `σ²`
/// share the scale `x^{1..2}` but their constants and exponents vary.
fn instance() -> impl Strategy<Value = (Piecewise, Piecewise)> {
    (piecewise(0.0..2.0, -0.5..0.5), piecewise(0.01..3.0, 0.5..2.2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn multivariate_reduces_to_univariate((g, s2) in instance(), eps in 1e-3f64..0.3) {
        let c = cfg(eps);
        let uni = classify_univariate(|x| g.eval(x), |x| s2.eval(x), &c).unwrap();
        let multi = classify_multivariate(
            |x| vec![g.eval(x[0])],
            |x| s2.eval(x[0]),
            &SpectralData::univariate(),
            &c,
        )
        .unwrap();
        prop_assert_eq!(uni.verdict, multi.verdict);
        prop_assert_eq!(uni.witness_epsilon, multi.witness_epsilon);
        prop_assert_eq!(uni.grid_size, multi.grid_size);
    }

    #[test]
    fn verdicts_are_scale_free((g, s2) in instance(), k in 1e-3f64..1e3) {
        let c = cfg(1e-3);
        let base = classify_univariate(|x| g.eval(x), |x| s2.eval(x), &c).unwrap();
        let scaled = classify_univariate(|x| k * g.eval(x), |x| k * s2.eval(x), &c).unwrap();
        prop_assert_eq!(base.verdict, scaled.verdict);

        // On the ray x̌ = 0, so region membership does not depend on the scale either.
        let s = half();
        let on_ray = CriterionConfig { offsets: vec![0.0], ..c };
        let gv = |x: &[f64]| s.right().iter().map(|r| g.eval(s.ell_dot(x)) * r + 1e-9).collect::<Vec<_>>();
        let base = classify_multivariate(gv, |x| s2.eval(s.ell_dot(x)), &s, &on_ray).unwrap();
        let scaled = classify_multivariate(
            |x| gv(x).iter().map(|v| k * v).collect(),
            |x| k * s2.eval(s.ell_dot(x)),
            &s,
            &on_ray,
        )
        .unwrap();
        prop_assert_eq!(base.verdict, scaled.verdict);
    }

    #[test]
    fn witness_is_monotone((g, s2) in instance(), frac in 0.0f64..1.0) {
        let v = classify_univariate(|x| g.eval(x), |x| s2.eval(x), &cfg(1e-3)).unwrap();
        if let Some(w) = v.witness_epsilon {
            let smaller = (frac * w).max(1e-9);
            let again = classify_univariate(|x| g.eval(x), |x| s2.eval(x), &cfg(smaller)).unwrap();
            prop_assert_eq!(again.verdict, v.verdict);
        }
    }

    #[test]
    fn regions_grow_with_a(
        x in prop::collection::vec(0.0f64..1e4, 2),
        g in prop::collection::vec(0.0f64..10.0, 2),
        s2 in 0.0f64..1e4,
        a1 in 1e-3f64..10.0,
        grow in 1.0f64..100.0,
    ) {
        let s = half();
        let a2 = a1 * grow;
        if in_recurrence_region(&x, &g, &s, a1).unwrap() {
            prop_assert!(in_recurrence_region(&x, &g, &s, a2).unwrap());
        }
        if in_transience_region(&x, s2, &s, a1).unwrap() {
            prop_assert!(in_transience_region(&x, s2, &s, a2).unwrap());
        }
    }
}

#[test]
fn violations_lie_inside_their_regions() {
    let s = half();
    // 2·ℓx·ℓg = σ² everywhere, so both inequalities fail wherever they apply.
    let g = |_: &[f64]| vec![0.5, 0.5];
    let sigma2 = |x: &[f64]| s.ell_dot(x);
    let c = CriterionConfig::default();
    let v = classify_multivariate(g, sigma2, &s, &c).unwrap();
    assert_eq!(v.verdict, Verdict::Indeterminate);
    assert!(v.witness_epsilon.is_none());

    let grid = ray_grid(&s, &c.magnitudes(), &c.offsets, c.region_b);
    assert_eq!(grid.len(), v.grid_size);
    let outside_rec = grid.iter().filter(|x| !in_recurrence_region(x, &g(x), &s, c.region_a).unwrap()).count();
    let outside_tr = grid.iter().filter(|x| !in_transience_region(x, sigma2(x), &s, c.region_a).unwrap()).count();
    assert!(outside_rec > 0 && outside_tr > 0);

    for viol in &v.violations {
        let inside = match viol.side {
            Side::Recurrence => in_recurrence_region(&viol.state, &g(&viol.state), &s, c.region_a).unwrap(),
            Side::Transience => in_transience_region(&viol.state, sigma2(&viol.state), &s, c.region_a).unwrap(),
        };
        assert!(inside, "{viol:?}");
    }
    let rec = v.violations.iter().filter(|x| x.side == Side::Recurrence).count();
    let tr = v.violations.len() - rec;
    assert_eq!(rec, grid.len() - outside_rec);
    assert_eq!(tr, grid.len() - outside_tr);
}

#[test]
fn multitype_verdicts_across_the_boundary() {
    let c = CriterionConfig::default();
    for (beta, expected) in [(0.1, Verdict::Recurrent), (0.2, Verdict::Recurrent), (0.3, Verdict::Transient), (0.5, Verdict::Transient)] {
        let model = MultitypeModel::new(half(), beta, 1.0).unwrap();
        let v = classify_model(&model, &c, 2_000, 3).unwrap();
        assert_eq!(v.verdict, expected, "beta={beta}: {v:?}");
        assert!(v.audits.near_criticality.pass);
        assert!(v.audits.sigma_positive && v.audits.sigma_growth);
        assert!(v.audits.moment.as_ref().unwrap().pass);
    }
}

#[test]
fn bisexual_verdicts_across_the_boundary() {
    let c = CriterionConfig::default();
    for (beta, expected) in [(0.0, Verdict::Recurrent), (0.2, Verdict::Recurrent), (0.9, Verdict::Transient), (1.2, Verdict::Transient)] {
        let model = BisexualModel::new(1, beta, OffspringFamily::Equidispersed).unwrap();
        let v = classify_model(&model, &c, 2_000, 5).unwrap();
        assert_eq!(v.verdict, expected, "beta={beta}: {:?}", v.violations.first());
        assert!(v.audits.moment.as_ref().unwrap().pass);
    }
}

#[test]
fn random_instances_cover_every_verdict() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;
    let mut runner = TestRunner::deterministic();
    let mut seen = [0usize; 3];
    for _ in 0..200 {
        let (g, s2) = instance().new_tree(&mut runner).unwrap().current();
        let v = classify_univariate(|x| g.eval(x), |x| s2.eval(x), &cfg(1e-3)).unwrap();
        seen[v.verdict as usize] += 1;
    }
    assert!(seen.iter().all(|n| *n >= 10), "{seen:?}");
}
