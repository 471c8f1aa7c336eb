use proptest::prelude::*;

use tmv::decompose::{decompose_thetas, quantile, DecomposeConfig};
use tmv::fitting::{normalize_identifiability, CurveFit, FitResult, SampledCurve};
use tmv::frechet::{frechet_fn, frechet_mean_1d};
use tmv::geometry::{arcdist, arcdist_polyline, ArcConfig};
use tmv::metrics::{d1, d2, dist_separable, dv, Chart, MetricConfig, SeparabilityDecl};
use tmv::model::{ModeSpec, Model, PolynomialTemplate, SamplingGrid, Theta};
use tmv::workbench::io::{read_curves, write_curves};

fn template() -> PolynomialTemplate {
    PolynomialTemplate::new(vec![1.0, 0.3, -0.6, -0.05, 0.04]).unwrap()
}

fn grid() -> SamplingGrid {
    SamplingGrid::new(vec![-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]).unwrap()
}

fn model(modes: Vec<ModeSpec>) -> Model {
    Model::new(modes, template(), grid()).unwrap()
}

fn wm() -> impl Strategy<Value = Vec<f64>> {
    (0.7..1.4f64, -0.8..0.8f64).prop_map(|(w, m)| vec![w, m])
}

fn mh() -> impl Strategy<Value = Vec<f64>> {
    (-0.8..0.8f64, -0.5..0.5f64).prop_map(|(m, h)| vec![m, h])
}

fn wmh() -> impl Strategy<Value = Vec<f64>> {
    (0.7..1.4f64, -0.8..0.8f64, -0.5..0.5f64).prop_map(|(w, m, h)| vec![w, m, h])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn velocity_matches_finite_differences(theta in wmh(), k in 0usize..3) {
        let model = model(ModeSpec::shape_invariant());
        let v = model.velocity(&theta, k).unwrap();
        let step = 1e-6;
        let plus = model.eval(&theta.iter().enumerate().map(|(j, x)| if j == k { x + step } else { *x }).collect::<Vec<_>>()).unwrap();
        let minus = model.eval(&theta.iter().enumerate().map(|(j, x)| if j == k { x - step } else { *x }).collect::<Vec<_>>()).unwrap();
        for ((a, p), m) in v.iter().zip(&plus).zip(&minus) {
            prop_assert!((a - (p - m) / (2.0 * step)).abs() <= 1e-6 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn arcdist_is_additive_along_a_mode(a in -1.0..1.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64) {
        let model = model(ModeSpec::shape_invariant());
        let mut xs = [a, b, c];
        xs.sort_by(f64::total_cmp);
        let fixed = [1.1, 0.1, 0.2];
        let arc = ArcConfig::default();
        let whole = arcdist(&model, 1, xs[0], xs[2], &fixed, &arc).unwrap();
        let parts = arcdist(&model, 1, xs[0], xs[1], &fixed, &arc).unwrap() + arcdist(&model, 1, xs[1], xs[2], &fixed, &arc).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-8 * (1.0 + whole));
        prop_assert_eq!(whole, arcdist(&model, 1, xs[2], xs[0], &fixed, &arc).unwrap());
    }

    #[test]
    fn polyline_refinement_increases_towards_quadrature(a in 0.6..1.0f64, b in 1.0..1.5f64) {
        let model = model(ModeSpec::shape_invariant());
        let fixed = [1.0, 0.0, 0.0];
        let quad = arcdist(&model, 0, a, b, &fixed, &ArcConfig::default()).unwrap();
        let coarse = arcdist_polyline(&model, 0, a, b, &fixed, 50).unwrap();
        let fine = arcdist_polyline(&model, 0, a, b, &fixed, 100).unwrap();
        prop_assert!(coarse <= fine * (1.0 + 1e-14));
        prop_assert!(fine <= quad * (1.0 + 1e-9));
    }

    #[test]
    fn blended_metric_obeys_the_triangle_inequality(x in wm(), y in wm(), z in wm(), o in wm(), gamma in 0.0..=1.0f64) {
        let model = model(vec![ModeSpec::GeneralistSpecialist, ModeSpec::HorizontalShift]);
        let cfg = MetricConfig::new(Theta::new(o), gamma);
        let d = |a: &[f64], b: &[f64]| dv(&model, a, b, &cfg).unwrap();
        prop_assert!(d(&x, &z) <= (d(&x, &y) + d(&y, &z)) * (1.0 + 1e-9));
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        let (a, b) = (d1(&model, &x, &y, &cfg).unwrap(), d2(&model, &x, &y, &cfg).unwrap());
        prop_assert!((d(&x, &y).powi(2) - (gamma * a * a + (1.0 - gamma) * b * b)).abs() <= 1e-12 * (1.0 + a * a + b * b));
    }

    #[test]
    fn separable_charts_agree_for_any_origin(x in mh(), y in mh(), o in mh()) {
        let model = model(vec![ModeSpec::HorizontalShift, ModeSpec::VerticalShift]);
        let cfg = MetricConfig::new(Theta::new(o), 0.3);
        let sep = dist_separable(&model, &x, &y, &SeparabilityDecl::singletons(2), &ArcConfig::default()).unwrap();
        prop_assert!((d1(&model, &x, &y, &cfg).unwrap() - sep).abs() <= 1e-8);
        prop_assert!((d2(&model, &x, &y, &cfg).unwrap() - sep).abs() <= 1e-8);
    }

    #[test]
    fn one_mode_mean_minimizes_the_frechet_function(sample in prop::collection::vec(0.6..1.6f64, 2..12)) {
        let model = model(vec![ModeSpec::GeneralistSpecialist]);
        let thetas: Vec<Theta> = sample.iter().map(|&w| Theta::new(vec![w])).collect();
        let cfg = MetricConfig::new(Theta::new(vec![1.0]), 0.5);
        let mean = frechet_mean_1d(&model, &thetas, 0, &cfg).unwrap();
        let decl = SeparabilityDecl::singletons(1);
        let chart = Chart::new(&model, &decl, &cfg).unwrap();
        let at_mean = frechet_fn(&chart, &thetas, mean.mean_theta.as_slice()).unwrap();
        for t in &thetas {
            prop_assert!(at_mean <= frechet_fn(&chart, &thetas, t.as_slice()).unwrap() * (1.0 + 1e-9));
        }
        prop_assert!((mean.attained_value - at_mean).abs() <= 1e-8 * (1.0 + at_mean));
    }

    #[test]
    fn shares_are_additive_and_bounded(thetas in prop::collection::vec(wmh(), 2..10), sse in 0.0..5.0f64) {
        let model = model(ModeSpec::shape_invariant());
        let thetas: Vec<Theta> = thetas.into_iter().map(Theta::new).collect();
        let d = decompose_thetas(&model, &thetas, sse, &DecomposeConfig::default()).unwrap();
        let parts: f64 = d.ssm_per_mode.values().sum();
        prop_assert!((parts - d.ssm_total).abs() <= 1e-10 * d.ssm_total.max(1e-300));
        prop_assert!(d.rss_per_mode.values().all(|&r| (0.0..=100.0).contains(&r)));
        prop_assert!(d.rss_total <= 100.0 + 1e-12);
    }

    #[test]
    fn normalization_keeps_curves(thetas in prop::collection::vec(wmh(), 1..8), weights in prop::collection::vec(0.2..3.0f64, 8)) {
        let model = model(ModeSpec::shape_invariant());
        let curves: Vec<CurveFit> = thetas
            .iter()
            .zip(&weights)
            .enumerate()
            .map(|(i, (t, &weight))| CurveFit {
                id: format!("c{i}"),
                weight,
                theta: Theta::new(t.clone()),
                fitted: model.eval(t).unwrap(),
                sse: 0.0,
                n_minima: 1,
            })
            .collect();
        let fit = FitResult { model, curves, iterations: 0, converged: true, sse_trace: vec![] };
        let normalized = normalize_identifiability(fit.clone());
        for (a, b) in fit.curves.iter().zip(&normalized.curves) {
            for (x, y) in a.fitted.iter().zip(&b.fitted) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
        let again = normalize_identifiability(normalized.clone());
        for (a, b) in again.curves.iter().zip(&normalized.curves) {
            for (x, y) in a.theta.iter().zip(b.theta.iter()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn quantiles_are_monotone_and_bracketed(mut values in prop::collection::vec(-100.0..100.0f64, 1..40), p in 0.0..=1.0f64, q in 0.0..=1.0f64) {
        values.sort_by(f64::total_cmp);
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(quantile(&values, lo) <= quantile(&values, hi));
        prop_assert!(values[0] <= quantile(&values, lo) && quantile(&values, hi) <= values[values.len() - 1]);
    }

    #[test]
    fn csv_round_trip_is_exact(rows in prop::collection::vec(prop::collection::vec(-1e6..1e6f64, 6), 1..6), weight in 0.1..10.0f64) {
        let curves: Vec<SampledCurve> = rows
            .into_iter()
            .enumerate()
            .map(|(i, z)| SampledCurve::new(format!("curve-{i}"), z, weight).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_curves(&mut buf, &grid(), &curves).unwrap();
        let (g, back) = read_curves(buf.as_slice()).unwrap();
        prop_assert_eq!(g, grid());
        prop_assert_eq!(back, curves);
    }
}
