use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use tmv::decompose::{decompose, DecomposeConfig};
use tmv::fitting::{fit_all, neighbor_seed, project_curve, CurveFit, FitConfig, FitResult, SampledCurve};
use tmv::frechet::{frechet_fn, frechet_mean, SearchConfig};
use tmv::metrics::{Chart, MetricConfig, SeparabilityDecl};
use tmv::model::{CustomWarp, ModeSpec, Model, PolynomialTemplate, SamplingGrid, ScaledShiftWarp, Theta};
use tmv::optim::LevenbergMarquardt;
use tmv::workbench::report::{decomposition_json, warp_diagnostics};
use tmv::workbench::simulate::{simulate, Law, SyntheticSpec};

fn spec(modes: &[&str], laws: Vec<Law>, noise_fraction: f64) -> SyntheticSpec {
    SyntheticSpec {
        modes: modes.iter().map(|m| m.to_string()).collect(),
        laws,
        noise_fraction,
        ..SyntheticSpec::default()
    }
}

#[test]
fn pair_mean_beats_every_audit_grid_vertex() {
    let study = simulate(
        &SyntheticSpec {
            n: 20,
            ..spec(&["gen_spec", "horizontal"], vec![Law::Uniform { lo: 0.7, hi: 1.3 }, Law::Normal { mean: 0.0, sd: 0.4 }], 0.0)
        },
        &DecomposeConfig::default(),
    )
    .unwrap();
    let decl = SeparabilityDecl::new(vec![vec![0, 1]], 2).unwrap();
    let cfg = MetricConfig::new(Theta::new(vec![1.0, 0.0]), 0.5);
    let chart = Chart::new(&study.truth, &decl, &cfg).unwrap();
    let mean = frechet_mean(&chart, &study.thetas, &SearchConfig::default()).unwrap();
    let at_mean = frechet_fn(&chart, &study.thetas, mean.mean_theta.as_slice()).unwrap();

    let (w_lo, w_hi) = bounds(&study.thetas, 0);
    let (m_lo, m_hi) = bounds(&study.thetas, 1);
    for i in 0..50 {
        for j in 0..50 {
            let w = w_lo + (w_hi - w_lo) * i as f64 / 49.0;
            let m = m_lo + (m_hi - m_lo) * j as f64 / 49.0;
            let v = frechet_fn(&chart, &study.thetas, &[w, m]).unwrap();
            assert!(at_mean <= v * (1.0 + 1e-12), "grid ({w}, {m}) gives {v} < {at_mean}");
        }
    }
    assert!(mean.diagnostics.unique);
}

fn bounds(thetas: &[Theta], k: usize) -> (f64, f64) {
    thetas
        .iter()
        .map(|t| t[k])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

/// Even double-well template on a symmetric grid. The symmetric curve has
/// two equally good horizontal shifts near ±0.35.
fn double_well() -> (Model, Vec<f64>) {
    let grid: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64).collect();
    let model = Model::new(
        vec![ModeSpec::HorizontalShift],
        PolynomialTemplate::new(vec![0.0, 0.0, -2.0, 0.0, 1.0]).unwrap(),
        SamplingGrid::new(grid.clone()).unwrap(),
    )
    .unwrap();
    let z = |x: f64| x.powi(4) - 2.0 * x * x;
    let y = grid.iter().map(|&t| z(t - 0.5).min(z(t + 0.5))).collect();
    (model, y)
}

#[test]
fn neighbor_seed_resolves_symmetric_minima() {
    let (model, y) = double_well();
    let lm = LevenbergMarquardt::default();
    for side in [1.0, -1.0] {
        // The neighbor is the same curve tilted towards one well.
        let neighbor: Vec<f64> = y.iter().zip(model.grid().points()).map(|(v, t)| v + 0.01 * side * t).collect();
        let curves = vec![
            SampledCurve::unweighted("ambiguous", y.clone()).unwrap(),
            SampledCurve::unweighted("neighbor", neighbor.clone()).unwrap(),
        ];
        let neighbor_fit = project_curve(&model, &neighbor, &[Theta::new(vec![0.3 * side])], &lm).unwrap();
        let current = vec![Theta::new(vec![0.0]), neighbor_fit.theta.clone()];
        let mut starts = neighbor_seed(&curves, &current)[0].clone();
        starts.extend([Theta::new(vec![-0.8]), Theta::new(vec![0.8])]);
        let p = project_curve(&model, &y, &starts, &lm).unwrap();
        assert_eq!(p.n_minima, 2);
        assert!(p.theta[0] * side > 0.3, "side {side}: got {}", p.theta[0]);
        assert_abs_diff_eq!(p.theta[0].abs(), 0.35, epsilon = 0.05);
    }
}

#[test]
fn noiseless_round_trip_recovers_parameters() {
    let study = simulate(&SyntheticSpec { noise_fraction: 0.0, ..SyntheticSpec::default() }, &DecomposeConfig::default()).unwrap();
    let fit = fit_all(&study.curves, &study.grid, ModeSpec::shape_invariant(), &FitConfig::default()).unwrap();
    assert!(fit.sse() <= 1e-12, "sse {}", fit.sse());
    for (c, truth) in fit.curves.iter().zip(&study.thetas) {
        for k in 0..3 {
            assert_abs_diff_eq!(c.theta[k], truth[k], epsilon = 1e-5);
        }
    }
    for (a, b) in fit.template().coefficients().iter().zip(study.truth.template().coefficients()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
    }
}

#[test]
fn warped_noiseless_data_lies_on_the_template() {
    let study = simulate(&SyntheticSpec { noise_fraction: 0.0, n: 15, ..SyntheticSpec::default() }, &DecomposeConfig::default()).unwrap();
    let fit = fit_all(&study.curves, &study.grid, ModeSpec::shape_invariant(), &FitConfig::default()).unwrap();
    let diags = warp_diagnostics(&fit, &study.curves, 0.5).unwrap();
    for d in diags {
        assert!(d.trace_deviation <= 1e-6, "{}: {}", d.id, d.trace_deviation);
    }
}

#[test]
fn vertical_only_data_is_attributed_to_vertical() {
    let laws = vec![
        Law::Uniform { lo: 1.0, hi: 1.0 },
        Law::Normal { mean: 0.0, sd: 0.0 },
        Law::Normal { mean: 0.0, sd: 0.3 },
    ];
    let study = simulate(&spec(&["gen_spec", "horizontal", "vertical"], laws, 0.02), &DecomposeConfig::default()).unwrap();
    let fit = fit_all(&study.curves, &study.grid, ModeSpec::shape_invariant(), &FitConfig::default()).unwrap();
    let d = decompose(&fit, &DecomposeConfig::default()).unwrap();
    let signal = study.oracle.ssm_total / (study.oracle.ssm_total + study.noise_energy) * 100.0;
    assert_abs_diff_eq!(d.rss_per_mode["vertical"], signal, epsilon = 2.0);
    assert!(d.rss_per_mode["horizontal"] <= 2.0, "{}", d.rss_per_mode["horizontal"]);
    assert!(d.rss_per_mode["gen_spec"] <= 2.0, "{}", d.rss_per_mode["gen_spec"]);
}

#[test]
fn decomposition_report_shape() {
    // Published shares for a dataset that is not available; only the layout is checked.
    let study = simulate(&SyntheticSpec { n: 8, ..SyntheticSpec::default() }, &DecomposeConfig::default()).unwrap();
    let mut d = study.oracle.clone();
    for (name, v) in [("vertical", 11.24), ("horizontal", 45.76), ("gen_spec", 27.11)] {
        d.rss_per_mode[name] = v;
    }
    d.rss_total = 84.11;
    let doc = decomposition_json(&study.truth.mode_names(), &d);
    assert_eq!(doc["rss"], json!({"gen_spec": 27.11, "horizontal": 45.76, "vertical": 11.24}));
    assert_eq!(doc["rss_total"], json!(84.11));
    let keys: Vec<&str> = doc.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        ["sse", "ssm", "ssm_total", "rss", "rss_total", "frechet_mean", "origin", "gamma", "degenerate", "frechet_variance", "mean_unique"]
    );
}

fn rescaled(fit: &FitResult, scale: f64) -> FitResult {
    let km = fit.model.location_index().unwrap();
    let modes = fit
        .model
        .modes()
        .iter()
        .enumerate()
        .map(|(k, m)| {
            if k == km {
                ModeSpec::Custom(CustomWarp::new(ScaledShiftWarp { scale, name: "horizontal".into() }))
            } else {
                m.clone()
            }
        })
        .collect();
    FitResult {
        model: Model::new(modes, fit.template().clone(), fit.model.grid().clone()).unwrap(),
        curves: fit
            .curves
            .iter()
            .map(|c| CurveFit { theta: c.theta.with(km, c.theta[km] / scale), ..c.clone() })
            .collect(),
        ..fit.clone()
    }
}

#[test]
fn rescaled_location_leaves_shares_unchanged() {
    let study = simulate(&SyntheticSpec { n: 25, ..SyntheticSpec::default() }, &DecomposeConfig::default()).unwrap();
    let fit = fit_all(&study.curves, &study.grid, ModeSpec::shape_invariant(), &FitConfig::default()).unwrap();
    let base = decompose(&fit, &DecomposeConfig::default()).unwrap();
    for scale in [3.0, 0.7] {
        let d = decompose(&rescaled(&fit, scale), &DecomposeConfig::default()).unwrap();
        for (a, b) in base.rss_per_mode.values().zip(d.rss_per_mode.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }
}

#[test]
fn weighted_sse_option_uses_weights() {
    let study = simulate(&SyntheticSpec { n: 10, ..SyntheticSpec::default() }, &DecomposeConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let curves: Vec<SampledCurve> = study
        .curves
        .iter()
        .map(|c| SampledCurve::new(c.id.clone(), c.z.clone(), rng.random_range(0.5..2.0)).unwrap())
        .collect();
    let fit = fit_all(&curves, &study.grid, ModeSpec::shape_invariant(), &FitConfig::default()).unwrap();
    let plain = decompose(&fit, &DecomposeConfig::default()).unwrap();
    let weighted = decompose(&fit, &DecomposeConfig { weighted_sse: true, ..Default::default() }).unwrap();
    assert_eq!(plain.sse, fit.sse());
    assert_eq!(weighted.sse, fit.weighted_sse());
    assert_eq!(plain.ssm_total, weighted.ssm_total);
}
