//! Variance decomposition into per-mode sums of squares, with bootstrap
//! uncertainty over families and γ-sensitivity sweeps.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TmvError};
use crate::fitting::{fit_all, FitConfig, FitResult, SampledCurve};
use crate::frechet::{mean_from_embeddings, select_origin, EmbeddedSample, FrechetResult, OriginGrid, SearchConfig};
use crate::geometry::ArcConfig;
use crate::metrics::{Chart, MetricConfig, SeparabilityDecl};
use crate::model::{ModeSpec, Model, SamplingGrid, Theta};

/// Maximum fraction of failed bootstrap replicates before aborting.
pub const MAX_BOOTSTRAP_FAILURE_RATE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginPolicy {
    /// Minimize the Fréchet variance over a grid on the bounding box of the
    /// fitted parameters, expanded by `expand` on each side.
    Auto { expand: f64, resolution: usize },
    /// Use an explicit grid.
    Grid(OriginGrid),
    Pinned(Theta),
}

impl Default for OriginPolicy {
    fn default() -> Self {
        OriginPolicy::Auto {
            expand: 0.1,
            resolution: 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeConfig {
    pub gamma: f64,
    pub origin: OriginPolicy,
    pub arc: ArcConfig,
    pub search: SearchConfig,
    /// Use the fit weights in the SSE of the RSS denominator.
    pub weighted_sse: bool,
    /// Separability blocks; defaults to vertical shift alone and the other modes coupled.
    pub decl: Option<SeparabilityDecl>,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            origin: OriginPolicy::default(),
            arc: ArcConfig::default(),
            search: SearchConfig::default(),
            weighted_sse: false,
            decl: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub sse: f64,
    pub ssm_per_mode: IndexMap<String, f64>,
    pub ssm_total: f64,
    /// Percent of total variation, `100·SSM_k / (SSM + SSE)`.
    pub rss_per_mode: IndexMap<String, f64>,
    pub rss_total: f64,
    pub frechet_mean: Theta,
    pub origin: Theta,
    pub gamma: f64,
    /// Set when `SSM + SSE = 0`; shares are then reported as 0.
    pub degenerate: bool,
    pub frechet: FrechetResult,
}

/// Unweighted `Σ ‖z_i − R̂_i‖²`.
pub fn sse(curves: &[SampledCurve], fit: &FitResult) -> Result<f64> {
    if curves.len() != fit.curves.len() {
        return Err(TmvError::InvalidConfig("curve count differs from the fit".into()));
    }
    let mut total = 0.0;
    for (c, f) in curves.iter().zip(&fit.curves) {
        if c.z.len() != f.fitted.len() {
            return Err(TmvError::GridMismatch(format!("curve `{}` does not match its fit", c.id)));
        }
        total += c.z.iter().zip(&f.fitted).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total)
}

/// Decomposition of a fitted study.
pub fn decompose(fit: &FitResult, cfg: &DecomposeConfig) -> Result<Decomposition> {
    let sse = if cfg.weighted_sse { fit.weighted_sse() } else { fit.sse() };
    decompose_thetas(&fit.model, &fit.thetas(), sse, cfg)
}

/// Decomposition of explicit parameter vectors with a given SSE.
pub fn decompose_thetas(model: &Model, thetas: &[Theta], sse: f64, cfg: &DecomposeConfig) -> Result<Decomposition> {
    if thetas.is_empty() {
        return Err(TmvError::InvalidConfig("nothing to decompose".into()));
    }
    if !(0.0..=1.0).contains(&cfg.gamma) {
        return Err(TmvError::InvalidConfig(format!("gamma must lie in [0, 1], got {}", cfg.gamma)));
    }
    let decl = match &cfg.decl {
        Some(d) => d.clone(),
        None => SeparabilityDecl::for_model(model)?,
    };
    decl.validate(model, thetas)?;
    let origin = match &cfg.origin {
        OriginPolicy::Pinned(o) => o.clone(),
        OriginPolicy::Auto { expand, resolution } => {
            let grid = OriginGrid::around(model, thetas, *expand, *resolution)?;
            select_origin(model, &decl, thetas, &grid, cfg.gamma, &cfg.arc, &cfg.search)?.origin
        }
        OriginPolicy::Grid(grid) => select_origin(model, &decl, thetas, grid, cfg.gamma, &cfg.arc, &cfg.search)?.origin,
    };
    let metric = MetricConfig {
        origin: origin.clone(),
        gamma: cfg.gamma,
        arc: cfg.arc,
    };
    let chart = Chart::new(model, &decl, &metric)?;
    let embedded = EmbeddedSample::new(&chart, thetas)?;
    let (frechet, mean_embedding) = mean_from_embeddings(&chart, thetas, &embedded, &cfg.search)?;

    let mut ssm = vec![0.0; model.n_modes()];
    for e in &embedded.embeddings {
        for (acc, c) in ssm.iter_mut().zip(chart.mode_contributions(e, &mean_embedding)) {
            *acc += c;
        }
    }
    let ssm_total: f64 = ssm.iter().sum();
    let denominator = ssm_total + sse;
    let degenerate = denominator == 0.0;
    let share = |v: f64| if degenerate { 0.0 } else { 100.0 * v / denominator };
    let names = model.mode_names();
    let ssm_per_mode: IndexMap<String, f64> = names.iter().cloned().zip(ssm.iter().copied()).collect();
    let rss_per_mode: IndexMap<String, f64> = names.iter().cloned().zip(ssm.iter().map(|&v| share(v))).collect();
    Ok(Decomposition {
        sse,
        ssm_per_mode,
        ssm_total,
        rss_per_mode,
        rss_total: share(ssm_total),
        frechet_mean: frechet.mean_theta.clone(),
        origin,
        gamma: cfg.gamma,
        degenerate,
        frechet,
    })
}

/// One decomposition per `γ`, everything else unchanged.
pub fn gamma_sweep(fit: &FitResult, cfg: &DecomposeConfig, gammas: &[f64]) -> Result<Vec<Decomposition>> {
    let decl = match &cfg.decl {
        Some(d) => d.clone(),
        None => SeparabilityDecl::for_model(&fit.model)?,
    };
    if !decl.has_pair() {
        return Err(TmvError::InvalidConfig("a gamma sweep needs a two-mode block".into()));
    }
    gammas
        .iter()
        .map(|&gamma| {
            let cfg = DecomposeConfig {
                gamma,
                decl: Some(decl.clone()),
                ..cfg.clone()
            };
            decompose(fit, &cfg)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantitySummary {
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator; 0 for one replicate).
    pub sd: f64,
    pub median: f64,
    pub p5: f64,
    pub p95: f64,
}

impl QuantitySummary {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n > 0, "summary of an empty sample");
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            sd,
            median: quantile(&sorted, 0.5),
            p5: quantile(&sorted, 0.05),
            p95: quantile(&sorted, 0.95),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    /// Requested replicate count `B`.
    pub replicates: usize,
    pub seed: u64,
    pub failures: usize,
    /// RSS summaries keyed by mode name, plus `total`.
    pub rss: IndexMap<String, QuantitySummary>,
    /// Per-replicate RSS values behind each summary.
    #[serde(skip)]
    pub values: IndexMap<String, Vec<f64>>,
}

/// Resample curves with replacement, refit and decompose each replicate.
pub fn bootstrap(
    curves: &[SampledCurve],
    grid: &SamplingGrid,
    modes: &[ModeSpec],
    fit_cfg: &FitConfig,
    cfg: &DecomposeConfig,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapSummary> {
    if replicates == 0 {
        return Err(TmvError::InvalidConfig("bootstrap needs at least one replicate".into()));
    }
    if curves.is_empty() {
        return Err(TmvError::InvalidConfig("no curves to resample".into()));
    }
    let outcomes: Vec<Option<Decomposition>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let sample: Vec<SampledCurve> = (0..curves.len())
                .map(|_| curves[rng.random_range(0..curves.len())].clone())
                .collect();
            let fit_cfg = FitConfig {
                seed: rng.random(),
                ..fit_cfg.clone()
            };
            let fit = fit_all(&sample, grid, modes.to_vec(), &fit_cfg).ok()?;
            decompose(&fit, cfg).ok()
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    if failures as f64 > MAX_BOOTSTRAP_FAILURE_RATE * replicates as f64 {
        return Err(TmvError::BootstrapAborted { failures, replicates });
    }
    let mut values: IndexMap<String, Vec<f64>> = IndexMap::new();
    for d in outcomes.iter().flatten() {
        for (mode, v) in &d.rss_per_mode {
            values.entry(mode.clone()).or_default().push(*v);
        }
        values.entry("total".into()).or_default().push(d.rss_total);
    }
    let rss = values.iter().map(|(k, v)| (k.clone(), QuantitySummary::from_values(v))).collect();
    Ok(BootstrapSummary {
        replicates,
        seed,
        failures,
        rss,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PolynomialTemplate;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quantiles_interpolate() {
        let s = QuantitySummary::from_values(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert_abs_diff_eq!(s.p5, 1.15, epsilon = 1e-12);
        assert_abs_diff_eq!(s.p95, 3.85, epsilon = 1e-12);
        let one = QuantitySummary::from_values(&[7.0]);
        assert_eq!((one.sd, one.p5, one.p95, one.median), (0.0, 7.0, 7.0, 7.0));
    }

    fn parabola_model(modes: Vec<ModeSpec>) -> Model {
        Model::new(
            modes,
            PolynomialTemplate::new(vec![0.0, 0.0, -1.0]).unwrap(),
            SamplingGrid::new(vec![-1.0, 0.0, 1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identical_points_are_degenerate() {
        let model = parabola_model(ModeSpec::shape_invariant());
        let thetas = vec![Theta::new(vec![1.1, 0.2, 0.3]); 4];
        let d = decompose_thetas(&model, &thetas, 0.0, &DecomposeConfig::default()).unwrap();
        assert!(d.degenerate);
        assert!(d.ssm_per_mode.values().all(|&v| v == 0.0));
        assert!(d.rss_per_mode.values().all(|&v| v == 0.0));
        assert_eq!(d.rss_total, 0.0);
    }

    #[test]
    fn vertical_only_shares() {
        let model = parabola_model(ModeSpec::shape_invariant());
        let thetas: Vec<Theta> = [0.0, 1.0, 2.0, 3.0].iter().map(|&h| Theta::new(vec![1.0, 0.0, h])).collect();
        let d = decompose_thetas(&model, &thetas, 5.0, &DecomposeConfig::default()).unwrap();
        // Σ (h − 1.5)²·3 = 15
        assert_abs_diff_eq!(d.ssm_per_mode["vertical"], 15.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.ssm_per_mode["gen_spec"], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.ssm_per_mode["horizontal"], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.rss_per_mode["vertical"], 75.0, epsilon = 1e-8);
        assert_abs_diff_eq!(d.frechet_mean[2], 1.5, epsilon = 1e-9);
    }
}
