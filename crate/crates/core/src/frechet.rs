//! Fréchet function, mean, variance and origin selection.
//!
//! All computations go through a [`Chart`]: within a chart the squared
//! distance is a weighted squared Euclidean distance between embeddings, so
//! `F_n(θ) = Σ‖E_i − E(θ)‖² = Σ‖E_i − Ē‖² + n·‖Ē − E(θ)‖²`. The mean is found
//! block by block: singleton blocks invert the arc-coordinate map at the mean
//! coordinate, pair blocks minimize `‖Ē − E(θ)‖²` numerically.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TmvError};
use crate::geometry::{arc_coordinate_unchecked, ArcConfig};
use crate::metrics::{Chart, Embedding, MetricConfig, SeparabilityDecl};
use crate::model::{Model, Theta};
use crate::optim::NelderMead;

/// Multi-start results closer than this are treated as one mean.
pub const UNIQUENESS_SPREAD: f64 = 1e-6;

/// Candidate origins: a regular grid over a box `K` of parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginGrid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
}

impl OriginGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let grid = Self {
            lower,
            upper,
            resolution,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lower.len();
        if self.upper.len() != n || self.resolution.len() != n {
            return Err(TmvError::InvalidConfig("origin grid dimensions disagree".into()));
        }
        for k in 0..n {
            let (lo, hi) = (self.lower[k], self.upper[k]);
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(TmvError::InvalidConfig(format!("origin interval {k} is [{lo}, {hi}]")));
            }
            if self.resolution[k] == 0 || (self.resolution[k] < 2 && lo < hi) {
                return Err(TmvError::InvalidConfig("origin grid resolution must be >= 2".into()));
            }
        }
        Ok(())
    }

    /// Single candidate origin.
    pub fn point(origin: &[f64]) -> Self {
        Self {
            lower: origin.to_vec(),
            upper: origin.to_vec(),
            resolution: vec![1; origin.len()],
        }
    }

    /// Bounding box of `thetas` expanded by `expand` of its width on each side.
    pub fn around(model: &Model, thetas: &[Theta], expand: f64, resolution: usize) -> Result<Self> {
        let (lower, upper) = bounding_box(model, thetas, expand)?;
        let resolution = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| if l < u { resolution.max(2) } else { 1 })
            .collect();
        Self::new(lower, upper, resolution)
    }

    fn axis(&self, k: usize) -> Vec<f64> {
        let r = self.resolution[k];
        if r <= 1 || self.lower[k] == self.upper[k] {
            return vec![self.lower[k]];
        }
        let step = (self.upper[k] - self.lower[k]) / (r - 1) as f64;
        (0..r)
            .map(|i| if i == r - 1 { self.upper[k] } else { self.lower[k] + step * i as f64 })
            .collect()
    }

    /// Candidate origins in lexicographic order. Axes of modes outside pair
    /// blocks are collapsed to their midpoint: such modes have chart
    /// coordinates that only translate with the origin.
    pub fn candidates(&self, decl: &SeparabilityDecl) -> Vec<Theta> {
        let n = self.lower.len();
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let in_pair = decl.block_of(k).is_some_and(|b| b.len() == 2);
                if in_pair {
                    self.axis(k)
                } else {
                    vec![0.5 * (self.lower[k] + self.upper[k])]
                }
            })
            .collect();
        let mut out = vec![Vec::with_capacity(n)];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&x| {
                        let mut p = prefix.clone();
                        p.push(x);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(Theta::new).collect()
    }
}

/// Per-component bounding box expanded by `expand` of its width on each side
/// (with a small floor for degenerate components). Width components are kept
/// strictly positive.
pub fn bounding_box(model: &Model, thetas: &[Theta], expand: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if thetas.is_empty() {
        return Err(TmvError::InvalidConfig("empty sample".into()));
    }
    let n = model.n_modes();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for theta in thetas {
        model.check_theta(theta)?;
        for k in 0..n {
            lo[k] = lo[k].min(theta[k]);
            hi[k] = hi[k].max(theta[k]);
        }
    }
    for k in 0..n {
        let width = hi[k] - lo[k];
        let pad = if width > 0.0 { expand * width } else { 0.0 };
        let min_w = lo[k];
        lo[k] -= pad;
        hi[k] += pad;
        if model.width_index() == Some(k) {
            lo[k] = lo[k].max(0.5 * min_w);
        }
    }
    Ok((lo, hi))
}

/// Search controls for the numerical mean on pair blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Points per axis of the coarse scan.
    pub grid_points: usize,
    /// Nelder–Mead restarts from the best scan points.
    pub starts: usize,
    /// Expansion of the sample bounding box used as the search box.
    pub expand: f64,
    /// Explicit search box, overriding the expanded bounding box.
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
    pub x_tol: f64,
    pub max_evals: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid_points: 11,
            starts: 5,
            expand: 0.25,
            bounds: None,
            x_tol: 1e-10,
            max_evals: 1000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchDiagnostics {
    pub evaluations: usize,
    pub starts: usize,
    /// Largest distance (in chart units) between near-optimal restarts.
    pub spread: f64,
    pub unique: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetResult {
    pub mean_theta: Theta,
    /// `F_n(θ̃) / n`.
    pub variance: f64,
    /// `F_n(θ̃)`.
    pub attained_value: f64,
    pub diagnostics: SearchDiagnostics,
}

/// Sample embeddings with the mean embedding `Ē`.
pub(crate) struct EmbeddedSample {
    pub embeddings: Vec<Embedding>,
    pub centroid: Vec<f64>,
}

impl EmbeddedSample {
    pub fn new(chart: &Chart, sample: &[Theta]) -> Result<Self> {
        if sample.is_empty() {
            return Err(TmvError::InvalidConfig("empty sample".into()));
        }
        let embeddings = sample.iter().map(|t| chart.embed(t)).collect::<Result<Vec<_>>>()?;
        let dim = chart.dim();
        let mut centroid = vec![0.0; dim];
        for e in &embeddings {
            for (c, x) in centroid.iter_mut().zip(&e.coords) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= embeddings.len() as f64;
        }
        Ok(Self { embeddings, centroid })
    }

    /// `Σ‖E_i − Ē‖² / n`, a lower bound on the Fréchet variance.
    pub fn spread_about_centroid(&self, chart: &Chart) -> f64 {
        let c = Embedding {
            coords: self.centroid.clone(),
        };
        self.embeddings.iter().map(|e| chart.dist2_embedded(e, &c)).sum::<f64>() / self.embeddings.len() as f64
    }
}

/// `F_n(θ) = Σ_i d²(θ_i, θ)`.
pub fn frechet_fn(chart: &Chart, sample: &[Theta], candidate: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(TmvError::InvalidConfig("empty sample".into()));
    }
    let c = chart.embed(candidate)?;
    sample
        .iter()
        .map(|t| chart.embed(t).map(|e| chart.dist2_embedded(&e, &c)))
        .sum()
}

/// Mean of a one-parameter sample along mode `k` (other components at the
/// origin): the arithmetic mean of arc coordinates mapped back by bisection.
pub fn frechet_mean_1d(model: &Model, sample: &[Theta], k: usize, cfg: &MetricConfig) -> Result<FrechetResult> {
    cfg.validate(model)?;
    model.check_mode(k)?;
    if sample.is_empty() {
        return Err(TmvError::InvalidConfig("empty sample".into()));
    }
    let origin = cfg.origin.as_slice();
    let coords = sample
        .iter()
        .map(|t| {
            model.check_theta(t)?;
            arc_coordinate_unchecked(model, k, t[k], origin[k], origin, &cfg.arc)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = coords.len() as f64;
    let mean = coords.iter().sum::<f64>() / n;
    let params: Vec<f64> = sample.iter().map(|t| t[k]).collect();
    let x = invert_coordinate(model, k, origin, &cfg.arc, &params, mean)?;
    let attained: f64 = coords.iter().map(|c| (c - mean).powi(2)).sum();
    Ok(FrechetResult {
        mean_theta: cfg.origin.with(k, x),
        variance: attained / n,
        attained_value: attained,
        diagnostics: SearchDiagnostics {
            evaluations: 0,
            starts: 1,
            spread: 0.0,
            unique: true,
        },
    })
}

/// Parameter value whose arc coordinate along mode `k` is `target`. The
/// coordinate is nondecreasing in the parameter, so the answer lies between
/// the smallest and largest sample values.
fn invert_coordinate(model: &Model, k: usize, origin: &[f64], arc: &ArcConfig, params: &[f64], target: f64) -> Result<f64> {
    let mut lo = params.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = params.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let coord = |x: f64| arc_coordinate_unchecked(model, k, x, origin[k], origin, arc);
    let mut c_lo = coord(lo)?;
    let mut c_hi = coord(hi)?;
    if target <= c_lo {
        return Ok(lo);
    }
    if target >= c_hi {
        return Ok(hi);
    }
    for _ in 0..200 {
        if c_hi - c_lo <= 1e-10 && hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let c_mid = coord(mid)?;
        if c_mid < target {
            lo = mid;
            c_lo = c_mid;
        } else {
            hi = mid;
            c_hi = c_mid;
        }
    }
    let x = if target - c_lo <= c_hi - target { lo } else { hi };
    let achieved = coord(x)?;
    if (achieved - target).abs() > 1e-10 * (1.0 + target.abs()) {
        return Err(TmvError::NonInvertible { coordinate: target });
    }
    Ok(x)
}

/// Fréchet mean of `sample` under the chart's composite metric.
pub fn frechet_mean(chart: &Chart, sample: &[Theta], search: &SearchConfig) -> Result<FrechetResult> {
    let embedded = EmbeddedSample::new(chart, sample)?;
    mean_from_embeddings(chart, sample, &embedded, search).map(|(r, _)| r)
}

/// Mean search given precomputed embeddings; also returns `E(θ̃)`.
pub(crate) fn mean_from_embeddings(
    chart: &Chart,
    sample: &[Theta],
    embedded: &EmbeddedSample,
    search: &SearchConfig,
) -> Result<(FrechetResult, Embedding)> {
    let model = chart.model();
    let origin = chart.origin().as_slice();
    let mut mean = chart.origin().clone().into_vec();
    let mut diagnostics = SearchDiagnostics {
        evaluations: 0,
        starts: 0,
        spread: 0.0,
        unique: true,
    };
    let (box_lo, box_hi) = match &search.bounds {
        Some((lo, hi)) => (lo.clone(), hi.clone()),
        None => bounding_box(model, sample, search.expand)?,
    };

    for (block, ks) in chart.decl().blocks().iter().enumerate() {
        let off = chart.block_offset(block);
        match ks.as_slice() {
            [k] => {
                let params: Vec<f64> = sample.iter().map(|t| t[*k]).collect();
                mean[*k] = invert_coordinate(model, *k, origin, chart.arc(), &params, embedded.centroid[off])?;
            }
            [a, b] => {
                let target = &embedded.centroid[off..off + 4];
                let (x, diag) = pair_mean(chart, block, (*a, *b), target, sample, (&box_lo, &box_hi), search)?;
                mean[*a] = x[0];
                mean[*b] = x[1];
                diagnostics.evaluations += diag.evaluations;
                diagnostics.starts += diag.starts;
                diagnostics.spread = diagnostics.spread.max(diag.spread);
                diagnostics.unique &= diag.unique;
            }
            _ => unreachable!("chart validates block sizes"),
        }
    }

    let mean_embedding = chart.embed(&mean)?;
    let attained: f64 = embedded
        .embeddings
        .iter()
        .map(|e| chart.dist2_embedded(e, &mean_embedding))
        .sum();
    let n = sample.len() as f64;
    Ok((
        FrechetResult {
            mean_theta: Theta::new(mean),
            variance: attained / n,
            attained_value: attained,
            diagnostics,
        },
        mean_embedding,
    ))
}

fn pair_mean(
    chart: &Chart,
    block: usize,
    (a, b): (usize, usize),
    target: &[f64],
    sample: &[Theta],
    (box_lo, box_hi): (&[f64], &[f64]),
    search: &SearchConfig,
) -> Result<([f64; 2], SearchDiagnostics)> {
    let gamma = chart.gamma();
    let mut theta = chart.origin().clone().into_vec();
    let mut objective = |x: &[f64]| -> Result<f64> {
        theta[a] = x[0];
        theta[b] = x[1];
        let mut e = [0.0; 4];
        chart.embed_block_into(block, &theta, &mut e)?;
        let d = |i: usize| e[i] - target[i];
        Ok(gamma * (d(0) * d(0) + d(1) * d(1)) + (1.0 - gamma) * (d(2) * d(2) + d(3) * d(3)))
    };

    if sample.len() == 1 || sample.iter().all(|t| t[a] == sample[0][a] && t[b] == sample[0][b]) {
        let x = [sample[0][a], sample[0][b]];
        return Ok((
            x,
            SearchDiagnostics {
                evaluations: 0,
                starts: 0,
                spread: 0.0,
                unique: true,
            },
        ));
    }

    let lo = [box_lo[a], box_lo[b]];
    let hi = [box_hi[a], box_hi[b]];
    let g = search.grid_points.max(2);
    let axis = |i: usize| -> Vec<f64> {
        (0..g)
            .map(|j| if j == g - 1 { hi[i] } else { lo[i] + (hi[i] - lo[i]) * j as f64 / (g - 1) as f64 })
            .collect()
    };
    let (xa, xb) = (axis(0), axis(1));
    let mut scan = Vec::with_capacity(g * g);
    for &u in &xa {
        for &v in &xb {
            scan.push((objective(&[u, v])?, [u, v]));
        }
    }
    let mut evaluations = scan.len();
    scan.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1[0].total_cmp(&q.1[0])).then(p.1[1].total_cmp(&q.1[1])));

    let nm = NelderMead {
        max_evals: search.max_evals,
        x_tol: search.x_tol,
        initial_step: 0.5 / (g - 1) as f64,
    };
    let mut results = Vec::new();
    for (_, start) in scan.iter().take(search.starts.max(1)) {
        let m = nm.minimize(&mut objective, start, &lo, &hi)?;
        evaluations += m.evals;
        results.push(m);
    }
    results.sort_by(|p, q| p.value.total_cmp(&q.value));
    let best = &results[0];
    let near_best = |v: f64| v - best.value <= 1e-8 * (1.0 + best.value) + 1e-14;
    let scale = |i: usize| (hi[i] - lo[i]).max(f64::MIN_POSITIVE);
    let spread = results
        .iter()
        .filter(|r| near_best(r.value))
        .map(|r| ((r.x[0] - best.x[0]) / scale(0)).hypot((r.x[1] - best.x[1]) / scale(1)))
        .fold(0.0, f64::max);

    for i in 0..2 {
        let tol = 1e-7 * scale(i);
        let at_lower = best.x[i] - lo[i] <= tol;
        let at_upper = hi[i] - best.x[i] <= tol;
        // A sample that itself touches the box edge (degenerate width) is fine.
        if (at_lower || at_upper) && hi[i] > lo[i] {
            let mut theta = chart.origin().clone().into_vec();
            theta[a] = best.x[0];
            theta[b] = best.x[1];
            return Err(TmvError::SearchBoxTooSmall { theta });
        }
    }
    Ok((
        [best.x[0], best.x[1]],
        SearchDiagnostics {
            evaluations,
            starts: results.len(),
            spread,
            unique: spread <= UNIQUENESS_SPREAD,
        },
    ))
}

/// `F_n(θ̃) / n` for a computed mean.
pub fn frechet_variance(chart: &Chart, sample: &[Theta], mean: &FrechetResult) -> Result<f64> {
    Ok(frechet_fn(chart, sample, &mean.mean_theta)? / sample.len() as f64)
}

/// Result of scanning an origin grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginSelection {
    pub origin: Theta,
    pub value: f64,
    pub mean: FrechetResult,
    /// Candidates whose full mean search was run (others were excluded by
    /// their lower bound).
    pub evaluated: usize,
    pub candidates: usize,
}

/// Origin minimizing the Fréchet variance over `grid`; ties go to the
/// lexicographically smallest origin.
pub fn select_origin(
    model: &Model,
    decl: &SeparabilityDecl,
    sample: &[Theta],
    grid: &OriginGrid,
    gamma: f64,
    arc: &ArcConfig,
    search: &SearchConfig,
) -> Result<OriginSelection> {
    grid.validate()?;
    if grid.lower.len() != model.n_modes() {
        return Err(TmvError::InvalidConfig("origin grid does not match the model".into()));
    }
    let candidates = grid.candidates(decl);
    let config = |o: &Theta| MetricConfig {
        origin: o.clone(),
        gamma,
        arc: *arc,
    };

    // Lower bound Σ‖E_i − Ē‖²/n for every candidate; the full search adds
    // min‖Ē − E(θ)‖², which is nonnegative.
    let bounds: Vec<(usize, f64)> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, o)| {
            let cfg = config(o);
            let chart = Chart::new(model, decl, &cfg)?;
            let embedded = EmbeddedSample::new(&chart, sample)?;
            Ok((i, embedded.spread_about_centroid(&chart)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order = bounds;
    order.sort_by(|p, q| p.1.total_cmp(&q.1).then(p.0.cmp(&q.0)));

    let mut best: Option<(usize, FrechetResult)> = None;
    let mut evaluated = 0;
    for (i, bound) in order {
        if let Some((_, current)) = &best {
            if bound > current.variance {
                break;
            }
        }
        let cfg = config(&candidates[i]);
        let chart = Chart::new(model, decl, &cfg)?;
        let result = frechet_mean(&chart, sample, search)?;
        evaluated += 1;
        let better = match &best {
            None => true,
            Some((j, current)) => {
                result.variance < current.variance || (result.variance == current.variance && i < *j)
            }
        };
        if better {
            best = Some((i, result));
        }
    }
    let (i, mean) = best.expect("origin grid has at least one candidate");
    Ok(OriginSelection {
        origin: candidates[i].clone(),
        value: mean.variance,
        mean,
        evaluated,
        candidates: candidates.len(),
    })
}
