//! Projection of observed curves onto the space of variation and alternating
//! estimation of the polynomial template and per-curve parameters.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TmvError};
use crate::model::{ModeSpec, Model, Polynomial, PolynomialTemplate, SamplingGrid, Theta};
use crate::optim::LevenbergMarquardt;

/// Relative SSE band within which two projections count as equally good.
pub const MINIMA_SSE_RTOL: f64 = 1e-8;
/// Parameter distance beyond which two equally good projections are distinct.
pub const MINIMA_THETA_SEP: f64 = 1e-3;

/// One observed curve (a family mean) on the study grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub id: String,
    pub z: Vec<f64>,
    pub weight: f64,
}

impl SampledCurve {
    pub fn new(id: impl Into<String>, z: Vec<f64>, weight: f64) -> Result<Self> {
        let id = id.into();
        if !weight.is_finite() || weight <= 0.0 {
            return Err(TmvError::InvalidConfig(format!("curve `{id}` has non-positive weight {weight}")));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(TmvError::InvalidConfig(format!("curve `{id}` has non-finite values")));
        }
        Ok(Self { id, z, weight })
    }

    pub fn unweighted(id: impl Into<String>, z: Vec<f64>) -> Result<Self> {
        Self::new(id, z, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub degree: usize,
    pub max_outer_iters: usize,
    /// Stop when one outer iteration lowers the weighted SSE by less than this fraction.
    pub rel_tol: f64,
    /// Latin-hypercube starts per curve, on top of the previous estimate and
    /// the neighbor seed.
    pub multistart: usize,
    pub seed: u64,
    pub lm_max_iter: usize,
    /// Finish with a joint Levenberg–Marquardt pass over template and all curves.
    pub polish: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            degree: 4,
            max_outer_iters: 100,
            rel_tol: 1e-8,
            multistart: 5,
            seed: 0,
            lm_max_iter: 200,
            polish: true,
        }
    }
}

/// Fitted parameters and projection of one curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub id: String,
    pub weight: f64,
    pub theta: Theta,
    pub fitted: Vec<f64>,
    /// `‖z − R(θ̂)‖²`.
    pub sse: f64,
    /// Distinct equally good projections found by the multistart.
    pub n_minima: usize,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub model: Model,
    pub curves: Vec<CurveFit>,
    pub iterations: usize,
    pub converged: bool,
    /// Weighted SSE after initialization and after every outer iteration.
    pub sse_trace: Vec<f64>,
}

impl FitResult {
    pub fn template(&self) -> &PolynomialTemplate {
        self.model.template()
    }

    pub fn thetas(&self) -> Vec<Theta> {
        self.curves.iter().map(|c| c.theta.clone()).collect()
    }

    /// `Σ weight_i·sse_i`.
    pub fn weighted_sse(&self) -> f64 {
        self.curves.iter().map(|c| c.weight * c.sse).sum()
    }

    /// `Σ sse_i`.
    pub fn sse(&self) -> f64 {
        self.curves.iter().map(|c| c.sse).sum()
    }
}

/// Result of projecting one curve.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub theta: Theta,
    pub sse: f64,
    pub n_minima: usize,
}

fn residual_and_jacobian(model: &Model, z: &[f64], x: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    if model.check_theta(x.as_slice()).is_err() {
        return None;
    }
    let d = z.len();
    let mut image = vec![0.0; d];
    model.image_into(x.as_slice(), None, &mut image);
    let r = DVector::from_iterator(d, image.iter().zip(z).map(|(a, b)| a - b));
    let mut jac = DMatrix::zeros(d, x.len());
    for k in 0..x.len() {
        let v = model.velocity(x.as_slice(), k).ok()?;
        jac.set_column(k, &DVector::from_vec(v));
    }
    Some((r, jac))
}

fn curve_sse(model: &Model, z: &[f64], theta: &[f64]) -> f64 {
    let mut image = vec![0.0; z.len()];
    model.image_into(theta, None, &mut image);
    image.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Least-squares projection of `z` onto the space of variation from each
/// start in `inits`. Among equally good solutions the earliest start wins.
pub fn project_curve(model: &Model, z: &[f64], inits: &[Theta], lm: &LevenbergMarquardt) -> Result<Projection> {
    if inits.is_empty() {
        return Err(TmvError::InvalidConfig("project_curve needs at least one start".into()));
    }
    if z.len() != model.grid().len() {
        return Err(TmvError::GridMismatch(format!("curve has {} values, grid has {}", z.len(), model.grid().len())));
    }
    let mut solutions: Vec<(Vec<f64>, f64)> = Vec::with_capacity(inits.len());
    for init in inits {
        let x0 = DVector::from_column_slice(init.as_slice());
        if let Some(sol) = lm.solve(|x| residual_and_jacobian(model, z, x), x0) {
            if sol.cost.is_finite() && sol.x.iter().all(|v| v.is_finite()) {
                let theta = sol.x.as_slice().to_vec();
                let sse = curve_sse(model, z, &theta);
                solutions.push((theta, sse));
            }
        }
    }
    if solutions.is_empty() {
        return Err(TmvError::NoConvergence("every projection start failed".into()));
    }
    let best = solutions.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let band = MINIMA_SSE_RTOL * best + 1e-20;
    let near: Vec<&(Vec<f64>, f64)> = solutions.iter().filter(|s| s.1 - best <= band).collect();
    let mut distinct: Vec<&[f64]> = Vec::new();
    for (theta, _) in &near {
        let separate = distinct.iter().all(|other| {
            theta.iter().zip(other.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() > MINIMA_THETA_SEP
        });
        if separate {
            distinct.push(theta);
        }
    }
    let (theta, sse) = near[0].clone();
    Ok(Projection {
        theta: Theta::new(theta),
        sse,
        n_minima: distinct.len(),
    })
}

/// Seeds per curve: its own current estimate, then that of its nearest
/// neighbor in raw-data Euclidean distance.
pub fn neighbor_seed(curves: &[SampledCurve], current: &[Theta]) -> Vec<Vec<Theta>> {
    (0..curves.len())
        .map(|i| {
            let mut seeds = vec![current[i].clone()];
            let nearest = (0..curves.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let d: f64 = curves[i].z.iter().zip(&curves[j].z).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d, j)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((_, j)) = nearest {
                seeds.push(current[j].clone());
            }
            seeds
        })
        .collect()
}

/// Exact gauge transform fixing weighted mean `m = 0`, weighted geometric
/// mean `w = 1` and weighted mean `h = 0`. Fitted curves are unchanged:
///
/// * `w ↦ w/c`, `z(x) ↦ c·z(c·x)` with `c` the weighted geometric mean of `w`;
/// * `m ↦ m − μ/w`, `z(x) ↦ z(x − μ)` with `μ = Σ p·m / Σ p/w`;
/// * `h ↦ h − w·η`, `z(x) ↦ z(x) + η` with `η = Σ p·h / Σ p·w`.
pub fn normalize_identifiability(fit: FitResult) -> FitResult {
    let weights: Vec<f64> = fit.curves.iter().map(|c| c.weight).collect();
    let mut thetas: Vec<Vec<f64>> = fit.curves.iter().map(|c| c.theta.as_slice().to_vec()).collect();
    let Ok(template) = normalize_parts(&fit.model, &weights, &mut thetas) else {
        return fit;
    };
    let model = fit.model.with_template(template);
    let curves = fit
        .curves
        .into_iter()
        .zip(thetas)
        .map(|(c, theta)| {
            let mut fitted = vec![0.0; c.fitted.len()];
            model.image_into(&theta, None, &mut fitted);
            CurveFit {
                theta: Theta::new(theta),
                fitted,
                ..c
            }
        })
        .collect();
    FitResult {
        model,
        curves,
        ..fit
    }
}

pub(crate) fn normalize_parts(model: &Model, weights: &[f64], thetas: &mut [Vec<f64>]) -> Result<PolynomialTemplate> {
    let total: f64 = weights.iter().sum();
    let mut poly: Polynomial = model.template().polynomial().clone();
    if let Some(k) = model.width_index() {
        let c = (thetas.iter().zip(weights).map(|(t, p)| p * t[k].ln()).sum::<f64>() / total).exp();
        if c != 1.0 {
            for t in thetas.iter_mut() {
                t[k] /= c;
            }
            poly = poly.scale_argument(c).scale(c);
        }
    }
    let w_of = |t: &[f64]| model.width_index().map_or(1.0, |k| t[k]);
    if let Some(k) = model.location_index() {
        let num: f64 = thetas.iter().zip(weights).map(|(t, p)| p * t[k]).sum();
        let den: f64 = thetas.iter().zip(weights).map(|(t, p)| p / w_of(t)).sum();
        let mu = num / den;
        if mu != 0.0 {
            for t in thetas.iter_mut() {
                t[k] -= mu / w_of(t);
            }
            poly = poly.shift_argument(mu);
        }
    }
    if let Some(k) = model.height_index() {
        let num: f64 = thetas.iter().zip(weights).map(|(t, p)| p * t[k]).sum();
        let den: f64 = thetas.iter().zip(weights).map(|(t, p)| p * w_of(t)).sum();
        let eta = num / den;
        if eta != 0.0 {
            for t in thetas.iter_mut() {
                t[k] -= w_of(t) * eta;
            }
            poly = poly.add_constant(eta);
        }
    }
    PolynomialTemplate::from_polynomial(poly)
}

/// Weighted least-squares template coefficients for fixed curve parameters.
fn solve_template(model: &Model, curves: &[SampledCurve], thetas: &[Vec<f64>], degree: usize) -> Option<Vec<f64>> {
    let d = model.grid().len();
    let rows = curves.len() * d;
    let cols = degree + 1;
    let mut x = DMatrix::zeros(rows, cols);
    let mut y = DVector::zeros(rows);
    let t = model.grid().points();
    for (i, (curve, theta)) in curves.iter().zip(thetas).enumerate() {
        let sw = curve.weight.sqrt();
        let w = model.width_index().map_or(1.0, |k| theta[k]);
        let h = model.height_index().map_or(0.0, |k| theta[k]);
        for j in 0..d {
            let u = warped_argument(model, theta, t[j]);
            let mut power = 1.0;
            for k in 0..cols {
                x[(i * d + j, k)] = sw * w * power;
                power *= u;
            }
            y[i * d + j] = sw * (curve.z[j] - h);
        }
    }
    let svd = x.svd(true, true);
    let max_sv = svd.singular_values.max();
    let coef = svd.solve(&y, 1e-13 * max_sv).ok()?;
    let coef: Vec<f64> = coef.iter().copied().collect();
    coef.iter().all(|c| c.is_finite()).then_some(coef)
}

/// `w·(φ(p, t) − m)` for one sampling point.
fn warped_argument(model: &Model, theta: &[f64], t: f64) -> f64 {
    let w = model.width_index().map_or(1.0, |k| theta[k]);
    let m = model.location_index().map_or(0.0, |k| theta[k]);
    let s = match model.custom_index() {
        Some(k) => match &model.modes()[k] {
            ModeSpec::Custom(warp) => warp.0.warp(theta[k], t),
            _ => unreachable!(),
        },
        None => t,
    };
    w * (s - m)
}

fn weighted_sse(model: &Model, curves: &[SampledCurve], thetas: &[Vec<f64>]) -> f64 {
    curves
        .iter()
        .zip(thetas)
        .map(|(c, t)| c.weight * curve_sse(model, &c.z, t))
        .sum()
}

/// Per-component search box for Latin-hypercube starts.
fn start_box(model: &Model, curves: &[SampledCurve], thetas: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = model.n_modes();
    let (zmin, zmax) = curves
        .iter()
        .flat_map(|c| c.z.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = model.grid().span();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for k in 0..n {
        let (mn, mx) = thetas
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t[k]), b.max(t[k])));
        let floor = match model.modes()[k] {
            ModeSpec::VerticalShift => 0.25 * (zmax - zmin).max(1e-12),
            ModeSpec::GeneralistSpecialist => 0.25,
            ModeSpec::HorizontalShift | ModeSpec::Custom(_) => 0.25 * span,
        };
        let pad = (0.5 * (mx - mn)).max(floor);
        lo[k] = mn - pad;
        hi[k] = mx + pad;
        if model.width_index() == Some(k) {
            lo[k] = lo[k].max(0.2 * mn);
        }
    }
    (lo, hi)
}

fn latin_hypercube(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64], n: usize) -> Vec<Theta> {
    let dims = lo.len();
    let mut points = vec![vec![0.0; dims]; n];
    for k in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            strata.swap(i, j);
        }
        for (i, point) in points.iter_mut().enumerate() {
            let u = (strata[i] as f64 + rng.random::<f64>()) / n as f64;
            point[k] = lo[k] + u * (hi[k] - lo[k]);
        }
    }
    points.into_iter().map(Theta::new).collect()
}

fn validate_inputs(grid: &SamplingGrid, curves: &[SampledCurve], cfg: &FitConfig) -> Result<()> {
    if curves.len() < 2 {
        return Err(TmvError::InvalidConfig(format!("need at least 2 curves, got {}", curves.len())));
    }
    if cfg.degree < 2 {
        return Err(TmvError::InvalidConfig("template degree must be at least 2".into()));
    }
    if cfg.rel_tol.is_nan() || cfg.rel_tol < 0.0 {
        return Err(TmvError::InvalidConfig("rel_tol must be >= 0".into()));
    }
    for c in curves {
        if c.z.len() != grid.len() {
            return Err(TmvError::GridMismatch(format!(
                "curve `{}` has {} values, grid has {}",
                c.id,
                c.z.len(),
                grid.len()
            )));
        }
    }
    Ok(())
}

/// Alternating fit of template and per-curve parameters.
pub fn fit_all(curves: &[SampledCurve], grid: &SamplingGrid, modes: Vec<ModeSpec>, cfg: &FitConfig) -> Result<FitResult> {
    validate_inputs(grid, curves, cfg)?;
    let weights: Vec<f64> = curves.iter().map(|c| c.weight).collect();
    let mut placeholder = vec![0.0; cfg.degree + 1];
    placeholder[2] = 1.0;
    let mut model = Model::new(modes, PolynomialTemplate::new(placeholder)?, grid.clone())?;
    let lm = LevenbergMarquardt {
        max_iter: cfg.lm_max_iter,
        ..LevenbergMarquardt::default()
    };

    let total_weight: f64 = weights.iter().sum();
    let grand_mean = curves
        .iter()
        .map(|c| c.weight * c.z.iter().sum::<f64>() / c.z.len() as f64)
        .sum::<f64>()
        / total_weight;
    let mut thetas: Vec<Vec<f64>> = curves
        .iter()
        .map(|c| {
            let mut theta = model.identity_theta().into_vec();
            if let Some(k) = model.height_index() {
                theta[k] = c.z.iter().sum::<f64>() / c.z.len() as f64 - grand_mean;
            }
            theta
        })
        .collect();
    let coef = solve_template(&model, curves, &thetas, cfg.degree)
        .ok_or_else(|| TmvError::NoConvergence("initial template solve failed".into()))?;
    model = model.with_template(PolynomialTemplate::new(coef)?);
    let mut n_minima = vec![1; curves.len()];
    let mut current = weighted_sse(&model, curves, &thetas);
    let mut trace = vec![current];
    let data_scale: f64 = curves.iter().map(|c| c.weight * c.z.iter().map(|v| v * v).sum::<f64>()).sum();
    let floor = 1e-26 * data_scale.max(f64::MIN_POSITIVE);

    let mut converged = current <= floor;
    let mut iterations = 0;
    while !converged && iterations < cfg.max_outer_iters {
        iterations += 1;
        let previous = current;

        // step 2: per-curve projections
        let theta_vec: Vec<Theta> = thetas.iter().cloned().map(Theta::new).collect();
        let seeds = neighbor_seed(curves, &theta_vec);
        let (lo, hi) = start_box(&model, curves, &thetas);
        let projections: Vec<Projection> = curves
            .par_iter()
            .enumerate()
            .map(|(i, curve)| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(((iterations as u64) << 32) | i as u64);
                let mut inits = seeds[i].clone();
                inits.extend(latin_hypercube(&mut rng, &lo, &hi, cfg.multistart));
                project_curve(&model, &curve.z, &inits, &lm)
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, p) in projections.into_iter().enumerate() {
            thetas[i] = p.theta.into_vec();
            n_minima[i] = p.n_minima;
        }
        model = model.with_template(normalize_parts(&model, &weights, &mut thetas)?);
        current = weighted_sse(&model, curves, &thetas);

        // step 1: template coefficients
        if let Some(coef) = solve_template(&model, curves, &thetas, cfg.degree) {
            if let Ok(template) = PolynomialTemplate::new(coef) {
                let candidate = model.with_template(template);
                let candidate_sse = weighted_sse(&candidate, curves, &thetas);
                if candidate_sse <= current {
                    model = candidate;
                    current = candidate_sse;
                }
            }
        }
        let mut normalized = thetas.clone();
        if let Ok(template) = normalize_parts(&model, &weights, &mut normalized) {
            let candidate = model.with_template(template);
            let candidate_sse = weighted_sse(&candidate, curves, &normalized);
            // the gauge change is exact up to rounding; keep the trace monotone
            if candidate_sse <= current * (1.0 + 1e-12) {
                model = candidate;
                thetas = normalized;
                current = candidate_sse.min(current);
            }
        }
        trace.push(current);
        converged = current <= floor || previous - current <= cfg.rel_tol * previous;
    }

    if cfg.polish && curves.len() * grid.len() > 0 {
        if let Some((polished_model, polished_thetas, sse)) = joint_polish(&model, curves, &thetas, cfg, &lm) {
            if sse < current {
                model = polished_model;
                thetas = polished_thetas;
                current = sse;
                trace.push(current);
            }
        }
    }

    let fit = assemble(model, curves, thetas, n_minima, iterations, converged, trace);
    if !converged {
        return Err(TmvError::FitNotConverged {
            iterations,
            best_sse: fit.weighted_sse(),
            best: Box::new(fit),
        });
    }
    Ok(fit)
}

fn assemble(
    model: Model,
    curves: &[SampledCurve],
    thetas: Vec<Vec<f64>>,
    n_minima: Vec<usize>,
    iterations: usize,
    converged: bool,
    sse_trace: Vec<f64>,
) -> FitResult {
    let curve_fits = curves
        .iter()
        .zip(thetas)
        .zip(n_minima)
        .map(|((c, theta), n_minima)| {
            let mut fitted = vec![0.0; c.z.len()];
            model.image_into(&theta, None, &mut fitted);
            let sse = fitted.iter().zip(&c.z).map(|(a, b)| (a - b) * (a - b)).sum();
            CurveFit {
                id: c.id.clone(),
                weight: c.weight,
                theta: Theta::new(theta),
                fitted,
                sse,
                n_minima,
            }
        })
        .collect();
    FitResult {
        model,
        curves: curve_fits,
        iterations,
        converged,
        sse_trace,
    }
}

/// Joint Levenberg–Marquardt over template coefficients and every curve's
/// parameters, starting from the alternating solution. Gauge directions make
/// the normal matrix singular; damping keeps the steps well defined and the
/// result is renormalized afterwards.
fn joint_polish(
    model: &Model,
    curves: &[SampledCurve],
    thetas: &[Vec<f64>],
    cfg: &FitConfig,
    lm: &LevenbergMarquardt,
) -> Option<(Model, Vec<Vec<f64>>, f64)> {
    let n_coef = cfg.degree + 1;
    let n_modes = model.n_modes();
    let d = model.grid().len();
    let n = curves.len();
    let weights: Vec<f64> = curves.iter().map(|c| c.weight).collect();
    let pack = |coef: &[f64], thetas: &[Vec<f64>]| {
        let mut x = coef.to_vec();
        for t in thetas {
            x.extend_from_slice(t);
        }
        DVector::from_vec(x)
    };
    let unpack = |x: &DVector<f64>| -> (Vec<f64>, Vec<Vec<f64>>) {
        let coef = x.as_slice()[..n_coef].to_vec();
        let thetas = (0..n)
            .map(|i| x.as_slice()[n_coef + i * n_modes..n_coef + (i + 1) * n_modes].to_vec())
            .collect();
        (coef, thetas)
    };
    let residuals = |x: &DVector<f64>| -> Option<(DVector<f64>, DMatrix<f64>)> {
        let (coef, thetas) = unpack(x);
        let template = PolynomialTemplate::new(coef).ok()?;
        let m = model.with_template(template);
        let mut r = DVector::zeros(n * d);
        let mut jac = DMatrix::zeros(n * d, x.len());
        let t = m.grid().points();
        for (i, (curve, theta)) in curves.iter().zip(&thetas).enumerate() {
            m.check_theta(theta).ok()?;
            let sw = curve.weight.sqrt();
            let w = m.width_index().map_or(1.0, |k| theta[k]);
            let mut image = vec![0.0; d];
            m.image_into(theta, None, &mut image);
            for j in 0..d {
                r[i * d + j] = sw * (image[j] - curve.z[j]);
                let u = warped_argument(&m, theta, t[j]);
                let mut power = 1.0;
                for k in 0..n_coef {
                    jac[(i * d + j, k)] = sw * w * power;
                    power *= u;
                }
            }
            for k in 0..n_modes {
                let v = m.velocity(theta, k).ok()?;
                for j in 0..d {
                    jac[(i * d + j, n_coef + i * n_modes + k)] = sw * v[j];
                }
            }
        }
        Some((r, jac))
    };
    let x0 = pack(model.template().coefficients(), thetas);
    let sol = lm.solve(residuals, x0)?;
    let (coef, mut polished) = unpack(&sol.x);
    let mut m = model.with_template(PolynomialTemplate::new(coef).ok()?);
    m = m.with_template(normalize_parts(&m, &weights, &mut polished).ok()?);
    let sse = weighted_sse(&m, curves, &polished);
    sse.is_finite().then_some((m, polished, sse))
}
