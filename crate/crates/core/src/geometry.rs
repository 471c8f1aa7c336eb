//! Arc length along one-parameter mode curves of the space of variation.
//!
//! Holding every parameter but `θ_k` fixed traces a curve `θ_k ↦ R(θ, t)` in
//! observation space. Its length between two parameter values is the integral
//! of the speed `‖∂R/∂θ_k‖`, evaluated here by adaptive Simpson quadrature or
//! approximated by a polyline through the curve.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TmvError};
use crate::model::Model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ArcMethod {
    /// Adaptive Simpson quadrature of the speed.
    #[default]
    Quadrature,
    /// Sum of chord lengths over a uniform partition.
    Polyline,
}

/// Numerical-integration controls for arc lengths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArcConfig {
    pub quadrature_rel_tol: f64,
    pub quadrature_max_depth: u32,
    pub polyline_segments: usize,
    pub method: ArcMethod,
}

impl Default for ArcConfig {
    fn default() -> Self {
        Self {
            quadrature_rel_tol: 1e-9,
            quadrature_max_depth: 40,
            polyline_segments: 4096,
            method: ArcMethod::Quadrature,
        }
    }
}

impl ArcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quadrature_rel_tol.is_nan() || self.quadrature_rel_tol <= 0.0 {
            return Err(TmvError::InvalidConfig("quadrature_rel_tol must be > 0".into()));
        }
        if self.polyline_segments < 2 {
            return Err(TmvError::InvalidConfig("polyline_segments must be >= 2".into()));
        }
        Ok(())
    }
}

const INITIAL_PANELS: usize = 8;

/// Adaptive Simpson quadrature of `f` over `[a, b]` (`a ≤ b`) to relative
/// tolerance `rel_tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, max_depth: u32) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    debug_assert!(a < b);
    let h = (b - a) / INITIAL_PANELS as f64;
    let nodes: Vec<f64> = (0..=2 * INITIAL_PANELS)
        .map(|i| if i == 2 * INITIAL_PANELS { b } else { a + 0.5 * h * i as f64 })
        .collect();
    let values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();

    let mut panels = Vec::with_capacity(INITIAL_PANELS);
    let mut magnitude = 0.0;
    for p in 0..INITIAL_PANELS {
        let (i0, i1, i2) = (2 * p, 2 * p + 1, 2 * p + 2);
        let whole = (nodes[i2] - nodes[i0]) / 6.0 * (values[i0] + 4.0 * values[i1] + values[i2]);
        let abs = (nodes[i2] - nodes[i0]) / 6.0 * (values[i0].abs() + 4.0 * values[i1].abs() + values[i2].abs());
        magnitude += abs;
        panels.push((i0, i1, i2, whole));
    }
    let eps_total = (rel_tol * magnitude).max(f64::MIN_POSITIVE);

    let mut total = 0.0;
    for (i0, i1, i2, whole) in panels {
        let eps = eps_total * (nodes[i2] - nodes[i0]) / (b - a);
        total += simpson_step(
            &f,
            (nodes[i0], values[i0]),
            (nodes[i1], values[i1]),
            (nodes[i2], values[i2]),
            whole,
            eps,
            max_depth,
        )
        .map_err(|_| TmvError::NonConvergent { a, b, max_depth })?;
    }
    Ok(total)
}

fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    (a, fa): (f64, f64),
    (m, fm): (f64, f64),
    (b, fb): (f64, f64),
    whole: f64,
    eps: f64,
    depth: u32,
) -> std::result::Result<f64, ()> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps || lm <= a || rm >= b {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(());
    }
    Ok(simpson_step(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * eps, depth - 1)?
        + simpson_step(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * eps, depth - 1)?)
}

fn check_path(model: &Model, k: usize, a: f64, b: f64, fixed: &[f64]) -> Result<()> {
    model.check_mode(k)?;
    if !a.is_finite() || !b.is_finite() {
        return Err(TmvError::InvalidTheta(format!("non-finite path endpoints {a}, {b}")));
    }
    // Validate the fixed components; the k-th one is replaced along the path.
    let mut probe = fixed.to_vec();
    if probe.len() == model.n_modes() {
        probe[k] = a;
    }
    model.check_theta(&probe)?;
    if model.width_index() == Some(k) && b <= 0.0 {
        return Err(TmvError::InvalidTheta(format!("width path leaves w > 0 (endpoint {b})")));
    }
    Ok(())
}

/// Length of the mode-`k` curve between `θ_k = a` and `θ_k = b`, all other
/// components taken from `fixed`. Symmetric in `(a, b)`.
pub fn arcdist(model: &Model, k: usize, a: f64, b: f64, fixed: &[f64], cfg: &ArcConfig) -> Result<f64> {
    check_path(model, k, a, b, fixed)?;
    arcdist_unchecked(model, k, a, b, fixed, cfg)
}

pub(crate) fn arcdist_unchecked(model: &Model, k: usize, a: f64, b: f64, fixed: &[f64], cfg: &ArcConfig) -> Result<f64> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    match cfg.method {
        ArcMethod::Quadrature => adaptive_simpson(
            |x| model.speed(fixed, k, x),
            lo,
            hi,
            cfg.quadrature_rel_tol,
            cfg.quadrature_max_depth,
        ),
        ArcMethod::Polyline => Ok(polyline_length(model, k, lo, hi, fixed, cfg.polyline_segments.max(1))),
    }
}

/// Polyline approximation: sum of chord lengths over `n_segments` uniform
/// pieces of `[a, b]`. Never exceeds the true arc length; converges to it.
pub fn arcdist_polyline(model: &Model, k: usize, a: f64, b: f64, fixed: &[f64], n_segments: usize) -> Result<f64> {
    check_path(model, k, a, b, fixed)?;
    if n_segments == 0 {
        return Err(TmvError::InvalidConfig("n_segments must be >= 1".into()));
    }
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    Ok(polyline_length(model, k, lo, hi, fixed, n_segments))
}

fn polyline_length(model: &Model, k: usize, lo: f64, hi: f64, fixed: &[f64], n: usize) -> f64 {
    if lo == hi {
        return 0.0;
    }
    let d = model.grid().len();
    let mut prev = vec![0.0; d];
    let mut next = vec![0.0; d];
    model.image_into(fixed, Some((k, lo)), &mut prev);
    let step = (hi - lo) / n as f64;
    let mut total = 0.0;
    for s in 1..=n {
        let x = if s == n { hi } else { lo + step * s as f64 };
        model.image_into(fixed, Some((k, x)), &mut next);
        total += prev
            .iter()
            .zip(&next)
            .map(|(p, q)| (q - p) * (q - p))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut prev, &mut next);
    }
    total
}

/// Signed arc-length coordinate of `θ_k` relative to `origin_k` along mode `k`.
pub fn arc_coordinate(
    model: &Model,
    k: usize,
    theta_k: f64,
    origin_k: f64,
    fixed: &[f64],
    cfg: &ArcConfig,
) -> Result<f64> {
    check_path(model, k, origin_k, theta_k, fixed)?;
    arc_coordinate_unchecked(model, k, theta_k, origin_k, fixed, cfg)
}

#[inline]
pub(crate) fn arc_coordinate_unchecked(
    model: &Model,
    k: usize,
    theta_k: f64,
    origin_k: f64,
    fixed: &[f64],
    cfg: &ArcConfig,
) -> Result<f64> {
    if theta_k == origin_k {
        return Ok(0.0);
    }
    let length = arcdist_unchecked(model, k, origin_k, theta_k, fixed, cfg)?;
    Ok(if theta_k > origin_k { length } else { -length })
}
