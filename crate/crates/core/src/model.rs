//! Common-shape template, modes of variation and the regression surface
//! `R(θ, t) = w·z(w·(φ(p, t) − m)) + h`.
//!
//! Every built-in mode owns one parameter: the vertical shift `h`, the
//! horizontal shift `m` and the generalist-specialist width `w`. Modes that
//! are absent from a model take their identity value (`w = 1`, `m = h = 0`).
//! A custom mode supplies a time warp `φ(p, t)` applied to the sampling
//! points before the built-in warps; with no custom mode `φ(p, t) = t`.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TmvError};

/// Relative tolerance used when validating custom warp derivatives.
pub const CUSTOM_DERIVATIVE_RTOL: f64 = 1e-5;

/// Strictly increasing sampling design shared by every curve of a study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplingGrid {
    t: Vec<f64>,
}

impl SamplingGrid {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.len() < 3 {
            return Err(TmvError::InvalidGrid(format!(
                "need at least 3 sampling points, got {}",
                t.len()
            )));
        }
        if t.iter().any(|x| !x.is_finite()) {
            return Err(TmvError::InvalidGrid("non-finite sampling point".into()));
        }
        if let Some(w) = t.windows(2).find(|w| w[1] <= w[0]) {
            return Err(TmvError::InvalidGrid(format!(
                "sampling points must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { t })
    }

    pub fn points(&self) -> &[f64] {
        &self.t
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.t[self.t.len() - 1] - self.t[0]
    }
}

/// Dense polynomial `c₀ + c₁x + … + c_p x^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coefficients: Vec<f64>) -> Self {
        if coefficients.is_empty() {
            coefficients.push(0.0);
        }
        Self { coefficients }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Nominal degree (number of coefficients minus one).
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Horner evaluation.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x + c)
    }

    /// Value and first derivative in one Horner pass.
    #[inline]
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut slope = 0.0;
        for &c in self.coefficients.iter().rev() {
            slope = slope * x + value;
            value = value * x + c;
        }
        (value, slope)
    }

    /// Coefficients of `x ↦ p(c·x)`.
    pub fn scale_argument(&self, c: f64) -> Polynomial {
        let mut power = 1.0;
        let coefficients = self
            .coefficients
            .iter()
            .map(|&a| {
                let out = a * power;
                power *= c;
                out
            })
            .collect();
        Polynomial { coefficients }
    }

    /// Coefficients of `x ↦ p(x − μ)` (Taylor shift).
    pub fn shift_argument(&self, mu: f64) -> Polynomial {
        let n = self.coefficients.len();
        let mut out = vec![0.0; n];
        for (k, &a) in self.coefficients.iter().enumerate() {
            // a·(x − μ)^k = a·Σ_j C(k, j) x^j (−μ)^(k−j)
            let mut binom = 1.0;
            for (j, slot) in out.iter_mut().enumerate().take(k + 1) {
                if j > 0 {
                    binom = binom * (k + 1 - j) as f64 / j as f64;
                }
                *slot += a * binom * (-mu).powi((k - j) as i32);
            }
        }
        Polynomial { coefficients: out }
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        Polynomial {
            coefficients: self.coefficients.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Polynomial {
        let mut coefficients = self.coefficients.clone();
        coefficients[0] += c;
        Polynomial { coefficients }
    }
}

/// Polynomial common shape `z(·)`. Must be genuinely curved: degree ≥ 2 with a
/// nonzero coefficient of order two or higher.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolynomialTemplate {
    poly: Polynomial,
}

impl PolynomialTemplate {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() < 3 {
            return Err(TmvError::InvalidTemplate(format!(
                "degree must be at least 2, got {}",
                coefficients.len().saturating_sub(1)
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(TmvError::InvalidTemplate("non-finite coefficient".into()));
        }
        if coefficients[2..].iter().all(|&c| c == 0.0) {
            return Err(TmvError::InvalidTemplate(
                "all coefficients of order >= 2 are zero".into(),
            ));
        }
        Ok(Self {
            poly: Polynomial::new(coefficients),
        })
    }

    pub fn from_polynomial(poly: Polynomial) -> Result<Self> {
        Self::new(poly.coefficients)
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    pub fn coefficients(&self) -> &[f64] {
        self.poly.coefficients()
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.poly.eval(x)
    }

    #[inline]
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        self.poly.eval_with_derivative(x)
    }
}

/// Evaluate the template at `x`.
pub fn eval_template(template: &PolynomialTemplate, x: f64) -> f64 {
    template.eval(x)
}

/// A one-parameter time warp `φ(p, t)` with its exact parameter derivative.
pub trait TimeWarp: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn warp(&self, param: f64, t: f64) -> f64;
    fn dwarp_dparam(&self, param: f64, t: f64) -> f64;

    /// Parameter values at which the derivative is checked on construction.
    fn probe_params(&self) -> Vec<f64> {
        vec![-1.0, -0.5, 0.0, 0.5, 1.0]
    }
}

/// Shared handle to a user-supplied warp.
#[derive(Clone, Debug)]
pub struct CustomWarp(pub Arc<dyn TimeWarp>);

impl CustomWarp {
    pub fn new<W: TimeWarp + 'static>(warp: W) -> Self {
        Self(Arc::new(warp))
    }
}

/// Horizontal shift on a rescaled parameter: `φ(p, t) = t − scale·p`.
#[derive(Clone, Debug)]
pub struct ScaledShiftWarp {
    pub scale: f64,
    pub name: String,
}

impl TimeWarp for ScaledShiftWarp {
    fn name(&self) -> &str {
        &self.name
    }

    fn warp(&self, param: f64, t: f64) -> f64 {
        t - self.scale * param
    }

    fn dwarp_dparam(&self, _param: f64, _t: f64) -> f64 {
        -self.scale
    }
}

#[derive(Clone, Debug)]
pub enum ModeSpec {
    VerticalShift,
    HorizontalShift,
    GeneralistSpecialist,
    Custom(CustomWarp),
}

impl ModeSpec {
    pub fn name(&self) -> &str {
        match self {
            ModeSpec::VerticalShift => "vertical",
            ModeSpec::HorizontalShift => "horizontal",
            ModeSpec::GeneralistSpecialist => "gen_spec",
            ModeSpec::Custom(w) => w.0.name(),
        }
    }

    /// Built-in mode by its report name (`vertical`, `horizontal`, `gen_spec`).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "vertical" | "h" => Ok(ModeSpec::VerticalShift),
            "horizontal" | "m" => Ok(ModeSpec::HorizontalShift),
            "gen_spec" | "w" => Ok(ModeSpec::GeneralistSpecialist),
            other => Err(TmvError::InvalidMode(format!("unknown mode `{other}`"))),
        }
    }

    /// The three-mode shape invariant model `(w, m, h)`.
    pub fn shape_invariant() -> Vec<ModeSpec> {
        vec![
            ModeSpec::GeneralistSpecialist,
            ModeSpec::HorizontalShift,
            ModeSpec::VerticalShift,
        ]
    }

    fn identity_value(&self) -> f64 {
        match self {
            ModeSpec::GeneralistSpecialist => 1.0,
            _ => 0.0,
        }
    }
}

/// Parameter vector, ordered like the model's mode list.
#[derive(Clone, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Theta(Vec<f64>);

impl Theta {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Copy with component `k` replaced.
    pub fn with(&self, k: usize, value: f64) -> Theta {
        let mut v = self.0.clone();
        v[k] = value;
        Theta(v)
    }
}

impl Deref for Theta {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Theta {
    fn from(v: Vec<f64>) -> Self {
        Theta(v)
    }
}

/// A point of the space of variation with its cached image `R(θ, t)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifoldPoint {
    pub theta: Theta,
    pub image: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default)]
struct Roles {
    w: Option<usize>,
    m: Option<usize>,
    h: Option<usize>,
    custom: Option<usize>,
}

#[derive(Clone, Copy)]
struct Parts {
    w: f64,
    m: f64,
    h: f64,
    p: f64,
}

/// Template + modes + sampling grid: everything needed to evaluate `R(θ, t)`.
#[derive(Clone, Debug)]
pub struct Model {
    modes: Vec<ModeSpec>,
    template: PolynomialTemplate,
    grid: SamplingGrid,
    roles: Roles,
}

impl Model {
    pub fn new(modes: Vec<ModeSpec>, template: PolynomialTemplate, grid: SamplingGrid) -> Result<Self> {
        if modes.is_empty() {
            return Err(TmvError::InvalidMode("at least one mode is required".into()));
        }
        let mut roles = Roles::default();
        for (k, mode) in modes.iter().enumerate() {
            let slot = match mode {
                ModeSpec::GeneralistSpecialist => &mut roles.w,
                ModeSpec::HorizontalShift => &mut roles.m,
                ModeSpec::VerticalShift => &mut roles.h,
                ModeSpec::Custom(warp) => {
                    validate_warp(warp.0.as_ref(), grid.points())?;
                    &mut roles.custom
                }
            };
            if slot.is_some() {
                return Err(TmvError::InvalidMode(format!(
                    "mode `{}` appears more than once (at most one custom mode is allowed)",
                    mode.name()
                )));
            }
            *slot = Some(k);
        }
        Ok(Self {
            modes,
            template,
            grid,
            roles,
        })
    }

    /// Same modes and grid, different template.
    pub fn with_template(&self, template: PolynomialTemplate) -> Model {
        Model {
            template,
            ..self.clone()
        }
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn mode_names(&self) -> Vec<String> {
        self.modes.iter().map(|m| m.name().to_string()).collect()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn template(&self) -> &PolynomialTemplate {
        &self.template
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn width_index(&self) -> Option<usize> {
        self.roles.w
    }

    pub fn location_index(&self) -> Option<usize> {
        self.roles.m
    }

    pub fn height_index(&self) -> Option<usize> {
        self.roles.h
    }

    pub fn custom_index(&self) -> Option<usize> {
        self.roles.custom
    }

    /// The parameter vector at which every mode is the identity.
    pub fn identity_theta(&self) -> Theta {
        Theta(self.modes.iter().map(ModeSpec::identity_value).collect())
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.modes.len() {
            return Err(TmvError::InvalidTheta(format!(
                "expected {} components, got {}",
                self.modes.len(),
                theta.len()
            )));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(TmvError::InvalidTheta(format!("non-finite component in {theta:?}")));
        }
        if let Some(k) = self.roles.w {
            if theta[k] <= 0.0 {
                return Err(TmvError::InvalidTheta(format!(
                    "width parameter must be positive, got {}",
                    theta[k]
                )));
            }
        }
        Ok(())
    }

    #[inline]
    fn parts(&self, theta: &[f64], over: Option<(usize, f64)>) -> Parts {
        let get = |slot: Option<usize>, default: f64| match slot {
            Some(k) => match over {
                Some((j, x)) if j == k => x,
                _ => theta[k],
            },
            None => default,
        };
        Parts {
            w: get(self.roles.w, 1.0),
            m: get(self.roles.m, 0.0),
            h: get(self.roles.h, 0.0),
            p: get(self.roles.custom, 0.0),
        }
    }

    #[inline]
    fn warped_time(&self, parts: &Parts, t: f64) -> f64 {
        match self.roles.custom {
            Some(k) => match &self.modes[k] {
                ModeSpec::Custom(warp) => warp.0.warp(parts.p, t),
                _ => unreachable!(),
            },
            None => t,
        }
    }

    #[inline]
    fn warp_derivative(&self, parts: &Parts, t: f64) -> f64 {
        match self.roles.custom {
            Some(k) => match &self.modes[k] {
                ModeSpec::Custom(warp) => warp.0.dwarp_dparam(parts.p, t),
                _ => unreachable!(),
            },
            None => 0.0,
        }
    }

    /// `R(θ, t_j)` for every grid point.
    pub fn eval(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let mut out = vec![0.0; self.grid.len()];
        self.image_into(theta, None, &mut out);
        Ok(out)
    }

    /// `R(θ, t)` at arbitrary points `ts` (not necessarily the grid).
    pub fn eval_at(&self, theta: &[f64], ts: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        let parts = self.parts(theta, None);
        Ok(ts
            .iter()
            .map(|&t| {
                let s = self.warped_time(&parts, t);
                parts.w * self.template.eval(parts.w * (s - parts.m)) + parts.h
            })
            .collect())
    }

    /// Unchecked evaluation, optionally overriding one component.
    #[inline]
    pub(crate) fn image_into(&self, theta: &[f64], over: Option<(usize, f64)>, out: &mut [f64]) {
        let parts = self.parts(theta, over);
        for (slot, &t) in out.iter_mut().zip(self.grid.points()) {
            let s = self.warped_time(&parts, t);
            *slot = parts.w * self.template.eval(parts.w * (s - parts.m)) + parts.h;
        }
    }

    /// `∂R(θ, t_j)/∂θ_k` for every grid point.
    pub fn velocity(&self, theta: &[f64], k: usize) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.check_mode(k)?;
        let parts = self.parts(theta, None);
        Ok(self
            .grid
            .points()
            .iter()
            .map(|&t| self.velocity_at(&parts, k, t))
            .collect())
    }

    pub(crate) fn check_mode(&self, k: usize) -> Result<()> {
        if k >= self.modes.len() {
            return Err(TmvError::InvalidMode(format!(
                "mode index {k} out of range for {} modes",
                self.modes.len()
            )));
        }
        Ok(())
    }

    #[inline]
    fn velocity_at(&self, parts: &Parts, k: usize, t: f64) -> f64 {
        match &self.modes[k] {
            ModeSpec::VerticalShift => 1.0,
            ModeSpec::HorizontalShift => {
                let s = self.warped_time(parts, t);
                let (_, dz) = self.template.eval_with_derivative(parts.w * (s - parts.m));
                -parts.w * parts.w * dz
            }
            ModeSpec::GeneralistSpecialist => {
                let s = self.warped_time(parts, t);
                let (z, dz) = self.template.eval_with_derivative(parts.w * (s - parts.m));
                z + parts.w * dz * (s - parts.m)
            }
            ModeSpec::Custom(_) => {
                let s = self.warped_time(parts, t);
                let (_, dz) = self.template.eval_with_derivative(parts.w * (s - parts.m));
                parts.w * parts.w * dz * self.warp_derivative(parts, t)
            }
        }
    }

    /// Speed `‖∂R/∂θ_k‖` at θ with `θ_k` replaced by `x`. Unchecked.
    #[inline]
    pub(crate) fn speed(&self, theta: &[f64], k: usize, x: f64) -> f64 {
        let parts = self.parts(theta, Some((k, x)));
        self.grid
            .points()
            .iter()
            .map(|&t| {
                let v = self.velocity_at(&parts, k, t);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Warped curve diagnostic: `((φ(p, t) − m)·w, (z − h)/w)`. Noiseless model
    /// curves land exactly on the template.
    pub fn warp_curve(&self, z: &[f64], theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_theta(theta)?;
        if z.len() != self.grid.len() {
            return Err(TmvError::GridMismatch(format!(
                "curve has {} values, grid has {}",
                z.len(),
                self.grid.len()
            )));
        }
        let parts = self.parts(theta, None);
        let warped_t = self
            .grid
            .points()
            .iter()
            .map(|&t| (self.warped_time(&parts, t) - parts.m) * parts.w)
            .collect();
        let warped_z = z.iter().map(|&v| (v - parts.h) / parts.w).collect();
        Ok((warped_t, warped_z))
    }

    pub fn point(&self, theta: Theta) -> Result<ManifoldPoint> {
        let image = self.eval(&theta)?;
        Ok(ManifoldPoint { theta, image })
    }
}

fn validate_warp(warp: &dyn TimeWarp, grid: &[f64]) -> Result<()> {
    for p in warp.probe_params() {
        let step = 1e-6 * p.abs().max(1.0);
        for &t in grid {
            let analytic = warp.dwarp_dparam(p, t);
            let numeric = (warp.warp(p + step, t) - warp.warp(p - step, t)) / (2.0 * step);
            let scale = analytic.abs().max(numeric.abs()).max(1e-3);
            if !analytic.is_finite() || (analytic - numeric).abs() > CUSTOM_DERIVATIVE_RTOL * scale {
                return Err(TmvError::InvalidDerivative {
                    mode: warp.name().to_string(),
                    param: p,
                    t,
                    analytic,
                    numeric,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn parabola() -> PolynomialTemplate {
        PolynomialTemplate::new(vec![0.0, 0.0, -1.0]).unwrap()
    }

    fn grid3() -> SamplingGrid {
        SamplingGrid::new(vec![-1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn horner_examples() {
        assert_eq!(eval_template(&parabola(), 2.0), -4.0);
        assert_eq!(Polynomial::new(vec![5.0]).eval(123.0), 5.0);
        let fitted = PolynomialTemplate::new(vec![-4.92e-5, -2.41e-3, -0.032, 0.0, 2.19]).unwrap();
        assert_eq!(fitted.eval(0.0), -4.92e-5);
    }

    #[test]
    fn grid_validation() {
        assert!(SamplingGrid::new(vec![0.0, 1.0]).is_err());
        assert!(SamplingGrid::new(vec![0.0, 2.0, 1.0]).is_err());
        assert!(SamplingGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(SamplingGrid::new(vec![0.0, 1.0, 2.0]).is_ok());
    }

    #[test]
    fn template_validation() {
        assert!(PolynomialTemplate::new(vec![1.0, 2.0]).is_err());
        assert!(PolynomialTemplate::new(vec![1.0, 2.0, 0.0, 0.0]).is_err());
        assert!(PolynomialTemplate::new(vec![1.0, 2.0, 0.0, 1e-9]).is_ok());
    }

    #[test]
    fn eval_model_examples() {
        let model = Model::new(ModeSpec::shape_invariant(), parabola(), grid3()).unwrap();
        assert_eq!(model.eval(&[1.0, 0.0, 0.0]).unwrap(), vec![-1.0, 0.0, -1.0]);
        assert_eq!(model.eval(&[1.0, 0.0, 2.0]).unwrap(), vec![1.0, 2.0, 1.0]);
        assert_eq!(model.eval(&[2.0, 0.0, 0.0]).unwrap(), vec![-8.0, 0.0, -8.0]);
        assert!(model.eval(&[0.0, 0.0, 0.0]).is_err());
        assert!(model.eval(&[-1.0, 0.0, 0.0]).is_err());
        assert!(model.eval(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn velocity_examples() {
        let model = Model::new(ModeSpec::shape_invariant(), parabola(), grid3()).unwrap();
        assert_eq!(model.velocity(&[1.3, 0.4, -2.0], 2).unwrap(), vec![1.0; 3]);
        assert_eq!(model.velocity(&[1.0, 0.0, 0.0], 1).unwrap(), vec![-2.0, 0.0, 2.0]);
    }

    #[test]
    fn warp_curve_examples() {
        let model = Model::new(ModeSpec::shape_invariant(), parabola(), grid3()).unwrap();
        let z = vec![0.3, -0.1, 2.0];
        let (wt, wz) = model.warp_curve(&z, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(wt, model.grid().points());
        assert_eq!(wz, z);

        let (_, wz) = model.warp_curve(&[1.0, 2.0, 1.0], &[1.0, 0.0, 2.0]).unwrap();
        assert_eq!(wz, vec![-1.0, 0.0, -1.0]);

        let theta = [2.0, 1.0, 3.0];
        let curve = model.eval(&theta).unwrap();
        let (wt, wz) = model.warp_curve(&curve, &theta).unwrap();
        for (x, y) in wt.iter().zip(&wz) {
            assert_abs_diff_eq!(*y, model.template().eval(*x), epsilon = 1e-12);
        }
    }

    #[test]
    fn polynomial_transforms() {
        let p = Polynomial::new(vec![0.5, -1.0, 0.25, 2.0, -0.3]);
        let shifted = p.shift_argument(0.7);
        let scaled = p.scale_argument(1.9);
        for &x in &[-2.0, -0.3, 0.0, 1.1, 2.5] {
            assert_abs_diff_eq!(shifted.eval(x), p.eval(x - 0.7), epsilon = 1e-12);
            assert_abs_diff_eq!(scaled.eval(x), p.eval(1.9 * x), epsilon = 1e-11);
        }
        let (v, d) = p.eval_with_derivative(1.3);
        assert_abs_diff_eq!(v, p.eval(1.3), epsilon = 1e-14);
        let fd = (p.eval(1.3 + 1e-6) - p.eval(1.3 - 1e-6)) / 2e-6;
        assert_abs_diff_eq!(d, fd, epsilon = 1e-7);
    }

    #[derive(Debug)]
    struct BadWarp;

    impl TimeWarp for BadWarp {
        fn name(&self) -> &str {
            "bad"
        }
        fn warp(&self, p: f64, t: f64) -> f64 {
            t - p * p
        }
        fn dwarp_dparam(&self, _p: f64, _t: f64) -> f64 {
            -1.0
        }
    }

    #[test]
    fn custom_derivative_is_validated() {
        let bad = Model::new(vec![ModeSpec::Custom(CustomWarp::new(BadWarp))], parabola(), grid3());
        assert!(matches!(bad, Err(TmvError::InvalidDerivative { .. })));

        let good = ScaledShiftWarp {
            scale: 2.0,
            name: "half_shift".into(),
        };
        let model = Model::new(
            vec![ModeSpec::Custom(CustomWarp::new(good)), ModeSpec::VerticalShift],
            parabola(),
            grid3(),
        )
        .unwrap();
        // p = 0.5 is the same curve as m = 1
        let reference = Model::new(
            vec![ModeSpec::HorizontalShift, ModeSpec::VerticalShift],
            parabola(),
            grid3(),
        )
        .unwrap();
        assert_eq!(model.eval(&[0.5, 0.2]).unwrap(), reference.eval(&[1.0, 0.2]).unwrap());
    }

    #[test]
    fn duplicate_modes_rejected() {
        let modes = vec![ModeSpec::VerticalShift, ModeSpec::VerticalShift];
        assert!(Model::new(modes, parabola(), grid3()).is_err());
        assert!(Model::new(vec![], parabola(), grid3()).is_err());
    }
}
