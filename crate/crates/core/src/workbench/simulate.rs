//! Synthetic studies drawn from known parameter laws, with the decomposition
//! of the noiseless points as an oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::decompose::{decompose_thetas, DecomposeConfig, Decomposition};
use crate::error::{Result, TmvError};
use crate::fitting::{normalize_parts, SampledCurve};
use crate::model::{ModeSpec, Model, PolynomialTemplate, SamplingGrid, Theta};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Law {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Law::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Law::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(TmvError::InvalidConfig(format!("invalid law {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Law::Uniform { lo, hi } if lo == hi => lo,
            Law::Uniform { lo, hi } => rng.random_range(lo..hi),
            Law::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub template: Vec<f64>,
    pub grid: Vec<f64>,
    /// Built-in mode names, in parameter order.
    pub modes: Vec<String>,
    /// One law per mode. Width draws that are not positive are redrawn.
    pub laws: Vec<Law>,
    /// Noise standard deviation as a fraction of the template's range over
    /// the sampling interval.
    pub noise_fraction: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            template: vec![1.0, 0.3, -0.6, -0.05, 0.04],
            grid: vec![-2.5, -1.5, -0.5, 0.5, 1.5, 2.5],
            modes: vec!["gen_spec".into(), "horizontal".into(), "vertical".into()],
            laws: vec![
                Law::Uniform { lo: 0.8, hi: 1.2 },
                Law::Normal { mean: 0.0, sd: 0.3 },
                Law::Normal { mean: 0.0, sd: 0.25 },
            ],
            noise_fraction: 0.02,
            n: 50,
            seed: 20240917,
        }
    }
}

impl SyntheticSpec {
    pub fn model(&self) -> Result<Model> {
        let modes = self.modes.iter().map(|m| ModeSpec::from_name(m)).collect::<Result<Vec<_>>>()?;
        Model::new(
            modes,
            PolynomialTemplate::new(self.template.clone())?,
            SamplingGrid::new(self.grid.clone())?,
        )
    }

    /// Absolute noise standard deviation.
    pub fn noise_sd(&self) -> Result<f64> {
        let template = PolynomialTemplate::new(self.template.clone())?;
        let grid = SamplingGrid::new(self.grid.clone())?;
        let (a, b) = (grid.points()[0], grid.points()[grid.len() - 1]);
        let (lo, hi) = (0..=1000)
            .map(|i| template.eval(a + (b - a) * i as f64 / 1000.0))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Ok(self.noise_fraction * (hi - lo))
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticStudy {
    pub grid: SamplingGrid,
    pub curves: Vec<SampledCurve>,
    /// Generating model with the template in the normalized gauge.
    pub truth: Model,
    pub thetas: Vec<Theta>,
    /// `Σ‖ε_i‖²`.
    pub noise_energy: f64,
    pub oracle: Decomposition,
}

/// Draw a study. The true parameters and template are moved to the same
/// normalized gauge the fit uses, so parameter-level comparisons are direct.
pub fn simulate(spec: &SyntheticSpec, decompose_cfg: &DecomposeConfig) -> Result<SyntheticStudy> {
    if spec.n == 0 {
        return Err(TmvError::InvalidConfig("synthetic study needs n >= 1".into()));
    }
    if spec.laws.len() != spec.modes.len() {
        return Err(TmvError::InvalidConfig("one law per mode is required".into()));
    }
    if spec.noise_fraction.is_nan() || spec.noise_fraction < 0.0 {
        return Err(TmvError::InvalidConfig("noise_fraction must be >= 0".into()));
    }
    for law in &spec.laws {
        law.validate()?;
    }
    let model = spec.model()?;
    let width = model.width_index();
    if let Some(k) = width {
        let positive_mass = match spec.laws[k] {
            Law::Uniform { hi, .. } => hi > 0.0,
            Law::Normal { mean, sd } => mean > 0.0 || sd > 0.0,
        };
        if !positive_mass {
            return Err(TmvError::InvalidConfig("width law has no positive support".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let theta = spec
            .laws
            .iter()
            .enumerate()
            .map(|(k, law)| loop {
                let v = law.sample(&mut rng);
                if width != Some(k) || v > 0.0 {
                    break v;
                }
            })
            .collect();
        raw.push(theta);
    }
    let template = normalize_parts(&model, &vec![1.0; spec.n], &mut raw)?;
    let truth = model.with_template(template);

    let sd = spec.noise_sd()?;
    let noise = Normal::new(0.0, sd).map_err(|e| TmvError::InvalidConfig(e.to_string()))?;
    let mut noise_energy = 0.0;
    let mut curves = Vec::with_capacity(spec.n);
    for (i, theta) in raw.iter().enumerate() {
        let mut z = truth.eval(theta)?;
        if sd > 0.0 {
            for v in &mut z {
                let e = noise.sample(&mut rng);
                noise_energy += e * e;
                *v += e;
            }
        }
        curves.push(SampledCurve::unweighted(format!("s{i:03}"), z)?);
    }
    let thetas: Vec<Theta> = raw.into_iter().map(Theta::new).collect();
    let oracle = decompose_thetas(&truth, &thetas, noise_energy, decompose_cfg)?;
    Ok(SyntheticStudy {
        grid: truth.grid().clone(),
        curves,
        truth,
        thetas,
        noise_energy,
        oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, noise_fraction: f64) -> SyntheticSpec {
        SyntheticSpec {
            n,
            noise_fraction,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn noiseless_curves_lie_on_the_model() {
        let study = simulate(&small(5, 0.0), &DecomposeConfig::default()).unwrap();
        assert_eq!(study.noise_energy, 0.0);
        for (c, t) in study.curves.iter().zip(&study.thetas) {
            assert_eq!(c.z, study.truth.eval(t).unwrap());
        }
    }

    #[test]
    fn single_curve_has_no_model_variation() {
        let study = simulate(&small(1, 0.02), &DecomposeConfig::default()).unwrap();
        assert_eq!(study.oracle.ssm_total, 0.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = simulate(&small(4, 0.02), &DecomposeConfig::default()).unwrap();
        let b = simulate(&small(4, 0.02), &DecomposeConfig::default()).unwrap();
        assert_eq!(a.curves, b.curves);
        assert_eq!(a.oracle, b.oracle);
    }
}
