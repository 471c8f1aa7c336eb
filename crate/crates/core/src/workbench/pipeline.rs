//! Study configuration and the fit → decompose → bootstrap pipeline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decompose::{bootstrap, decompose, gamma_sweep, BootstrapSummary, DecomposeConfig, Decomposition};
use crate::error::{Result, TmvError};
use crate::fitting::{fit_all, FitConfig, FitResult, SampledCurve};
use crate::model::{ModeSpec, SamplingGrid};
use crate::workbench::simulate::SyntheticSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    /// Built-in mode names in parameter order.
    pub modes: Vec<String>,
    pub fit: FitConfig,
    pub decompose: DecomposeConfig,
    /// Bootstrap replicates; 0 disables the bootstrap.
    pub bootstrap: usize,
    pub sweep_gamma: Vec<f64>,
    pub seed: u64,
    /// Flag curves whose warped maximum is farther than this from the
    /// template's maximum. Defaults to the mean grid spacing.
    pub warp_band: Option<f64>,
    pub simulation: SyntheticSpec,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            modes: vec!["gen_spec".into(), "horizontal".into(), "vertical".into()],
            fit: FitConfig::default(),
            decompose: DecomposeConfig::default(),
            bootstrap: 0,
            sweep_gamma: Vec::new(),
            seed: 0,
            warp_band: None,
            simulation: SyntheticSpec::default(),
        }
    }
}

impl StudyConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn mode_specs(&self) -> Result<Vec<ModeSpec>> {
        if self.modes.is_empty() {
            return Err(TmvError::InvalidConfig("at least one mode is required".into()));
        }
        self.modes.iter().map(|m| ModeSpec::from_name(m)).collect()
    }

    pub fn warp_band_for(&self, grid: &SamplingGrid) -> f64 {
        self.warp_band.unwrap_or(grid.span() / (grid.len() - 1) as f64)
    }
}

/// Everything a report needs.
#[derive(Clone, Debug)]
pub struct StudyOutcome {
    pub fit: FitResult,
    pub decomposition: Decomposition,
    pub bootstrap: Option<BootstrapSummary>,
    pub gamma_sweep: Option<Vec<Decomposition>>,
}

pub fn run_fit(curves: &[SampledCurve], grid: &SamplingGrid, cfg: &StudyConfig) -> Result<FitResult> {
    let fit_cfg = FitConfig {
        seed: cfg.seed,
        ..cfg.fit.clone()
    };
    fit_all(curves, grid, cfg.mode_specs()?, &fit_cfg)
}

pub fn run_study(curves: &[SampledCurve], grid: &SamplingGrid, cfg: &StudyConfig) -> Result<StudyOutcome> {
    let fit = run_fit(curves, grid, cfg)?;
    let decomposition = decompose(&fit, &cfg.decompose)?;
    let bootstrap = match cfg.bootstrap {
        0 => None,
        b => Some(bootstrap(curves, grid, &cfg.mode_specs()?, &cfg.fit, &cfg.decompose, b, cfg.seed)?),
    };
    let gamma_sweep = if cfg.sweep_gamma.is_empty() {
        None
    } else {
        Some(gamma_sweep(&fit, &cfg.decompose, &cfg.sweep_gamma)?)
    };
    Ok(StudyOutcome {
        fit,
        decomposition,
        bootstrap,
        gamma_sweep,
    })
}
