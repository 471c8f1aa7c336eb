//! Metrics on the space of variation built from one-dimensional arc lengths.
//!
//! Modes are grouped into blocks by a [`SeparabilityDecl`]. A singleton block
//! is a mode whose arc lengths do not depend on the other parameters (equality
//! of paths); it contributes `C²`, the squared arc length along that mode.
//! A pair block `(α, β)` is handled with two charts anchored at an origin `O`:
//!
//! * the origin chart `L₁,O(θ) = (U, V)` measures signed arc length along the
//!   two mode curves that cross at `O`;
//! * the point chart `L₂,O(θ) = (P, Q)` measures signed arc length from the
//!   origin's parameter value along the mode curves through `θ` itself.
//!
//! `d₁,O` and `d₂,O` are Euclidean distances between chart images and the pair
//! contribution is the blend `γ·d₁,O² + (1 − γ)·d₂,O²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TmvError};
use crate::geometry::{arc_coordinate_unchecked, arcdist, arcdist_unchecked, ArcConfig};
use crate::model::{Model, ModeSpec, Theta};

/// Tolerance on arc lengths measured at different anchors of a separable mode.
pub const SEPARABILITY_ANCHOR_TOL: f64 = 1e-7;
/// Tolerance on cross-block mixed partial derivatives.
pub const SEPARABILITY_PARTIAL_TOL: f64 = 1e-6;

/// Origin, path weight and quadrature controls: everything needed for `d_V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub origin: Theta,
    pub gamma: f64,
    #[serde(default)]
    pub arc: ArcConfig,
}

impl MetricConfig {
    pub fn new(origin: Theta, gamma: f64) -> Self {
        Self {
            origin,
            gamma,
            arc: ArcConfig::default(),
        }
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(TmvError::InvalidConfig(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        self.arc.validate()?;
        model.check_theta(&self.origin)
    }
}

/// Partition of mode indices into additively separable blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparabilityDecl {
    blocks: Vec<Vec<usize>>,
}

impl SeparabilityDecl {
    pub fn new(blocks: Vec<Vec<usize>>, n_modes: usize) -> Result<Self> {
        let mut seen = vec![false; n_modes];
        for block in &blocks {
            if block.is_empty() {
                return Err(TmvError::InvalidConfig("empty separability block".into()));
            }
            for &k in block {
                if k >= n_modes {
                    return Err(TmvError::InvalidConfig(format!("mode index {k} out of range")));
                }
                if std::mem::replace(&mut seen[k], true) {
                    return Err(TmvError::InvalidConfig(format!("mode {k} appears in two blocks")));
                }
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(TmvError::InvalidConfig(format!("mode {k} is not in any block")));
        }
        Ok(Self { blocks })
    }

    /// Every mode in its own block.
    pub fn singletons(n_modes: usize) -> Self {
        Self {
            blocks: (0..n_modes).map(|k| vec![k]).collect(),
        }
    }

    /// Default grouping: the vertical shift is always its own block, the
    /// remaining (nonlinear) modes form one block.
    pub fn for_model(model: &Model) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut coupled = Vec::new();
        for (k, mode) in model.modes().iter().enumerate() {
            match mode {
                ModeSpec::VerticalShift => blocks.push(vec![k]),
                _ => coupled.push(k),
            }
        }
        match coupled.len() {
            0 => {}
            1 | 2 => blocks.push(coupled),
            n => return Err(TmvError::UnsupportedBlockSize { size: n }),
        }
        blocks.sort();
        Self::new(blocks, model.n_modes())
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, k: usize) -> Option<&[usize]> {
        self.blocks.iter().find(|b| b.contains(&k)).map(Vec::as_slice)
    }

    pub fn has_pair(&self) -> bool {
        self.blocks.iter().any(|b| b.len() == 2)
    }

    /// Checks numerically that cross-block mixed partials of `R` vanish at 20
    /// pseudo-random points in the bounding box of `around`.
    pub fn validate(&self, model: &Model, around: &[Theta]) -> Result<()> {
        let n = model.n_modes();
        if let Some(b) = self.blocks.iter().find(|b| b.len() > 2) {
            return Err(TmvError::UnsupportedBlockSize { size: b.len() });
        }
        if self.blocks.iter().map(Vec::len).sum::<usize>() != n {
            return Err(TmvError::InvalidConfig("declaration does not match the model".into()));
        }
        // Deserialized declarations bypass `new`.
        Self::new(self.blocks.clone(), n)?;
        let (lo, hi) = probe_box(model, around);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ea9_ab1e);
        for _ in 0..20 {
            let theta: Vec<f64> = lo.iter().zip(&hi).map(|(&l, &h)| rng.random_range(l..=h)).collect();
            for bi in 0..self.blocks.len() {
                for bj in 0..self.blocks.len() {
                    if bi == bj {
                        continue;
                    }
                    for &i in &self.blocks[bi] {
                        for &j in &self.blocks[bj] {
                            check_mixed_partial(model, &theta, i, j)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn probe_box(model: &Model, around: &[Theta]) -> (Vec<f64>, Vec<f64>) {
    let n = model.n_modes();
    let base = model.identity_theta();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for theta in around.iter().map(|t| t.as_slice()).chain(std::iter::once(base.as_slice())) {
        for k in 0..n {
            lo[k] = lo[k].min(theta[k]);
            hi[k] = hi[k].max(theta[k]);
        }
    }
    for k in 0..n {
        let pad = 0.1 * (hi[k] - lo[k]) + 0.1 * (1.0 + lo[k].abs().max(hi[k].abs()));
        lo[k] -= pad;
        hi[k] += pad;
        if model.width_index() == Some(k) {
            let min_w = around.iter().map(|t| t[k]).fold(1.0f64, f64::min);
            lo[k] = lo[k].max(0.5 * min_w);
        }
    }
    (lo, hi)
}

fn check_mixed_partial(model: &Model, theta: &[f64], i: usize, j: usize) -> Result<()> {
    let step = 1e-5 * theta[j].abs().max(1.0);
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    plus[j] += step;
    minus[j] -= step;
    let vp = model.velocity(&plus, i)?;
    let vm = model.velocity(&minus, i)?;
    let scale = vp.iter().chain(&vm).fold(1.0f64, |acc, v| acc.max(v.abs()));
    for (a, b) in vp.iter().zip(&vm) {
        let mixed = (a - b) / (2.0 * step);
        if mixed.abs() > SEPARABILITY_PARTIAL_TOL * scale {
            return Err(TmvError::NotSeparable {
                mode: model.modes()[i].name().to_string(),
                detail: format!(
                    "mixed partial with `{}` is {mixed:.3e} at {theta:?}",
                    model.modes()[j].name()
                ),
            });
        }
    }
    Ok(())
}

/// Arc length `C_{a,b}` along mode `k`, verified to be independent of the
/// other parameters at three anchors (the given one plus two pseudo-random
/// perturbations).
pub fn c_component(model: &Model, k: usize, a: f64, b: f64, fixed: &[f64], arc: &ArcConfig) -> Result<f64> {
    let reference = arcdist(model, k, a, b, fixed, arc)?;
    if a == b {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee ^ k as u64);
    for _ in 0..2 {
        let mut anchor = fixed.to_vec();
        for (j, value) in anchor.iter_mut().enumerate() {
            if j == k {
                continue;
            }
            if model.width_index() == Some(j) {
                *value *= rng.random_range(0.7..1.4);
            } else {
                *value += rng.random_range(-0.5..0.5) * (1.0 + value.abs());
            }
        }
        let other = arcdist_unchecked(model, k, a, b, &anchor, arc)?;
        if (other - reference).abs() > SEPARABILITY_ANCHOR_TOL * reference.max(1.0) {
            return Err(TmvError::NotSeparable {
                mode: model.modes()[k].name().to_string(),
                detail: format!("arc length {reference} at {fixed:?} but {other} at {anchor:?}"),
            });
        }
    }
    Ok(reference)
}

/// Pythagorean distance `√(Σ_k C²_k)` for a model whose blocks are all singletons.
pub fn dist_separable(
    model: &Model,
    theta1: &[f64],
    theta2: &[f64],
    decl: &SeparabilityDecl,
    arc: &ArcConfig,
) -> Result<f64> {
    model.check_theta(theta1)?;
    model.check_theta(theta2)?;
    if let Some(b) = decl.blocks().iter().find(|b| b.len() != 1) {
        return Err(TmvError::NotSeparable {
            mode: model.modes()[b[0]].name().to_string(),
            detail: "declared in a coupled block".into(),
        });
    }
    // Anchor at the lexicographically smaller point so the result is exactly symmetric.
    let anchor = if theta1.partial_cmp(theta2) == Some(std::cmp::Ordering::Greater) { theta2 } else { theta1 };
    let mut total = 0.0;
    for k in 0..model.n_modes() {
        let c = c_component(model, k, theta1[k], theta2[k], anchor, arc)?;
        total += c * c;
    }
    Ok(total.sqrt())
}

/// Chart coordinates of one parameter vector, laid out block by block:
/// a singleton contributes `[L]`, a pair contributes `[U, V, P, Q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub coords: Vec<f64>,
}

/// Linearizing charts for a model, a block declaration and a metric config.
#[derive(Clone, Debug)]
pub struct Chart<'a> {
    model: &'a Model,
    decl: &'a SeparabilityDecl,
    origin: Theta,
    gamma: f64,
    arc: ArcConfig,
    offsets: Vec<usize>,
}

impl<'a> Chart<'a> {
    pub fn new(model: &'a Model, decl: &'a SeparabilityDecl, cfg: &MetricConfig) -> Result<Self> {
        cfg.validate(model)?;
        let mut offsets = Vec::with_capacity(decl.blocks().len());
        let mut next = 0;
        for block in decl.blocks() {
            offsets.push(next);
            next += match block.len() {
                1 => 1,
                2 => 4,
                size => return Err(TmvError::UnsupportedBlockSize { size }),
            };
        }
        if decl.blocks().iter().map(Vec::len).sum::<usize>() != model.n_modes() {
            return Err(TmvError::InvalidConfig("declaration does not match the model".into()));
        }
        SeparabilityDecl::new(decl.blocks().to_vec(), model.n_modes())?;
        Ok(Self {
            model,
            decl,
            origin: cfg.origin.clone(),
            gamma: cfg.gamma,
            arc: cfg.arc,
            offsets,
        })
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn decl(&self) -> &SeparabilityDecl {
        self.decl
    }

    pub fn origin(&self) -> &Theta {
        &self.origin
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn arc(&self) -> &ArcConfig {
        &self.arc
    }

    pub fn dim(&self) -> usize {
        self.offsets.last().map_or(0, |&o| o + self.decl.blocks().last().map_or(0, |b| if b.len() == 1 { 1 } else { 4 }))
    }

    fn check_path_theta(&self, theta: &[f64]) -> Result<()> {
        self.model.check_theta(theta)
    }

    /// Coordinates of `theta` for a single block, written into `out`.
    pub(crate) fn embed_block_into(&self, block: usize, theta: &[f64], out: &mut [f64]) -> Result<()> {
        let origin = self.origin.as_slice();
        let ks = &self.decl.blocks()[block];
        match ks.as_slice() {
            [k] => {
                out[0] = arc_coordinate_unchecked(self.model, *k, theta[*k], origin[*k], origin, &self.arc)?;
            }
            [a, b] => {
                let (a, b) = (*a, *b);
                let mut fixed = origin.to_vec();
                out[0] = arc_coordinate_unchecked(self.model, a, theta[a], origin[a], &fixed, &self.arc)?;
                out[1] = arc_coordinate_unchecked(self.model, b, theta[b], origin[b], &fixed, &self.arc)?;
                fixed[b] = theta[b];
                out[2] = arc_coordinate_unchecked(self.model, a, theta[a], origin[a], &fixed, &self.arc)?;
                fixed[b] = origin[b];
                fixed[a] = theta[a];
                out[3] = arc_coordinate_unchecked(self.model, b, theta[b], origin[b], &fixed, &self.arc)?;
            }
            _ => unreachable!("block sizes validated on construction"),
        }
        Ok(())
    }

    pub fn block_width(&self, block: usize) -> usize {
        if self.decl.blocks()[block].len() == 1 {
            1
        } else {
            4
        }
    }

    pub fn block_offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    pub fn embed(&self, theta: &[f64]) -> Result<Embedding> {
        self.check_path_theta(theta)?;
        let mut coords = vec![0.0; self.dim()];
        for block in 0..self.decl.blocks().len() {
            let off = self.offsets[block];
            let width = self.block_width(block);
            self.embed_block_into(block, theta, &mut coords[off..off + width])?;
        }
        Ok(Embedding { coords })
    }

    /// Squared-distance contribution of each mode between two embedded points.
    /// Sums exactly to [`Chart::dist2_embedded`].
    pub fn mode_contributions(&self, e1: &Embedding, e2: &Embedding) -> Vec<f64> {
        let mut out = vec![0.0; self.model.n_modes()];
        for (block, ks) in self.decl.blocks().iter().enumerate() {
            let off = self.offsets[block];
            let d = |i: usize| e1.coords[off + i] - e2.coords[off + i];
            match ks.as_slice() {
                [k] => out[*k] = d(0) * d(0),
                [a, b] => {
                    out[*a] = self.gamma * d(0) * d(0) + (1.0 - self.gamma) * d(2) * d(2);
                    out[*b] = self.gamma * d(1) * d(1) + (1.0 - self.gamma) * d(3) * d(3);
                }
                _ => unreachable!(),
            }
        }
        out
    }

    pub fn dist2_embedded(&self, e1: &Embedding, e2: &Embedding) -> f64 {
        self.mode_contributions(e1, e2).iter().sum()
    }

    pub fn dist(&self, theta1: &[f64], theta2: &[f64]) -> Result<f64> {
        let e1 = self.embed(theta1)?;
        let e2 = self.embed(theta2)?;
        Ok(self.dist2_embedded(&e1, &e2).sqrt())
    }

    /// `(d₁,O, d₂,O)` on a pair block.
    pub fn pair_distances(&self, block: usize, theta1: &[f64], theta2: &[f64]) -> Result<(f64, f64)> {
        if self.decl.blocks()[block].len() != 2 {
            return Err(TmvError::InvalidConfig(format!("block {block} is not a pair")));
        }
        self.check_path_theta(theta1)?;
        self.check_path_theta(theta2)?;
        let mut c1 = [0.0; 4];
        let mut c2 = [0.0; 4];
        self.embed_block_into(block, theta1, &mut c1)?;
        self.embed_block_into(block, theta2, &mut c2)?;
        let d1 = (c1[0] - c2[0]).hypot(c1[1] - c2[1]);
        let d2 = (c1[2] - c2[2]).hypot(c1[3] - c2[3]);
        Ok((d1, d2))
    }
}

fn two_mode_pair(model: &Model) -> Result<SeparabilityDecl> {
    if model.n_modes() != 2 {
        return Err(TmvError::InvalidConfig(format!(
            "two-mode metric needs exactly two modes, model has {}",
            model.n_modes()
        )));
    }
    SeparabilityDecl::new(vec![vec![0, 1]], 2)
}

/// `d₁,O`: Euclidean distance between origin-chart images on a two-mode model.
pub fn d1(model: &Model, theta1: &[f64], theta2: &[f64], cfg: &MetricConfig) -> Result<f64> {
    let decl = two_mode_pair(model)?;
    Chart::new(model, &decl, cfg)?.pair_distances(0, theta1, theta2).map(|d| d.0)
}

/// `d₂,O`: Euclidean distance between point-chart images on a two-mode model.
/// A pseudo-metric: it can vanish for distinct points.
pub fn d2(model: &Model, theta1: &[f64], theta2: &[f64], cfg: &MetricConfig) -> Result<f64> {
    let decl = two_mode_pair(model)?;
    Chart::new(model, &decl, cfg)?.pair_distances(0, theta1, theta2).map(|d| d.1)
}

/// `d_{V,O,γ} = √(γ·d₁,O² + (1 − γ)·d₂,O²)` on a two-mode model.
pub fn dv(model: &Model, theta1: &[f64], theta2: &[f64], cfg: &MetricConfig) -> Result<f64> {
    let decl = two_mode_pair(model)?;
    let (a, b) = Chart::new(model, &decl, cfg)?.pair_distances(0, theta1, theta2)?;
    Ok((cfg.gamma * a * a + (1.0 - cfg.gamma) * b * b).sqrt())
}

/// Composite distance: singleton blocks contribute `C²` (measured directly,
/// with the independence check), pair blocks contribute `d_{V,O,γ}²`.
pub fn dist_composite(
    model: &Model,
    theta1: &[f64],
    theta2: &[f64],
    cfg: &MetricConfig,
    decl: &SeparabilityDecl,
) -> Result<f64> {
    let chart = Chart::new(model, decl, cfg)?;
    model.check_theta(theta1)?;
    model.check_theta(theta2)?;
    let mut total = 0.0;
    for (block, ks) in decl.blocks().iter().enumerate() {
        match ks.as_slice() {
            [k] => {
                let c = c_component(model, *k, theta1[*k], theta2[*k], &cfg.origin, &cfg.arc)?;
                total += c * c;
            }
            [_, _] => {
                let (a, b) = chart.pair_distances(block, theta1, theta2)?;
                total += cfg.gamma * a * a + (1.0 - cfg.gamma) * b * b;
            }
            _ => unreachable!(),
        }
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PolynomialTemplate, SamplingGrid};
    use approx::assert_relative_eq;

    fn parabola_model(modes: Vec<ModeSpec>) -> Model {
        Model::new(
            modes,
            PolynomialTemplate::new(vec![0.0, 0.0, -1.0]).unwrap(),
            SamplingGrid::new(vec![-1.0, 0.0, 1.0]).unwrap(),
        )
        .unwrap()
    }

    fn hshift_exact() -> f64 {
        let u = 3f64.sqrt();
        2.0 / u * (0.5 * u * 5f64.sqrt() + (u / 2f64.sqrt()).asinh())
    }

    #[test]
    fn c_component_examples() {
        let model = parabola_model(vec![ModeSpec::HorizontalShift, ModeSpec::VerticalShift]);
        let arc = ArcConfig::default();
        for anchor in [-3.0, 0.0, 5.0] {
            let c = c_component(&model, 1, 0.0, 2.0, &[anchor, 0.0], &arc).unwrap();
            assert_relative_eq!(c, 2.0 * 3f64.sqrt(), max_relative = 1e-14);
        }
        assert_eq!(c_component(&model, 1, 1.0, 1.0, &[0.0, 1.0], &arc).unwrap(), 0.0);
        let at0 = c_component(&model, 0, 0.0, 1.0, &[0.0, 0.0], &arc).unwrap();
        let at5 = c_component(&model, 0, 0.0, 1.0, &[0.0, 5.0], &arc).unwrap();
        assert_eq!(at0, at5);
    }

    #[test]
    fn c_component_detects_coupling() {
        let model = parabola_model(vec![ModeSpec::GeneralistSpecialist, ModeSpec::HorizontalShift]);
        let r = c_component(&model, 1, 0.0, 1.0, &[1.0, 0.0], &ArcConfig::default());
        assert!(matches!(r, Err(TmvError::NotSeparable { .. })));
    }

    #[test]
    fn separable_distance_example() {
        let model = parabola_model(vec![ModeSpec::HorizontalShift, ModeSpec::VerticalShift]);
        let decl = SeparabilityDecl::singletons(2);
        let d = dist_separable(&model, &[0.0, 0.0], &[1.0, 2.0], &decl, &ArcConfig::default()).unwrap();
        let expected = (hshift_exact().powi(2) + 12.0).sqrt();
        assert_relative_eq!(d, expected, max_relative = 1e-9);
        assert_relative_eq!(d, 4.8731, max_relative = 1e-4);
        let zero = dist_separable(&model, &[0.3, 0.1], &[0.3, 0.1], &decl, &ArcConfig::default()).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn decl_validation() {
        assert!(SeparabilityDecl::new(vec![vec![0], vec![0, 1]], 2).is_err());
        assert!(SeparabilityDecl::new(vec![vec![0]], 2).is_err());
        assert!(SeparabilityDecl::new(vec![vec![2]], 2).is_err());

        let sim = parabola_model(ModeSpec::shape_invariant());
        let decl = SeparabilityDecl::for_model(&sim).unwrap();
        assert_eq!(decl.blocks(), &[vec![0, 1], vec![2]]);
        decl.validate(&sim, &[]).unwrap();
        let bad = SeparabilityDecl::singletons(3);
        assert!(matches!(bad.validate(&sim, &[]), Err(TmvError::NotSeparable { .. })));
    }

    #[test]
    fn two_mode_metric_identities() {
        let model = parabola_model(vec![ModeSpec::GeneralistSpecialist, ModeSpec::HorizontalShift]);
        let cfg = MetricConfig::new(Theta::new(vec![1.1, 0.2]), 0.25);
        let x = [0.8, -0.4];
        let o = cfg.origin.clone();
        assert_eq!(d1(&model, &x, &x, &cfg).unwrap(), 0.0);
        assert_eq!(d2(&model, &x, &x, &cfg).unwrap(), 0.0);
        assert_eq!(dv(&model, &x, &x, &cfg).unwrap(), 0.0);

        // ‖L₁,O(x)‖ when the second point is the origin
        let arc = ArcConfig::default();
        let legs = (
            arcdist(&model, 0, x[0], o[0], &o, &arc).unwrap(),
            arcdist(&model, 1, x[1], o[1], &o, &arc).unwrap(),
        );
        assert_relative_eq!(d1(&model, &x, &o, &cfg).unwrap(), legs.0.hypot(legs.1), max_relative = 1e-12);
        // ‖L₂,O(x)‖ when the first point is the origin
        let legs2 = (
            arcdist(&model, 0, x[0], o[0], &[x[0], x[1]], &arc).unwrap(),
            arcdist(&model, 1, x[1], o[1], &[x[0], x[1]], &arc).unwrap(),
        );
        assert_relative_eq!(d2(&model, &o, &x, &cfg).unwrap(), legs2.0.hypot(legs2.1), max_relative = 1e-12);

        let y = [1.3, 0.5];
        let (a, b) = (d1(&model, &x, &y, &cfg).unwrap(), d2(&model, &x, &y, &cfg).unwrap());
        let v = dv(&model, &x, &y, &cfg).unwrap();
        assert_relative_eq!(v * v, 0.25 * a * a + 0.75 * b * b, max_relative = 1e-12);
    }

    #[test]
    fn composite_vertical_block() {
        let model = parabola_model(ModeSpec::shape_invariant());
        let decl = SeparabilityDecl::for_model(&model).unwrap();
        let cfg = MetricConfig::new(Theta::new(vec![1.0, 0.0, 0.0]), 0.5);
        let d = dist_composite(&model, &[1.2, 0.3, 0.0], &[1.2, 0.3, 2.0], &cfg, &decl).unwrap();
        assert_relative_eq!(d, 2.0 * 3f64.sqrt(), max_relative = 1e-13);
        let same = dist_composite(&model, &[1.2, 0.3, 0.5], &[1.2, 0.3, 0.5], &cfg, &decl).unwrap();
        assert_eq!(same, 0.0);

        let block_only = dv(
            &parabola_model(vec![ModeSpec::GeneralistSpecialist, ModeSpec::HorizontalShift]),
            &[1.2, 0.3],
            &[0.9, -0.2],
            &MetricConfig::new(Theta::new(vec![1.0, 0.0]), 0.5),
        )
        .unwrap();
        let d = dist_composite(&model, &[1.2, 0.3, 0.7], &[0.9, -0.2, 0.7], &cfg, &decl).unwrap();
        assert_relative_eq!(d, block_only, max_relative = 1e-13);
    }

    #[test]
    fn oversized_blocks_rejected() {
        let model = parabola_model(ModeSpec::shape_invariant());
        let decl = SeparabilityDecl::new(vec![vec![0, 1, 2]], 3).unwrap();
        let cfg = MetricConfig::new(model.identity_theta(), 0.5);
        let r = dist_composite(&model, &[1.0, 0.0, 0.0], &[1.1, 0.0, 0.0], &cfg, &decl);
        assert!(matches!(r, Err(TmvError::UnsupportedBlockSize { size: 3 })));
    }
}
