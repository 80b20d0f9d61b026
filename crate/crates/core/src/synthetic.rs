//! Bounded, nonatomic, centered test processes with known covariance, and
//! regression responses with bounded noise.
//!
//! `X = sum_j sqrt(lambda_j) xi_j e_j` with `e_j` the coordinate axes and
//! `xi_j` i.i.d. with mean 0 and variance 1, so the covariance is diagonal
//! with exactly the configured spectrum.
//!
//! Random streams are derived from a 64-bit seed as
//! `ChaCha8Rng::seed_from_u64(seed ^ replication)` with stream id
//! `(purpose << 48) | index`; see [`derived_rng`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::RegressionSample;
use crate::hilbert::HilbertVector;
use crate::quadrature::adaptive_simpson;
use crate::spectral::{Projector, SpectralDecomposition, SymmetricOperator};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Variance of `eps + U` with `eps = +-1` and `U ~ U[-1/2, 1/2]`.
const SMOOTHED_RADEMACHER_VAR: f64 = 13.0 / 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientLaw {
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    UniformSym,
    /// `(eps + U) / sqrt(13/12)`: a symmetric two-piece uniform with a hole
    /// around 0.
    RademacherSmoothed,
}

impl CoefficientLaw {
    /// Disjoint `(lo, hi, weight)` pieces of the standardized coefficient density.
    pub fn pieces(self) -> Vec<(f64, f64, f64)> {
        match self {
            CoefficientLaw::UniformSym => vec![(-SQRT_3, SQRT_3, 1.0)],
            CoefficientLaw::RademacherSmoothed => {
                let s = SMOOTHED_RADEMACHER_VAR.sqrt();
                vec![(-1.5 / s, -0.5 / s, 0.5), (0.5 / s, 1.5 / s, 0.5)]
            }
        }
    }

    pub fn support_halfwidth(self) -> f64 {
        match self {
            CoefficientLaw::UniformSym => SQRT_3,
            CoefficientLaw::RademacherSmoothed => 1.5 / SMOOTHED_RADEMACHER_VAR.sqrt(),
        }
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            CoefficientLaw::UniformSym => SQRT_3 * (2.0 * rng.random::<f64>() - 1.0),
            CoefficientLaw::RademacherSmoothed => {
                let eps = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
                (eps + rng.random::<f64>() - 0.5) / SMOOTHED_RADEMACHER_VAR.sqrt()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub dim: usize,
    pub spectrum: Vec<f64>,
    pub coefficient_law: CoefficientLaw,
    pub seed: u64,
}

impl ProcessSpec {
    pub fn new(
        dim: usize,
        spectrum: Vec<f64>,
        coefficient_law: CoefficientLaw,
        seed: u64,
    ) -> Result<Self> {
        let spec = Self {
            dim,
            spectrum,
            coefficient_law,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `lambda_j = ratio^(j-1)`.
    pub fn geometric(
        dim: usize,
        ratio: f64,
        coefficient_law: CoefficientLaw,
        seed: u64,
    ) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "geometric ratio {ratio} must lie in (0, 1)"
            )));
        }
        let spectrum = (0..dim).map(|j| ratio.powi(j as i32)).collect();
        Self::new(dim, spectrum, coefficient_law, seed)
    }

    /// Checks the length, positivity and strict decrease of the spectrum,
    /// naming the first offending index.
    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(Error::AmbientTooSmall(self.dim));
        }
        if self.spectrum.len() != self.dim {
            return Err(Error::SpectrumLength {
                expected: self.dim,
                found: self.spectrum.len(),
            });
        }
        for (index, &l) in self.spectrum.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::InvalidSpectrum { index });
            }
            if index > 0 && !(l < self.spectrum[index - 1]) {
                return Err(Error::InvalidSpectrum { index });
            }
        }
        Ok(())
    }

    /// Almost-sure bound on `||X||`.
    pub fn support_bound(&self) -> f64 {
        let b = self.coefficient_law.support_halfwidth();
        self.spectrum.iter().map(|l| b * l.sqrt()).sum()
    }

    /// Half-widths of the first `d` coordinates' supports.
    pub fn projected_halfwidths(&self, d: usize) -> Vec<f64> {
        let b = self.coefficient_law.support_halfwidth();
        self.spectrum[..d].iter().map(|l| b * l.sqrt()).collect()
    }

    pub fn covariance(&self) -> SymmetricOperator {
        SymmetricOperator::from_diagonal(&self.spectrum)
    }

    /// Exact eigenstructure: the spectrum with coordinate-axis eigenvectors.
    pub fn true_decomposition(&self) -> Result<SpectralDecomposition> {
        SpectralDecomposition::from_diagonal(&self.spectrum)
    }

    pub fn true_projector(&self, d: usize) -> Result<Projector> {
        Projector::coordinate(self.dim, d)
    }

    pub fn projected_law(&self, d: usize) -> Result<ProjectedLaw> {
        if d == 0 || d > self.dim {
            return Err(Error::InvalidRank {
                rank: d,
                dim: self.dim,
            });
        }
        let pieces = self.coefficient_law.pieces();
        let coords = self.spectrum[..d]
            .iter()
            .map(|l| {
                let s = l.sqrt();
                pieces.iter().map(|&(a, b, w)| (s * a, s * b, w)).collect()
            })
            .collect();
        Ok(ProjectedLaw { coords })
    }
}

/// Purposes that index independent random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Data = 1,
    Noise = 2,
    Anchors = 3,
    HeldOut = 4,
}

/// Replication index reserved for run-level (not per-replication) streams.
pub const RUN_LEVEL: u64 = u64::MAX;

pub fn derived_rng(seed: u64, replication: u64, purpose: StreamPurpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ replication);
    rng.set_stream(((purpose as u64) << 48) | index);
    rng
}

/// `n` draws using the spec's own seed.
pub fn generate_process(spec: &ProcessSpec, n: usize) -> Result<Vec<HilbertVector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    generate_process_with(spec, n, &mut rng)
}

pub fn generate_process_with<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    n: usize,
    rng: &mut R,
) -> Result<Vec<HilbertVector>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfig(
            "sample size must be at least 1".into(),
        ));
    }
    let scales: Vec<f64> = spec.spectrum.iter().map(|l| l.sqrt()).collect();
    let law = spec.coefficient_law;
    Ok((0..n)
        .map(|_| HilbertVector::from_raw(scales.iter().map(|s| s * law.draw(rng)).collect()))
        .collect())
}

/// Law of the first `D` coordinates: a product of piecewise-uniform
/// densities, i.e. a mixture of axis-aligned boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedLaw {
    // per coordinate, disjoint (lo, hi, weight) pieces
    coords: Vec<Vec<(f64, f64, f64)>>,
}

impl ProjectedLaw {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn density(&self, z: &[f64]) -> f64 {
        self.coords
            .iter()
            .zip(z)
            .map(|(pieces, &t)| {
                pieces
                    .iter()
                    .filter(|(a, b, _)| t >= *a && t <= *b)
                    .map(|(a, b, w)| w / (b - a))
                    .sum::<f64>()
            })
            .product()
    }

    /// `int f^2`, which is also the anchor-averaged density `E f(Z)`.
    pub fn mean_density_sq(&self) -> f64 {
        self.coords
            .iter()
            .map(|pieces| pieces.iter().map(|(a, b, w)| w * w / (b - a)).sum::<f64>())
            .product()
    }

    /// `P(||Z - center|| <= h)` for `Z` with this law.
    pub fn small_ball_probability(&self, center: &[f64], h: f64) -> Result<f64> {
        if center.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: center.len(),
            });
        }
        if !(h >= 0.0) {
            return Err(Error::NegativeArgument(h));
        }
        let d = self.dim();
        let mut total = 0.0;
        let mut idx = vec![0usize; d];
        let (mut lo, mut hi) = (vec![0.0; d], vec![0.0; d]);
        loop {
            let mut weight = 1.0;
            let mut volume = 1.0;
            for j in 0..d {
                let (a, b, w) = self.coords[j][idx[j]];
                lo[j] = a;
                hi[j] = b;
                weight *= w;
                volume *= b - a;
            }
            total += weight * ball_box_volume(center, h, &lo, &hi) / volume;
            // odometer over the piece combinations
            let mut j = 0;
            while j < d {
                idx[j] += 1;
                if idx[j] < self.coords[j].len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == d {
                break;
            }
        }
        Ok(total.min(1.0))
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Volume of the intersection of the closed ball `B(c, r)` with the box
/// `[lo, hi]`.
pub fn ball_box_volume(c: &[f64], r: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let d = c.len();
    ball_box(
        c,
        r,
        lo,
        hi,
        1e-11 * r.powi(d as i32).max(f64::MIN_POSITIVE),
    )
}

fn ball_box(c: &[f64], r: f64, lo: &[f64], hi: &[f64], tol: f64) -> f64 {
    let d = c.len();
    if r <= 0.0 {
        return 0.0;
    }
    let mut gap_sq = 0.0;
    let mut far_sq = 0.0;
    let mut inside = true;
    for j in 0..d {
        let below = (lo[j] - c[j]).max(0.0);
        let above = (c[j] - hi[j]).max(0.0);
        gap_sq += (below + above).powi(2);
        far_sq += (c[j] - lo[j]).abs().max((hi[j] - c[j]).abs()).powi(2);
        inside &= c[j] - r >= lo[j] && c[j] + r <= hi[j];
    }
    if gap_sq >= r * r {
        return 0.0;
    }
    if inside {
        return unit_ball_volume(d) * r.powi(d as i32);
    }
    if far_sq <= r * r {
        return lo.iter().zip(hi).map(|(a, b)| b - a).product();
    }
    if d == 1 {
        return ((c[0] + r).min(hi[0]) - (c[0] - r).max(lo[0])).max(0.0);
    }
    // slice along the first axis with t = c0 + r sin(theta)
    let t0 = ((lo[0] - c[0]) / r).clamp(-1.0, 1.0).asin();
    let t1 = ((hi[0] - c[0]) / r).clamp(-1.0, 1.0).asin();
    let inner_tol = tol / (PI * r);
    let integrand = |theta: f64| {
        let rc = r * theta.cos();
        rc * ball_box(&c[1..], rc, &lo[1..], &hi[1..], inner_tol)
    };
    const PIECES: usize = 8;
    let step = (t1 - t0) / PIECES as f64;
    (0..PIECES)
        .map(|k| {
            let a = t0 + k as f64 * step;
            let b = if k + 1 == PIECES { t1 } else { a + step };
            adaptive_simpson(&integrand, a, b, tol / PIECES as f64)
        })
        .sum()
}

/// Regression target as a function of the projected coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetFunction {
    /// `1 + sin z1 + z2^2 / 4`.
    SinQuadratic,
    Constant {
        value: f64,
    },
    Linear {
        coefficients: Vec<f64>,
    },
}

impl TargetFunction {
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            TargetFunction::SinQuadratic => 1.0 + z[0].sin() + 0.25 * z[1] * z[1],
            TargetFunction::Constant { value } => *value,
            TargetFunction::Linear { coefficients } => {
                coefficients.iter().zip(z).map(|(a, b)| a * b).sum()
            }
        }
    }

    /// Smallest number of projected coordinates the target reads.
    pub fn min_dim(&self) -> usize {
        match self {
            TargetFunction::SinQuadratic => 2,
            TargetFunction::Constant { .. } => 1,
            TargetFunction::Linear { coefficients } => coefficients.len(),
        }
    }

    /// Lipschitz constant on the box `|z_j| <= halfwidths[j]`.
    pub fn lipschitz(&self, halfwidths: &[f64]) -> f64 {
        match self {
            TargetFunction::SinQuadratic => (1.0 + 0.25 * halfwidths[1] * halfwidths[1]).sqrt(),
            TargetFunction::Constant { .. } => 0.0,
            TargetFunction::Linear { coefficients } => {
                coefficients.iter().map(|a| a * a).sum::<f64>().sqrt()
            }
        }
    }

    /// `sup |r|` on the box `|z_j| <= halfwidths[j]`.
    pub fn sup_abs(&self, halfwidths: &[f64]) -> f64 {
        match self {
            TargetFunction::SinQuadratic => {
                // the target is nonnegative on any box
                1.0 + halfwidths[0].min(PI / 2.0).sin() + 0.25 * halfwidths[1] * halfwidths[1]
            }
            TargetFunction::Constant { value } => value.abs(),
            TargetFunction::Linear { coefficients } => coefficients
                .iter()
                .zip(halfwidths)
                .map(|(a, w)| a.abs() * w)
                .sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionModelSpec {
    pub target: TargetFunction,
    pub noise_halfwidth: f64,
    pub d_true: usize,
}

impl RegressionModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_halfwidth >= 0.0) || !self.noise_halfwidth.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise_halfwidth = {} must be a nonnegative number",
                self.noise_halfwidth
            )));
        }
        if self.d_true == 0 {
            return Err(Error::InvalidConfig("d_true must be at least 1".into()));
        }
        if let TargetFunction::Linear { coefficients } = &self.target {
            if coefficients.len() != self.d_true {
                return Err(Error::InvalidConfig(format!(
                    "linear target has {} coefficients but d_true = {}",
                    coefficients.len(),
                    self.d_true
                )));
            }
        }
        if self.target.min_dim() > self.d_true {
            return Err(Error::InvalidConfig(format!(
                "target reads {} coordinates but d_true = {}",
                self.target.min_dim(),
                self.d_true
            )));
        }
        Ok(())
    }

    /// `sup |r| + w` over the process support.
    pub fn response_bound(&self, process: &ProcessSpec) -> f64 {
        self.target
            .sup_abs(&process.projected_halfwidths(self.d_true))
            + self.noise_halfwidth
    }
}

/// `Y_i = r(Pi_D X_i) + eps_i` with `eps_i ~ U[-w, w]`, where `Pi_D` is the
/// process's true rank-`d_true` projector.
pub fn generate_regression(
    predictors: Vec<HilbertVector>,
    model: &RegressionModelSpec,
    process: &ProcessSpec,
    seed: u64,
) -> Result<RegressionSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_regression_with(predictors, model, process, &mut rng)
}

pub fn generate_regression_with<R: Rng + ?Sized>(
    predictors: Vec<HilbertVector>,
    model: &RegressionModelSpec,
    process: &ProcessSpec,
    rng: &mut R,
) -> Result<RegressionSample> {
    model.validate()?;
    if predictors.is_empty() {
        return Err(Error::EmptySample);
    }
    if model.d_true >= process.dim {
        return Err(Error::InvalidRank {
            rank: model.d_true,
            dim: process.dim,
        });
    }
    let truth = process.true_projector(model.d_true)?;
    let w = model.noise_halfwidth;
    let mut responses = Vec::with_capacity(predictors.len());
    for x in &predictors {
        let z = truth.coordinates(x)?;
        let mut y = model.target.eval(&z);
        if w > 0.0 {
            y += w * (2.0 * rng.random::<f64>() - 1.0);
        }
        responses.push(y);
    }
    RegressionSample::new(predictors, responses, Some(model.response_bound(process)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eigendecompose, empirical_covariance};

    fn spec(spectrum: Vec<f64>, seed: u64) -> ProcessSpec {
        ProcessSpec::new(spectrum.len(), spectrum, CoefficientLaw::UniformSym, seed).unwrap()
    }

    #[test]
    fn single_draw_is_reproducible_and_bounded() {
        let s = spec(vec![1.0, 0.5, 0.25], 7);
        let a = generate_process(&s, 1).unwrap();
        let b = generate_process(&s, 1).unwrap();
        assert_eq!(a, b);
        let bound = SQRT_3 * (1.0 + 0.5f64.sqrt() + 0.5);
        assert!((s.support_bound() - bound).abs() < 1e-12);
        assert!(a[0].norm() <= bound);
    }

    #[test]
    fn spectrum_validation_names_index() {
        let bad = ProcessSpec::new(4, vec![1.0, 0.5, 0.5, 0.1], CoefficientLaw::UniformSym, 0);
        assert!(matches!(bad, Err(Error::InvalidSpectrum { index: 2 })));
        let bad = ProcessSpec::new(3, vec![1.0, -0.5, -1.0], CoefficientLaw::UniformSym, 0);
        assert!(matches!(bad, Err(Error::InvalidSpectrum { index: 1 })));
        assert!(matches!(
            ProcessSpec::new(3, vec![1.0, 0.5], CoefficientLaw::UniformSym, 0),
            Err(Error::SpectrumLength { .. })
        ));
        assert!(generate_process(&spec(vec![1.0, 0.5, 0.25], 1), 0).is_err());
    }

    #[test]
    fn both_laws_are_standardized() {
        for law in [
            CoefficientLaw::UniformSym,
            CoefficientLaw::RademacherSmoothed,
        ] {
            let pieces = law.pieces();
            let mass: f64 = pieces.iter().map(|p| p.2).sum();
            // second moment of a uniform piece is (a^2 + ab + b^2) / 3
            let var: f64 = pieces
                .iter()
                .map(|&(a, b, w)| w * (a * a + a * b + b * b) / 3.0)
                .sum();
            assert!((mass - 1.0).abs() < 1e-15);
            assert!((var - 1.0).abs() < 1e-12, "{law:?}: {var}");
        }
    }

    #[test]
    fn covariance_and_mean_match_spectrum() {
        let lam = vec![1.0, 0.5, 0.25, 0.125];
        for law in [
            CoefficientLaw::UniformSym,
            CoefficientLaw::RademacherSmoothed,
        ] {
            let s = ProcessSpec::new(4, lam.clone(), law, 11).unwrap();
            let n = 100_000;
            let xs = generate_process(&s, n).unwrap();
            let g = empirical_covariance(&xs, false).unwrap();
            let dec = eigendecompose(&g).unwrap();
            for (got, want) in dec.eigenvalues().iter().zip(&lam) {
                assert!((got / want - 1.0).abs() < 0.02, "{law:?}: {got} vs {want}");
            }
            for (j, l) in lam.iter().enumerate() {
                let mean = xs.iter().map(|x| x.as_slice()[j]).sum::<f64>() / n as f64;
                assert!(
                    mean.abs() <= 3.0 * (l / n as f64).sqrt(),
                    "{law:?} coordinate {j}: {mean}"
                );
            }
        }
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn ball_box_volume_closed_forms() {
        let (lo, hi) = ([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]);
        // ball centred on a face: half inside
        let v = ball_box_volume(&[1.0, 0.0, 0.0], 0.5, &lo, &hi);
        assert!((v - 0.5 * unit_ball_volume(3) * 0.125).abs() < 1e-10, "{v}");
        // centred on an edge: a quarter
        let v = ball_box_volume(&[1.0, 1.0, 0.0], 0.5, &lo, &hi);
        assert!(
            (v - 0.25 * unit_ball_volume(3) * 0.125).abs() < 1e-10,
            "{v}"
        );
        // on a corner: an eighth
        let v = ball_box_volume(&[1.0, -1.0, 1.0], 0.5, &lo, &hi);
        assert!((v - unit_ball_volume(3) * 0.125 / 8.0).abs() < 1e-10, "{v}");
        assert_eq!(ball_box_volume(&[0.0; 3], 10.0, &lo, &hi), 8.0);
        assert_eq!(ball_box_volume(&[3.0, 0.0, 0.0], 1.0, &lo, &hi), 0.0);
        // a disc of radius 1 cut by the chord x = 0.5 inside a large square
        let v = ball_box_volume(&[0.0, 0.0], 1.0, &[-5.0, -5.0], &[0.5, 5.0]);
        let segment = PI / 3.0 - 0.5 * (0.75f64).sqrt();
        assert!((v - (PI - segment)).abs() < 1e-10, "{v}");
    }

    #[test]
    fn small_ball_probability_matches_monte_carlo() {
        use rand::Rng;
        for law in [
            CoefficientLaw::UniformSym,
            CoefficientLaw::RademacherSmoothed,
        ] {
            let s = ProcessSpec::new(5, vec![1.0, 0.5, 0.25, 0.1, 0.05], law, 3).unwrap();
            let pl = s.projected_law(3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let xs = generate_process_with(&s, 200_000, &mut rng).unwrap();
            for _ in 0..4 {
                let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let h = 0.6;
                let hits = xs
                    .iter()
                    .filter(|x| {
                        let z = &x.as_slice()[..3];
                        z.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= h * h
                    })
                    .count() as f64
                    / xs.len() as f64;
                let f = pl.small_ball_probability(&c, h).unwrap();
                let se = (f * (1.0 - f) / xs.len() as f64).sqrt();
                assert!(
                    (hits - f).abs() <= 4.0 * se + 1e-9,
                    "{law:?} {c:?}: {hits} vs {f}"
                );
            }
        }
    }

    #[test]
    fn mean_density_sq_matches_density_integral() {
        let s = ProcessSpec::new(
            4,
            vec![1.0, 0.5, 0.25, 0.1],
            CoefficientLaw::RademacherSmoothed,
            0,
        )
        .unwrap();
        let pl = s.projected_law(2).unwrap();
        let hw = s.projected_halfwidths(2);
        // midpoint rule on a fine grid
        let m = 800;
        let (dx, dy) = (2.0 * hw[0] / m as f64, 2.0 * hw[1] / m as f64);
        let mut acc = 0.0;
        for i in 0..m {
            for k in 0..m {
                let z = [
                    -hw[0] + (i as f64 + 0.5) * dx,
                    -hw[1] + (k as f64 + 0.5) * dy,
                ];
                acc += pl.density(&z).powi(2) * dx * dy;
            }
        }
        assert!((acc / pl.mean_density_sq() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn noiseless_responses_are_exact() {
        let s = spec(vec![1.0, 0.5, 0.25, 0.125], 5);
        let xs = generate_process(&s, 50).unwrap();
        let model = RegressionModelSpec {
            target: TargetFunction::SinQuadratic,
            noise_halfwidth: 0.0,
            d_true: 3,
        };
        let sample = generate_regression(xs.clone(), &model, &s, 1).unwrap();
        for (x, y) in xs.iter().zip(sample.responses()) {
            let z = &x.as_slice()[..3];
            assert_eq!(*y, 1.0 + z[0].sin() + z[1] * z[1] / 4.0);
        }
    }

    #[test]
    fn constant_target_mean_within_clt_width() {
        let s = spec(vec![1.0, 0.5, 0.25, 0.125], 5);
        let n = 40_000;
        let xs = generate_process(&s, n).unwrap();
        let w = 0.8;
        let model = RegressionModelSpec {
            target: TargetFunction::Constant { value: 2.5 },
            noise_halfwidth: w,
            d_true: 3,
        };
        let sample = generate_regression(xs, &model, &s, 2).unwrap();
        let mean = sample.responses().iter().sum::<f64>() / n as f64;
        assert!((mean - 2.5).abs() <= 3.0 * w / (n as f64).sqrt());
        let bound = sample.response_bound().unwrap();
        assert!(sample.responses().iter().all(|y| y.abs() <= bound));
    }

    #[test]
    fn model_validation() {
        let m = RegressionModelSpec {
            target: TargetFunction::Linear {
                coefficients: vec![1.0, 2.0],
            },
            noise_halfwidth: 0.1,
            d_true: 3,
        };
        assert!(m.validate().is_err());
        let m = RegressionModelSpec {
            target: TargetFunction::SinQuadratic,
            noise_halfwidth: -0.1,
            d_true: 3,
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn streams_are_distinct_and_stable() {
        let mut a = derived_rng(1, 0, StreamPurpose::Data, 250);
        let mut b = derived_rng(1, 0, StreamPurpose::Noise, 250);
        let mut c = derived_rng(1, 0, StreamPurpose::Data, 250);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_ne!(x, y);
        assert_eq!(x, z);
    }
}
