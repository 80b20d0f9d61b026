//! Radial kernels `K: [0, inf) -> [0, inf)`, their moment constants
//! `M_{D,p} = D * int_0^1 v^{D-1} K(v)^p dv`, and empirical small-ball
//! functions `F_x(h) = P(||P(x - X)|| <= h)` with a regular-variation
//! diagnostic.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ProjectedSample;
use crate::hilbert::HilbertVector;
use crate::quadrature::adaptive_simpson;
use crate::rate::{fit_log_log, RateFit};
use crate::spectral::Projector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Naive,
    Epanechnikov,
    Gaussian,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [
        KernelFamily::Naive,
        KernelFamily::Epanechnikov,
        KernelFamily::Gaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Naive => "naive",
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelFamily::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = KernelFamily::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidConfig(format!(
                    "unknown kernel {s:?}; valid families are {}",
                    valid.join(", ")
                ))
            })
    }
}

/// A kernel family with its conformance metadata.
///
/// `conforms_k1` means positive and bounded with support `[0, 1]`;
/// `conforms_k2` means continuously differentiable on `[0, 1]` with the
/// support edge included. Neither flag is enforced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub conforms_k1: bool,
    pub conforms_k2: bool,
    pub lipschitz_constant: Option<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily) -> Self {
        match family {
            KernelFamily::Naive => Self {
                family,
                conforms_k1: true,
                conforms_k2: false,
                lipschitz_constant: None,
            },
            KernelFamily::Epanechnikov => Self {
                family,
                conforms_k1: true,
                conforms_k2: true,
                lipschitz_constant: Some(2.0),
            },
            // sup |v exp(-v^2/2)| is attained at v = 1
            KernelFamily::Gaussian => Self {
                family,
                conforms_k1: false,
                conforms_k2: true,
                lipschitz_constant: Some((-0.5f64).exp()),
            },
        }
    }

    pub fn naive() -> Self {
        Self::new(KernelFamily::Naive)
    }

    pub fn epanechnikov() -> Self {
        Self::new(KernelFamily::Epanechnikov)
    }

    pub fn gaussian() -> Self {
        Self::new(KernelFamily::Gaussian)
    }

    /// Kernel value for `v >= 0` (not checked).
    #[inline]
    pub fn weight(&self, v: f64) -> f64 {
        match self.family {
            KernelFamily::Naive => {
                if v <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Epanechnikov => {
                if v <= 1.0 {
                    1.0 - v * v
                } else {
                    0.0
                }
            }
            KernelFamily::Gaussian => (-0.5 * v * v).exp(),
        }
    }

    pub fn eval(&self, v: f64) -> Result<f64> {
        eval_kernel(self, v)
    }
}

impl From<KernelFamily> for KernelSpec {
    fn from(family: KernelFamily) -> Self {
        Self::new(family)
    }
}

pub fn eval_kernel(spec: &KernelSpec, v: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::NegativeArgument(v));
    }
    Ok(spec.weight(v))
}

/// `D * int_0^1 v^{D-1} K(v)^p dv` by adaptive Simpson. The integration
/// domain is `[0, 1]` for every family, including the Gaussian.
pub fn moment_mdp(spec: &KernelSpec, d: usize, p: u32) -> f64 {
    let dd = d as i32;
    let integrand = |v: f64| v.powi(dd - 1) * spec.weight(v).powi(p as i32);
    d as f64 * adaptive_simpson(&integrand, 0.0, 1.0, 1e-13)
}

/// Empirical small-ball function on a radius grid.
///
/// With several anchors the values are the anchor-averaged fractions, which
/// estimate the mean of `F_x` over the anchors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallBallCurve {
    pub anchors: Vec<HilbertVector>,
    pub projector: Projector,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub sample_size: usize,
}

impl SmallBallCurve {
    pub fn rank(&self) -> usize {
        self.projector.rank()
    }

    /// `F(r)` by linear interpolation between tabulated radii.
    pub fn value_at(&self, radius: f64) -> Result<f64> {
        let (min, max) = (self.radii[0], self.radii[self.radii.len() - 1]);
        if !(radius >= min && radius <= max) {
            return Err(Error::RadiusOutOfRange { radius, min, max });
        }
        let k = self.radii.partition_point(|&r| r < radius);
        if self.radii[k] == radius {
            return Ok(self.values[k]);
        }
        let (r0, r1) = (self.radii[k - 1], self.radii[k]);
        let (f0, f1) = (self.values[k - 1], self.values[k]);
        Ok(f0 + (f1 - f0) * (radius - r0) / (r1 - r0))
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidRadii(0));
    }
    if let Some(k) = radii.iter().position(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidRadii(k));
    }
    if let Some(k) = radii.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidRadii(k + 1));
    }
    Ok(())
}

/// Fraction of the sample inside each closed ball `||P(x - X_i)|| <= r_k`.
pub fn small_ball_estimate(
    sample: &[HilbertVector],
    x: &HilbertVector,
    projector: &Projector,
    radii: &[f64],
) -> Result<SmallBallCurve> {
    pooled_small_ball_estimate(sample, std::slice::from_ref(x), projector, radii)
}

/// Anchor-averaged small-ball fractions over a shared sample.
pub fn pooled_small_ball_estimate(
    sample: &[HilbertVector],
    anchors: &[HilbertVector],
    projector: &Projector,
    radii: &[f64],
) -> Result<SmallBallCurve> {
    check_radii(radii)?;
    if anchors.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one anchor is required".into(),
        ));
    }
    let projected = ProjectedSample::new(sample, projector)?;
    let n = projected.len();
    let per_anchor = anchors
        .par_iter()
        .map(|x| {
            // hist[k] counts distances in (r_{k-1}, r_k]
            let mut hist = vec![0usize; radii.len() + 1];
            for d in projected.distances(x)? {
                hist[radii.partition_point(|&r| r < d)] += 1;
            }
            Ok(hist)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0usize; radii.len()];
    for hist in &per_anchor {
        let mut running = 0;
        for (c, h) in counts.iter_mut().zip(hist) {
            running += h;
            *c += running;
        }
    }
    let denom = (n * anchors.len()) as f64;
    Ok(SmallBallCurve {
        anchors: anchors.to_vec(),
        projector: projector.clone(),
        radii: radii.to_vec(),
        values: counts.iter().map(|&c| c as f64 / denom).collect(),
        sample_size: n,
    })
}

/// `F(s u) / F(s)`, to be compared with `u^D`.
pub fn regular_variation_ratio(curve: &SmallBallCurve, s: f64, u: f64) -> Result<f64> {
    if !(s > 0.0) || !(u > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "scale s = {s} and factor u = {u} must be positive"
        )));
    }
    let base = curve.value_at(s)?;
    let scaled = curve.value_at(s * u)?;
    if base == 0.0 {
        return Err(Error::EmptyBall {
            radius: s,
            n: curve.sample_size,
        });
    }
    Ok(scaled / base)
}

/// Empirical regular-variation index: log-log slope of `F` over the radii
/// where it is positive.
pub fn small_ball_index(curve: &SmallBallCurve) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = curve
        .radii
        .iter()
        .zip(&curve.values)
        .filter(|(_, &f)| f > 0.0)
        .map(|(&r, &f)| (r, f))
        .collect();
    fit_log_log(&points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(eval_kernel(&KernelSpec::naive(), 0.5).unwrap(), 1.0);
        assert_eq!(eval_kernel(&KernelSpec::epanechnikov(), 0.5).unwrap(), 0.75);
        assert_eq!(eval_kernel(&KernelSpec::naive(), 1.5).unwrap(), 0.0);
        assert_eq!(eval_kernel(&KernelSpec::naive(), 1.0).unwrap(), 1.0);
        assert_eq!(eval_kernel(&KernelSpec::epanechnikov(), 1.2).unwrap(), 0.0);
        assert!(
            (eval_kernel(&KernelSpec::gaussian(), 1.0).unwrap() - (-0.5f64).exp()).abs() < 1e-16
        );
        assert!(matches!(
            eval_kernel(&KernelSpec::naive(), -0.1),
            Err(Error::NegativeArgument(_))
        ));
    }

    #[test]
    fn conformance_flags() {
        assert!(KernelSpec::naive().conforms_k1);
        assert!(KernelSpec::epanechnikov().conforms_k1);
        let g = KernelSpec::gaussian();
        assert!(!g.conforms_k1);
        assert!(g.lipschitz_constant.unwrap().is_finite());
    }

    #[test]
    fn family_names_parse() {
        assert_eq!(
            "epanechnikov".parse::<KernelFamily>().unwrap(),
            KernelFamily::Epanechnikov
        );
        let err = "triangle".parse::<KernelFamily>().unwrap_err().to_string();
        assert!(err.contains("naive") && err.contains("gaussian"));
    }

    /// Closed form for the Epanechnikov first moment: D (1/D - 1/(D+2)).
    fn epanechnikov_m1(d: usize) -> f64 {
        let d = d as f64;
        d * (1.0 / d - 1.0 / (d + 2.0))
    }

    #[test]
    fn moments() {
        for d in 1..8 {
            for p in 1..4 {
                assert!((moment_mdp(&KernelSpec::naive(), d, p) - 1.0).abs() <= 1e-10);
            }
        }
        assert!((epanechnikov_m1(3) - 0.4).abs() < 1e-15);
        assert!((moment_mdp(&KernelSpec::epanechnikov(), 3, 1) - 0.4).abs() <= 1e-10);
        assert!((moment_mdp(&KernelSpec::epanechnikov(), 4, 1) - 1.0 / 3.0).abs() <= 1e-10);
        // D int v^{D-1} (1-v^2)^2 = 1 - 2D/(D+2) + D/(D+4)
        let m2 = 1.0 - 6.0 / 5.0 + 3.0 / 7.0;
        assert!((moment_mdp(&KernelSpec::epanechnikov(), 3, 2) - m2).abs() <= 1e-10);
    }

    #[test]
    fn moments_nonincreasing_in_p() {
        for family in KernelFamily::ALL {
            let spec = KernelSpec::new(family);
            for d in 1..6 {
                for p in 1..5 {
                    assert!(moment_mdp(&spec, d, p + 1) <= moment_mdp(&spec, d, p) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn epanechnikov_is_c1_inside_support() {
        let k = KernelSpec::epanechnikov();
        let h = 1e-6;
        for i in 1..100 {
            let v = i as f64 / 100.0;
            let fd = (k.weight(v + h) - k.weight(v - h)) / (2.0 * h);
            assert!((fd + 2.0 * v).abs() < 1e-6, "v = {v}: {fd}");
        }
    }

    fn line(coords: &[f64]) -> Vec<HilbertVector> {
        coords
            .iter()
            .map(|&c| HilbertVector::new(vec![c, 5.0, -3.0]).unwrap())
            .collect()
    }

    #[test]
    fn small_ball_counting() {
        let p = Projector::coordinate(3, 1).unwrap();
        let x = HilbertVector::zeros(3);
        let sample = line(&[0.1, -0.2, 0.9]);
        let curve = small_ball_estimate(&sample, &x, &p, &[0.05, 0.5, 1.0]).unwrap();
        assert_eq!(curve.values, vec![0.0, 2.0 / 3.0, 1.0]);
        // closed balls: a point exactly at the radius counts
        let curve = small_ball_estimate(&sample, &x, &p, &[0.2]).unwrap();
        assert_eq!(curve.values, vec![2.0 / 3.0]);
    }

    #[test]
    fn small_ball_errors() {
        let p = Projector::coordinate(3, 1).unwrap();
        let x = HilbertVector::zeros(3);
        assert!(matches!(
            small_ball_estimate(&[], &x, &p, &[0.1]),
            Err(Error::EmptySample)
        ));
        assert!(matches!(
            small_ball_estimate(&line(&[0.1]), &x, &p, &[0.1, 0.1]),
            Err(Error::InvalidRadii(1))
        ));
    }

    #[test]
    fn ratio_edge_cases() {
        let p = Projector::coordinate(3, 1).unwrap();
        let x = HilbertVector::zeros(3);
        let sample = line(&[0.1, 0.3, 0.6, 0.9]);
        let curve = small_ball_estimate(&sample, &x, &p, &[0.05, 0.2, 0.4, 0.8]).unwrap();
        assert_eq!(regular_variation_ratio(&curve, 0.2, 1.0).unwrap(), 1.0);
        assert_eq!(regular_variation_ratio(&curve, 0.2, 2.0).unwrap(), 2.0);
        // interpolated between 0.2 (1/4) and 0.4 (2/4)
        assert!((curve.value_at(0.3).unwrap() - 0.375).abs() < 1e-15);
        assert!(matches!(
            regular_variation_ratio(&curve, 0.05, 2.0),
            Err(Error::EmptyBall { .. })
        ));
        assert!(matches!(
            regular_variation_ratio(&curve, 0.5, 2.0),
            Err(Error::RadiusOutOfRange { .. })
        ));
    }
}
