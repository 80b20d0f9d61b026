//! Kernel partial sums and the PCA-kernel density and regression estimates.
//!
//! Every estimate takes the projector as an argument. Passing the empirical
//! projector gives the operational estimate; passing the true projector gives
//! the pseudo-estimate. Nothing else differs between the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::HilbertVector;
use crate::kernels::KernelSpec;
use crate::spectral::Projector;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    dim: usize,
    bandwidth: f64,
    kernel: KernelSpec,
}

impl EstimatorConfig {
    /// Projection dimensions of 2 or less are accepted with a warning: the
    /// estimators are defined, but the equivalence results need `D > 2`.
    pub fn new(dim: usize, bandwidth: f64, kernel: KernelSpec) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidRank { rank: 0, dim: 0 });
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidBandwidth(bandwidth));
        }
        if dim <= 2 {
            log::warn!("projection dimension D = {dim}: estimate/pseudo-estimate equivalence requires D > 2");
        }
        Ok(Self {
            dim,
            bandwidth,
            kernel,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn below_equivalence_dim(&self) -> bool {
        self.dim <= 2
    }
}

/// Predictor/response pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionSample {
    predictors: Vec<HilbertVector>,
    responses: Vec<f64>,
    response_bound: Option<f64>,
}

impl RegressionSample {
    pub fn new(
        predictors: Vec<HilbertVector>,
        responses: Vec<f64>,
        response_bound: Option<f64>,
    ) -> Result<Self> {
        if predictors.len() != responses.len() {
            return Err(Error::LengthMismatch {
                predictors: predictors.len(),
                responses: responses.len(),
            });
        }
        if let Some(index) = responses.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFinite {
                index,
                value: responses[index],
            });
        }
        if let Some(bound) = response_bound {
            if let Some(index) = responses.iter().position(|y| y.abs() > bound) {
                return Err(Error::InvalidConfig(format!(
                    "response {index} = {} exceeds the declared bound {bound}",
                    responses[index]
                )));
            }
        }
        Ok(Self {
            predictors,
            responses,
            response_bound,
        })
    }

    pub fn predictors(&self) -> &[HilbertVector] {
        &self.predictors
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn response_bound(&self) -> Option<f64> {
        self.response_bound
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

/// A sample expressed in the coordinates of a projector's basis, so that
/// `||P(x - X_i)||` costs `O(D)` per point once the sample is projected.
#[derive(Clone, Debug)]
pub struct ProjectedSample {
    rank: usize,
    ambient: usize,
    // row-major n x rank
    coords: Vec<f64>,
    projector: Projector,
}

impl ProjectedSample {
    pub fn new(sample: &[HilbertVector], projector: &Projector) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        let ambient = projector.dim();
        let mut coords = Vec::with_capacity(sample.len() * projector.rank());
        for x in sample {
            if x.dim() != ambient {
                return Err(Error::DimensionMismatch {
                    left: ambient,
                    right: x.dim(),
                });
            }
            coords.extend(projector.coordinates_unchecked(x.as_slice()));
        }
        Ok(Self {
            rank: projector.rank(),
            ambient,
            coords,
            projector: projector.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.rank
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    fn anchor_coords(&self, x: &HilbertVector) -> Result<Vec<f64>> {
        if x.dim() != self.ambient {
            return Err(Error::DimensionMismatch {
                left: self.ambient,
                right: x.dim(),
            });
        }
        Ok(self.projector.coordinates_unchecked(x.as_slice()))
    }

    /// Projected distances `||P(x - X_i)||` in sample order.
    pub fn distances(&self, x: &HilbertVector) -> Result<Vec<f64>> {
        let z = self.anchor_coords(x)?;
        Ok(self
            .coords
            .chunks_exact(self.rank)
            .map(|row| distance(&z, row))
            .collect())
    }

    /// Kernel weights `K(||P(x - X_i)|| / h)` in sample order.
    pub fn weights(&self, x: &HilbertVector, cfg: &EstimatorConfig) -> Result<Vec<f64>> {
        self.check_rank(cfg)?;
        let inv_h = 1.0 / cfg.bandwidth;
        Ok(self
            .distances(x)?
            .into_iter()
            .map(|d| cfg.kernel.weight(d * inv_h))
            .collect())
    }

    pub fn partial_sum(&self, x: &HilbertVector, cfg: &EstimatorConfig) -> Result<f64> {
        Ok(self.weights(x, cfg)?.iter().sum())
    }

    /// Partial sum and response-weighted sum from one pass over the weights.
    pub fn sums(
        &self,
        responses: &[f64],
        x: &HilbertVector,
        cfg: &EstimatorConfig,
    ) -> Result<KernelSums> {
        if responses.len() != self.len() {
            return Err(Error::LengthMismatch {
                predictors: self.len(),
                responses: responses.len(),
            });
        }
        let w = self.weights(x, cfg)?;
        Ok(KernelSums {
            partial: w.iter().sum(),
            weighted: w.iter().zip(responses).map(|(k, y)| k * y).sum(),
        })
    }

    fn check_rank(&self, cfg: &EstimatorConfig) -> Result<()> {
        if self.rank != cfg.dim {
            return Err(Error::RankMismatch {
                projector: self.rank,
                config: cfg.dim,
            });
        }
        Ok(())
    }
}

#[inline]
fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `S = sum K(.)` and `Z = sum Y K(.)` at one anchor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSums {
    pub partial: f64,
    pub weighted: f64,
}

/// A regression estimate together with the empty-window flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionEstimate {
    pub value: f64,
    pub empty_window: bool,
}

/// `Z / S` when `S > 0`, and `0` (flagged) otherwise.
pub fn regression_from_sums(sums: KernelSums) -> RegressionEstimate {
    if sums.partial > 0.0 {
        RegressionEstimate {
            value: sums.weighted / sums.partial,
            empty_window: false,
        }
    } else {
        RegressionEstimate {
            value: 0.0,
            empty_window: true,
        }
    }
}

/// `S / (n h^D)`.
pub fn density_from_sum(partial: f64, n: usize, cfg: &EstimatorConfig) -> f64 {
    partial / (n as f64 * cfg.bandwidth.powi(cfg.dim as i32))
}

/// `sum_i K(||P(x - X_i)|| / h)`.
pub fn partial_sum(
    sample: &[HilbertVector],
    x: &HilbertVector,
    projector: &Projector,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    ProjectedSample::new(sample, projector)?.partial_sum(x, cfg)
}

/// `sum_i Y_i K(||P(x - X_i)|| / h)`.
pub fn weighted_sum(
    sample: &RegressionSample,
    x: &HilbertVector,
    projector: &Projector,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    let projected = ProjectedSample::new(&sample.predictors, projector)?;
    Ok(projected.sums(&sample.responses, x, cfg)?.weighted)
}

pub fn kernel_regression(
    sample: &RegressionSample,
    x: &HilbertVector,
    projector: &Projector,
    cfg: &EstimatorConfig,
) -> Result<RegressionEstimate> {
    let projected = ProjectedSample::new(&sample.predictors, projector)?;
    Ok(regression_from_sums(projected.sums(
        &sample.responses,
        x,
        cfg,
    )?))
}

pub fn kernel_density(
    sample: &[HilbertVector],
    x: &HilbertVector,
    projector: &Projector,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    let s = partial_sum(sample, x, projector, cfg)?;
    Ok(density_from_sum(s, sample.len(), cfg))
}
