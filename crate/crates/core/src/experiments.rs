//! Monte Carlo harness for the projector, partial-sum, regression, density
//! and small-ball experiments, plus log-log rate fitting.
//!
//! Replications run in parallel and are collected in replication order, then
//! reduced sequentially, so output does not depend on the thread count.
//!
//! Within a replication the estimate and the pseudo-estimate see the same
//! sample, responses, anchors, kernel and bandwidth; only the projector
//! differs. The data stream depends on `(seed, replication, n)` alone, so
//! every experiment sees identical samples.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    density_from_sum, regression_from_sums, EstimatorConfig, KernelSums, ProjectedSample,
};
use crate::hilbert::HilbertVector;
use crate::kernels::{
    moment_mdp, pooled_small_ball_estimate, regular_variation_ratio, small_ball_index, KernelSpec,
};
use crate::rate::{fit_log_log, RateFit};
use crate::spectral::{
    eigen_localization, eigendecompose, empirical_covariance, hs_norm, projector_from_with,
    sup_norm, GapTolerance, Projector, SpectralDecomposition,
};
use crate::synthetic::{
    derived_rng, generate_process_with, generate_regression_with, unit_ball_volume, ProcessSpec,
    ProjectedLaw, RegressionModelSpec, StreamPurpose, RUN_LEVEL,
};

pub const PROJECTOR_CONVERGENCE: &str = "projector_convergence";
pub const SUM_EQUIVALENCE: &str = "sum_equivalence";
pub const REGRESSION_EQUIVALENCE: &str = "regression_equivalence";
pub const DENSITY_EQUIVALENCE: &str = "density_equivalence";
pub const REGULAR_VARIATION: &str = "regular_variation";

/// Expected in-window count targeted by the Stone calibration at the smallest `n`.
pub const STONE_TARGET_COUNT: f64 = 20.0;

/// Anchors with `|r(x)|` below this are rejected.
pub const MIN_ABS_TARGET: f64 = 0.1;

const ANCHOR_ATTEMPTS_PER_ANCHOR: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum BandwidthRule {
    Fixed {
        h: f64,
    },
    /// `h_n = c n^(-1/(2p+D))`; `c` is calibrated unless `scale` is given.
    Stone {
        p: u32,
        scale: Option<f64>,
    },
}

/// Test hooks that replace the empirical projector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorOverride {
    #[default]
    None,
    /// Use the true projector in place of the empirical one.
    TrueProjector,
    /// Decompose the true covariance in place of the empirical one.
    TrueCovariance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularVariationConfig {
    pub held_out: usize,
    pub s: f64,
    pub u: Vec<f64>,
    pub anchors: usize,
}

impl Default for RegularVariationConfig {
    fn default() -> Self {
        Self {
            held_out: 100_000,
            s: 0.05,
            u: vec![0.5, 2.0],
            anchors: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub process: ProcessSpec,
    pub model: Option<RegressionModelSpec>,
    pub d: usize,
    pub kernel: KernelSpec,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub bandwidth: BandwidthRule,
    pub anchors_per_run: usize,
    pub seed: u64,
    pub center: bool,
    pub gap_tolerance: GapTolerance,
    pub regular_variation: RegularVariationConfig,
    pub projector_override: ProjectorOverride,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.process.validate()?;
        if self.d == 0 || self.d >= self.process.dim {
            return Err(Error::InvalidRank {
                rank: self.d,
                dim: self.process.dim,
            });
        }
        if self.n_grid.is_empty() {
            return Err(Error::InvalidConfig("n_grid must not be empty".into()));
        }
        if let Some(k) = self.n_grid.iter().position(|&n| n == 0) {
            return Err(Error::InvalidConfig(format!(
                "n_grid[{k}] must be positive"
            )));
        }
        if let Some(k) = self.n_grid.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(format!(
                "n_grid must be strictly increasing (index {})",
                k + 1
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig(
                "replications must be at least 1".into(),
            ));
        }
        if self.anchors_per_run == 0 {
            return Err(Error::InvalidConfig(
                "anchors_per_run must be at least 1".into(),
            ));
        }
        match self.bandwidth {
            BandwidthRule::Fixed { h } if !(h > 0.0) || !h.is_finite() => {
                return Err(Error::InvalidBandwidth(h))
            }
            BandwidthRule::Stone { p, .. } if p < 1 => {
                return Err(Error::InvalidConfig(
                    "stone rule needs smoothness p >= 1".into(),
                ))
            }
            BandwidthRule::Stone { scale: Some(c), .. } if !(c > 0.0) || !c.is_finite() => {
                return Err(Error::InvalidBandwidth(c))
            }
            _ => {}
        }
        if let Some(model) = &self.model {
            model.validate()?;
            if model.d_true != self.d {
                return Err(Error::InvalidConfig(format!(
                    "model.d_true = {} differs from d = {}",
                    model.d_true, self.d
                )));
            }
        }
        let rv = &self.regular_variation;
        if rv.held_out == 0 || rv.anchors == 0 {
            return Err(Error::InvalidConfig(
                "regular_variation.held_out and regular_variation.anchors must be positive".into(),
            ));
        }
        if !(rv.s > 0.0) || rv.u.is_empty() || rv.u.iter().any(|u| !(*u > 0.0) || *u == 1.0) {
            return Err(Error::InvalidConfig(
                "regular_variation needs s > 0 and factors u > 0 other than 1".into(),
            ));
        }
        Ok(())
    }

    /// Bandwidth for every `n` in the grid.
    pub fn bandwidths(&self) -> Result<Vec<f64>> {
        self.n_grid.iter().map(|&n| self.bandwidth_for(n)).collect()
    }

    /// Bandwidth the rule assigns to sample size `n`. The Stone scale is
    /// calibrated at the smallest grid size whatever `n` is.
    pub fn bandwidth_for(&self, n: usize) -> Result<f64> {
        match self.bandwidth {
            BandwidthRule::Fixed { h } => Ok(h),
            BandwidthRule::Stone { p, scale } => {
                let exponent = -1.0 / (2.0 * p as f64 + self.d as f64);
                let c = match scale {
                    Some(c) => c,
                    None => self.stone_scale(exponent)?,
                };
                Ok(c * (n as f64).powf(exponent))
            }
        }
    }

    // Solves M_{D,1} n0 V_D h0^D int f^2 = target, using F(h) ~ V_D h^D f(x)
    // averaged over anchors drawn from the process.
    fn stone_scale(&self, exponent: f64) -> Result<f64> {
        let law = self.process.projected_law(self.d)?;
        let n0 = self.n_grid[0] as f64;
        let m = moment_mdp(&self.kernel, self.d, 1);
        let denom = m * n0 * unit_ball_volume(self.d) * law.mean_density_sq();
        let h0 = (STONE_TARGET_COUNT / denom).powf(1.0 / self.d as f64);
        Ok(h0 / n0.powf(exponent))
    }

    fn estimator(&self, h: f64) -> Result<EstimatorConfig> {
        EstimatorConfig::new(self.d, h, self.kernel)
    }
}

/// One line of an experiment's results file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub n: usize,
    pub statistic: String,
    pub value: f64,
    pub normalizer: Option<f64>,
    pub replications: usize,
    /// Units (replications, or replication-anchor pairs) left out.
    pub excluded: usize,
    pub included: usize,
    pub mc_stderr: Option<f64>,
}

pub const CSV_HEADER: &str =
    "experiment,n,statistic,value,normalizer,replications,excluded,mc_stderr";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_rows<W: Write>(rows: &[ExperimentRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.experiment,
            r.n,
            r.statistic,
            r.value,
            opt(r.normalizer),
            r.replications,
            r.excluded,
            opt(r.mc_stderr)
        )?;
    }
    Ok(())
}

/// OLS of `ln value` on `ln n`. A nonpositive value is reported by row index.
pub fn fit_log_log_slope(rows: &[ExperimentRow]) -> Result<RateFit> {
    for (row, r) in rows.iter().enumerate() {
        if !(r.value > 0.0) {
            return Err(Error::NonPositiveValue {
                row,
                n: r.n,
                value: r.value,
            });
        }
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.value)).collect();
    fit_log_log(&points)
}

/// Kernel sums at one anchor under the empirical and the true projector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnchorSums {
    pub truth: KernelSums,
    pub empirical: KernelSums,
}

/// Everything one replication at one `n` contributes.
#[derive(Clone, Debug, PartialEq)]
pub struct Replicate {
    pub localized: bool,
    pub cov_hs_error: f64,
    /// `None` when the empirical eigengap is below tolerance.
    pub projector_sup_error: Option<f64>,
    pub sums: Option<Vec<AnchorSums>>,
}

#[derive(Clone, Debug)]
struct Truth {
    decomposition: SpectralDecomposition,
    projector: Projector,
    law: ProjectedLaw,
}

impl Truth {
    fn new(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            decomposition: cfg.process.true_decomposition()?,
            projector: cfg.process.true_projector(cfg.d)?,
            law: cfg.process.projected_law(cfg.d)?,
        })
    }
}

/// Test anchors drawn from the process and kept when the known small-ball
/// probability at the smallest bandwidth is positive and, with a model,
/// `|r(x)| >= 0.1`.
pub fn select_anchors(cfg: &RunConfig) -> Result<Vec<HilbertVector>> {
    cfg.validate()?;
    let truth = Truth::new(cfg)?;
    let h_min = cfg.bandwidths()?.into_iter().fold(f64::INFINITY, f64::min);
    select_anchors_with(cfg, &truth, h_min)
}

fn select_anchors_with(cfg: &RunConfig, truth: &Truth, h_min: f64) -> Result<Vec<HilbertVector>> {
    let mut rng = derived_rng(cfg.seed, RUN_LEVEL, StreamPurpose::Anchors, 0);
    let wanted = cfg.anchors_per_run;
    let attempts = wanted * ANCHOR_ATTEMPTS_PER_ANCHOR;
    let mut anchors = Vec::with_capacity(wanted);
    for _ in 0..attempts {
        let x = generate_process_with(&cfg.process, 1, &mut rng)?.remove(0);
        let z = truth.projector.coordinates(&x)?;
        if truth.law.small_ball_probability(&z, h_min)? <= 0.0 {
            continue;
        }
        if let Some(model) = &cfg.model {
            if model.target.eval(&z).abs() < MIN_ABS_TARGET {
                continue;
            }
        }
        anchors.push(x);
        if anchors.len() == wanted {
            return Ok(anchors);
        }
    }
    Err(Error::AnchorSelection { wanted, attempts })
}

/// One replication at sample size `n` and bandwidth `h`.
pub fn replicate(
    cfg: &RunConfig,
    n: usize,
    rep: usize,
    anchors: &[HilbertVector],
    h: f64,
) -> Result<Replicate> {
    let truth = Truth::new(cfg)?;
    let est = cfg.estimator(h)?;
    replicate_with(cfg, &truth, n, rep, anchors, &est)
}

fn replicate_with(
    cfg: &RunConfig,
    truth: &Truth,
    n: usize,
    rep: usize,
    anchors: &[HilbertVector],
    est: &EstimatorConfig,
) -> Result<Replicate> {
    let mut data_rng = derived_rng(cfg.seed, rep as u64, StreamPurpose::Data, n as u64);
    let xs = generate_process_with(&cfg.process, n, &mut data_rng)?;
    let gamma_n = empirical_covariance(&xs, cfg.center)?;
    let cov_hs_error = hs_norm(&gamma_n.checked_sub(&cfg.process.covariance())?);

    let decomposition = match cfg.projector_override {
        ProjectorOverride::TrueCovariance => eigendecompose(&cfg.process.covariance())?,
        _ => eigendecompose(&gamma_n)?,
    };
    let localized = eigen_localization(&decomposition, &truth.decomposition, cfg.d)?;
    let projector = match cfg.projector_override {
        ProjectorOverride::TrueProjector => Ok(truth.projector.clone()),
        _ => projector_from_with(&decomposition, cfg.d, cfg.gap_tolerance),
    };
    let projector = match projector {
        Ok(p) => p,
        Err(Error::EigenGap { .. }) => {
            return Ok(Replicate {
                localized,
                cov_hs_error,
                projector_sup_error: None,
                sums: None,
            })
        }
        Err(e) => return Err(e),
    };
    let diff = projector
        .operator()
        .checked_sub(truth.projector.operator())?;
    let projector_sup_error = Some(sup_norm(&diff));

    let responses = match &cfg.model {
        Some(model) => {
            let mut noise_rng = derived_rng(cfg.seed, rep as u64, StreamPurpose::Noise, n as u64);
            generate_regression_with(xs.clone(), model, &cfg.process, &mut noise_rng)?
                .responses()
                .to_vec()
        }
        None => vec![0.0; n],
    };
    let on_truth = ProjectedSample::new(&xs, &truth.projector)?;
    let on_estimate = ProjectedSample::new(&xs, &projector)?;
    let sums = anchors
        .iter()
        .map(|x| {
            Ok(AnchorSums {
                truth: on_truth.sums(&responses, x, est)?,
                empirical: on_estimate.sums(&responses, x, est)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Replicate {
        localized,
        cov_hs_error,
        projector_sup_error,
        sums: Some(sums),
    })
}

/// All replications at one grid point, in replication order.
#[derive(Clone, Debug)]
pub struct GridPoint {
    pub n: usize,
    pub bandwidth: f64,
    pub replicates: Vec<Replicate>,
}

/// Shared simulation state for a run: anchors, bandwidths and every replicate.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub anchors: Vec<HilbertVector>,
    /// `F(h)` at each anchor under the known projected law, per grid point.
    pub small_ball: Vec<Vec<f64>>,
    pub points: Vec<GridPoint>,
}

pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    cfg.validate()?;
    let truth = Truth::new(cfg)?;
    let hs = cfg.bandwidths()?;
    let h_min = hs.iter().copied().fold(f64::INFINITY, f64::min);
    let anchors = select_anchors_with(cfg, &truth, h_min)?;
    let anchor_coords = anchors
        .iter()
        .map(|x| truth.projector.coordinates(x))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(cfg.n_grid.len());
    let mut small_ball = Vec::with_capacity(cfg.n_grid.len());
    for (&n, &h) in cfg.n_grid.iter().zip(&hs) {
        let est = cfg.estimator(h)?;
        let replicates = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| replicate_with(cfg, &truth, n, rep, &anchors, &est))
            .collect::<Result<Vec<_>>>()?;
        small_ball.push(
            anchor_coords
                .iter()
                .map(|z| truth.law.small_ball_probability(z, h))
                .collect::<Result<Vec<_>>>()?,
        );
        points.push(GridPoint {
            n,
            bandwidth: h,
            replicates,
        });
    }
    Ok(Simulation {
        anchors,
        small_ball,
        points,
    })
}

/// Running mean with the Monte Carlo standard error of that mean.
#[derive(Default)]
struct Moments {
    values: Vec<f64>,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.values.push(v);
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return f64::NAN;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    fn stderr(&self) -> Option<f64> {
        let k = self.values.len();
        if k < 2 {
            return None;
        }
        let m = self.mean();
        let var = self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1) as f64;
        Some((var / k as f64).sqrt())
    }
}

struct RowBuilder<'a> {
    experiment: &'a str,
    n: usize,
    replications: usize,
    total: usize,
}

impl RowBuilder<'_> {
    fn row(
        &self,
        statistic: &str,
        value: f64,
        normalizer: Option<f64>,
        included: usize,
        mc_stderr: Option<f64>,
    ) -> ExperimentRow {
        ExperimentRow {
            experiment: self.experiment.to_string(),
            n: self.n,
            statistic: statistic.to_string(),
            value,
            normalizer,
            replications: self.replications,
            excluded: self.total - included,
            included,
            mc_stderr,
        }
    }
}

fn regression_normalizer(n: usize, h: f64) -> Option<f64> {
    let nh2 = n as f64 * h * h;
    (nh2 > 1.0).then(|| nh2.ln() / nh2)
}

fn require_equivalence_dim(cfg: &RunConfig, experiment: &str) -> Result<()> {
    if cfg.d <= 2 {
        return Err(Error::InvalidConfig(format!(
            "{experiment} requires d > 2, got d = {}",
            cfg.d
        )));
    }
    Ok(())
}

fn projector_rows(cfg: &RunConfig, sim: &Simulation) -> Vec<ExperimentRow> {
    let mut rows = Vec::new();
    let r = cfg.replications;
    for pt in &sim.points {
        let b = RowBuilder {
            experiment: PROJECTOR_CONVERGENCE,
            n: pt.n,
            replications: r,
            total: r,
        };
        let nf = pt.n as f64;
        let as_rate = (nf.ln() / nf).sqrt();
        let mut sq = Moments::default();
        let mut ratio_max = 0.0f64;
        let mut hs = Moments::default();
        let mut loc = 0usize;
        for rep in &pt.replicates {
            if let Some(e) = rep.projector_sup_error {
                sq.push(e * e);
                ratio_max = ratio_max.max(e / as_rate);
            }
            hs.push(rep.cov_hs_error);
            loc += rep.localized as usize;
        }
        rows.push(b.row(
            "proj_sq_error",
            sq.mean(),
            Some(1.0 / nf),
            sq.len(),
            sq.stderr(),
        ));
        rows.push(b.row(
            "proj_as_ratio_max",
            ratio_max,
            Some(as_rate),
            sq.len(),
            None,
        ));
        let p = loc as f64 / r as f64;
        rows.push(b.row(
            "localization_freq",
            p,
            None,
            r,
            Some((p * (1.0 - p) / r as f64).sqrt()),
        ));
        rows.push(b.row(
            "cov_hs_error",
            hs.mean(),
            Some(1.0 / nf.sqrt()),
            r,
            hs.stderr(),
        ));
    }
    rows
}

fn sum_rows(cfg: &RunConfig, sim: &Simulation) -> Vec<ExperimentRow> {
    let mut rows = Vec::new();
    let m1 = moment_mdp(&cfg.kernel, cfg.d, 1);
    let total = cfg.replications * sim.anchors.len();
    for (pt, fh) in sim.points.iter().zip(&sim.small_ball) {
        let b = RowBuilder {
            experiment: SUM_EQUIVALENCE,
            n: pt.n,
            replications: cfg.replications,
            total,
        };
        let nf = pt.n as f64;
        let mut dev = Moments::default();
        let mut moment = Moments::default();
        let (mut sq_hat, mut sq_true, mut paired) = (0.0, 0.0, 0usize);
        for rep in &pt.replicates {
            let Some(sums) = &rep.sums else { continue };
            for (a, f) in sums.iter().zip(fh) {
                if *f > 0.0 {
                    moment.push(a.truth.partial / (nf * f));
                }
                if a.truth.partial > 0.0 {
                    dev.push((a.empirical.partial / a.truth.partial - 1.0).abs());
                    sq_hat += a.empirical.partial * a.empirical.partial;
                    sq_true += a.truth.partial * a.truth.partial;
                    paired += 1;
                }
            }
        }
        rows.push(b.row(
            "sum_ratio_abs_dev",
            dev.mean(),
            None,
            dev.len(),
            dev.stderr(),
        ));
        rows.push(b.row(
            "sum_moment_ratio",
            moment.mean(),
            Some(m1),
            moment.len(),
            moment.stderr(),
        ));
        rows.push(b.row(
            "sum_second_moment_ratio",
            sq_hat / sq_true,
            None,
            paired,
            None,
        ));
        rows.push(b.row("bandwidth", pt.bandwidth, None, total, None));
    }
    rows
}

fn regression_rows(cfg: &RunConfig, sim: &Simulation) -> Vec<ExperimentRow> {
    let mut rows = Vec::new();
    let total = cfg.replications * sim.anchors.len();
    for pt in &sim.points {
        let b = RowBuilder {
            experiment: REGRESSION_EQUIVALENCE,
            n: pt.n,
            replications: cfg.replications,
            total,
        };
        let mut mse = Moments::default();
        let mut num = Moments::default();
        for rep in &pt.replicates {
            let Some(sums) = &rep.sums else { continue };
            for a in sums {
                let (t, e) = (
                    regression_from_sums(a.truth),
                    regression_from_sums(a.empirical),
                );
                if !t.empty_window && !e.empty_window {
                    mse.push((e.value - t.value).powi(2));
                }
                if a.truth.weighted != 0.0 {
                    num.push((a.empirical.weighted / a.truth.weighted - 1.0).abs());
                }
            }
        }
        let norm = regression_normalizer(pt.n, pt.bandwidth);
        let value = mse.mean();
        rows.push(b.row("regression_mse", value, norm, mse.len(), mse.stderr()));
        if let Some(c) = norm {
            rows.push(b.row(
                "regression_mse_normalized",
                value / c,
                None,
                mse.len(),
                mse.stderr().map(|s| s / c),
            ));
        }
        rows.push(b.row(
            "numerator_ratio_abs_dev",
            num.mean(),
            None,
            num.len(),
            num.stderr(),
        ));
    }
    rows
}

fn density_rows(cfg: &RunConfig, sim: &Simulation) -> Result<Vec<ExperimentRow>> {
    let mut rows = Vec::new();
    let total = cfg.replications * sim.anchors.len();
    for pt in &sim.points {
        let b = RowBuilder {
            experiment: DENSITY_EQUIVALENCE,
            n: pt.n,
            replications: cfg.replications,
            total,
        };
        let est = cfg.estimator(pt.bandwidth)?;
        let mut mse = Moments::default();
        for rep in &pt.replicates {
            let Some(sums) = &rep.sums else { continue };
            for a in sums {
                let f_hat = density_from_sum(a.empirical.partial, pt.n, &est);
                let f = density_from_sum(a.truth.partial, pt.n, &est);
                mse.push((f_hat - f).powi(2));
            }
        }
        let norm = regression_normalizer(pt.n, pt.bandwidth);
        let value = mse.mean();
        rows.push(b.row("density_mse", value, norm, mse.len(), mse.stderr()));
        if let Some(c) = norm {
            rows.push(b.row(
                "density_mse_normalized",
                value / c,
                None,
                mse.len(),
                mse.stderr().map(|s| s / c),
            ));
        }
    }
    Ok(rows)
}

pub fn run_projector_convergence(cfg: &RunConfig) -> Result<Vec<ExperimentRow>> {
    let sim = simulate(cfg)?;
    Ok(projector_rows(cfg, &sim))
}

pub fn run_sum_equivalence(cfg: &RunConfig) -> Result<Vec<ExperimentRow>> {
    require_equivalence_dim(cfg, SUM_EQUIVALENCE)?;
    let sim = simulate(cfg)?;
    Ok(sum_rows(cfg, &sim))
}

pub fn run_regression_equivalence(cfg: &RunConfig) -> Result<Vec<ExperimentRow>> {
    if cfg.model.is_none() {
        return Err(Error::InvalidConfig(format!(
            "{REGRESSION_EQUIVALENCE} needs a regression model"
        )));
    }
    let sim = simulate(cfg)?;
    Ok(regression_rows(cfg, &sim))
}

pub fn run_density_equivalence(cfg: &RunConfig) -> Result<Vec<ExperimentRow>> {
    require_equivalence_dim(cfg, DENSITY_EQUIVALENCE)?;
    let sim = simulate(cfg)?;
    density_rows(cfg, &sim)
}

/// Pooled small-ball ratios `F(s u) / F(s)` on a held-out sample under the
/// true projector, averaged over anchors drawn from the process.
pub fn run_regular_variation(cfg: &RunConfig) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let rv = &cfg.regular_variation;
    let truth = Truth::new(cfg)?;
    let mut rng = derived_rng(cfg.seed, RUN_LEVEL, StreamPurpose::HeldOut, 0);
    let sample = generate_process_with(&cfg.process, rv.held_out, &mut rng)?;
    let mut rng = derived_rng(cfg.seed, RUN_LEVEL, StreamPurpose::Anchors, 1);
    let anchors = generate_process_with(&cfg.process, rv.anchors, &mut rng)?;

    let lo = rv.u.iter().copied().fold(1.0f64, f64::min) * rv.s;
    let hi = rv.u.iter().copied().fold(1.0f64, f64::max) * rv.s;
    const GRID: usize = 17;
    let mut radii: Vec<f64> = (0..GRID)
        .map(|k| lo * (hi / lo).powf(k as f64 / (GRID - 1) as f64))
        .chain(rv.u.iter().map(|u| u * rv.s))
        .chain([rv.s])
        .collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let curve = pooled_small_ball_estimate(&sample, &anchors, &truth.projector, &radii)?;

    let d = cfg.d as f64;
    let b = RowBuilder {
        experiment: REGULAR_VARIATION,
        n: rv.held_out,
        replications: 1,
        total: rv.anchors,
    };
    let mut rows = Vec::new();
    for &u in &rv.u {
        let ratio = regular_variation_ratio(&curve, rv.s, u)?;
        rows.push(b.row(
            &format!("rv_ratio_u{u}"),
            ratio,
            Some(u.powf(d)),
            rv.anchors,
            None,
        ));
    }
    let index = small_ball_index(&curve)?;
    rows.push(b.row("rv_log_log_slope", index.slope, Some(d), rv.anchors, None));
    Ok(rows)
}

/// Rows of every experiment keyed by experiment name, and rate fits keyed by
/// statistic name.
#[derive(Clone, Debug)]
pub struct SuiteOutput {
    pub tables: BTreeMap<String, Vec<ExperimentRow>>,
    pub summary: BTreeMap<String, RateFit>,
}

/// Statistics whose log-log slope against `n` goes into the summary.
pub const FITTED_STATISTICS: [&str; 6] = [
    "proj_sq_error",
    "cov_hs_error",
    "sum_ratio_abs_dev",
    "regression_mse",
    "numerator_ratio_abs_dev",
    "density_mse",
];

/// Runs every applicable experiment on one shared simulation.
pub fn run_suite(cfg: &RunConfig) -> Result<SuiteOutput> {
    let sim = simulate(cfg)?;
    let mut tables = BTreeMap::new();
    log::info!("{PROJECTOR_CONVERGENCE}: {} grid points", sim.points.len());
    tables.insert(PROJECTOR_CONVERGENCE.to_string(), projector_rows(cfg, &sim));
    if cfg.d > 2 {
        log::info!("{SUM_EQUIVALENCE}");
        tables.insert(SUM_EQUIVALENCE.to_string(), sum_rows(cfg, &sim));
        log::info!("{DENSITY_EQUIVALENCE}");
        tables.insert(DENSITY_EQUIVALENCE.to_string(), density_rows(cfg, &sim)?);
    } else {
        log::warn!("d = {} <= 2: skipping sum and density equivalence", cfg.d);
    }
    if cfg.model.is_some() {
        log::info!("{REGRESSION_EQUIVALENCE}");
        tables.insert(
            REGRESSION_EQUIVALENCE.to_string(),
            regression_rows(cfg, &sim),
        );
    }
    log::info!("{REGULAR_VARIATION}");
    tables.insert(REGULAR_VARIATION.to_string(), run_regular_variation(cfg)?);

    let mut summary = BTreeMap::new();
    for rows in tables.values() {
        for stat in FITTED_STATISTICS {
            let series: Vec<ExperimentRow> = rows
                .iter()
                .filter(|r| r.statistic == stat)
                .cloned()
                .collect();
            if series.len() < 3 {
                continue;
            }
            match fit_log_log_slope(&series) {
                Ok(fit) => {
                    summary.insert(stat.to_string(), fit);
                }
                Err(e) => log::warn!("no rate fit for {stat}: {e}"),
            }
        }
    }
    Ok(SuiteOutput { tables, summary })
}
