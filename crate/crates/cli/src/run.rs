//! The four verbs. Output files are first written with a `.partial` suffix
//! and renamed once every file of the verb has been written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pcakernel::estimators::{
    density_from_sum, regression_from_sums, EstimatorConfig, ProjectedSample,
};
use pcakernel::experiments::{run_suite, select_anchors, write_rows};
use pcakernel::hilbert::{CurveBasis, CurveGrid, CurveTable};
use pcakernel::spectral::{eigendecompose, empirical_covariance, projector_from_with};
use pcakernel::synthetic::{
    derived_rng, generate_process_with, generate_regression_with, StreamPurpose, RUN_LEVEL,
};
use pcakernel::HilbertVector;

use crate::config::Config;
use crate::error::CliError;

pub const CURVES_FILE: &str = "curves.csv";
pub const RESPONSES_FILE: &str = "responses.csv";
pub const ANCHORS_FILE: &str = "anchors.csv";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    Simulate,
    Estimate,
    Rates,
    ValidateConfig,
}

/// Runs `verb` and returns the files it wrote.
pub fn run(verb: Verb, cfg: &Config, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    match verb {
        Verb::ValidateConfig => {
            let r = &cfg.run;
            let hs = r.bandwidths()?;
            println!(
                "configuration ok: J = {}, D = {}, kernel = {}, n_grid = {:?}, bandwidths = {:?}",
                r.process.dim, r.d, r.kernel.family, r.n_grid, hs
            );
            Ok(Vec::new())
        }
        Verb::Simulate => simulate(cfg, out),
        Verb::Estimate => estimate(cfg, out),
        Verb::Rates => rates(cfg, out),
    }
}

struct Staged {
    dir: PathBuf,
    files: Vec<(PathBuf, PathBuf)>,
}

impl Staged {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.dir.join(name);
        let partial = self.dir.join(format!("{name}.partial"));
        fs::write(&partial, bytes).map_err(|source| CliError::Io {
            path: partial.clone(),
            source,
        })?;
        self.files.push((partial, target));
        Ok(())
    }

    fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut done = Vec::with_capacity(self.files.len());
        for (partial, target) in self.files {
            fs::rename(&partial, &target).map_err(|source| CliError::Io {
                path: target.clone(),
                source,
            })?;
            done.push(target);
        }
        Ok(done)
    }
}

/// Sample, responses and anchors of a run, as coefficient vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Inputs {
    pub predictors: Vec<HilbertVector>,
    pub responses: Option<Vec<f64>>,
    pub anchors: Vec<HilbertVector>,
}

/// The data `simulate` exports, generated from the config seed.
pub fn synthetic_inputs(cfg: &Config) -> Result<Inputs, CliError> {
    let r = &cfg.run;
    let n = cfg.simulate.n;
    let mut rng = derived_rng(r.seed, RUN_LEVEL, StreamPurpose::Data, n as u64);
    let predictors = generate_process_with(&r.process, n, &mut rng)?;
    let responses = match &r.model {
        Some(model) => {
            let mut rng = derived_rng(r.seed, RUN_LEVEL, StreamPurpose::Noise, n as u64);
            let sample = generate_regression_with(predictors.clone(), model, &r.process, &mut rng)?;
            Some(sample.responses().to_vec())
        }
        None => None,
    };
    Ok(Inputs {
        predictors,
        responses,
        anchors: select_anchors(r)?,
    })
}

fn curve_basis(cfg: &Config, grid: CurveGrid) -> Result<CurveBasis, CliError> {
    Ok(CurveBasis::fourier(grid, cfg.run.process.dim)?)
}

fn table_bytes(basis: &CurveBasis, xs: &[HilbertVector]) -> Result<Vec<u8>, CliError> {
    let table = CurveTable {
        abscissae: basis.grid().points().to_vec(),
        curves: xs
            .iter()
            .map(|x| basis.synthesize(x))
            .collect::<pcakernel::Result<_>>()?,
    };
    let mut buf = Vec::new();
    table.write(&mut buf)?;
    Ok(buf)
}

fn simulate(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let inputs = synthetic_inputs(cfg)?;
    let grid = CurveGrid::uniform(cfg.simulate.grid_points, 0.0, 1.0)?;
    let basis = curve_basis(cfg, grid)?;
    let mut staged = Staged::new(out)?;
    staged.write(CURVES_FILE, &table_bytes(&basis, &inputs.predictors)?)?;
    staged.write(ANCHORS_FILE, &table_bytes(&basis, &inputs.anchors)?)?;
    if let Some(ys) = &inputs.responses {
        let mut buf = Vec::new();
        for y in ys {
            writeln!(buf, "{y}").expect("write to memory");
        }
        staged.write(RESPONSES_FILE, &buf)?;
    }
    log::info!(
        "simulate: {} curves, {} anchors",
        inputs.predictors.len(),
        inputs.anchors.len()
    );
    staged.commit()
}

fn read_curves(cfg: &Config, path: &Path) -> Result<Vec<HilbertVector>, CliError> {
    let file = fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let table = CurveTable::read(std::io::BufReader::new(file))?;
    let basis = curve_basis(cfg, CurveGrid::trapezoidal(table.abscissae.clone())?)?;
    Ok(table
        .to_coefficients(&basis)?
        .into_iter()
        .map(|c| c.coeffs)
        .collect())
}

fn read_responses(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|e| {
                CliError::Compute(pcakernel::Error::Parse {
                    row: i + 1,
                    column: 1,
                    message: e.to_string(),
                })
            })
        })
        .collect()
}

/// Inputs named in the `[estimate]` section.
pub fn file_inputs(cfg: &Config) -> Result<Option<Inputs>, CliError> {
    let Some(e) = &cfg.estimate else {
        return Ok(None);
    };
    Ok(Some(Inputs {
        predictors: read_curves(cfg, &e.curves)?,
        responses: e.responses.as_deref().map(read_responses).transpose()?,
        anchors: read_curves(cfg, &e.anchors)?,
    }))
}

/// Estimates at one anchor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateRow {
    pub partial_sum: f64,
    pub density: f64,
    pub regression: Option<f64>,
    pub empty_window: bool,
}

/// Empirical-projector estimates at every anchor.
pub fn estimate_values(cfg: &Config, inputs: &Inputs) -> Result<(f64, Vec<EstimateRow>), CliError> {
    let r = &cfg.run;
    let n = inputs.predictors.len();
    if let Some(ys) = &inputs.responses {
        if ys.len() != n {
            return Err(pcakernel::Error::LengthMismatch {
                predictors: n,
                responses: ys.len(),
            }
            .into());
        }
    }
    let h = match cfg.estimate.as_ref().and_then(|e| e.bandwidth) {
        Some(h) => h,
        None => r.bandwidth_for(n)?,
    };
    let est = EstimatorConfig::new(r.d, h, r.kernel)?;
    let gamma = empirical_covariance(&inputs.predictors, r.center)?;
    let projector = projector_from_with(&eigendecompose(&gamma)?, r.d, r.gap_tolerance)?;
    let projected = ProjectedSample::new(&inputs.predictors, &projector)?;
    let zeros = vec![0.0; n];
    let ys = inputs.responses.as_deref().unwrap_or(&zeros);
    let rows = inputs
        .anchors
        .iter()
        .map(|x| {
            let sums = projected.sums(ys, x, &est)?;
            let reg = regression_from_sums(sums);
            Ok(EstimateRow {
                partial_sum: sums.partial,
                density: density_from_sum(sums.partial, n, &est),
                regression: inputs.responses.as_ref().map(|_| reg.value),
                empty_window: reg.empty_window,
            })
        })
        .collect::<pcakernel::Result<Vec<_>>>()?;
    Ok((h, rows))
}

fn estimate(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let inputs = match file_inputs(cfg)? {
        Some(i) => i,
        None => synthetic_inputs(cfg)?,
    };
    let (h, rows) = estimate_values(cfg, &inputs)?;
    let mut buf = Vec::new();
    writeln!(
        buf,
        "anchor,bandwidth,partial_sum,density,regression,empty_window"
    )
    .expect("write to memory");
    for (i, r) in rows.iter().enumerate() {
        let reg = r.regression.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            buf,
            "{i},{h},{},{},{reg},{}",
            r.partial_sum, r.density, r.empty_window
        )
        .expect("write to memory");
    }
    let mut staged = Staged::new(out)?;
    staged.write(ESTIMATES_FILE, &buf)?;
    log::info!(
        "estimate: {} anchors, n = {}, h = {h}",
        rows.len(),
        inputs.predictors.len()
    );
    staged.commit()
}

fn rates(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let suite = run_suite(&cfg.run)?;
    let mut staged = Staged::new(out)?;
    for (name, rows) in &suite.tables {
        let mut buf = Vec::new();
        write_rows(rows, &mut buf)?;
        staged.write(&format!("{name}.csv"), &buf)?;
    }
    let mut summary = serde_json::to_vec_pretty(&suite.summary).expect("rate fits serialize");
    summary.push(b'\n');
    staged.write(SUMMARY_FILE, &summary)?;
    staged.commit()
}
