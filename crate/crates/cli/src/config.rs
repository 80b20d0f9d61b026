//! Run configuration: a TOML file, then `PCAKERNEL__`-prefixed environment
//! variables, then `--set key=value` flags, each layer overriding the last.
//!
//! Every key except `seed` has a default. Unknown keys are rejected with
//! their full path.

use std::path::{Path, PathBuf};

use pcakernel::experiments::{BandwidthRule, ProjectorOverride, RegularVariationConfig, RunConfig};
use pcakernel::kernels::{KernelFamily, KernelSpec};
use pcakernel::spectral::GapTolerance;
use pcakernel::synthetic::{CoefficientLaw, ProcessSpec, RegressionModelSpec, TargetFunction};
use serde::Deserialize;

use crate::error::CliError;

/// Prefix of environment overrides; `__` separates key path segments, so
/// `PCAKERNEL__PROCESS__DIM=10` sets `process.dim`.
pub const ENV_PREFIX: &str = "PCAKERNEL__";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    #[serde(default = "default_d")]
    d: usize,
    #[serde(default = "default_kernel")]
    kernel: KernelFamily,
    #[serde(default = "default_n_grid")]
    n_grid: Vec<usize>,
    #[serde(default = "default_replications")]
    replications: usize,
    #[serde(default = "default_anchors")]
    anchors_per_run: usize,
    #[serde(default)]
    center: bool,
    #[serde(default = "default_gap_tolerance")]
    gap_tolerance: f64,
    #[serde(default = "default_bandwidth")]
    bandwidth: BandwidthRule,
    #[serde(default)]
    projector_override: ProjectorOverride,
    #[serde(default)]
    process: ProcessSection,
    model: Option<ModelSection>,
    #[serde(default)]
    regular_variation: RegularVariationSection,
    #[serde(default)]
    simulate: SimulateSection,
    estimate: Option<EstimateSection>,
}

fn default_d() -> usize {
    3
}
fn default_kernel() -> KernelFamily {
    KernelFamily::Naive
}
fn default_n_grid() -> Vec<usize> {
    vec![250, 500, 1000, 2000, 4000]
}
fn default_replications() -> usize {
    200
}
fn default_anchors() -> usize {
    20
}
fn default_gap_tolerance() -> f64 {
    pcakernel::spectral::DEFAULT_GAP_TOLERANCE
}
fn default_bandwidth() -> BandwidthRule {
    BandwidthRule::Stone { p: 2, scale: None }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcessSection {
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default)]
    spectrum: SpectrumSection,
    #[serde(default = "default_law")]
    coefficient_law: CoefficientLaw,
}

fn default_dim() -> usize {
    25
}
fn default_law() -> CoefficientLaw {
    CoefficientLaw::UniformSym
}

impl Default for ProcessSection {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            spectrum: SpectrumSection::default(),
            coefficient_law: default_law(),
        }
    }
}

/// Either an explicit list or `{ geometric = ratio }` for `ratio^(j-1)`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum SpectrumSection {
    Values(Vec<f64>),
    Geometric(GeometricSpectrum),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometricSpectrum {
    geometric: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection::Geometric(GeometricSpectrum { geometric: 0.5 })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    #[serde(default = "default_target")]
    target: TargetFunction,
    #[serde(default = "default_noise")]
    noise_halfwidth: f64,
    d_true: Option<usize>,
}

fn default_target() -> TargetFunction {
    TargetFunction::SinQuadratic
}
fn default_noise() -> f64 {
    0.5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RegularVariationSection {
    held_out: usize,
    s: f64,
    u: Vec<f64>,
    anchors: usize,
}

impl Default for RegularVariationSection {
    fn default() -> Self {
        let d = RegularVariationConfig::default();
        Self {
            held_out: d.held_out,
            s: d.s,
            u: d.u,
            anchors: d.anchors,
        }
    }
}

/// Sample written by `simulate` and generated in-process by `estimate` when
/// no input files are given.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub n: usize,
    /// Points of the uniform grid on `[0, 1]` the curves are sampled on.
    pub grid_points: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            n: 1000,
            grid_points: 256,
        }
    }
}

/// Input files for `estimate`; relative paths resolve against the config
/// file's directory.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub curves: PathBuf,
    pub responses: Option<PathBuf>,
    pub anchors: PathBuf,
    /// Overrides the bandwidth rule evaluated at the sample size.
    pub bandwidth: Option<f64>,
}

/// A fully validated configuration.
#[derive(Clone, Debug)]
pub struct Config {
    pub run: RunConfig,
    pub simulate: SimulateSection,
    pub estimate: Option<EstimateSection>,
}

/// Reads `path`, applies environment then command-line overrides, and
/// validates the result.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let env: Vec<(String, String)> = std::env::vars()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base, &env, overrides)
}

/// [`parse_config`] on an in-memory document with explicit environment pairs.
pub fn parse_config_str(
    text: &str,
    base_dir: &Path,
    env: &[(String, String)],
    overrides: &[String],
) -> Result<Config, CliError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config {
            key: String::new(),
            message: e.to_string(),
        })?;
    let mut env: Vec<&(String, String)> = env.iter().collect();
    env.sort();
    for (k, v) in env {
        let Some(rest) = k.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let path: Vec<String> = rest.split("__").map(|s| s.to_ascii_lowercase()).collect();
        set_path(&mut table, &path, parse_value(v))?;
    }
    for item in overrides {
        let (k, v) = item.split_once('=').ok_or_else(|| CliError::Config {
            key: item.clone(),
            message: "override must have the form key=value".into(),
        })?;
        let path: Vec<String> = k.trim().split('.').map(str::to_string).collect();
        set_path(&mut table, &path, parse_value(v.trim()))?;
    }
    let file: FileConfig =
        serde_path_to_error::deserialize(table).map_err(|e| CliError::Config {
            key: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    build(file, base_dir)
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), CliError> {
    let dotted = path.join(".");
    if path.iter().any(|s| s.is_empty()) {
        return Err(CliError::Config {
            key: dotted,
            message: "empty key segment in override".into(),
        });
    }
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cur = table;
    for seg in parents {
        let entry = cur
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| CliError::Config {
            key: dotted.clone(),
            message: format!("`{seg}` is not a table"),
        })?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn build(file: FileConfig, base_dir: &Path) -> Result<Config, CliError> {
    let seed = file
        .seed
        .ok_or_else(|| invalid("seed", "missing: an explicit integer seed is required"))?;
    let p = &file.process;
    let spectrum = match &p.spectrum {
        SpectrumSection::Values(v) => v.clone(),
        SpectrumSection::Geometric(g) => {
            if !(g.geometric > 0.0 && g.geometric < 1.0) {
                return Err(invalid(
                    "process.spectrum.geometric",
                    "expected a ratio in (0, 1)",
                ));
            }
            (0..p.dim).map(|j| g.geometric.powi(j as i32)).collect()
        }
    };
    let process = ProcessSpec {
        dim: p.dim,
        spectrum,
        coefficient_law: p.coefficient_law,
        seed,
    };
    process.validate().map_err(|e| match e {
        pcakernel::Error::InvalidSpectrum { index } => invalid(
            &format!("process.spectrum[{index}]"),
            format!("{e}: expected positive, strictly decreasing values"),
        ),
        pcakernel::Error::SpectrumLength { .. } => invalid("process.spectrum", e.to_string()),
        other => invalid("process.dim", other.to_string()),
    })?;
    let model = file.model.map(|m| RegressionModelSpec {
        target: m.target,
        noise_halfwidth: m.noise_halfwidth,
        d_true: m.d_true.unwrap_or(file.d),
    });
    if !(file.gap_tolerance >= 0.0) {
        return Err(invalid("gap_tolerance", "expected a nonnegative number"));
    }
    let rv = file.regular_variation;
    let run = RunConfig {
        process,
        model,
        d: file.d,
        kernel: KernelSpec::new(file.kernel),
        n_grid: file.n_grid,
        replications: file.replications,
        bandwidth: file.bandwidth,
        anchors_per_run: file.anchors_per_run,
        seed,
        center: file.center,
        gap_tolerance: GapTolerance::Relative(file.gap_tolerance),
        regular_variation: RegularVariationConfig {
            held_out: rv.held_out,
            s: rv.s,
            u: rv.u,
            anchors: rv.anchors,
        },
        projector_override: file.projector_override,
    };
    run.validate()
        .map_err(|e| invalid(error_key(&e), e.to_string()))?;
    run.bandwidths()
        .map_err(|e| invalid("bandwidth", e.to_string()))?;
    if file.simulate.n == 0 {
        return Err(invalid("simulate.n", "expected a positive sample size"));
    }
    if file.simulate.grid_points < run.process.dim + 2 {
        return Err(invalid(
            "simulate.grid_points",
            format!("expected at least dim + 2 = {} points", run.process.dim + 2),
        ));
    }
    let estimate = file.estimate.map(|mut e| {
        e.curves = base_dir.join(&e.curves);
        e.anchors = base_dir.join(&e.anchors);
        e.responses = e.responses.map(|r| base_dir.join(r));
        e
    });
    if let Some(h) = estimate.as_ref().and_then(|e| e.bandwidth) {
        if !(h > 0.0) || !h.is_finite() {
            return Err(invalid("estimate.bandwidth", "expected a positive number"));
        }
    }
    Ok(Config {
        run,
        simulate: file.simulate,
        estimate,
    })
}

fn error_key(e: &pcakernel::Error) -> &'static str {
    use pcakernel::Error::*;
    match e {
        InvalidRank { .. } => "d",
        InvalidBandwidth(_) => "bandwidth",
        InvalidConfig(m) if m.starts_with("n_grid") => "n_grid",
        InvalidConfig(m) if m.starts_with("replications") => "replications",
        InvalidConfig(m) if m.starts_with("anchors_per_run") => "anchors_per_run",
        InvalidConfig(m) if m.starts_with("stone") => "bandwidth.p",
        InvalidConfig(m) if m.contains("regular_variation") => "regular_variation",
        InvalidConfig(m) if m.contains("d_true") || m.contains("target") || m.contains("noise") => {
            "model"
        }
        _ => "",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, env: &[(&str, &str)], sets: &[&str]) -> Result<Config, CliError> {
        let env: Vec<(String, String)> = env
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        parse_config_str(text, Path::new("/cfg"), &env, &sets)
    }

    fn key_of(e: CliError) -> String {
        match e {
            CliError::Config { key, .. } => key,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse("seed = 7", &[], &[]).unwrap();
        let r = &c.run;
        assert_eq!(r.seed, 7);
        assert_eq!(r.process.dim, 25);
        assert_eq!(r.process.spectrum[3], 0.125);
        assert_eq!(r.process.coefficient_law, CoefficientLaw::UniformSym);
        assert_eq!(r.d, 3);
        assert_eq!(r.kernel, KernelSpec::naive());
        assert_eq!(r.n_grid, vec![250, 500, 1000, 2000, 4000]);
        assert_eq!(r.replications, 200);
        assert_eq!(r.anchors_per_run, 20);
        assert_eq!(r.bandwidth, BandwidthRule::Stone { p: 2, scale: None });
        assert!(r.model.is_none());
        assert_eq!(r.regular_variation, RegularVariationConfig::default());
        assert_eq!(c.simulate, SimulateSection::default());
    }

    #[test]
    fn seed_is_required() {
        assert_eq!(key_of(parse("d = 3", &[], &[]).unwrap_err()), "seed");
    }

    #[test]
    fn spectrum_violation_names_index() {
        let text = "seed = 1\n[process]\ndim = 4\nspectrum = [1.0, 0.5, 0.6, 0.1]\n";
        assert_eq!(
            key_of(parse(text, &[], &[]).unwrap_err()),
            "process.spectrum[2]"
        );
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let e = parse("seed = 1\n[process]\ndimension = 4\n", &[], &[]).unwrap_err();
        assert_eq!(key_of(e), "process.dimension");
        let e = parse("seed = 1\nreplicates = 4\n", &[], &[]).unwrap_err();
        assert!(e.to_string().contains("replicates"));
        let e = parse("seed = 1\nkernel = \"box\"\n", &[], &[]).unwrap_err();
        assert_eq!(key_of(e), "kernel");
    }

    #[test]
    fn override_precedence() {
        let text = "seed = 1\nreplications = 50\n";
        assert_eq!(
            parse(text, &[], &["replications=5"])
                .unwrap()
                .run
                .replications,
            5
        );
        let env = [("PCAKERNEL__REPLICATIONS", "9")];
        assert_eq!(parse(text, &env, &[]).unwrap().run.replications, 9);
        assert_eq!(
            parse(text, &env, &["replications=5"])
                .unwrap()
                .run
                .replications,
            5
        );
        let c = parse(
            text,
            &[("PCAKERNEL__PROCESS__DIM", "10")],
            &["kernel=epanechnikov"],
        )
        .unwrap();
        assert_eq!(c.run.process.dim, 10);
        assert_eq!(c.run.kernel, KernelSpec::epanechnikov());
        let c = parse(
            text,
            &[],
            &["bandwidth.rule=fixed", "bandwidth.h=0.3", "bandwidth.p=2"],
        );
        assert!(c.is_err());
        let c = parse(
            "seed = 1\nbandwidth = { rule = \"fixed\", h = 0.3 }",
            &[],
            &[],
        )
        .unwrap();
        assert_eq!(c.run.bandwidths().unwrap(), vec![0.3; 5]);
    }

    #[test]
    fn model_and_estimate_sections() {
        let text = "seed = 3\n[model]\nnoise_halfwidth = 0.25\n[estimate]\ncurves = \"c.csv\"\nanchors = \"a.csv\"\n";
        let c = parse(text, &[], &[]).unwrap();
        let m = c.run.model.unwrap();
        assert_eq!(m.target, TargetFunction::SinQuadratic);
        assert_eq!(m.d_true, 3);
        assert_eq!(m.noise_halfwidth, 0.25);
        let e = c.estimate.unwrap();
        assert_eq!(e.curves, Path::new("/cfg/c.csv"));
        assert!(e.responses.is_none());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert_eq!(
            key_of(parse("seed = 1\nn_grid = [100, 50, 200]", &[], &[]).unwrap_err()),
            "n_grid"
        );
        assert_eq!(
            key_of(parse("seed = 1\nd = 25", &[], &[]).unwrap_err()),
            "d"
        );
        assert_eq!(
            key_of(parse("seed = 1\nreplications = 0", &[], &[]).unwrap_err()),
            "replications"
        );
    }
}
