//! Experiment orchestration: JSON configurations, dispatch to the estimate
//! modules, and report files (CSV tables, JSON summary, plain-text verdict).

mod experiments;
mod plots;

pub use plots::emit_plots;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::caccioppoli::Variant;
use crate::ensemble::{DataKind, Texture};
use crate::error::{LabError, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Caccioppoli,
    Degiorgi,
    Liouville,
    Schauder,
    Blowup,
    Bootstrap,
    Mollify,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Solve,
        Command::Caccioppoli,
        Command::Degiorgi,
        Command::Liouville,
        Command::Schauder,
        Command::Blowup,
        Command::Bootstrap,
        Command::Mollify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Caccioppoli => "caccioppoli",
            Command::Degiorgi => "degiorgi",
            Command::Liouville => "liouville",
            Command::Schauder => "schauder",
            Command::Blowup => "blowup",
            Command::Bootstrap => "bootstrap",
            Command::Mollify => "mollify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(default = "unit")]
    pub half_width: f64,
    pub m: usize,
}

fn unit() -> f64 {
    1.0
}

impl GridSpec {
    pub fn at(&self, m: usize) -> Result<Grid> {
        Grid::new(self.n, self.half_width, m)
    }
}

fn default_texture() -> Texture {
    Texture::Smooth
}

fn default_holder_alpha() -> f64 {
    0.5
}

fn default_data() -> DataKind {
    DataKind::Full
}

/// Generator of the experiment's fields or problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProblemSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `x^2 - y^2`.
    Saddle,
    /// `x^3 - 3 x y^2`.
    Cubic,
    /// `prod sin(pi x_i)` with the matching forcing.
    Sine,
    /// `|x - x0|^exponent` with `x0 = offset * h` (node offsets from the center).
    Cusp {
        offset: Vec<isize>,
        exponent: f64,
    },
    /// `-Laplace u = -|x|^{-s}`.
    Radial {
        s: f64,
    },
    /// `e^{a.x} sin(b.x)`.
    Counterexample {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    /// Random coefficients and data.
    Ensemble {
        size: usize,
        #[serde(default = "default_texture")]
        texture: Texture,
        #[serde(default = "default_holder_alpha")]
        holder_alpha: f64,
        #[serde(default = "default_data")]
        data: DataKind,
    },
}

/// Estimate parameters; each experiment reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// `alpha = fraction * alpha_max` when `alpha` is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training_size: Option<usize>,
    /// Level of `sup u` on `B_R` for the amplified traces.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplify: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scales: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub gammas: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub resolutions: Vec<usize>,
    /// Mollification radii in units of the grid spacing.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub epsilons: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fields: Option<usize>,
    /// Claimed constant: ratios above it fail.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// Relative tolerance of the experiment's comparisons.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub grid: GridSpec,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub params: Params,
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// The reference experiment of each command.
    pub fn default_for(command: Command) -> Self {
        let mut params = Params::default();
        let (m, problem) = match command {
            Command::Solve => {
                params.resolutions = vec![65, 129, 257];
                (129, ProblemSpec::Sine)
            }
            Command::Caccioppoli => {
                params.r = Some(0.5);
                params.big_r = Some(0.95);
                params.variant = Some(Variant::Standard);
                params.resolutions = vec![129, 257];
                params.tolerance = Some(0.1);
                (129, ensemble(50, Texture::Smooth))
            }
            Command::Degiorgi => {
                params.r = Some(0.25);
                params.big_r = Some(0.95);
                params.k_max = Some(3);
                params.training_size = Some(20);
                params.amplify = Some(2.0);
                (129, ensemble(50, Texture::Smooth))
            }
            Command::Liouville => {
                params.scales = crate::liouville::DEFAULT_SCALES.to_vec();
                params.gammas = (1..=10).map(f64::from).collect();
                params.tolerance = Some(0.05);
                (
                    129,
                    ProblemSpec::Counterexample {
                        a: vec![1.0, 0.0],
                        b: vec![0.0, 1.0],
                    },
                )
            }
            Command::Schauder => {
                params.r = Some(0.5);
                params.big_r = Some(0.9);
                params.order = Some(0);
                params.alpha_fraction = Some(0.7);
                params.resolutions = vec![129, 257];
                params.tolerance = Some(0.15);
                (129, ensemble(10, Texture::Holder))
            }
            Command::Blowup => {
                params.r = Some(0.25);
                params.big_r = Some(0.95);
                params.order = Some(0);
                params.alpha = Some(0.5);
                params.steps = Some(5);
                params.tolerance = Some(0.1);
                (
                    65,
                    ProblemSpec::Cusp {
                        offset: vec![4, 2],
                        exponent: 0.5,
                    },
                )
            }
            Command::Bootstrap => {
                params.r = Some(0.3);
                params.big_r = Some(0.9);
                params.k = Some(3);
                params.alpha = Some(0.5);
                (65, ProblemSpec::Cubic)
            }
            Command::Mollify => {
                params.epsilons = vec![8.0, 4.0, 2.02];
                params.fields = Some(100);
                (257, ensemble(1, Texture::Holder))
            }
        };
        ExperimentConfig {
            command,
            grid: GridSpec { n: 2, half_width: 1.0, m },
            problem,
            params,
            out: PathBuf::from(format!("runs/{}", command.name())),
            seed: 7,
        }
    }

    /// Reads a JSON file over the defaults of its command: `grid` and
    /// `params` merge key by key, `problem` replaces the default whole.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text)?;
        let obj = user
            .as_object()
            .ok_or_else(|| LabError::Config("configuration must be a JSON object".into()))?;
        let command: Command = serde_json::from_value(
            obj.get("command")
                .cloned()
                .ok_or_else(|| LabError::Config("missing field `command`".into()))?,
        )?;
        let mut base = serde_json::to_value(Self::default_for(command))?;
        let map = base.as_object_mut().expect("struct serializes to an object");
        for (key, value) in obj {
            match (key.as_str(), map.get_mut(key)) {
                ("grid" | "params", Some(Value::Object(dst))) => {
                    let src = value
                        .as_object()
                        .ok_or_else(|| LabError::Config(format!("`{key}` must be an object")))?;
                    for (k, v) in src {
                        dst.insert(k.clone(), v.clone());
                    }
                }
                _ => {
                    map.insert(key.clone(), value.clone());
                }
            }
        }
        let cfg: ExperimentConfig = serde_json::from_value(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.at(self.grid.m)?;
        for &m in &self.params.resolutions {
            self.grid.at(m)?;
        }
        if let ProblemSpec::Ensemble { size: 0, .. } = self.problem {
            return Err(LabError::Config("ensemble size must be positive".into()));
        }
        Ok(())
    }

    /// Resolutions of the experiment: the configured list, or the grid's `m`.
    pub fn resolutions(&self) -> Vec<usize> {
        if self.params.resolutions.is_empty() {
            vec![self.grid.m]
        } else {
            self.params.resolutions.clone()
        }
    }
}

fn ensemble(size: usize, texture: Texture) -> ProblemSpec {
    ProblemSpec::Ensemble {
        size,
        texture,
        holder_alpha: 0.5,
        data: DataKind::Full,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Pass,
    Fail,
    /// Constant extraction and other measurements without a claimed bound.
    Observed,
    /// A property the theory predicts to fail, and which does fail.
    ExpectedFail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Observed => "OBSERVED",
            Status::ExpectedFail => "FAIL-as-expected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub status: Status,
    pub detail: String,
}

/// Collects the files, verdicts and summary entries of one run.
pub struct Report {
    out: PathBuf,
    verdicts: Vec<Verdict>,
    summary: Map<String, Value>,
    files: Vec<String>,
}

impl Report {
    fn new(out: &Path) -> Result<Self> {
        fs::create_dir_all(out)?;
        Ok(Report {
            out: out.to_path_buf(),
            verdicts: Vec::new(),
            summary: Map::new(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.out
    }

    /// Creates `name` in the output directory and hands a writer to `fill`.
    pub fn file(&mut self, name: &str, fill: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.out.join(name))?);
        fill(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        self.file(name, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(header)?;
            for row in rows {
                out.write_record(row)?;
            }
            out.flush()?;
            Ok(())
        })
    }

    fn push(&mut self, check: String, status: Status, detail: String) {
        debug_assert!(
            self.verdicts.iter().all(|v| v.check != check),
            "duplicate verdict {check}"
        );
        self.verdicts.push(Verdict { check, status, detail });
    }

    pub fn check(&mut self, check: impl Into<String>, pass: bool, detail: impl Into<String>) {
        let status = if pass { Status::Pass } else { Status::Fail };
        self.push(check.into(), status, detail.into());
    }

    pub fn observe(&mut self, check: impl Into<String>, detail: impl Into<String>) {
        self.push(check.into(), Status::Observed, detail.into());
    }

    /// `fails` is whether the property failed; failure is the expected outcome.
    pub fn expect_failure(&mut self, check: impl Into<String>, fails: bool, detail: impl Into<String>) {
        let status = if fails { Status::ExpectedFail } else { Status::Fail };
        self.push(check.into(), status, detail.into());
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.summary.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub command: Command,
    pub verdicts: Vec<Verdict>,
    pub files: Vec<String>,
}

impl RunOutcome {
    pub fn failures(&self) -> usize {
        self.verdicts.iter().filter(|v| v.status == Status::Fail).count()
    }

    /// 0 when nothing failed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failures() > 0)
    }
}

/// Runs the configured experiment and writes `config.json`, its CSV tables,
/// `summary.json` and `verdict.txt` into the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut report = Report::new(&cfg.out)?;
    report.file("config.json", |w| {
        serde_json::to_writer_pretty(&mut *w, cfg)?;
        Ok(writeln!(w)?)
    })?;
    match cfg.command {
        Command::Solve => experiments::solve(cfg, &mut report)?,
        Command::Caccioppoli => experiments::caccioppoli(cfg, &mut report)?,
        Command::Degiorgi => experiments::degiorgi(cfg, &mut report)?,
        Command::Liouville => experiments::liouville(cfg, &mut report)?,
        Command::Schauder => experiments::schauder(cfg, &mut report)?,
        Command::Blowup => experiments::blowup(cfg, &mut report)?,
        Command::Bootstrap => experiments::bootstrap(cfg, &mut report)?,
        Command::Mollify => experiments::mollify(cfg, &mut report)?,
    }
    let count = |s: Status| report.verdicts.iter().filter(|v| v.status == s).count();
    let counts = serde_json::json!({
        "pass": count(Status::Pass),
        "fail": count(Status::Fail),
        "observed": count(Status::Observed),
        "expected_fail": count(Status::ExpectedFail),
    });
    let verdicts = std::mem::take(&mut report.verdicts);
    report.file("verdict.txt", |w| {
        for v in &verdicts {
            writeln!(w, "{}\t{}\t{}", v.status, v.check, v.detail)?;
        }
        Ok(())
    })?;
    let mut summary = Map::new();
    summary.insert("command".into(), Value::from(cfg.command.name()));
    summary.insert("seed".into(), Value::from(cfg.seed));
    summary.insert("verdicts".into(), counts);
    summary.insert("results".into(), Value::Object(std::mem::take(&mut report.summary)));
    let mut files = report.files.clone();
    files.push("summary.json".into());
    summary.insert("files".into(), serde_json::to_value(&files)?);
    report.file("summary.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        Ok(writeln!(w)?)
    })?;
    Ok(RunOutcome {
        command: cfg.command,
        verdicts,
        files,
    })
}

/// Shortest round-trip decimal form, as used in every table.
pub(crate) fn num(v: f64) -> String {
    format!("{v:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for c in Command::ALL {
            let cfg = ExperimentConfig::default_for(c);
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn partial_config_merges_over_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"command": "caccioppoli", "grid": {"m": 33}, "problem": {"kind": "zero"}, "params": {"resolutions": []}}"#,
        )
        .unwrap();
        assert_eq!(cfg.grid.m, 33);
        assert_eq!(cfg.grid.n, 2);
        assert_eq!(cfg.problem, ProblemSpec::Zero);
        assert_eq!(cfg.params.r, Some(0.5));
        assert_eq!(cfg.resolutions(), vec![33]);
    }

    #[test]
    fn config_errors() {
        assert!(ExperimentConfig::from_json(r#"{"grid": {"m": 33}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"command": "nope"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"command": "solve", "params": {"bogus": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"command": "solve", "grid": {"m": 4}}"#).is_err());
    }
}
