//! TOML run configurations and the runner that turns one into artifacts.
//!
//! ```toml
//! schema_version = 1
//! experiment = "fig1"
//! seed = 7
//! output_dir = "out/fig1"
//!
//! [model]
//! preset = "toy_haroche"
//!
//! # optional overrides
//! q = "poissonlike(3.46)"
//! n_grid = [10000]
//! n_reps = 10
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{mle, MleOptions};
use crate::family::{MixtureWeights, ParameterBox, ParametricFamily};
use crate::lab::{
    consistency_experiment, cramer_rao_experiment, fig1_experiment, lamn_experiment, mixture_collapse_experiment,
    purification_experiment, ExperimentPlan,
};
use crate::presets::{
    qubit_rotation_with, toy_default_photon_numbers, toy_haroche_family_with, Preset, PresetName, TOY_THETA_STAR,
};
use crate::quantum::QndSystem;
use crate::report::{fmt_real, to_json_string};
use crate::simulate::{counts, derive_seed, sample_mixture_trajectory};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "estimate")]
    Estimate,
    #[serde(rename = "lamn")]
    Lamn,
    #[serde(rename = "collapse")]
    Collapse,
    #[serde(rename = "consistency")]
    Consistency,
    #[serde(rename = "cramer-rao")]
    CramerRao,
    #[serde(rename = "purify")]
    Purify,
    #[serde(rename = "fig1")]
    Fig1,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Self::Estimate,
        Self::Lamn,
        Self::Collapse,
        Self::Consistency,
        Self::CramerRao,
        Self::Purify,
        Self::Fig1,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Estimate => "estimate",
            Self::Lamn => "lamn",
            Self::Collapse => "collapse",
            Self::Consistency => "consistency",
            Self::CramerRao => "cramer-rao",
            Self::Purify => "purify",
            Self::Fig1 => "fig1",
        }
    }

    fn default_n_grid(&self) -> Vec<usize> {
        match self {
            Self::Estimate | Self::Fig1 => vec![10_000],
            Self::Collapse => (2..=8).map(|k| k * 250).collect(),
            Self::Purify => vec![50, 100, 200, 500],
            _ => vec![1000, 5000, 10_000],
        }
    }

    fn default_n_reps(&self) -> usize {
        match self {
            Self::Estimate => 1,
            Self::Fig1 => 10,
            Self::Collapse => 200,
            Self::Purify => 5000,
            _ => 2000,
        }
    }

    fn default_h(&self) -> f64 {
        match self {
            Self::Lamn | Self::Collapse => 1.0,
            _ => 0.0,
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.iter().copied().find(|e| e.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|e| e.as_str()).collect();
            Error::Config(format!("unknown experiment '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Either a named preset or an inline closed-form family. Empty means the
/// `toy_haroche` preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub preset: Option<String>,
    /// `toy_haroche` or `qubit_rotation`, configured by the fields below.
    pub family: Option<String>,
    pub photon_numbers: Option<Vec<u32>>,
    pub visibility: Option<f64>,
    pub components: Option<usize>,
}

/// `[0.1, 0.9]`, `"uniform"` or `"poissonlike(λ)"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Explicit(Vec<f64>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    #[serde(default)]
    pub model: ModelSpec,
    pub theta_star: Option<Vec<f64>>,
    pub q: Option<WeightSpec>,
    pub h: Option<Vec<f64>>,
    pub n_grid: Option<Vec<usize>>,
    pub n_reps: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub search_box: Option<BoxSpec>,
    /// Steps between recorded estimates in `fig1`.
    pub stride: Option<usize>,
    pub workers: Option<usize>,
}

impl RunConfig {
    /// Defaults for an experiment on the toy preset.
    pub fn new(experiment: Experiment) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            model: ModelSpec { preset: Some("toy_haroche".into()), ..ModelSpec::default() },
            theta_star: None,
            q: None,
            h: None,
            n_grid: None,
            n_reps: None,
            seed: 0,
            output_dir: None,
            search_box: None,
            stride: None,
            workers: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, found {}",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from(format!("qndlab-out/{}", self.experiment)))
    }

    fn model(&self) -> Result<(Preset, Vec<u32>)> {
        let m = &self.model;
        match (&m.preset, &m.family) {
            (Some(_), Some(_)) => Err(Error::Config("model: give either 'preset' or 'family', not both".into())),
            (None, None) | (Some(_), None) => {
                let name = m.preset.as_deref().unwrap_or("toy_haroche");
                if m.photon_numbers.is_some() || m.visibility.is_some() || m.components.is_some() {
                    return Err(Error::Config(
                        "model: photon_numbers, visibility and components apply to inline families only".into(),
                    ));
                }
                let name = PresetName::parse(name)?;
                let preset = crate::presets::preset(name)?;
                let occ = occupations(&preset);
                Ok((preset, occ))
            }
            (None, Some(family)) => match family.as_str() {
                "toy_haroche" => {
                    let ns = m.photon_numbers.clone().unwrap_or_else(toy_default_photon_numbers);
                    let v = m.visibility.unwrap_or(crate::presets::TOY_VISIBILITY);
                    let fam = toy_haroche_family_with(&ns, v).map_err(config_error("model"))?;
                    let preset = Preset {
                        name: PresetName::ToyHaroche,
                        q: MixtureWeights::uniform(ns.len())?,
                        theta_star: vec![TOY_THETA_STAR],
                        search_box: fam.domain().clone(),
                        family: fam,
                        system: None,
                    };
                    Ok((preset, ns))
                }
                "qubit_rotation" => {
                    let preset = qubit_rotation_with(m.components.unwrap_or(2)).map_err(config_error("model"))?;
                    let occ = occupations(&preset);
                    Ok((preset, occ))
                }
                other => Err(Error::Config(format!(
                    "model.family: unknown family '{other}' (expected toy_haroche or qubit_rotation)"
                ))),
            },
        }
    }

    /// Resolve defaults and overrides into a family and a validated plan.
    pub fn resolve(&self) -> Result<Resolved> {
        let (preset, occ) = self.model()?;
        let fam = &preset.family;
        let mut plan = ExperimentPlan::from_preset(&preset, self.seed);
        plan.n_grid = self.n_grid.clone().unwrap_or_else(|| self.experiment.default_n_grid());
        plan.n_reps = self.n_reps.unwrap_or_else(|| self.experiment.default_n_reps());
        plan.h = self.h.clone().unwrap_or_else(|| vec![self.experiment.default_h(); fam.dim()]);
        plan.workers = self.workers;
        if let Some(t) = &self.theta_star {
            plan.theta_star = t.clone();
        }
        if let Some(b) = &self.search_box {
            plan.search_box = ParameterBox::new(b.lower.clone(), b.upper.clone()).map_err(config_error("search_box"))?;
        }
        if let Some(q) = &self.q {
            plan.q = parse_weights(q, fam.n_components(), &occ)?;
        }
        plan.validate(fam).map_err(config_error("plan"))?;
        let stride = self.stride.unwrap_or(100.min(plan.n_max()));
        if self.experiment == Experiment::Fig1 && (stride == 0 || !plan.n_max().is_multiple_of(stride)) {
            return Err(Error::Config(format!("stride: must be positive and divide {}", plan.n_max())));
        }
        Ok(Resolved { family: preset.family.clone(), system: preset.system.clone(), plan, stride })
    }
}

fn config_error(field: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Domain(m) | Error::Construction(m) | Error::Config(m) => Error::Config(format!("{field}: {m}")),
        other => other,
    }
}

fn occupations(p: &Preset) -> Vec<u32> {
    match p.name {
        PresetName::ToyHaroche | PresetName::ToyHarocheVisibility => toy_default_photon_numbers(),
        PresetName::QubitRotation => (1..=p.family.n_components() as u32).collect(),
    }
}

/// Parse a weight spec against `d` components with the given occupation numbers.
pub fn parse_weights(spec: &WeightSpec, d: usize, occupations: &[u32]) -> Result<MixtureWeights> {
    let q = match spec {
        WeightSpec::Explicit(w) => {
            if w.len() != d {
                return Err(Error::Config(format!("q: expected {d} weights, found {}", w.len())));
            }
            MixtureWeights::from_unnormalized(w)
        }
        WeightSpec::Named(s) => {
            let s = s.trim();
            if s == "uniform" {
                MixtureWeights::uniform(d)
            } else if let Some(arg) = s.strip_prefix("poissonlike(").and_then(|r| r.strip_suffix(')')) {
                let lambda: f64 = arg
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("q: cannot parse rate '{arg}' in '{s}'")))?;
                MixtureWeights::poisson_like(lambda, occupations)
            } else {
                return Err(Error::Config(format!(
                    "q: unknown rule '{s}' (expected a list, \"uniform\" or \"poissonlike(<rate>)\")"
                )));
            }
        }
    };
    q.map_err(config_error("q"))
}

/// A configuration resolved against its family.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub family: ParametricFamily,
    pub system: Option<QndSystem>,
    pub plan: ExperimentPlan,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub experiment: Experiment,
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
}

/// Exit status for an error: 2 for configuration problems, 3 for numerical
/// refusals, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Construction(_) => 2,
        Error::Numerical(_) | Error::Capability(_) | Error::Inference(_) => 3,
        _ => 1,
    }
}

fn emit(dir: &Path, artifacts: &mut Vec<PathBuf>, name: &str, json: String) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, json)?;
    artifacts.push(path);
    Ok(())
}

/// Run the configured experiment and write its artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let r = cfg.resolve()?;
    let out = cfg.output_dir();
    fs::create_dir_all(&out)?;
    let fam = &r.family;
    let plan = &r.plan;
    let mut artifacts = Vec::new();
    let passed = match cfg.experiment {
        Experiment::Estimate => {
            let n = plan.n_max();
            let traj = sample_mixture_trajectory(fam, &plan.theta_star, &plan.q, n, derive_seed(plan.master_seed, 0))?;
            let c = counts(&traj, fam.alphabet_size(), n)?;
            let opts = MleOptions { search_box: Some(plan.search_box.clone()), ..MleOptions::default() };
            let rep = mle(fam, &plan.q, &c, &opts)?;
            emit(&out, &mut artifacts, "estimate_report.json", to_json_string(&rep)?)?;
            let trace = out.join("estimate_trace.csv");
            rep.write_trace_csv(fs::File::create(&trace)?)?;
            let record = out.join("trajectory.csv");
            traj.write_csv(fam, fs::File::create(&record)?)?;
            artifacts.push(trace);
            artifacts.push(record);
            rep.converged
        }
        Experiment::Lamn => {
            let rep = lamn_experiment(fam, plan)?;
            emit(&out, &mut artifacts, "lamn_report.json", to_json_string(&rep)?)?;
            rep.passed
        }
        Experiment::Collapse => {
            let rep = mixture_collapse_experiment(fam, plan)?;
            emit(&out, &mut artifacts, "collapse_report.json", to_json_string(&rep)?)?;
            rep.passed
        }
        Experiment::Consistency => {
            let rep = consistency_experiment(fam, plan)?;
            emit(&out, &mut artifacts, "consistency_report.json", to_json_string(&rep)?)?;
            rep.passed
        }
        Experiment::CramerRao => {
            let rep = cramer_rao_experiment(fam, plan)?;
            emit(&out, &mut artifacts, "cramer-rao_report.json", to_json_string(&rep)?)?;
            rep.passed
        }
        Experiment::Purify => {
            let rep = purification_experiment(fam, r.system.as_ref(), plan)?;
            emit(&out, &mut artifacts, "purify_report.json", to_json_string(&rep)?)?;
            rep.passed
        }
        Experiment::Fig1 => {
            let rep = fig1_experiment(fam, plan, r.stride)?;
            for (k, run) in rep.runs.iter().enumerate() {
                let path = out.join(format!("fig1_run_{:02}.csv", k + 1));
                let mut w = csv::Writer::from_path(&path)?;
                let mut header = vec!["n".to_string()];
                if fam.dim() == 1 {
                    header.push("theta_hat".into());
                } else {
                    header.extend((0..fam.dim()).map(|i| format!("theta_hat_{i}")));
                }
                w.write_record(&header)?;
                for (n, t) in run.n.iter().zip(&run.theta_hat) {
                    let mut row = vec![n.to_string()];
                    row.extend(t.iter().map(|x| fmt_real(*x)));
                    w.write_record(&row)?;
                }
                w.flush()?;
                artifacts.push(path);
            }
            emit(&out, &mut artifacts, "fig1_summary.json", to_json_string(&rep)?)?;
            rep.passed
        }
    };
    Ok(RunOutcome { experiment: cfg.experiment, passed, artifacts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_preset_defaults() {
        let cfg = RunConfig::from_toml_str("schema_version = 1\nexperiment = \"fig1\"\nseed = 7\n[model]\npreset = \"toy_haroche\"\n")
            .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.plan.n_grid, vec![10_000]);
        assert_eq!(r.plan.n_reps, 10);
        assert_eq!(r.stride, 100);
        assert_eq!(r.plan.master_seed, 7);
        assert!((r.plan.q.get(0) - 0.1134).abs() < 1e-4);
    }

    #[test]
    fn weight_rules() {
        let occ = [1, 2, 3];
        let p = parse_weights(&WeightSpec::Named("poissonlike(2)".into()), 3, &occ).unwrap();
        let w = [2.0, 2.0, 4.0 / 3.0];
        let s: f64 = w.iter().sum();
        for (a, b) in p.as_slice().iter().zip(w) {
            assert!((a - b / s).abs() < 1e-15);
        }
        assert_eq!(parse_weights(&WeightSpec::Named("uniform".into()), 2, &occ).unwrap().as_slice(), &[0.5, 0.5]);
        assert!(parse_weights(&WeightSpec::Named("zipf".into()), 3, &occ).is_err());
        assert!(parse_weights(&WeightSpec::Explicit(vec![1.0, 1.0]), 3, &occ).is_err());
        assert!(parse_weights(&WeightSpec::Named("poissonlike(x)".into()), 3, &occ).is_err());
    }

    #[test]
    fn malformed_configs_are_config_errors() {
        for text in [
            "schema_version = 2\nexperiment = \"lamn\"\n[model]\npreset = \"toy_haroche\"\n",
            "schema_version = 1\nexperiment = \"nope\"\n",
            "schema_version = 1\nexperiment = \"lamn\"\nbogus = 3\n",
            "schema_version = 1\nexperiment = \"lamn\"\n[model]\npreset = \"missing\"\n",
            "schema_version = 1\nexperiment = \"lamn\"\nn_reps = \"many\"\n",
            "schema_version = 1\nexperiment = \"lamn\"\nh = [100.0]\n[model]\npreset = \"toy_haroche\"\n",
        ] {
            let err = RunConfig::from_toml_str(text).and_then(|c| c.resolve().map(|_| ()));
            let err = err.unwrap_err();
            assert_eq!(exit_code(&err), 2, "{text}: {err}");
        }
    }

    #[test]
    fn parse_errors_carry_locations() {
        let err = RunConfig::from_toml_str("schema_version = 1\nexperiment = \"lamn\"\nn_reps = \"many\"\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::new(Experiment::CramerRao);
        cfg.q = Some(WeightSpec::Named("poissonlike(3.46)".into()));
        cfg.n_grid = Some(vec![100, 200]);
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
