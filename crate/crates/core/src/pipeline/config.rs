//! Pipeline configuration: one JSON document, validated before any data is
//! read.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::SvmParams;
use crate::dsp::{
    SosFilter, DEFAULT_BANDPASS_ORDER, DEFAULT_BAND_HZ, DEFAULT_NOTCH_HZ, DEFAULT_NOTCH_Q,
};
use crate::error::{Error, Result};
use crate::features::FeatureParams;
use crate::ingest::{ActionProfile, MERGED_RATE_HZ};
use crate::matching::{
    Boundaries, ExtractOptions, LocalCost, SegmentScore, Template, DEFAULT_MAX_DEPTH,
    DEFAULT_THRESHOLD, DEFAULT_WINDOW_FACTOR,
};
use crate::series::TimeSeries;

/// Leading eigentriples kept when smoothing the elbow trace.
pub const DEFAULT_SSA_RANK: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub enabled: bool,
    pub band_hz: (f64, f64),
    /// Number of band-pass biquads.
    pub order: usize,
    /// Power-line frequency; `null` disables the notch.
    pub notch_hz: Option<f64>,
    pub notch_q: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            band_hz: DEFAULT_BAND_HZ,
            order: DEFAULT_BANDPASS_ORDER,
            notch_hz: Some(DEFAULT_NOTCH_HZ),
            notch_q: DEFAULT_NOTCH_Q,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsaConfig {
    /// Embedding window; `null` uses min(N/2, 128).
    pub window_len: Option<usize>,
    pub rank: usize,
}

impl Default for SsaConfig {
    fn default() -> Self {
        Self {
            window_len: None,
            rank: DEFAULT_SSA_RANK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdtwConfig {
    pub window_factor: usize,
    pub threshold: f64,
    pub max_depth: usize,
    pub local_cost: LocalCost,
    pub boundaries: Boundaries,
    pub refine: bool,
    pub score: SegmentScore,
}

impl Default for MdtwConfig {
    fn default() -> Self {
        let e = ExtractOptions::default();
        Self {
            window_factor: DEFAULT_WINDOW_FACTOR,
            threshold: DEFAULT_THRESHOLD,
            max_depth: DEFAULT_MAX_DEPTH,
            local_cost: e.local_cost,
            boundaries: e.boundaries,
            refine: e.refine,
            score: e.score,
        }
    }
}

impl MdtwConfig {
    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            boundaries: self.boundaries,
            refine: self.refine,
            score: self.score,
            local_cost: self.local_cost,
        }
    }
}

/// Where a template's elbow trace comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TemplateSource {
    /// A built-in synthetic action profile.
    Builtin { name: String, len: usize },
    /// Inline samples, degrees.
    Samples(Vec<f64>),
    /// Text file with one sample per line; relative to the config file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionConfig {
    pub name: String,
    pub template: TemplateSource,
    pub expected_count: usize,
    #[serde(default)]
    pub max_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub c: f64,
    /// `null` uses the median pairwise distance heuristic.
    pub gamma: Option<f64>,
    pub folds: usize,
    pub train_fraction: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let p = SvmParams::default();
        Self {
            c: p.c,
            gamma: p.gamma,
            folds: 5,
            train_fraction: 0.8,
            tolerance: p.tolerance,
            max_iterations: p.max_iterations,
        }
    }
}

impl ClassifierConfig {
    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            c: self.c,
            gamma: self.gamma,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..SvmParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    /// Address the angle datagram listener binds to.
    pub bind: String,
    /// Angle timestamps plus this offset give EMG clock time.
    pub clock_offset_s: f64,
    /// Linear interpolation of angles instead of zero-order hold.
    pub interpolate: bool,
    /// How long to wait for late angle datagrams after the EMG stream ends.
    pub idle_timeout_ms: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:9870".into(),
            clock_offset_s: 0.0,
            interpolate: false,
            idle_timeout_ms: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seeds every random choice downstream (folds, splits).
    pub seed: u64,
    pub filter: FilterConfig,
    pub ssa: SsaConfig,
    pub mdtw: MdtwConfig,
    pub actions: Vec<ActionConfig>,
    pub features: FeatureParams,
    pub classifier: ClassifierConfig,
    pub live: LiveConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            filter: FilterConfig::default(),
            ssa: SsaConfig::default(),
            mdtw: MdtwConfig::default(),
            actions: Vec::new(),
            features: FeatureParams::default(),
            classifier: ClassifierConfig::default(),
            live: LiveConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl PipelineConfig {
    /// Config whose actions are the built-in profiles, each expected
    /// `expected_count` times with templates of `template_len` samples.
    pub fn for_builtin_actions(
        count: usize,
        expected_count: usize,
        template_len: usize,
    ) -> Result<Self> {
        let builtins = ActionProfile::builtins();
        if count == 0 || count > builtins.len() {
            return Err(config_err(format!(
                "action count must be 1..={}",
                builtins.len()
            )));
        }
        let actions = builtins[..count]
            .iter()
            .map(|p| ActionConfig {
                name: p.name.clone(),
                template: TemplateSource::Builtin {
                    name: p.name.clone(),
                    len: template_len,
                },
                expected_count,
                max_distance: None,
            })
            .collect();
        Ok(Self {
            actions,
            ..Self::default()
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Relative template paths are
    /// resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for a in &mut cfg.actions {
            if let TemplateSource::File(p) = &mut a.template {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical (compact) JSON form. The listen address
    /// is an endpoint, not a processing setting, and is left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.live.bind = LiveConfig::default().bind;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checks every numeric field against the preconditions of the module
    /// that consumes it.
    pub fn validate(&self) -> Result<()> {
        let to_config = |e: Error| config_err(e.to_string());
        let f = &self.filter;
        if f.enabled {
            SosFilter::butterworth_bandpass(MERGED_RATE_HZ, f.band_hz.0, f.band_hz.1, f.order)
                .map_err(|e| config_err(format!("filter: {e}")))?;
            if let Some(hz) = f.notch_hz {
                SosFilter::notch(MERGED_RATE_HZ, hz, f.notch_q)
                    .map_err(|e| config_err(format!("filter: {e}")))?;
            }
        }
        if self.ssa.rank == 0 {
            return Err(config_err("ssa.rank must be at least 1"));
        }
        if self.ssa.window_len.is_some_and(|l| l < 2) {
            return Err(config_err("ssa.window_len must be at least 2"));
        }
        let m = &self.mdtw;
        if m.window_factor == 0 {
            return Err(config_err("mdtw.window_factor must be at least 1"));
        }
        if !(m.threshold > 0.0 && m.threshold <= 1.0) {
            return Err(config_err(format!(
                "mdtw.threshold must be in (0, 1], got {}",
                m.threshold
            )));
        }
        if m.max_depth == 0 {
            return Err(config_err("mdtw.max_depth must be at least 1"));
        }
        if self.actions.is_empty() {
            return Err(config_err("at least one action is required"));
        }
        let mut names: Vec<&str> = self.actions.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err("action names must be unique"));
        }
        for a in &self.actions {
            if a.name.is_empty() || a.name.contains([',', '\n']) {
                return Err(config_err(format!("invalid action name {:?}", a.name)));
            }
            if a.expected_count == 0 {
                return Err(config_err(format!(
                    "action {}: expected_count must be at least 1",
                    a.name
                )));
            }
            if a.max_distance.is_some_and(|d| !(d.is_finite() && d >= 0.0)) {
                return Err(config_err(format!(
                    "action {}: max_distance must be non-negative",
                    a.name
                )));
            }
            match &a.template {
                TemplateSource::Builtin { name, len } => {
                    if !ActionProfile::builtins().iter().any(|p| &p.name == name) {
                        return Err(config_err(format!(
                            "action {}: unknown builtin template {name:?}",
                            a.name
                        )));
                    }
                    if *len < 2 {
                        return Err(config_err(format!(
                            "action {}: template len must be at least 2",
                            a.name
                        )));
                    }
                }
                TemplateSource::Samples(s) => {
                    if s.len() < 2 || s.iter().any(|v| !v.is_finite()) {
                        return Err(config_err(format!(
                            "action {}: template needs at least 2 finite samples",
                            a.name
                        )));
                    }
                }
                // Contents are checked when the template is loaded.
                TemplateSource::File(_) => {}
            }
        }
        self.features.validate().map_err(to_config)?;
        let c = &self.classifier;
        c.svm_params().validate().map_err(to_config)?;
        if c.folds < 2 {
            return Err(config_err("classifier.folds must be at least 2"));
        }
        if !(c.train_fraction > 0.0 && c.train_fraction < 1.0) {
            return Err(config_err("classifier.train_fraction must be in (0, 1)"));
        }
        if !self.live.clock_offset_s.is_finite() {
            return Err(config_err("live.clock_offset_s must be finite"));
        }
        Ok(())
    }

    /// Resolves every action's template.
    pub fn templates(&self) -> Result<Vec<Template>> {
        self.actions
            .iter()
            .map(|a| {
                let samples = match &a.template {
                    TemplateSource::Builtin { name, len } => ActionProfile::builtins()
                        .into_iter()
                        .find(|p| &p.name == name)
                        .ok_or_else(|| config_err(format!("unknown builtin template {name:?}")))?
                        .template(*len)?
                        .into_samples(),
                    TemplateSource::Samples(s) => s.clone(),
                    TemplateSource::File(p) => read_template_file(p)?,
                };
                let series = TimeSeries::from_samples(samples, MERGED_RATE_HZ)?;
                Template::new(a.name.clone(), series, a.expected_count, a.max_distance)
                    .map_err(|e| config_err(format!("action {}: {e}", a.name)))
            })
            .collect()
    }

    /// Largest scan window over all actions, in samples.
    pub fn max_window_len(&self) -> Result<usize> {
        Ok(self
            .templates()?
            .iter()
            .map(|t| t.len() * self.mdtw.window_factor)
            .max()
            .unwrap_or(0))
    }
}

fn read_template_file(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("template {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| Error::Format {
                line: i + 1,
                message: format!("{}: not a number: {l:?}", path.display()),
            })
        })
        .collect()
}
