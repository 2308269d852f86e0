//! JSON configuration files. Every `validate` collects all problems before
//! failing.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use voxseg::crf::CrfParams;
use voxseg::net::NetConfig;
use voxseg::phantom::{default_suite, PhantomSpec};
use voxseg::train::{SamplingPlan, TrainConfig};

use crate::error::{CliError, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Named architecture or explicit layer sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArchSpec {
    Preset(Preset),
    Custom(NetConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Canonical,
    Compact,
}

impl Default for ArchSpec {
    fn default() -> Self {
        ArchSpec::Preset(Preset::Canonical)
    }
}

impl ArchSpec {
    /// Layer sizes; class and task counts are filled in per stage.
    pub fn resolve(&self) -> NetConfig {
        match self {
            ArchSpec::Preset(Preset::Canonical) => NetConfig::canonical(2, 1),
            ArchSpec::Preset(Preset::Compact) => NetConfig::compact(2, 1),
            ArchSpec::Custom(c) => c.clone(),
        }
    }
}

/// Which networks `train` produces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Foreground network plus structure network.
    #[default]
    Cascade,
    /// One network over background and all structures.
    OneStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagePaths {
    pub image: PathBuf,
    pub seg: PathBuf,
    pub mask: PathBuf,
    /// Three precomputed spectral channels; computed from the mask if absent.
    #[serde(default)]
    pub coords: Option<[PathBuf; 3]>,
}

fn default_threads() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn fg_plan() -> SamplingPlan {
    SamplingPlan::fg_bg()
}

fn structure_plan() -> SamplingPlan {
    SamplingPlan::structures(Vec::new())
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFileConfig {
    pub images: Vec<ImagePaths>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "fg_plan")]
    pub fg_plan: SamplingPlan,
    /// Also used as the one-step plan, with its stage replaced.
    #[serde(default = "structure_plan")]
    pub structure_plan: SamplingPlan,
    #[serde(default)]
    pub arch: ArchSpec,
    /// Feed spectral and Cartesian coordinates; false trains on zeros.
    #[serde(default = "default_true")]
    pub coordinates: bool,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl TrainFileConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.images.is_empty() {
            bad.push("images must list at least one training image".to_string());
        }
        for (i, im) in self.images.iter().enumerate() {
            let mut paths = vec![&im.image, &im.seg, &im.mask];
            if let Some(c) = &im.coords {
                paths.extend(c.iter());
            }
            bad.extend(paths.into_iter().filter(|p| !p.exists()).map(|p| format!("images[{i}]: {} does not exist", p.display())));
        }
        common_checks(&self.train, &self.fg_plan, &self.structure_plan, &self.arch, self.threads, &mut bad);
        finish(bad)
    }
}

fn common_checks(train: &TrainConfig, fg: &SamplingPlan, st: &SamplingPlan, arch: &ArchSpec, threads: usize, bad: &mut Vec<String>) {
    let mut push = |e: Option<String>| bad.extend(e);
    push(train.validate().err().map(|e| e.to_string()));
    push(fg.validate().err().map(|e| format!("fg_plan: {e}")));
    push(st.validate().err().map(|e| format!("structure_plan: {e}")));
    let net = NetConfig { class_count: 2, task_count: train.neighborhood, ..arch.resolve() };
    push(net.validate().err().map(|e| format!("arch: {e}")));
    for (name, plan) in [("fg_plan", fg), ("structure_plan", st)] {
        if plan.patch != net.patch {
            push(Some(format!("{name}.patch {} differs from the network patch {}", plan.patch, net.patch)));
        }
    }
    if threads == 0 {
        push(Some("threads must be at least 1".into()));
    }
}

fn finish(bad: Vec<String>) -> Result<()> {
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(bad.join("; ")))
    }
}

/// A suite entry by index or name, or an inline spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhantomSource {
    Index(usize),
    Name(String),
    Spec(Box<PhantomSpec>),
}

impl PhantomSource {
    pub fn resolve(&self) -> Result<PhantomSpec> {
        let suite = default_suite();
        let names = || suite.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(", ");
        match self {
            PhantomSource::Index(i) => suite
                .get(*i)
                .cloned()
                .ok_or_else(|| CliError::Validation(format!("phantom index {i} outside 0..{}", suite.len()))),
            PhantomSource::Name(n) => suite
                .iter()
                .find(|s| &s.name == n)
                .cloned()
                .ok_or_else(|| CliError::Validation(format!("unknown phantom {n:?}; known: {}", names()))),
            PhantomSource::Spec(s) => Ok((**s).clone()),
        }
    }
}

fn default_test_seed() -> u64 {
    1000
}

fn default_phantom() -> PhantomSource {
    PhantomSource::Index(0)
}

/// End-to-end run on a phantom: the training image and a test image share
/// the geometry and differ in noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    #[serde(default = "default_phantom")]
    pub phantom: PhantomSource,
    #[serde(default)]
    pub train_seed: u64,
    #[serde(default = "default_test_seed")]
    pub test_seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "fg_plan")]
    pub fg_plan: SamplingPlan,
    #[serde(default = "structure_plan")]
    pub structure_plan: SamplingPlan,
    #[serde(default)]
    pub arch: ArchSpec,
    #[serde(default)]
    pub crf: CrfParams,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        match self.phantom.resolve() {
            Ok(spec) => bad.extend(spec.validate().err().map(|e| e.to_string())),
            Err(e) => bad.push(e.to_string()),
        }
        common_checks(&self.train, &self.fg_plan, &self.structure_plan, &self.arch, self.threads, &mut bad);
        bad.extend(self.crf.validate().err().map(|e| e.to_string()));
        if self.stride == 0 {
            bad.push("stride must be at least 1".into());
        }
        finish(bad)
    }
}
