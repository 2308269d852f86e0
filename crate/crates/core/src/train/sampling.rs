use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::patch::{fill_patch, neighborhood_offsets, raw_targets};
use super::{Result, TrainError};
use crate::net::IGNORE;
use crate::spectral::{CoordField, COORD_WIDTH};
use crate::volume::{BrainMask, Dims};

/// Which network a sampling plan feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Foreground versus in-mask background; targets are 0 or 1.
    FgBg,
    /// Structures on the foreground; label `l` becomes class `l - 1` and
    /// non-structure neighbours are ignored by the loss.
    Structures,
    /// Background and every structure in one classifier; targets are the
    /// internal label ids.
    OneStep,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::FgBg => "fg_bg",
            Stage::Structures => "structures",
            Stage::OneStep => "one_step",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPlan {
    pub stage: Stage,
    /// Patches per class and image.
    pub quota: usize,
    /// Classes sampled at twice the quota (white and gray matter).
    #[serde(default)]
    pub doubled: Vec<u16>,
    pub patch: usize,
    /// Shift patch centres by a uniform offset in `{-1, 0, 1}^3`.
    #[serde(default)]
    pub jitter: bool,
    /// Take at most the available voxels of a class instead of topping up
    /// with replacement.
    #[serde(default)]
    pub cap_to_available: bool,
}

impl SamplingPlan {
    pub fn fg_bg() -> Self {
        Self { stage: Stage::FgBg, quota: 30_000, doubled: Vec::new(), patch: 23, jitter: false, cap_to_available: false }
    }

    pub fn structures(doubled: Vec<u16>) -> Self {
        Self { stage: Stage::Structures, quota: 3_000, doubled, patch: 23, jitter: false, cap_to_available: false }
    }

    pub fn quota_for(&self, class: u16) -> usize {
        if self.doubled.contains(&class) {
            2 * self.quota
        } else {
            self.quota
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.quota == 0 {
            errs.push("quota must be positive".to_string());
        }
        if self.patch % 2 == 0 {
            errs.push(format!("patch {} must be odd", self.patch));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(TrainError::Config(errs.join("; ")))
        }
    }

    /// Sampling class of a voxel: `None` outside the mask or, for the
    /// structures stage, on background.
    fn class_of(&self, label: u16, in_mask: bool) -> Option<u16> {
        if !in_mask {
            return None;
        }
        match self.stage {
            Stage::FgBg => Some(u16::from(label != 0)),
            Stage::Structures => (label != 0).then_some(label),
            Stage::OneStep => Some(label),
        }
    }

    /// Converts raw neighbourhood labels to training targets.
    pub fn targets(&self, raw: &[u16]) -> Vec<u16> {
        raw.iter()
            .map(|&l| match self.stage {
                Stage::FgBg => u16::from(l != 0),
                Stage::Structures if l == 0 => IGNORE,
                Stage::Structures => l - 1,
                Stage::OneStep => l,
            })
            .collect()
    }
}

/// A drawn patch centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleCenter {
    /// Voxel whose labels are the targets.
    pub voxel: usize,
    pub class: u16,
    /// Jitter applied to the patch centre only.
    pub shift: [i8; 3],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub centers: Vec<SampleCenter>,
    /// Required classes with no voxel in the image.
    pub missing: Vec<u16>,
}

/// Draws class-balanced centres. Every class in `classes` receives its
/// quota: without replacement when it has enough voxels, with replacement
/// otherwise (or capped at the available count when the plan says so).
pub fn sample_centers<R: Rng + ?Sized>(labels: &[u16], mask: &BrainMask, classes: &[u16], plan: &SamplingPlan, rng: &mut R) -> Result<SampleSet> {
    plan.validate()?;
    if labels.len() != mask.dims().len() {
        return Err(TrainError::Shape(format!("{} labels for a grid of {} voxels", labels.len(), mask.dims().len())));
    }
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (v, (&l, &m)) in labels.iter().zip(mask.bits()).enumerate() {
        if let Some(c) = plan.class_of(l, m) {
            if let Some(k) = classes.iter().position(|&x| x == c) {
                pools[k].push(v);
            }
        }
    }
    let mut set = SampleSet::default();
    for (&class, pool) in classes.iter().zip(&pools) {
        if pool.is_empty() {
            log::warn!("class {class} absent from image; skipped");
            set.missing.push(class);
            continue;
        }
        let quota = plan.quota_for(class);
        let picks: Vec<usize> = if quota <= pool.len() {
            index::sample(rng, pool.len(), quota).into_iter().map(|i| pool[i]).collect()
        } else if plan.cap_to_available {
            pool.clone()
        } else {
            (0..quota).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
        };
        for voxel in picks {
            let shift = if plan.jitter { [0i8; 3].map(|_| rng.gen_range(-1..=1)) } else { [0; 3] };
            set.centers.push(SampleCenter { voxel, class, shift });
        }
    }
    Ok(set)
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub patch: Vec<f32>,
    pub coords: [f32; COORD_WIDTH],
    pub targets: Vec<u16>,
}

/// Assembles a sample from a standardized image. Coordinates are read at
/// the target voxel, not at the jittered patch centre.
pub fn build_sample(image: &[f32], labels: &[u16], dims: Dims, coords: &CoordField, center: &SampleCenter, plan: &SamplingPlan, neighborhood: usize) -> Result<TrainSample> {
    let offsets = neighborhood_offsets(neighborhood)?;
    let c = dims.coords(center.voxel);
    let p = [0, 1, 2].map(|a| c[a] as i64 + center.shift[a] as i64);
    let mut patch = vec![0.0; plan.patch.pow(3)];
    fill_patch(image, dims, p, plan.patch, &mut patch);
    Ok(TrainSample { patch, coords: coords.get(center.voxel), targets: plan.targets(&raw_targets(labels, dims, center.voxel, &offsets)) })
}
