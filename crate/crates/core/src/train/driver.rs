use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::patch::{fill_patch, neighborhood_offsets, raw_targets, standardize};
use super::sampling::{sample_centers, SampleCenter, SamplingPlan, Stage};
use super::sgd::{poly_lr, sgd_step};
use super::{Result, TrainError};
use crate::net::{softmax_loss, Mode, NetConfig, Network, Tensor};
use crate::scalar::Real;
use crate::spectral::{CoordField, COORD_WIDTH};
use crate::volume::{BrainMask, Volume};

fn d_base_lr() -> f64 {
    0.01
}
fn d_power() -> f64 {
    0.9
}
fn d_batch() -> usize {
    64
}
fn d_momentum() -> f64 {
    0.9
}
fn d_epochs() -> usize {
    2
}
fn d_neighborhood() -> usize {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_base_lr")]
    pub base_lr: f64,
    #[serde(default = "d_power")]
    pub power: f64,
    /// Defaults to `epochs` times the batches per epoch.
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_neighborhood")]
    pub neighborhood: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            base_lr: d_base_lr(),
            power: d_power(),
            max_iter: None,
            batch_size: d_batch(),
            momentum: d_momentum(),
            epochs: d_epochs(),
            seed: 0,
            neighborhood: d_neighborhood(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            errs.push(format!("base_lr {} must be positive", self.base_lr));
        }
        if !(self.power >= 0.0) {
            errs.push(format!("power {} must be nonnegative", self.power));
        }
        // Batch norm needs two samples for a batch variance.
        if self.batch_size < 2 {
            errs.push(format!("batch_size {} must be at least 2", self.batch_size));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            errs.push(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if self.epochs == 0 {
            errs.push("epochs must be positive".into());
        }
        if self.max_iter == Some(0) {
            errs.push("max_iter must be positive".into());
        }
        if ![1, 7, 27].contains(&self.neighborhood) {
            errs.push(format!("neighborhood {} must be 1, 7 or 27", self.neighborhood));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(TrainError::Config(errs.join("; ")))
        }
    }
}

/// A training subject. `seg` holds internal label ids; `coords` may be
/// all zeros to train without location features.
#[derive(Debug, Clone)]
pub struct TrainImage {
    pub image: Volume,
    pub seg: Volume,
    pub mask: BrainMask,
    pub coords: CoordField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportLine {
    Iteration { stage: Stage, epoch: usize, iteration: usize, lr: f64, loss: f64, task_accuracy: Vec<Option<f64>> },
    Epoch { stage: Stage, epoch: usize, samples: usize, mean_loss: f64, task_accuracy: Vec<Option<f64>> },
    MissingClass { stage: Stage, image: usize, class: u16 },
}

/// Training log: per-iteration loss and per-task accuracy (centre task
/// first), epoch summaries and skipped classes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub lines: Vec<ReportLine>,
}

impl RunReport {
    pub fn to_json_lines(&self) -> String {
        self.lines.iter().map(|l| serde_json::to_string(l).expect("report lines serialize") + "\n").collect()
    }

    pub fn epoch_losses(&self, stage: Stage) -> Vec<f64> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                ReportLine::Epoch { stage: s, mean_loss, .. } if *s == stage => Some(*mean_loss),
                _ => None,
            })
            .collect()
    }

    pub fn iteration_losses(&self, stage: Stage) -> Vec<f64> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                ReportLine::Iteration { stage: s, loss, .. } if *s == stage => Some(*loss),
                _ => None,
            })
            .collect()
    }
}

struct Prepared<'a> {
    intensities: Vec<f32>,
    labels: Vec<u16>,
    src: &'a TrainImage,
}

fn prepare(images: &[TrainImage]) -> Result<Vec<Prepared<'_>>> {
    if images.is_empty() {
        return Err(TrainError::Config("at least one training image is required".into()));
    }
    images
        .iter()
        .map(|im| {
            im.image.same_grid(&im.seg)?;
            if im.coords.dims() != im.image.dims() {
                return Err(TrainError::Shape("coordinate field does not match the image grid".into()));
            }
            Ok(Prepared { intensities: standardize(&im.image, &im.mask)?, labels: im.seg.labels()?, src: im })
        })
        .collect()
}

/// Fixed-size minibatch assembled from sample centres.
pub struct Batch<T> {
    pub x: Tensor<T>,
    pub coords: Vec<T>,
    pub targets: Vec<u16>,
}

fn assemble<T: Real>(prepared: &[Prepared], picks: &[(usize, SampleCenter)], plan: &SamplingPlan, offsets: &[[i64; 3]]) -> Batch<T> {
    let p = plan.patch;
    let vol = p * p * p;
    let mut x = Tensor::zeros(&[picks.len(), 1, p, p, p]);
    let mut coords = Vec::with_capacity(picks.len() * COORD_WIDTH);
    let mut targets = Vec::with_capacity(picks.len() * offsets.len());
    for (k, (img, c)) in picks.iter().enumerate() {
        let im = &prepared[*img];
        let dims = im.src.image.dims();
        let at = dims.coords(c.voxel);
        let centre = [0, 1, 2].map(|a| at[a] as i64 + c.shift[a] as i64);
        fill_patch(&im.intensities, dims, centre, p, &mut x.data_mut()[k * vol..(k + 1) * vol]);
        coords.extend(im.src.coords.get(c.voxel).iter().map(|&v| T::of(v as f64)));
        targets.extend(plan.targets(&raw_targets(&im.labels, dims, c.voxel, offsets)));
    }
    Batch { x, coords, targets }
}

/// Classes a plan must sample for a network with `class_count` outputs.
fn required_classes(stage: Stage, class_count: usize) -> Vec<u16> {
    match stage {
        Stage::FgBg => vec![0, 1],
        Stage::Structures => (1..=class_count as u16).collect(),
        Stage::OneStep => (0..class_count as u16).collect(),
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

fn stage_tag(stage: Stage) -> u64 {
    match stage {
        Stage::FgBg => 1,
        Stage::Structures => 2,
        Stage::OneStep => 3,
    }
}

fn accuracy(correct: &[usize], counted: &[usize]) -> Vec<Option<f64>> {
    correct.iter().zip(counted).map(|(&c, &n)| (n > 0).then(|| c as f64 / n as f64)).collect()
}

/// Trains one network on one sampling plan. `arch.task_count` must equal
/// the configured neighbourhood; for the foreground stage
/// `arch.class_count` must be 2.
pub fn train_network<T: Real>(images: &[TrainImage], plan: &SamplingPlan, cfg: &TrainConfig, arch: &NetConfig, report: &mut RunReport) -> Result<Network<T>> {
    cfg.validate()?;
    plan.validate()?;
    arch.validate()?;
    if arch.task_count != cfg.neighborhood {
        return Err(TrainError::Config(format!("network has {} tasks, neighborhood is {}", arch.task_count, cfg.neighborhood)));
    }
    if arch.patch != plan.patch {
        return Err(TrainError::Config(format!("network patch {} differs from sampling patch {}", arch.patch, plan.patch)));
    }
    if plan.stage == Stage::FgBg && arch.class_count != 2 {
        return Err(TrainError::Config(format!("foreground network needs 2 classes, not {}", arch.class_count)));
    }
    let prepared = prepare(images)?;
    let offsets = neighborhood_offsets(cfg.neighborhood)?;
    let classes = required_classes(plan.stage, arch.class_count);
    let tag = stage_tag(plan.stage) << 32;
    let mut net = Network::<T>::build(arch, &mut stream(cfg.seed, tag))?;
    let mut velocity = net.zero_grads();
    let mut dropout_seeds = stream(cfg.seed, tag | 0xffff_ffff);

    let draw = |epoch: usize, record: bool, report: &mut RunReport| -> Result<Vec<(usize, SampleCenter)>> {
        let mut rng = stream(cfg.seed, tag | (epoch as u64 + 1));
        let mut picks = Vec::new();
        for (i, im) in prepared.iter().enumerate() {
            let set = sample_centers(&im.labels, &im.src.mask, &classes, plan, &mut rng)?;
            if record {
                for class in set.missing {
                    report.lines.push(ReportLine::MissingClass { stage: plan.stage, image: i, class });
                }
            }
            picks.extend(set.centers.into_iter().map(|c| (i, c)));
        }
        picks.shuffle(&mut rng);
        Ok(picks)
    };
    let batches_of = |n: usize| n / cfg.batch_size + usize::from(n % cfg.batch_size >= 2);

    let mut epoch_picks = draw(0, true, report)?;
    if batches_of(epoch_picks.len()) == 0 {
        return Err(TrainError::NoSamples);
    }
    let max_iter = cfg.max_iter.unwrap_or(cfg.epochs * batches_of(epoch_picks.len()));
    let mut iter = 0;
    'epochs: for epoch in 0..cfg.epochs {
        if epoch > 0 {
            epoch_picks = draw(epoch, false, report)?;
        }
        let (mut loss_sum, mut seen) = (0.0, 0);
        let mut correct = vec![0; cfg.neighborhood];
        let mut counted = vec![0; cfg.neighborhood];
        for chunk in epoch_picks.chunks(cfg.batch_size).filter(|c| c.len() >= 2) {
            if iter >= max_iter {
                break 'epochs;
            }
            let lr = poly_lr(iter, max_iter, cfg.base_lr, cfg.power)?;
            let batch = assemble::<T>(&prepared, chunk, plan, &offsets);
            let trace = net.forward_trace(&batch.x, &batch.coords, &mut Mode::train(dropout_seeds.gen()))?;
            let out = softmax_loss(&trace.logits, &batch.targets, arch.class_count, arch.task_count)?;
            let grads = net.backward(&trace, out.dlogits, false)?;
            net.commit_batch_stats(&trace);
            sgd_step(&mut net, &grads.params, &mut velocity, lr, cfg.momentum)?;
            let loss = out.total.as_f64();
            report.lines.push(ReportLine::Iteration {
                stage: plan.stage,
                epoch,
                iteration: iter,
                lr,
                loss,
                task_accuracy: accuracy(&out.correct, &out.counted),
            });
            loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
            for t in 0..cfg.neighborhood {
                correct[t] += out.correct[t];
                counted[t] += out.counted[t];
            }
            iter += 1;
        }
        let mean_loss = loss_sum / seen.max(1) as f64;
        log::info!("{} epoch {epoch}: mean loss {mean_loss:.4}", plan.stage.name());
        report.lines.push(ReportLine::Epoch { stage: plan.stage, epoch, samples: seen, mean_loss, task_accuracy: accuracy(&correct, &counted) });
    }
    Ok(net)
}

pub struct TrainOutput<T> {
    pub fg: Network<T>,
    pub structures: Network<T>,
    pub report: RunReport,
}

/// Trains the foreground network and the structure network of the cascade.
/// `arch` supplies the layer sizes; class and task counts are set per stage
/// from `structures` and the neighbourhood.
pub fn train<T: Real>(images: &[TrainImage], cfg: &TrainConfig, fg_plan: &SamplingPlan, structure_plan: &SamplingPlan, arch: &NetConfig, structures: usize) -> Result<TrainOutput<T>> {
    if fg_plan.stage != Stage::FgBg || structure_plan.stage != Stage::Structures {
        return Err(TrainError::Config("cascade training needs a fg_bg plan and a structures plan".into()));
    }
    let mut report = RunReport::default();
    let fg_arch = NetConfig { class_count: 2, task_count: cfg.neighborhood, ..arch.clone() };
    let fg = train_network(images, fg_plan, cfg, &fg_arch, &mut report)?;
    let st_arch = NetConfig { class_count: structures, task_count: cfg.neighborhood, ..arch.clone() };
    let structures = train_network(images, structure_plan, cfg, &st_arch, &mut report)?;
    Ok(TrainOutput { fg, structures, report })
}
