use super::predict::Predictions;
use super::{CascadeError, Result};
use crate::train::neighborhood_offsets;
use crate::volume::{BrainMask, Dims, ProbMap, Volume};

/// Running per-voxel sums of deposited distributions and their counts.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteAccumulator {
    dims: Dims,
    n_labels: usize,
    sums: Vec<f64>,
    counts: Vec<u32>,
}

impl VoteAccumulator {
    pub fn new(dims: Dims, n_labels: usize) -> Self {
        Self { dims, n_labels, sums: vec![0.0; dims.len() * n_labels], counts: vec![0; dims.len()] }
    }

    pub fn deposit(&mut self, voxel: usize, dist: &[f32]) {
        let s = &mut self.sums[voxel * self.n_labels..(voxel + 1) * self.n_labels];
        for (a, &b) in s.iter_mut().zip(dist) {
            *a += b as f64;
        }
        self.counts[voxel] += 1;
    }

    /// Deposits task `t` of each centre at `centre + offset(t)`; offsets
    /// leaving the grid are dropped.
    pub fn deposit_predictions(&mut self, preds: &Predictions) -> Result<()> {
        if preds.classes != self.n_labels {
            return Err(CascadeError::Shape(format!("{} classes deposited into {} labels", preds.classes, self.n_labels)));
        }
        let offsets = neighborhood_offsets(preds.tasks)?;
        for (i, &c) in preds.centers.iter().enumerate() {
            let at = self.dims.coords(c);
            for (t, d) in offsets.iter().enumerate() {
                let p = [at[0] as i64 + d[0], at[1] as i64 + d[1], at[2] as i64 + d[2]];
                if let Some(v) = self.dims.checked_index(p) {
                    self.deposit(v, preds.distribution(i, t));
                }
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Mean of the deposits at one voxel, or `None` without deposits.
    pub fn mean(&self, voxel: usize) -> Option<Vec<f64>> {
        let n = self.counts[voxel];
        (n > 0).then(|| self.sums[voxel * self.n_labels..(voxel + 1) * self.n_labels].iter().map(|s| s / n as f64).collect())
    }

    /// Per-voxel averages; voxels without deposits are certain background.
    pub fn to_probmap(&self) -> ProbMap {
        let mut map = ProbMap::background(self.dims, self.n_labels);
        for v in 0..self.dims.len() {
            if let Some(m) = self.mean(v) {
                for (d, s) in map.distribution_mut(v).iter_mut().zip(m) {
                    *d = s as f32;
                }
            }
        }
        map
    }
}

/// Averages the task distributions deposited at each voxel.
pub fn aggregate(preds: &Predictions, dims: Dims) -> Result<ProbMap> {
    let mut acc = VoteAccumulator::new(dims, preds.classes);
    acc.deposit_predictions(preds)?;
    Ok(acc.to_probmap())
}

/// Combines the two stages: gated voxels get `P(0) = 1 - fg` and
/// `P(l) = fg * P_struct(l - 1)`; all others are certain background.
/// `gate` marks voxels passed to the structure stage that received at
/// least one structure deposit.
pub fn compose(fg_prob: &[f32], structures: &ProbMap, gate: &[bool]) -> Result<ProbMap> {
    let dims = structures.dims();
    if fg_prob.len() != dims.len() || gate.len() != dims.len() {
        return Err(CascadeError::Shape("foreground map, gate and structure map differ in size".into()));
    }
    let k = structures.n_labels();
    let mut out = ProbMap::background(dims, k + 1);
    for v in (0..dims.len()).filter(|&v| gate[v]) {
        let fg = fg_prob[v] as f64;
        let d = out.distribution_mut(v);
        d[0] = (1.0 - fg) as f32;
        for (o, &s) in d[1..].iter_mut().zip(structures.distribution(v)) {
            *o = (fg * s as f64) as f32;
        }
    }
    Ok(out)
}

/// Most probable label per voxel; ties go to the smaller label id.
pub fn argmax_labels(map: &ProbMap, spacing: [f32; 3]) -> Volume {
    let labels: Vec<u16> = (0..map.dims().len()).map(|v| crate::net::argmax(map.distribution(v)) as u16).collect();
    Volume::from_labels(map.dims(), spacing, &labels).expect("probability map grid is valid")
}

/// Forces voxels outside the mask to certain background.
pub(crate) fn clear_outside(map: &mut ProbMap, mask: &BrainMask) {
    for v in (0..mask.dims().len()).filter(|&v| !mask.get(v)) {
        let d = map.distribution_mut(v);
        d.iter_mut().for_each(|p| *p = 0.0);
        d[0] = 1.0;
    }
}
