use std::collections::HashMap;

use super::{CrfError, Result};
use crate::scalar::Real;

/// Largest supported feature dimension.
pub const MAX_FEATURES: usize = 4;

const NONE: u32 = u32::MAX;

type Key = [i32; MAX_FEATURES];

/// Permutohedral lattice built over a fixed set of feature vectors.
///
/// Approximates `out_i = sum_j exp(-|f_i - f_j|^2 / 2) v_j` (including
/// `j = i`) by splatting onto the vertices of the enclosing simplices,
/// blurring along each lattice direction and slicing back.
#[derive(Debug, Clone)]
pub struct PermutohedralLattice {
    d: usize,
    points: usize,
    /// Vertex of each point's `d + 1` enclosing simplex corners.
    offsets: Vec<u32>,
    barycentric: Vec<f64>,
    /// Per blur direction, the two neighbours of every vertex.
    neighbours: Vec<Vec<[u32; 2]>>,
    vertices: usize,
    /// Ratio between the Gaussian's mass and the lattice kernel's.
    gain: f64,
    /// Lattice response of each point to itself, before `gain`.
    self_response: Vec<f64>,
    /// Point pairs whose weights were replaced by exact kernel values, as
    /// CSR rows of `(other point, exact minus lattice weight)`.
    near_start: Vec<usize>,
    near: Vec<(u32, f32)>,
}

impl PermutohedralLattice {
    /// `features` holds `n x d` values already divided by their bandwidths.
    pub fn new(features: &[f64], d: usize) -> Result<Self> {
        if d == 0 || d > MAX_FEATURES {
            return Err(CrfError::FeatureDim(d));
        }
        if features.len() % d != 0 {
            return Err(CrfError::Shape(format!("{} feature values for dimension {d}", features.len())));
        }
        if let Some(f) = features.iter().find(|f| !f.is_finite()) {
            return Err(CrfError::Shape(format!("non-finite feature {f}")));
        }
        let n = features.len() / d;
        let d1 = d + 1;
        let inv_std = (2.0f64 / 3.0).sqrt() * d1 as f64;
        let scale: Vec<f64> = (0..d).map(|i| inv_std / (((i + 1) * (i + 2)) as f64).sqrt()).collect();
        // canonical[r][i]: coordinate offset of remainder-r vertex for rank i.
        let canonical: Vec<Vec<i32>> = (0..d1)
            .map(|r| (0..d1).map(|i| if i + r <= d { r as i32 } else { r as i32 - d1 as i32 }).collect())
            .collect();

        let mut table: HashMap<Key, u32> = HashMap::with_capacity(n);
        let mut keys: Vec<Key> = Vec::new();
        let mut offsets = Vec::with_capacity(n * d1);
        let mut barycentric = Vec::with_capacity(n * d1);
        let mut elevated = vec![0.0f64; d1];
        let mut rem0 = vec![0i32; d1];
        let mut rank = vec![0i32; d1];
        let mut bary = vec![0.0f64; d1 + 1];

        for f in features.chunks_exact(d) {
            // Embed in the hyperplane orthogonal to (1, .., 1).
            let mut sm = 0.0;
            for j in (1..=d).rev() {
                let cf = f[j - 1] * scale[j - 1];
                elevated[j] = sm - j as f64 * cf;
                sm += cf;
            }
            elevated[0] = sm;

            // Nearest remainder-0 point, then the simplex containing f.
            let mut sum = 0i32;
            for i in 0..d1 {
                let rd = (elevated[i] / d1 as f64).round() as i32;
                rem0[i] = rd * d1 as i32;
                sum += rd;
            }
            rank.iter_mut().for_each(|r| *r = 0);
            for i in 0..d {
                let di = elevated[i] - rem0[i] as f64;
                for j in i + 1..d1 {
                    if di < elevated[j] - rem0[j] as f64 {
                        rank[i] += 1;
                    } else {
                        rank[j] += 1;
                    }
                }
            }
            for i in 0..d1 {
                rank[i] += sum;
                if rank[i] < 0 {
                    rank[i] += d1 as i32;
                    rem0[i] += d1 as i32;
                } else if rank[i] > d as i32 {
                    rank[i] -= d1 as i32;
                    rem0[i] -= d1 as i32;
                }
            }

            bary.iter_mut().for_each(|b| *b = 0.0);
            for i in 0..d1 {
                let v = (elevated[i] - rem0[i] as f64) / d1 as f64;
                let r = rank[i] as usize;
                bary[d - r] += v;
                bary[d - r + 1] -= v;
            }
            bary[0] += 1.0 + bary[d1];

            for (r, canon) in canonical.iter().enumerate() {
                let mut key = [0i32; MAX_FEATURES];
                for i in 0..d {
                    key[i] = rem0[i] + canon[rank[i] as usize];
                }
                let next = keys.len() as u32;
                let id = *table.entry(key).or_insert_with(|| {
                    keys.push(key);
                    next
                });
                offsets.push(id);
                barycentric.push(bary[r]);
            }
        }

        // Materialize the blur support: values spread one step per
        // direction, so each pass needs the neighbours of every vertex
        // reached so far. Without them the blur loses mass wherever the
        // points are sparse in feature space.
        let step = |key: &Key, j: usize| -> [Key; 2] {
            let mut n1 = *key;
            let mut n2 = *key;
            for k in 0..d {
                n1[k] -= 1;
                n2[k] += 1;
            }
            if j < d {
                n1[j] = key[j] + d as i32;
                n2[j] = key[j] - d as i32;
            }
            [n1, n2]
        };
        for j in 0..d1 {
            for i in 0..keys.len() {
                for n in step(&keys[i], j) {
                    if !table.contains_key(&n) {
                        table.insert(n, keys.len() as u32);
                        keys.push(n);
                    }
                }
            }
        }
        let neighbours = (0..d1)
            .map(|j| {
                keys.iter()
                    .map(|key| step(key, j).map(|n| table.get(&n).copied().unwrap_or(NONE)))
                    .collect()
            })
            .collect();

        // Splat and slice each preserve mass, the d + 1 blur passes double
        // it, and one lattice cell covers (3/2)^(d/2) / sqrt(d + 1) units
        // of feature volume.
        let lattice_mass = 2.0 * (3.0 / std::f64::consts::PI).powf(d as f64 / 2.0) / (d1 as f64).sqrt();
        let mut lattice = Self {
            d,
            points: n,
            offsets,
            barycentric,
            neighbours,
            vertices: keys.len(),
            gain: 1.0 / lattice_mass,
            self_response: Vec::new(),
            near_start: vec![0; n + 1],
            near: Vec::new(),
        };
        lattice.self_response = (0..n).map(|p| lattice.responses(p, &[p])[0]).collect();
        Ok(lattice)
    }

    /// Makes the filter use the exact Gaussian weight between each point
    /// `p` and the points in `pairs[p]`, instead of the lattice's
    /// approximation. Suited to short-range pairs, where the lattice is
    /// least accurate.
    pub fn set_exact_pairs(&mut self, features: &[f64], pairs: &[Vec<u32>]) -> Result<()> {
        let d = self.d;
        if features.len() != self.points * d || pairs.len() != self.points {
            return Err(CrfError::Shape(format!("{} features and {} pair lists for {} points", features.len(), pairs.len(), self.points)));
        }
        if let Some(&bad) = pairs.iter().flatten().find(|&&q| q as usize >= self.points) {
            return Err(CrfError::Shape(format!("pair with point {bad} of {}", self.points)));
        }
        self.near_start = Vec::with_capacity(self.points + 1);
        self.near_start.push(0);
        self.near.clear();
        let mut others = Vec::new();
        for (p, list) in pairs.iter().enumerate() {
            others.clear();
            others.extend(list.iter().map(|&q| q as usize).filter(|&q| q != p));
            let lattice = self.responses(p, &others);
            let fp = &features[p * d..(p + 1) * d];
            for (&q, w) in others.iter().zip(lattice) {
                let fq = &features[q * d..(q + 1) * d];
                let d2: f64 = fp.iter().zip(fq).map(|(a, b)| (a - b) * (a - b)).sum();
                self.near.push((q as u32, ((-d2 / 2.0).exp() - self.gain * w) as f32));
            }
            self.near_start.push(self.near.len());
        }
        Ok(())
    }

    /// Splat-blur-slice of a unit value at point `p`, read back at each of
    /// `others`, before `gain`. The blur of a single splat stays within a
    /// few vertices, so it is propagated sparsely.
    fn responses(&self, p: usize, others: &[usize]) -> Vec<f64> {
        let d1 = self.d + 1;
        let mut cur: Vec<(u32, f64)> = (p * d1..(p + 1) * d1).map(|k| (self.offsets[k], self.barycentric[k])).collect();
        let mut next = Vec::new();
        for dir in &self.neighbours {
            next.clear();
            for &(v, w) in &cur {
                next.push((v, w));
                for n in dir[v as usize] {
                    if n != NONE {
                        next.push((n, 0.5 * w));
                    }
                }
            }
            next.sort_unstable_by_key(|e| e.0);
            cur.clear();
            for &(v, w) in &next {
                match cur.last_mut() {
                    Some(last) if last.0 == v => last.1 += w,
                    _ => cur.push((v, w)),
                }
            }
        }
        others
            .iter()
            .map(|&q| {
                (q * d1..(q + 1) * d1)
                    .map(|k| self.barycentric[k] * cur.binary_search_by_key(&self.offsets[k], |e| e.0).map_or(0.0, |i| cur[i].1))
                    .sum()
            })
            .collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    /// Filters `points x channels` values. Each point's own contribution
    /// enters with its exact weight of one; only the cross terms are
    /// approximated.
    pub fn filter<T: Real>(&self, values: &[T], channels: usize) -> Result<Vec<T>> {
        if values.len() != self.points * channels {
            return Err(CrfError::Shape(format!("{} values for {} points x {channels} channels", values.len(), self.points)));
        }
        let d1 = self.d + 1;
        let mut grid = vec![T::zero(); self.vertices * channels];
        for (p, v) in values.chunks_exact(channels.max(1)).enumerate().take(self.points) {
            for r in 0..d1 {
                let w = T::of(self.barycentric[p * d1 + r]);
                let at = self.offsets[p * d1 + r] as usize * channels;
                for (g, &x) in grid[at..at + channels].iter_mut().zip(v) {
                    *g += w * x;
                }
            }
        }

        let half = T::of(0.5);
        let mut next = vec![T::zero(); grid.len()];
        for dir in &self.neighbours {
            for (i, &[a, b]) in dir.iter().enumerate() {
                for c in 0..channels {
                    let mut s = grid[i * channels + c];
                    if a != NONE {
                        s += half * grid[a as usize * channels + c];
                    }
                    if b != NONE {
                        s += half * grid[b as usize * channels + c];
                    }
                    next[i * channels + c] = s;
                }
            }
            std::mem::swap(&mut grid, &mut next);
        }

        let mut out = vec![T::zero(); values.len()];
        let gain = T::of(self.gain);
        for (p, o) in out.chunks_exact_mut(channels.max(1)).enumerate().take(self.points) {
            let own = T::one() - T::of(self.self_response[p]) * gain;
            for (x, &v) in o.iter_mut().zip(&values[p * channels..(p + 1) * channels]) {
                *x = own * v;
            }
            for r in 0..d1 {
                let w = T::of(self.barycentric[p * d1 + r]) * gain;
                let at = self.offsets[p * d1 + r] as usize * channels;
                for (x, &g) in o.iter_mut().zip(&grid[at..at + channels]) {
                    *x += w * g;
                }
            }
            for &(q, c) in &self.near[self.near_start[p]..self.near_start[p + 1]] {
                let c = T::of(c as f64);
                for (x, &v) in o.iter_mut().zip(&values[q as usize * channels..(q as usize + 1) * channels]) {
                    *x += c * v;
                }
            }
        }
        Ok(out)
    }
}

/// One-shot Gaussian filtering of `values` (`n x channels`) over
/// `features` (`n x d`, pre-scaled by `1 / sigma`).
pub fn permutohedral_filter<T: Real>(values: &[T], channels: usize, features: &[f64], d: usize) -> Result<Vec<T>> {
    PermutohedralLattice::new(features, d)?.filter(values, channels)
}
