//! Reference implementations used to check voxseg from the outside.
//!
//! Everything here is written for clarity over speed: dense eigensolves,
//! quadratic Gaussian sums and per-voxel brute-force averaging. The
//! acceptance suite in `tests/acceptance.rs` compares the library against
//! these.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use voxseg::cascade::Predictions;
use voxseg::crf::UnaryField;
use voxseg::spectral::SparseLaplacian;
use voxseg::volume::{BrainMask, Dims};

/// All eigenvalues of the Laplacian, ascending, from a dense solve.
pub fn dense_eigenvalues(l: &SparseLaplacian) -> Vec<f64> {
    let n = l.n();
    let m = DMatrix::from_row_slice(n, n, &l.to_dense());
    let mut v: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `||L f - lambda f||_2` computed with the dense matrix.
pub fn dense_residual(l: &SparseLaplacian, lambda: f64, f: &[f64]) -> f64 {
    let n = l.n();
    let dense = l.to_dense();
    (0..n)
        .map(|i| {
            let lf: f64 = (0..n).map(|j| dense[i * n + j] * f[j]).sum();
            (lf - lambda * f[i]).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

pub fn mask_of(dims: Dims, pred: impl Fn(usize, usize, usize) -> bool) -> BrainMask {
    let bits = (0..dims.len())
        .map(|v| {
            let [x, y, z] = dims.coords(v);
            pred(x, y, z)
        })
        .collect();
    BrainMask::new(dims, bits).expect("bit count matches dims")
}

/// `sum_j exp(-|f_i - f_j|^2 / 2) v_j` by direct summation.
pub fn exact_gauss_sums(values: &[f64], channels: usize, features: &[f64], d: usize) -> Vec<f64> {
    let n = features.len() / d;
    let mut out = vec![0.0; values.len()];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = (0..d).map(|k| (features[i * d + k] - features[j * d + k]).powi(2)).sum();
            let w = (-d2 / 2.0).exp();
            for c in 0..channels {
                out[i * channels + c] += w * values[j * channels + c];
            }
        }
    }
    out
}

/// Random 8^3 bilateral instance with the default bandwidths: features
/// `(x/3, y/3, z/3, I/10)` with I uniform on [0, 100), two uniform channels.
pub fn random_bilateral_instance(rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let mut features = Vec::new();
    let mut values = Vec::new();
    for z in 0..8 {
        for y in 0..8 {
            for x in 0..8 {
                let i: f64 = rng.gen_range(0.0..100.0);
                features.extend([x as f64 / 3.0, y as f64 / 3.0, z as f64 / 3.0, i / 10.0]);
                values.extend([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
            }
        }
    }
    (features, values)
}

/// Mean over points of `|a_i - e_i|_1 / |e_i|_1`.
pub fn mean_relative_l1(approx: &[f64], exact: &[f64], channels: usize) -> f64 {
    let n = exact.len() / channels;
    let total: f64 = approx
        .chunks(channels)
        .zip(exact.chunks(channels))
        .map(|(a, e)| a.iter().zip(e).map(|(x, y)| (x - y).abs()).sum::<f64>() / e.iter().map(|y| y.abs()).sum::<f64>())
        .sum();
    total / n as f64
}

pub struct CrfInstance {
    pub dims: Dims,
    pub labels: usize,
    pub unary: UnaryField<f64>,
    pub intensities: Vec<f32>,
}

/// Random piecewise-constant scene on a grid with sides in 6..=12: 3-5
/// Voronoi cells with random labels, intensity 30 per label step plus
/// N(0, 5), and unaries from logits favouring the true label by 1.5 under
/// N(0, 1) noise.
pub fn random_crf_instance(rng: &mut impl Rng) -> CrfInstance {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let dims = Dims::new(rng.gen_range(6..=12), rng.gen_range(6..=12), rng.gen_range(6..=12));
    let labels = rng.gen_range(2..=4);
    let cells: Vec<([f64; 3], usize)> = (0..rng.gen_range(3..=5))
        .map(|k| ([dims.nx, dims.ny, dims.nz].map(|n| rng.gen_range(0.0..n as f64)), k % labels))
        .collect();
    let mut intensities = Vec::with_capacity(dims.len());
    let mut psi = Vec::with_capacity(dims.len() * labels);
    for v in 0..dims.len() {
        let c = dims.coords(v);
        let dist = |p: &[f64; 3]| (0..3).map(|a| (p[a] - c[a] as f64).powi(2)).sum::<f64>();
        let truth = cells.iter().min_by(|a, b| dist(&a.0).total_cmp(&dist(&b.0))).expect("cells").1;
        intensities.push((30.0 * truth as f64 + 5.0 * noise.sample(rng)) as f32);
        let logits: Vec<f64> = (0..labels).map(|l| if l == truth { 1.5 } else { 0.0 } + noise.sample(rng)).collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        psi.extend(logits.iter().map(|x| lse - x));
    }
    let unary = UnaryField::new(dims, labels, psi).expect("consistent sizes");
    CrfInstance { dims, labels, unary, intensities }
}

/// Per-voxel average of every prediction that lands on the voxel, found by
/// scanning all centres and offsets. Voxels nobody predicts get
/// `[1, 0, ...]`.
pub fn brute_force_average(preds: &Predictions, dims: Dims, offsets: &[[i64; 3]]) -> Vec<Vec<f64>> {
    let k = preds.classes;
    (0..dims.len())
        .map(|v| {
            let at = dims.coords(v).map(|a| a as i64);
            let mut sum = vec![0.0f64; k];
            let mut n = 0usize;
            for (i, &c) in preds.centers.iter().enumerate() {
                let ca = dims.coords(c).map(|a| a as i64);
                for (t, d) in offsets.iter().enumerate() {
                    if [ca[0] + d[0], ca[1] + d[1], ca[2] + d[2]] == at {
                        n += 1;
                        for (s, &p) in sum.iter_mut().zip(preds.distribution(i, t)) {
                            *s += p as f64;
                        }
                    }
                }
            }
            if n == 0 {
                let mut bg = vec![0.0; k];
                bg[0] = 1.0;
                bg
            } else {
                sum.iter().map(|s| s / n as f64).collect()
            }
        })
        .collect()
}
