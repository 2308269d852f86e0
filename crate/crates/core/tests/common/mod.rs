//! Fixtures shared by integration test targets.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Normal};
use voxseg::crf::UnaryField;
use voxseg::volume::Dims;

/// A small CRF problem: grid, unaries and intensities.
pub struct CrfInstance {
    pub dims: Dims,
    pub labels: usize,
    pub unary: UnaryField<f64>,
    pub intensities: Vec<f32>,
}

/// Random piecewise-constant scene: 3-5 Voronoi cells carrying random
/// labels, cell intensity 30 per label step plus N(0, 5) noise, and
/// unaries from logits favouring the true label by 1.5 under N(0, 1)
/// noise. Grid sides are drawn from 6..=12.
pub fn random_crf_instance(rng: &mut impl Rng) -> CrfInstance {
    let noise = Normal::new(0.0, 1.0).unwrap();
    let dims = Dims::new(rng.gen_range(6..=12), rng.gen_range(6..=12), rng.gen_range(6..=12));
    let labels = rng.gen_range(2..=4);
    let cells: Vec<([f64; 3], usize)> = (0..rng.gen_range(3..=5))
        .map(|k| {
            let at = [dims.nx, dims.ny, dims.nz].map(|n| rng.gen_range(0.0..n as f64));
            (at, k % labels)
        })
        .collect();
    let mut intensities = Vec::with_capacity(dims.len());
    let mut psi = Vec::with_capacity(dims.len() * labels);
    for v in 0..dims.len() {
        let c = dims.coords(v);
        let dist = |p: &[f64; 3]| (0..3).map(|a| (p[a] - c[a] as f64).powi(2)).sum::<f64>();
        let truth = cells.iter().min_by(|a, b| dist(&a.0).total_cmp(&dist(&b.0))).unwrap().1;
        intensities.push((30.0 * truth as f64 + 5.0 * noise.sample(rng)) as f32);
        let logits: Vec<f64> = (0..labels).map(|l| if l == truth { 1.5 } else { 0.0 } + noise.sample(rng)).collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        psi.extend(logits.iter().map(|x| lse - x));
    }
    CrfInstance { dims, labels, unary: UnaryField::new(dims, labels, psi).unwrap(), intensities }
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

/// Random 8^3 bilateral instance with default bandwidths: features
/// `(x/3, y/3, z/3, I/10)` with intensities uniform on [0, 100), and
/// two uniform channels.
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
