use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxseg::cascade::*;
use voxseg::net::{NetConfig, Network, Tensor};
use voxseg::spectral::coordinate_features;
use voxseg::train::{fill_patch, neighborhood_offsets, train_network, RunReport, SamplingPlan, Stage, TrainConfig, TrainImage};
use voxseg::volume::{BrainMask, Dims, ProbMap, Volume};

const SP: [f32; 3] = [1.0; 3];

fn ball_mask(dims: Dims, r: f64) -> BrainMask {
    let c = [(dims.nx as f64 - 1.0) / 2.0, (dims.ny as f64 - 1.0) / 2.0, (dims.nz as f64 - 1.0) / 2.0];
    let bits = (0..dims.len())
        .map(|v| {
            let p = dims.coords(v);
            (0..3).map(|a| (p[a] as f64 - c[a]).powi(2)).sum::<f64>() <= r * r
        })
        .collect();
    BrainMask::new(dims, bits).unwrap()
}

fn random_predictions(centers: Vec<usize>, tasks: usize, classes: usize, seed: u64) -> Predictions {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probs = Vec::new();
    for _ in 0..centers.len() * tasks {
        let raw: Vec<f32> = (0..classes).map(|_| rng.gen_range(0.01..1.0)).collect();
        let s: f32 = raw.iter().sum();
        probs.extend(raw.iter().map(|r| r / s));
    }
    Predictions { centers, tasks, classes, probs }
}

#[test]
fn patch_predictions_match_direct_forward() {
    let dims = Dims::new(14, 13, 15);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net: Network<f64> = Network::build(&NetConfig::tiny(3, 7), &mut rng).unwrap();
    let image: Vec<f32> = (0..dims.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mask = ball_mask(dims, 6.0);
    let coords = coordinate_features(&mask).unwrap();
    let mut centers: Vec<usize> = mask.indices().step_by(5).collect();
    centers.extend([0, dims.len() - 1, centers[3]]);
    let preds = predict_patches(&net, &image, dims, &coords, &centers).unwrap();
    assert_eq!(preds.probs.len(), centers.len() * 7 * 3);

    let p = net.patch_size();
    let mut x = Tensor::zeros(&[centers.len(), 1, p, p, p]);
    let mut cs = Vec::new();
    for (i, &c) in centers.iter().enumerate() {
        let at = dims.coords(c).map(|a| a as i64);
        fill_patch(&image, dims, at, p, &mut x.data_mut()[i * p * p * p..(i + 1) * p * p * p]);
        cs.extend(coords.get(c).iter().map(|&v| v as f64));
    }
    let direct = net.predict(&x, &cs).unwrap();
    let worst = preds.probs.iter().zip(direct.data()).map(|(a, b)| (*a as f64 - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "worst deviation {worst}");

    for i in 0..centers.len() {
        for t in 0..7 {
            let s: f32 = preds.distribution(i, t).iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
    let n = centers.len();
    assert_eq!(preds.distribution(3, 0), preds.distribution(n - 1, 0));
}

#[test]
fn aggregate_examples() {
    let dims = Dims::cube(5);
    let c = dims.index(2, 2, 2);
    let preds = Predictions { centers: vec![c], tasks: 1, classes: 2, probs: vec![0.25, 0.75] };
    let map = aggregate(&preds, dims).unwrap();
    assert_eq!(map.distribution(c), &[0.25, 0.75]);
    assert_eq!(map.distribution(0), &[1.0, 0.0]);

    let preds = Predictions { centers: vec![c, c], tasks: 1, classes: 2, probs: vec![0.2, 0.8, 0.4, 0.6] };
    let map = aggregate(&preds, dims).unwrap();
    assert!((map.distribution(c)[0] - 0.3).abs() < 1e-7 && (map.distribution(c)[1] - 0.7).abs() < 1e-7);
}

#[test]
fn seven_deposits_per_interior_voxel() {
    let dims = Dims::cube(12);
    let mask = ball_mask(dims, 5.0);
    let centers = strided_centers(&mask, 1);
    let preds = random_predictions(centers, 7, 2, 1);
    let mut acc = VoteAccumulator::new(dims, 2);
    acc.deposit_predictions(&preds).unwrap();
    let offsets = neighborhood_offsets(7).unwrap();
    let mut interior = 0;
    for v in 0..dims.len() {
        let at = dims.coords(v);
        let in_mask_neighbours = offsets
            .iter()
            .filter(|d| dims.checked_index([at[0] as i64 - d[0], at[1] as i64 - d[1], at[2] as i64 - d[2]]).is_some_and(|u| mask.get(u)))
            .count();
        assert_eq!(acc.counts()[v] as usize, in_mask_neighbours);
        if in_mask_neighbours == 7 {
            interior += 1;
        }
    }
    assert!(interior > 100);
}

#[test]
fn aggregate_matches_brute_force_average() {
    let dims = Dims::cube(16);
    let mask = ball_mask(dims, 6.5);
    for (tasks, stride) in [(7, 1), (27, 2), (1, 1)] {
        let centers = strided_centers(&mask, stride);
        let preds = random_predictions(centers.clone(), tasks, 4, tasks as u64);
        let map = aggregate(&preds, dims).unwrap();
        let offsets = neighborhood_offsets(tasks).unwrap();
        let mut worst = 0.0f64;
        for v in 0..dims.len() {
            let at = dims.coords(v).map(|a| a as i64);
            let mut sum = [0.0f64; 4];
            let mut n = 0;
            for (i, &c) in centers.iter().enumerate() {
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
            let want: Vec<f64> = if n == 0 { vec![1.0, 0.0, 0.0, 0.0] } else { sum.iter().map(|s| s / n as f64).collect() };
            for (a, b) in map.distribution(v).iter().zip(&want) {
                worst = worst.max((*a as f64 - b).abs());
            }
        }
        assert!(worst <= 1e-6, "tasks {tasks}: deviation {worst}");
        if tasks == 1 {
            for (i, &c) in centers.iter().enumerate() {
                assert_eq!(map.distribution(c), preds.distribution(i, 0));
            }
        }
    }
}

#[test]
fn composition() {
    let dims = Dims::new(3, 1, 1);
    let k = 25;
    let uniform = ProbMap::new(dims, k, vec![1.0 / k as f32; 3 * k]).unwrap();
    let out = compose(&[0.0; 3], &uniform, &[false; 3]).unwrap();
    assert!((0..3).all(|v| out.distribution(v)[0] == 1.0 && out.distribution(v)[1..].iter().all(|&p| p == 0.0)));
    let out = compose(&[1.0; 3], &uniform, &[true; 3]).unwrap();
    for v in 0..3 {
        assert_eq!(out.distribution(v)[0], 0.0);
        assert!(out.distribution(v)[1..].iter().all(|&p| (p - 0.04).abs() < 1e-7));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dims = Dims::cube(6);
    let probs = random_predictions((0..dims.len()).collect(), 1, 5, 3).probs;
    let st = ProbMap::new(dims, 5, probs).unwrap();
    let fg: Vec<f32> = (0..dims.len()).map(|_| rng.gen()).collect();
    let gate: Vec<bool> = fg.iter().map(|&f| f > 0.5).collect();
    let out = compose(&fg, &st, &gate).unwrap();
    for v in 0..dims.len() {
        let s: f64 = out.distribution(v).iter().map(|&p| p as f64).sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
}

#[test]
fn argmax_rules() {
    let dims = Dims::new(3, 1, 1);
    let map = ProbMap::new(dims, 2, vec![0.3, 0.7, 0.5, 0.5, 0.9, 0.1]).unwrap();
    assert_eq!(argmax_labels(&map, SP).labels().unwrap(), vec![1, 0, 0]);
    let scaled = ProbMap::new(dims, 2, map.as_slice().iter().map(|p| p * 3.5).collect()).unwrap();
    assert_eq!(argmax_labels(&scaled, SP).labels().unwrap(), vec![1, 0, 0]);
}

fn toy_subject() -> (TrainImage, BrainMask) {
    let dims = Dims::cube(14);
    let mask = ball_mask(dims, 6.0);
    let c = 6.5;
    let labels: Vec<u16> = (0..dims.len())
        .map(|v| {
            let p = dims.coords(v);
            let r2: f64 = p.iter().map(|&a| (a as f64 - c).powi(2)).sum();
            if r2 <= 9.0 {
                1 + u16::from(p[0] < 7)
            } else {
                0
            }
        })
        .collect();
    let image: Vec<f32> = labels.iter().zip(mask.bits()).map(|(&l, &m)| if m { 50.0 + 40.0 * l as f32 } else { 0.0 }).collect();
    let coords = coordinate_features(&mask).unwrap();
    let seg = Volume::from_labels(dims, SP, &labels).unwrap();
    (TrainImage { image: Volume::from_f32(dims, SP, image).unwrap(), seg, mask: mask.clone(), coords }, mask)
}

#[test]
fn cascade_is_normalized_and_deterministic() {
    let (subject, mask) = toy_subject();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let fg: Network<f32> = Network::build(&NetConfig::tiny(2, 7), &mut rng).unwrap();
    let st: Network<f32> = Network::build(&NetConfig::tiny(2, 7), &mut rng).unwrap();
    let a = cascade(&subject.image, &mask, &subject.coords, &fg, &st, 1).unwrap();
    let b = cascade(&subject.image, &mask, &subject.coords, &fg, &st, 1).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.probmap.n_labels(), 3);
    a.probmap.check(&mask, 1e-6).unwrap();
    for v in 0..mask.dims().len() {
        let d = a.probmap.distribution(v);
        if !mask.get(v) || a.fg_prob[v] <= 0.5 {
            assert_eq!(d, &[1.0, 0.0, 0.0]);
        } else {
            assert!((d[0] - (1.0 - a.fg_prob[v])).abs() < 1e-7);
        }
    }
    let strided = cascade(&subject.image, &mask, &subject.coords, &fg, &st, 2).unwrap();
    strided.probmap.check(&mask, 1e-6).unwrap();
    let labels = argmax_labels(&a.probmap, SP);
    assert_eq!(labels, argmax_labels(&b.probmap, SP));
}

#[test]
fn saturated_net_is_confident() {
    let (mut subject, mask) = toy_subject();
    // Every mask voxel carries label 1.
    let labels: Vec<u16> = mask.bits().iter().map(|&m| u16::from(m)).collect();
    subject.seg = Volume::from_labels(mask.dims(), SP, &labels).unwrap();
    let plan = SamplingPlan { stage: Stage::OneStep, quota: 512, patch: 11, ..SamplingPlan::fg_bg() };
    let cfg = TrainConfig { batch_size: 16, epochs: 4, seed: 1, neighborhood: 1, base_lr: 0.1, ..TrainConfig::default() };
    // Without dropout, so batch-norm statistics match between phases.
    let arch = NetConfig { dropout: 0.0, ..NetConfig::tiny(2, 1) };
    let mut report = RunReport::default();
    let net: Network<f32> = train_network(&[subject.clone()], &plan, &cfg, &arch, &mut report).unwrap();
    let interior: Vec<usize> = ball_mask(mask.dims(), 3.0).indices().collect();
    let intensities = voxseg::train::standardize(&subject.image, &mask).unwrap();
    let preds = predict_patches(&net, &intensities, mask.dims(), &subject.coords, &interior).unwrap();
    for i in 0..interior.len() {
        assert!(preds.distribution(i, 0)[1] > 0.99, "{:?}", preds.distribution(i, 0));
    }
}
