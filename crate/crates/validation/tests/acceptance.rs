//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any criterion fails. Pass criterion numbers as arguments to run a subset:
//! `cargo test -p voxseg-validation --test acceptance -- 6 7`.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxseg::cascade::{aggregate, argmax_labels, cascade, one_step, predict_patches, strided_centers};
use voxseg::crf::{meanfield_exact, meanfield_fast, permutohedral_filter, refine_marginals, masked_labels, CrfParams, MeanFieldState, UnaryField};
use voxseg::net::gradcheck::{check_layer, check_network};
use voxseg::net::{build_canonical, decode_model, encode_model, Layer, Mode, NetConfig, Network, Tensor};
use voxseg::phantom::{default_suite, generate, Phantom, PhantomSpec, Shape, Structure};
use voxseg::spectral::{build_laplacian, coordinate_features, smallest_eigenpairs, CoordField};
use voxseg::train::{neighborhood_offsets, poly_lr, train, train_network, RunReport, SamplingPlan, Stage, TrainConfig, TrainImage};
use voxseg::volume::{dice, read_volume, read_volume_from, write_volume, write_volume_to, BrainMask, Dims, Volume, VoxelData};
use voxseg_validation::*;

/// What a criterion found. `pass` covers the numeric gates only; the
/// runtime budget is checked by the harness.
struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const SP: [f32; 3] = [1.0; 3];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "parameter census", budget: Duration::from_secs(1), run: census },
        Criterion { id: 2, name: "shape chain", budget: Duration::from_secs(1), run: shape_chain },
        Criterion { id: 3, name: "gradient check", budget: Duration::from_secs(120), run: gradients },
        Criterion { id: 4, name: "poly schedule", budget: Duration::from_secs(1), run: poly },
        Criterion { id: 5, name: "spectral coordinates", budget: Duration::from_secs(30), run: spectral },
        Criterion { id: 6, name: "crf identity and exact oracle", budget: Duration::from_secs(300), run: crf_oracle },
        Criterion { id: 7, name: "permutohedral quality", budget: Duration::from_secs(60), run: permutohedral },
        Criterion { id: 8, name: "vote aggregation", budget: Duration::from_secs(60), run: aggregation },
        Criterion { id: 9, name: "end-to-end phantom pipeline", budget: Duration::from_secs(30 * 60), run: end_to_end },
        Criterion { id: 10, name: "ablation directions", budget: Duration::from_secs(45 * 60), run: ablation },
        Criterion { id: 11, name: "serialization", budget: Duration::from_secs(10), run: serialization },
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for c in criteria.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let got = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let in_time = took <= c.budget;
        let pass = got.pass && in_time;
        if !pass {
            failed.push(c.id);
        }
        println!(
            "criterion {:>2} {}: {} | {} | {:.2}s of {}s{}",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            got.detail,
            took.as_secs_f64(),
            c.budget.as_secs(),
            if in_time { "" } else { " (over budget)" }
        );
        std::io::stdout().flush().ok();
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}

fn census() -> Outcome {
    let net: Network<f32> = build_canonical(25, 1, &mut rng(1)).unwrap();
    let counts: Vec<usize> = net.census().iter().map(|r| r.params).collect();
    let want = [10_976, 256_000, 110_592, 1_769_472, 527_360, 12_800];
    let total = net.census_total();
    outcome(counts == want && total == 2_687_200, format!("total {total}, layers {counts:?}"))
}

fn shape_chain() -> Outcome {
    let net: Network<f32> = build_canonical(25, 1, &mut rng(2)).unwrap();
    let want: [(&str, &[usize]); 8] = [
        ("conv1", &[32, 17, 17, 17]),
        ("pool1", &[32, 9, 9, 9]),
        ("conv2", &[64, 5, 5, 5]),
        ("conv3", &[64, 3, 3, 3]),
        ("fc1", &[1024]),
        ("concat", &[1030]),
        ("fc2", &[512]),
        ("heads", &[25]),
    ];
    // Run the layers one at a time and record what actually comes out.
    let mut x = Tensor::from_vec(&[1, 1, 23, 23, 23], (0..23usize.pow(3)).map(|i| (i as f32 * 0.37).sin()).collect());
    let coords = vec![0.1f32; 6];
    let mut seen = Vec::new();
    for l in net.layers() {
        x = l.layer.forward(&x, &coords, &mut Mode::infer()).unwrap().0;
        if want.iter().any(|(n, _)| *n == l.name) {
            seen.push((l.name.clone(), x.shape()[1..].to_vec()));
        }
    }
    let direct = net.forward(&Tensor::from_vec(&[1, 1, 23, 23, 23], (0..23usize.pow(3)).map(|i| (i as f32 * 0.37).sin()).collect()), &coords, &mut Mode::infer()).unwrap();
    let ok = seen.len() == want.len() && seen.iter().zip(&want).all(|(s, w)| s.0 == w.0 && s.1 == w.1) && direct == x;
    let chain: Vec<String> = seen.iter().map(|(n, s)| format!("{n} {s:?}")).collect();
    outcome(ok, chain.join(", "))
}

fn random_tensor(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect())
}

fn gradients() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for (n, tasks, seed) in [(2usize, 1usize, 11u64), (4, 7, 12)] {
        let net: Network<f64> = Network::build(&NetConfig::tiny(3, tasks), &mut rng(seed)).unwrap().without_dropout();
        let mut r = rng(seed + 100);
        let x = random_tensor(&[n, 1, 11, 11, 11], &mut r);
        let c: Vec<f64> = (0..n * 6).map(|_| r.gen_range(-1.0..1.0)).collect();
        let t: Vec<u16> = (0..n * tasks).map(|_| r.gen_range(0..3u16)).collect();
        let report = check_network(&net, &x, &c, &t, 1e-5).unwrap();
        worst = worst.max(report.max_rel_err());
        checked += report.entries.iter().map(|e| e.checked).sum::<usize>();
    }
    let net: Network<f64> = Network::build(&NetConfig::tiny(3, 7), &mut rng(13)).unwrap();
    let mut r = rng(14);
    let mut shape = vec![1usize, 11, 11, 11];
    let mut layers = 0;
    for l in net.layers() {
        let mut full = vec![3usize];
        full.extend(&shape);
        let x = random_tensor(&full, &mut r);
        let coords: Vec<f64> = (0..18).map(|_| r.gen_range(-1.0..1.0)).collect();
        let layer = match &l.layer {
            Layer::Dropout { .. } => Layer::Dropout { rate: 0.0 },
            other => other.clone(),
        };
        let report = check_layer(&l.name, &layer, &x, &coords, 1e-5, 15).unwrap();
        worst = worst.max(report.max_rel_err());
        checked += report.entries.iter().map(|e| e.checked).sum::<usize>();
        layers += 1;
        shape = l.layer.out_shape(&shape).unwrap();
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.2e} over {checked} checks, 2 networks and {layers} layers"))
}

fn poly() -> Outcome {
    let at = |i| poly_lr(i, 1000, 0.01, 0.9).unwrap();
    let (first, last, half) = (at(0), at(1000), at(500));
    let closed = 0.01 * 0.5f64.powf(0.9);
    let ok = first == 0.01 && last == 0.0 && (half - closed).abs() <= 1e-12;
    outcome(ok, format!("lr(0) {first}, lr(max) {last}, lr(max/2) {half:.10} vs {closed:.10}"))
}

fn blob(x: usize, y: usize, z: usize) -> bool {
    let (fx, fy, fz) = (x as f64 - 4.0, y as f64 - 3.0, z as f64 - 2.5);
    fx * fx / 16.0 + fy * fy / 7.0 + fz * fz / 5.0 <= 1.0 || (x >= 6 && y == 3 && z == 2)
}

/// Largest eigenvalue gap and smallest |overlap| between the spectra of a
/// mask and its image under `map`.
fn transform_agreement(a: &BrainMask, b: &BrainMask, map: impl Fn([usize; 3]) -> [usize; 3]) -> (f64, f64) {
    let (la, lb) = (build_laplacian(a), build_laplacian(b));
    let sa = smallest_eigenpairs(&la, 4).unwrap();
    let sb = smallest_eigenpairs(&lb, 4).unwrap();
    let gap = sa.pairs.iter().zip(&sb.pairs).map(|(p, q)| (p.lambda - q.lambda).abs()).fold(0.0, f64::max);
    let mut overlap = f64::INFINITY;
    for (pa, pb) in sa.pairs.iter().zip(&sb.pairs).skip(1) {
        let dot: f64 = la
            .voxels()
            .iter()
            .enumerate()
            .map(|(row, &v)| {
                let [x, y, z] = map(a.dims().coords(v));
                pa.vector[row] * pb.vector[lb.row_of(b.dims().index(x, y, z)).unwrap()]
            })
            .sum();
        overlap = overlap.min(dot.abs());
    }
    (gap, overlap)
}

fn spectral() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let path = mask_of(Dims::new(3, 1, 1), |_, _, _| true);
    let lp = build_laplacian(&path);
    let got: Vec<f64> = smallest_eigenpairs(&lp, 3).unwrap().pairs.iter().map(|p| p.lambda).collect();
    let dense = dense_eigenvalues(&lp);
    let path_ok = got.iter().zip(&dense).all(|(g, d)| (g - d).abs() <= 1e-10) && dense.iter().zip([0.0, 1.0, 3.0]).all(|(d, w)| (d - w).abs() <= 1e-12);
    ok &= path_ok;
    notes.push(format!("path spectrum {:.6?}", got));

    let mut worst_residual = 0.0f64;
    for m in [path, mask_of(Dims::new(8, 1, 1), |_, _, _| true), mask_of(Dims::cube(6), |_, _, _| true)] {
        let l = build_laplacian(&m);
        let k = l.n().min(4);
        for p in smallest_eigenpairs(&l, k).unwrap().pairs {
            worst_residual = worst_residual.max(dense_residual(&l, p.lambda, &p.vector));
        }
    }
    ok &= worst_residual <= 1e-8;
    notes.push(format!("max residual {worst_residual:.1e}"));

    let d = Dims::new(10, 7, 6);
    let base = mask_of(d, blob);
    let cases = [
        transform_agreement(&base, &mask_of(Dims::new(7, 10, 6), |x, y, z| blob(y, x, z)), |[x, y, z]| [y, x, z]),
        transform_agreement(&base, &mask_of(d, |x, y, z| blob(9 - x, y, z)), |[x, y, z]| [9 - x, y, z]),
        transform_agreement(&base, &mask_of(Dims::new(10, 7, 11), |x, y, z| z >= 5 && blob(x, y, z - 5)), |[x, y, z]| [x, y, z + 5]),
    ];
    let gap = cases.iter().map(|c| c.0).fold(0.0, f64::max);
    let overlap = cases.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    ok &= gap <= 1e-9 && (1.0 - overlap) <= 1e-7;
    notes.push(format!("permute/flip/translate eigenvalue gap {gap:.1e}, min |overlap| {overlap:.9}"));
    outcome(ok, notes.join(", "))
}

/// Unary argmax with ties to the smaller label.
fn unary_argmax(u: &UnaryField<f64>) -> Vec<u16> {
    (0..u.dims().len())
        .map(|v| {
            let p = u.potentials(v);
            (0..p.len()).fold(0, |best, l| if p[l] < p[best] { l } else { best }) as u16
        })
        .collect()
}

fn max_abs_diff(a: &MeanFieldState<f64>, b: &MeanFieldState<f64>) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn normalization_ok(q: &MeanFieldState<f64>) -> bool {
    q.max_normalization_error() <= 1e-6 && q.as_slice().iter().all(|&v| v >= 0.0)
}

fn crf_oracle() -> Outcome {
    let defaults = CrfParams::default();
    let off = CrfParams { v1: 0.0, v2: 0.0, ..defaults };
    let mut r = rng(2024);
    let (mut agree, mut total) = (0usize, 0usize);
    let (mut worst_dq, mut over) = (0.0f64, 0usize);
    let mut identity = true;
    let mut normalized = true;
    let mut sensitive = 0usize;
    for _ in 0..50 {
        let inst = random_crf_instance(&mut r);
        let want = unary_argmax(&inst.unary);
        for solve in [meanfield_exact::<f64>, meanfield_fast::<f64>] {
            let q = solve(&inst.unary, &inst.intensities, SP, None, &off).unwrap();
            identity &= q.argmax() == want;
            normalized &= normalization_ok(&q);
        }
        let e = meanfield_exact(&inst.unary, &inst.intensities, SP, None, &defaults).unwrap();
        let f = meanfield_fast(&inst.unary, &inst.intensities, SP, None, &defaults).unwrap();
        normalized &= normalization_ok(&e) && normalization_ok(&f);
        agree += e.argmax().iter().zip(f.argmax()).filter(|(a, b)| **a == *b).count();
        total += inst.dims.len();
        let dq = max_abs_diff(&e, &f);
        worst_dq = worst_dq.max(dq);
        over += usize::from(dq > 0.05);
        // Conditioning of the exact solver itself: nudge v1 by 0.1%.
        let nudged = CrfParams { v1: defaults.v1 * 1.001, ..defaults };
        let e2 = meanfield_exact(&inst.unary, &inst.intensities, SP, None, &nudged).unwrap();
        sensitive += usize::from(max_abs_diff(&e, &e2) > 0.05);
    }
    let rate = agree as f64 / total as f64;
    let ok = identity && normalized && rate >= 0.99 && worst_dq <= 0.05;
    outcome(
        ok,
        format!(
            "identity {identity}, normalized {normalized}, pooled argmax agreement {:.4}, max |dQ| {worst_dq:.3} \
             ({over}/50 instances over 0.05; exact solver vs itself with v1 +0.1%: {sensitive}/50 over 0.05)",
            rate
        ),
    )
}

fn permutohedral() -> Outcome {
    let mut r = rng(77);
    let errs: Vec<f64> = (0..10)
        .map(|_| {
            let (features, values) = random_bilateral_instance(&mut r);
            let approx = permutohedral_filter(&values, 2, &features, 4).unwrap();
            mean_relative_l1(&approx, &exact_gauss_sums(&values, 2, &features, 4), 2)
        })
        .collect();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    outcome(worst <= 0.05, format!("mean relative l1 over 10 instances: worst {worst:.4}, average {mean:.4}"))
}

fn small_phantom() -> Phantom {
    let spec = PhantomSpec {
        name: "small".into(),
        dims: [16, 16, 16],
        structures: vec![
            Structure { name: "outer".into(), shape: Shape::Sphere { radius: 5.0 }, center: [7.5, 7.5, 7.5], label: 1, mean: 60.0, std: 5.0 },
            Structure { name: "inner".into(), shape: Shape::Sphere { radius: 2.5 }, center: [7.5, 7.5, 7.5], label: 2, mean: 120.0, std: 5.0 },
        ],
        background_mean: 20.0,
        background_std: 5.0,
        seed: 3,
        bias_amplitude: 0.0,
    };
    generate(&spec).unwrap()
}

fn aggregation() -> Outcome {
    let p = small_phantom();
    let dims = p.image.dims();
    let coords = coordinate_features(&p.mask).unwrap();
    let image = p.image.to_f32_vec();
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    let mut center_exact = true;
    for (tasks, stride) in [(7, 1), (27, 2), (1, 1)] {
        let net: Network<f64> = Network::build(&NetConfig::tiny(3, tasks), &mut rng(tasks as u64)).unwrap();
        let centers = strided_centers(&p.mask, stride);
        let preds = predict_patches(&net, &image, dims, &coords, &centers).unwrap();
        let map = aggregate(&preds, dims).unwrap();
        let oracle = brute_force_average(&preds, dims, &neighborhood_offsets(tasks).unwrap());
        let dev = (0..dims.len())
            .flat_map(|v| map.distribution(v).iter().zip(&oracle[v]).map(|(a, b)| (*a as f64 - b).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
        notes.push(format!("{tasks} tasks stride {stride} {dev:.1e}"));
        if tasks == 1 {
            center_exact = centers.iter().enumerate().all(|(i, &c)| map.distribution(c) == preds.distribution(i, 0));
        }
    }
    outcome(worst <= 1e-6 && center_exact, format!("max deviation: {}; neighbourhood 1 equals centre prediction bitwise: {center_exact}", notes.join(", ")))
}

fn image_of(p: &Phantom, coords: &CoordField) -> TrainImage {
    TrainImage { image: p.image.clone(), seg: p.seg.clone(), mask: p.mask.clone(), coords: coords.clone() }
}

fn dices(labels: &Volume, truth: &Volume, n: usize) -> Vec<f64> {
    (1..n as u16).map(|l| dice(labels, truth, l).unwrap()).collect()
}

fn end_to_end() -> Outcome {
    let spec = &default_suite()[0];
    let n = spec.n_labels();
    let train_ph = generate(spec).unwrap();
    let test_ph = generate(&spec.with_seed(spec.seed + 1000)).unwrap();
    assert_eq!(train_ph.mask, test_ph.mask, "noise seeds must not move the geometry");
    let coords = coordinate_features(&train_ph.mask).unwrap();

    let cfg = TrainConfig { epochs: 4, seed: 1, base_lr: 0.05, ..TrainConfig::default() };
    let patch = NetConfig::compact(2, 7).patch;
    let fg = SamplingPlan { quota: 3000, patch, jitter: true, ..SamplingPlan::fg_bg() };
    let st = SamplingPlan { quota: 1500, patch, jitter: true, ..SamplingPlan::structures(Vec::new()) };
    let nets = train::<f32>(&[image_of(&train_ph, &coords)], &cfg, &fg, &st, &NetConfig::compact(2, 7), n - 1).unwrap();

    let seg = cascade(&test_ph.image, &test_ph.mask, &coords, &nets.fg, &nets.structures, 1).unwrap();
    let pre = dices(&argmax_labels(&seg.probmap, SP), &test_ph.seg, n);
    let q = refine_marginals(&seg.probmap, &test_ph.image, &test_ph.mask, &CrfParams::default()).unwrap();
    let post = dices(&masked_labels(&q, &test_ph.mask, SP).unwrap(), &test_ph.seg, n);

    let pre_ok = pre.iter().all(|&d| d >= 0.90);
    let no_drop = pre.iter().zip(&post).all(|(a, b)| b >= &(a - 0.005));
    let gain = pre.iter().zip(&post).any(|(a, b)| b > a);
    outcome(
        pre_ok && no_drop && gain,
        format!("phantom {:?}, per-class Dice pre-CRF {pre:.4?}, post-CRF {post:.4?}", spec.name),
    )
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ablation() -> Outcome {
    let spec = &default_suite()[2];
    let n = spec.n_labels();
    let mut runs: [(&str, Vec<f64>); 3] = [("coordinates, 7 tasks", vec![]), ("no coordinates, 7 tasks", vec![]), ("coordinates, 1 task", vec![])];
    for seed in 0..3u64 {
        let tr = generate(&spec.with_seed(100 + seed)).unwrap();
        let te = generate(&spec.with_seed(200 + seed)).unwrap();
        let coords = coordinate_features(&tr.mask).unwrap();
        let zeros = CoordField::zeros(tr.mask.dims());
        for (run, (field, tasks)) in runs.iter_mut().zip([(&coords, 7), (&zeros, 7), (&coords, 1)]) {
            let arch = NetConfig::compact(n, tasks);
            let cfg = TrainConfig { epochs: 3, seed, base_lr: 0.05, neighborhood: tasks, ..TrainConfig::default() };
            let plan = SamplingPlan { stage: Stage::OneStep, quota: 3000, patch: arch.patch, jitter: true, ..SamplingPlan::fg_bg() };
            let net = train_network::<f32>(&[image_of(&tr, field)], &plan, &cfg, &arch, &mut RunReport::default()).unwrap();
            let pm = one_step(&te.image, &te.mask, field, &net, 1).unwrap();
            run.1.push(mean(&dices(&argmax_labels(&pm, SP), &te.seg, n)));
        }
    }
    let [full, nocoords, one] = [mean(&runs[0].1), mean(&runs[1].1), mean(&runs[2].1)];
    let table: Vec<String> = runs.iter().map(|(name, d)| format!("{name} {d:.4?} mean {:.4}", mean(d))).collect();
    outcome(full > nocoords && full > one, format!("mean Dice over labels 1-3 by seed: {}", table.join("; ")))
}

fn serialization() -> Outcome {
    let mut ok = true;
    let mut net: Network<f32> = build_canonical(25, 7, &mut rng(21)).unwrap();
    let x = Tensor::from_vec(&[2, 1, 23, 23, 23], (0..2 * 23usize.pow(3)).map(|i| (i as f32 * 0.013).sin()).collect());
    let c = vec![0.3f32, -0.2, 0.7, 0.1, 0.5, -0.4, 0.0, 0.2, -0.6, 0.3, 0.9, -0.1];
    let trace = net.forward_trace(&x, &c, &mut Mode::train(5)).unwrap();
    net.commit_batch_stats(&trace);
    let bytes = encode_model(&net);
    let back: Network<f32> = decode_model(&bytes).unwrap();
    ok &= encode_model(&back) == bytes;
    ok &= back.forward(&x, &c, &mut Mode::infer()).unwrap() == net.forward(&x, &c, &mut Mode::infer()).unwrap();

    let dims = Dims::new(5, 4, 3);
    let n = dims.len();
    let spacing = [0.9, 1.0, 1.25];
    let volumes = [
        VoxelData::U8((0..n).map(|i| (i * 7 % 256) as u8).collect()),
        VoxelData::I16((0..n).map(|i| i as i16 * 97 - 2000).collect()),
        VoxelData::F32((0..n).map(|i| (i as f32 * 0.7).sin() * 1e3).collect()),
        VoxelData::U16((0..n).map(|i| (i * 1013) as u16).collect()),
    ];
    let dir = std::env::temp_dir().join(format!("voxseg-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for (k, data) in volumes.into_iter().enumerate() {
        let v = Volume::new(dims, spacing, data).unwrap();
        let enc = write_volume_to(&v);
        ok &= write_volume_to(&read_volume_from(&enc).unwrap()) == enc;
        let path = dir.join(format!("{k}.vvol"));
        write_volume(&v, &path).unwrap();
        ok &= read_volume(&path).unwrap() == v && std::fs::read(&path).unwrap() == enc;
    }
    std::fs::remove_dir_all(&dir).ok();
    outcome(ok, format!("canonical 25-class 7-task model ({} bytes) and 4 voxel types round-trip byte-identical; infer forward identical: {ok}", bytes.len()))
}
