use voxseg::phantom::{default_suite, generate, PhantomError, PhantomSpec, Shape, Structure, MASK_MARGIN};
use voxseg::volume::Dims;

fn ball(radius: f64, center: [f64; 3], label: u16) -> Structure {
    Structure { name: format!("ball{label}"), shape: Shape::Sphere { radius }, center, label, mean: 100.0, std: 0.0 }
}

fn spec(structures: Vec<Structure>, dims: [usize; 3]) -> PhantomSpec {
    PhantomSpec {
        name: "t".into(),
        dims,
        structures,
        background_mean: 10.0,
        background_std: 0.0,
        seed: 0,
        bias_amplitude: 0.0,
    }
}

#[test]
fn ball_voxel_counts_match_lattice_point_counts() {
    // Integer points within distance r of the origin: 1, 7, 33, 123, 257, 515.
    for (r, n) in [(0.5, 1), (1.0, 7), (2.0, 33), (3.0, 123), (4.0, 257), (5.0, 515)] {
        let p = generate(&spec(vec![ball(r, [8.0; 3], 1)], [17; 3])).unwrap();
        let count = p.seg.labels().unwrap().iter().filter(|&&l| l == 1).count();
        assert_eq!(count, n, "radius {r}");
    }
}

#[test]
fn intensities_follow_labels_and_mask() {
    let p = generate(&spec(vec![ball(3.0, [8.0; 3], 1)], [17; 3])).unwrap();
    let labels = p.seg.labels().unwrap();
    let img = p.image.to_f32_vec();
    let dims = Dims::cube(17);
    let inside: Vec<[f64; 3]> = (0..dims.len()).filter(|&v| labels[v] == 1).map(|v| dims.coords(v).map(|x| x as f64)).collect();
    for v in 0..dims.len() {
        let c = dims.coords(v).map(|x| x as f64);
        let near = |q: &[f64; 3]| (0..3).map(|a| (c[a] - q[a]).powi(2)).sum::<f64>() <= MASK_MARGIN * MASK_MARGIN;
        let expect_mask = inside.iter().any(near);
        assert_eq!(p.mask.get(v), expect_mask, "mask at {c:?}");
        let expect = if labels[v] == 1 { 100.0 } else if expect_mask { 10.0 } else { 0.0 };
        assert_eq!(img[v], expect);
    }
}

#[test]
fn later_structures_overwrite_earlier_ones() {
    let p = generate(&spec(vec![ball(4.0, [8.0; 3], 1), ball(2.0, [8.0; 3], 2)], [17; 3])).unwrap();
    let labels = p.seg.labels().unwrap();
    assert_eq!(labels.iter().filter(|&&l| l == 2).count(), 33);
    assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 257 - 33);
}

#[test]
fn noise_statistics_and_determinism() {
    let mut s = spec(vec![ball(6.0, [10.0; 3], 1)], [21; 3]);
    s.structures[0].std = 5.0;
    s.seed = 11;
    let a = generate(&s).unwrap();
    assert_eq!(a, generate(&s).unwrap());
    assert_ne!(a.image, generate(&s.with_seed(12)).unwrap().image);
    let labels = a.seg.labels().unwrap();
    let vals: Vec<f64> = a.image.to_f32_vec().iter().zip(&labels).filter(|(_, &l)| l == 1).map(|(&x, _)| x as f64).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let sd = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - 100.0).abs() < 4.0 * 5.0 / n.sqrt(), "mean {mean}");
    assert!((sd - 5.0).abs() < 0.5, "sd {sd}");
}

#[test]
fn bias_field_is_smooth_and_bounded() {
    let mut s = spec(vec![ball(7.0, [10.0; 3], 1)], [21; 3]);
    s.bias_amplitude = 0.1;
    let p = generate(&s).unwrap();
    for (v, &x) in p.image.to_f32_vec().iter().enumerate() {
        if p.mask.get(v) {
            assert!((x as f64 / if p.seg.value(v) > 0.0 { 100.0 } else { 10.0 } - 1.0).abs() <= 0.1 + 1e-6);
        }
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let empty = spec(vec![], [8; 3]);
    assert!(matches!(generate(&empty), Err(PhantomError::Spec(_))));
    // A ball that misses the grid leaves the mask empty.
    let outside = spec(vec![ball(1.0, [50.0; 3], 1)], [8; 3]);
    assert!(matches!(generate(&outside), Err(PhantomError::Spec(_))));
    let gap = spec(vec![ball(1.0, [3.0; 3], 2)], [8; 3]);
    let err = generate(&gap).unwrap_err().to_string();
    assert!(err.contains("contiguous"), "{err}");
    let mut bad = spec(vec![ball(-1.0, [3.0; 3], 0)], [8; 3]);
    bad.bias_amplitude = 1.5;
    let err = generate(&bad).unwrap_err().to_string();
    assert_eq!(err.matches("; ").count(), 2, "{err}");
}

#[test]
fn spec_json_roundtrip() {
    for s in default_suite() {
        let json = serde_json::to_string_pretty(&s).unwrap();
        let back: PhantomSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
    let text = r#"{"name":"x","structures":[{"name":"a","shape":"shell","inner":2,"outer":4,"center":[5,5,5],"label":1,"mean":1,"std":1}],
        "background_mean":0,"background_std":1}"#;
    let s: PhantomSpec = serde_json::from_str(text).unwrap();
    assert_eq!(s.dims, [64; 3]);
    assert_eq!(s.structures[0].shape, Shape::Shell { inner: 2.0, outer: 4.0 });
    assert!(serde_json::from_str::<PhantomSpec>(&text.replace("\"background_std\"", "\"bogus\":1,\"background_std\"")).is_err());
}

#[test]
fn default_suite_properties() {
    let suite = default_suite();
    assert_eq!(suite.len(), 3);
    for s in &suite {
        assert_eq!(s.dims, [64; 3]);
        let p = generate(s).unwrap();
        let labels = p.seg.labels().unwrap();
        for l in 1..s.n_labels() as u16 {
            assert!(labels.iter().any(|&x| x == l), "{}: label {l} absent", s.name);
        }
        assert_eq!(s.label_table().unwrap().n_labels(), s.n_labels());
        // Structures stay clear of the border so the mask never touches it.
        let dims = Dims::cube(64);
        assert!(p.mask.indices().all(|v| dims.coords(v).iter().all(|&c| c > 0 && c < 63)));
    }

    // Nested shells: background plus three labels.
    assert_eq!(suite[0].n_labels(), 4);

    // Two low-contrast pairs among eight spheres.
    let means: Vec<f64> = suite[1].structures.iter().map(|s| s.mean).collect();
    assert_eq!(means.len(), 8);
    let close = (0..8).flat_map(|i| (i + 1..8).map(move |j| (i, j))).filter(|&(i, j)| (means[i] - means[j]).abs() <= 0.5 * 8.0 + 1e-9).count();
    assert_eq!(close, 2);

    // Mirror-symmetric geometry with identical statistics on either side.
    let m = &suite[2];
    let (left, right) = (&m.structures[1], &m.structures[2]);
    assert_eq!((left.mean, left.std), (right.mean, right.std));
    let p = generate(m).unwrap();
    let labels = p.seg.labels().unwrap();
    let dims = Dims::cube(64);
    for v in 0..dims.len() {
        let [x, y, z] = dims.coords(v);
        let w = dims.index(63 - x, y, z);
        let swap = |l: u16| match l {
            1 => 2,
            2 => 1,
            l => l,
        };
        assert_eq!(labels[w], swap(labels[v]));
        assert_eq!(p.mask.get(w), p.mask.get(v));
    }
}
