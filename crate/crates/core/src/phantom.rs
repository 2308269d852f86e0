//! Synthetic labelled volumes with exact ground truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::volume::{BrainMask, Dims, LabelEntry, LabelTable, Volume, VolumeError};

#[derive(Debug, thiserror::Error)]
pub enum PhantomError {
    #[error("invalid phantom: {0}")]
    Spec(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

pub type Result<T> = std::result::Result<T, PhantomError>;

/// Mask dilation around the structures, in voxels.
pub const MASK_MARGIN: f64 = 2.0;

/// Geometry of one structure, in voxel units about its centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Sphere { radius: f64 },
    Ellipsoid { radii: [f64; 3] },
    /// Voxels with `inner < |p - c| <= outer`.
    Shell { inner: f64, outer: f64 },
}

impl Shape {
    fn contains(&self, d: [f64; 3]) -> bool {
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        match *self {
            Shape::Sphere { radius } => r2 <= radius * radius,
            Shape::Ellipsoid { radii } => (0..3).map(|a| (d[a] / radii[a]).powi(2)).sum::<f64>() <= 1.0,
            Shape::Shell { inner, outer } => r2 > inner * inner && r2 <= outer * outer,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            Shape::Sphere { radius } if !ok(radius) => Err(format!("sphere radius {radius}")),
            Shape::Ellipsoid { radii } if !radii.iter().all(|&r| ok(r)) => Err(format!("ellipsoid radii {radii:?}")),
            Shape::Shell { inner, outer } if !(inner.is_finite() && inner >= 0.0 && ok(outer) && inner < outer) => {
                Err(format!("shell radii {inner}..{outer}"))
            }
            _ => Ok(()),
        }
    }
}

// Unknown keys cannot be rejected here: serde does not support
// `deny_unknown_fields` together with `flatten`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    pub name: String,
    #[serde(flatten)]
    pub shape: Shape,
    /// Voxel coordinates `[x, y, z]`.
    pub center: [f64; 3],
    pub label: u16,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub name: String,
    #[serde(default = "default_dims")]
    pub dims: [usize; 3],
    /// Later entries overwrite earlier ones where they overlap.
    pub structures: Vec<Structure>,
    pub background_mean: f64,
    pub background_std: f64,
    #[serde(default)]
    pub seed: u64,
    /// Relative amplitude of a smooth multiplicative bias field; 0 disables.
    #[serde(default)]
    pub bias_amplitude: f64,
}

fn default_dims() -> [usize; 3] {
    [64; 3]
}

impl PhantomSpec {
    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.dims.iter().any(|&n| n == 0) {
            bad.push(format!("dims {:?}", self.dims));
        }
        if self.structures.is_empty() {
            bad.push("no structures: the mask would be empty".into());
        }
        for s in &self.structures {
            if let Err(e) = s.shape.validate() {
                bad.push(format!("{}: {e}", s.name));
            }
            if s.label == 0 {
                bad.push(format!("{}: label 0 is reserved for background", s.name));
            }
            if !(s.mean.is_finite() && s.std.is_finite() && s.std >= 0.0) {
                bad.push(format!("{}: intensity N({}, {})", s.name, s.mean, s.std));
            }
            if !s.center.iter().all(|c| c.is_finite()) {
                bad.push(format!("{}: centre {:?}", s.name, s.center));
            }
        }
        let mut used: Vec<u16> = self.structures.iter().map(|s| s.label).filter(|&l| l > 0).collect();
        used.sort_unstable();
        used.dedup();
        if used.iter().enumerate().any(|(i, &l)| l as usize != i + 1) {
            bad.push(format!("labels {used:?} are not contiguous from 1"));
        }
        if !(self.background_mean.is_finite() && self.background_std.is_finite() && self.background_std >= 0.0) {
            bad.push(format!("background N({}, {})", self.background_mean, self.background_std));
        }
        if !(self.bias_amplitude.is_finite() && (0.0..1.0).contains(&self.bias_amplitude)) {
            bad.push(format!("bias amplitude {} outside [0, 1)", self.bias_amplitude));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(PhantomError::Spec(bad.join("; ")))
        }
    }

    /// Largest label plus one.
    pub fn n_labels(&self) -> usize {
        self.structures.iter().map(|s| s.label as usize).max().unwrap_or(0) + 1
    }

    /// Names of the structure labels. The first structure carrying a label
    /// names it.
    pub fn label_table(&self) -> Result<LabelTable> {
        let mut entries: Vec<LabelEntry> = Vec::new();
        for s in &self.structures {
            if !entries.iter().any(|e| e.id == s.label) {
                entries.push(LabelEntry { raw: s.label as i64, id: s.label, name: s.name.clone() });
            }
        }
        entries.sort_by_key(|e| e.id);
        Ok(LabelTable::new(entries)?)
    }

    /// The same scene with different noise.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Image, ground-truth labels and mask of one phantom.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: Volume,
    pub seg: Volume,
    pub mask: BrainMask,
}

/// Rasterizes the structures, draws Gaussian intensities about each
/// structure's mean (background elsewhere in the mask, 0 outside) and
/// applies the bias field. The mask is the union of the structures
/// dilated by [`MASK_MARGIN`] voxels. Deterministic in `spec.seed`.
pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let dims = Dims::new(spec.dims[0], spec.dims[1], spec.dims[2]);
    let spacing = [1.0; 3];
    let mut labels = vec![0u16; dims.len()];
    let mut owner = vec![usize::MAX; dims.len()];
    for (k, s) in spec.structures.iter().enumerate() {
        for v in 0..dims.len() {
            let c = dims.coords(v);
            let d = [0, 1, 2].map(|a| c[a] as f64 - s.center[a]);
            if s.shape.contains(d) {
                labels[v] = s.label;
                owner[v] = k;
            }
        }
    }
    let core = BrainMask::new(dims, labels.iter().map(|&l| l != 0).collect())
        .map_err(|_| PhantomError::Spec("no structure covers any voxel".into()))?;
    let mask = core.dilate(MASK_MARGIN);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let half = [0, 1, 2].map(|a| (spec.dims[a] as f64 - 1.0) / 2.0);
    let image: Vec<f32> = (0..dims.len())
        .map(|v| {
            if !mask.get(v) {
                return 0.0;
            }
            let (mean, std) = match owner[v] {
                usize::MAX => (spec.background_mean, spec.background_std),
                k => (spec.structures[k].mean, spec.structures[k].std),
            };
            let value = mean + std * unit.sample(&mut rng);
            let c = dims.coords(v);
            let u = [0, 1, 2].map(|a| if half[a] > 0.0 { (c[a] as f64 - half[a]) / half[a] } else { 0.0 });
            let bias = 1.0 + spec.bias_amplitude * (0.5 * u[0] + 0.3 * u[1] * u[1] - 0.2 * u[2] + 0.2 * u[0] * u[2]) / 1.2;
            (value * bias) as f32
        })
        .collect();
    Ok(Phantom {
        image: Volume::from_f32(dims, spacing, image)?,
        seg: Volume::from_labels(dims, spacing, &labels)?,
        mask,
    })
}

/// Low-contrast pairs in the 2x2x2 suite differ by this many intensity
/// standard deviations.
pub const LOW_CONTRAST_SEPARATION: f64 = 0.5;

/// The three reference scenes on a 64^3 grid:
/// (a) three nested shells, (b) eight spheres in a 2x2x2 arrangement with
/// two low-contrast pairs, (c) two identical spheres mirrored across the
/// midplane and joined by a tube.
pub fn default_suite() -> Vec<PhantomSpec> {
    let mid = 31.5;
    let structure = |name: &str, shape, center, label, mean| Structure { name: name.into(), shape, center, label, mean, std: 8.0 };

    let shells = PhantomSpec {
        name: "nested_shells".into(),
        dims: [64; 3],
        structures: vec![
            Structure { std: 4.0, ..structure("outer", Shape::Shell { inner: 18.0, outer: 26.0 }, [mid; 3], 1, 60.0) },
            Structure { std: 4.0, ..structure("middle", Shape::Shell { inner: 10.0, outer: 18.0 }, [mid; 3], 2, 100.0) },
            Structure { std: 4.0, ..structure("core", Shape::Sphere { radius: 10.0 }, [mid; 3], 3, 140.0) },
        ],
        background_mean: 20.0,
        background_std: 5.0,
        seed: 1,
        bias_amplitude: 0.05,
    };

    let std = 8.0;
    let low = LOW_CONTRAST_SEPARATION * std;
    // Pairs (1, 2) and (5, 6) are the low-contrast ones.
    let means = [90.0, 90.0 + low, 130.0, 50.0, 170.0, 170.0 + low, 210.0, 250.0];
    let mut spheres = Vec::new();
    for (k, &mean) in means.iter().enumerate() {
        let center = [0, 1, 2].map(|a| if (k >> a) & 1 == 1 { mid + 13.0 } else { mid - 13.0 });
        spheres.push(Structure { std, ..structure(&format!("sphere{}", k + 1), Shape::Sphere { radius: 9.0 }, center, k as u16 + 1, mean) });
    }
    let eight = PhantomSpec {
        name: "eight_spheres".into(),
        dims: [64; 3],
        structures: spheres,
        background_mean: 20.0,
        background_std: 5.0,
        seed: 2,
        bias_amplitude: 0.05,
    };

    let mirrored = PhantomSpec {
        name: "mirrored_spheres".into(),
        dims: [64; 3],
        structures: vec![
            structure("tube", Shape::Ellipsoid { radii: [20.0, 3.5, 3.5] }, [mid; 3], 3, 60.0),
            structure("left", Shape::Sphere { radius: 10.0 }, [mid - 14.0, mid, mid], 1, 120.0),
            structure("right", Shape::Sphere { radius: 10.0 }, [mid + 14.0, mid, mid], 2, 120.0),
        ],
        background_mean: 20.0,
        background_std: 5.0,
        seed: 3,
        bias_amplitude: 0.0,
    };
    vec![shells, eight, mirrored]
}
