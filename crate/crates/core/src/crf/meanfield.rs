use super::lattice::PermutohedralLattice;
use super::{CrfError, CrfParams, MeanFieldState, Result, UnaryField};
use crate::net::softmax_in_place;
use crate::scalar::Real;
use crate::volume::{BrainMask, Dims};

/// Largest problem the quadratic-cost routines accept.
pub const EXACT_LIMIT: usize = 4096;

/// Spatial kernel support, in bandwidths.
const SPATIAL_RADIUS: f64 = 4.0;

/// Appearance weights between voxels at most this many steps apart along
/// every axis are computed exactly rather than through the lattice.
const NEAR_RADIUS: i64 = 2;

/// Appearance and smoothness kernels between two sites at millimetre
/// positions `pi`, `pj` with intensities `ii`, `ij`.
pub fn pairwise_kernel(pi: [f64; 3], pj: [f64; 3], ii: f64, ij: f64, params: &CrfParams) -> (f64, f64) {
    let d2: f64 = (0..3).map(|a| (pi[a] - pj[a]).powi(2)).sum();
    let di = ii - ij;
    let bilateral = (-d2 / (2.0 * params.sigma_alpha.powi(2)) - di * di / (2.0 * params.sigma_beta.powi(2))).exp();
    let spatial = (-d2 / (2.0 * params.sigma_gamma.powi(2))).exp();
    (bilateral, spatial)
}

/// The voxels taking part in inference, with positions and intensities.
struct Domain {
    dims: Dims,
    spacing: [f64; 3],
    sites: Vec<usize>,
    positions: Vec<[f64; 3]>,
    intensities: Vec<f64>,
}

impl Domain {
    fn new(dims: Dims, intensities: &[f32], spacing: [f32; 3], mask: Option<&BrainMask>) -> Result<Self> {
        if intensities.len() != dims.len() {
            return Err(CrfError::Shape(format!("{} intensities for {} voxels", intensities.len(), dims.len())));
        }
        if let Some(m) = mask {
            if m.dims() != dims {
                return Err(CrfError::Shape(format!("mask {:?} on grid {dims:?}", m.dims())));
            }
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(CrfError::Shape(format!("invalid spacing {spacing:?}")));
        }
        if let Some(i) = intensities.iter().find(|i| !i.is_finite()) {
            return Err(CrfError::Shape(format!("non-finite intensity {i}")));
        }
        let spacing = spacing.map(|s| s as f64);
        let sites: Vec<usize> = (0..dims.len()).filter(|&v| mask.map_or(true, |m| m.get(v))).collect();
        let positions = sites
            .iter()
            .map(|&v| {
                let c = dims.coords(v);
                [0, 1, 2].map(|a| c[a] as f64 * spacing[a])
            })
            .collect();
        let intensities = sites.iter().map(|&v| intensities[v] as f64).collect();
        Ok(Self { dims, spacing, sites, positions, intensities })
    }

    fn guard(&self) -> Result<()> {
        if self.sites.len() > EXACT_LIMIT {
            return Err(CrfError::TooLarge { voxels: self.sites.len(), limit: EXACT_LIMIT });
        }
        Ok(())
    }
}

type Observer<'a, T> = Option<&'a mut dyn FnMut(usize, &MeanFieldState<T>)>;

/// Simultaneous mean-field sweeps. `messages` maps the site marginals to
/// `sum_{j != i} w_ij Q_j(l)` per site and label. Inactive voxels stay
/// certain background.
fn run<T: Real>(
    unary: &UnaryField<T>,
    domain: &Domain,
    params: &CrfParams,
    mut messages: impl FnMut(&[T]) -> Result<Vec<T>>,
    mut observe: Observer<'_, T>,
) -> Result<MeanFieldState<T>> {
    params.validate()?;
    if unary.dims() != domain.dims {
        return Err(CrfError::Shape(format!("unaries on {:?}, intensities on {:?}", unary.dims(), domain.dims)));
    }
    let n = unary.n_labels();
    let mut state = MeanFieldState { dims: domain.dims, n_labels: n, q: vec![T::zero(); domain.dims.len() * n] };
    state.q.iter_mut().step_by(n).for_each(|q| *q = T::one());

    let mut q: Vec<T> = Vec::with_capacity(domain.sites.len() * n);
    for &v in &domain.sites {
        q.extend(unary.potentials(v).iter().map(|&p| -p));
    }
    q.chunks_exact_mut(n).for_each(softmax_in_place);

    let coupled = params.v1 > 0.0 || params.v2 > 0.0;
    for it in 0..params.iterations {
        if coupled {
            let m = messages(&q)?;
            for (k, &v) in domain.sites.iter().enumerate() {
                let row = &mut q[k * n..(k + 1) * n];
                // Potts: subtracting sum_{l' != l} m(l') equals adding m(l)
                // up to a label-independent shift.
                for ((x, &p), &mi) in row.iter_mut().zip(unary.potentials(v)).zip(&m[k * n..(k + 1) * n]) {
                    *x = mi - p;
                }
                softmax_in_place(row);
            }
        }
        if let Some(obs) = observe.as_deref_mut() {
            scatter(&mut state, domain, &q);
            obs(it, &state);
        }
    }
    scatter(&mut state, domain, &q);
    Ok(state)
}

fn scatter<T: Real>(state: &mut MeanFieldState<T>, domain: &Domain, q: &[T]) {
    let n = state.n_labels;
    for (k, &v) in domain.sites.iter().enumerate() {
        state.q[v * n..(v + 1) * n].copy_from_slice(&q[k * n..(k + 1) * n]);
    }
}

/// Mean field with pairwise messages summed exactly over all site pairs.
/// Restricted to at most [`EXACT_LIMIT`] sites.
pub fn meanfield_exact<T: Real>(
    unary: &UnaryField<T>,
    intensities: &[f32],
    spacing: [f32; 3],
    mask: Option<&BrainMask>,
    params: &CrfParams,
) -> Result<MeanFieldState<T>> {
    meanfield_exact_observed(unary, intensities, spacing, mask, params, None)
}

/// [`meanfield_exact`], calling `observe` with the marginals after every
/// sweep.
pub fn meanfield_exact_observed<T: Real>(
    unary: &UnaryField<T>,
    intensities: &[f32],
    spacing: [f32; 3],
    mask: Option<&BrainMask>,
    params: &CrfParams,
    observe: Observer<'_, T>,
) -> Result<MeanFieldState<T>> {
    let domain = Domain::new(unary.dims(), intensities, spacing, mask)?;
    domain.guard()?;
    let n = unary.n_labels();
    let sites = domain.sites.len();
    let exact = |q: &[T]| -> Result<Vec<T>> {
        let mut m = vec![0.0f64; sites * n];
        for i in 0..sites {
            for j in i + 1..sites {
                let (kb, ks) = pairwise_kernel(domain.positions[i], domain.positions[j], domain.intensities[i], domain.intensities[j], params);
                let w = params.v1 * kb + params.v2 * ks;
                for l in 0..n {
                    m[i * n + l] += w * q[j * n + l].as_f64();
                    m[j * n + l] += w * q[i * n + l].as_f64();
                }
            }
        }
        Ok(m.into_iter().map(T::of).collect())
    };
    run(unary, &domain, params, exact, observe)
}

/// Mean field in linear time: appearance messages through the
/// permutohedral lattice (with exact weights for voxels within two grid
/// steps), smoothness messages through a separable Gaussian truncated at
/// four bandwidths.
pub fn meanfield_fast<T: Real>(
    unary: &UnaryField<T>,
    intensities: &[f32],
    spacing: [f32; 3],
    mask: Option<&BrainMask>,
    params: &CrfParams,
) -> Result<MeanFieldState<T>> {
    meanfield_fast_observed(unary, intensities, spacing, mask, params, None)
}

/// [`meanfield_fast`], calling `observe` with the marginals after every
/// sweep.
pub fn meanfield_fast_observed<T: Real>(
    unary: &UnaryField<T>,
    intensities: &[f32],
    spacing: [f32; 3],
    mask: Option<&BrainMask>,
    params: &CrfParams,
    observe: Observer<'_, T>,
) -> Result<MeanFieldState<T>> {
    params.validate()?;
    let domain = Domain::new(unary.dims(), intensities, spacing, mask)?;
    let n = unary.n_labels();
    let lattice = if params.v1 > 0.0 {
        let mut features = Vec::with_capacity(domain.sites.len() * 4);
        for (p, &i) in domain.positions.iter().zip(&domain.intensities) {
            features.extend(p.iter().map(|x| x / params.sigma_alpha));
            features.push(i / params.sigma_beta);
        }
        let mut lattice = PermutohedralLattice::new(&features, 4)?;
        lattice.set_exact_pairs(&features, &near_pairs(&domain))?;
        Some(lattice)
    } else {
        None
    };
    let fast = |q: &[T]| -> Result<Vec<T>> {
        let mut m = vec![T::zero(); q.len()];
        if let Some(lat) = &lattice {
            let v1 = T::of(params.v1);
            for ((o, f), &x) in m.iter_mut().zip(lat.filter(q, n)?).zip(q) {
                *o += v1 * (f - x);
            }
        }
        if params.v2 > 0.0 {
            let v2 = T::of(params.v2);
            for ((o, f), &x) in m.iter_mut().zip(spatial_filter(&domain, q, n, params.sigma_gamma)).zip(q) {
                *o += v2 * (f - x);
            }
        }
        Ok(m)
    };
    run(unary, &domain, params, fast, observe)
}

/// For each site, the other sites within [`NEAR_RADIUS`] grid steps.
fn near_pairs(domain: &Domain) -> Vec<Vec<u32>> {
    let r = NEAR_RADIUS;
    let dims = domain.dims;
    let mut site_of = vec![u32::MAX; dims.len()];
    for (k, &v) in domain.sites.iter().enumerate() {
        site_of[v] = k as u32;
    }
    domain
        .sites
        .iter()
        .map(|&v| {
            let c = dims.coords(v).map(|x| x as i64);
            let mut list = Vec::new();
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        if (dx, dy, dz) == (0, 0, 0) {
                            continue;
                        }
                        if let Some(u) = dims.checked_index([c[0] + dx, c[1] + dy, c[2] + dz]) {
                            if site_of[u] != u32::MAX {
                                list.push(site_of[u]);
                            }
                        }
                    }
                }
            }
            list
        })
        .collect()
}

/// Truncated separable Gaussian over the grid, sampled back at the sites.
/// Includes each site's own value.
fn spatial_filter<T: Real>(domain: &Domain, q: &[T], n: usize, sigma: f64) -> Vec<T> {
    let dims = domain.dims;
    let mut grid = vec![T::zero(); dims.len() * n];
    for (k, &v) in domain.sites.iter().enumerate() {
        grid[v * n..(v + 1) * n].copy_from_slice(&q[k * n..(k + 1) * n]);
    }
    let mut tmp = vec![T::zero(); grid.len()];
    let extent = dims.as_array();
    let strides = [1, dims.nx, dims.nx * dims.ny];
    for axis in 0..3 {
        let step = domain.spacing[axis];
        let r = ((SPATIAL_RADIUS * sigma / step).floor() as usize).min(extent[axis].saturating_sub(1));
        let w: Vec<T> = (0..=r).map(|k| T::of((-(k as f64 * step).powi(2) / (2.0 * sigma * sigma)).exp())).collect();
        let stride = strides[axis] * n;
        for v in 0..dims.len() {
            let c = dims.coords(v)[axis];
            let lo = c.min(r);
            let hi = (extent[axis] - 1 - c).min(r);
            let out = &mut tmp[v * n..(v + 1) * n];
            for (o, &g) in out.iter_mut().zip(&grid[v * n..(v + 1) * n]) {
                *o = w[0] * g;
            }
            for k in 1..=lo {
                let src = v * n - k * stride;
                for (o, &g) in out.iter_mut().zip(&grid[src..src + n]) {
                    *o += w[k] * g;
                }
            }
            for k in 1..=hi {
                let src = v * n + k * stride;
                for (o, &g) in out.iter_mut().zip(&grid[src..src + n]) {
                    *o += w[k] * g;
                }
            }
        }
        std::mem::swap(&mut grid, &mut tmp);
    }
    let mut out = Vec::with_capacity(q.len());
    for &v in &domain.sites {
        out.extend_from_slice(&grid[v * n..(v + 1) * n]);
    }
    out
}

/// Gibbs energy of a labeling: unaries plus Potts-weighted kernels over
/// unordered site pairs. Restricted to at most [`EXACT_LIMIT`] sites.
pub fn gibbs_energy<T: Real>(
    labels: &[u16],
    unary: &UnaryField<T>,
    intensities: &[f32],
    spacing: [f32; 3],
    mask: Option<&BrainMask>,
    params: &CrfParams,
) -> Result<f64> {
    params.validate()?;
    let domain = Domain::new(unary.dims(), intensities, spacing, mask)?;
    domain.guard()?;
    if labels.len() != unary.dims().len() {
        return Err(CrfError::Shape(format!("{} labels for {} voxels", labels.len(), unary.dims().len())));
    }
    let n = unary.n_labels();
    let y: Vec<usize> = domain.sites.iter().map(|&v| labels[v] as usize).collect();
    if let Some(&bad) = y.iter().find(|&&l| l >= n) {
        return Err(CrfError::Shape(format!("label {bad} outside 0..{n}")));
    }
    let mut e: f64 = domain.sites.iter().zip(&y).map(|(&v, &l)| unary.potentials(v)[l].as_f64()).sum();
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            if y[i] != y[j] {
                let (kb, ks) = pairwise_kernel(domain.positions[i], domain.positions[j], domain.intensities[i], domain.intensities[j], params);
                e += params.v1 * kb + params.v2 * ks;
            }
        }
    }
    Ok(e)
}
