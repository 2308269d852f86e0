//! Thick-restart Lanczos for the low end of a symmetric positive
//! semidefinite spectrum.
//!
//! Known eigenvectors (the constant vector for a graph Laplacian) are
//! deflated explicitly: every Krylov vector is kept orthogonal to them.
//! Eigenpairs are locked one at a time, smallest first, and a final fresh
//! start checks that no smaller eigenvalue was skipped (repeated eigenvalues
//! only show up one copy per Krylov space).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::symeig::symmetric_eigen;
use super::SpectralError;

/// Symmetric linear operator on `R^n`.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl SymmetricOperator for super::SparseLaplacian {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        super::SparseLaplacian::apply(self, x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    /// Unit Euclidean norm.
    pub vector: Vec<f64>,
    /// `||A f - lambda f||_2`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Absolute residual target, scaled by `max(1, |lambda|)`.
    pub tol: f64,
    /// Matrix-vector product budget; `None` means `10 * n`.
    pub max_matvecs: Option<usize>,
    pub max_basis: usize,
    /// Ritz vectors retained across a restart.
    pub keep: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_matvecs: None,
            max_basis: 64,
            keep: 24,
            seed: 0x5eed_1a9c,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    /// Ascending eigenvalue order.
    pub pairs: Vec<EigenPair>,
    pub matvecs: usize,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(w: &mut [f64], against: &[&[f64]]) {
    for v in against {
        let c = dot(v, w);
        axpy(-c, v, w);
    }
}

struct Budget {
    used: usize,
    cap: usize,
    best_residual: f64,
}

impl Budget {
    fn spend(&mut self) -> Result<(), SpectralError> {
        if self.used >= self.cap {
            return Err(SpectralError::NoConvergence {
                residual: self.best_residual,
                matvecs: self.used,
            });
        }
        self.used += 1;
        Ok(())
    }
}

/// The `k` algebraically smallest eigenpairs of a graph Laplacian, the first
/// being the constant vector at eigenvalue zero.
pub fn smallest_eigenpairs(
    l: &super::SparseLaplacian,
    k: usize,
) -> Result<EigenSolution, SpectralError> {
    smallest_eigenpairs_with(l, k, &EigenOptions::default())
}

pub fn smallest_eigenpairs_with(
    l: &super::SparseLaplacian,
    k: usize,
    opts: &EigenOptions,
) -> Result<EigenSolution, SpectralError> {
    let n = l.n();
    if k > n {
        return Err(SpectralError::TooManyPairs { k, n });
    }
    if k == 0 {
        return Ok(EigenSolution { pairs: vec![], matvecs: 0 });
    }
    let constant = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    l.apply(&constant, &mut y);
    let first = EigenPair {
        lambda: 0.0,
        residual: norm(&y),
        vector: constant,
    };
    let mut sol = lowest_in_complement(l, &[first.vector.clone()], k - 1, opts)?;
    sol.pairs.insert(0, first);
    Ok(sol)
}

/// The `count` smallest eigenpairs of `op` restricted to the orthogonal
/// complement of the orthonormal vectors `known`.
pub fn lowest_in_complement<A: SymmetricOperator>(
    op: &A,
    known: &[Vec<f64>],
    count: usize,
    opts: &EigenOptions,
) -> Result<EigenSolution, SpectralError> {
    let n = op.dim();
    if count + known.len() > n {
        return Err(SpectralError::TooManyPairs { k: count + known.len(), n });
    }
    let mut budget = Budget {
        used: 0,
        cap: opts.max_matvecs.unwrap_or(10 * n),
        best_residual: f64::INFINITY,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pairs = restarted_lanczos(op, known, count, opts, &mut rng, &mut budget)?;

    // Fresh-start check for skipped copies of repeated eigenvalues.
    while !pairs.is_empty() && known.len() + pairs.len() < n {
        let mut deflate: Vec<Vec<f64>> = known.to_vec();
        deflate.extend(pairs.iter().map(|p| p.vector.clone()));
        let extra = restarted_lanczos(op, &deflate, 1, opts, &mut rng, &mut budget)?;
        let cand = extra.into_iter().next().expect("one pair requested");
        let worst = pairs.last().unwrap().lambda;
        if cand.lambda < worst - opts.tol.max(1e-9) * worst.abs().max(1.0) {
            pairs.pop();
            let pos = pairs.partition_point(|p| p.lambda <= cand.lambda);
            pairs.insert(pos, cand);
        } else {
            break;
        }
    }
    Ok(EigenSolution { pairs, matvecs: budget.used })
}

fn random_unit(
    n: usize,
    deflate: &[Vec<f64>],
    basis: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            let refs: Vec<&[f64]> = deflate.iter().chain(basis).map(|v| v.as_slice()).collect();
            orthogonalize(&mut v, &refs);
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
}

/// Krylov-Schur style restarted Lanczos with full reorthogonalization.
///
/// Invariant between steps: `A V = V H + r b^T` with `V` orthonormal, `H`
/// symmetric and `r` a unit vector orthogonal to `V` and the deflated set.
fn restarted_lanczos<A: SymmetricOperator>(
    op: &A,
    known: &[Vec<f64>],
    count: usize,
    opts: &EigenOptions,
    rng: &mut ChaCha8Rng,
    budget: &mut Budget,
) -> Result<Vec<EigenPair>, SpectralError> {
    let n = op.dim();
    let mut deflate: Vec<Vec<f64>> = known.to_vec();
    let mut locked: Vec<EigenPair> = Vec::with_capacity(count);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut r = random_unit(n, &deflate, &[], rng);
    let mut r_live = true;
    let mut w = vec![0.0; n];

    while locked.len() < count {
        let room = n - deflate.len();
        let cap = opts.max_basis.min(room).max(1);

        // Expand until the basis is full or the space becomes invariant.
        while basis.len() < cap {
            if !r_live {
                r = random_unit(n, &deflate, &basis, rng);
                b.iter_mut().for_each(|x| *x = 0.0);
            }
            let k = basis.len();
            for (i, row) in h.iter_mut().enumerate() {
                row.push(b[i]);
            }
            basis.push(std::mem::take(&mut r));
            budget.spend()?;
            op.apply(&basis[k], &mut w);
            let mut col = Vec::with_capacity(k + 1);
            for v in &basis {
                col.push(dot(v, &w));
            }
            for (i, v) in basis.iter().enumerate() {
                axpy(-col[i], v, &mut w);
            }
            {
                let refs: Vec<&[f64]> = deflate.iter().chain(&basis).map(|v| v.as_slice()).collect();
                orthogonalize(&mut w, &refs);
            }
            for (i, row) in h.iter_mut().enumerate() {
                row[k] = col[i];
            }
            h.push(col);
            let beta = norm(&w);
            b = vec![0.0; k + 1];
            let hscale = h.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
            if beta <= 1e-13 * hscale {
                r_live = false;
                r = vec![0.0; n];
                break;
            }
            b[k] = beta;
            r = w.iter().map(|x| x / beta).collect();
            r_live = true;
        }

        // Rayleigh-Ritz and locking.
        loop {
            let k = basis.len();
            if k == 0 {
                break;
            }
            let flat: Vec<f64> = h.iter().flatten().copied().collect();
            let (theta, s) = symmetric_eigen(&flat, k);
            let coupling = |i: usize| -> f64 {
                if !r_live {
                    return 0.0;
                }
                (0..k).map(|j| b[j] * s[j * k + i]).sum::<f64>().abs()
            };
            let est = coupling(0);
            let target = opts.tol * theta[0].abs().max(1.0);
            let mut accepted = false;
            if est <= target {
                let mut y = vec![0.0; n];
                for (j, v) in basis.iter().enumerate() {
                    axpy(s[j * k], v, &mut y);
                }
                let ny = norm(&y);
                y.iter_mut().for_each(|x| *x /= ny);
                let mut ay = vec![0.0; n];
                budget.spend()?;
                op.apply(&y, &mut ay);
                let lambda = dot(&y, &ay);
                axpy(-lambda, &y, &mut ay);
                let residual = norm(&ay);
                budget.best_residual = budget.best_residual.min(residual);
                if residual <= target {
                    deflate.push(y.clone());
                    locked.push(EigenPair { lambda, vector: y, residual });
                    accepted = true;
                }
            } else {
                budget.best_residual = budget.best_residual.min(est);
            }

            let full = k >= cap;
            if !accepted && !full && r_live {
                break;
            }
            // Compress onto Ritz vectors: drop the locked one when accepted,
            // otherwise keep the smallest few.
            let from = usize::from(accepted);
            let keep = if accepted { k - 1 } else { opts.keep.min(k.saturating_sub(1)).max(1) };
            let keep = keep.min(k - from).min(opts.keep);
            let cols: Vec<usize> = (from..from + keep).collect();
            let mut nb = Vec::with_capacity(cols.len());
            for &c in &cols {
                let mut y = vec![0.0; n];
                for (j, v) in basis.iter().enumerate() {
                    axpy(s[j * k + c], v, &mut y);
                }
                nb.push(y);
            }
            let nbv: Vec<f64> = cols
                .iter()
                .map(|&c| if r_live { (0..k).map(|j| b[j] * s[j * k + c]).sum() } else { 0.0 })
                .collect();
            h = cols
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let mut row = vec![0.0; cols.len()];
                    row[i] = theta[c];
                    row
                })
                .collect();
            basis = nb;
            b = nbv;
            if locked.len() >= count {
                break;
            }
            if !accepted {
                break;
            }
            if !r_live && basis.is_empty() {
                break;
            }
        }
    }
    locked.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(locked)
}
