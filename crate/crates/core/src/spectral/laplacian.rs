use crate::volume::{BrainMask, Dims};

const OUTSIDE: u32 = u32::MAX;

/// Unit-weight graph Laplacian `L = D - W` over the 6-connected in-mask
/// voxels. Rows follow ascending voxel index.
#[derive(Debug, Clone)]
pub struct SparseLaplacian {
    dims: Dims,
    index_of: Vec<u32>,
    voxels: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
}

pub fn build_laplacian(mask: &BrainMask) -> SparseLaplacian {
    let dims = mask.dims();
    let voxels: Vec<usize> = mask.indices().collect();
    let mut index_of = vec![OUTSIDE; dims.len()];
    for (row, &v) in voxels.iter().enumerate() {
        index_of[v] = row as u32;
    }
    let mut row_ptr = Vec::with_capacity(voxels.len() + 1);
    let mut cols = Vec::with_capacity(voxels.len() * 6);
    row_ptr.push(0);
    // Neighbor order: -z, -y, -x, +x, +y, +z, so columns come out ascending.
    const ORDERED: [[i64; 3]; 6] = [
        [0, 0, -1],
        [0, -1, 0],
        [-1, 0, 0],
        [1, 0, 0],
        [0, 1, 0],
        [0, 0, 1],
    ];
    for &v in &voxels {
        let [x, y, z] = dims.coords(v);
        for off in ORDERED {
            let p = [x as i64 + off[0], y as i64 + off[1], z as i64 + off[2]];
            if let Some(j) = dims.checked_index(p) {
                if index_of[j] != OUTSIDE {
                    cols.push(index_of[j]);
                }
            }
        }
        row_ptr.push(cols.len());
    }
    SparseLaplacian { dims, index_of, voxels, row_ptr, cols }
}

impl SparseLaplacian {
    /// Number of in-mask voxels (rows).
    pub fn n(&self) -> usize {
        self.voxels.len()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Row of a grid voxel, if it is in the mask.
    pub fn row_of(&self, voxel: usize) -> Option<usize> {
        let r = self.index_of[voxel];
        (r != OUTSIDE).then_some(r as usize)
    }

    /// Grid voxel of each row.
    pub fn voxels(&self) -> &[usize] {
        &self.voxels
    }

    pub fn degree(&self, row: usize) -> usize {
        self.row_ptr[row + 1] - self.row_ptr[row]
    }

    pub fn neighbors(&self, row: usize) -> &[u32] {
        &self.cols[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    /// `y = L x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n());
        assert_eq!(y.len(), self.n());
        for (row, out) in y.iter_mut().enumerate() {
            let nb = self.neighbors(row);
            let s: f64 = nb.iter().map(|&j| x[j as usize]).sum();
            *out = nb.len() as f64 * x[row] - s;
        }
    }

    /// Dense copy, row-major. Only sensible for small masks.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n();
        let mut m = vec![0.0; n * n];
        for row in 0..n {
            m[row * n + row] = self.degree(row) as f64;
            for &j in self.neighbors(row) {
                m[row * n + j as usize] = -1.0;
            }
        }
        m
    }
}
