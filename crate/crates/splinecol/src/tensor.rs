//! Tensor-product collocation algebra.
//!
//! Everything multivariate reduces to 1D operators applied direction by
//! direction. Two kernels do all the work:
//!
//! * [`apply_along`] multiplies one direction of a flat grid array by a
//!   banded point-evaluation matrix (values or derivatives of basis
//!   functions at a point set). This is how fields and their derivatives
//!   are evaluated on whole grids.
//! * [`TensorMassSolver::solve`] inverts the tensor-product collocation
//!   ("mass") matrix by running banded 1D solves along the z, then y, then x
//!   direction; the Kronecker inverse factors exactly.
//!
//! Grid layout everywhere: row-major flat arrays with x fastest,
//! `data[ix + nx*(iy + ny*iz)]`.

use crate::banded::{Banded, BandedFactor};
use crate::error::SolverError;
use crate::spline::{SplineSpace1D, TensorSpace, Topology};
use rayon::prelude::*;

/// Values (or a fixed-order derivative) of all basis functions of one 1D
/// space at a list of points, stored as banded rows: row `i` holds `width`
/// entries starting at basis index `first[i]` (wrapping modulo `n_basis` for
/// periodic spaces).
#[derive(Debug, Clone)]
pub struct PointEvalMatrix {
    pub n_points: usize,
    pub n_basis: usize,
    pub width: usize,
    periodic: bool,
    first: Vec<usize>,
    vals: Vec<f64>,
}

impl PointEvalMatrix {
    pub fn from_points(space: &SplineSpace1D, points: &[f64], deriv: usize) -> Self {
        let width = space.degree() + 1;
        let n_points = points.len();
        let mut first = Vec::with_capacity(n_points);
        let mut vals = Vec::with_capacity(n_points * width);
        for &x in points {
            let e = space.eval_basis(x, deriv);
            first.push(e.first);
            vals.extend_from_slice(e.row(deriv));
        }
        Self {
            n_points,
            n_basis: space.n_basis(),
            width,
            periodic: space.topology() == Topology::Periodic,
            first,
            vals,
        }
    }

    /// Collocation matrix: basis values at the space's own Greville points.
    pub fn collocation(space: &SplineSpace1D) -> Self {
        Self::from_points(space, &space.greville_points(), 0)
    }

    #[inline]
    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        (self.first[i], &self.vals[i * self.width..(i + 1) * self.width])
    }

    /// Dense row (length `n_basis`) — test and assembly helper.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_basis];
        let (first, vals) = self.row(i);
        for (t, &v) in vals.iter().enumerate() {
            let j = if self.periodic {
                (first + t) % self.n_basis
            } else {
                first + t
            };
            out[j] += v;
        }
        out
    }

    /// y = A x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_basis);
        debug_assert_eq!(y.len(), self.n_points);
        for i in 0..self.n_points {
            let (first, vals) = self.row(i);
            let mut acc = 0.0;
            if !self.periodic || first + self.width <= self.n_basis {
                for (t, &v) in vals.iter().enumerate() {
                    acc += v * x[first + t];
                }
            } else {
                for (t, &v) in vals.iter().enumerate() {
                    acc += v * x[(first + t) % self.n_basis];
                }
            }
            y[i] = acc;
        }
    }
}

/// Factor the collocation matrix of a 1D space.
pub fn factorize(space: &SplineSpace1D) -> Result<BandedFactor, SolverError> {
    let label = format!(
        "degree-{} {:?} space with {} elements",
        space.degree(),
        space.topology(),
        space.n_elements()
    );
    let mat = PointEvalMatrix::collocation(space);
    let n = mat.n_points;
    match space.topology() {
        Topology::Open => {
            let k = space.degree();
            let mut a = Banded::zeros(n, k, k);
            for i in 0..n {
                let (first, vals) = mat.row(i);
                for (t, &v) in vals.iter().enumerate() {
                    if v != 0.0 {
                        a.set(i, first + t, v);
                    }
                }
            }
            BandedFactor::factor(a, &label)
        }
        Topology::Periodic => {
            // Greville rows all share the same band offsets; express the
            // matrix in unwrapped band form and let the cyclic factorization
            // split off the corner blocks.
            let kl = (n + 0 - mat.first[0]) % n; // row 0 starts kl to the left
            let ku = mat.width - 1 - kl;
            let w = mat.width;
            let mut rows = vec![0.0; n * w];
            for i in 0..n {
                let (first, vals) = mat.row(i);
                debug_assert_eq!((i + n - first) % n, kl, "row {i} band misaligned");
                rows[i * w..(i + 1) * w].copy_from_slice(vals);
            }
            BandedFactor::factor_cyclic(n, kl, ku, &rows, &label)
        }
    }
}

/// Apply a 1D point-evaluation matrix along direction `dir` of a flat grid.
/// Returns the new array; `shape[dir]` becomes `mat.n_points`.
pub fn apply_along(mat: &PointEvalMatrix, data: &[f64], shape: &[usize], dir: usize) -> Vec<f64> {
    let d = shape.len();
    assert!(dir < d);
    assert_eq!(shape[dir], mat.n_basis);
    let pre: usize = shape[..dir].iter().product();
    let post: usize = shape[dir + 1..].iter().product();
    let (l_in, l_out) = (mat.n_basis, mat.n_points);
    let mut out = vec![0.0; pre * l_out * post];

    let in_slab = pre * l_in;
    let out_slab = pre * l_out;
    out.par_chunks_mut(out_slab)
        .zip(data.par_chunks(in_slab))
        .for_each(|(o, x)| {
            if pre == 1 {
                // contiguous lines: plain banded matvec
                mat.apply(x, o);
            } else {
                for r in 0..l_out {
                    let (first, vals) = mat.row(r);
                    let orow = &mut o[r * pre..(r + 1) * pre];
                    for (t, &v) in vals.iter().enumerate() {
                        let j = if mat.periodic {
                            (first + t) % l_in
                        } else {
                            first + t
                        };
                        let xrow = &x[j * pre..(j + 1) * pre];
                        for p in 0..pre {
                            orow[p] += v * xrow[p];
                        }
                    }
                }
            }
        });
    out
}

/// Evaluate a coefficient grid on the tensor grid defined by per-direction
/// matrices (e.g. derivatives at Greville points or centroids).
pub fn tensor_eval(mats: &[&PointEvalMatrix], shape: &[usize], data: &[f64]) -> Vec<f64> {
    let mut cur = data.to_vec();
    let mut cur_shape = shape.to_vec();
    for dir in 0..mats.len() {
        cur = apply_along(mats[dir], &cur, &cur_shape, dir);
        cur_shape[dir] = mats[dir].n_points;
    }
    cur
}

/// Per-direction factorizations of the tensor-product collocation matrix.
#[derive(Debug)]
pub struct TensorMassSolver {
    factors: Vec<BandedFactor>,
    shape: Vec<usize>,
}

impl TensorMassSolver {
    pub fn new(space: &TensorSpace) -> Result<Self, SolverError> {
        let factors = space
            .spaces()
            .iter()
            .map(factorize)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            factors,
            shape: space.shape(),
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Solve (M_x (x) M_y (x) M_z) c = rhs in place: 1D banded solves along
    /// the highest direction first, then down to x.
    pub fn solve(&self, data: &mut [f64]) {
        let d = self.shape.len();
        debug_assert_eq!(data.len(), self.shape.iter().product::<usize>());
        for dir in (0..d).rev() {
            self.solve_along(data, dir);
        }
    }

    fn solve_along(&self, data: &mut [f64], dir: usize) {
        let f = &self.factors[dir];
        let l = self.shape[dir];
        let pre: usize = self.shape[..dir].iter().product();
        let post: usize = self.shape[dir + 1..].iter().product();
        if pre == 1 {
            data.par_chunks_mut(l).for_each(|line| f.solve(line));
        } else {
            let slab = pre * l;
            data.par_chunks_mut(slab).with_max_len(1).for_each(|s| {
                let mut scratch = vec![0.0; l];
                for p in 0..pre {
                    for q in 0..l {
                        scratch[q] = s[p + q * pre];
                    }
                    f.solve(&mut scratch);
                    for q in 0..l {
                        s[p + q * pre] = scratch[q];
                    }
                }
            });
            let _ = post;
        }
    }
}

/// Interpolate point values given on the Greville grid: returns spline
/// coefficients in the same space.
pub fn fit_field(solver: &TensorMassSolver, values: &[f64]) -> Vec<f64> {
    let mut c = values.to_vec();
    solver.solve(&mut c);
    c
}
