//! Building blocks of the stabilization terms: backward time-derivative
//! weights and solution history, grid stencil operations (adjacent-centroid
//! maxima, windowed extrema/means), the residual-based and first-order
//! viscosity formulas, and the coarse-interpolation linear operator.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::SolverError;
use crate::spline::{SplineSpace1D, TensorSpace, Topology};
use crate::tensor::{fit_field, tensor_eval, PointEvalMatrix, TensorMassSolver};

// ---------------------------------------------------------------------------
// Backward differentiation of the stored solution history
// ---------------------------------------------------------------------------

/// Weights `w_j` such that `sum_j w_j f(t_j)` is the derivative at the LAST
/// node of the polynomial interpolating `(t_j, f(t_j))`. With equally spaced
/// nodes this reproduces the classical backward-difference formulas of order
/// `times.len() - 1`; unequal spacing (e.g. a truncated final step) is
/// handled by the same closed form.
pub fn derivative_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    assert!(n >= 2, "need at least two time levels to differentiate");
    let q = n - 1;
    let tq = times[q];
    let mut w = vec![0.0; n];
    for j in 0..q {
        let mut num = 1.0;
        let mut den = 1.0;
        for m in 0..n {
            if m != j && m != q {
                num *= tq - times[m];
            }
            if m != j {
                den *= times[j] - times[m];
            }
        }
        w[j] = num / den;
    }
    for r in 0..q {
        w[q] += 1.0 / (tq - times[r]);
    }
    w
}

/// Rolling store of recent solution snapshots (values at the residual
/// sampling points), used to form the unsteady part of the PDE residual.
/// The differentiation order ramps up as history accumulates, capped by the
/// buffer capacity.
pub struct HistoryBuffer {
    capacity: usize,
    times: VecDeque<f64>,
    snapshots: VecDeque<Vec<f64>>,
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 2);
        HistoryBuffer {
            capacity,
            times: VecDeque::new(),
            snapshots: VecDeque::new(),
        }
    }

    pub fn push(&mut self, t: f64, snapshot: Vec<f64>) {
        if let Some(&last) = self.times.back() {
            assert!(t > last, "history times must increase: {t} after {last}");
            assert_eq!(snapshot.len(), self.snapshots.back().unwrap().len());
        }
        if self.times.len() == self.capacity {
            self.times.pop_front();
            self.snapshots.pop_front();
        }
        self.times.push_back(t);
        self.snapshots.push_back(snapshot);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time derivative at the newest stored level, or `None` with fewer than
    /// two levels.
    pub fn time_derivative(&self) -> Option<Vec<f64>> {
        if self.times.len() < 2 {
            return None;
        }
        let times: Vec<f64> = self.times.iter().copied().collect();
        let w = derivative_weights(&times);
        let n = self.snapshots[0].len();
        let mut out = vec![0.0; n];
        for (wj, snap) in w.iter().zip(self.snapshots.iter()) {
            for (o, s) in out.iter_mut().zip(snap.iter()) {
                *o += wj * s;
            }
        }
        Some(out)
    }
}

// ---------------------------------------------------------------------------
// Grid stencils
// ---------------------------------------------------------------------------

/// Rebuilds an array with axis `dir` transformed from length `old_len` to
/// `new_len`; `f(get, j)` produces output line entry `j` from the input line
/// accessor. Layout is x-fastest throughout.
fn map_axis<F>(data: &[f64], shape: &[usize], dir: usize, new_len: usize, f: F) -> Vec<f64>
where
    F: Fn(&dyn Fn(usize) -> f64, usize) -> f64,
{
    let old_len = shape[dir];
    let stride: usize = shape[..dir].iter().product();
    let outer: usize = shape[dir + 1..].iter().product();
    let mut out = vec![0.0; stride * new_len * outer];
    for o in 0..outer {
        for inner in 0..stride {
            let in_base = inner + stride * old_len * o;
            let out_base = inner + stride * new_len * o;
            let get = |j: usize| data[in_base + stride * j];
            for j in 0..new_len {
                out[out_base + stride * j] = f(&get, j);
            }
        }
    }
    out
}

/// Max of |values| over the residual sampling points adjacent to each
/// collocation point: input lives on the centroid grid (one fewer point per
/// open direction, same count periodic), output on the collocation grid.
pub fn residual_point_max(space: &TensorSpace, centroid_vals: &[f64]) -> Vec<f64> {
    let d = space.dim();
    let mut shape: Vec<usize> = (0..d)
        .map(|l| match space.space(l).topology() {
            Topology::Open => space.space(l).n_basis() - 1,
            Topology::Periodic => space.space(l).n_basis(),
        })
        .collect();
    let mut data: Vec<f64> = centroid_vals.iter().map(|v| v.abs()).collect();
    for dir in 0..d {
        let n_pts = space.space(dir).n_basis();
        let n_cent = shape[dir];
        let periodic = space.space(dir).topology() == Topology::Periodic;
        data = map_axis(&data, &shape, dir, n_pts, |get, j| {
            // centroid j sits between collocation points j and j+1
            if periodic {
                let left = (j + n_cent - 1) % n_cent;
                get(left).max(get(j % n_cent))
            } else if j == 0 {
                get(0)
            } else if j == n_pts - 1 {
                get(n_cent - 1)
            } else {
                get(j - 1).max(get(j))
            }
        });
        shape[dir] = n_pts;
    }
    data
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowOp {
    Max,
    Min,
    Mean,
}

/// Separable sliding-window reduction over the collocation grid: the
/// composite acts on the `(2 radius + 1)^d` box around each point, clamped
/// at open boundaries and wrapped on periodic directions.
pub fn windowed(space: &TensorSpace, vals: &[f64], radius: usize, op: WindowOp) -> Vec<f64> {
    let d = space.dim();
    let shape = space.shape();
    let mut data = vals.to_vec();
    for dir in 0..d {
        let n = shape[dir];
        let periodic = space.space(dir).topology() == Topology::Periodic;
        // avoid counting wrapped points twice in small periodic meshes
        let r = if periodic { radius.min((n - 1) / 2) } else { radius };
        data = map_axis(&data, &shape, dir, n, |get, j| {
            let (lo, hi) = if periodic {
                (j as isize - r as isize, j as isize + r as isize)
            } else {
                ((j as isize - r as isize).max(0), (j as isize + r as isize).min(n as isize - 1))
            };
            let mut acc = match op {
                WindowOp::Max => f64::NEG_INFINITY,
                WindowOp::Min => f64::INFINITY,
                WindowOp::Mean => 0.0,
            };
            for i in lo..=hi {
                let idx = if periodic {
                    i.rem_euclid(n as isize) as usize
                } else {
                    i as usize
                };
                let v = get(idx);
                acc = match op {
                    WindowOp::Max => acc.max(v),
                    WindowOp::Min => acc.min(v),
                    WindowOp::Mean => acc + v,
                };
            }
            if op == WindowOp::Mean {
                acc / (hi - lo + 1) as f64
            } else {
                acc
            }
        });
    }
    data
}

/// Normalization for the residual-based viscosity at each collocation
/// point: the global solution oscillation minus the largest deviation of
/// the values in the 3^d box of adjacent collocation points from the box
/// mean, floored at `eps`. Away from sharp features the deviation term is
/// O(h) and the normalization sits at the solution scale, keeping the
/// viscosity quotient small on smooth data; where the local box is
/// one-sided (shock faces, fresh extrema) the subtraction shrinks the
/// denominator and sharpens the response. The box deviation never exceeds
/// the global oscillation, so the result is nonnegative by construction.
pub fn normalization(space: &TensorSpace, point_vals: &[f64], eps: f64) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in point_vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let range = hi - lo;
    let vmax = windowed(space, point_vals, 1, WindowOp::Max);
    let vmin = windowed(space, point_vals, 1, WindowOp::Min);
    let vmean = windowed(space, point_vals, 1, WindowOp::Mean);
    vmax.iter()
        .zip(vmin.iter().zip(vmean.iter()))
        .map(|(&bhi, (&blo, &bmean))| {
            let deviation = (bhi - bmean).max(bmean - blo);
            (range - deviation).max(eps)
        })
        .collect()
}

/// Floor used inside [`normalization`]: proportional to the global solution
/// range with an absolute backstop for identically constant fields.
pub fn normalization_floor(point_vals: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in point_vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (1e-12 * (hi - lo)).max(1e-14)
}

/// Residual-based viscosity `C_RB h^2 R~ / m` per collocation point.
pub fn rb_viscosity(c_rb: f64, h: &[f64], r_tilde: &[f64], m: &[f64]) -> Vec<f64> {
    h.iter()
        .zip(r_tilde.iter().zip(m.iter()))
        .map(|(&h, (&r, &m))| c_rb * h * h * r / m)
        .collect()
}

/// First-order viscosity `C_max h c` from the stencil-smoothed wavespeed.
pub fn fo_viscosity(c_max: f64, h: &[f64], c_smooth: &[f64]) -> Vec<f64> {
    h.iter().zip(c_smooth.iter()).map(|(&h, &c)| c_max * h * c).collect()
}

// ---------------------------------------------------------------------------
// Linear stabilization operator
// ---------------------------------------------------------------------------

/// The gradient-coarsening pipeline behind the linear stabilization term.
///
/// For each direction the solution gradient is interpolated in the solution
/// space at its Greville points, re-interpolated in the space of one lower
/// degree (same elements) at THAT space's Greville points, and the
/// divergence of the result is evaluated back at the solution space's
/// Greville points. Subtracting this from the plain Laplacian yields a term
/// that vanishes on every function both interpolations represent exactly —
/// in particular all polynomials of degree `k - 1` — so smooth-solution
/// accuracy is preserved while unresolved high-frequency content is damped.
pub struct CoarseStabOperator {
    fine_shape: Vec<usize>,
    coarse_shape: Vec<usize>,
    fine_solver: TensorMassSolver,
    coarse_solver: TensorMassSolver,
    /// solution-space basis values at its own Greville points
    fine_d0: Vec<PointEvalMatrix>,
    /// solution-space basis first derivatives at its own Greville points
    fine_d1: Vec<PointEvalMatrix>,
    /// solution-space basis values at the coarse Greville points
    fine_at_coarse: Vec<PointEvalMatrix>,
    /// coarse basis values / first derivatives at the fine Greville points
    coarse_d0_at_fine: Vec<PointEvalMatrix>,
    coarse_d1_at_fine: Vec<PointEvalMatrix>,
}

impl CoarseStabOperator {
    pub fn new(fine: &Arc<TensorSpace>) -> Result<Self, SolverError> {
        let d = fine.dim();
        let k = fine.space(0).degree();
        if k < 2 {
            return Err(SolverError::InvalidSpace(
                "linear stabilization needs degree >= 2 so the coarse space exists".into(),
            ));
        }
        let mut coarse_spaces = Vec::with_capacity(d);
        for l in 0..d {
            let s = fine.space(l);
            coarse_spaces.push(SplineSpace1D::make_space(
                s.domain(),
                s.n_elements(),
                k - 1,
                s.topology(),
            )?);
        }
        let coarse = TensorSpace::new(coarse_spaces)?;

        let mut fine_d0 = Vec::new();
        let mut fine_d1 = Vec::new();
        let mut fine_at_coarse = Vec::new();
        let mut coarse_d0_at_fine = Vec::new();
        let mut coarse_d1_at_fine = Vec::new();
        for l in 0..d {
            let fs = fine.space(l);
            let cs = coarse.space(l);
            let fine_pts = fs.greville_points();
            let coarse_pts = cs.greville_points();
            fine_d0.push(PointEvalMatrix::from_points(fs, &fine_pts, 0));
            fine_d1.push(PointEvalMatrix::from_points(fs, &fine_pts, 1));
            fine_at_coarse.push(PointEvalMatrix::from_points(fs, &coarse_pts, 0));
            coarse_d0_at_fine.push(PointEvalMatrix::from_points(cs, &fine_pts, 0));
            coarse_d1_at_fine.push(PointEvalMatrix::from_points(cs, &fine_pts, 1));
        }

        let fine_solver = TensorMassSolver::new(fine)?;
        let coarse_solver = TensorMassSolver::new(&coarse)?;
        Ok(CoarseStabOperator {
            fine_shape: fine.shape(),
            coarse_shape: coarse.shape(),
            fine_solver,
            coarse_solver,
            fine_d0,
            fine_d1,
            fine_at_coarse,
            coarse_d0_at_fine,
            coarse_d1_at_fine,
        })
    }

    /// Divergence of the coarsened gradient, evaluated at the solution
    /// space's Greville points.
    pub fn projected_gradient_divergence(&self, coeffs: &[f64]) -> Vec<f64> {
        let d = self.fine_shape.len();
        let mut acc = vec![0.0; coeffs.len()];
        for l in 0..d {
            // d_l of the solution at the fine Greville points
            let mats: Vec<&PointEvalMatrix> = (0..d)
                .map(|m| if m == l { &self.fine_d1[m] } else { &self.fine_d0[m] })
                .collect();
            let grad_vals = tensor_eval(&mats, &self.fine_shape, coeffs);
            // interpolate in the solution space
            let grad_coeffs = fit_field(&self.fine_solver, &grad_vals);
            // sample at the coarse Greville points, interpolate coarsely
            let mats: Vec<&PointEvalMatrix> = (0..d).map(|m| &self.fine_at_coarse[m]).collect();
            let at_coarse = tensor_eval(&mats, &self.fine_shape, &grad_coeffs);
            let proj_coeffs = fit_field(&self.coarse_solver, &at_coarse);
            // d_l of the coarsened gradient back at the fine points
            let mats: Vec<&PointEvalMatrix> = (0..d)
                .map(|m| {
                    if m == l {
                        &self.coarse_d1_at_fine[m]
                    } else {
                        &self.coarse_d0_at_fine[m]
                    }
                })
                .collect();
            let div_part = tensor_eval(&mats, &self.coarse_shape, &proj_coeffs);
            for (a, v) in acc.iter_mut().zip(div_part.iter()) {
                *a += v;
            }
        }
        acc
    }
}
