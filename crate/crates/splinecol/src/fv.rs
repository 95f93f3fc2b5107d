//! First-order finite-volume reference solver (Rusanov fluxes).
//!
//! Deliberately simple and very robust: piecewise-constant states, local
//! Lax-Friedrichs numerical flux, forward Euler in time under a CFL bound.
//! Converges to the entropy solution on refinement, so it serves as the
//! reference for cases without a closed-form solution. State is stored
//! interleaved (cell-major) so the update loop touches contiguous memory.

use rayon::prelude::*;

use crate::error::SolverError;
use crate::law::{EulerLaw, ScalarLaw};

/// Ghost-cell policy on one boundary pair of a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FvBc {
    Periodic,
    /// Zero-gradient: ghost cell copies the edge cell.
    Copy,
}

pub enum FvLaw {
    Scalar(ScalarLaw),
    Euler(EulerLaw),
}

/// Hard cap on fields (2D Euler has 4); lets the hot loop use stack buffers.
const MAX_FIELDS: usize = 4;

impl FvLaw {
    pub fn n_fields(&self) -> usize {
        match self {
            FvLaw::Scalar(_) => 1,
            FvLaw::Euler(e) => e.n_fields(),
        }
    }

    fn flux(&self, state: &[f64], dir: usize, out: &mut [f64]) {
        match self {
            FvLaw::Scalar(law) => out[0] = law.flux(state[0], dir),
            FvLaw::Euler(law) => law.flux(state, dir, out),
        }
    }

    /// Bound on wave speeds between two states along `dir`. Fluxes with
    /// non-monotone derivative (Buckley-Leverett variants) are sampled on
    /// the whole interval between the states, not just its ends.
    fn interval_wavespeed(&self, a: &[f64], b: &[f64], dir: usize) -> f64 {
        match self {
            FvLaw::Scalar(law) => match law {
                ScalarLaw::Advection(_) | ScalarLaw::Burgers => {
                    law.wavespeed(a[0], dir).max(law.wavespeed(b[0], dir))
                }
                _ => {
                    let lo = a[0].min(b[0]);
                    let hi = a[0].max(b[0]);
                    let mut s = 0f64;
                    for i in 0..11 {
                        let u = lo + (hi - lo) * i as f64 / 10.0;
                        s = s.max(law.wavespeed(u, dir));
                    }
                    s
                }
            },
            FvLaw::Euler(law) => law.wavespeed(a, dir).max(law.wavespeed(b, dir)),
        }
    }

    fn cell_wavespeed(&self, state: &[f64], dir: usize) -> f64 {
        match self {
            FvLaw::Scalar(law) => law.wavespeed(state[0], dir),
            FvLaw::Euler(law) => law.wavespeed(state, dir),
        }
    }
}

pub struct FvSolver {
    pub law: FvLaw,
    domain: Vec<(f64, f64)>,
    n: Vec<usize>,
    h: Vec<f64>,
    bcs: Vec<(FvBc, FvBc)>,
    /// Interleaved state: `state[cell * n_fields + field]`, x-fastest cells.
    state: Vec<f64>,
    pub t: f64,
}

impl FvSolver {
    pub fn new(
        law: FvLaw,
        domain: &[(f64, f64)],
        cells: &[usize],
        bcs: &[(FvBc, FvBc)],
        ic: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    ) -> Self {
        assert_eq!(domain.len(), cells.len());
        assert_eq!(domain.len(), bcs.len());
        assert!(law.n_fields() <= MAX_FIELDS);
        let d = domain.len();
        let h: Vec<f64> = (0..d).map(|l| (domain[l].1 - domain[l].0) / cells[l] as f64).collect();
        let ncells: usize = cells.iter().product();
        let nf = law.n_fields();
        let mut state = vec![0.0; ncells * nf];
        let mut x = vec![0.0; d];
        for cell in 0..ncells {
            let mut rem = cell;
            for l in 0..d {
                let i = rem % cells[l];
                rem /= cells[l];
                x[l] = domain[l].0 + (i as f64 + 0.5) * h[l];
            }
            let v = ic(&x);
            state[cell * nf..(cell + 1) * nf].copy_from_slice(&v);
        }
        FvSolver { law, domain: domain.to_vec(), n: cells.to_vec(), h, bcs: bcs.to_vec(), state, t: 0.0 }
    }

    pub fn cells(&self) -> &[usize] {
        &self.n
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Center of a cell by flat index.
    pub fn midpoint(&self, cell: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n.len()];
        let mut rem = cell;
        for l in 0..self.n.len() {
            let i = rem % self.n[l];
            rem /= self.n[l];
            x[l] = self.domain[l].0 + (i as f64 + 0.5) * self.h[l];
        }
        x
    }

    pub fn n_cells(&self) -> usize {
        self.n.iter().product()
    }

    pub fn cell_state(&self, cell: usize) -> &[f64] {
        let nf = self.law.n_fields();
        &self.state[cell * nf..(cell + 1) * nf]
    }

    /// Piecewise-constant evaluation.
    pub fn value_at(&self, x: &[f64]) -> &[f64] {
        let mut cell = 0usize;
        let mut stride = 1usize;
        for l in 0..self.n.len() {
            let i = ((x[l] - self.domain[l].0) / self.h[l]).floor() as isize;
            let i = i.clamp(0, self.n[l] as isize - 1) as usize;
            cell += stride * i;
            stride *= self.n[l];
        }
        self.cell_state(cell)
    }

    /// Largest stable time step: `cfl / max_cell(sum_dir s_dir / h_dir)`.
    pub fn max_dt(&self, cfl: f64) -> f64 {
        let nf = self.law.n_fields();
        let worst = self
            .state
            .par_chunks(nf)
            .map(|u| {
                let mut s = 0.0;
                for dir in 0..self.n.len() {
                    s += self.law.cell_wavespeed(u, dir) / self.h[dir];
                }
                s
            })
            .reduce(|| 0.0, f64::max);
        cfl / worst
    }

    pub fn step(&mut self, dt: f64) {
        let nf = self.law.n_fields();
        let d = self.n.len();
        let ncells = self.n_cells();
        let mut strides = [0usize; 3];
        {
            let mut s = 1;
            for l in 0..d {
                strides[l] = s;
                s *= self.n[l];
            }
        }
        let old = std::mem::take(&mut self.state);
        let mut new = old.clone();
        let mut iface = vec![0.0; ncells * nf];
        for dir in 0..d {
            let n_dir = self.n[dir];
            let stride = strides[dir] as isize;
            let periodic = self.bcs[dir].0 == FvBc::Periodic;
            // coordinate of the left neighbor (ghost = edge cell for Copy)
            let left_of: Vec<usize> = (0..n_dir)
                .map(|i| if periodic { (i + n_dir - 1) % n_dir } else { i.saturating_sub(1) })
                .collect();
            let right_of: Vec<usize> = (0..n_dir)
                .map(|i| if periodic { (i + 1) % n_dir } else { (i + 1).min(n_dir - 1) })
                .collect();
            let coord_of = |cell: usize| cell / strides[dir] % n_dir;

            // flux through the LEFT interface of every cell, each computed once
            iface.par_chunks_mut(nf).enumerate().for_each(|(cell, out)| {
                let i = coord_of(cell);
                let lc =
                    (cell as isize + (left_of[i] as isize - i as isize) * stride) as usize;
                rusanov(
                    &self.law,
                    &old[lc * nf..(lc + 1) * nf],
                    &old[cell * nf..(cell + 1) * nf],
                    dir,
                    out,
                );
            });

            let lam = dt / self.h[dir];
            new.par_chunks_mut(nf).enumerate().for_each(|(cell, out)| {
                let i = coord_of(cell);
                let fl = &iface[cell * nf..(cell + 1) * nf];
                let mut edge = [0.0; MAX_FIELDS];
                let fr: &[f64] = if !periodic && i == n_dir - 1 {
                    // zero-gradient ghost: outflow flux is just f(u_edge)
                    self.law.flux(&old[cell * nf..(cell + 1) * nf], dir, &mut edge);
                    &edge[..nf]
                } else {
                    let rc = (cell as isize + (right_of[i] as isize - i as isize) * stride)
                        as usize;
                    &iface[rc * nf..(rc + 1) * nf]
                };
                for f in 0..nf {
                    out[f] -= lam * (fr[f] - fl[f]);
                }
            });
        }
        self.state = new;
        self.t += dt;
    }

    /// Advances to `t_f` with adaptive CFL-limited steps, landing exactly.
    pub fn advance_to(&mut self, t_f: f64, cfl: f64) -> Result<(), SolverError> {
        let mut steps = 0usize;
        while self.t < t_f - 1e-12 * t_f.max(1.0) {
            let dt = self.max_dt(cfl).min(t_f - self.t);
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(SolverError::BlowUp {
                    step: steps,
                    t: self.t,
                    what: "finite-volume CFL time step",
                });
            }
            self.step(dt);
            steps += 1;
        }
        Ok(())
    }

    /// Cell-averaged L1 distance to a pointwise function, per field:
    /// sum_cells |u_cell - g(x_cell)| * volume.
    pub fn l1_distance_to(&self, g: &(dyn Fn(&[f64]) -> Vec<f64> + Sync)) -> Vec<f64> {
        let nf = self.law.n_fields();
        let vol = self.cell_volume();
        let mut acc = vec![0.0; nf];
        for cell in 0..self.n_cells() {
            let x = self.midpoint(cell);
            let gv = g(&x);
            let u = self.cell_state(cell);
            for f in 0..nf {
                acc[f] += (u[f] - gv[f]).abs() * vol;
            }
        }
        acc
    }
}

/// Local Lax-Friedrichs (Rusanov) interface flux.
fn rusanov(law: &FvLaw, ul: &[f64], ur: &[f64], dir: usize, out: &mut [f64]) {
    let nf = law.n_fields();
    let mut fl = [0.0; MAX_FIELDS];
    let mut fr = [0.0; MAX_FIELDS];
    law.flux(ul, dir, &mut fl);
    law.flux(ur, dir, &mut fr);
    let s = law.interval_wavespeed(ul, ur, dir);
    for f in 0..nf {
        out[f] = 0.5 * (fl[f] + fr[f]) - 0.5 * s * (ur[f] - ul[f]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ScalarRiemann;

    #[test]
    fn constant_states_are_exact_fixed_points() {
        let ic = |_: &[f64]| vec![0.7];
        let mut fv = FvSolver::new(
            FvLaw::Scalar(ScalarLaw::Burgers),
            &[(0.0, 1.0)],
            &[64],
            &[(FvBc::Periodic, FvBc::Periodic)],
            &ic,
        );
        fv.advance_to(0.1, 0.4).unwrap();
        assert!(fv.state.iter().all(|&v| v == 0.7));

        let euler = EulerLaw::new(1.4, 2);
        let ic2 = |_: &[f64]| vec![1.0, 0.2, -0.1, 2.0];
        let mut fv2 = FvSolver::new(
            FvLaw::Euler(euler),
            &[(0.0, 1.0), (0.0, 1.0)],
            &[16, 16],
            &[(FvBc::Copy, FvBc::Copy), (FvBc::Copy, FvBc::Copy)],
            &ic2,
        );
        fv2.advance_to(0.02, 0.4).unwrap();
        for cell in 0..fv2.n_cells() {
            let u = fv2.cell_state(cell);
            assert_eq!(u, &[1.0, 0.2, -0.1, 2.0]);
        }
    }

    #[test]
    fn periodic_update_conserves_the_total_integral() {
        let ic = |x: &[f64]| vec![(2.0 * std::f64::consts::PI * x[0]).sin()];
        let mut fv = FvSolver::new(
            FvLaw::Scalar(ScalarLaw::Burgers),
            &[(0.0, 1.0)],
            &[200],
            &[(FvBc::Periodic, FvBc::Periodic)],
            &ic,
        );
        let total0: f64 = fv.state.iter().sum();
        fv.advance_to(0.3, 0.4).unwrap();
        let total1: f64 = fv.state.iter().sum();
        assert!((total1 - total0).abs() < 1e-10 * fv.n_cells() as f64);
    }

    #[test]
    fn burgers_riemann_converges_to_the_entropy_solution() {
        let ic = |x: &[f64]| vec![if x[0] < 1.0 / 3.0 { 1.0 } else { 0.0 }];
        let mut fv = FvSolver::new(
            FvLaw::Scalar(ScalarLaw::Burgers),
            &[(0.0, 1.0)],
            &[10_000],
            &[(FvBc::Copy, FvBc::Copy)],
            &ic,
        );
        fv.advance_to(0.2, 0.4).unwrap();
        let exact = ScalarRiemann::new(ScalarLaw::Burgers, 0, 1.0 / 3.0, 1.0, 0.0).unwrap();
        let err = fv.l1_distance_to(&|x: &[f64]| vec![exact.eval(x[0], 0.2)]);
        println!("burgers riemann fv L1 at 10^4 cells: {:.3e}", err[0]);
        assert!(err[0] < 1.5e-4, "L1 error {} too large", err[0]);
    }

    #[test]
    fn two_dimensional_update_preserves_diagonal_symmetry() {
        // symmetric initial data + symmetric flux (Burgers in both
        // directions) stays symmetric under (x, y) swap; catches transposed
        // indexing in the 2D update
        let ic = |x: &[f64]| {
            vec![
                (2.0 * std::f64::consts::PI * x[0]).sin()
                    * (2.0 * std::f64::consts::PI * x[1]).sin(),
            ]
        };
        let mut fv = FvSolver::new(
            FvLaw::Scalar(ScalarLaw::Burgers),
            &[(0.0, 1.0), (0.0, 1.0)],
            &[64, 64],
            &[(FvBc::Periodic, FvBc::Periodic), (FvBc::Periodic, FvBc::Periodic)],
            &ic,
        );
        fv.advance_to(0.05, 0.4).unwrap();
        let n = 64;
        for iy in 0..n {
            for ix in 0..n {
                let a = fv.cell_state(ix + n * iy)[0];
                let b = fv.cell_state(iy + n * ix)[0];
                assert!((a - b).abs() < 1e-13, "asymmetry at ({ix},{iy}): {a} vs {b}");
            }
        }
    }
}
