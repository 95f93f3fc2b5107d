//! Banded LU factorizations, including cyclic (periodic) matrices.
//!
//! Collocation matrices of degree-k spline spaces at Greville points have at
//! most k+1 nonzeros per row, so everything here is banded with small
//! bandwidths. Open-topology matrices factor directly. Periodic matrices are
//! cyclic-banded; they are handled as a banded core plus a low-rank corner
//! correction through the Woodbury identity, which keeps the per-solve cost
//! linear in the matrix size.
//!
//! Pivoting policy: factor without pivoting first and watch the pivots; if
//! any drops below `1e-12 * max |entry|`, refactor with partial pivoting
//! (which widens the upper bandwidth from ku to kl+ku). Greville collocation
//! matrices are comfortably diagonally dominant in practice, so the pivoted
//! path is a safety net rather than the common case.

use crate::error::SolverError;

const PIVOT_RTOL: f64 = 1e-12;

/// Square banded matrix, row-major band storage:
/// entry (i, j) lives at `data[i*(kl+ku+1) + (j - i + kl)]`.
#[derive(Debug, Clone)]
pub struct Banded {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    pub data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let off = j as isize - i as isize;
        if off < -(self.kl as isize) || off > self.ku as isize {
            0.0
        } else {
            self.data[i * self.width() + (off + self.kl as isize) as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let off = j as isize - i as isize;
        debug_assert!(off >= -(self.kl as isize) && off <= self.ku as isize);
        let w = self.width();
        self.data[i * w + (off + self.kl as isize) as usize] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let w = self.width();
        for i in 0..self.n {
            let jlo = i.saturating_sub(self.kl);
            let jhi = (i + self.ku).min(self.n - 1);
            let mut acc = 0.0;
            for j in jlo..=jhi {
                acc += self.data[i * w + (j + self.kl - i)] * x[j];
            }
            y[i] = acc;
        }
    }
}

/// LU factorization without pivoting; L and U keep the original bandwidths.
#[derive(Debug, Clone)]
struct BandedLu {
    mat: Banded, // L strictly below the diagonal, U on and above
}

impl BandedLu {
    fn factor(mut a: Banded, min_pivot: f64) -> Result<Self, (usize, f64)> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let w = a.width();
        for p in 0..n {
            let piv = a.data[p * w + kl];
            if piv.abs() <= min_pivot {
                return Err((p, piv));
            }
            let ihi = (p + kl).min(n - 1);
            for i in p + 1..=ihi {
                let lip = a.data[i * w + (p + kl - i)] / piv;
                a.data[i * w + (p + kl - i)] = lip;
                let jhi = (p + ku).min(n - 1);
                for j in p + 1..=jhi {
                    let upj = a.data[p * w + (j + kl - p)];
                    a.data[i * w + (j + kl - i)] -= lip * upj;
                }
            }
        }
        Ok(Self { mat: a })
    }

    fn solve(&self, b: &mut [f64]) {
        let a = &self.mat;
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let w = a.width();
        for i in 0..n {
            let jlo = i.saturating_sub(kl);
            let mut acc = b[i];
            for j in jlo..i {
                acc -= a.data[i * w + (j + kl - i)] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let jhi = (i + ku).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=jhi {
                acc -= a.data[i * w + (j + kl - i)] * b[j];
            }
            b[i] = acc / a.data[i * w + kl];
        }
    }
}

/// LU with partial pivoting. Storage is widened: U may fill up to kl+ku
/// superdiagonals, L keeps kl subdiagonals (stored as multipliers).
#[derive(Debug, Clone)]
struct BandedLuPiv {
    n: usize,
    kl: usize,
    kw: usize, // upper bandwidth of U = kl + ku
    data: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLuPiv {
    fn factor(a: &Banded, min_pivot: f64) -> Result<Self, (usize, f64)> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let kw = kl + ku;
        let w = kl + kw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                data[i * w + (j + kl - i)] = a.get(i, j);
            }
        }
        let mut ipiv = vec![0usize; n];
        let at = |data: &Vec<f64>, i: usize, j: usize| -> f64 { data[i * w + (j + kl - i)] };
        for p in 0..n {
            // Pick the largest pivot among rows p..=p+kl.
            let ihi = (p + kl).min(n - 1);
            let mut best = p;
            let mut best_v = at(&data, p, p).abs();
            for i in p + 1..=ihi {
                let v = at(&data, i, p).abs();
                if v > best_v {
                    best = i;
                    best_v = v;
                }
            }
            ipiv[p] = best;
            if best_v <= min_pivot {
                return Err((p, best_v));
            }
            if best != p {
                let jhi = (p + kw).min(n - 1);
                for j in p..=jhi {
                    let ap = p * w + (j + kl - p);
                    let ab = best * w + (j + kl - best);
                    data.swap(ap, ab);
                }
            }
            let piv = at(&data, p, p);
            for i in p + 1..=ihi {
                let lip = at(&data, i, p) / piv;
                data[i * w + (p + kl - i)] = lip;
                let jhi = (p + kw).min(n - 1);
                for j in p + 1..=jhi {
                    let upj = data[p * w + (j + kl - p)];
                    data[i * w + (j + kl - i)] -= lip * upj;
                }
            }
        }
        Ok(Self {
            n,
            kl,
            kw,
            data,
            ipiv,
        })
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, kl, kw, w) = (self.n, self.kl, self.kw, self.kl + self.kw + 1);
        for p in 0..n {
            b.swap(p, self.ipiv[p]);
            let ihi = (p + kl).min(n - 1);
            let bp = b[p];
            for i in p + 1..=ihi {
                b[i] -= self.data[i * w + (p + kl - i)] * bp;
            }
        }
        for i in (0..n).rev() {
            let jhi = (i + kw).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=jhi {
                acc -= self.data[i * w + (j + kl - i)] * b[j];
            }
            b[i] = acc / self.data[i * w + kl];
        }
    }
}

/// Small dense LU with partial pivoting, for the Woodbury capacitance block.
#[derive(Debug, Clone)]
struct DenseLu {
    n: usize,
    data: Vec<f64>, // row-major
    ipiv: Vec<usize>,
}

impl DenseLu {
    fn factor(mut data: Vec<f64>, n: usize, min_pivot: f64) -> Result<Self, (usize, f64)> {
        let mut ipiv = vec![0usize; n];
        for p in 0..n {
            let mut best = p;
            let mut best_v = data[p * n + p].abs();
            for i in p + 1..n {
                let v = data[i * n + p].abs();
                if v > best_v {
                    best = i;
                    best_v = v;
                }
            }
            ipiv[p] = best;
            if best_v <= min_pivot {
                return Err((p, best_v));
            }
            if best != p {
                for j in 0..n {
                    data.swap(p * n + j, best * n + j);
                }
            }
            let piv = data[p * n + p];
            for i in p + 1..n {
                let lip = data[i * n + p] / piv;
                data[i * n + p] = lip;
                for j in p + 1..n {
                    let upj = data[p * n + j];
                    data[i * n + j] -= lip * upj;
                }
            }
        }
        Ok(Self { n, data, ipiv })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for p in 0..n {
            b.swap(p, self.ipiv[p]);
            for i in p + 1..n {
                b[i] -= self.data[i * n + p] * b[p];
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..n {
                acc -= self.data[i * n + j] * b[j];
            }
            b[i] = acc / self.data[i * n + i];
        }
    }
}

#[derive(Debug, Clone)]
enum Core {
    Plain(BandedLu),
    Pivoted(BandedLuPiv),
}

impl Core {
    fn solve(&self, b: &mut [f64]) {
        match self {
            Core::Plain(f) => f.solve(b),
            Core::Pivoted(f) => f.solve(b),
        }
    }
}

/// Rank-r corner correction of a cyclic banded matrix: A = B + U e_J^T,
/// where J are the columns touched by the wrapped band corners.
#[derive(Debug, Clone)]
struct Woodbury {
    cols: Vec<usize>,
    /// W = B^{-1} U, column-major n x r.
    w: Vec<f64>,
    cap: DenseLu,
}

/// Factorization of a (possibly cyclic) banded collocation matrix.
#[derive(Debug, Clone)]
pub struct BandedFactor {
    n: usize,
    core: Core,
    correction: Option<Woodbury>,
}

fn factor_core(a: Banded, label: &str) -> Result<Core, SolverError> {
    let min_pivot = PIVOT_RTOL * a.max_abs();
    match BandedLu::factor(a.clone(), min_pivot) {
        Ok(f) => Ok(Core::Plain(f)),
        Err(_) => match BandedLuPiv::factor(&a, min_pivot) {
            Ok(f) => Ok(Core::Pivoted(f)),
            Err((row, pivot)) => Err(SolverError::SingularInterpolation {
                space: label.to_string(),
                row,
                pivot,
            }),
        },
    }
}

impl BandedFactor {
    /// Factor an ordinary (non-cyclic) banded matrix.
    pub fn factor(a: Banded, label: &str) -> Result<Self, SolverError> {
        let n = a.n;
        Ok(Self {
            n,
            core: factor_core(a, label)?,
            correction: None,
        })
    }

    /// Factor a cyclic banded matrix given its rows in unwrapped band form:
    /// row `i` holds entries for columns `i-kl ..= i+ku` (mod n), stored as
    /// `rows[i*(kl+ku+1)..]`. Entries whose unwrapped column falls outside
    /// `0..n` are the corner blocks handled by the Woodbury correction.
    pub fn factor_cyclic(
        n: usize,
        kl: usize,
        ku: usize,
        rows: &[f64],
        label: &str,
    ) -> Result<Self, SolverError> {
        let w = kl + ku + 1;
        assert_eq!(rows.len(), n * w);
        assert!(
            kl + ku < n,
            "cyclic band of width {} does not fit in {} columns",
            w,
            n
        );
        let mut core = Banded::zeros(n, kl, ku);
        // Unique wrapped columns: the kl rightmost and ku leftmost.
        let mut cols: Vec<usize> = Vec::new();
        for j in (n - kl)..n {
            cols.push(j);
        }
        for j in 0..ku {
            cols.push(j);
        }
        cols.sort_unstable();
        cols.dedup();
        let r = cols.len();
        let mut u = vec![0.0; n * r]; // column-major
        let col_of = |j: usize| cols.binary_search(&j).ok();

        for i in 0..n {
            for t in 0..w {
                let v = rows[i * w + t];
                if v == 0.0 {
                    continue;
                }
                let j_lin = i as isize - kl as isize + t as isize;
                if j_lin >= 0 && (j_lin as usize) < n {
                    core.set(i, j_lin as usize, v);
                } else {
                    let j = j_lin.rem_euclid(n as isize) as usize;
                    let c = col_of(j).expect("wrapped column not in corner set");
                    u[c * n + i] += v;
                }
            }
        }

        let max_abs = core.max_abs().max(u.iter().fold(0.0_f64, |m, &v| m.max(v.abs())));
        let core = factor_core(core, label)?;

        // W = B^{-1} U, capacitance C = I + U[J, :] after the solve.
        let mut wmat = u;
        for c in 0..r {
            core.solve(&mut wmat[c * n..(c + 1) * n]);
        }
        let mut cap = vec![0.0; r * r];
        for (ri, &j) in cols.iter().enumerate() {
            for c in 0..r {
                cap[ri * r + c] = wmat[c * n + j];
            }
            cap[ri * r + ri] += 1.0;
        }
        let cap = DenseLu::factor(cap, r, PIVOT_RTOL * max_abs.max(1.0)).map_err(|(row, pivot)| {
            SolverError::SingularInterpolation {
                space: format!("{label} (periodic corner system)"),
                row,
                pivot,
            }
        })?;

        Ok(Self {
            n,
            core,
            correction: Some(Woodbury {
                cols,
                w: wmat,
                cap,
            }),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve A x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        self.core.solve(b);
        if let Some(wb) = &self.correction {
            let r = wb.cols.len();
            let mut z: Vec<f64> = wb.cols.iter().map(|&j| b[j]).collect();
            wb.cap.solve(&mut z);
            for c in 0..r {
                let zc = z[c];
                if zc != 0.0 {
                    let col = &wb.w[c * self.n..(c + 1) * self.n];
                    for i in 0..self.n {
                        b[i] -= col[i] * zc;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};

    fn random_banded(n: usize, kl: usize, ku: usize, rng: &mut StdRng) -> Banded {
        let mut a = Banded::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                a.set(i, j, rng.random_range(-1.0..1.0));
            }
            // keep it solidly nonsingular
            let d = a.get(i, i);
            a.set(i, i, d + 3.0 * d.signum().max(0.5) + 3.0);
        }
        a
    }

    fn to_dense(a: &Banded) -> DMatrix<f64> {
        DMatrix::from_fn(a.n, a.n, |i, j| a.get(i, j))
    }

    #[test]
    fn banded_solve_matches_dense_lu_oracle() {
        let mut rng = StdRng::seed_from_u64(42);
        for &(n, kl, ku) in &[(12usize, 2usize, 3usize), (30, 4, 4), (7, 1, 1)] {
            let a = random_banded(n, kl, ku, &mut rng);
            let dense = to_dense(&a);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let oracle = dense
                .clone()
                .lu()
                .solve(&DVector::from_column_slice(&b))
                .unwrap();
            let f = BandedFactor::factor(a, "test").unwrap();
            let mut x = b.clone();
            f.solve(&mut x);
            for i in 0..n {
                assert!(
                    (x[i] - oracle[i]).abs() < 1e-10,
                    "row {i}: {} vs {}",
                    x[i],
                    oracle[i]
                );
            }
        }
    }

    #[test]
    fn tiny_pivot_falls_back_to_partial_pivoting() {
        // Leading 2x2 block [[eps, 1], [1, 0]] kills unpivoted LU but the
        // matrix is perfectly well conditioned.
        let n = 6;
        let mut a = Banded::zeros(n, 1, 1);
        a.set(0, 0, 1e-16);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 0.0);
        for i in 2..n {
            a.set(i, i, 2.0);
            a.set(i, i - 1, 0.5);
            if i + 1 < n {
                a.set(i, i + 1, 0.25);
            }
        }
        let dense = to_dense(&a);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let oracle = dense.lu().solve(&DVector::from_column_slice(&b)).unwrap();
        let f = BandedFactor::factor(a, "test").unwrap();
        let mut x = b;
        f.solve(&mut x);
        for i in 0..n {
            assert!((x[i] - oracle[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_reports_space_name() {
        let n = 5;
        let mut a = Banded::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 1.0);
        }
        // Zero row 3 entirely.
        for j in 2..=4 {
            a.set(3, j, 0.0);
        }
        a.set(3, 3, 0.0);
        let err = BandedFactor::factor(a, "coarse space k=2").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("coarse space k=2"), "{msg}");
    }

    #[test]
    fn cyclic_solve_matches_dense_oracle() {
        let mut rng = StdRng::seed_from_u64(7);
        for &(n, kl, ku) in &[(10usize, 1usize, 2usize), (24, 2, 2), (9, 3, 1)] {
            let w = kl + ku + 1;
            let mut rows = vec![0.0; n * w];
            let mut dense = DMatrix::zeros(n, n);
            for i in 0..n {
                for t in 0..w {
                    let mut v = rng.random_range(-1.0..1.0);
                    if t == kl {
                        v += 4.0; // diagonal dominance
                    }
                    rows[i * w + t] = v;
                    let j = (i as isize - kl as isize + t as isize).rem_euclid(n as isize) as usize;
                    dense[(i, j)] += v;
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let oracle = dense.lu().solve(&DVector::from_column_slice(&b)).unwrap();
            let f = BandedFactor::factor_cyclic(n, kl, ku, &rows, "periodic test").unwrap();
            let mut x = b.clone();
            f.solve(&mut x);
            for i in 0..n {
                assert!(
                    (x[i] - oracle[i]).abs() < 1e-9,
                    "n={n} kl={kl} ku={ku} row {i}: {} vs {}",
                    x[i],
                    oracle[i]
                );
            }
        }
    }

    #[test]
    fn solve_then_matvec_roundtrip() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_banded(40, 3, 3, &mut rng);
        let f = BandedFactor::factor(a.clone(), "roundtrip").unwrap();
        let b: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut x = b.clone();
        f.solve(&mut x);
        let mut back = vec![0.0; 40];
        a.matvec(&x, &mut back);
        for i in 0..40 {
            assert!((back[i] - b[i]).abs() < 1e-10);
        }
    }
}
