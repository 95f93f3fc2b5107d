//! Error norms by element-wise Gauss quadrature, and convergence-rate
//! bookkeeping for mesh-refinement studies.

use crate::error::SolverError;
use crate::spline::FieldCoeffs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    LInf,
}

impl Norm {
    pub fn label(&self) -> &'static str {
        match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::LInf => "linf",
        }
    }

    pub fn parse(s: &str) -> Option<Norm> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l1" => Some(Norm::L1),
            "l2" => Some(Norm::L2),
            "linf" | "max" => Some(Norm::LInf),
            _ => None,
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial with the standard cosine initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // recurrence for P_n(x) and P_n'(x)
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Newton's cosine guesses enumerate roots in descending order
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Integration errors of spline fields against a reference function, by
/// per-element tensor Gauss quadrature with `degree + 2` points per
/// direction. Returns `errors[norm][component]`. Sums are accumulated in a
/// fixed element/point order so results are bit-reproducible.
pub fn error_norms(
    fields: &[FieldCoeffs],
    reference: &dyn Fn(&[f64], f64) -> Vec<f64>,
    t: f64,
    norms: &[Norm],
) -> Result<Vec<Vec<f64>>, SolverError> {
    let nc = fields.len();
    assert!(nc >= 1);
    let space = fields[0].space().clone();
    let d = space.dim();
    let nq = space.space(0).degree() + 2;
    let (gx, gw) = gauss_legendre(nq);

    // per-direction element counts and sizes (meshes are uniform per
    // direction, but read widths off the breakpoints to stay general)
    let mut elems = Vec::with_capacity(d);
    for l in 0..d {
        let bp = space.space(l).breakpoints();
        let spans: Vec<(f64, f64)> = bp.windows(2).map(|w| (w[0], w[1])).collect();
        elems.push(spans);
    }
    let counts: Vec<usize> = elems.iter().map(|e| e.len()).collect();
    let n_elem_total: usize = counts.iter().product();

    let mut acc_l1 = vec![0.0; nc];
    let mut acc_l2 = vec![0.0; nc];
    let mut acc_linf = vec![0.0; nc];

    let mut x = vec![0.0; d];
    let mut qidx = vec![0usize; d];
    let no_deriv = vec![0usize; d];
    for e in 0..n_elem_total {
        let mut rem = e;
        let mut cell = Vec::with_capacity(d);
        for l in 0..d {
            cell.push(rem % counts[l]);
            rem /= counts[l];
        }
        let nq_total = nq.pow(d as u32);
        for q in 0..nq_total {
            let mut rq = q;
            let mut w = 1.0;
            for l in 0..d {
                qidx[l] = rq % nq;
                rq /= nq;
                let (a, b) = elems[l][cell[l]];
                let mid = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                x[l] = mid + half * gx[qidx[l]];
                w *= half * gw[qidx[l]];
            }
            let ex = reference(&x, t);
            for (c, field) in fields.iter().enumerate() {
                let diff = field.eval(&x, &no_deriv) - ex[c];
                acc_l1[c] += w * diff.abs();
                acc_l2[c] += w * diff * diff;
                if diff.abs() > acc_linf[c] {
                    acc_linf[c] = diff.abs();
                }
            }
        }
    }

    Ok(norms
        .iter()
        .map(|n| match n {
            Norm::L1 => acc_l1.clone(),
            Norm::L2 => acc_l2.iter().map(|&v| v.sqrt()).collect(),
            Norm::LInf => acc_linf.clone(),
        })
        .collect())
}

/// One line of a convergence table.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub case: String,
    pub k: usize,
    pub n_elements: usize,
    pub h: f64,
    pub norm: String,
    pub error: f64,
    /// Rate vs the previous (coarser) row of the same (k, norm) series.
    pub rate: Option<f64>,
}

/// Pairwise observed orders for a sequence of errors on successively
/// halved meshes: `rate[i] = log2(e[i-1] / e[i])`.
pub fn pairwise_rates(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; errors.len()];
    for i in 1..errors.len() {
        out[i] = Some((errors[i - 1] / errors[i]).log2());
    }
    out
}

/// Least-squares slope of log(error) against log(h) — the usual global
/// convergence-order estimate over a whole refinement series.
pub fn lsq_slope(h: &[f64], errors: &[f64]) -> f64 {
    assert_eq!(h.len(), errors.len());
    assert!(h.len() >= 2);
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// CSV form of a convergence table: header plus one row per entry, errors in
/// full precision so downstream tooling can recompute rates.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("case,k,n_elements,h,norm,error,rate\n");
    for r in rows {
        let rate = r.rate.map(|v| format!("{v:.4}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{:.16e},{},{:.16e},{}\n",
            r.case, r.k, r.n_elements, r.h, r.norm, r.error, rate
        ));
    }
    out
}

/// Convergence study result: the tabulated rows, plus any refinement levels
/// that failed to run (those do not abort the remaining levels).
pub struct StudyOutcome {
    pub rows: Vec<ConvergenceRow>,
    pub failures: Vec<(usize, usize, SolverError)>,
}

/// Runs `case` across a mesh/degree matrix and tabulates errors against
/// `reference` with observed orders between successive meshes. Levels run in
/// parallel and a failing level is reported without aborting the others.
pub fn convergence_study(
    case: &crate::cases::CaseDefinition,
    degrees: &[usize],
    meshes: &[usize],
    norms: &[Norm],
    nonlinear: bool,
    linear: bool,
    reference: &(dyn Fn(&[f64], f64) -> Vec<f64> + Sync),
) -> StudyOutcome {
    use rayon::prelude::*;

    let jobs: Vec<(usize, usize)> = degrees
        .iter()
        .flat_map(|&k| meshes.iter().map(move |&n| (k, n)))
        .collect();
    let field_names = case.law.field_names();
    let multi = field_names.len() > 1;

    let mut results: std::collections::HashMap<
        (usize, usize),
        Result<Vec<Vec<f64>>, SolverError>,
    > = jobs
        .par_iter()
        .map(|&(k, n)| {
            let outcome = (|| {
                let sys =
                    crate::system::SemiDiscreteSystem::new(case.clone(), n, k, nonlinear, linear)?;
                let out = crate::system::run(
                    &sys,
                    &crate::system::RunOptions::default(),
                    None,
                    None,
                )?;
                error_norms(&out.fields, &|x, t| reference(x, t), out.t, norms)
            })();
            ((k, n), outcome)
        })
        .collect();

    let h_of = |n: usize| -> f64 {
        case.domain
            .iter()
            .map(|&(a, b)| (b - a) / n as f64)
            .fold(0.0, f64::max)
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &k in degrees {
        // errors[norm][component] per successful mesh, in mesh order
        let mut series: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
        for &n in meshes {
            match results.remove(&(k, n)).expect("every job was submitted") {
                Ok(errs) => series.push((n, errs)),
                Err(e) => failures.push((k, n, e)),
            }
        }
        for (ni, norm) in norms.iter().enumerate() {
            for (ci, &fname) in field_names.iter().enumerate() {
                let errs: Vec<f64> = series.iter().map(|(_, e)| e[ni][ci]).collect();
                let hs: Vec<f64> = series.iter().map(|(n, _)| h_of(*n)).collect();
                let label = if multi {
                    format!("{}:{}", norm.label(), fname)
                } else {
                    norm.label().to_string()
                };
                for (i, (&(n, _), &err)) in series.iter().zip(errs.iter()).enumerate() {
                    let rate = if i == 0 {
                        None
                    } else {
                        Some((errs[i - 1] / errs[i]).ln() / (hs[i - 1] / hs[i]).ln())
                    };
                    rows.push(ConvergenceRow {
                        case: case.name.clone(),
                        k,
                        n_elements: n,
                        h: hs[i],
                        norm: label.clone(),
                        error: err,
                        rate,
                    });
                }
            }
        }
    }
    StudyOutcome { rows, failures }
}
