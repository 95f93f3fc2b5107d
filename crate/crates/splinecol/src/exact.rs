//! Closed-form and semi-analytic reference solutions.
//!
//! Scalar Riemann problems are solved by the envelope construction: the wave
//! fan between the two states is read off the convex (or concave) envelope of
//! the flux, so non-convex fluxes such as Buckley-Leverett produce the
//! correct compound shock/rarefaction structure. Euler Riemann problems use
//! the standard pressure-function Newton iteration. Smooth problems use the
//! method of characteristics.

use std::sync::Arc;

use crate::cases::builtin_case;
use crate::error::SolverError;
use crate::law::ScalarLaw;

pub type ExactFn = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

// ---------------------------------------------------------------------------
// Scalar Riemann problems via flux envelopes
// ---------------------------------------------------------------------------

/// One wave of a self-similar scalar Riemann solution, in order of
/// increasing speed. `behind`/`ahead` are the states on the slow/fast side.
#[derive(Debug, Clone, Copy)]
pub enum Wave {
    Shock { speed: f64, behind: f64, ahead: f64 },
    /// Rarefaction fan: state u0 at speed s0 through u1 at speed s1, with
    /// f'(u) = xi in between.
    Fan { s0: f64, s1: f64, u0: f64, u1: f64 },
}

impl Wave {
    fn start(&self) -> f64 {
        match self {
            Wave::Shock { speed, .. } => *speed,
            Wave::Fan { s0, .. } => *s0,
        }
    }

    fn end(&self) -> f64 {
        match self {
            Wave::Shock { speed, .. } => *speed,
            Wave::Fan { s1, .. } => *s1,
        }
    }
}

pub struct ScalarRiemann {
    law: ScalarLaw,
    dir: usize,
    x0: f64,
    ul: f64,
    ur: f64,
    pub waves: Vec<Wave>,
}

/// Segment of the flux envelope between the Riemann states, in ascending u.
#[derive(Debug, Clone, Copy)]
enum Seg {
    /// Envelope coincides with the flux (rarefaction arc).
    Arc { a: f64, b: f64 },
    /// Straight chord below/above the flux (shock).
    Chord { a: f64, b: f64 },
}

const ENVELOPE_SAMPLES: usize = 16385;

impl ScalarRiemann {
    pub fn new(law: ScalarLaw, dir: usize, x0: f64, ul: f64, ur: f64) -> Result<Self, SolverError> {
        let mut waves = Vec::new();
        if ul != ur {
            let lo = ul.min(ur);
            let hi = ul.max(ur);
            // ul > ur takes the concave (upper) envelope; ul < ur the convex
            // (lower) one. For convex fluxes this reduces to the familiar
            // single shock / single rarefaction.
            let upper = ul > ur;
            let segs = envelope_segments(&law, dir, lo, hi, upper)?;
            let f = |u: f64| law.flux(u, dir);
            let fp = |u: f64| law.flux_deriv(u, dir);
            if ul < ur {
                for s in &segs {
                    waves.push(match *s {
                        Seg::Arc { a, b } => Wave::Fan { s0: fp(a), s1: fp(b), u0: a, u1: b },
                        Seg::Chord { a, b } => {
                            Wave::Shock { speed: (f(b) - f(a)) / (b - a), behind: a, ahead: b }
                        }
                    });
                }
            } else {
                for s in segs.iter().rev() {
                    waves.push(match *s {
                        Seg::Arc { a, b } => Wave::Fan { s0: fp(b), s1: fp(a), u0: b, u1: a },
                        Seg::Chord { a, b } => {
                            Wave::Shock { speed: (f(b) - f(a)) / (b - a), behind: b, ahead: a }
                        }
                    });
                }
            }
            for w in waves.windows(2) {
                if w[1].start() < w[0].end() - 1e-9 {
                    return Err(SolverError::RiemannNoConvergence(format!(
                        "envelope waves out of order for states {ul} -> {ur}"
                    )));
                }
            }
        }
        Ok(ScalarRiemann { law, dir, x0, ul, ur, waves })
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return if x < self.x0 { self.ul } else { self.ur };
        }
        let xi = (x - self.x0) / t;
        let mut current = self.ul;
        for w in &self.waves {
            match *w {
                Wave::Shock { speed, ahead, .. } => {
                    if xi < speed {
                        return current;
                    }
                    current = ahead;
                }
                Wave::Fan { s0, s1, u0, u1 } => {
                    if xi < s0 {
                        return current;
                    }
                    if xi <= s1 {
                        return self.fan_state(xi, u0, u1);
                    }
                    current = u1;
                }
            }
        }
        let _ = current;
        self.ur
    }

    /// Solves f'(u) = xi for u between the fan endpoints by bisection
    /// (f' is monotone along an envelope arc).
    fn fan_state(&self, xi: f64, u0: f64, u1: f64) -> f64 {
        let p = |u: f64| self.law.flux_deriv(u, self.dir) - xi;
        let (mut a, mut b) = (u0, u1);
        // p(a) <= 0 <= p(b) by construction of the fan speed range
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if p(a) * p(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }
}

fn envelope_segments(
    law: &ScalarLaw,
    dir: usize,
    lo: f64,
    hi: f64,
    upper: bool,
) -> Result<Vec<Seg>, SolverError> {
    let m = ENVELOPE_SAMPLES;
    let us: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let fs: Vec<f64> = us.iter().map(|&u| law.flux(u, dir)).collect();

    // Andrew's monotone chain on the sampled graph of f.
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..m {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (us[a] - us[o]) * (fs[i] - fs[o]) - (fs[a] - fs[o]) * (us[i] - us[o]);
            let pop = if upper { cross >= 0.0 } else { cross <= 0.0 };
            if pop {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    if hull.len() < 2 {
        return Err(SolverError::RiemannNoConvergence(
            "degenerate flux envelope".to_string(),
        ));
    }

    // Consecutive sample indices mean the envelope follows the flux
    // (rarefaction); gaps are chords (shocks).
    let mut segs: Vec<Seg> = Vec::new();
    for w in hull.windows(2) {
        let (i, j) = (w[0], w[1]);
        if j - i == 1 {
            if let Some(Seg::Arc { b, .. }) = segs.last_mut() {
                *b = us[j];
                continue;
            }
            segs.push(Seg::Arc { a: us[i], b: us[j] });
        } else {
            segs.push(Seg::Chord { a: us[i], b: us[j] });
        }
    }

    // Where a chord meets an arc the chord is tangent to the flux; sharpen
    // those junction points beyond the sampling resolution.
    let step = (hi - lo) / (m - 1) as f64;
    for idx in 0..segs.len() {
        let left_arc = idx > 0 && matches!(segs[idx - 1], Seg::Arc { .. });
        let right_arc = idx + 1 < segs.len() && matches!(segs[idx + 1], Seg::Arc { .. });
        if let Seg::Chord { a, b } = segs[idx] {
            let (mut a, mut b) = (a, b);
            let rounds = if left_arc && right_arc { 3 } else { 1 };
            for _ in 0..rounds {
                if left_arc {
                    a = refine_tangency(law, dir, a, b, step, lo, hi);
                }
                if right_arc {
                    b = refine_tangency(law, dir, b, a, step, lo, hi);
                }
            }
            segs[idx] = Seg::Chord { a, b };
            if left_arc {
                if let Seg::Arc { b: arc_b, .. } = &mut segs[idx - 1] {
                    *arc_b = a;
                }
            }
            if right_arc {
                if let Seg::Arc { a: arc_a, .. } = &mut segs[idx + 1] {
                    *arc_a = b;
                }
            }
        }
    }
    Ok(segs)
}

/// Bisection on the tangency condition f'(u)(u - e) = f(u) - f(e) near the
/// sampled junction `guess`, with the chord's other endpoint `e` held fixed.
fn refine_tangency(
    law: &ScalarLaw,
    dir: usize,
    guess: f64,
    e: f64,
    step: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    let g = |u: f64| law.flux_deriv(u, dir) * (u - e) - (law.flux(u, dir) - law.flux(e, dir));
    for widen in [2.0, 8.0] {
        let mut a = (guess - widen * step).max(lo);
        let mut b = (guess + widen * step).min(hi);
        if g(a) * g(b) > 0.0 {
            continue;
        }
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if g(a) * g(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        return 0.5 * (a + b);
    }
    guess
}

// ---------------------------------------------------------------------------
// Method of characteristics
// ---------------------------------------------------------------------------

/// Solves phi = phi0(x - phi t) by Newton iteration (pre-shock Burgers).
pub fn burgers_characteristic_value(
    phi0: &dyn Fn(f64) -> f64,
    dphi0: &dyn Fn(f64) -> f64,
    x: f64,
    t: f64,
) -> Result<f64, SolverError> {
    let mut phi = phi0(x);
    for _ in 0..100 {
        let y = x - phi * t;
        let jac = 1.0 + t * dphi0(y);
        if jac <= 0.0 {
            return Err(SolverError::CharacteristicCrossing { x, t, jacobian: jac });
        }
        let r = phi - phi0(y);
        let dphi = r / jac;
        phi -= dphi;
        if dphi.abs() <= 1e-14 * (1.0 + phi.abs()) {
            return Ok(phi);
        }
    }
    Err(SolverError::RiemannNoConvergence(format!(
        "characteristic solve stalled at x={x}, t={t}"
    )))
}

fn wrap_periodic(x: f64, a: f64, b: f64) -> f64 {
    let l = b - a;
    let mut y = (x - a) % l;
    if y < 0.0 {
        y += l;
    }
    a + y
}

/// Smooth 1D Euler flow with gamma = 3, where the two Riemann invariants
/// u +- c decouple into independent scalar advection of themselves; each is
/// solved by the same implicit characteristic relation as Burgers.
pub fn isentropic_exact(x: f64, t: f64) -> Result<[f64; 3], SolverError> {
    let sqrt3 = 3f64.sqrt();
    let j_plus0 = |y: f64| sqrt3 * (1.0 + 0.9 * (std::f64::consts::PI * y).sin());
    let j_minus0 = |y: f64| -sqrt3 * (1.0 + 0.9 * (std::f64::consts::PI * y).sin());
    let dj0 = |y: f64| sqrt3 * 0.9 * std::f64::consts::PI * (std::f64::consts::PI * y).cos();

    // J(x, t) = J0(x - J t), one solve per invariant
    let solve = |j0: &dyn Fn(f64) -> f64, dj0_sign: f64| -> Result<f64, SolverError> {
        let mut j = j0(x);
        for _ in 0..200 {
            let y = x - j * t;
            let jac = 1.0 + dj0_sign * t * dj0(y);
            if jac <= 0.0 {
                return Err(SolverError::CharacteristicCrossing { x, t, jacobian: jac });
            }
            let r = j - j0(y);
            let dj = r / jac;
            j -= dj;
            if dj.abs() <= 1e-14 * (1.0 + j.abs()) {
                return Ok(j);
            }
        }
        Err(SolverError::RiemannNoConvergence(format!(
            "invariant solve stalled at x={x}, t={t}"
        )))
    };
    let jp = solve(&j_plus0, 1.0)?;
    let jm = solve(&j_minus0, -1.0)?;

    let u = 0.5 * (jp + jm);
    let c = 0.5 * (jp - jm);
    let rho = c / sqrt3;
    let p = rho * rho * rho; // isentropic closure p = rho^gamma, gamma = 3
    let energy = 0.5 * p + 0.5 * rho * u * u;
    Ok([rho, rho * u, energy])
}

// ---------------------------------------------------------------------------
// Euler Riemann problem
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct Primitive {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

impl Primitive {
    fn sound_speed(&self, gamma: f64) -> f64 {
        (gamma * self.p / self.rho).sqrt()
    }

    fn conserved(&self, gamma: f64) -> [f64; 3] {
        [
            self.rho,
            self.rho * self.u,
            self.p / (gamma - 1.0) + 0.5 * self.rho * self.u * self.u,
        ]
    }
}

pub struct EulerRiemann {
    pub gamma: f64,
    pub x0: f64,
    pub left: Primitive,
    pub right: Primitive,
    pub p_star: f64,
    pub u_star: f64,
}

/// Pressure function of one side and its derivative (shock or rarefaction
/// branch depending on p vs the side's pressure).
fn pressure_fn(p: f64, s: &Primitive, gamma: f64) -> (f64, f64) {
    if p > s.p {
        let a = 2.0 / ((gamma + 1.0) * s.rho);
        let b = (gamma - 1.0) / (gamma + 1.0) * s.p;
        let q = (a / (p + b)).sqrt();
        ((p - s.p) * q, q * (1.0 - (p - s.p) / (2.0 * (b + p))))
    } else {
        let c = s.sound_speed(gamma);
        let pr = p / s.p;
        (
            2.0 * c / (gamma - 1.0) * (pr.powf((gamma - 1.0) / (2.0 * gamma)) - 1.0),
            1.0 / (s.rho * c) * pr.powf(-(gamma + 1.0) / (2.0 * gamma)),
        )
    }
}

impl EulerRiemann {
    pub fn solve(
        gamma: f64,
        x0: f64,
        left: Primitive,
        right: Primitive,
    ) -> Result<Self, SolverError> {
        let cl = left.sound_speed(gamma);
        let cr = right.sound_speed(gamma);
        let du = right.u - left.u;
        let gap = 2.0 * (cl + cr) / (gamma - 1.0) - du;
        if gap <= 0.0 {
            return Err(SolverError::RiemannVacuum(gap));
        }

        // two-rarefaction style initial guess, floored away from zero
        let p_pv = 0.5 * (left.p + right.p)
            - 0.125 * du * (left.rho + right.rho) * (cl + cr);
        let mut p = p_pv.max(1e-8 * left.p.min(right.p));
        let mut converged = false;
        for _ in 0..200 {
            let (fl, dfl) = pressure_fn(p, &left, gamma);
            let (fr, dfr) = pressure_fn(p, &right, gamma);
            let delta = (fl + fr + du) / (dfl + dfr);
            let p_new = (p - delta).max(1e-14 * p);
            let change = 2.0 * (p_new - p).abs() / (p_new + p);
            p = p_new;
            if change < 1e-12 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SolverError::RiemannNoConvergence(format!(
                "pressure iteration stalled at p = {p}"
            )));
        }
        let (fl, _) = pressure_fn(p, &left, gamma);
        let (fr, _) = pressure_fn(p, &right, gamma);
        let u_star = 0.5 * (left.u + right.u) + 0.5 * (fr - fl);
        Ok(EulerRiemann { gamma, x0, left, right, p_star: p, u_star })
    }

    /// Speed of the right-moving shock, if the right wave is a shock.
    pub fn right_shock_speed(&self) -> Option<f64> {
        if self.p_star > self.right.p {
            let g = self.gamma;
            let cr = self.right.sound_speed(g);
            let r = self.p_star / self.right.p;
            Some(self.right.u + cr * ((g + 1.0) / (2.0 * g) * r + (g - 1.0) / (2.0 * g)).sqrt())
        } else {
            None
        }
    }

    pub fn contact_speed(&self) -> f64 {
        self.u_star
    }

    /// Conserved state [rho, momentum, energy] at (x, t).
    pub fn sample(&self, x: f64, t: f64) -> [f64; 3] {
        let g = self.gamma;
        if t <= 0.0 {
            return if x < self.x0 {
                self.left.conserved(g)
            } else {
                self.right.conserved(g)
            };
        }
        let xi = (x - self.x0) / t;
        let beta = (g - 1.0) / (g + 1.0);
        let prim = if xi <= self.u_star {
            let s = &self.left;
            let c = s.sound_speed(g);
            if self.p_star > s.p {
                let speed = s.u - c * ((g + 1.0) / (2.0 * g) * self.p_star / s.p + (g - 1.0) / (2.0 * g)).sqrt();
                if xi < speed {
                    *s
                } else {
                    let r = self.p_star / s.p;
                    Primitive {
                        rho: s.rho * (r + beta) / (beta * r + 1.0),
                        u: self.u_star,
                        p: self.p_star,
                    }
                }
            } else {
                let rho_star = s.rho * (self.p_star / s.p).powf(1.0 / g);
                let c_star = c * (self.p_star / s.p).powf((g - 1.0) / (2.0 * g));
                if xi < s.u - c {
                    *s
                } else if xi > self.u_star - c_star {
                    Primitive { rho: rho_star, u: self.u_star, p: self.p_star }
                } else {
                    let u = 2.0 / (g + 1.0) * (c + 0.5 * (g - 1.0) * s.u + xi);
                    let cf = 2.0 / (g + 1.0) * (c + 0.5 * (g - 1.0) * (s.u - xi));
                    Primitive {
                        rho: s.rho * (cf / c).powf(2.0 / (g - 1.0)),
                        u,
                        p: s.p * (cf / c).powf(2.0 * g / (g - 1.0)),
                    }
                }
            }
        } else {
            let s = &self.right;
            let c = s.sound_speed(g);
            if self.p_star > s.p {
                let speed = s.u + c * ((g + 1.0) / (2.0 * g) * self.p_star / s.p + (g - 1.0) / (2.0 * g)).sqrt();
                if xi > speed {
                    *s
                } else {
                    let r = self.p_star / s.p;
                    Primitive {
                        rho: s.rho * (r + beta) / (beta * r + 1.0),
                        u: self.u_star,
                        p: self.p_star,
                    }
                }
            } else {
                let rho_star = s.rho * (self.p_star / s.p).powf(1.0 / g);
                let c_star = c * (self.p_star / s.p).powf((g - 1.0) / (2.0 * g));
                if xi > s.u + c {
                    *s
                } else if xi < self.u_star + c_star {
                    Primitive { rho: rho_star, u: self.u_star, p: self.p_star }
                } else {
                    let u = 2.0 / (g + 1.0) * (-c + 0.5 * (g - 1.0) * s.u + xi);
                    let cf = 2.0 / (g + 1.0) * (c - 0.5 * (g - 1.0) * (s.u - xi));
                    Primitive {
                        rho: s.rho * (cf / c).powf(2.0 / (g - 1.0)),
                        u,
                        p: s.p * (cf / c).powf(2.0 * g / (g - 1.0)),
                    }
                }
            }
        };
        prim.conserved(g)
    }
}

// ---------------------------------------------------------------------------
// Per-case dispatch
// ---------------------------------------------------------------------------

/// Exact solution of a built-in case as a state function of (x, t), when one
/// is available in closed or semi-analytic form.
pub fn case_exact_solution(name: &str) -> Result<ExactFn, SolverError> {
    match name {
        "adv_smooth" | "adv_square" => {
            let def = builtin_case(name)?;
            let ic = def.initial.clone();
            let domain = def.domain.clone();
            Ok(Arc::new(move |x: &[f64], t: f64| {
                let shifted: Vec<f64> = x
                    .iter()
                    .zip(&domain)
                    .map(|(&xi, &(a, b))| wrap_periodic(xi - t, a, b))
                    .collect();
                ic(&shifted)
            }))
        }
        "burgers_smooth" => Ok(Arc::new(|x: &[f64], t: f64| {
            let phi0 = |y: f64| y.exp() - 1.0;
            let dphi0 = |y: f64| y.exp();
            vec![burgers_characteristic_value(&phi0, &dphi0, x[0], t)
                .expect("characteristic solve in validity window")]
        })),
        "burgers_riemann_1d" => {
            let rp = ScalarRiemann::new(ScalarLaw::Burgers, 0, 1.0 / 3.0, 1.0, 0.0)?;
            Ok(Arc::new(move |x: &[f64], t: f64| vec![rp.eval(x[0], t)]))
        }
        "bl_riemann_1d" => {
            let rp = ScalarRiemann::new(ScalarLaw::BuckleyLeverett, 0, 0.0, 1.0, 0.0)?;
            Ok(Arc::new(move |x: &[f64], t: f64| vec![rp.eval(x[0], t)]))
        }
        "euler_isentropic" => Ok(Arc::new(|x: &[f64], t: f64| {
            isentropic_exact(x[0], t).expect("smooth window").to_vec()
        })),
        "euler_sod" => {
            let rp = EulerRiemann::solve(
                1.4,
                0.5,
                Primitive { rho: 1.0, u: 0.0, p: 1.0 },
                Primitive { rho: 0.125, u: 0.0, p: 0.1 },
            )?;
            Ok(Arc::new(move |x: &[f64], t: f64| rp.sample(x[0], t).to_vec()))
        }
        other => Err(SolverError::NoExactSolution(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn burgers_step_down_is_a_half_speed_shock() {
        let rp = ScalarRiemann::new(ScalarLaw::Burgers, 0, 1.0 / 3.0, 1.0, 0.0).unwrap();
        assert_eq!(rp.waves.len(), 1);
        match rp.waves[0] {
            Wave::Shock { speed, behind, ahead } => {
                assert_relative_eq!(speed, 0.5, max_relative = 1e-12);
                assert_relative_eq!(behind, 1.0);
                assert_relative_eq!(ahead, 0.0);
            }
            _ => panic!("expected a single shock"),
        }
        // shock position 1/3 + 0.5*0.2 = 13/30
        let x_shock = 13.0 / 30.0;
        assert_relative_eq!(rp.eval(x_shock - 1e-9, 0.2), 1.0);
        assert_relative_eq!(rp.eval(x_shock + 1e-9, 0.2), 0.0);
    }

    #[test]
    fn burgers_step_up_is_a_pure_rarefaction() {
        let rp = ScalarRiemann::new(ScalarLaw::Burgers, 0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(rp.waves.len(), 1);
        assert!(matches!(rp.waves[0], Wave::Fan { .. }));
        // inside the fan phi(xi) = xi for Burgers
        for &xi in &[0.05, 0.3, 0.62, 0.97] {
            assert_abs_diff_eq!(rp.eval(xi, 1.0), xi, epsilon = 1e-10);
        }
        assert_relative_eq!(rp.eval(-0.1, 1.0), 0.0);
        assert_relative_eq!(rp.eval(1.1, 1.0), 1.0);
    }

    #[test]
    fn linear_flux_gives_an_unmodified_contact() {
        let rp = ScalarRiemann::new(ScalarLaw::Advection(vec![2.0]), 0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(rp.waves.len(), 1);
        match rp.waves[0] {
            Wave::Shock { speed, .. } => assert_relative_eq!(speed, 2.0, max_relative = 1e-12),
            _ => panic!("linear flux must reduce to a contact"),
        }
    }

    #[test]
    fn buckley_leverett_tangency_point_and_shock_speed() {
        let rp = ScalarRiemann::new(ScalarLaw::BuckleyLeverett, 0, 0.0, 1.0, 0.0).unwrap();
        // rarefaction from 1 down to 1/sqrt(2), then a shock to 0 whose speed
        // is the tangent slope f(phi*)/phi*
        assert_eq!(rp.waves.len(), 2);
        let (fan_u1, shock_speed, shock_behind) = match (rp.waves[0], rp.waves[1]) {
            (Wave::Fan { u1, .. }, Wave::Shock { speed, behind, .. }) => (u1, speed, behind),
            _ => panic!("expected fan then shock"),
        };
        let phi_star = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(fan_u1, phi_star, epsilon = 1e-9);
        assert_abs_diff_eq!(shock_behind, phi_star, epsilon = 1e-9);
        assert_abs_diff_eq!(shock_speed, 1.2071067811865475, epsilon = 1e-9);
        // ahead of the shock the state is 0, right behind it phi*
        let t = 0.25;
        let xs = shock_speed * t;
        assert_abs_diff_eq!(rp.eval(xs + 1e-6, t), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rp.eval(xs - 1e-6, t), phi_star, epsilon = 1e-4);
    }

    #[test]
    fn characteristic_solution_satisfies_its_fixed_point() {
        let phi0 = |y: f64| y.exp() - 1.0;
        let dphi0 = |y: f64| y.exp();
        let phi = burgers_characteristic_value(&phi0, &dphi0, 0.5, 0.01).unwrap();
        assert!((phi - phi0(0.5 - phi * 0.01)).abs() < 1e-12);
        // t = 0 reproduces the initial condition
        let phi_t0 = burgers_characteristic_value(&phi0, &dphi0, 0.7, 0.0).unwrap();
        assert_relative_eq!(phi_t0, phi0(0.7), max_relative = 1e-14);
    }

    #[test]
    fn sod_star_region_matches_published_values() {
        let rp = EulerRiemann::solve(
            1.4,
            0.5,
            Primitive { rho: 1.0, u: 0.0, p: 1.0 },
            Primitive { rho: 0.125, u: 0.0, p: 0.1 },
        )
        .unwrap();
        assert_abs_diff_eq!(rp.p_star, 0.30313, epsilon = 1e-5);
        assert_abs_diff_eq!(rp.u_star, 0.92745, epsilon = 1e-5);
        assert!(rp.right_shock_speed().is_some());
    }

    #[test]
    fn equal_states_stay_constant() {
        let s = Primitive { rho: 1.0, u: 0.3, p: 2.0 };
        let rp = EulerRiemann::solve(1.4, 0.0, s, s).unwrap();
        for &(x, t) in &[(0.0, 0.1), (-0.5, 0.2), (0.7, 0.3)] {
            let w = rp.sample(x, t);
            assert_relative_eq!(w[0], 1.0, max_relative = 1e-10);
            assert_relative_eq!(w[1], 0.3, max_relative = 1e-10);
        }
    }

    #[test]
    fn reversed_sod_mirrors_exactly() {
        let l = Primitive { rho: 1.0, u: 0.0, p: 1.0 };
        let r = Primitive { rho: 0.125, u: 0.0, p: 0.1 };
        let fwd = EulerRiemann::solve(1.4, 0.0, l, r).unwrap();
        let rev = EulerRiemann::solve(1.4, 0.0, r, l).unwrap();
        for &x in &[-0.7, -0.3, -0.05, 0.1, 0.4, 0.9] {
            let a = fwd.sample(x, 0.4);
            let b = rev.sample(-x, 0.4);
            assert_relative_eq!(a[0], b[0], max_relative = 1e-9);
            assert_relative_eq!(a[1], -b[1], max_relative = 1e-9, epsilon = 1e-12);
            assert_relative_eq!(a[2], b[2], max_relative = 1e-9);
        }
    }

    #[test]
    fn isentropic_flow_satisfies_the_pde_and_keeps_entropy() {
        // finite-difference residuals of mass and momentum conservation
        let h = 1e-5;
        for &(x, t) in &[(0.2, 0.05), (-0.6, 0.1), (0.9, 0.08)] {
            let w = |x: f64, t: f64| isentropic_exact(x, t).unwrap();
            let dt_rho = (w(x, t + h)[0] - w(x, t - h)[0]) / (2.0 * h);
            let dx_m = (w(x + h, t)[0 + 1] - w(x - h, t)[1]) / (2.0 * h);
            assert_abs_diff_eq!(dt_rho + dx_m, 0.0, epsilon = 1e-5);

            let flux_m = |x: f64, t: f64| {
                let s = w(x, t);
                let p = 2.0 * (s[2] - 0.5 * s[1] * s[1] / s[0]);
                s[1] * s[1] / s[0] + p
            };
            let dt_m = (w(x, t + h)[1] - w(x, t - h)[1]) / (2.0 * h);
            let dx_f = (flux_m(x + h, t) - flux_m(x - h, t)) / (2.0 * h);
            assert_abs_diff_eq!(dt_m + dx_f, 0.0, epsilon = 1e-4);

            // entropy p / rho^3 stays exactly 1
            let s = w(x, t);
            let p = 2.0 * (s[2] - 0.5 * s[1] * s[1] / s[0]);
            assert_relative_eq!(p / (s[0] * s[0] * s[0]), 1.0, max_relative = 1e-10);
        }
        // reproduces the initial data at t = 0
        let s0 = isentropic_exact(0.3, 0.0).unwrap();
        let rho0 = 1.0 + 0.9 * (std::f64::consts::PI * 0.3).sin();
        assert_relative_eq!(s0[0], rho0, max_relative = 1e-12);
        assert_relative_eq!(s0[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn case_dispatch_covers_cases_with_and_without_closed_forms() {
        let adv = case_exact_solution("adv_smooth").unwrap();
        // one full period returns to the initial condition
        let v0 = adv(&[0.37, 0.81], 0.0);
        let v1 = adv(&[0.37, 0.81], 1.0);
        assert_relative_eq!(v0[0], v1[0], max_relative = 1e-12);
        assert!(case_exact_solution("burgers_riemann_2d").is_err());
        assert!(case_exact_solution("euler_case12").is_err());
    }
}
