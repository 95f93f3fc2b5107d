//! Conservation-law definitions: fluxes, flux derivatives, and wave speeds.
//!
//! Scalar laws expose the flux componentwise per spatial direction. The Euler
//! equations are handled separately since their flux couples all fields.

use crate::error::SolverError;

/// Scalar conservation law du/dt + div f(u) = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarLaw {
    /// Linear advection with constant velocity (one entry per direction).
    Advection(Vec<f64>),
    /// Burgers flux u^2/2 in every direction.
    Burgers,
    /// Two-phase Buckley-Leverett flux u^2 / (u^2 + (1-u)^2), 1D.
    BuckleyLeverett,
    /// Buckley-Leverett with gravity in the second direction:
    /// f_x = u^2/D, f_y = u^2 (1 - 5(1-u)^2)/D with D = u^2 + (1-u)^2.
    BuckleyLeverettGravity,
}

impl ScalarLaw {
    /// Flux component in direction `dir`.
    pub fn flux(&self, u: f64, dir: usize) -> f64 {
        match self {
            ScalarLaw::Advection(a) => a[dir] * u,
            ScalarLaw::Burgers => 0.5 * u * u,
            ScalarLaw::BuckleyLeverett => {
                debug_assert_eq!(dir, 0);
                let d = u * u + (1.0 - u) * (1.0 - u);
                u * u / d
            }
            ScalarLaw::BuckleyLeverettGravity => {
                let d = u * u + (1.0 - u) * (1.0 - u);
                if dir == 0 {
                    u * u / d
                } else {
                    let om = 1.0 - u;
                    u * u * (1.0 - 5.0 * om * om) / d
                }
            }
        }
    }

    /// d(flux)/du in direction `dir`.
    pub fn flux_deriv(&self, u: f64, dir: usize) -> f64 {
        match self {
            ScalarLaw::Advection(a) => a[dir],
            ScalarLaw::Burgers => u,
            ScalarLaw::BuckleyLeverett => {
                debug_assert_eq!(dir, 0);
                let d = u * u + (1.0 - u) * (1.0 - u);
                2.0 * u * (1.0 - u) / (d * d)
            }
            ScalarLaw::BuckleyLeverettGravity => {
                let om = 1.0 - u;
                let d = u * u + om * om;
                let dp = 4.0 * u - 2.0;
                if dir == 0 {
                    2.0 * u * om / (d * d)
                } else {
                    // quotient rule on n(u) = u^2 (1 - 5(1-u)^2)
                    let n = u * u * (1.0 - 5.0 * om * om);
                    let np = 2.0 * u * (1.0 - 5.0 * om * om) + 10.0 * u * u * om;
                    (np * d - n * dp) / (d * d)
                }
            }
        }
    }

    /// Local characteristic speed |f'(u)| in direction `dir`.
    pub fn wavespeed(&self, u: f64, dir: usize) -> f64 {
        self.flux_deriv(u, dir).abs()
    }

    pub fn field_names(&self) -> Vec<&'static str> {
        vec!["phi"]
    }
}

/// Compressible Euler equations in conserved variables
/// (density, momentum components, total energy), nondimensionalized so that
/// pressure p = rho * T and sound speed c = sqrt(gamma * T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerLaw {
    pub gamma: f64,
    /// Spatial dimension (1 or 2); state vectors have `dim + 2` components.
    pub dim: usize,
}

impl EulerLaw {
    pub fn new(gamma: f64, dim: usize) -> Self {
        assert!(dim >= 1 && dim <= 2, "Euler supported in 1D and 2D");
        EulerLaw { gamma, dim }
    }

    pub fn n_fields(&self) -> usize {
        self.dim + 2
    }

    pub fn field_names(&self) -> Vec<&'static str> {
        match self.dim {
            1 => vec!["rho", "mx", "energy"],
            _ => vec!["rho", "mx", "my", "energy"],
        }
    }

    /// Pressure from a conserved state slice [rho, m..., E].
    pub fn pressure(&self, state: &[f64]) -> f64 {
        let rho = state[0];
        let e = state[self.dim + 1];
        let mut ke = 0.0;
        for j in 0..self.dim {
            ke += state[1 + j] * state[1 + j];
        }
        (self.gamma - 1.0) * (e - 0.5 * ke / rho)
    }

    /// Temperature T = p / rho.
    pub fn temperature(&self, state: &[f64]) -> f64 {
        self.pressure(state) / state[0]
    }

    pub fn sound_speed(&self, state: &[f64]) -> f64 {
        (self.gamma * self.temperature(state)).sqrt()
    }

    /// |u_dir| + c, the fastest characteristic in direction `dir`.
    pub fn wavespeed(&self, state: &[f64], dir: usize) -> f64 {
        let u = state[1 + dir] / state[0];
        u.abs() + self.sound_speed(state)
    }

    /// Convective flux vector in direction `dir`.
    pub fn flux(&self, state: &[f64], dir: usize, out: &mut [f64]) {
        let rho = state[0];
        let p = self.pressure(state);
        let udir = state[1 + dir] / rho;
        out[0] = state[1 + dir];
        for j in 0..self.dim {
            out[1 + j] = state[1 + j] * udir;
        }
        out[1 + dir] += p;
        out[self.dim + 1] = (state[self.dim + 1] + p) * udir;
    }

    /// Checks positivity of density and pressure; used to abort cleanly
    /// instead of propagating NaNs.
    pub fn check_admissible(&self, state: &[f64], t: f64, location: &[f64]) -> Result<(), SolverError> {
        let rho = state[0];
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(SolverError::NonAdmissibleState {
                t,
                location: location.to_vec(),
                what: "density",
                value: rho,
            });
        }
        let p = self.pressure(state);
        if !(p > 0.0) || !p.is_finite() {
            return Err(SolverError::NonAdmissibleState {
                t,
                location: location.to_vec(),
                what: "pressure",
                value: p,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn buckley_leverett_gravity_flux_at_half() {
        let law = ScalarLaw::BuckleyLeverettGravity;
        assert_relative_eq!(law.flux(0.5, 0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(law.flux(0.5, 1), -0.125, max_relative = 1e-15);
    }

    #[test]
    fn flux_derivatives_match_finite_differences() {
        let laws = [
            ScalarLaw::Advection(vec![1.0, -0.7]),
            ScalarLaw::Burgers,
            ScalarLaw::BuckleyLeverett,
            ScalarLaw::BuckleyLeverettGravity,
        ];
        let eps = 1e-6;
        for law in &laws {
            let dirs = match law {
                ScalarLaw::BuckleyLeverett => 1,
                ScalarLaw::Burgers => 2,
                _ => 2,
            };
            for dir in 0..dirs {
                for &u in &[0.05, 0.3, 0.5, 0.77, 0.96] {
                    let fd = (law.flux(u + eps, dir) - law.flux(u - eps, dir)) / (2.0 * eps);
                    assert_relative_eq!(law.flux_deriv(u, dir), fd, epsilon = 1e-7, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn scalar_wavespeeds() {
        let adv = ScalarLaw::Advection(vec![1.0, 1.0]);
        assert_relative_eq!(adv.wavespeed(123.0, 0), 1.0);
        let b = ScalarLaw::Burgers;
        assert_relative_eq!(b.wavespeed(-0.4, 0), 0.4);
    }

    #[test]
    fn euler_sod_left_state_quantities() {
        let law = EulerLaw::new(1.4, 1);
        // rho = 1, u = 0, p = 1 -> E = p/(gamma-1) = 2.5
        let state = [1.0, 0.0, 2.5];
        assert_relative_eq!(law.pressure(&state), 1.0, max_relative = 1e-15);
        assert_relative_eq!(law.temperature(&state), 1.0, max_relative = 1e-15);
        assert_relative_eq!(law.sound_speed(&state), 1.4_f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(law.wavespeed(&state, 0), 1.4_f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn euler_flux_against_hand_computed_values() {
        let law = EulerLaw::new(1.4, 2);
        // rho = 2, u = (0.5, -0.25), p = 3
        let rho = 2.0;
        let (ux, uy) = (0.5, -0.25);
        let p = 3.0;
        let e = p / 0.4 + 0.5 * rho * (ux * ux + uy * uy);
        let state = [rho, rho * ux, rho * uy, e];
        let mut fx = [0.0; 4];
        law.flux(&state, 0, &mut fx);
        assert_relative_eq!(fx[0], rho * ux, max_relative = 1e-14);
        assert_relative_eq!(fx[1], rho * ux * ux + p, max_relative = 1e-14);
        assert_relative_eq!(fx[2], rho * ux * uy, max_relative = 1e-14);
        assert_relative_eq!(fx[3], (e + p) * ux, max_relative = 1e-14);
        let mut fy = [0.0; 4];
        law.flux(&state, 1, &mut fy);
        assert_relative_eq!(fy[0], rho * uy, max_relative = 1e-14);
        assert_relative_eq!(fy[1], rho * ux * uy, max_relative = 1e-14);
        assert_relative_eq!(fy[2], rho * uy * uy + p, max_relative = 1e-14);
        assert_relative_eq!(fy[3], (e + p) * uy, max_relative = 1e-14);
    }

    #[test]
    fn non_admissible_states_are_reported() {
        let law = EulerLaw::new(1.4, 1);
        let bad_rho = [-1.0, 0.0, 2.5];
        assert!(law.check_admissible(&bad_rho, 0.1, &[0.0]).is_err());
        // kinetic energy exceeding total energy gives negative pressure
        let bad_p = [1.0, 10.0, 2.5];
        assert!(law.check_admissible(&bad_p, 0.1, &[0.0]).is_err());
        let ok = [1.0, 0.5, 2.5];
        assert!(law.check_admissible(&ok, 0.1, &[0.0]).is_ok());
    }
}
