//! Reaction terms of the bacteria-nutrient system and their derivatives.
//!
//! The rescaled system is
//!
//! ```text
//!   du/dt = g(u,v) +       lap u      g(u,v) =  a(u) u v/(1+v) - m u + eps
//!   dv/dt = h(u,v) + delta lap v      h(u,v) = -a(u) u v/(1+v) + sigma (v0 - v)
//! ```
//!
//! where `a(u) = gamma + (1-gamma) u/(k+u)` is the activity fraction of the
//! bacteria population. Consumption enters `g` and `h` with opposite signs, so
//!
//! ```text
//!   g + h = eps - m u + sigma (v0 - v)
//! ```
//!
//! holds identically; this conservation identity is what reduces the
//! homogeneous steady-state problem to a single cubic (see [`crate::homogeneous`]).
//!
//! All derivatives through third order are closed-form. Writing
//! `phi(u) = a(u) u` and `S(v) = v/(1+v)`, the consumption term factorizes as
//! `phi(u) S(v)`, so every mixed partial is a product `phi^(a)(u) S^(b)(v)`
//! and the second and third order partials of `h` are the negatives of those
//! of `g` (the remaining terms of `h` are linear).

use crate::{Error, Result};
use num_complex::Complex64;

/// All kinetic and diffusion parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSet {
    /// Half-saturation constant of the activity response (dimensionless).
    pub k: f64,
    /// Sea-water nutrient concentration the sediment relaxes toward.
    pub v0: f64,
    /// Bacteria inflow rate.
    pub eps: f64,
    /// Bacteria mortality rate.
    pub m: f64,
    /// Bacteria diffusion coefficient (pre-rescaling).
    pub delta_u: f64,
    /// Nutrient diffusion coefficient (pre-rescaling).
    pub delta_v: f64,
    /// Balancing rate sigma (bioirrigation strength), the continuation parameter.
    pub sigma: f64,
    /// Baseline activity fraction gamma.
    pub gamma: f64,
}

impl ParameterSet {
    /// The standard parameter set of the model with free `sigma` and `gamma`:
    /// k = 1, v0 = 4.125, eps = 0.005, m = 0.3175, delta_u = 2e-5, delta_v = 1e-3.
    pub fn standard(sigma: f64, gamma: f64) -> Self {
        Self {
            k: 1.0,
            v0: 4.125,
            eps: 0.005,
            m: 0.3175,
            delta_u: 2.0e-5,
            delta_v: 1.0e-3,
            sigma,
            gamma,
        }
    }

    /// Diffusion ratio `delta = delta_v / delta_u`, always derived, never stored.
    pub fn delta(&self) -> f64 {
        self.delta_v / self.delta_u
    }

    /// Copy with a different balancing rate.
    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma, ..*self }
    }

    /// Checks positivity of all fields, `gamma <= 1`, and `delta_u < delta_v`.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("k", self.k),
            ("v0", self.v0),
            ("eps", self.eps),
            ("m", self.m),
            ("delta_u", self.delta_u),
            ("delta_v", self.delta_v),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::SingularParameters(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        if self.gamma > 1.0 {
            return Err(Error::SingularParameters(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.delta_u >= self.delta_v {
            return Err(Error::SingularParameters(format!(
                "delta_u must be smaller than delta_v, got {} >= {}",
                self.delta_u, self.delta_v
            )));
        }
        Ok(())
    }
}

/// A point (u, v) in state space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    /// Bacteria density.
    pub u: f64,
    /// Nutrient concentration.
    pub v: f64,
}

impl StateVector {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// All partials `d^a/du^a d^b/dv^b (g, h)` for `a + b <= 3` at one state,
/// plus the auxiliaries `xi` and `theta` of the Jacobian
///
/// ```text
///   J_f = ( xi - m        theta      )
///         (   -xi      -theta - sigma)
/// ```
///
/// Mixed partials are symmetric by construction: one value is stored per
/// `(a, b)` pair and [`DerivativeTensor::get`] indexes it.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeTensor {
    pub g_u: f64,
    pub g_v: f64,
    pub h_u: f64,
    pub h_v: f64,
    pub g_uu: f64,
    pub g_uv: f64,
    pub g_vv: f64,
    pub h_uu: f64,
    pub h_uv: f64,
    pub h_vv: f64,
    pub g_uuu: f64,
    pub g_uuv: f64,
    pub g_uvv: f64,
    pub g_vvv: f64,
    pub h_uuu: f64,
    pub h_uuv: f64,
    pub h_uvv: f64,
    pub h_vvv: f64,
    /// Auxiliary `xi = phi'(u) S(v)`; the Jacobian reads `g_u = xi - m`, `h_u = -xi`.
    pub xi: f64,
    /// Auxiliary `theta = phi(u) S'(v)`; the Jacobian reads `g_v = theta`,
    /// `h_v = -theta - sigma`.
    pub theta: f64,
}

impl DerivativeTensor {
    /// Partial by `(component, a, b)` with component 0 = g, 1 = h and `1 <= a+b <= 3`.
    pub fn get(&self, component: usize, a: usize, b: usize) -> f64 {
        let g = match (a, b) {
            (1, 0) => self.g_u,
            (0, 1) => self.g_v,
            (2, 0) => self.g_uu,
            (1, 1) => self.g_uv,
            (0, 2) => self.g_vv,
            (3, 0) => self.g_uuu,
            (2, 1) => self.g_uuv,
            (1, 2) => self.g_uvv,
            (0, 3) => self.g_vvv,
            _ => panic!("derivative order ({a},{b}) out of range"),
        };
        match component {
            0 => g,
            1 => match (a, b) {
                (1, 0) => self.h_u,
                (0, 1) => self.h_v,
                // all higher partials of h are the negatives of those of g
                _ => -g,
            },
            _ => panic!("component {component} out of range"),
        }
    }

    /// First-order block as a 2x2 row-major array `[[g_u, g_v], [h_u, h_v]]`.
    pub fn jacobian(&self) -> [[f64; 2]; 2] {
        [[self.g_u, self.g_v], [self.h_u, self.h_v]]
    }
}

/// Newton iterates may step slightly negative; the guard fences the poles of
/// the kinetics at u = -k and v = -1 with a safety margin of half the distance.
fn guard(w: StateVector, p: &ParameterSet) -> Result<()> {
    if !w.u.is_finite() || !w.v.is_finite() || w.u <= -p.k / 2.0 || w.v <= -0.5 {
        return Err(Error::OutOfDomain { u: w.u, v: w.v });
    }
    Ok(())
}

/// Reaction terms `(g(u,v), h(u,v))`.
pub fn reaction(w: StateVector, p: &ParameterSet) -> Result<StateVector> {
    guard(w, p)?;
    let activity = p.gamma + (1.0 - p.gamma) * w.u / (p.k + w.u);
    let consumption = activity * w.u * w.v / (1.0 + w.v);
    Ok(StateVector {
        u: consumption - p.m * w.u + p.eps,
        v: -consumption + p.sigma * (p.v0 - w.v),
    })
}

/// All analytic partials of the reaction through third order.
pub fn derivatives(w: StateVector, p: &ParameterSet) -> Result<DerivativeTensor> {
    guard(w, p)?;
    let (u, v) = (w.u, w.v);
    let ku = p.k + u;
    // phi(u) = a(u) u, written so that phi' telescopes:
    // phi'(u) = gamma + (1-gamma) (1 - k^2/(k+u)^2)
    let phi = p.gamma * u + (1.0 - p.gamma) * u * u / ku;
    let phi1 = p.gamma + (1.0 - p.gamma) * (1.0 - p.k * p.k / (ku * ku));
    let phi2 = (1.0 - p.gamma) * 2.0 * p.k * p.k / (ku * ku * ku);
    let phi3 = -(1.0 - p.gamma) * 6.0 * p.k * p.k / (ku * ku * ku * ku);
    let vp = 1.0 + v;
    let s = v / vp;
    let s1 = 1.0 / (vp * vp);
    let s2 = -2.0 / (vp * vp * vp);
    let s3 = 6.0 / (vp * vp * vp * vp);

    let xi = phi1 * s;
    let theta = phi * s1;
    Ok(DerivativeTensor {
        g_u: xi - p.m,
        g_v: theta,
        h_u: -xi,
        h_v: -theta - p.sigma,
        g_uu: phi2 * s,
        g_uv: phi1 * s1,
        g_vv: phi * s2,
        h_uu: -phi2 * s,
        h_uv: -phi1 * s1,
        h_vv: -phi * s2,
        g_uuu: phi3 * s,
        g_uuv: phi2 * s1,
        g_uvv: phi1 * s2,
        g_vvv: phi * s3,
        h_uuu: -phi3 * s,
        h_uuv: -phi2 * s1,
        h_uvv: -phi1 * s2,
        h_vvv: -phi * s3,
        xi,
        theta,
    })
}

/// Symmetric bilinear form of the second-order Taylor term,
///
/// ```text
///   B(p, q) = 1/2 f_uv (p1 q2 + p2 q1) + 1/2 (f_uu p1 q1 + f_vv p2 q2)
/// ```
///
/// evaluated componentwise for f = (g, h).
pub fn bilinear_b(p1: StateVector, p2: StateVector, d: &DerivativeTensor) -> StateVector {
    let cross = p1.u * p2.v + p1.v * p2.u;
    StateVector {
        u: 0.5 * d.g_uv * cross + 0.5 * (d.g_uu * p1.u * p2.u + d.g_vv * p1.v * p2.v),
        v: 0.5 * d.h_uv * cross + 0.5 * (d.h_uu * p1.u * p2.u + d.h_vv * p1.v * p2.v),
    }
}

/// Symmetric trilinear form of the third-order Taylor term,
///
/// ```text
///   C(p, q, r) = 1/6 (f_uuu p1 q1 r1 + f_vvv p2 q2 r2)
///              + 1/6 (f_uuv (p1 q1 r2 + r1 p1 q2 + q1 r1 p2)
///              +      f_uvv (p1 q2 r2 + r1 p2 q2 + q1 r2 p2))
/// ```
pub fn trilinear_c(
    p1: StateVector,
    p2: StateVector,
    p3: StateVector,
    d: &DerivativeTensor,
) -> StateVector {
    let uuu = p1.u * p2.u * p3.u;
    let vvv = p1.v * p2.v * p3.v;
    let uuv = p1.u * p2.u * p3.v + p3.u * p1.u * p2.v + p2.u * p3.u * p1.v;
    let uvv = p1.u * p2.v * p3.v + p3.u * p1.v * p2.v + p2.u * p3.v * p1.v;
    StateVector {
        u: (d.g_uuu * uuu + d.g_vvv * vvv + d.g_uuv * uuv + d.g_uvv * uvv) / 6.0,
        v: (d.h_uuu * uuu + d.h_vvv * vvv + d.h_uuv * uuv + d.h_uvv * uvv) / 6.0,
    }
}

/// [`bilinear_b`] over complex vectors, used by the Landau reduction where the
/// lattice amplitudes are complex.
pub fn bilinear_b_complex(
    p1: [Complex64; 2],
    p2: [Complex64; 2],
    d: &DerivativeTensor,
) -> [Complex64; 2] {
    let cross = p1[0] * p2[1] + p1[1] * p2[0];
    [
        0.5 * d.g_uv * cross + 0.5 * (d.g_uu * p1[0] * p2[0] + d.g_vv * p1[1] * p2[1]),
        0.5 * d.h_uv * cross + 0.5 * (d.h_uu * p1[0] * p2[0] + d.h_vv * p1[1] * p2[1]),
    ]
}

/// [`trilinear_c`] over complex vectors.
pub fn trilinear_c_complex(
    p1: [Complex64; 2],
    p2: [Complex64; 2],
    p3: [Complex64; 2],
    d: &DerivativeTensor,
) -> [Complex64; 2] {
    let uuu = p1[0] * p2[0] * p3[0];
    let vvv = p1[1] * p2[1] * p3[1];
    let uuv = p1[0] * p2[0] * p3[1] + p3[0] * p1[0] * p2[1] + p2[0] * p3[0] * p1[1];
    let uvv = p1[0] * p2[1] * p3[1] + p3[0] * p1[1] * p2[1] + p2[0] * p3[1] * p1[1];
    [
        (d.g_uuu * uuu + d.g_vvv * vvv + d.g_uuv * uuv + d.g_uvv * uvv) / 6.0,
        (d.h_uuu * uuu + d.h_vvv * vvv + d.h_uuv * uuv + d.h_uvv * uvv) / 6.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p() -> ParameterSet {
        ParameterSet::standard(0.09, 0.27)
    }

    #[test]
    fn reaction_at_origin_is_inflow_only() {
        let r = reaction(StateVector::new(0.0, 0.0), &p()).unwrap();
        assert_relative_eq!(r.u, p().eps, max_relative = 1e-15);
        assert_relative_eq!(r.v, p().sigma * p().v0, max_relative = 1e-15);
    }

    #[test]
    fn conservation_identity() {
        let pp = p();
        for &(u, v) in &[(0.3, 1.2), (2.0, 0.1), (0.01, 8.0), (5.5, 5.5)] {
            let w = StateVector::new(u, v);
            let r = reaction(w, &pp).unwrap();
            let rhs = pp.eps - pp.m * u + pp.sigma * (pp.v0 - v);
            assert_relative_eq!(r.u + r.v, rhs, max_relative = 1e-13, epsilon = 1e-14);
        }
    }

    #[test]
    fn guard_rejects_poles_and_non_finite() {
        let pp = p();
        assert!(reaction(StateVector::new(-0.6, 1.0), &pp).is_err());
        assert!(reaction(StateVector::new(1.0, -0.6), &pp).is_err());
        assert!(reaction(StateVector::new(f64::NAN, 1.0), &pp).is_err());
        assert!(derivatives(StateVector::new(1.0, f64::INFINITY), &pp).is_err());
        // slightly negative states inside the guard are fine
        assert!(reaction(StateVector::new(-0.1, -0.1), &pp).is_ok());
    }

    #[test]
    fn first_order_matches_finite_differences() {
        let pp = p();
        let w = StateVector::new(0.7, 2.3);
        let d = derivatives(w, &pp).unwrap();
        let h = 1e-5;
        let fd = |a: StateVector, b: StateVector| -> (f64, f64) {
            let ra = reaction(a, &pp).unwrap();
            let rb = reaction(b, &pp).unwrap();
            ((ra.u - rb.u) / (2.0 * h), (ra.v - rb.v) / (2.0 * h))
        };
        let (gu, hu) = fd(
            StateVector::new(w.u + h, w.v),
            StateVector::new(w.u - h, w.v),
        );
        let (gv, hv) = fd(
            StateVector::new(w.u, w.v + h),
            StateVector::new(w.u, w.v - h),
        );
        assert_relative_eq!(d.g_u, gu, max_relative = 1e-6);
        assert_relative_eq!(d.g_v, gv, max_relative = 1e-6);
        assert_relative_eq!(d.h_u, hu, max_relative = 1e-6);
        assert_relative_eq!(d.h_v, hv, max_relative = 1e-6);
    }

    #[test]
    fn jacobian_structure_from_auxiliaries() {
        let d = derivatives(StateVector::new(1.4, 0.9), &p()).unwrap();
        assert_relative_eq!(d.g_u, d.xi - p().m, max_relative = 1e-15);
        assert_relative_eq!(d.h_u, -d.xi, max_relative = 1e-15);
        assert_relative_eq!(d.g_v, d.theta, max_relative = 1e-15);
        assert_relative_eq!(d.h_v, -d.theta - p().sigma, max_relative = 1e-15);
    }

    #[test]
    fn xi_at_zero_bacteria_density() {
        let pp = p();
        let v = 1.7;
        let d = derivatives(StateVector::new(0.0, v), &pp).unwrap();
        assert_relative_eq!(d.xi, pp.gamma * v / (1.0 + v), max_relative = 1e-14);
    }

    #[test]
    fn forms_at_unit_vectors() {
        let d = derivatives(StateVector::new(0.8, 2.0), &p()).unwrap();
        let e1 = StateVector::new(1.0, 0.0);
        let b = bilinear_b(e1, e1, &d);
        assert_relative_eq!(b.u, 0.5 * d.g_uu, max_relative = 1e-15);
        assert_relative_eq!(b.v, 0.5 * d.h_uu, max_relative = 1e-15);
        let c = trilinear_c(e1, e1, e1, &d);
        assert_relative_eq!(c.u, d.g_uuu / 6.0, max_relative = 1e-15);
        assert_relative_eq!(c.v, d.h_uuu / 6.0, max_relative = 1e-15);
    }

    /// Least-squares slope of ln(err) against ln(h).
    fn loglog_slope(samples: &[(f64, f64)]) -> f64 {
        let n = samples.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &(h, e) in samples {
            let (x, y) = (h.ln(), e.ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn taylor_remainder_orders() {
        let pp = p();
        let w = StateVector::new(0.8, 2.0);
        let dir = StateVector::new(0.3, -0.7);
        let f0 = reaction(w, &pp).unwrap();
        let d = derivatives(w, &pp).unwrap();
        let b = bilinear_b(dir, dir, &d);
        let c = trilinear_c(dir, dir, dir, &d);

        let mut second = Vec::new();
        let mut third = Vec::new();
        for i in 0..6 {
            let h = 0.1 * 0.6_f64.powi(i);
            let f = reaction(StateVector::new(w.u + h * dir.u, w.v + h * dir.v), &pp).unwrap();
            let lin_u = f0.u + h * (d.g_u * dir.u + d.g_v * dir.v);
            let lin_v = f0.v + h * (d.h_u * dir.u + d.h_v * dir.v);
            let r2 = ((f.u - lin_u - h * h * b.u).powi(2) + (f.v - lin_v - h * h * b.v).powi(2))
                .sqrt();
            let r3 = ((f.u - lin_u - h * h * b.u - h * h * h * c.u).powi(2)
                + (f.v - lin_v - h * h * b.v - h * h * h * c.v).powi(2))
            .sqrt();
            second.push((h, r2));
            third.push((h, r3));
        }
        assert!(loglog_slope(&second) >= 2.9, "second-order remainder slope");
        assert!(loglog_slope(&third) >= 3.9, "third-order remainder slope");
    }

    #[test]
    fn complex_forms_reduce_to_real() {
        let d = derivatives(StateVector::new(0.8, 2.0), &p()).unwrap();
        let pr = StateVector::new(0.4, -0.3);
        let qr = StateVector::new(-1.1, 0.2);
        let pc = [Complex64::new(0.4, 0.0), Complex64::new(-0.3, 0.0)];
        let qc = [Complex64::new(-1.1, 0.0), Complex64::new(0.2, 0.0)];
        let br = bilinear_b(pr, qr, &d);
        let bc = bilinear_b_complex(pc, qc, &d);
        assert_relative_eq!(bc[0].re, br.u, max_relative = 1e-14);
        assert_relative_eq!(bc[1].re, br.v, max_relative = 1e-14);
        assert_eq!(bc[0].im, 0.0);
        let cr = trilinear_c(pr, qr, pr, &d);
        let cc = trilinear_c_complex(pc, qc, pc, &d);
        assert_relative_eq!(cc[0].re, cr.u, max_relative = 1e-14);
        assert_relative_eq!(cc[1].re, cr.v, max_relative = 1e-14);
    }
}
