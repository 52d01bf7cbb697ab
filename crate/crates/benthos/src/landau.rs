//! Hexagonal-lattice Landau reduction near a Turing onset.
//!
//! Patterns near onset are expanded over the three lattice modes
//! `e_i = exp(i k_i . x)` with `k_1 = k (1, 0)`, `k_2 = (k/2)(-1, sqrt 3)`,
//! `k_3 = (k/2)(-1, -sqrt 3)`, so `k_1 + k_2 + k_3 = 0`. Projecting the
//! residual onto the critical eigenspace yields the amplitude system
//!
//! ```text
//!   dA_i/dt = c1 A_i + c2 conj(A_j A_k)
//!             + A_i (c3 |A_i|^2 + c4 (|A_j|^2 + |A_k|^2))
//! ```
//!
//! with `(i, j, k)` cyclic and `c_i = <d_i, Phi*>`. The quadratic correction
//! vectors `phi_ii`, `phi_0`, `phi_ij` remove the second-order residual at
//! the modes `e_i^2`, `1`, and `e_i conj(e_j)` respectively and feed the
//! cubic projections. Amplitude steady states (stripes, both hexagon
//! families, and the mixed (A, B, B) modes connecting them) follow in closed
//! form and are reconstructed into grid fields as Newton initial guesses.

use crate::homogeneous::{homogeneous_states, nearest_state, HomogeneousState};
use crate::kinetics::{
    bilinear_b_complex, derivatives, trilinear_c_complex, DerivativeTensor, ParameterSet,
    StateVector,
};
use crate::pde::{Domain, Field};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;

type C2 = [Complex64; 2];

/// The three wave vectors of the hexagonal lattice at wavenumber `k`.
#[derive(Debug, Clone, Copy)]
pub struct HexLattice {
    pub k: f64,
}

impl HexLattice {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lattice wavenumber must be positive, got {k}"
            )));
        }
        Ok(HexLattice { k })
    }

    /// `k_1, k_2, k_3` with equal lengths and zero sum.
    pub fn wave_vectors(&self) -> [[f64; 2]; 3] {
        let h = 0.5 * self.k;
        let s = 0.5 * 3f64.sqrt() * self.k;
        [[self.k, 0.0], [-h, s], [-h, -s]]
    }
}

/// Which balancing rate the coefficient ingredients are evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Vectors and c2, c3, c4 at the critical rate carried by the parameter
    /// set; only c1 = mu(k) follows the evaluation rate.
    Classical,
    /// Everything evaluated at the evaluation rate.
    Uniform,
}

/// Choice of the cubic self-interaction term entering d4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubicVariant {
    /// `6 C(Phi, Phi, Phi)`.
    AsPrinted,
    /// `6 C(Phi, Phi, conj Phi)`; identical for real critical eigenvectors.
    Conjugated,
}

/// Full output of the reduction at one parameter point.
#[derive(Debug, Clone)]
pub struct LandauCoefficients {
    pub c1: Complex64,
    pub c2: Complex64,
    pub c3: Complex64,
    pub c4: Complex64,
    /// Critical eigenvector, unit norm, first nonzero component real positive.
    pub phi: C2,
    /// Adjoint eigenvector with `<phi, phi_star> = 1`.
    pub phi_star: C2,
    pub phi_ii: C2,
    pub phi_0: C2,
    pub phi_ij: C2,
    pub k: f64,
    pub sigma_eval: f64,
    pub mode: EvalMode,
    pub variant: CubicVariant,
    /// Homogeneous base state at the evaluation rate (reconstruction offset).
    pub base: StateVector,
    /// Parameters at the evaluation rate.
    pub params: ParameterSet,
}

/// Pattern class of an amplitude triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternTag {
    Homogeneous,
    Stripe,
    HexagonPlus,
    HexagonMinus,
    Mixed,
}

/// Sub-kind of a mixed `(A, B, B)` solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedKind {
    /// |A| > |B|.
    Bean,
    /// |A| < |B|.
    Rectangle,
}

/// One amplitude steady state of the Landau system.
#[derive(Debug, Clone, Copy)]
pub struct AmplitudeTriple {
    pub a1: Complex64,
    pub a2: Complex64,
    pub a3: Complex64,
    pub tag: PatternTag,
}

impl AmplitudeTriple {
    pub fn homogeneous() -> Self {
        AmplitudeTriple {
            a1: Complex64::ZERO,
            a2: Complex64::ZERO,
            a3: Complex64::ZERO,
            tag: PatternTag::Homogeneous,
        }
    }

    pub fn stripe(s: f64) -> Self {
        AmplitudeTriple {
            a1: Complex64::new(s, 0.0),
            a2: Complex64::ZERO,
            a3: Complex64::ZERO,
            tag: PatternTag::Stripe,
        }
    }

    pub fn hexagon(h: f64, tag: PatternTag) -> Self {
        AmplitudeTriple {
            a1: Complex64::new(h, 0.0),
            a2: Complex64::new(h, 0.0),
            a3: Complex64::new(h, 0.0),
            tag,
        }
    }

    pub fn mixed(a: f64, b: f64) -> Self {
        AmplitudeTriple {
            a1: Complex64::new(a, 0.0),
            a2: Complex64::new(b, 0.0),
            a3: Complex64::new(b, 0.0),
            tag: PatternTag::Mixed,
        }
    }

    /// Bean/rectangle classification for mixed triples, by |A| versus |B|.
    pub fn mixed_kind(&self) -> Option<MixedKind> {
        if self.tag != PatternTag::Mixed {
            return None;
        }
        if self.a1.norm() > self.a2.norm() {
            Some(MixedKind::Bean)
        } else {
            Some(MixedKind::Rectangle)
        }
    }

    pub fn as_array(&self) -> [Complex64; 3] {
        [self.a1, self.a2, self.a3]
    }
}

fn inner(x: &C2, y: &C2) -> Complex64 {
    x[0] * y[0].conj() + x[1] * y[1].conj()
}

/// `L(kappa) = J_f - D kappa^2` from a derivative tensor.
fn l_of_kappa(d: &DerivativeTensor, delta: f64, kappa: f64) -> [[f64; 2]; 2] {
    let k2 = kappa * kappa;
    [[d.g_u - k2, d.g_v], [d.h_u, d.h_v - delta * k2]]
}

/// Eigenvalues of a real 2x2, larger real part first.
fn eigen2(l: &[[f64; 2]; 2]) -> (Complex64, Complex64) {
    let tr = l[0][0] + l[1][1];
    let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
    let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
    let half = Complex64::new(tr / 2.0, 0.0);
    (half + disc, half - disc)
}

/// Right eigenvector of a real 2x2 for a known eigenvalue, from the larger
/// of the two null-row candidates.
fn eigvec2(l: &[[f64; 2]; 2], mu: Complex64) -> C2 {
    let cand1 = [
        Complex64::new(l[0][1], 0.0),
        mu - Complex64::new(l[0][0], 0.0),
    ];
    let cand2 = [
        mu - Complex64::new(l[1][1], 0.0),
        Complex64::new(l[1][0], 0.0),
    ];
    let n1 = cand1[0].norm_sqr() + cand1[1].norm_sqr();
    let n2 = cand2[0].norm_sqr() + cand2[1].norm_sqr();
    if n1 >= n2 {
        cand1
    } else {
        cand2
    }
}

/// Solves the real 2x2 system `L x = rhs` with complex right-hand side.
fn solve2(l: &[[f64; 2]; 2], rhs: &C2, kappa: f64) -> Result<C2> {
    let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
    if det.abs() < 1e-12 {
        return Err(Error::Resonance {
            kappa,
            det: det.abs(),
        });
    }
    Ok([
        (rhs[0] * l[1][1] - rhs[1] * l[0][1]) / det,
        (rhs[1] * l[0][0] - rhs[0] * l[1][0]) / det,
    ])
}

/// Critical eigenpair of `L(k)`: growth rate, eigenvector, adjoint.
///
/// The eigenvector is normalized to unit Euclidean norm with its first
/// nonzero component real positive; the adjoint satisfies
/// `L(k)^H phi_star = conj(mu) phi_star` and `<phi, phi_star> = 1`.
pub fn critical_eigenpair(
    s: &HomogeneousState,
    p: &ParameterSet,
    k: f64,
) -> Result<(Complex64, C2, C2)> {
    let d = derivatives(s.state(), p)?;
    let l = l_of_kappa(&d, p.delta(), k);
    let (mu_p, mu_m) = eigen2(&l);
    if (mu_p - mu_m).norm() < 1e-10 {
        return Err(Error::Degenerate(format!(
            "eigenvalue multiplicity at k = {k}: mu = {mu_p}"
        )));
    }
    let mut phi = eigvec2(&l, mu_p);
    let nrm = (phi[0].norm_sqr() + phi[1].norm_sqr()).sqrt();
    phi[0] /= nrm;
    phi[1] /= nrm;
    // rotate the phase so the first component above threshold is positive
    let lead = if phi[0].norm() > 1e-12 { phi[0] } else { phi[1] };
    let rot = lead.conj() / lead.norm();
    phi[0] *= rot;
    phi[1] *= rot;

    // adjoint problem uses the transpose (L is real)
    let lt = [[l[0][0], l[1][0]], [l[0][1], l[1][1]]];
    let mut phi_star = eigvec2(&lt, mu_p.conj());
    let s_ip = inner(&phi, &phi_star);
    if s_ip.norm() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "defective eigenpair at k = {k}: <phi, phi*> = {s_ip}"
        )));
    }
    let alpha = (Complex64::new(1.0, 0.0) / s_ip).conj();
    phi_star[0] *= alpha;
    phi_star[1] *= alpha;
    Ok((mu_p, phi, phi_star))
}

/// Quadratic correction vectors for a given critical eigenvector:
///
/// ```text
///   phi_ii = -L(2k)^-1 B(Phi, Phi)
///   phi_0  = -2 L(0)^-1 B(Phi, conj Phi)
///   phi_ij = -2 L(sqrt(3) k)^-1 B(Phi, conj Phi)
/// ```
pub fn quadratic_corrections(
    s: &HomogeneousState,
    p: &ParameterSet,
    k: f64,
    phi: &C2,
) -> Result<(C2, C2, C2)> {
    let d = derivatives(s.state(), p)?;
    let delta = p.delta();
    let phi_c = [phi[0].conj(), phi[1].conj()];
    let b_pp = bilinear_b_complex(*phi, *phi, &d);
    let b_ppc = bilinear_b_complex(*phi, phi_c, &d);
    let neg = |x: C2| [-x[0], -x[1]];
    let twice = |x: C2| [2.0 * x[0], 2.0 * x[1]];
    let phi_ii = solve2(&l_of_kappa(&d, delta, 2.0 * k), &neg(b_pp), 2.0 * k)?;
    let phi_0 = solve2(&l_of_kappa(&d, delta, 0.0), &neg(twice(b_ppc)), 0.0)?;
    let rt3k = 3f64.sqrt() * k;
    let phi_ij = solve2(&l_of_kappa(&d, delta, rt3k), &neg(twice(b_ppc)), rt3k)?;
    Ok((phi_ii, phi_0, phi_ij))
}

/// Landau coefficients with the printed cubic variant.
///
/// `s` is the homogeneous state at `p.sigma` (the critical rate for the
/// classical convention); `sigma_eval` is where the amplitude equations are
/// to be used. Classical mode takes vectors and c2..c4 at `p.sigma` and only
/// the linear growth rate c1 at `sigma_eval`; uniform mode takes everything
/// at `sigma_eval`, tracking the homogeneous root nearest `s`.
pub fn landau_coefficients(
    s: &HomogeneousState,
    p: &ParameterSet,
    k: f64,
    sigma_eval: f64,
    mode: EvalMode,
) -> Result<LandauCoefficients> {
    landau_coefficients_with_variant(s, p, k, sigma_eval, mode, CubicVariant::AsPrinted)
}

pub fn landau_coefficients_with_variant(
    s: &HomogeneousState,
    p: &ParameterSet,
    k: f64,
    sigma_eval: f64,
    mode: EvalMode,
    variant: CubicVariant,
) -> Result<LandauCoefficients> {
    let p_eval = p.with_sigma(sigma_eval);
    let states_eval = homogeneous_states(&p_eval)?;
    let s_eval = nearest_state(&states_eval, s.u);

    // ingredient state: critical for classical, evaluation for uniform
    let (s_vec, p_vec) = match mode {
        EvalMode::Classical => (s, p),
        EvalMode::Uniform => (s_eval, &p_eval),
    };

    let (_, phi, phi_star) = critical_eigenpair(s_vec, p_vec, k)?;
    let (phi_ii, phi_0, phi_ij) = quadratic_corrections(s_vec, p_vec, k, &phi)?;
    let d = derivatives(s_vec.state(), p_vec)?;
    let phi_c = [phi[0].conj(), phi[1].conj()];

    // c1 is the growth rate at the evaluation rate in both conventions
    let (mu_eval, _, _) = critical_eigenpair(s_eval, &p_eval, k)?;
    let c1 = mu_eval;

    let b_cc = bilinear_b_complex(phi_c, phi_c, &d);
    let d2 = [2.0 * b_cc[0], 2.0 * b_cc[1]];

    let c_ppc = trilinear_c_complex(phi, phi, phi_c, &d);
    let b_c_ii = bilinear_b_complex(phi_c, phi_ii, &d);
    let b_p_0 = bilinear_b_complex(phi, phi_0, &d);
    let d3 = [
        3.0 * c_ppc[0] + 2.0 * b_c_ii[0] + 2.0 * b_p_0[0],
        3.0 * c_ppc[1] + 2.0 * b_c_ii[1] + 2.0 * b_p_0[1],
    ];

    let c_cubic = match variant {
        CubicVariant::AsPrinted => trilinear_c_complex(phi, phi, phi, &d),
        CubicVariant::Conjugated => c_ppc,
    };
    let b_p_ij = bilinear_b_complex(phi, phi_ij, &d);
    let d4 = [
        6.0 * c_cubic[0] + 2.0 * b_p_ij[0] + 2.0 * b_p_0[0],
        6.0 * c_cubic[1] + 2.0 * b_p_ij[1] + 2.0 * b_p_0[1],
    ];

    Ok(LandauCoefficients {
        c1,
        c2: inner(&d2, &phi_star),
        c3: inner(&d3, &phi_star),
        c4: inner(&d4, &phi_star),
        phi,
        phi_star,
        phi_ii,
        phi_0,
        phi_ij,
        k,
        sigma_eval,
        mode,
        variant,
        base: s_eval.state(),
        params: p_eval,
    })
}

/// Stripe amplitudes `S_pm = +- sqrt(-Re c1 / Re c3)`.
pub fn stripe_amplitudes(lc: &LandauCoefficients) -> Result<(f64, f64)> {
    let rad = -lc.c1.re / lc.c3.re;
    if rad < 0.0 {
        return Err(Error::Degenerate(format!(
            "no stripe amplitudes: -c1/c3 = {rad} < 0"
        )));
    }
    let s = rad.sqrt();
    Ok((s, -s))
}

/// Hexagon amplitudes: the two real roots of
/// `c1 + c2 A + (c3 + 2 c4) A^2 = 0` (real parts), returned `(H_+, H_-)`.
pub fn hexagon_amplitudes(lc: &LandauCoefficients) -> Result<(f64, f64)> {
    let q = lc.c3.re + 2.0 * lc.c4.re;
    if q.abs() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "degenerate hexagon cubic: c3 + 2 c4 = {q}"
        )));
    }
    let half = -lc.c2.re / (2.0 * q);
    let rad = half * half - lc.c1.re / q;
    if rad < 0.0 {
        return Err(Error::Degenerate(format!(
            "no hexagon amplitudes: radicand {rad} < 0"
        )));
    }
    Ok((half + rad.sqrt(), half - rad.sqrt()))
}

/// Subcriticality index `c_f = c2^2 / (4 (c3 + 2 c4)^2)` from real parts.
pub fn subcriticality_index(lc: &LandauCoefficients) -> Result<f64> {
    let q = lc.c3.re + 2.0 * lc.c4.re;
    if q.abs() < 1e-12 {
        return Err(Error::Degenerate(format!(
            "degenerate hexagon cubic: c3 + 2 c4 = {q}"
        )));
    }
    Ok(lc.c2.re * lc.c2.re / (4.0 * q * q))
}

/// Right-hand side of the amplitude system at a triple.
pub fn gl_residual(t: &AmplitudeTriple, lc: &LandauCoefficients) -> [Complex64; 3] {
    let a = t.as_array();
    let mut out = [Complex64::ZERO; 3];
    for i in 0..3 {
        let (j, l) = ((i + 1) % 3, (i + 2) % 3);
        out[i] = lc.c1 * a[i]
            + lc.c2 * (a[j] * a[l]).conj()
            + a[i]
                * (lc.c3 * a[i].norm_sqr() + lc.c4 * (a[j].norm_sqr() + a[l].norm_sqr()));
    }
    out
}

/// Real roots of `a3 x^3 + a2 x^2 + a1 x + a0`, degenerate degrees included.
fn real_cubic_roots(a3: f64, a2: f64, a1: f64, a0: f64) -> Vec<f64> {
    if a3.abs() < 1e-300 {
        if a2.abs() < 1e-300 {
            if a1.abs() < 1e-300 {
                return Vec::new();
            }
            return vec![-a0 / a1];
        }
        let disc = a1 * a1 - 4.0 * a2 * a0;
        if disc < 0.0 {
            return Vec::new();
        }
        let r = disc.sqrt();
        // numerically stable quadratic roots
        let q = -0.5 * (a1 + a1.signum() * r);
        let mut out = vec![q / a2];
        if q.abs() > 1e-300 {
            out.push(a0 / q);
        } else {
            out.push(0.0);
        }
        return out;
    }
    let (b, c, d) = (a2 / a3, a1 / a3, a0 / a3);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 + d - b * c / 3.0;
    let mut roots = Vec::new();
    if p < 0.0 {
        let raw = -q / 2.0 * (-27.0 / (p * p * p)).sqrt();
        if raw.abs() <= 1.0 + 1e-12 {
            let arg = raw.clamp(-1.0, 1.0).acos() / 3.0;
            let amp = (-4.0 * p / 3.0).sqrt();
            roots.push(amp * arg.cos() - b / 3.0);
            roots.push(-amp * (arg + std::f64::consts::FRAC_PI_3).cos() - b / 3.0);
            roots.push(-amp * (arg - std::f64::consts::FRAC_PI_3).cos() - b / 3.0);
            return roots;
        }
    }
    let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let t1 = if -q / 2.0 + s >= 0.0 {
        (-q / 2.0 + s).cbrt()
    } else {
        (-q / 2.0 - s).cbrt()
    };
    let t = if t1.abs() > 1e-300 { t1 - p / (3.0 * t1) } else { 0.0 };
    roots.push(t - b / 3.0);
    roots
}

/// All real steady states of the reduced `(A, B, B)` system, tagged.
///
/// Setting `A_1 = A`, `A_2 = A_3 = B` real reduces the amplitude system to
/// two equations; eliminating `B^2 = -(c1 + c2 A + c4 A^2) / (c3 + c4)`
/// leaves the cubic
///
/// ```text
///   (c3 - c4)(c3 + 2 c4) A^3 - 3 c2 c4 A^2
///     + (c1 c3 - c1 c4 - c2^2) A - c1 c2 = 0.
/// ```
///
/// Sign flips of `B` are lattice translations, so `B >= 0` is canonical.
/// Cubic roots with `|A| = |B|` are hexagons in disguise (the translation
/// `(H, -H, -H) ~ (H, H, H)`); they and the `B = 0` stripe branch are
/// returned with their own tags, genuine mixed modes with `Mixed`.
pub fn mixed_mode_amplitudes(lc: &LandauCoefficients) -> Vec<AmplitudeTriple> {
    let (c1, c2, c3, c4) = (lc.c1.re, lc.c2.re, lc.c3.re, lc.c4.re);
    let tol = 1e-9;
    let mut out = vec![AmplitudeTriple::homogeneous()];
    if let Ok((sp, sm)) = stripe_amplitudes(lc) {
        if sp > tol {
            out.push(AmplitudeTriple::stripe(sp));
            out.push(AmplitudeTriple::stripe(sm));
        }
    }
    let hexes = hexagon_amplitudes(lc).ok();
    let roots = real_cubic_roots(
        (c3 - c4) * (c3 + 2.0 * c4),
        -3.0 * c2 * c4,
        c1 * c3 - c1 * c4 - c2 * c2,
        -c1 * c2,
    );
    for a in roots {
        if (c3 + c4).abs() < 1e-14 {
            continue;
        }
        let b2 = -(c1 + c2 * a + c4 * a * a) / (c3 + c4);
        if b2 < 0.0 {
            continue;
        }
        let b = b2.sqrt();
        if b < tol {
            continue; // stripe degeneration, covered above
        }
        if (a.abs() - b).abs() < tol {
            // hexagon in canonical form (A, A, A)
            if let Some((hp, hm)) = hexes {
                if (a - hp).abs() < 1e-6 * hp.abs().max(1.0) {
                    out.push(AmplitudeTriple::hexagon(hp, PatternTag::HexagonPlus));
                    continue;
                }
                if (a - hm).abs() < 1e-6 * hm.abs().max(1.0) {
                    out.push(AmplitudeTriple::hexagon(hm, PatternTag::HexagonMinus));
                    continue;
                }
            }
            out.push(AmplitudeTriple::hexagon(a, PatternTag::HexagonPlus));
        } else if a.abs() > tol {
            out.push(AmplitudeTriple::mixed(a, b));
        }
    }
    // deduplicate (double roots of the cubic can repeat)
    let mut dedup: Vec<AmplitudeTriple> = Vec::new();
    for t in out {
        if !dedup.iter().any(|s| {
            (s.a1 - t.a1).norm() < 1e-9 && (s.a2 - t.a2).norm() < 1e-9 && s.tag == t.tag
        }) {
            dedup.push(t);
        }
    }
    dedup
}

/// Spectrum of the amplitude-system Jacobian at a triple.
#[derive(Debug, Clone)]
pub struct AmplitudeStability {
    /// All six eigenvalues, descending real part.
    pub eigenvalues: Vec<Complex64>,
    /// Strict amplitude stability: every real part below -1e-10. Phase
    /// symmetry pins zero eigenvalues at nonzero patterns, so only the
    /// homogeneous triple can satisfy this.
    pub stable: bool,
    /// Count of genuinely growing directions (Re > 1e-10); zero means no
    /// amplitude perturbation grows.
    pub n_positive: usize,
}

/// Eigenvalues of the 6x6 real Jacobian of the amplitude system, with the
/// real and imaginary parts of the three amplitudes as coordinates.
///
/// Wirtinger derivatives give, per `(f_i, A_j)` pair with
/// `alpha = df_i/dA_j` and `beta = df_i/d(conj A_j)`, the real block
/// `[[Re(alpha + beta), -Im(alpha - beta)], [Im(alpha + beta), Re(alpha - beta)]]`.
pub fn amplitude_stability(t: &AmplitudeTriple, lc: &LandauCoefficients) -> AmplitudeStability {
    let a = t.as_array();
    let (c1, c2, c3, c4) = (lc.c1, lc.c2, lc.c3, lc.c4);
    let mut jac = nalgebra::DMatrix::<f64>::zeros(6, 6);
    for i in 0..3 {
        let (j, l) = ((i + 1) % 3, (i + 2) % 3);
        // [(column index, alpha, beta)] for row block i
        let entries = [
            (
                i,
                c1 + 2.0 * c3 * a[i].norm_sqr() + c4 * (a[j].norm_sqr() + a[l].norm_sqr()),
                c3 * a[i] * a[i],
            ),
            (
                j,
                c4 * a[i] * a[j].conj(),
                c2 * a[l].conj() + c4 * a[i] * a[j],
            ),
            (
                l,
                c4 * a[i] * a[l].conj(),
                c2 * a[j].conj() + c4 * a[i] * a[l],
            ),
        ];
        for (col, alpha, beta) in entries {
            let sum = alpha + beta;
            let dif = alpha - beta;
            jac[(2 * i, 2 * col)] = sum.re;
            jac[(2 * i, 2 * col + 1)] = -dif.im;
            jac[(2 * i + 1, 2 * col)] = sum.im;
            jac[(2 * i + 1, 2 * col + 1)] = dif.re;
        }
    }
    let mut eigenvalues: Vec<Complex64> = jac.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap());
    let stable = eigenvalues.iter().all(|z| z.re < -1e-10);
    let n_positive = eigenvalues.iter().filter(|z| z.re > 1e-10).count();
    AmplitudeStability {
        eigenvalues,
        stable,
        n_positive,
    }
}

/// Evaluates the pattern ansatz on a grid as a Newton initial guess.
///
/// For a real `(A, B, B)` triple the complex-exponential ansatz collapses to
/// the cosine form (with `xi = x - x_lo`, `eta = y - y_lo`):
///
/// ```text
///   w = w* + 2 A Phi cos(k xi) + 4 B Phi cos(k xi / 2) cos(rt3 k eta / 2)
///       + 2 A^2 phi_ii cos(2 k xi) + 4 B^2 phi_ii cos(k xi) cos(rt3 k eta)
///       + (A^2 + 2 B^2) phi_0
///       + 4 A B phi_ij cos(3 k xi / 2) cos(rt3 k eta / 2)
///       + 2 B^2 phi_ij cos(rt3 k eta)
/// ```
///
/// Left-edge cosines satisfy the zero-flux condition there; the right/top
/// edges require every active wavenumber `kappa` to close with
/// `kappa L = n pi` (checked to 1e-8), which also admits the half-integer
/// period counts used off the critical wavenumber.
pub fn reconstruct_field(
    t: &AmplitudeTriple,
    lc: &LandauCoefficients,
    domain: &Domain,
) -> Result<Field> {
    let arr = t.as_array();
    for z in arr {
        if z.im.abs() > 1e-12 {
            return Err(Error::Degenerate(format!(
                "reconstruction needs real amplitudes, got imaginary part {}",
                z.im
            )));
        }
    }
    if (t.a2 - t.a3).norm() > 1e-12 {
        return Err(Error::Degenerate(
            "reconstruction needs an (A, B, B) triple with equal second and third amplitudes"
                .into(),
        ));
    }
    let a = t.a1.re;
    let b = t.a2.re;
    let k = lc.k;
    let rt3 = 3f64.sqrt();

    for (name, vec) in [
        ("phi", &lc.phi),
        ("phi_ii", &lc.phi_ii),
        ("phi_0", &lc.phi_0),
        ("phi_ij", &lc.phi_ij),
    ] {
        if vec[0].im.abs() > 1e-9 || vec[1].im.abs() > 1e-9 {
            return Err(Error::Degenerate(format!(
                "reconstruction needs real mode vectors, {name} has imaginary parts"
            )));
        }
    }

    let check_axis = |kappa: f64, len: f64, axis: &str| -> Result<()> {
        let cycles = kappa * len / std::f64::consts::PI;
        if (cycles - cycles.round()).abs() > 1e-8 {
            return Err(Error::DomainMismatch(format!(
                "wavenumber {kappa} does not close on the {axis} extent {len}: kappa L / pi = {cycles}"
            )));
        }
        Ok(())
    };
    let lx = domain.hi[0] - domain.lo[0];
    if b.abs() > 0.0 {
        if domain.dimension != 2 {
            return Err(Error::DomainMismatch(
                "hexagonal modes need a 2D domain".into(),
            ));
        }
        // k/2 divides every active x-frequency; rt3 k / 2 every y-frequency
        check_axis(0.5 * k, lx, "x")?;
        check_axis(0.5 * rt3 * k, domain.hi[1] - domain.lo[1], "y")?;
    } else if a.abs() > 0.0 {
        check_axis(k, lx, "x")?;
    }

    let phi = [lc.phi[0].re, lc.phi[1].re];
    let pii = [lc.phi_ii[0].re, lc.phi_ii[1].re];
    let p0 = [lc.phi_0[0].re, lc.phi_0[1].re];
    let pij = [lc.phi_ij[0].re, lc.phi_ij[1].re];
    let base = [lc.base.u, lc.base.v];

    let mut w = Field::constant(domain, 0.0, 0.0);
    for i in 0..domain.nodes() {
        let (x, y) = domain.coords(i);
        let xi = x - domain.lo[0];
        let eta = y - domain.lo[1];
        let cx = (k * xi).cos();
        let cx_h = (0.5 * k * xi).cos();
        let cx2 = (2.0 * k * xi).cos();
        let cx_3h = (1.5 * k * xi).cos();
        let cy_h = (0.5 * rt3 * k * eta).cos();
        let cy = (rt3 * k * eta).cos();
        for comp in 0..2 {
            let val = base[comp]
                + 2.0 * a * phi[comp] * cx
                + 4.0 * b * phi[comp] * cx_h * cy_h
                + 2.0 * a * a * pii[comp] * cx2
                + 4.0 * b * b * pii[comp] * cx * cy
                + (a * a + 2.0 * b * b) * p0[comp]
                + 4.0 * a * b * pij[comp] * cx_3h * cy_h
                + 2.0 * b * b * pij[comp] * cy;
            if comp == 0 {
                w.u[i] = val;
            } else {
                w.v[i] = val;
            }
        }
    }
    Ok(w)
}

/// One row of the coefficient sweep export.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub gamma: f64,
    pub sigma_c: f64,
    pub k_c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c_f: f64,
}

/// Critical point and Landau coefficients per gamma, at the critical rate.
///
/// The bracket must enclose exactly one Turing onset for every gamma in the
/// list; gamma values where the search fails are reported, not skipped.
pub fn coefficient_sweep(
    p0: &ParameterSet,
    gammas: &[f64],
    bracket: (f64, f64),
    mode: EvalMode,
    variant: CubicVariant,
) -> Result<Vec<SweepRow>> {
    gammas
        .par_iter()
        .map(|&gamma| {
            let p = ParameterSet { gamma, ..*p0 };
            let (sigma_c, k_c) = crate::homogeneous::critical_point(&p, bracket)?;
            let pc = p.with_sigma(sigma_c);
            let s = &homogeneous_states(&pc)?[0];
            let lc = landau_coefficients_with_variant(s, &pc, k_c, sigma_c, mode, variant)?;
            let q = lc.c3.re + 2.0 * lc.c4.re;
            let c_f = if q.abs() < 1e-12 {
                f64::INFINITY
            } else {
                lc.c2.re * lc.c2.re / (4.0 * q * q)
            };
            Ok(SweepRow {
                gamma,
                sigma_c,
                k_c,
                c1: lc.c1.re,
                c2: lc.c2.re,
                c3: lc.c3.re,
                c4: lc.c4.re,
                c_f,
            })
        })
        .collect()
}

/// Writes a sweep as CSV: `gamma,sigma_c,k_c,c1,c2,c3,c4,c_f`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "gamma,sigma_c,k_c,c1,c2,c3,c4,c_f")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.gamma, r.sigma_c, r.k_c, r.c1, r.c2, r.c3, r.c4, r.c_f
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogeneous::critical_point;
    use approx::assert_relative_eq;

    fn setup_025() -> (ParameterSet, HomogeneousState, f64, f64) {
        let p = ParameterSet::standard(0.1, 0.25);
        let (sc, kc) = critical_point(&p, (0.08, 0.2)).unwrap();
        let pc = p.with_sigma(sc);
        let s = homogeneous_states(&pc).unwrap()[0];
        (pc, s, sc, kc)
    }

    #[test]
    fn eigenpair_defining_properties() {
        let (pc, s, _, kc) = setup_025();
        let (mu, phi, phi_star) = critical_eigenpair(&s, &pc, kc).unwrap();
        let d = derivatives(s.state(), &pc).unwrap();
        let l = l_of_kappa(&d, pc.delta(), kc);
        for i in 0..2 {
            let row = Complex64::new(l[i][0], 0.0) * phi[0]
                + Complex64::new(l[i][1], 0.0) * phi[1]
                - mu * phi[i];
            assert!(row.norm() < 1e-12, "L phi - mu phi = {row}");
        }
        assert_relative_eq!(
            phi[0].norm_sqr() + phi[1].norm_sqr(),
            1.0,
            epsilon = 1e-12
        );
        assert!(phi[0].re > 0.0 && phi[0].im.abs() < 1e-14);
        let ip = inner(&phi, &phi_star);
        assert!((ip - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // biorthogonality against the other eigenvector
        let (_, mu_m) = eigen2(&l);
        let phi_perp = eigvec2(&l, mu_m);
        let cross = inner(&phi_perp, &phi_star);
        assert!(
            cross.norm() < 1e-10 * (phi_perp[0].norm() + phi_perp[1].norm()),
            "biorthogonality violated: {cross}"
        );
    }

    #[test]
    fn degenerate_eigenpair_guard() {
        // crafted equal eigenvalues trip the multiplicity check
        let l = [[0.3, 0.0], [0.0, 0.3]];
        let (mu_p, mu_m) = eigen2(&l);
        assert!((mu_p - mu_m).norm() < 1e-10);
    }

    #[test]
    fn corrections_solve_their_systems() {
        let (pc, s, _, kc) = setup_025();
        let (_, phi, _) = critical_eigenpair(&s, &pc, kc).unwrap();
        let (phi_ii, phi_0, phi_ij) = quadratic_corrections(&s, &pc, kc, &phi).unwrap();
        let d = derivatives(s.state(), &pc).unwrap();
        let phi_c = [phi[0].conj(), phi[1].conj()];
        let b_pp = bilinear_b_complex(phi, phi, &d);
        let b_ppc = bilinear_b_complex(phi, phi_c, &d);
        let checks = [
            (2.0 * kc, phi_ii, b_pp, 1.0),
            (0.0, phi_0, b_ppc, 2.0),
            (3f64.sqrt() * kc, phi_ij, b_ppc, 2.0),
        ];
        for (kappa, cor, rhs, fac) in checks {
            let l = l_of_kappa(&d, pc.delta(), kappa);
            for i in 0..2 {
                let r = Complex64::new(l[i][0], 0.0) * cor[0]
                    + Complex64::new(l[i][1], 0.0) * cor[1]
                    + fac * rhs[i];
                assert!(r.norm() < 1e-12, "correction residual {r} at kappa {kappa}");
            }
        }
    }

    #[test]
    fn quadratic_residual_vanishes_for_random_triples() {
        // the second-order residual at modes e_i^2, e_i conj(e_j), and 0 is
        // a linear combination of the three correction identities; weight
        // them with random amplitudes and check each mode separately
        let (pc, s, _, kc) = setup_025();
        let (_, phi, _) = critical_eigenpair(&s, &pc, kc).unwrap();
        let (phi_ii, phi_0, phi_ij) = quadratic_corrections(&s, &pc, kc, &phi).unwrap();
        let d = derivatives(s.state(), &pc).unwrap();
        let phi_c = [phi[0].conj(), phi[1].conj()];
        let b_pp = bilinear_b_complex(phi, phi, &d);
        let b_ppc = bilinear_b_complex(phi, phi_c, &d);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let amp: Vec<Complex64> = (0..3)
                .map(|_| Complex64::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
                .collect();
            for i in 0..3 {
                // mode e_i^2: A_i^2 (L(2k) phi_ii + B(Phi, Phi))
                let l = l_of_kappa(&d, pc.delta(), 2.0 * kc);
                for r in 0..2 {
                    let lhs = Complex64::new(l[r][0], 0.0) * phi_ii[0]
                        + Complex64::new(l[r][1], 0.0) * phi_ii[1]
                        + b_pp[r];
                    assert!((amp[i] * amp[i] * lhs).norm() < 1e-10);
                }
                // mode e_i conj(e_j): A_i conj(A_j) (L(rt3 k) phi_ij + 2 B(Phi, conj Phi))
                let l = l_of_kappa(&d, pc.delta(), 3f64.sqrt() * kc);
                for r in 0..2 {
                    let lhs = Complex64::new(l[r][0], 0.0) * phi_ij[0]
                        + Complex64::new(l[r][1], 0.0) * phi_ij[1]
                        + 2.0 * b_ppc[r];
                    assert!((amp[i] * amp[(i + 1) % 3].conj() * lhs).norm() < 1e-10);
                }
            }
            // mode 0: sum |A_i|^2 (L(0) phi_0 + 2 B(Phi, conj Phi))
            let l = l_of_kappa(&d, pc.delta(), 0.0);
            let weight: f64 = amp.iter().map(|z| z.norm_sqr()).sum();
            for r in 0..2 {
                let lhs = Complex64::new(l[r][0], 0.0) * phi_0[0]
                    + Complex64::new(l[r][1], 0.0) * phi_0[1]
                    + 2.0 * b_ppc[r];
                assert!((weight * lhs).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn resonance_at_neutral_wavenumber() {
        // inside the Turing band, det L(k_neutral) = 0; choosing the lattice
        // constant k = k_plus / sqrt(3) makes the phi_ij solve resonant
        let p = ParameterSet::standard(0.11, 0.25);
        let s = &homogeneous_states(&p).unwrap()[0];
        let (_, kp) = crate::homogeneous::neutral_wavenumbers(s, &p).unwrap();
        let k = kp / 3f64.sqrt();
        let (_, phi, _) = critical_eigenpair(s, &p, k).unwrap();
        match quadratic_corrections(s, &p, k, &phi) {
            Err(Error::Resonance { .. }) => {}
            other => panic!("expected resonance, got {other:?}"),
        }
    }

    #[test]
    fn fredholm_projections_are_exact() {
        let (pc, s, sc, kc) = setup_025();
        let lc = landau_coefficients(&s, &pc, kc, sc, EvalMode::Classical).unwrap();
        // <d_i - c_i Phi, Phi*> = 0 holds by construction of c_i
        let d = derivatives(s.state(), &pc).unwrap();
        let phi_c = [lc.phi[0].conj(), lc.phi[1].conj()];
        let b_cc = bilinear_b_complex(phi_c, phi_c, &d);
        let d2 = [2.0 * b_cc[0], 2.0 * b_cc[1]];
        let proj = inner(&d2, &lc.phi_star) - lc.c2 * inner(&lc.phi, &lc.phi_star);
        assert!(proj.norm() < 1e-12);
    }

    #[test]
    fn uniform_mode_moves_the_vectors() {
        let (pc, s, sc, kc) = setup_025();
        let sig = sc - 0.01;
        let classical = landau_coefficients(&s, &pc, kc, sig, EvalMode::Classical).unwrap();
        let uniform = landau_coefficients(&s, &pc, kc, sig, EvalMode::Uniform).unwrap();
        // c1 agrees (same definition); c3 differs (vectors move)
        assert_relative_eq!(classical.c1.re, uniform.c1.re, max_relative = 1e-12);
        assert!((classical.c3 - uniform.c3).norm() > 1e-6);
        // both carry the base state at the evaluation rate
        assert_relative_eq!(classical.base.u, uniform.base.u, max_relative = 1e-12);
    }

    #[test]
    fn stripe_amplitudes_near_onset() {
        let (pc, s, sc, kc) = setup_025();
        let at_c = landau_coefficients(&s, &pc, kc, sc, EvalMode::Classical).unwrap();
        assert!(at_c.c1.norm() < 1e-8, "c1 at onset: {}", at_c.c1);
        // the bisected onset leaves c1 within ~1e-9 of zero on either side,
        // so stripes there are either tiny or just past existence
        match stripe_amplitudes(&at_c) {
            Ok((sp, sm)) => {
                assert!(sp.abs() < 2e-3);
                assert_relative_eq!(sm, -sp);
            }
            Err(Error::Degenerate(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
        // below onset stripes exist; above they do not (c1 < 0, c3 < 0)
        let below = landau_coefficients(&s, &pc, kc, sc - 0.002, EvalMode::Classical).unwrap();
        let (sp, _) = stripe_amplitudes(&below).unwrap();
        assert!(sp > 0.0);
        let above = landau_coefficients(&s, &pc, kc, sc + 0.002, EvalMode::Classical).unwrap();
        assert!(stripe_amplitudes(&above).is_err());
    }

    #[test]
    fn hexagon_amplitudes_solve_polynomial() {
        let (pc, s, sc, kc) = setup_025();
        for dsig in [0.0, -0.005, -0.01, 0.003] {
            let lc = landau_coefficients(&s, &pc, kc, sc + dsig, EvalMode::Classical).unwrap();
            if let Ok((hp, hm)) = hexagon_amplitudes(&lc) {
                let q = lc.c3.re + 2.0 * lc.c4.re;
                for h in [hp, hm] {
                    let res = lc.c1.re * h + lc.c2.re * h * h + q * h * h * h;
                    assert!(res.abs() < 1e-10, "hex residual {res}");
                }
            }
        }
        // at onset the roots are 0 and -c2/(c3+2c4)
        let lc = landau_coefficients(&s, &pc, kc, sc, EvalMode::Classical).unwrap();
        let (hp, hm) = hexagon_amplitudes(&lc).unwrap();
        let q = lc.c3.re + 2.0 * lc.c4.re;
        let nonzero = -lc.c2.re / q;
        assert!(hp.abs() < 1e-6 || (hp - nonzero).abs() < 1e-6);
        assert!(hm.abs() < 1e-6 || (hm - nonzero).abs() < 1e-6);
        assert!((hp - hm).abs() > 1e-6);
    }

    #[test]
    fn hexagons_exist_on_both_sides_of_onset() {
        // transcritical structure: the disturbed pitchfork admits hexagons
        // in a window around the onset
        let (pc, s, sc, kc) = setup_025();
        for dsig in [-0.002, 0.002] {
            let lc = landau_coefficients(&s, &pc, kc, sc + dsig, EvalMode::Classical).unwrap();
            assert!(hexagon_amplitudes(&lc).is_ok(), "no hexagons at {dsig}");
        }
    }

    #[test]
    fn mixed_modes_zero_the_full_system() {
        let (pc, s, sc, kc) = setup_025();
        for dsig in [-0.002, -0.01, -0.03] {
            let lc = landau_coefficients(&s, &pc, kc, sc + dsig, EvalMode::Classical).unwrap();
            for t in mixed_mode_amplitudes(&lc) {
                let res = gl_residual(&t, &lc);
                let total: f64 = res.iter().map(|z| z.norm()).sum();
                assert!(total < 1e-10, "gl residual {total} for {:?}", t.tag);
            }
        }
    }

    #[test]
    fn degenerations_recover_stripes_and_hexagons() {
        let (pc, s, sc, kc) = setup_025();
        let lc = landau_coefficients(&s, &pc, kc, sc - 0.01, EvalMode::Classical).unwrap();
        let (c1, c2, c3, c4) = (lc.c1.re, lc.c2.re, lc.c3.re, lc.c4.re);
        // B = 0 in the reduced system leaves c1 A + c3 A^3 = 0: stripe roots
        let (sp, _) = stripe_amplitudes(&lc).unwrap();
        assert!((c1 * sp + c3 * sp.powi(3)).abs() < 1e-12);
        // B = A turns both equations into the hexagon polynomial
        let (hp, hm) = hexagon_amplitudes(&lc).unwrap();
        for h in [hp, hm] {
            let f1 = c1 * h + c2 * h * h + c3 * h.powi(3) + 2.0 * c4 * h.powi(3);
            let f2 = c1 * h + c2 * h * h + c3 * h.powi(3) + c4 * (2.0 * h.powi(3));
            assert!(f1.abs() < 1e-10 && f2.abs() < 1e-10);
        }
    }

    #[test]
    fn origin_eigenvalues_equal_c1() {
        let (pc, s, sc, kc) = setup_025();
        let lc = landau_coefficients(&s, &pc, kc, sc - 0.004, EvalMode::Classical).unwrap();
        let st = amplitude_stability(&AmplitudeTriple::homogeneous(), &lc);
        assert_eq!(st.eigenvalues.len(), 6);
        for z in &st.eigenvalues {
            assert!((z - lc.c1).norm() < 1e-12, "origin eigenvalue {z} != c1");
        }
        // below onset the homogeneous state is amplitude-unstable
        assert!(!st.stable && st.n_positive == 6);
    }

    #[test]
    fn amplitude_jacobian_matches_finite_differences() {
        let (pc, s, sc, kc) = setup_025();
        let lc = landau_coefficients(&s, &pc, kc, sc - 0.01, EvalMode::Classical).unwrap();
        // generic complex point, not a steady state
        let point = AmplitudeTriple {
            a1: Complex64::new(0.21, -0.13),
            a2: Complex64::new(-0.32, 0.05),
            a3: Complex64::new(0.11, 0.27),
            tag: PatternTag::Mixed,
        };
        // rebuild the 6x6 the same way amplitude_stability does, then check
        // each column against finite differences of gl_residual
        let to_vec6 = |t: &AmplitudeTriple| -> Vec<f64> {
            t.as_array()
                .iter()
                .flat_map(|z| [z.re, z.im])
                .collect()
        };
        let from_vec = |x: &[f64]| AmplitudeTriple {
            a1: Complex64::new(x[0], x[1]),
            a2: Complex64::new(x[2], x[3]),
            a3: Complex64::new(x[4], x[5]),
            tag: PatternTag::Mixed,
        };
        let f_at = |x: &[f64]| -> Vec<f64> {
            gl_residual(&from_vec(x), &lc)
                .iter()
                .flat_map(|z| [z.re, z.im])
                .collect()
        };
        // assemble analytic jacobian via the stability path: perturb columns
        let x0 = to_vec6(&point);
        let f0 = f_at(&x0);
        let eps = 1e-7;
        // analytic blocks
        let a = point.as_array();
        let (c1, c2, c3, c4) = (lc.c1, lc.c2, lc.c3, lc.c4);
        let mut jac = vec![vec![0.0f64; 6]; 6];
        for i in 0..3 {
            let (j, l) = ((i + 1) % 3, (i + 2) % 3);
            let entries = [
                (
                    i,
                    c1 + 2.0 * c3 * a[i].norm_sqr() + c4 * (a[j].norm_sqr() + a[l].norm_sqr()),
                    c3 * a[i] * a[i],
                ),
                (
                    j,
                    c4 * a[i] * a[j].conj(),
                    c2 * a[l].conj() + c4 * a[i] * a[j],
                ),
                (
                    l,
                    c4 * a[i] * a[l].conj(),
                    c2 * a[j].conj() + c4 * a[i] * a[l],
                ),
            ];
            for (col, alpha, beta) in entries {
                let sum = alpha + beta;
                let dif = alpha - beta;
                jac[2 * i][2 * col] = sum.re;
                jac[2 * i][2 * col + 1] = -dif.im;
                jac[2 * i + 1][2 * col] = sum.im;
                jac[2 * i + 1][2 * col + 1] = dif.re;
            }
        }
        for col in 0..6 {
            let mut xp = x0.clone();
            xp[col] += eps;
            let fp = f_at(&xp);
            for row in 0..6 {
                let fd = (fp[row] - f0[row]) / eps;
                assert!(
                    (fd - jac[row][col]).abs() < 1e-6 * jac[row][col].abs().max(1.0),
                    "jacobian mismatch at ({row}, {col}): fd {fd} vs {}",
                    jac[row][col]
                );
            }
        }
    }

    #[test]
    fn reconstruct_zero_triple_is_homogeneous() {
        let (pc, s, sc, kc) = setup_025();
        let lc = landau_coefficients(&s, &pc, kc, sc, EvalMode::Classical).unwrap();
        let d = Domain::line(0.0, 2.0 * std::f64::consts::PI / kc, 33).unwrap();
        let w = reconstruct_field(&AmplitudeTriple::homogeneous(), &lc, &d).unwrap();
        for i in 0..d.nodes() {
            assert_relative_eq!(w.u[i], lc.base.u, epsilon = 1e-14);
            assert_relative_eq!(w.v[i], lc.base.v, epsilon = 1e-14);
        }
    }

    #[test]
    fn reconstruct_stripe_dominant_mode() {
        let (pc, s, sc, kc) = setup_025();
        let lc = landau_coefficients(&s, &pc, kc, sc - 0.002, EvalMode::Classical).unwrap();
        let (sp, _) = stripe_amplitudes(&lc).unwrap();
        let lx = 8.0 * std::f64::consts::PI / kc;
        let d = Domain::line(0.0, lx, 2049).unwrap();
        let w = reconstruct_field(&AmplitudeTriple::stripe(sp), &lc, &d).unwrap();
        // trapezoid projection onto cos(k xi); the quadratic terms live at
        // modes 0 and 2k, so the k-coefficient is exactly 2 S Phi_u
        let mut coef = 0.0;
        for i in 0..d.nodes() {
            let (x, _) = d.coords(i);
            coef += 2.0 * d.weight(i) * (w.u[i] - lc.base.u) * (kc * x).cos();
        }
        assert_relative_eq!(coef, 2.0 * sp * lc.phi[0].re, epsilon = 1e-8);
    }

    #[test]
    fn reconstruct_rejects_incompatible_domains() {
        let (pc, s, sc, kc) = setup_025();
        let lc = landau_coefficients(&s, &pc, kc, sc - 0.002, EvalMode::Classical).unwrap();
        let (sp, _) = stripe_amplitudes(&lc).unwrap();
        // extent not an integer half-period count
        let d = Domain::line(0.0, 10.0, 65).unwrap();
        match reconstruct_field(&AmplitudeTriple::stripe(sp), &lc, &d) {
            Err(Error::DomainMismatch(_)) => {}
            other => panic!("expected domain mismatch, got {other:?}"),
        }
        // hexagon on a 1D domain
        let (_, hm) = hexagon_amplitudes(&lc).unwrap();
        let d1 = Domain::line(0.0, 4.0 * std::f64::consts::PI / kc, 65).unwrap();
        match reconstruct_field(
            &AmplitudeTriple::hexagon(hm, PatternTag::HexagonMinus),
            &lc,
            &d1,
        ) {
            Err(Error::DomainMismatch(_)) => {}
            other => panic!("expected domain mismatch, got {other:?}"),
        }
    }

    #[test]
    fn sweep_csv_format() {
        let p = ParameterSet::standard(0.1, 0.25);
        let rows = coefficient_sweep(
            &p,
            &[0.21, 0.25],
            (0.05, 0.24),
            EvalMode::Classical,
            CubicVariant::AsPrinted,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].gamma < rows[1].gamma);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "gamma,sigma_c,k_c,c1,c2,c3,c4,c_f");
        assert_eq!(lines.count(), 2);
    }
}
