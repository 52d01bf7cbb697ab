//! Homogeneous steady states, their stability, and dispersion analysis.
//!
//! Spatially constant steady states satisfy g = h = 0. Adding the two
//! equations eliminates the consumption term and yields the linear relation
//!
//! ```text
//!   v = v0 - (m u - eps) / sigma
//! ```
//!
//! and substituting it back into g = 0 reduces the problem to the cubic
//! `u^3 + b u^2 + c u + d = 0` whose coefficients decompose linearly in
//! `gamma` and `sigma` (see [`CubicCoefficients`]). Stability against spatial
//! perturbations `exp(i k x)` is governed by the 2x2 eigenvalue problem for
//! `L(k) = J_f - D k^2` with `D = diag(1, delta)`; the four diagnostics
//!
//! ```text
//!   b1 = -g_u - h_v          b2 = g_u h_v - g_v h_u
//!   b3 = delta g_u + h_v     b4 = b3^2 - 4 delta b2
//! ```
//!
//! classify a state as stable, Turing unstable (stable kinetics destabilized
//! by diffusion at finite k), or space-independent unstable (already unstable
//! at k = 0).

use crate::kinetics::{derivatives, ParameterSet, StateVector};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt;
use std::io::Write;

/// Coefficients of the reduced cubic and their decomposition constants.
///
/// The assembled coefficients satisfy
///
/// ```text
///   b = b_g gamma + b_s sigma + b_0
///   c = c_g gamma + c_s sigma + c_sg sigma gamma + c_0
///   d = d_s sigma + d_0
/// ```
///
/// and the depressed-cubic auxiliaries are `p = c - b^2/3`,
/// `q = 2 b^3/27 + d - b c/3`.
#[derive(Debug, Clone, Copy)]
pub struct CubicCoefficients {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub b_g: f64,
    pub b_s: f64,
    pub b_0: f64,
    pub c_g: f64,
    pub c_s: f64,
    pub c_sg: f64,
    pub c_0: f64,
    pub d_s: f64,
    pub d_0: f64,
    pub p: f64,
    pub q: f64,
}

/// Stability classification of a homogeneous state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityKind {
    Stable,
    TuringUnstable,
    SpaceIndependentUnstable,
    NotReal,
    NotPositive,
    /// Some diagnostic sits on a classification boundary (within 1e-10).
    Indeterminate,
}

impl fmt::Display for StabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StabilityKind::Stable => "stable",
            StabilityKind::TuringUnstable => "turing_unstable",
            StabilityKind::SpaceIndependentUnstable => "space_independent_unstable",
            StabilityKind::NotReal => "not_real",
            StabilityKind::NotPositive => "not_positive",
            StabilityKind::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

/// Classification together with the diagnostics it was decided on.
#[derive(Debug, Clone, Copy)]
pub struct StabilityClass {
    pub kind: StabilityKind,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
}

/// One root of the reduced cubic with its nutrient value and classification.
#[derive(Debug, Clone, Copy)]
pub struct HomogeneousState {
    pub u: f64,
    pub v: f64,
    /// Root label 1, 2, or 3; descending in u when all three roots are real.
    pub index: u8,
    pub is_real: bool,
    pub is_positive: bool,
    pub stability: StabilityClass,
}

impl HomogeneousState {
    pub fn state(&self) -> StateVector {
        StateVector::new(self.u, self.v)
    }
}

/// Growth rates of a Fourier perturbation with wavenumber `k`.
#[derive(Debug, Clone, Copy)]
pub struct DispersionSample {
    pub k: f64,
    pub mu_plus: Complex64,
    pub mu_minus: Complex64,
}

/// Assembles the cubic coefficients and their decomposition constants.
pub fn cubic_coefficients(p: &ParameterSet) -> Result<CubicCoefficients> {
    if (p.m - 1.0).abs() < 1e-14 {
        return Err(Error::SingularParameters(
            "m = 1 makes the cubic reduction singular".into(),
        ));
    }
    if p.sigma <= 0.0 {
        return Err(Error::SingularParameters(format!(
            "sigma must be positive, got {}",
            p.sigma
        )));
    }
    let mm = p.m * (p.m - 1.0);
    let b_g = -p.k / (p.m - 1.0);
    let b_s = (p.v0 - p.v0 * p.m - p.m) / mm;
    let b_0 = (p.m * p.m * p.k + p.eps - 2.0 * p.m * p.eps) / mm;
    let c_g = p.eps * p.k / mm;
    let c_s = (p.v0 + 1.0) * (p.eps - p.m * p.k) / mm;
    let c_sg = p.v0 * p.k / mm;
    let c_0 = (-2.0 * p.m * p.eps * p.k + p.eps * p.eps) / mm;
    let d_s = p.eps * p.k * (p.v0 + 1.0) / mm;
    let d_0 = p.eps * p.eps * p.k / mm;

    let b = b_g * p.gamma + b_s * p.sigma + b_0;
    let c = c_g * p.gamma + c_s * p.sigma + c_sg * p.sigma * p.gamma + c_0;
    let d = d_s * p.sigma + d_0;
    Ok(CubicCoefficients {
        b,
        c,
        d,
        b_g,
        b_s,
        b_0,
        c_g,
        c_s,
        c_sg,
        c_0,
        d_s,
        d_0,
        p: c - b * b / 3.0,
        q: 2.0 * b * b * b / 27.0 + d - b * c / 3.0,
    })
}

/// Real roots of `t^3 + p t + q` shifted back by `-b/3`.
///
/// When all three roots are real the trigonometric form is used, which keeps
/// the ordering u1 > u2 > u3 by construction:
///
/// ```text
///   u1 =  sqrt(-4p/3) cos(arg)          - b/3
///   u2 = -sqrt(-4p/3) cos(arg + pi/3)   - b/3
///   u3 = -sqrt(-4p/3) cos(arg - pi/3)   - b/3
///   arg = 1/3 arccos(-q/2 sqrt(-27/p^3))
/// ```
///
/// Otherwise the single real root comes from the numerically stable Cardano
/// form (larger cube root first, partner by Vieta).
fn cubic_real_roots(co: &CubicCoefficients) -> Vec<f64> {
    let (p, q, b) = (co.p, co.q, co.b);
    if p < 0.0 {
        let raw = -q / 2.0 * (-27.0 / (p * p * p)).sqrt();
        // clamp floating-point drift at a double root where |raw| -> 1
        let clamped = if raw.abs() <= 1.0 + 1e-12 {
            raw.clamp(-1.0, 1.0)
        } else {
            raw
        };
        if clamped.abs() <= 1.0 {
            let arg = clamped.acos() / 3.0;
            let amp = (-4.0 * p / 3.0).sqrt();
            let u1 = amp * arg.cos() - b / 3.0;
            let u2 = -amp * (arg + std::f64::consts::FRAC_PI_3).cos() - b / 3.0;
            let u3 = -amp * (arg - std::f64::consts::FRAC_PI_3).cos() - b / 3.0;
            return vec![u1, u2, u3];
        }
    }
    // one real root: t = cbrt(-q/2 + s) + cbrt(-q/2 - s), s = sqrt(q^2/4 + p^3/27)
    let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let t1 = if -q / 2.0 + s >= 0.0 {
        (-q / 2.0 + s).cbrt()
    } else {
        (-q / 2.0 - s).cbrt()
    };
    // the partner cube root by Vieta avoids cancellation: t1 * t2 = -p/3
    let t = if t1.abs() > 1e-300 { t1 - p / (3.0 * t1) } else { 0.0 };
    vec![t - b / 3.0]
}

fn polish_root(co: &CubicCoefficients, mut u: f64) -> f64 {
    // two Newton steps on the cubic remove the last few ulps of drift
    for _ in 0..2 {
        let f = ((u + co.b) * u + co.c) * u + co.d;
        let df = (3.0 * u + 2.0 * co.b) * u + co.c;
        if df.abs() > 1e-300 {
            u -= f / df;
        }
    }
    u
}

/// All real homogeneous steady states at the given parameters, classified.
///
/// Returns three states when the cubic has three real roots (descending in u,
/// so v ascends by the linear relation) and one state with index 1 otherwise.
pub fn homogeneous_states(p: &ParameterSet) -> Result<Vec<HomogeneousState>> {
    let co = cubic_coefficients(p)?;
    let roots = cubic_real_roots(&co);
    let mut out = Vec::with_capacity(roots.len());
    for (i, &raw) in roots.iter().enumerate() {
        let u = polish_root(&co, raw);
        let v = p.v0 - (p.m * u - p.eps) / p.sigma;
        let mut s = HomogeneousState {
            u,
            v,
            index: (i + 1) as u8,
            is_real: true,
            is_positive: u >= 0.0 && v >= 0.0,
            stability: StabilityClass {
                kind: StabilityKind::Indeterminate,
                b1: f64::NAN,
                b2: f64::NAN,
                b3: f64::NAN,
                b4: f64::NAN,
            },
        };
        s.stability = classify_stability(&s, p)?;
        out.push(s);
    }
    Ok(out)
}

/// Diagnostics b1..b4 and the three-way classification at a real state.
///
/// Roots outside the positive quadrant are labeled without computing
/// derivatives: they can sit outside the kinetics domain (v <= -1 makes the
/// saturation term singular), and their stability is not meaningful anyway.
pub fn classify_stability(s: &HomogeneousState, p: &ParameterSet) -> Result<StabilityClass> {
    if !s.is_real || !s.is_positive {
        return Ok(StabilityClass {
            kind: if !s.is_real {
                StabilityKind::NotReal
            } else {
                StabilityKind::NotPositive
            },
            b1: f64::NAN,
            b2: f64::NAN,
            b3: f64::NAN,
            b4: f64::NAN,
        });
    }
    let d = derivatives(s.state(), p)?;
    let delta = p.delta();
    let b1 = -d.g_u - d.h_v;
    let b2 = d.g_u * d.h_v - d.g_v * d.h_u;
    let b3 = delta * d.g_u + d.h_v;
    let b4 = b3 * b3 - 4.0 * delta * b2;
    let kind = {
        // transitions are measure-zero; a diagnostic this close to zero means
        // the classification itself is not trustworthy
        const TOL: f64 = 1e-10;
        let on_boundary = |x: f64| x.abs() < TOL;
        if b1 > 0.0 && b2 > 0.0 && b3 > 0.0 && b4 > 0.0 {
            if on_boundary(b1) || on_boundary(b2) || on_boundary(b3) || on_boundary(b4) {
                StabilityKind::Indeterminate
            } else {
                StabilityKind::TuringUnstable
            }
        } else if b1 < 0.0 || b2 < 0.0 {
            if on_boundary(b1) || on_boundary(b2) {
                StabilityKind::Indeterminate
            } else {
                StabilityKind::SpaceIndependentUnstable
            }
        } else if b1 > 0.0 && b2 > 0.0 && (b3 < 0.0 || b4 < 0.0) {
            if on_boundary(b1) || on_boundary(b2) || (on_boundary(b3) && on_boundary(b4)) {
                StabilityKind::Indeterminate
            } else {
                StabilityKind::Stable
            }
        } else {
            StabilityKind::Indeterminate
        }
    };
    Ok(StabilityClass {
        kind,
        b1,
        b2,
        b3,
        b4,
    })
}

/// Eigenvalues of `L(k) = J_f - D k^2` by the trace/determinant formula with
/// a complex square root.
pub fn dispersion(s: &HomogeneousState, p: &ParameterSet, k: f64) -> Result<DispersionSample> {
    let d = derivatives(s.state(), p)?;
    let delta = p.delta();
    let k2 = k * k;
    let a11 = d.g_u - k2;
    let a22 = d.h_v - delta * k2;
    let tr = a11 + a22;
    let det = a11 * a22 - d.g_v * d.h_u;
    let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
    Ok(DispersionSample {
        k,
        mu_plus: Complex64::new(tr / 2.0, 0.0) + disc,
        mu_minus: Complex64::new(tr / 2.0, 0.0) - disc,
    })
}

/// The two non-negative wavenumbers where `det L(k)` vanishes, `k_minus <= k_plus`:
///
/// ```text
///   k_pm^2 = (delta g_u + h_v) / (2 delta)
///            +- sqrt( ((delta g_u + h_v)/(2 delta))^2 + (g_v h_u - g_u h_v)/delta )
/// ```
pub fn neutral_wavenumbers(s: &HomogeneousState, p: &ParameterSet) -> Result<(f64, f64)> {
    let cls = classify_stability(s, p)?;
    let delta = p.delta();
    if cls.b4 < 0.0 {
        return Err(Error::NoNeutralWavenumbers { sigma: p.sigma });
    }
    let half = cls.b3 / (2.0 * delta);
    let root = cls.b4.sqrt() / (2.0 * delta);
    let (k2m, k2p) = (half - root, half + root);
    if k2m < 0.0 || k2p < 0.0 {
        return Err(Error::NoNeutralWavenumbers { sigma: p.sigma });
    }
    Ok((k2m.sqrt(), k2p.sqrt()))
}

/// Keeps root labels consistent through parameter changes: when the real
/// root count drops, the survivor takes the label of the nearest previous u.
pub fn nearest_state<'a>(
    states: &'a [HomogeneousState],
    reference_u: f64,
) -> &'a HomogeneousState {
    states
        .iter()
        .min_by(|a, b| {
            (a.u - reference_u)
                .abs()
                .partial_cmp(&(b.u - reference_u).abs())
                .unwrap()
        })
        .expect("homogeneous_states returns at least one root")
}

fn b4_at(p: &ParameterSet, sigma: f64, track_u: Option<f64>) -> Result<(f64, f64)> {
    let ps = p.with_sigma(sigma);
    let states = homogeneous_states(&ps)?;
    let s = match track_u {
        Some(u) => nearest_state(&states, u),
        None => &states[0],
    };
    let cls = classify_stability(s, &ps)?;
    Ok((cls.b4, cls.b3))
}

/// Locates a Turing onset by bisecting the sign change of b4 over the sigma
/// bracket, tracking the first root (u1). Returns `(sigma_c, k_c)` with
/// `k_c = sqrt(b3 / (2 delta))`, the double root of `det L(k) = 0` where also
/// `d/dk det L(k) = 0`.
pub fn critical_point(p: &ParameterSet, bracket: (f64, f64)) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = bracket;
    if lo >= hi {
        return Err(Error::BracketFailed { lo, hi });
    }
    let (mut flo, _) = b4_at(p, lo, None)?;
    let (fhi, _) = b4_at(p, hi, None)?;
    if flo == 0.0 {
        flo = f64::EPSILON;
    }
    if flo * fhi > 0.0 {
        return Err(Error::BracketFailed { lo, hi });
    }
    // bisect to |delta sigma| < 1e-8, well below the acceptance tolerances
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        let (fm, _) = b4_at(p, mid, None)?;
        if fm * flo <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    let sigma_c = 0.5 * (lo + hi);
    let (_, b3) = b4_at(p, sigma_c, None)?;
    if b3 <= 0.0 {
        return Err(Error::Numeric(format!(
            "b3 = {b3} <= 0 at sigma = {sigma_c}: sign change is not a Turing onset"
        )));
    }
    Ok((sigma_c, (b3 / (2.0 * p.delta())).sqrt()))
}

/// One scan cell: all three root slots at a `(sigma, gamma)` grid point.
/// Missing (complex) roots appear with NaN values and class NotReal.
#[derive(Debug, Clone)]
pub struct ScanCell {
    pub sigma: f64,
    pub gamma: f64,
    /// Entries for root indices 1, 2, 3.
    pub roots: [ScanRoot; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct ScanRoot {
    pub u: f64,
    pub v: f64,
    pub kind: StabilityKind,
}

/// Raster over the sigma-gamma plane, row-major with sigma varying fastest.
#[derive(Debug, Clone)]
pub struct PlaneScan {
    pub sigma_axis: Vec<f64>,
    pub gamma_axis: Vec<f64>,
    pub cells: Vec<ScanCell>,
}

/// Classifies all three roots on a raster of cell centers over
/// `sigma_range x gamma_range`. Cell centers keep the open boundaries
/// (sigma = 0 is singular) out of the sample set.
pub fn plane_scan(
    base: &ParameterSet,
    sigma_range: (f64, f64),
    gamma_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<PlaneScan> {
    let (ns, ng) = resolution;
    if ns == 0 || ng == 0 {
        return Err(Error::InvalidConfig("scan resolution must be positive".into()));
    }
    let centers = |range: (f64, f64), n: usize| -> Vec<f64> {
        let step = (range.1 - range.0) / n as f64;
        (0..n).map(|i| range.0 + (i as f64 + 0.5) * step).collect()
    };
    let sigma_axis = centers(sigma_range, ns);
    let gamma_axis = centers(gamma_range, ng);

    let cells: Vec<ScanCell> = gamma_axis
        .par_iter()
        .flat_map_iter(|&gamma| {
            let sigma_axis = &sigma_axis;
            sigma_axis.iter().map(move |&sigma| {
                let p = ParameterSet {
                    sigma,
                    gamma,
                    ..*base
                };
                let empty = ScanRoot {
                    u: f64::NAN,
                    v: f64::NAN,
                    kind: StabilityKind::NotReal,
                };
                let mut roots = [empty; 3];
                if let Ok(states) = homogeneous_states(&p) {
                    for s in states {
                        roots[(s.index - 1) as usize] = ScanRoot {
                            u: s.u,
                            v: s.v,
                            kind: s.stability.kind,
                        };
                    }
                }
                ScanCell { sigma, gamma, roots }
            })
        })
        .collect();

    Ok(PlaneScan {
        sigma_axis,
        gamma_axis,
        cells,
    })
}

impl PlaneScan {
    /// Cell at raster position (sigma index, gamma index).
    pub fn cell(&self, is: usize, ig: usize) -> &ScanCell {
        &self.cells[ig * self.sigma_axis.len() + is]
    }

    /// Writes the raster as CSV, one row per cell with all three root slots:
    /// `sigma,gamma,u1,v1,class1,u2,v2,class2,u3,v3,class3`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "sigma,gamma,u1,v1,class1,u2,v2,class2,u3,v3,class3"
        )?;
        for cell in &self.cells {
            write!(out, "{},{}", cell.sigma, cell.gamma)?;
            for root in &cell.roots {
                write!(out, ",{},{},{}", root.u, root.v, root.kind)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
