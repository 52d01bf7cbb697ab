//! Newton correction and pseudo-arclength continuation of steady states.
//!
//! A branch is a curve of solutions of `residual(w, sigma) = 0` in the
//! product space of grid functions and the balancing rate. Steps use a
//! secant predictor and a bordered Newton corrector; the border solves reuse
//! the banded factorization of the grid Jacobian, so each iteration costs
//! one factorization and two triangular solves. Inner products weight the
//! field part by `1/N` so step sizes mean the same thing on every grid.
//!
//! Folds are located by bisecting the oriented parameter component of the
//! branch tangent (zero exactly at a turning point) along arclength;
//! eigenvalue crossings by bisecting the unstable-eigenvalue count until the
//! crossing rate sits below 1e-8. Both refinements make the reported
//! locations independent of the step size used to find them.

use crate::homogeneous::homogeneous_states;
use crate::kinetics::ParameterSet;
use crate::linalg::{leading_eigenpairs, ArnoldiOptions, EigenPair};
use crate::pde::{
    assemble_laplacian, jacobian_with, norms, residual_with, Domain, Field, NormSet,
    SparseOperator,
};
use crate::{Error, Result};
use num_complex::Complex64;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Step control, tolerances, and eigensolver plumbing for one run.
#[derive(Debug, Clone)]
pub struct ContinuationSettings {
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    /// First step length and the adaptive bounds.
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    /// Accepted points before the run stops on its own.
    pub max_steps: usize,
    /// Leading eigenvalues kept per point.
    pub n_eigs: usize,
    pub eig_shift: f64,
    pub krylov_dim: usize,
    pub seed: u64,
    /// Continuation stops when sigma leaves this interval.
    pub sigma_bounds: (f64, f64),
    /// Detect and terminate at a junction with the homogeneous branch.
    pub stop_on_homogeneous: bool,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings {
            newton_tol: 1e-8,
            max_newton_iter: 25,
            ds0: 1e-3,
            ds_min: 1e-6,
            ds_max: 0.01,
            max_steps: 400,
            n_eigs: 8,
            eig_shift: 0.5,
            krylov_dim: 80,
            seed: 7,
            sigma_bounds: (1e-4, 0.5),
            stop_on_homogeneous: true,
        }
    }
}

/// Role of a point within its branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointTag {
    Regular,
    Fold,
    Bifurcation,
}

impl fmt::Display for PointTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PointTag::Regular => "regular",
            PointTag::Fold => "fold",
            PointTag::Bifurcation => "bifurcation",
        };
        write!(f, "{s}")
    }
}

/// One converged solution along a branch.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub sigma: f64,
    pub field: Field,
    pub norms: NormSet,
    /// Eigenvalues with real part above 1e-12.
    pub n_unstable: usize,
    pub tag: PointTag,
    /// Leading eigenvalues, descending real part.
    pub eigenvalues: Vec<Complex64>,
    /// Real crossing eigenvector, stored at localized bifurcations for
    /// branch switching; scaled norm one.
    pub crossing_mode: Option<Vec<f64>>,
}

/// Where a switched branch came from.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub parent: String,
    pub bifurcation_index: usize,
    pub sign: i8,
}

/// Why a continuation run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    MaxSteps,
    StepUnderflow { sigma: f64 },
    Homogeneous { sigma: f64 },
    ParameterBound { sigma: f64 },
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::MaxSteps => write!(f, "max steps"),
            Termination::StepUnderflow { sigma } => {
                write!(f, "step underflow at sigma = {sigma}")
            }
            Termination::Homogeneous { sigma } => {
                write!(f, "merged with the homogeneous branch at sigma = {sigma}")
            }
            Termination::ParameterBound { sigma } => {
                write!(f, "parameter bound at sigma = {sigma}")
            }
        }
    }
}

/// Ordered continuation output.
#[derive(Debug, Clone)]
pub struct Branch {
    pub label: String,
    pub provenance: Option<Provenance>,
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
}

/// Inner product with the field block weighted by `1/N`, so that parameter
/// and field displacements are commensurate across grids.
fn scaled_dot(w1: &[f64], s1: f64, w2: &[f64], s2: f64) -> f64 {
    let n = w1.len() as f64;
    let wd: f64 = w1.iter().zip(w2).map(|(a, b)| a * b).sum();
    wd / n + s1 * s2
}

fn scaled_norm(w: &[f64], s: f64) -> f64 {
    scaled_dot(w, s, w, s).sqrt()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `d residual / d sigma` at a field: the nutrient equation carries the
/// relaxation term `sigma (v0 - v)`, the bacteria equation none.
fn sigma_derivative(w: &Field, p: &ParameterSet) -> Vec<f64> {
    let n = w.domain.nodes();
    let mut out = vec![0.0; 2 * n];
    for i in 0..n {
        out[2 * i + 1] = p.v0 - w.v[i];
    }
    out
}

/// Constant field at one homogeneous root (1-based index as in the cubic
/// root ordering).
pub fn homogeneous_start(p: &ParameterSet, root_index: u8, domain: &Domain) -> Result<Field> {
    let states = homogeneous_states(p)?;
    let s = states
        .iter()
        .find(|s| s.index == root_index && s.is_real)
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "no real homogeneous root with index {root_index} at sigma = {}",
                p.sigma
            ))
        })?;
    Ok(Field::constant(domain, s.u, s.v))
}

/// Damped Newton iteration on `residual(w, sigma) = 0` at fixed parameters.
///
/// Returns the converged field and the number of iterations taken; zero
/// means the guess already satisfied the tolerance.
pub fn newton_correct(
    guess: &Field,
    p: &ParameterSet,
    tol: f64,
    max_iter: usize,
) -> Result<(Field, usize)> {
    let lap = assemble_laplacian(&guess.domain);
    newton_correct_with(&lap, guess, p, tol, max_iter)
}

pub fn newton_correct_with(
    lap: &SparseOperator,
    guess: &Field,
    p: &ParameterSet,
    tol: f64,
    max_iter: usize,
) -> Result<(Field, usize)> {
    let mut w = guess.clone();
    let mut res_norm = max_abs(&residual_with(lap, &w, p)?.pack());
    for it in 0..max_iter {
        if res_norm < tol {
            return Ok((w, it));
        }
        let r = residual_with(lap, &w, p)?.pack();
        let mut band = jacobian_with(lap, &w, p)?.to_banded();
        band.lu_factor()
            .map_err(|e| Error::Numeric(format!("newton jacobian: {e}")))?;
        let dw = band.solve(&r);
        let base = w.pack();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..9 {
            let cand: Vec<f64> = base.iter().zip(&dw).map(|(x, d)| x - alpha * d).collect();
            let wf = Field::unpack(&w.domain, &cand, w.sigma.clone());
            if let Ok(rc) = residual_with(lap, &wf, p) {
                let rn = max_abs(&rc.pack());
                if rn < res_norm {
                    w = wf;
                    res_norm = rn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                method: "newton",
                iterations: it,
                residual: res_norm,
            });
        }
    }
    if res_norm < tol {
        Ok((w, max_iter))
    } else {
        Err(Error::NoConvergence {
            method: "newton",
            iterations: max_iter,
            residual: res_norm,
        })
    }
}

/// The `n_eigs` eigenvalues of the steady-state Jacobian with largest real
/// part, by shift-invert Arnoldi on the banded factorization.
pub fn leading_spectrum(
    w: &Field,
    p: &ParameterSet,
    settings: &ContinuationSettings,
) -> Result<Vec<EigenPair>> {
    let lap = assemble_laplacian(&w.domain);
    leading_spectrum_with(&lap, w, p, settings)
}

fn leading_spectrum_with(
    lap: &SparseOperator,
    w: &Field,
    p: &ParameterSet,
    settings: &ContinuationSettings,
) -> Result<Vec<EigenPair>> {
    let n = 2 * w.domain.nodes();
    let jac = jacobian_with(lap, w, p)?;
    let attempt = |shift: f64, krylov: usize| -> Result<Vec<EigenPair>> {
        let mut shifted = jac.clone();
        shifted.shift_identity(-shift);
        let mut band = shifted.to_banded();
        band.lu_factor()
            .map_err(|e| Error::Numeric(format!("spectrum shift {shift}: {e}")))?;
        let opts = ArnoldiOptions {
            n_pairs: settings.n_eigs.min(n),
            shift,
            krylov_dim: krylov.min(n),
            seed: settings.seed,
            tol: 1e-9,
            ..ArnoldiOptions::default()
        };
        leading_eigenpairs(n, |x, y| y.copy_from_slice(&band.solve(x)), &opts)
    };
    // clustered spectra converge faster the nearer the shift sits to the
    // rightmost eigenvalue, so the retries move inward with a larger basis
    attempt(settings.eig_shift, settings.krylov_dim)
        .or_else(|_| attempt(0.4 * settings.eig_shift + 0.013, settings.krylov_dim * 2))
        .or_else(|_| attempt(0.16 * settings.eig_shift + 0.007, settings.krylov_dim * 3))
}

fn count_unstable(eigenvalues: &[Complex64]) -> usize {
    eigenvalues.iter().filter(|z| z.re > 1e-12).count()
}

/// Bordered Newton corrector: solves `residual(w, sigma) = 0` together with
/// the plane condition `<(w, sigma) - predictor, tangent> = 0` in the scaled
/// inner product. Each iteration factors the grid Jacobian once and reuses
/// it for the two border solves.
struct Corrector<'a> {
    lap: &'a SparseOperator,
    domain: &'a Domain,
    p0: &'a ParameterSet,
    tol: f64,
    max_iter: usize,
}

impl Corrector<'_> {
    fn correct(
        &self,
        pred_w: &[f64],
        pred_sigma: f64,
        t_w: &[f64],
        t_sigma: f64,
    ) -> Result<(Vec<f64>, f64, usize)> {
        let mut w = pred_w.to_vec();
        let mut sigma = pred_sigma;
        let mut best = f64::INFINITY;
        for it in 0..self.max_iter {
            let field = Field::unpack(self.domain, &w, None);
            let p = self.p0.with_sigma(sigma);
            let r = residual_with(self.lap, &field, &p)?.pack();
            let plane = scaled_dot(
                &w.iter().zip(pred_w).map(|(a, b)| a - b).collect::<Vec<_>>(),
                sigma - pred_sigma,
                t_w,
                t_sigma,
            );
            let err = max_abs(&r).max(plane.abs());
            if err < self.tol {
                return Ok((w, sigma, it));
            }
            if err > 1e4 * best.max(1.0) {
                break;
            }
            best = best.min(err);
            let mut band = jacobian_with(self.lap, &field, &p)?.to_banded();
            band.lu_factor()
                .map_err(|e| Error::Numeric(format!("corrector jacobian: {e}")))?;
            let b = band.solve(&r);
            let r_sigma = sigma_derivative(&field, &p);
            let a = band.solve(&r_sigma);
            let denom = t_sigma - scaled_dot(t_w, 0.0, &a, 0.0);
            if denom.abs() < 1e-14 {
                return Err(Error::Numeric(
                    "bordered corrector: singular border".into(),
                ));
            }
            let dsigma = (scaled_dot(t_w, 0.0, &b, 0.0) - plane) / denom;
            for (wi, (bi, ai)) in w.iter_mut().zip(b.iter().zip(&a)) {
                *wi -= bi + dsigma * ai;
            }
            sigma += dsigma;
        }
        Err(Error::NoConvergence {
            method: "bordered corrector",
            iterations: self.max_iter,
            residual: best,
        })
    }

    /// Oriented parameter slope along the branch at a converged point:
    /// positive when sigma grows in the direction of `(t_w, t_sigma)`.
    /// Proportional to `d sigma / d s`, so its zero marks a fold.
    fn oriented_dsigma(&self, w: &[f64], sigma: f64, t_w: &[f64], t_sigma: f64) -> Result<f64> {
        let field = Field::unpack(self.domain, w, None);
        let p = self.p0.with_sigma(sigma);
        let mut band = jacobian_with(self.lap, &field, &p)?.to_banded();
        band.lu_factor()
            .map_err(|e| Error::Numeric(format!("tangent jacobian: {e}")))?;
        let a = band.solve(&sigma_derivative(&field, &p));
        Ok(t_sigma - scaled_dot(t_w, 0.0, &a, 0.0))
    }
}

fn make_point(
    lap: &SparseOperator,
    domain: &Domain,
    w: &[f64],
    sigma: f64,
    p0: &ParameterSet,
    settings: &ContinuationSettings,
    tag: PointTag,
) -> Result<BranchPoint> {
    let field = Field::unpack(domain, w, None);
    let p = p0.with_sigma(sigma);
    let pairs = leading_spectrum_with(lap, &field, &p, settings)?;
    let eigenvalues: Vec<Complex64> = pairs.iter().map(|e| e.value).collect();
    let n_unstable = count_unstable(&eigenvalues);
    Ok(BranchPoint {
        sigma,
        norms: norms(&field),
        field,
        n_unstable,
        tag,
        eigenvalues,
        crossing_mode: None,
    })
}

/// Signed pattern amplitude used to detect junctions with the homogeneous
/// branch: projection of the deviation from the nodal mean onto a fixed
/// reference deviation. It changes sign exactly when the branch passes
/// through zero amplitude.
fn signed_amplitude(w: &[f64], reference: Option<&[f64]>) -> (f64, Vec<f64>) {
    let n = w.len();
    let half = n / 2;
    let mut mean_u = 0.0;
    let mut mean_v = 0.0;
    for i in 0..half {
        mean_u += w[2 * i];
        mean_v += w[2 * i + 1];
    }
    mean_u /= half as f64;
    mean_v /= half as f64;
    let dev: Vec<f64> = (0..n)
        .map(|j| w[j] - if j % 2 == 0 { mean_u } else { mean_v })
        .collect();
    match reference {
        Some(r) => (scaled_dot(&dev, 0.0, r, 0.0), dev),
        None => (scaled_norm(&dev, 0.0), dev),
    }
}

enum FirstStep<'a> {
    /// Natural continuation: fixed-sigma Newton at `sigma + direction * ds`.
    Natural(f64),
    /// Pseudo-arclength along a given scaled-unit tangent (switched starts).
    Tangent(&'a [f64], f64),
}

/// Pseudo-arclength continuation from a converged start at `p.sigma`.
///
/// Accepted points carry spectra and stability tags. Folds and eigenvalue
/// crossings found between consecutive points are localized by arclength
/// bisection and inserted as tagged points, so their reported locations do
/// not depend on the step size.
pub fn continue_branch(
    start: &Field,
    p: &ParameterSet,
    direction: f64,
    label: &str,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    run_continuation(start, p, FirstStep::Natural(direction), label, settings)
}

/// Continuation whose first step follows a caller-supplied tangent with zero
/// parameter component, as produced by [`switch_branch`].
pub fn continue_switched(
    start: &BranchPoint,
    tangent_w: &[f64],
    p: &ParameterSet,
    label: &str,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    let p_here = p.with_sigma(start.sigma);
    run_continuation(
        &start.field,
        &p_here,
        FirstStep::Tangent(tangent_w, 0.0),
        label,
        settings,
    )
}

/// Resumes a branch from two consecutive saved points. The first predictor
/// uses their secant as tangent, so with a fixed step size the resumed run
/// retraces the original point sequence. `p` carries the rate of `cur`.
pub fn continue_restarted(
    prev: &Field,
    prev_sigma: f64,
    cur: &Field,
    p: &ParameterSet,
    label: &str,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    if prev.domain.nodes() != cur.domain.nodes() {
        return Err(Error::DomainMismatch(
            "restart points live on different grids".into(),
        ));
    }
    let wp = prev.pack();
    let wc = cur.pack();
    let dw: Vec<f64> = wc.iter().zip(&wp).map(|(a, b)| a - b).collect();
    run_continuation(
        cur,
        p,
        FirstStep::Tangent(&dw, p.sigma - prev_sigma),
        label,
        settings,
    )
}

fn run_continuation(
    start: &Field,
    p: &ParameterSet,
    first: FirstStep,
    label: &str,
    settings: &ContinuationSettings,
) -> Result<Branch> {
    if start.sigma.is_some() {
        return Err(Error::InvalidConfig(
            "continuation needs a constant balancing rate, not a per-node profile".into(),
        ));
    }
    let domain = start.domain.clone();
    let lap = assemble_laplacian(&domain);
    let corr = Corrector {
        lap: &lap,
        domain: &domain,
        p0: p,
        tol: settings.newton_tol,
        max_iter: settings.max_newton_iter,
    };

    let sigma0 = p.sigma;
    let (w0_field, _) = newton_correct_with(&lap, start, p, settings.newton_tol, settings.max_newton_iter)?;
    let w0 = w0_field.pack();
    let mut points = vec![make_point(&lap, &domain, &w0, sigma0, p, settings, PointTag::Regular)?];

    let branch = |points: Vec<BranchPoint>, termination: Termination| Branch {
        label: label.to_string(),
        provenance: None,
        points,
        termination,
    };

    // reference deviation for junction detection, set at the first point
    // with visible pattern amplitude
    let mut reference: Option<Vec<f64>> = None;
    let mut amp_max = 0.0f64;
    let update_reference = |w: &[f64], reference: &mut Option<Vec<f64>>| -> f64 {
        let (amp, dev) = signed_amplitude(w, reference.as_deref());
        if reference.is_none() && amp > 1e-4 {
            let nrm = scaled_norm(&dev, 0.0);
            *reference = Some(dev.iter().map(|x| x / nrm).collect());
            return nrm;
        }
        amp
    };
    let mut amp_prev = update_reference(&w0, &mut reference);
    amp_max = amp_max.max(amp_prev.abs());

    let mut ds = settings.ds0.clamp(settings.ds_min, settings.ds_max);

    // first step
    let (mut prev, mut cur): ((Vec<f64>, f64), (Vec<f64>, f64));
    match first {
        FirstStep::Natural(direction) => {
            let dir = if direction < 0.0 { -1.0 } else { 1.0 };
            loop {
                let sig1 = sigma0 + dir * ds;
                let p1 = p.with_sigma(sig1);
                match newton_correct_with(&lap, &w0_field, &p1, settings.newton_tol, settings.max_newton_iter)
                {
                    Ok((w1, _)) => {
                        prev = (w0.clone(), sigma0);
                        cur = (w1.pack(), sig1);
                        break;
                    }
                    Err(_) => {
                        ds *= 0.5;
                        if ds < settings.ds_min {
                            return Ok(branch(points, Termination::StepUnderflow { sigma: sigma0 }));
                        }
                    }
                }
            }
        }
        FirstStep::Tangent(t_w, t_sigma) => {
            let nrm = scaled_norm(t_w, t_sigma);
            let tw: Vec<f64> = t_w.iter().map(|x| x / nrm).collect();
            let ts = t_sigma / nrm;
            loop {
                let pred: Vec<f64> = w0.iter().zip(&tw).map(|(x, t)| x + ds * t).collect();
                match corr.correct(&pred, sigma0 + ds * ts, &tw, ts) {
                    Ok((w1, sig1, _)) => {
                        prev = (w0.clone(), sigma0);
                        cur = (w1, sig1);
                        break;
                    }
                    Err(_) => {
                        ds *= 0.5;
                        if ds < settings.ds_min {
                            return Ok(branch(points, Termination::StepUnderflow { sigma: sigma0 }));
                        }
                    }
                }
            }
        }
    }
    let mut q1 = make_point(&lap, &domain, &cur.0, cur.1, p, settings, PointTag::Regular)?;
    // an eigenvalue crossing can land inside the first step too; localize
    // it along the secant from the seed, as the main loop does
    if q1.n_unstable != points[0].n_unstable {
        let mut t_w: Vec<f64> = cur.0.iter().zip(&prev.0).map(|(a, b)| a - b).collect();
        let mut t_sigma = cur.1 - prev.1;
        let gap = scaled_norm(&t_w, t_sigma);
        if gap > 1e-15 {
            for x in &mut t_w {
                *x /= gap;
            }
            t_sigma /= gap;
            if let Ok(bp) = refine_crossing(
                &corr, &lap, &domain, p, settings, &prev.0, prev.1, &t_w, t_sigma, gap,
                points[0].n_unstable, true,
            ) {
                points.push(bp);
            } else {
                q1.tag = PointTag::Bifurcation;
            }
        } else {
            q1.tag = PointTag::Bifurcation;
        }
    }
    points.push(q1);
    {
        let a = update_reference(&cur.0, &mut reference);
        amp_max = amp_max.max(a.abs());
        amp_prev = a;
    }

    while points.len() < settings.max_steps {
        // secant tangent
        let mut t_w: Vec<f64> = cur.0.iter().zip(&prev.0).map(|(a, b)| a - b).collect();
        let mut t_sigma = cur.1 - prev.1;
        let gap = scaled_norm(&t_w, t_sigma);
        if gap < 1e-15 {
            return Ok(branch(points, Termination::StepUnderflow { sigma: cur.1 }));
        }
        for x in &mut t_w {
            *x /= gap;
        }
        t_sigma /= gap;

        // predictor-corrector with step halving
        let mut stepped = None;
        while ds >= settings.ds_min {
            let pred: Vec<f64> = cur.0.iter().zip(&t_w).map(|(x, t)| x + ds * t).collect();
            match corr.correct(&pred, cur.1 + ds * t_sigma, &t_w, t_sigma) {
                Ok((w, sigma, iters)) => {
                    stepped = Some((w, sigma, iters, ds));
                    break;
                }
                Err(_) => ds *= 0.5,
            }
        }
        let Some((w_new, sigma_new, iters, ds_used)) = stepped else {
            return Ok(branch(points, Termination::StepUnderflow { sigma: cur.1 }));
        };
        if iters <= 4 {
            ds = (ds * 1.4).min(settings.ds_max);
        }

        let mut q = make_point(&lap, &domain, &w_new, sigma_new, p, settings, PointTag::Regular)?;

        // fold: the sigma direction reverses across the new point
        let d_prev = cur.1 - prev.1;
        let d_new = sigma_new - cur.1;
        let cur_unstable = points.last().unwrap().n_unstable;
        if d_prev * d_new < 0.0 {
            let back = -scaled_norm(
                &cur.0.iter().zip(&prev.0).map(|(a, b)| a - b).collect::<Vec<_>>(),
                d_prev,
            );
            if let Ok(fold) = refine_fold(
                &corr, &cur.0, cur.1, &t_w, t_sigma, back, ds_used,
            ) {
                let fp = make_point(&lap, &domain, &fold.0, fold.1, p, settings, PointTag::Fold)?;
                // order by arclength: negative offsets precede `cur`
                let at = if fold.2 < 0.0 { points.len() - 1 } else { points.len() };
                points.insert(at, fp);
            } else {
                q.tag = PointTag::Fold;
            }
        } else if q.n_unstable != cur_unstable {
            // eigenvalue crossing without a fold: localize the first change
            // from the left; a jump of two gets the rightmost change too
            if let Ok(bp) = refine_crossing(
                &corr, &lap, &domain, p, settings, &cur.0, cur.1, &t_w, t_sigma, ds_used,
                cur_unstable, true,
            ) {
                points.push(bp);
            } else {
                q.tag = PointTag::Bifurcation;
            }
            if q.n_unstable.abs_diff(cur_unstable) > 1 {
                if let Ok(bp) = refine_crossing(
                    &corr, &lap, &domain, p, settings, &cur.0, cur.1, &t_w, t_sigma, ds_used,
                    q.n_unstable, false,
                ) {
                    points.push(bp);
                }
            }
        }

        let amp_new = update_reference(&w_new, &mut reference);
        amp_max = amp_max.max(amp_new.abs());
        // junction with the homogeneous branch: the signed amplitude flips
        if settings.stop_on_homogeneous
            && reference.is_some()
            && amp_max > 1e-4
            && amp_prev * amp_new < 0.0
            && amp_prev.abs().min(amp_new.abs()) < 0.5 * amp_max
        {
            let sigma_end;
            if let Ok(end) = refine_junction(
                &corr, &cur.0, cur.1, amp_prev, reference.as_deref().unwrap(),
            ) {
                let ep =
                    make_point(&lap, &domain, &end.0, end.1, p, settings, PointTag::Bifurcation)?;
                sigma_end = ep.sigma;
                points.push(ep);
            } else {
                q.tag = PointTag::Bifurcation;
                sigma_end = q.sigma;
                points.push(q);
            }
            return Ok(branch(points, Termination::Homogeneous { sigma: sigma_end }));
        }
        amp_prev = amp_new;

        points.push(q);
        prev = cur;
        cur = (w_new, sigma_new);

        if cur.1 < settings.sigma_bounds.0 || cur.1 > settings.sigma_bounds.1 {
            return Ok(branch(points, Termination::ParameterBound { sigma: cur.1 }));
        }
    }
    Ok(branch(points, Termination::MaxSteps))
}

/// Bisects the oriented parameter slope to a turning point. `lo` and `hi`
/// are arclength offsets from the base point along its tangent; the slope
/// has opposite signs at the ends. Returns the fold point and its offset.
fn refine_fold(
    corr: &Corrector,
    base_w: &[f64],
    base_sigma: f64,
    t_w: &[f64],
    t_sigma: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<(Vec<f64>, f64, f64)> {
    let eval = |s: f64| -> Result<(Vec<f64>, f64, f64)> {
        let pred: Vec<f64> = base_w.iter().zip(t_w).map(|(x, t)| x + s * t).collect();
        let (w, sigma, _) = corr.correct(&pred, base_sigma + s * t_sigma, t_w, t_sigma)?;
        let slope = corr.oriented_dsigma(&w, sigma, t_w, t_sigma)?;
        Ok((w, sigma, slope))
    };
    let (_, _, mut g_lo) = eval(lo)?;
    let (_, _, g_hi) = eval(hi)?;
    if g_lo * g_hi > 0.0 {
        return Err(Error::BracketFailed { lo, hi });
    }
    let mut out = None;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (w, sigma, g) = eval(mid)?;
        if g * g_lo > 0.0 {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
        out = Some((w, sigma, mid));
        if hi - lo < 1e-8 {
            break;
        }
    }
    out.ok_or(Error::BracketFailed { lo, hi })
}

/// Bisects the unstable-eigenvalue count to an eigenvalue crossing between a
/// base point and the point one step of length `span` along the tangent,
/// then keeps bisecting until the crossing rate is below 1e-8. `from_left`
/// selects which side's count defines the change being chased.
#[allow(clippy::too_many_arguments)]
fn refine_crossing(
    corr: &Corrector,
    lap: &SparseOperator,
    domain: &Domain,
    p: &ParameterSet,
    settings: &ContinuationSettings,
    base_w: &[f64],
    base_sigma: f64,
    t_w: &[f64],
    t_sigma: f64,
    span: f64,
    count_ref: usize,
    from_left: bool,
) -> Result<BranchPoint> {
    let eval = |s: f64| -> Result<(Vec<f64>, f64, Vec<EigenPair>)> {
        let pred: Vec<f64> = base_w.iter().zip(t_w).map(|(x, t)| x + s * t).collect();
        let (w, sigma, _) = corr.correct(&pred, base_sigma + s * t_sigma, t_w, t_sigma)?;
        let field = Field::unpack(domain, &w, None);
        let pairs = leading_spectrum_with(lap, &field, &p.with_sigma(sigma), settings)?;
        Ok((w, sigma, pairs))
    };
    let mut lo = 0.0;
    let mut hi = span;
    let mut best: Option<(Vec<f64>, f64, Vec<EigenPair>)> = None;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (w, sigma, pairs) = eval(mid)?;
        let values: Vec<Complex64> = pairs.iter().map(|e| e.value).collect();
        let n_mid = count_unstable(&values);
        let matches_ref = n_mid == count_ref;
        // chase the boundary of the reference side
        if matches_ref == from_left {
            lo = mid;
        } else {
            hi = mid;
        }
        let crossing = values
            .iter()
            .map(|z| z.re.abs())
            .fold(f64::INFINITY, f64::min);
        best = Some((w, sigma, pairs));
        if crossing < 1e-8 || (hi - lo) < 1e-10 {
            break;
        }
    }
    let (w, sigma, pairs) = best.ok_or(Error::BracketFailed { lo, hi })?;
    // crossing eigenvector: smallest |Re| pair, rotated real and scaled
    let cross = pairs
        .iter()
        .min_by(|a, b| a.value.re.abs().partial_cmp(&b.value.re.abs()).unwrap())
        .ok_or_else(|| Error::Numeric("empty spectrum at crossing".into()))?;
    let lead = cross
        .vector
        .iter()
        .cloned()
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .unwrap_or(Complex64::new(1.0, 0.0));
    let rot = lead.conj() / lead.norm();
    let mut mode: Vec<f64> = cross.vector.iter().map(|z| (z * rot).re).collect();
    let nrm = scaled_norm(&mode, 0.0);
    for x in &mut mode {
        *x /= nrm;
    }
    let field = Field::unpack(domain, &w, None);
    let eigenvalues: Vec<Complex64> = pairs.iter().map(|e| e.value).collect();
    Ok(BranchPoint {
        sigma,
        norms: norms(&field),
        field,
        n_unstable: count_unstable(&eigenvalues),
        tag: PointTag::Bifurcation,
        eigenvalues,
        crossing_mode: Some(mode),
    })
}

/// Walks a pattern branch down to (numerically) zero amplitude at its
/// junction with the homogeneous branch. The corrector plane pins the
/// projection onto the reference deviation, which keeps Newton off the
/// homogeneous branch itself; near the junction the parameter depends on
/// the pinned amplitude only quadratically, so the returned sigma is the
/// junction value to well below the Newton tolerance.
fn refine_junction(
    corr: &Corrector,
    base_w: &[f64],
    base_sigma: f64,
    alpha_base: f64,
    reference: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let mut w = base_w.to_vec();
    let mut sigma = base_sigma;
    let mut alpha = alpha_base;
    let target = 1e-7;
    while alpha.abs() > target {
        let mut next = alpha / 8.0;
        if next.abs() < target {
            next = alpha.signum() * target;
        }
        let shift = next - alpha;
        let pred: Vec<f64> = w.iter().zip(reference).map(|(x, r)| x + shift * r).collect();
        let (wn, sn, _) = corr.correct(&pred, sigma, reference, 0.0)?;
        w = wn;
        sigma = sn;
        alpha = next;
    }
    Ok((w, sigma))
}

/// Localizes the eigenvalue crossing between two consecutive branch points
/// whose unstable counts differ, returning a tagged point with the crossing
/// eigenvector stored.
pub fn locate_bifurcation(
    a: &BranchPoint,
    b: &BranchPoint,
    p: &ParameterSet,
    settings: &ContinuationSettings,
) -> Result<BranchPoint> {
    if a.n_unstable == b.n_unstable {
        return Err(Error::InvalidConfig(
            "bracket endpoints have the same unstable count".into(),
        ));
    }
    let domain = a.field.domain.clone();
    let lap = assemble_laplacian(&domain);
    let corr = Corrector {
        lap: &lap,
        domain: &domain,
        p0: p,
        tol: settings.newton_tol,
        max_iter: settings.max_newton_iter,
    };
    let wa = a.field.pack();
    let wb = b.field.pack();
    let mut t_w: Vec<f64> = wb.iter().zip(&wa).map(|(x, y)| x - y).collect();
    let mut t_sigma = b.sigma - a.sigma;
    let span = scaled_norm(&t_w, t_sigma);
    for x in &mut t_w {
        *x /= span;
    }
    t_sigma /= span;
    refine_crossing(
        &corr, &lap, &domain, p, settings, &wa, a.sigma, &t_w, t_sigma, span, a.n_unstable, true,
    )
}

/// Steps off a localized bifurcation onto the crossing branch.
///
/// The predictor displaces the field by `sign * amplitude` along the stored
/// crossing mode; the corrector holds the component along that mode fixed
/// and leaves sigma free. Falls back to doubled amplitudes (three times)
/// when Newton returns to the parent branch.
pub fn switch_branch(
    bif: &BranchPoint,
    p: &ParameterSet,
    sign: f64,
    amplitude: f64,
    settings: &ContinuationSettings,
) -> Result<BranchPoint> {
    let mode = bif.crossing_mode.as_ref().ok_or_else(|| {
        Error::InvalidConfig("switching needs a localized bifurcation with a stored mode".into())
    })?;
    let domain = bif.field.domain.clone();
    let lap = assemble_laplacian(&domain);
    let corr = Corrector {
        lap: &lap,
        domain: &domain,
        p0: p,
        tol: settings.newton_tol,
        max_iter: settings.max_newton_iter,
    };
    let w0 = bif.field.pack();
    let dir = if sign < 0.0 { -1.0 } else { 1.0 };
    let mut amp = amplitude;
    for _ in 0..4 {
        let pred: Vec<f64> = w0
            .iter()
            .zip(mode)
            .map(|(x, m)| x + dir * amp * m)
            .collect();
        if let Ok((w, sigma, _)) = corr.correct(&pred, bif.sigma, mode, 0.0) {
            let dist = scaled_norm(
                &w.iter().zip(&w0).map(|(a, b)| a - b).collect::<Vec<_>>(),
                sigma - bif.sigma,
            );
            if dist > 0.5 * amp {
                return make_point(&lap, &domain, &w, sigma, p, settings, PointTag::Regular);
            }
        }
        amp *= 2.0;
    }
    Err(Error::Degenerate(format!(
        "branch switch fell back onto the parent branch (amplitude up to {amp})"
    )))
}

/// Writes a branch as CSV:
/// `idx,sigma,u_l1,u_l2,u_l8,v_l1,v_l2,v_l8,n_unstable,tag`.
pub fn write_branch_csv<W: Write>(branch: &Branch, mut out: W) -> Result<()> {
    writeln!(out, "idx,sigma,u_l1,u_l2,u_l8,v_l1,v_l2,v_l8,n_unstable,tag")?;
    for (idx, pt) in branch.points.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            idx,
            pt.sigma,
            pt.norms.u.l1,
            pt.norms.u.l2,
            pt.norms.u.l8,
            pt.norms.v.l1,
            pt.norms.v.l2,
            pt.norms.v.l8,
            pt.n_unstable,
            pt.tag
        )?;
    }
    Ok(())
}

/// Dumps every `every`-th field (and the last) in the grid dump format.
/// Returns the written paths.
pub fn write_branch_snapshots(
    branch: &Branch,
    every: usize,
    dir: &Path,
    prefix: &str,
) -> Result<Vec<PathBuf>> {
    if every == 0 {
        return Ok(Vec::new());
    }
    let mut written = Vec::new();
    for (idx, pt) in branch.points.iter().enumerate() {
        if idx % every != 0 && idx + 1 != branch.points.len() {
            continue;
        }
        let path = dir.join(format!("{prefix}_{idx:04}.dat"));
        let file = std::fs::File::create(&path)?;
        crate::pde::write_field(&pt.field, std::io::BufWriter::new(file))?;
        written.push(path);
    }
    Ok(written)
}
