//! Semi-implicit time integration and pattern classification.
//!
//! The stepper treats diffusion implicitly (backward Euler with the banded
//! Laplacian factored once per component) and the kinetics explicitly. Its
//! fixed points satisfy the steady-state residual exactly for any step
//! size, so quiescent endpoints can be handed to Newton directly; temporal
//! accuracy along the way is first order and deliberately not a goal.
//!
//! The strip classifier reads horizontal bands of a 2D field and labels
//! each by the cosine spectrum of its bacteria deviation: one dominant mode
//! means stripes, comparable peaks with nonzero skewness mean spots (hot or
//! cold by the skewness sign), near-zero deviation means homogeneous, and
//! anything ambiguous is reported as mixed.

use crate::kinetics::{reaction, ParameterSet, StateVector};
use crate::pde::{assemble_laplacian, Field};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::fmt;
use std::io::Write;

/// One integration task: initial data, step control, and stopping rules.
#[derive(Debug, Clone)]
pub struct IntegrationRun {
    pub initial: Field,
    pub dt: f64,
    pub t_final: f64,
    /// Times at which the state is copied out, ascending.
    pub snapshots: Vec<f64>,
    /// Relative change threshold over one quiescence window.
    pub quiescence_tol: f64,
    /// Window length in time units between quiescence comparisons.
    pub quiescence_window: f64,
}

impl IntegrationRun {
    pub fn new(initial: Field, t_final: f64) -> Self {
        IntegrationRun {
            initial,
            dt: 0.1,
            t_final,
            snapshots: Vec::new(),
            quiescence_tol: 1e-7,
            quiescence_window: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if self.t_final < self.dt {
            return Err(Error::InvalidConfig(format!(
                "final time {} is shorter than one step {}",
                self.t_final, self.dt
            )));
        }
        if self.snapshots.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("snapshot times must ascend".into()));
        }
        if !(self.quiescence_tol > 0.0) || !(self.quiescence_window > 0.0) {
            return Err(Error::InvalidConfig(
                "quiescence tolerance and window must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of the stagnation check.
#[derive(Debug, Clone, Copy)]
pub struct QuiescenceReport {
    pub quiescent: bool,
    /// Time of the verdict: the successful window check, or the final time.
    pub time: f64,
    /// Relative change over the last completed window.
    pub relative_change: f64,
}

/// Integration output: requested snapshots plus the last state reached.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, Field)>,
    pub final_time: f64,
    pub final_field: Field,
    pub report: QuiescenceReport,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Steps the system to `t_final` or to quiescence, whichever comes first.
///
/// Each step solves `(I - dt Lap) u' = u + dt g` and the nutrient analogue
/// with the diffusion ratio folded in; both banded factorizations are
/// computed once. A per-node sigma table on the initial field overrides the
/// parameter value pointwise, exactly as in the steady-state residual.
pub fn integrate(run: &IntegrationRun, p: &ParameterSet) -> Result<Trajectory> {
    run.validate()?;
    let domain = run.initial.domain.clone();
    let n = domain.nodes();
    let lap = assemble_laplacian(&domain);
    let mut op_u = lap.to_banded_scaled(-run.dt, 1.0);
    let mut op_v = lap.to_banded_scaled(-run.dt * p.delta(), 1.0);
    op_u.lu_factor()
        .map_err(|e| Error::Numeric(format!("bacteria diffusion operator: {e}")))?;
    op_v.lu_factor()
        .map_err(|e| Error::Numeric(format!("nutrient diffusion operator: {e}")))?;

    let mut field = run.initial.clone();
    let mut t = 0.0;
    let steps = (run.t_final / run.dt).ceil() as usize;
    let window_steps = (run.quiescence_window / run.dt).ceil().max(1.0) as usize;

    let mut snapshots = Vec::with_capacity(run.snapshots.len());
    let mut next_snapshot = 0usize;
    let mut window_ref = field.pack();
    let mut report = QuiescenceReport {
        quiescent: false,
        time: run.t_final,
        relative_change: f64::INFINITY,
    };

    let mut rhs_u = vec![0.0; n];
    let mut rhs_v = vec![0.0; n];
    for step in 1..=steps {
        for i in 0..n {
            let pi = p.with_sigma(field.sigma_at(i, p));
            let r = reaction(StateVector::new(field.u[i], field.v[i]), &pi)
                .map_err(|e| Error::Numeric(format!("kinetics blew up at t = {t}: {e}")))?;
            rhs_u[i] = field.u[i] + run.dt * r.u;
            rhs_v[i] = field.v[i] + run.dt * r.v;
        }
        let new_u = op_u.solve(&rhs_u);
        let new_v = op_v.solve(&rhs_v);
        if new_u.iter().chain(&new_v).any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "integration blew up at t = {}",
                t + run.dt
            )));
        }
        field.u = new_u;
        field.v = new_v;
        t += run.dt;

        while next_snapshot < run.snapshots.len() && t + 1e-12 >= run.snapshots[next_snapshot] {
            snapshots.push((run.snapshots[next_snapshot], field.clone()));
            next_snapshot += 1;
        }

        if step % window_steps == 0 {
            let now = field.pack();
            let diff: Vec<f64> = now.iter().zip(&window_ref).map(|(a, b)| a - b).collect();
            let rel = l2(&diff) / l2(&now).max(1e-300);
            report.relative_change = rel;
            if rel < run.quiescence_tol {
                report.quiescent = true;
                report.time = t;
                break;
            }
            window_ref = now;
        }
    }
    Ok(Trajectory {
        snapshots,
        final_time: t,
        final_field: field,
        report,
    })
}

/// Adds uniform noise in `[-amplitude, amplitude]` to both components.
/// Zero amplitude returns the base unchanged; the same seed reproduces the
/// same field bit for bit.
pub fn perturb(base: &Field, amplitude: f64, seed: u64) -> Result<Field> {
    if amplitude < 0.0 || !amplitude.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "perturbation amplitude must be nonnegative, got {amplitude}"
        )));
    }
    let mut out = base.clone();
    if amplitude == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for x in out.u.iter_mut().chain(out.v.iter_mut()) {
        *x += rng.random_range(-amplitude..amplitude);
    }
    Ok(out)
}

/// Pattern label for one horizontal strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripLabel {
    Homogeneous,
    Stripes,
    SpotsHot,
    SpotsCold,
    Mixed,
}

impl fmt::Display for StripLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StripLabel::Homogeneous => "homogeneous",
            StripLabel::Stripes => "stripes",
            StripLabel::SpotsHot => "spots_hot",
            StripLabel::SpotsCold => "spots_cold",
            StripLabel::Mixed => "mixed",
        };
        write!(f, "{s}")
    }
}

/// Thresholds for the strip classifier. The defaults separate the five
/// canonical pattern classes on reconstructed fixtures.
#[derive(Debug, Clone)]
pub struct StripClassifierOptions {
    /// Height of one horizontal strip in domain units.
    pub strip_height: f64,
    /// Peak-to-runner-up ratio above which a single cosine mode wins.
    pub dominance_ratio: f64,
    /// |skewness| above which comparable peaks are called spots.
    pub skewness_threshold: f64,
    /// RMS deviation below which a strip counts as homogeneous.
    pub energy_floor: f64,
    /// Relative half-width of the wavenumber ring around the peak.
    pub ring_width: f64,
}

impl StripClassifierOptions {
    pub fn new(strip_height: f64) -> Self {
        StripClassifierOptions {
            strip_height,
            dominance_ratio: 3.0,
            skewness_threshold: 0.1,
            energy_floor: 1e-3,
            ring_width: 0.25,
        }
    }
}

/// Classification of one strip.
#[derive(Debug, Clone)]
pub struct StripReport {
    pub index: usize,
    pub y_center: f64,
    pub label: StripLabel,
}

/// Cosine spectrum magnitudes of a strip via even extension and a 2D FFT.
/// Returns `coef[jy][jx]` for the quadrant `jx in 0..nx`, `jy in 0..rows`.
fn cosine_spectrum(data: &[f64], nx: usize, rows: usize) -> Vec<Vec<f64>> {
    let ex = if nx > 1 { 2 * (nx - 1) } else { 1 };
    let ey = if rows > 1 { 2 * (rows - 1) } else { 1 };
    let mut grid = vec![Complex64::new(0.0, 0.0); ex * ey];
    for jy in 0..ey {
        let sy = if jy < rows { jy } else { 2 * (rows - 1) - jy };
        for jx in 0..ex {
            let sx = if jx < nx { jx } else { 2 * (nx - 1) - jx };
            grid[jy * ex + jx] = Complex64::new(data[sy * nx + sx], 0.0);
        }
    }
    let mut planner = FftPlanner::new();
    if ex > 1 {
        let fft_x = planner.plan_fft_forward(ex);
        for jy in 0..ey {
            fft_x.process(&mut grid[jy * ex..(jy + 1) * ex]);
        }
    }
    if ey > 1 {
        let fft_y = planner.plan_fft_forward(ey);
        let mut col = vec![Complex64::new(0.0, 0.0); ey];
        for jx in 0..ex {
            for jy in 0..ey {
                col[jy] = grid[jy * ex + jx];
            }
            fft_y.process(&mut col);
            for jy in 0..ey {
                grid[jy * ex + jx] = col[jy];
            }
        }
    }
    let scale = 1.0 / (ex * ey) as f64;
    (0..rows)
        .map(|jy| {
            (0..nx)
                .map(|jx| grid[jy * ex + jx].norm() * scale)
                .collect()
        })
        .collect()
}

/// Labels horizontal strips of a 2D field by the cosine spectrum of the
/// bacteria deviation. Rows are grouped into strips of the requested
/// height, with the last strip absorbing any remainder.
pub fn classify_strips(w: &Field, opts: &StripClassifierOptions) -> Result<Vec<StripReport>> {
    let d = &w.domain;
    if d.dimension != 2 {
        return Err(Error::DomainMismatch(
            "strip classification needs a 2D field".into(),
        ));
    }
    if !(opts.strip_height > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "strip height must be positive, got {}",
            opts.strip_height
        )));
    }
    let (nx, ny) = (d.n[0], d.n[1]);
    let ly = d.hi[1] - d.lo[1];
    let n_strips = ((ly / opts.strip_height).floor() as usize).max(1);
    // row iy belongs to strip floor((y - lo) / height), clamped at the top
    let strip_of = |iy: usize| -> usize {
        let (_, y) = d.coords(d.node(0, iy));
        (((y - d.lo[1]) / opts.strip_height).floor() as usize).min(n_strips - 1)
    };

    let mut reports = Vec::with_capacity(n_strips);
    let mut row_lo = 0usize;
    for s in 0..n_strips {
        let mut row_hi = row_lo;
        while row_hi < ny && strip_of(row_hi) == s {
            row_hi += 1;
        }
        let rows = row_hi - row_lo;
        if rows == 0 {
            return Err(Error::InvalidConfig(format!(
                "strip height {} is below the grid spacing {}",
                opts.strip_height, d.spacing[1]
            )));
        }
        let y_center = {
            let top = d.lo[1] + if s + 1 == n_strips {
                ly
            } else {
                (s as f64 + 1.0) * opts.strip_height
            };
            let bottom = d.lo[1] + s as f64 * opts.strip_height;
            0.5 * (bottom + top)
        };

        // de-meaned bacteria block of this strip
        let mut dev = vec![0.0; nx * rows];
        let mut mean = 0.0;
        for (r, iy) in (row_lo..row_hi).enumerate() {
            for ix in 0..nx {
                let val = w.u[d.node(ix, iy)];
                dev[r * nx + ix] = val;
                mean += val;
            }
        }
        mean /= (nx * rows) as f64;
        for x in &mut dev {
            *x -= mean;
        }
        let rms = (dev.iter().map(|x| x * x).sum::<f64>() / dev.len() as f64).sqrt();
        let label = if rms < opts.energy_floor {
            StripLabel::Homogeneous
        } else {
            let coef = cosine_spectrum(&dev, nx, rows);
            let lx = d.hi[0] - d.lo[0];
            let strip_ly = d.spacing[1] * (rows.max(2) - 1) as f64;
            let kvec = |jx: usize, jy: usize| -> (f64, f64) {
                (
                    jx as f64 * std::f64::consts::PI / lx,
                    jy as f64 * std::f64::consts::PI / strip_ly,
                )
            };
            // peak over all nonconstant modes
            let mut peak = (0usize, 0usize, 0.0f64);
            for (jy, row) in coef.iter().enumerate() {
                for (jx, &a) in row.iter().enumerate() {
                    if jx == 0 && jy == 0 {
                        continue;
                    }
                    if a > peak.2 {
                        peak = (jx, jy, a);
                    }
                }
            }
            let (px, py) = kvec(peak.0, peak.1);
            let k_peak = (px * px + py * py).sqrt();
            // runner-up within the ring |k| ~ k_peak
            let mut second = 0.0f64;
            for (jy, row) in coef.iter().enumerate() {
                for (jx, &a) in row.iter().enumerate() {
                    if (jx, jy) == (peak.0, peak.1) || (jx == 0 && jy == 0) {
                        continue;
                    }
                    let (kx, ky) = kvec(jx, jy);
                    let k = (kx * kx + ky * ky).sqrt();
                    if (k - k_peak).abs() <= opts.ring_width * k_peak && a > second {
                        second = a;
                    }
                }
            }
            if second * opts.dominance_ratio < peak.2 {
                StripLabel::Stripes
            } else {
                let skew =
                    dev.iter().map(|x| x * x * x).sum::<f64>() / dev.len() as f64 / rms.powi(3);
                if skew > opts.skewness_threshold {
                    StripLabel::SpotsHot
                } else if skew < -opts.skewness_threshold {
                    StripLabel::SpotsCold
                } else {
                    StripLabel::Mixed
                }
            }
        };
        reports.push(StripReport {
            index: s,
            y_center,
            label,
        });
        row_lo = row_hi;
    }
    Ok(reports)
}

/// Writes strip labels as CSV: `strip_index,y_center,label`.
pub fn write_layering_csv<W: Write>(reports: &[StripReport], mut out: W) -> Result<()> {
    writeln!(out, "strip_index,y_center,label")?;
    for r in reports {
        writeln!(out, "{},{},{}", r.index, r.y_center, r.label)?;
    }
    Ok(())
}
