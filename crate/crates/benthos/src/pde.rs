//! Finite-difference discretization on rectangular 1D/2D grids with
//! zero-flux boundaries.
//!
//! The Laplacian is the second-order central stencil with mirror-ghost
//! closure at the boundary, which keeps the operator symmetric and makes
//! every row sum to zero (discrete Neumann conservation). The two unknowns
//! per node are interleaved in system vectors (node `i` occupies rows `2i`
//! and `2i + 1`), so all assembled operators are banded with half-bandwidth
//! 3 in 1D and `2 nx + 1` in 2D.
//!
//! Coordinates are the rescaled ones of the kinetics module; with bacteria
//! diffusivity scaled to 1 the nutrient block of `D = diag(1, delta)`
//! carries the full contrast `delta = delta_v / delta_u`.

use crate::kinetics::{derivatives, reaction, ParameterSet, StateVector};
use crate::linalg::{leading_eigenpairs, ArnoldiOptions, BandedMatrix};
use crate::{Error, Result};
use std::io::{BufRead, Write};

/// Rectangular grid. 1D domains use axis 0 only; `n[1] = 1` then.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub dimension: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub n: [usize; 2],
    pub spacing: [f64; 2],
}

impl Domain {
    pub fn line(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidConfig(format!("need >= 3 points, got {n}")));
        }
        if hi <= lo {
            return Err(Error::InvalidConfig(format!("empty extent [{lo}, {hi}]")));
        }
        Ok(Domain {
            dimension: 1,
            lo: [lo, 0.0],
            hi: [hi, 0.0],
            n: [n, 1],
            spacing: [(hi - lo) / (n - 1) as f64, 0.0],
        })
    }

    pub fn rectangle(x: (f64, f64), nx: usize, y: (f64, f64), ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidConfig(format!(
                "need >= 3 points per axis, got {nx} x {ny}"
            )));
        }
        if x.1 <= x.0 || y.1 <= y.0 {
            return Err(Error::InvalidConfig("empty extent".into()));
        }
        Ok(Domain {
            dimension: 2,
            lo: [x.0, y.0],
            hi: [x.1, y.1],
            n: [nx, ny],
            spacing: [
                (x.1 - x.0) / (nx - 1) as f64,
                (y.1 - y.0) / (ny - 1) as f64,
            ],
        })
    }

    /// Point count so that a wave with wavenumber `k` gets at least
    /// `pts_per_wavelength` grid points per period on `[lo, hi]`.
    pub fn points_for(lo: f64, hi: f64, k: f64, pts_per_wavelength: usize) -> usize {
        let h = (2.0 * std::f64::consts::PI / k) / pts_per_wavelength as f64;
        (((hi - lo) / h).ceil() as usize + 1).max(3)
    }

    /// Total number of grid nodes.
    pub fn nodes(&self) -> usize {
        self.n[0] * self.n[1]
    }

    /// Row-major node index, x varying fastest.
    pub fn node(&self, ix: usize, iy: usize) -> usize {
        iy * self.n[0] + ix
    }

    /// Coordinates of a node by flat index.
    pub fn coords(&self, node: usize) -> (f64, f64) {
        let ix = node % self.n[0];
        let iy = node / self.n[0];
        (
            self.lo[0] + ix as f64 * self.spacing[0],
            self.lo[1] + iy as f64 * self.spacing[1],
        )
    }

    /// Trapezoidal quadrature weight of a node, normalized so all weights
    /// sum to one (domain average).
    pub fn weight(&self, node: usize) -> f64 {
        let ix = node % self.n[0];
        let iy = node / self.n[0];
        let wx = if ix == 0 || ix == self.n[0] - 1 { 0.5 } else { 1.0 } / (self.n[0] - 1) as f64;
        if self.dimension == 1 {
            return wx;
        }
        let wy = if iy == 0 || iy == self.n[1] - 1 { 0.5 } else { 1.0 } / (self.n[1] - 1) as f64;
        wx * wy
    }
}

/// Grid function with one bacteria and one nutrient value per node, plus an
/// optional per-node balancing rate for spatially varying environments.
#[derive(Debug, Clone)]
pub struct Field {
    pub domain: Domain,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl Field {
    pub fn constant(domain: &Domain, u: f64, v: f64) -> Self {
        let n = domain.nodes();
        Field {
            domain: domain.clone(),
            u: vec![u; n],
            v: vec![v; n],
            sigma: None,
        }
    }

    /// Interleaves into a system vector: node i at slots 2i (u) and 2i+1 (v).
    pub fn pack(&self) -> Vec<f64> {
        let n = self.domain.nodes();
        let mut w = vec![0.0; 2 * n];
        for i in 0..n {
            w[2 * i] = self.u[i];
            w[2 * i + 1] = self.v[i];
        }
        w
    }

    pub fn unpack(domain: &Domain, w: &[f64], sigma: Option<Vec<f64>>) -> Self {
        let n = domain.nodes();
        assert_eq!(w.len(), 2 * n);
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        for i in 0..n {
            u[i] = w[2 * i];
            v[i] = w[2 * i + 1];
        }
        Field {
            domain: domain.clone(),
            u,
            v,
            sigma,
        }
    }

    /// Balancing rate at a node: the per-node table when present, the
    /// parameter value otherwise.
    pub fn sigma_at(&self, node: usize, p: &ParameterSet) -> f64 {
        match &self.sigma {
            Some(s) => s[node],
            None => p.sigma,
        }
    }
}

/// Square sparse matrix in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseOperator {
    /// Builds CSR from triplets, summing duplicates, columns sorted per row.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in triplets.iter() {
            if last == Some((i, j)) {
                // duplicate position: accumulate
                let end = values.len() - 1;
                values[end] += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOperator {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    /// Adds `a` to every even diagonal entry and `b` to every odd one
    /// (component-wise shifts of an interleaved operator).
    pub fn add_diag_pairs(&mut self, a: f64, b: f64) {
        for i in 0..self.n {
            let shift = if i % 2 == 0 { a } else { b };
            let mut found = false;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    self.values[k] += shift;
                    found = true;
                    break;
                }
            }
            assert!(found, "row {i} has no stored diagonal entry");
        }
    }

    /// Uniform diagonal shift `A + s I`.
    pub fn shift_identity(&mut self, s: f64) {
        self.add_diag_pairs(s, s);
    }

    /// Copies into band storage sized by the widest stored offset.
    pub fn to_banded(&self) -> BandedMatrix {
        self.to_banded_scaled(1.0, 0.0)
    }

    /// Band form of `scale * A + shift * I` without mutating the operator.
    pub fn to_banded_scaled(&self, scale: f64, shift: f64) -> BandedMatrix {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if j > i {
                    ku = ku.max(j - i);
                } else {
                    kl = kl.max(i - j);
                }
            }
        }
        let mut band = BandedMatrix::new(self.n, kl, ku);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                band.add(i, self.col_idx[k], scale * self.values[k]);
            }
            if shift != 0.0 {
                band.add(i, i, shift);
            }
        }
        band
    }
}

/// Scalar N x N Laplacian with mirror-ghost Neumann closure.
///
/// The ghost value equals the first interior value, so a boundary row in 1D
/// reads `(2 w[1] - 2 w[0]) / h^2`; in 2D the two axis stencils add.
pub fn assemble_laplacian(d: &Domain) -> SparseOperator {
    let n = d.nodes();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(5 * n);
    let hx2 = 1.0 / (d.spacing[0] * d.spacing[0]);
    for iy in 0..d.n[1] {
        for ix in 0..d.n[0] {
            let row = d.node(ix, iy);
            // x-direction second difference with mirrored neighbors
            let left = if ix == 0 { d.node(1, iy) } else { d.node(ix - 1, iy) };
            let right = if ix == d.n[0] - 1 {
                d.node(d.n[0] - 2, iy)
            } else {
                d.node(ix + 1, iy)
            };
            triplets.push((row, left, hx2));
            triplets.push((row, right, hx2));
            triplets.push((row, row, -2.0 * hx2));
            if d.dimension == 2 {
                let hy2 = 1.0 / (d.spacing[1] * d.spacing[1]);
                let down = if iy == 0 { d.node(ix, 1) } else { d.node(ix, iy - 1) };
                let up = if iy == d.n[1] - 1 {
                    d.node(ix, d.n[1] - 2)
                } else {
                    d.node(ix, iy + 1)
                };
                triplets.push((row, down, hy2));
                triplets.push((row, up, hy2));
                triplets.push((row, row, -2.0 * hy2));
            }
        }
    }
    SparseOperator::from_triplets(n, &mut triplets)
}

/// Steady-state residual `f(w) + D Lap w` as a field (no sigma attached).
///
/// A per-node sigma table on `w` overrides the parameter value pointwise.
pub fn residual(w: &Field, p: &ParameterSet) -> Result<Field> {
    let lap = assemble_laplacian(&w.domain);
    residual_with(&lap, w, p)
}

/// Residual against a pre-assembled Laplacian (hot path for Newton loops).
pub fn residual_with(lap: &SparseOperator, w: &Field, p: &ParameterSet) -> Result<Field> {
    let n = w.domain.nodes();
    let delta = p.delta();
    let mut lu = vec![0.0; n];
    let mut lv = vec![0.0; n];
    lap.matvec(&w.u, &mut lu);
    lap.matvec(&w.v, &mut lv);
    let mut out = Field::constant(&w.domain, 0.0, 0.0);
    for i in 0..n {
        let pi = p.with_sigma(w.sigma_at(i, p));
        let r = reaction(StateVector::new(w.u[i], w.v[i]), &pi).map_err(|e| {
            let (x, y) = w.domain.coords(i);
            Error::Numeric(format!("residual at node {i} (x={x}, y={y}): {e}"))
        })?;
        out.u[i] = r.u + lu[i];
        out.v[i] = r.v + delta * lv[i];
    }
    Ok(out)
}

/// Interleaved 2N x 2N Jacobian: per-node kinetics blocks plus `D (x) Lap`.
pub fn jacobian(w: &Field, p: &ParameterSet) -> Result<SparseOperator> {
    let lap = assemble_laplacian(&w.domain);
    jacobian_with(&lap, w, p)
}

pub fn jacobian_with(lap: &SparseOperator, w: &Field, p: &ParameterSet) -> Result<SparseOperator> {
    let n = w.domain.nodes();
    let delta = p.delta();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * lap.nnz() + 4 * n);
    for i in 0..n {
        let pi = p.with_sigma(w.sigma_at(i, p));
        let d = derivatives(StateVector::new(w.u[i], w.v[i]), &pi).map_err(|e| {
            let (x, y) = w.domain.coords(i);
            Error::Numeric(format!("jacobian at node {i} (x={x}, y={y}): {e}"))
        })?;
        triplets.push((2 * i, 2 * i, d.g_u));
        triplets.push((2 * i, 2 * i + 1, d.g_v));
        triplets.push((2 * i + 1, 2 * i, d.h_u));
        triplets.push((2 * i + 1, 2 * i + 1, d.h_v));
        for k in lap.row_ptr[i]..lap.row_ptr[i + 1] {
            let j = lap.col_idx[k];
            let val = lap.values[k];
            triplets.push((2 * i, 2 * j, val));
            triplets.push((2 * i + 1, 2 * j + 1, delta * val));
        }
    }
    Ok(SparseOperator::from_triplets(2 * n, &mut triplets))
}

/// Domain-averaged trapezoidal norms of one scalar grid function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarNorms {
    pub l1: f64,
    pub l2: f64,
    pub l8: f64,
}

/// Norms of both components: `(1/|Omega| int |w|^p)^(1/p)` for p = 1, 2, 8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSet {
    pub u: ScalarNorms,
    pub v: ScalarNorms,
}

pub fn norms(w: &Field) -> NormSet {
    let one = |vals: &[f64]| {
        let (mut s1, mut s2, mut s8) = (0.0, 0.0, 0.0);
        for (i, &x) in vals.iter().enumerate() {
            let wt = w.domain.weight(i);
            let a = x.abs();
            s1 += wt * a;
            s2 += wt * a * a;
            s8 += wt * a.powi(8);
        }
        ScalarNorms {
            l1: s1,
            l2: s2.sqrt(),
            l8: s8.powf(0.125),
        }
    };
    NormSet {
        u: one(&w.u),
        v: one(&w.v),
    }
}

/// Logistic ramp of the balancing rate along the last axis:
/// `sigma(y) = s0 / (1 + exp(rate (y - y0)))`, constant along x.
pub fn sigma_profile(d: &Domain, s0: f64, rate: f64, y0: f64) -> Result<Vec<f64>> {
    if s0 <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "sigma profile amplitude must be positive, got {s0}"
        )));
    }
    let axis = if d.dimension == 2 { 1 } else { 0 };
    Ok((0..d.nodes())
        .map(|i| {
            let c = d.coords(i);
            let y = if axis == 1 { c.1 } else { c.0 };
            s0 / (1.0 + (rate * (y - y0)).exp())
        })
        .collect())
}

/// Transverse wavenumbers admitted by Neumann extrusion over thickness
/// `2 l_z`: `k_z = n pi / (2 l_z)` for n = 0, 1, ... up to the cutoff.
pub fn quantized_kz(l_z: f64, cutoff: f64) -> Vec<f64> {
    let step = std::f64::consts::PI / (2.0 * l_z);
    let mut out = Vec::new();
    let mut n = 0usize;
    loop {
        let kz = n as f64 * step;
        if kz > cutoff {
            break;
        }
        out.push(kz);
        n += 1;
    }
    out
}

/// Largest growth rate of the extruded pattern at each transverse
/// wavenumber: rightmost eigenvalue of `jacobian(w) - diag(1, delta) k_z^2`.
pub fn transverse_spectrum(
    w: &Field,
    p: &ParameterSet,
    kz_list: &[f64],
    opts: &ArnoldiOptions,
) -> Result<Vec<(f64, f64)>> {
    let jac = jacobian(w, p)?;
    let delta = p.delta();
    let mut out = Vec::with_capacity(kz_list.len());
    for &kz in kz_list {
        let mut shifted = jac.clone();
        shifted.add_diag_pairs(-kz * kz, -delta * kz * kz);
        shifted.shift_identity(-opts.shift);
        let mut band = shifted.to_banded();
        band.lu_factor()
            .map_err(|e| Error::Numeric(format!("transverse k_z = {kz}: {e}")))?;
        let pairs = leading_eigenpairs(
            2 * w.domain.nodes(),
            |x, y| y.copy_from_slice(&band.solve(x)),
            opts,
        )
        .map_err(|e| Error::Numeric(format!("transverse k_z = {kz}: {e}")))?;
        out.push((kz, pairs[0].value.re));
    }
    Ok(out)
}

/// Writes the text dump format: `# dim`, `# extents`, `# shape` headers and
/// one row-major node line `x [y] u v [sigma]` with 17 significant digits,
/// which round-trips f64 exactly.
pub fn write_field<W: Write>(w: &Field, mut out: W) -> Result<()> {
    let d = &w.domain;
    writeln!(out, "# dim {}", d.dimension)?;
    if d.dimension == 1 {
        writeln!(out, "# extents {:.16e} {:.16e}", d.lo[0], d.hi[0])?;
        writeln!(out, "# shape {}", d.n[0])?;
    } else {
        writeln!(
            out,
            "# extents {:.16e} {:.16e} {:.16e} {:.16e}",
            d.lo[0], d.hi[0], d.lo[1], d.hi[1]
        )?;
        writeln!(out, "# shape {} {}", d.n[0], d.n[1])?;
    }
    for i in 0..d.nodes() {
        let (x, y) = d.coords(i);
        if d.dimension == 2 {
            write!(out, "{x:.16e} {y:.16e}")?;
        } else {
            write!(out, "{x:.16e}")?;
        }
        write!(out, " {:.16e} {:.16e}", w.u[i], w.v[i])?;
        if let Some(s) = &w.sigma {
            write!(out, " {:.16e}", s[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads the dump format back; inverse of [`write_field`].
pub fn read_field<R: BufRead>(input: R) -> Result<Field> {
    let mut lines = input.lines();
    let bad = |what: &str| Error::InvalidConfig(format!("field dump: {what}"));
    let dim_line = lines.next().ok_or_else(|| bad("missing dim header"))??;
    let dimension: usize = dim_line
        .strip_prefix("# dim ")
        .ok_or_else(|| bad("malformed dim header"))?
        .trim()
        .parse()
        .map_err(|_| bad("malformed dim header"))?;
    let ext_line = lines.next().ok_or_else(|| bad("missing extents header"))??;
    let ext: Vec<f64> = ext_line
        .strip_prefix("# extents ")
        .ok_or_else(|| bad("malformed extents header"))?
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad("malformed extent value")))
        .collect::<Result<_>>()?;
    let shape_line = lines.next().ok_or_else(|| bad("missing shape header"))??;
    let shape: Vec<usize> = shape_line
        .strip_prefix("# shape ")
        .ok_or_else(|| bad("malformed shape header"))?
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| bad("malformed shape value")))
        .collect::<Result<_>>()?;
    let domain = match dimension {
        1 if ext.len() == 2 && shape.len() == 1 => Domain::line(ext[0], ext[1], shape[0])?,
        2 if ext.len() == 4 && shape.len() == 2 => {
            Domain::rectangle((ext[0], ext[1]), shape[0], (ext[2], ext[3]), shape[1])?
        }
        _ => return Err(bad("inconsistent dim/extents/shape")),
    };
    let n = domain.nodes();
    let coord_cols = dimension;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut sigma: Vec<f64> = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < coord_cols + 2 {
            return Err(bad("short node line"));
        }
        u.push(
            toks[coord_cols]
                .parse()
                .map_err(|_| bad("malformed u value"))?,
        );
        v.push(
            toks[coord_cols + 1]
                .parse()
                .map_err(|_| bad("malformed v value"))?,
        );
        if toks.len() > coord_cols + 2 {
            sigma.push(
                toks[coord_cols + 2]
                    .parse()
                    .map_err(|_| bad("malformed sigma value"))?,
            );
        }
    }
    if u.len() != n {
        return Err(bad(&format!("expected {n} nodes, got {}", u.len())));
    }
    if !sigma.is_empty() && sigma.len() != n {
        return Err(bad("sigma column incomplete"));
    }
    Ok(Field {
        domain,
        u,
        v,
        sigma: if sigma.is_empty() { None } else { Some(sigma) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogeneous::homogeneous_states;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triplet_duplicates_accumulate() {
        let mut t = vec![(0usize, 0usize, 1.0), (1, 2, 4.0), (0, 0, 2.5), (1, 2, -1.0), (2, 1, 7.0)];
        let a = SparseOperator::from_triplets(3, &mut t);
        assert_eq!(a.nnz(), 3);
        let x = [1.0, 0.0, 1.0];
        let mut y = [0.0; 3];
        a.matvec(&x, &mut y);
        assert_eq!(y, [3.5, 3.0, 0.0]);
    }

    #[test]
    fn laplacian_annihilates_constants() {
        for d in [
            Domain::line(0.0, 10.0, 37).unwrap(),
            Domain::rectangle((0.0, 5.0), 11, (-2.0, 3.0), 9).unwrap(),
        ] {
            let lap = assemble_laplacian(&d);
            let x = vec![3.7; d.nodes()];
            let mut y = vec![0.0; d.nodes()];
            lap.matvec(&x, &mut y);
            for v in y {
                assert!(v.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn laplacian_row_sums_zero() {
        let d = Domain::rectangle((0.0, 1.0), 7, (0.0, 2.0), 5).unwrap();
        let lap = assemble_laplacian(&d);
        for i in 0..lap.n {
            let s: f64 = (lap.row_ptr[i]..lap.row_ptr[i + 1])
                .map(|k| lap.values[k])
                .sum();
            assert!(s.abs() < 1e-13, "row {i} sums to {s}");
        }
    }

    #[test]
    fn three_point_stencil_by_hand() {
        let d = Domain::line(0.0, 2.0, 3).unwrap();
        let lap = assemble_laplacian(&d);
        // h = 1; rows: [-2 2 0; 1 -2 1; 0 2 -2]
        let expect = [
            [-2.0, 2.0, 0.0],
            [1.0, -2.0, 1.0],
            [0.0, 2.0, -2.0],
        ];
        for i in 0..3 {
            let mut row = [0.0; 3];
            for k in lap.row_ptr[i]..lap.row_ptr[i + 1] {
                row[lap.col_idx[k]] += lap.values[k];
            }
            assert_eq!(row, expect[i]);
        }
    }

    #[test]
    fn laplacian_second_order_on_cosine() {
        // Neumann-compatible mode cos(k x), k = n pi / L; refine and check
        // the error slope
        let mut errs = Vec::new();
        for &n in &[33usize, 65, 129] {
            let d = Domain::line(0.0, 10.0, n).unwrap();
            let k = 3.0 * std::f64::consts::PI / 10.0;
            let f: Vec<f64> = (0..n).map(|i| (k * d.coords(i).0).cos()).collect();
            let lap = assemble_laplacian(&d);
            let mut y = vec![0.0; n];
            lap.matvec(&f, &mut y);
            let err = (0..n)
                .map(|i| (y[i] + k * k * f[i]).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        let slope1 = (errs[0] / errs[1]).log2();
        let slope2 = (errs[1] / errs[2]).log2();
        assert!(slope1 > 1.9 && slope2 > 1.9, "slopes {slope1} {slope2}");
    }

    #[test]
    fn residual_vanishes_at_homogeneous_root() {
        let p = ParameterSet::standard(0.08, 0.3);
        let s = &homogeneous_states(&p).unwrap()[0];
        let d = Domain::rectangle((0.0, 8.0), 9, (0.0, 6.0), 7).unwrap();
        let w = Field::constant(&d, s.u, s.v);
        let r = residual(&w, &p).unwrap();
        for i in 0..d.nodes() {
            assert!(r.u[i].abs() < 1e-10 && r.v[i].abs() < 1e-10);
        }
    }

    #[test]
    fn per_node_sigma_varies_in_y_only() {
        let p = ParameterSet::standard(0.08, 0.3);
        let d = Domain::rectangle((0.0, 8.0), 5, (0.0, 600.0), 13).unwrap();
        let mut w = Field::constant(&d, 0.5, 2.0);
        w.sigma = Some(sigma_profile(&d, 0.128, 0.011, 480.0).unwrap());
        let r = residual(&w, &p).unwrap();
        for iy in 0..d.n[1] {
            let base = r.v[d.node(0, iy)];
            for ix in 1..d.n[0] {
                assert_relative_eq!(r.v[d.node(ix, iy)], base, epsilon = 1e-13);
            }
        }
        // and it must actually vary across rows
        assert!((r.v[d.node(0, 0)] - r.v[d.node(0, d.n[1] - 1)]).abs() > 1e-3);
    }

    #[test]
    fn jacobian_matches_directional_differences() {
        let p = ParameterSet::standard(0.09, 0.27);
        let d = Domain::rectangle((0.0, 6.0), 7, (0.0, 5.0), 6).unwrap();
        let n = d.nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let mut w = Field::constant(&d, 0.0, 0.0);
        for i in 0..n {
            w.u[i] = 0.4 + 0.2 * rng.random_range(-1.0..1.0);
            w.v[i] = 2.0 + 0.5 * rng.random_range(-1.0..1.0);
        }
        let jac = jacobian(&w, &p).unwrap();
        let base = residual(&w, &p).unwrap().pack();
        for _ in 0..20 {
            let dir: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut jd = vec![0.0; 2 * n];
            jac.matvec(&dir, &mut jd);
            let eps = 1e-7;
            let wp = {
                let mut packed = w.pack();
                for i in 0..2 * n {
                    packed[i] += eps * dir[i];
                }
                Field::unpack(&d, &packed, None)
            };
            let fp = residual(&wp, &p).unwrap().pack();
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..2 * n {
                let fd = (fp[i] - base[i]) / eps;
                num += (fd - jd[i]).powi(2);
                den += jd[i].powi(2).max(1.0);
            }
            assert!(
                (num / den).sqrt() < 1e-6,
                "directional mismatch {}",
                (num / den).sqrt()
            );
        }
    }

    #[test]
    fn jacobian_reproduces_dispersion_on_fourier_mode() {
        // at a homogeneous state the interleaved Jacobian acts on
        // (a cos(kx), b cos(kx)) exactly like the 2x2 matrix J - D k2_h with
        // the discrete symbol k2_h = (2 - 2 cos(k h)) / h^2
        let p = ParameterSet::standard(0.08, 0.3);
        let s = &homogeneous_states(&p).unwrap()[0];
        let nx = 65;
        let d = Domain::line(0.0, 20.0, nx).unwrap();
        let w = Field::constant(&d, s.u, s.v);
        let jac = jacobian(&w, &p).unwrap();
        let k = 4.0 * std::f64::consts::PI / 20.0;
        let h = d.spacing[0];
        let k2h = (2.0 - 2.0 * (k * h).cos()) / (h * h);
        let der = derivatives(StateVector::new(s.u, s.v), &p).unwrap();
        let l = [
            [der.g_u - k2h, der.g_v],
            [der.h_u, der.h_v - p.delta() * k2h],
        ];
        // eigenvector of the 2x2 for its dominant eigenvalue
        let tr = l[0][0] + l[1][1];
        let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
        let mu = tr / 2.0 + (tr * tr / 4.0 - det).sqrt();
        let (a, b) = (l[0][1], mu - l[0][0]);
        let mut x = vec![0.0; 2 * nx];
        for i in 0..nx {
            let c = (k * d.coords(i).0).cos();
            x[2 * i] = a * c;
            x[2 * i + 1] = b * c;
        }
        let mut y = vec![0.0; 2 * nx];
        jac.matvec(&x, &mut y);
        for i in 0..2 * nx {
            assert_relative_eq!(y[i], mu * x[i], epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn jacobian_sparsity_bound() {
        let d = Domain::rectangle((0.0, 4.0), 6, (0.0, 4.0), 5).unwrap();
        let p = ParameterSet::standard(0.08, 0.3);
        let w = Field::constant(&d, 0.5, 2.0);
        let jac = jacobian(&w, &p).unwrap();
        let n2 = 2 * d.nodes();
        assert!(jac.nnz() <= 2 * (2 * 2 + 1) * n2);
    }

    #[test]
    fn norm_chain_and_constants() {
        let d = Domain::line(0.0, 7.0, 41).unwrap();
        let mut w = Field::constant(&d, -2.5, 0.3);
        let ns = norms(&w);
        assert_relative_eq!(ns.u.l1, 2.5, epsilon = 1e-12);
        assert_relative_eq!(ns.u.l2, 2.5, epsilon = 1e-12);
        assert_relative_eq!(ns.u.l8, 2.5, epsilon = 1e-12);
        assert_relative_eq!(ns.v.l2, 0.3, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for x in w.u.iter_mut() {
            *x = rng.random_range(-2.0..2.0);
        }
        let ns = norms(&w);
        assert!(ns.u.l1 <= ns.u.l2 + 1e-12 && ns.u.l2 <= ns.u.l8 + 1e-12);
    }

    #[test]
    fn eighth_norm_matches_fine_quadrature() {
        // 1 + cos(k x) over exactly two periods
        let k = 0.7;
        let period = 2.0 * std::f64::consts::PI / k;
        let hi = 2.0 * period;
        let d = Domain::line(0.0, hi, 4001).unwrap();
        let mut w = Field::constant(&d, 0.0, 1.0);
        for i in 0..d.nodes() {
            w.u[i] = 1.0 + (k * d.coords(i).0).cos();
        }
        let got = norms(&w).u.l8;
        // independent fine Simpson quadrature of |1 + cos|^8
        let m = 200_000;
        let h = hi / m as f64;
        let f = |x: f64| (1.0 + (k * x).cos()).abs().powi(8);
        let mut s = f(0.0) + f(hi);
        for i in 1..m {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let integral = s * h / 3.0;
        let want = (integral / hi).powf(0.125);
        assert_relative_eq!(got, want, epsilon = 1e-6);
    }

    #[test]
    fn sigma_profile_midpoint_and_monotonicity() {
        let d = Domain::rectangle((0.0, 4.0), 3, (0.0, 960.0), 481).unwrap();
        let s = sigma_profile(&d, 0.128, 0.011, 480.0).unwrap();
        // midpoint row: y = 480 at iy = 240
        let mid = s[d.node(1, 240)];
        assert_relative_eq!(mid, 0.064, epsilon = 1e-12);
        for iy in 1..d.n[1] {
            assert!(s[d.node(0, iy)] < s[d.node(0, iy - 1)]);
        }
    }

    #[test]
    fn transverse_kz_zero_matches_dense_spectrum() {
        let p = ParameterSet::standard(0.08, 0.3);
        let s = &homogeneous_states(&p).unwrap()[0];
        let d = Domain::rectangle((0.0, 6.0), 5, (0.0, 5.0), 4).unwrap();
        let w = Field::constant(&d, s.u, s.v);
        let jac = jacobian(&w, &p).unwrap();
        let n2 = 2 * d.nodes();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n2, n2);
        for i in 0..n2 {
            for k in jac.row_ptr[i]..jac.row_ptr[i + 1] {
                dense[(i, jac.col_idx[k])] += jac.values[k];
            }
        }
        let want = dense
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let opts = ArnoldiOptions {
            n_pairs: 4,
            krylov_dim: 40,
            ..Default::default()
        };
        let spec = transverse_spectrum(&w, &p, &[0.0, 1.0], &opts).unwrap();
        assert_relative_eq!(spec[0].1, want, epsilon = 1e-7);
        // strong transverse damping pushes the spectrum left
        assert!(spec[1].1 < spec[0].1);
    }

    #[test]
    fn quantized_kz_spacing() {
        let ks = quantized_kz(200.0, 0.05);
        assert_eq!(ks[0], 0.0);
        assert_relative_eq!(ks[1], std::f64::consts::PI / 400.0, epsilon = 1e-15);
        assert!(ks.last().unwrap() <= &0.05);
        assert!(ks.len() > 5);
    }

    #[test]
    fn field_dump_round_trips_exactly() {
        let d = Domain::rectangle((0.0, 3.5), 4, (-1.0, 2.0), 3).unwrap();
        let mut w = Field::constant(&d, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for i in 0..d.nodes() {
            w.u[i] = rng.random_range(-1.0..1.0);
            w.v[i] = rng.random_range(0.0..5.0);
        }
        w.sigma = Some((0..d.nodes()).map(|i| 0.1 + 0.001 * i as f64).collect());
        let mut buf = Vec::new();
        write_field(&w, &mut buf).unwrap();
        let back = read_field(&buf[..]).unwrap();
        assert_eq!(back.u, w.u);
        assert_eq!(back.v, w.v);
        assert_eq!(back.sigma, w.sigma);
        assert_eq!(back.domain, w.domain);

        // 1D without sigma
        let d1 = Domain::line(0.0, 1.0, 5).unwrap();
        let w1 = Field::constant(&d1, 0.25, 1.5);
        let mut buf1 = Vec::new();
        write_field(&w1, &mut buf1).unwrap();
        let back1 = read_field(&buf1[..]).unwrap();
        assert_eq!(back1.u, w1.u);
        assert!(back1.sigma.is_none());
    }
}
