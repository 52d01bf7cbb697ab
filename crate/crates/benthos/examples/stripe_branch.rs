//! Wavelength selection on a one-dimensional interval at gamma = 0.3.
//!
//! On a line of length 8 pi / k_c (four critical wavelengths, zero-flux
//! ends) the admissible wavenumbers are kappa_n = n pi / L, so modes with
//! 4, 3.5, 4.5 and 3 periods all sit inside the instability band for part
//! of the unstable sigma range. Walking the uniform branch downward finds
//! their onsets in the order predicted by the dispersion relation, and each
//! switched pattern branch runs down to the sigma where its own wavenumber
//! leaves the band and the branch rejoins the uniform state.

use benthos::continuation::{
    continue_branch, continue_switched, homogeneous_start, switch_branch, ContinuationSettings,
    PointTag, Termination,
};
use benthos::homogeneous::{dispersion, homogeneous_states, critical_point};
use benthos::kinetics::ParameterSet;
use benthos::pde::Domain;
use benthos::Result;

/// Half-cosine index whose profile dominates the packed mode vector.
fn dominant_mode(mode: &[f64], domain: &Domain, max_n: usize) -> usize {
    let n_nodes = domain.nodes();
    let length = domain.hi[0] - domain.lo[0];
    let mut best = (0usize, 0.0f64);
    for j in 1..=max_n {
        let mut proj = 0.0;
        for i in 0..n_nodes {
            let (x, _) = domain.coords(i);
            proj += domain.weight(i) * mode[2 * i] * (j as f64 * std::f64::consts::PI * x / length).cos();
        }
        if proj.abs() > best.1 {
            best = (j, proj.abs());
        }
    }
    best.0
}

/// Sigma at which the growth rate of a fixed wavenumber crosses zero,
/// bisected on the uniform root u1.
fn neutral_sigma(p0: &ParameterSet, kappa: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let rate = |sigma: f64| -> Result<f64> {
        let p = p0.with_sigma(sigma);
        let s = homogeneous_states(&p)?[0];
        Ok(dispersion(&s, &p, kappa)?.mu_plus.re)
    };
    let mut f_lo = rate(lo)?;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let f_mid = rate(mid)?;
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn main() -> Result<()> {
    let gamma = 0.3;
    let p0 = ParameterSet::standard(0.115, gamma);
    let (sc, kc) = critical_point(&p0, (0.08, 0.2))?;
    println!("critical point: sigma_c = {sc:.8}, k_c = {kc:.8}");

    let length = 8.0 * std::f64::consts::PI / kc;
    let domain = Domain::line(0.0, length, 65)?;
    println!("domain: length = {length:.4}, 65 nodes");

    // walk the uniform branch down through the four onsets
    let walk_settings = ContinuationSettings {
        ds_max: 0.05,
        max_steps: 300,
        sigma_bounds: (0.095, 0.118),
        stop_on_homogeneous: false,
        ..ContinuationSettings::default()
    };
    let start = homogeneous_start(&p0, 1, &domain)?;
    let trunk = continue_branch(&start, &p0, -1.0, "uniform", &walk_settings)?;
    println!("uniform walk: {} points, {}", trunk.points.len(), trunk.termination);

    let mut onsets: Vec<(usize, f64, usize)> = Vec::new();
    for (i, pt) in trunk.points.iter().enumerate() {
        if pt.tag == PointTag::Bifurcation {
            let mode = pt.crossing_mode.as_ref().expect("bifurcations store modes");
            let n = dominant_mode(mode, &domain, 12);
            println!("  onset at sigma = {:.6}: {} periods (mode {n})", pt.sigma, n as f64 / 2.0);
            onsets.push((i, pt.sigma, n));
        }
    }

    // each pattern branch terminates where its wavenumber leaves the band
    let branch_settings = ContinuationSettings {
        ds_max: 0.02,
        max_steps: 400,
        sigma_bounds: (0.02, 0.125),
        ..ContinuationSettings::default()
    };
    for &(idx, sigma_on, n) in &onsets {
        let bif = &trunk.points[idx];
        let kappa = n as f64 * std::f64::consts::PI / length;
        let expect_on = neutral_sigma(&p0, kappa, sigma_on - 0.02, sigma_on + 0.02)?;
        let expect_off = neutral_sigma(&p0, kappa, 0.02, 0.06)?;
        let start = switch_branch(bif, &p0, 1.0, 0.02, &branch_settings)?;
        let tangent = bif.crossing_mode.clone().unwrap();
        let label = format!("periods_{}", n as f64 / 2.0);
        let branch = continue_switched(&start, &tangent, &p0, &label, &branch_settings)?;
        let last = branch.points.last().unwrap();
        println!(
            "branch `{label}`: {} points, {}; last sigma = {:.6}",
            branch.points.len(),
            branch.termination,
            last.sigma
        );
        println!("  onset     {sigma_on:.6} vs neutral {expect_on:.6} (diff {:+.2e})", sigma_on - expect_on);
        if let Termination::Homogeneous { sigma } = branch.termination {
            println!("  junction  {sigma:.6} vs neutral {expect_off:.6} (diff {:+.2e})", sigma - expect_off);
        }
    }

    Ok(())
}
