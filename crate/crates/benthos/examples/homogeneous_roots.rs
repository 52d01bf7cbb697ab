//! Uniform steady states: the cubic, its roots, their stability, and the
//! Turing onsets for three values of the feeding asymmetry gamma.
//!
//! At sigma = 0.1 the parameter choice makes (u, v) = (1, 1) an exact root,
//! a convenient anchor for checking the cubic coefficients.

use benthos::homogeneous::{
    critical_point, cubic_coefficients, homogeneous_states, neutral_wavenumbers,
};
use benthos::kinetics::ParameterSet;
use benthos::Result;

fn main() -> Result<()> {
    let p = ParameterSet::standard(0.1, 0.25);
    let cubic = cubic_coefficients(&p)?;
    println!("cubic u^3 + b u^2 + c u + d at sigma = 0.1, gamma = 0.25:");
    println!("  b = {:+.6}, c = {:+.6}, d = {:+.6}", cubic.b, cubic.c, cubic.d);
    println!("  pieces: b = b_g g + b_s s + b_0, c = c_g g + c_s s + c_sg s g + c_0, d = d_s s + d_0:");
    println!(
        "  b_g = {:.4}, b_s = {:.4}, b_0 = {:.4}, c_g = {:.4}, c_s = {:.4}, c_sg = {:.4}, c_0 = {:.4}, d_s = {:.4}, d_0 = {:.6}",
        cubic.b_g, cubic.b_s, cubic.b_0, cubic.c_g, cubic.c_s, cubic.c_sg, cubic.c_0, cubic.d_s, cubic.d_0
    );

    println!("roots (largest u first):");
    for s in homogeneous_states(&p)? {
        println!(
            "  u{} = ({:+.9}, {:+.9})  real: {}, positive: {}, class: {}",
            s.index, s.u, s.v, s.is_real, s.is_positive, s.stability.kind
        );
    }

    // the band of linearly growing wavenumbers around the first root
    let p_band = p.with_sigma(0.11);
    let s1 = homogeneous_states(&p_band)?[0];
    let (k_lo, k_hi) = neutral_wavenumbers(&s1, &p_band)?;
    println!("unstable band at sigma = 0.11: k in ({k_lo:.5}, {k_hi:.5})");

    println!("turing onsets (sigma_c, k_c):");
    for (gamma, bracket) in [(0.3, (0.08, 0.2)), (0.25, (0.08, 0.2)), (0.004, (0.15, 0.24))] {
        let p = ParameterSet::standard(0.12, gamma);
        let (sc, kc) = critical_point(&p, bracket)?;
        println!("  gamma = {gamma}: sigma_c = {sc:.6}, k_c = {kc:.6}");
    }

    // the second onset of the lower branch at gamma = 0.3
    let p = ParameterSet::standard(0.12, 0.3);
    let (sc2, kc2) = critical_point(&p, (0.02, 0.04))?;
    println!("  gamma = 0.3, lower onset: sigma_c = {sc2:.6}, k_c = {kc2:.6}");

    Ok(())
}
