//! Temporary diagnostic: dense spectrum of a 2D stripe-state Jacobian
//! versus the shift-invert Arnoldi at various settings.

use benthos::continuation::newton_correct;
use benthos::homogeneous::{critical_point, homogeneous_states};
use benthos::kinetics::ParameterSet;
use benthos::landau::{
    landau_coefficients, reconstruct_field, stripe_amplitudes, AmplitudeTriple, EvalMode,
};
use benthos::linalg::{leading_eigenpairs, ArnoldiOptions};
use benthos::pde::{jacobian, Domain};
use benthos::Result;
use nalgebra::DMatrix;

fn main() -> Result<()> {
    let gamma = 0.25;
    let p0 = ParameterSet::standard(0.12, gamma);
    let (sc, kc) = critical_point(&p0, (0.08, 0.2))?;
    let lx = 4.0 * std::f64::consts::PI / kc;
    let ly = lx / 3.0f64.sqrt();
    let domain = Domain::rectangle((0.0, lx), 33, (0.0, ly), 19)?;

    let pc = p0.with_sigma(sc);
    let s0 = homogeneous_states(&pc)?[0];
    let sigma_eval = sc - 0.002;
    let lc = landau_coefficients(&s0, &pc, kc, sigma_eval, EvalMode::Classical)?;
    let (s_plus, _) = stripe_amplitudes(&lc)?;
    let guess = reconstruct_field(&AmplitudeTriple::stripe(s_plus), &lc, &domain)?;
    let p_eval = p0.with_sigma(sigma_eval);
    let (state, _) = newton_correct(&guess, &p_eval, 1e-8, 25)?;
    println!("stripe state ready");

    let jac = jacobian(&state, &p_eval)?;
    let band = jac.to_banded();
    let n = band.n();
    let (kl, ku) = band.bandwidths();
    println!("n = {n}, bandwidths = ({kl}, {ku})");

    // Gershgorin row bounds
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut centre = 0.0;
        let mut radius = 0.0;
        for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
            let x = band.get(i, j);
            if j == i {
                centre = x;
            } else {
                radius += x.abs();
            }
        }
        hi = hi.max(centre + radius);
    }
    println!("gershgorin right edge: {hi:.4}");

    // dense spectrum (one-off, minutes)
    let dense = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if j + kl >= i && i + ku >= j {
            band.get(i, j)
        } else {
            0.0
        }
    });
    let t0 = std::time::Instant::now();
    let eigs = dense.complex_eigenvalues();
    let mut re: Vec<(f64, f64)> = eigs.iter().map(|z| (z.re, z.im)).collect();
    re.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    println!("dense eigendecomposition in {:.1?}", t0.elapsed());
    println!("rightmost 14:");
    for (r, i) in re.iter().take(14) {
        println!("  {r:+.8} {i:+.6}i");
    }
    let near_half = re.iter().map(|(r, _)| (r - 0.5).abs()).fold(f64::INFINITY, f64::min);
    let near_one = re.iter().map(|(r, _)| (r - 1.0).abs()).fold(f64::INFINITY, f64::min);
    println!("closest |Re - 0.5| = {near_half:.4}, |Re - 1.0| = {near_one:.4}");

    // Arnoldi attempts
    for (shift, krylov, block) in [
        (0.5, 80, 2),
        (0.5, 160, 2),
        (1.0, 160, 2),
        (0.2, 120, 2),
        (0.5, 160, 3),
        (0.2, 200, 3),
    ] {
        let mut shifted = jac.clone();
        shifted.shift_identity(-shift);
        let mut b = shifted.to_banded();
        b.lu_factor().unwrap();
        let opts = ArnoldiOptions {
            n_pairs: 8,
            block,
            shift,
            krylov_dim: krylov,
            seed: 7,
            tol: 1e-9,
        };
        let t0 = std::time::Instant::now();
        let out = leading_eigenpairs(n, |x, y| y.copy_from_slice(&b.solve(x)), &opts);
        match out {
            Ok(pairs) => {
                let vals: Vec<String> =
                    pairs.iter().take(4).map(|p| format!("{:+.6}", p.value.re)).collect();
                println!(
                    "shift {shift}, krylov {krylov}, block {block}: OK in {:.1?}, top: {}",
                    t0.elapsed(),
                    vals.join(", ")
                );
            }
            Err(e) => println!("shift {shift}, krylov {krylov}, block {block}: {e}"),
        }
    }
    Ok(())
}
