//! Two-dimensional bifurcation diagram at gamma = 0.25: stripes, hot and
//! cold hexagons, and the mixed-mode branches connecting them.
//!
//! The domain is the hexagon-commensurate rectangle lx = 4 pi / k_c,
//! ly = 4 pi / (sqrt(3) k_c), on which all lattice modes close under
//! zero-flux conditions. Branches are seeded from amplitude-equation
//! predictions slightly below onset, corrected by Newton, and continued in
//! both directions. The run prints, per branch, the termination, the
//! stability window, and the two mode amplitudes
//!
//!   A ~ cos(k x),   B ~ cos(k x / 2) cos(sqrt(3) k y / 2)
//!
//! whose limits identify the stripe (B -> 0) and hexagon (B -> 2A) ends of
//! the mixed-mode branches.

use benthos::continuation::{
    continue_branch, newton_correct, Branch, ContinuationSettings, PointTag,
};
use benthos::homogeneous::{critical_point, homogeneous_states};
use benthos::kinetics::ParameterSet;
use benthos::landau::{
    hexagon_amplitudes, landau_coefficients, mixed_mode_amplitudes, reconstruct_field,
    stripe_amplitudes, AmplitudeTriple, EvalMode, LandauCoefficients, MixedKind, PatternTag,
};
use benthos::pde::{Domain, Field};
use benthos::Result;

/// Projections of the bacteria deviation onto the two lattice cosines.
fn mode_amplitudes(w: &Field, k: f64) -> (f64, f64) {
    let d = &w.domain;
    let n = d.nodes();
    let mean = w.u.iter().sum::<f64>() / n as f64;
    let (mut num_a, mut den_a) = (0.0, 0.0);
    let (mut num_b, mut den_b) = (0.0, 0.0);
    for i in 0..n {
        let (x, y) = d.coords(i);
        let phi_a = (k * x).cos();
        let phi_b = (0.5 * k * x).cos() * (0.5 * 3.0f64.sqrt() * k * y).cos();
        let wt = d.weight(i);
        num_a += wt * (w.u[i] - mean) * phi_a;
        den_a += wt * phi_a * phi_a;
        num_b += wt * (w.u[i] - mean) * phi_b;
        den_b += wt * phi_b * phi_b;
    }
    (num_a / den_a, num_b / den_b)
}

/// First-order lattice state `base + (a cos(kx) + 2b cos(kx/2)cos(r3 ky/2)) phi`.
/// Unlike the full reconstruction this has no quadratic terms, which keeps
/// large-amplitude hexagon guesses inside the guarded state domain.
fn lattice_guess(a: f64, b: f64, lc: &LandauCoefficients, domain: &Domain) -> Field {
    let (pu, pv) = (lc.phi[0].re, lc.phi[1].re);
    let n = domain.nodes();
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    for i in 0..n {
        let (x, y) = domain.coords(i);
        let dev = a * (lc.k * x).cos()
            + 2.0 * b * (0.5 * lc.k * x).cos() * (0.5 * 3.0f64.sqrt() * lc.k * y).cos();
        u[i] = lc.base.u + pu * dev;
        v[i] = lc.base.v + pv * dev;
    }
    Field { domain: domain.clone(), u, v, sigma: None }
}

fn describe(branch: &Branch, k: f64) {
    println!("branch `{}`: {} points, {}", branch.label, branch.points.len(), branch.termination);
    let stable: Vec<f64> = branch
        .points
        .iter()
        .filter(|pt| pt.n_unstable == 0)
        .map(|pt| pt.sigma)
        .collect();
    if stable.is_empty() {
        println!("  unstable throughout");
    } else {
        let lo = stable.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = stable.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("  stable for sigma in [{lo:.4}, {hi:.4}] ({} points)", stable.len());
    }
    let m = branch.points.len();
    for (i, pt) in branch.points.iter().enumerate() {
        let event = pt.tag != PointTag::Regular;
        if event || i % 8 == 0 || i + 1 == m {
            let (a, b) = mode_amplitudes(&pt.field, k);
            let marker = if event { format!(" <- {}", pt.tag) } else { String::new() };
            println!(
                "  [{i:3}] sigma = {:.6}, n_unstable = {}, A = {:+.4}, B = {:+.4}{marker}",
                pt.sigma, pt.n_unstable, a, b
            );
        }
    }
}

fn seed_and_continue(
    guess: &Field,
    p: &ParameterSet,
    k: f64,
    label: &str,
    settings: &ContinuationSettings,
) -> Result<(Branch, Branch)> {
    let u_lo = guess.u.iter().cloned().fold(f64::INFINITY, f64::min);
    let u_hi = guess.u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (state, iters) = newton_correct(guess, p, settings.newton_tol, 40)?;
    let (a, b) = mode_amplitudes(&state, k);
    println!(
        "seeded `{label}` in {iters} Newton iterations (guess u in [{u_lo:.3}, {u_hi:.3}], \
         converged A = {a:+.4}, B = {b:+.4})"
    );
    let up = continue_branch(&state, p, 1.0, &format!("{label}_up"), settings)?;
    let down = continue_branch(&state, p, -1.0, &format!("{label}_down"), settings)?;
    Ok((up, down))
}

fn main() -> Result<()> {
    let gamma = 0.25;
    let p0 = ParameterSet::standard(0.12, gamma);
    let (sc, kc) = critical_point(&p0, (0.08, 0.2))?;
    println!("critical point: sigma_c = {sc:.8}, k_c = {kc:.8}");

    let lx = 4.0 * std::f64::consts::PI / kc;
    let ly = lx / 3.0f64.sqrt();
    let nx = 33;
    let ny = 19;
    let domain = Domain::rectangle((0.0, lx), nx, (0.0, ly), ny)?;
    println!("domain: {lx:.2} x {ly:.2}, grid {nx} x {ny}");

    let settings = ContinuationSettings {
        ds_max: 0.02,
        max_steps: 250,
        sigma_bounds: (0.02, 0.145),
        eig_shift: 0.15,
        krylov_dim: 140,
        ..ContinuationSettings::default()
    };

    let pc = p0.with_sigma(sc);
    let s0 = homogeneous_states(&pc)?[0];

    // stripes and the hot hexagons tolerate the full reconstruction
    for (label, offset) in [("stripes", 0.002), ("hot_hex", 0.01)] {
        let sigma_eval = sc - offset;
        let lc = landau_coefficients(&s0, &pc, kc, sigma_eval, EvalMode::Classical)?;
        let p_eval = p0.with_sigma(sigma_eval);
        let triple = match label {
            "stripes" => AmplitudeTriple::stripe(stripe_amplitudes(&lc)?.0),
            _ => AmplitudeTriple::hexagon(hexagon_amplitudes(&lc)?.0, PatternTag::HexagonPlus),
        };
        println!("{label}: amplitude {:+.4} at sigma_c - {offset}", triple.a1.re);
        let guess = reconstruct_field(&triple, &lc, &domain)?;
        match seed_and_continue(&guess, &p_eval, kc, label, &settings) {
            Ok((up, down)) => {
                describe(&up, kc);
                describe(&down, kc);
            }
            Err(e) => println!("  {label} FAILED: {e}"),
        }
    }

    // cold hexagons and beans start from first-order lattice guesses
    let mixed_seeds: Vec<(String, f64, f64, f64)> = {
        let lc_hex = landau_coefficients(&s0, &pc, kc, sc - 0.01, EvalMode::Classical)?;
        let h_minus = hexagon_amplitudes(&lc_hex)?.1;
        let lc_bean = landau_coefficients(&s0, &pc, kc, sc - 0.006, EvalMode::Classical)?;
        let bean = mixed_mode_amplitudes(&lc_bean)
            .into_iter()
            .find(|t| t.mixed_kind() == Some(MixedKind::Bean));
        let mut seeds = vec![("cold_hex".to_string(), 0.01, h_minus, h_minus)];
        if let Some(t) = bean {
            seeds.push(("bean".to_string(), 0.006, t.a1.re, t.a2.re));
        }
        seeds
    };
    for (label, offset, a, b) in mixed_seeds {
        let sigma_eval = sc - offset;
        let lc = landau_coefficients(&s0, &pc, kc, sigma_eval, EvalMode::Classical)?;
        let p_eval = p0.with_sigma(sigma_eval);
        println!("{label}: amplitudes A = {a:+.4}, B = {b:+.4} at sigma_c - {offset}");
        let guess = lattice_guess(a, b, &lc, &domain);
        match seed_and_continue(&guess, &p_eval, kc, &label, &settings) {
            Ok((up, down)) => {
                describe(&up, kc);
                describe(&down, kc);
            }
            Err(e) => println!("  {label} FAILED: {e}"),
        }
    }

    Ok(())
}
