//! Subcritical stripes and homoclinic snaking at gamma = 0.004.
//!
//! With the cubic stripe coefficient positive, stripes bifurcate toward
//! sigma above onset: the branch leaves the uniform state at sigma_c,
//! climbs to a fold near 0.1985, and the small-amplitude segment in
//! between sheds a ladder of modulated-stripe bifurcations. Switching at
//! the first of these yields a localized branch whose folds stack up in a
//! narrow sigma window (the snaking region).
//!
//! The domain is (0, 48 pi / k_c), twenty-four critical wavelengths, so the
//! localized state has room to grow cell pairs one rung at a time.

use benthos::continuation::{
    continue_branch, continue_switched, newton_correct, switch_branch, ContinuationSettings,
    PointTag, Termination,
};
use benthos::homogeneous::{critical_point, homogeneous_states};
use benthos::kinetics::ParameterSet;
use benthos::landau::{
    landau_coefficients, reconstruct_field, stripe_amplitudes, AmplitudeTriple, EvalMode,
};
use benthos::pde::Domain;
use benthos::Result;

fn main() -> Result<()> {
    let gamma = 0.004;
    let p0 = ParameterSet::standard(0.2, gamma);
    let (sc, kc) = critical_point(&p0, (0.15, 0.24))?;
    println!("critical point: sigma_c = {sc:.8}, k_c = {kc:.8}");

    let length = 48.0 * std::f64::consts::PI / kc;
    let domain = Domain::line(0.0, length, 385)?;
    println!("domain: length = {length:.2}, 385 nodes");

    // the subcritical stripe exists just above onset at small amplitude
    let pc = p0.with_sigma(sc);
    let s0 = homogeneous_states(&pc)?[0];
    let sigma_eval = sc + 0.0005;
    let lc = landau_coefficients(&s0, &pc, kc, sigma_eval, EvalMode::Classical)?;
    let (s_plus, _) = stripe_amplitudes(&lc)?;
    println!("stripe amplitude at sigma_c + 0.0005: {s_plus:.4} (c3 = {:+.5})", lc.c3.re);
    let guess = reconstruct_field(&AmplitudeTriple::stripe(s_plus), &lc, &domain)?;
    let p_eval = p0.with_sigma(sigma_eval);
    let (state, iters) = newton_correct(&guess, &p_eval, 1e-8, 25)?;
    println!("seeded stripes in {iters} Newton iterations");

    // down: rejoin the uniform state at onset; up: climb to the fold
    let settings = ContinuationSettings {
        ds_max: 0.01,
        max_steps: 200,
        sigma_bounds: (0.17, 0.205),
        ..ContinuationSettings::default()
    };
    let down = continue_branch(&state, &p_eval, -1.0, "stripes_down", &settings)?;
    println!("stripes_down: {} points, {}", down.points.len(), down.termination);
    if let Termination::Homogeneous { sigma } = down.termination {
        println!("  onset at sigma = {sigma:.6} (sigma_c = {sc:.6})");
    }

    let up = continue_branch(&state, &p_eval, 1.0, "stripes_up", &settings)?;
    println!("stripes_up: {} points, {}", up.points.len(), up.termination);
    let fold_idx = up.points.iter().position(|pt| pt.tag == PointTag::Fold);
    let Some(fold_idx) = fold_idx else {
        println!("  no fold found");
        return Ok(());
    };
    let fold_sigma = up.points[fold_idx].sigma;
    println!("  fold at sigma = {fold_sigma:.6} (point {fold_idx})");
    let ladder: Vec<usize> = up.points[..fold_idx]
        .iter()
        .enumerate()
        .filter(|(_, pt)| pt.tag == PointTag::Bifurcation)
        .map(|(i, _)| i)
        .collect();
    println!("  {} bifurcations between onset and fold:", ladder.len());
    for &i in &ladder {
        println!("    point {i}: sigma = {:.6}", up.points[i].sigma);
    }

    // the first ladder bifurcation carries the localized branch
    let Some(&first) = ladder.first() else {
        return Ok(());
    };
    let bif = &up.points[first];
    let snake_settings = ContinuationSettings {
        ds_max: 0.01,
        max_steps: 700,
        sigma_bounds: (0.17, 0.205),
        ..ContinuationSettings::default()
    };
    for sign in [1.0, -1.0] {
        let label = format!("localized_{}", if sign > 0.0 { "plus" } else { "minus" });
        let start = switch_branch(bif, &p0, sign, 0.02, &snake_settings)?;
        let tangent = bif.crossing_mode.clone().unwrap();
        let branch = continue_switched(&start, &tangent, &p0, &label, &snake_settings)?;
        let folds: Vec<f64> = branch
            .points
            .iter()
            .filter(|pt| pt.tag == PointTag::Fold)
            .map(|pt| pt.sigma)
            .collect();
        println!("{label}: {} points, {}; {} folds", branch.points.len(), branch.termination, folds.len());
        if !folds.is_empty() {
            let lo = folds.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = folds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            println!("  fold sigmas in [{lo:.6}, {hi:.6}], width {:.2e}, centre {:.6}", hi - lo, 0.5 * (hi + lo));
            for (i, s) in folds.iter().enumerate() {
                println!("    fold {i}: sigma = {s:.6}");
            }
        }
        let last = branch.points.last().unwrap();
        println!("  last point: sigma = {:.6}, |u|_8 = {:.4}", last.sigma, last.norms.u.l8);
    }

    Ok(())
}
