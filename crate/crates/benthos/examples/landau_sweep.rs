//! Amplitude-equation coefficients along the Turing curve.
//!
//! Sweeping gamma tracks the onset (sigma_c, k_c) and the four cubic
//! coefficients c1..c4 evaluated there. Two sign changes organise the
//! pattern zoo: c3 turns positive below gamma ~ 0.21 (stripes become
//! subcritical) and c3 + 2 c4 turns positive below gamma ~ 0.08 (the
//! hexagon cubic loses saturation).

use benthos::kinetics::ParameterSet;
use benthos::landau::{coefficient_sweep, CubicVariant, EvalMode, SweepRow};
use benthos::Result;

fn bisect_sign_change(
    p0: &ParameterSet,
    mut lo: f64,
    mut hi: f64,
    value: impl Fn(&SweepRow) -> f64,
) -> Result<f64> {
    let eval = |gamma: f64| -> Result<f64> {
        let rows = coefficient_sweep(
            p0,
            &[gamma],
            (0.08, 0.3),
            EvalMode::Classical,
            CubicVariant::AsPrinted,
        )?;
        Ok(value(&rows[0]))
    };
    let mut f_lo = eval(lo)?;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let f_mid = eval(mid)?;
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn main() -> Result<()> {
    let p0 = ParameterSet::standard(0.12, 0.25);
    let gammas: Vec<f64> = (0..=12).map(|i| 0.05 + 0.025 * i as f64).collect();
    let rows = coefficient_sweep(&p0, &gammas, (0.08, 0.3), EvalMode::Classical, CubicVariant::AsPrinted)?;
    println!("gamma   sigma_c   k_c      c2        c3        c3+2c4");
    for r in &rows {
        println!(
            "{:<7.3} {:<9.5} {:<8.5} {:+.6} {:+.6} {:+.6}",
            r.gamma,
            r.sigma_c,
            r.k_c,
            r.c2,
            r.c3,
            r.c3 + 2.0 * r.c4
        );
    }

    let g_stripe = bisect_sign_change(&p0, 0.15, 0.25, |r| r.c3)?;
    println!("c3 changes sign at gamma = {g_stripe:.5}");
    let g_hex = bisect_sign_change(&p0, 0.05, 0.15, |r| r.c3 + 2.0 * r.c4)?;
    println!("c3 + 2 c4 changes sign at gamma = {g_hex:.5}");
    Ok(())
}
