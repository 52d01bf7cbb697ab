//! Pattern formation by direct time integration on a one-dimensional
//! domain at gamma = 0.3.
//!
//! Below the Turing onset a randomly perturbed uniform state grows into a
//! periodic pattern; the integrator stops early once the relative change
//! over a hundred time units drops below the quiescence tolerance. The
//! final wavelength sits inside the linearly unstable band.

use benthos::continuation::homogeneous_start;
use benthos::homogeneous::{critical_point, homogeneous_states, neutral_wavenumbers};
use benthos::kinetics::ParameterSet;
use benthos::pde::{norms, Domain};
use benthos::timestep::{integrate, perturb, IntegrationRun};
use benthos::Result;

fn main() -> Result<()> {
    let gamma = 0.3;
    let p0 = ParameterSet::standard(0.12, gamma);
    let (sc, kc) = critical_point(&p0, (0.08, 0.2))?;
    let sigma = 0.08;
    let p = p0.with_sigma(sigma);
    println!("sigma = {sigma} (onset {sc:.4}, k_c {kc:.4})");

    let s1 = homogeneous_states(&p)?[0];
    let (k_lo, k_hi) = neutral_wavenumbers(&s1, &p)?;
    println!("unstable band: ({k_lo:.4}, {k_hi:.4})");

    let domain = Domain::line(0.0, 8.0 * std::f64::consts::PI / kc, 129)?;
    let base = homogeneous_start(&p, 1, &domain)?;
    let mut run = IntegrationRun::new(perturb(&base, 0.01, 11)?, 5e3);
    run.dt = 0.25;
    run.snapshots = vec![50.0, 200.0];

    let traj = integrate(&run, &p)?;
    println!(
        "integrated to t = {} (quiescent: {}, relative change {:.2e})",
        traj.final_time, traj.report.quiescent, traj.report.relative_change
    );
    for (t, w) in &traj.snapshots {
        let n = norms(w);
        println!("  t = {t:>6}: |u|_2 = {:.4}, |u|_inf = {:.4}", n.u.l2, n.u.l8);
    }
    let n = norms(&traj.final_field);
    println!("  final:      |u|_2 = {:.4}, |u|_inf = {:.4}", n.u.l2, n.u.l8);

    // count pattern cells: interior maxima of u
    let u = &traj.final_field.u;
    let peaks = (1..u.len() - 1)
        .filter(|&i| u[i] > u[i - 1] && u[i] > u[i + 1] && u[i] > 1.05)
        .count();
    let length = 8.0 * std::f64::consts::PI / kc;
    let k_sel = peaks as f64 * 2.0 * std::f64::consts::PI / length;
    println!("{peaks} pattern cells -> selected wavenumber {k_sel:.4}");
    Ok(())
}
