//! Growth rates of spatial modes around a uniform state.
//!
//! Below the Turing onset every wavenumber decays; above it a band
//! (k_minus, k_plus) grows. The fast eigenvalue branch mu_plus is real near
//! the band, and the band edges match the closed-form neutral wavenumbers.

use benthos::homogeneous::{
    critical_point, dispersion, homogeneous_states, neutral_wavenumbers,
};
use benthos::kinetics::ParameterSet;
use benthos::Result;

fn main() -> Result<()> {
    let gamma = 0.25;
    let p0 = ParameterSet::standard(0.12, gamma);
    let (sc, kc) = critical_point(&p0, (0.08, 0.2))?;
    println!("onset: sigma_c = {sc:.6}, k_c = {kc:.6}");

    for offset in [0.01, 0.0, -0.01] {
        let p = p0.with_sigma(sc + offset);
        let s1 = homogeneous_states(&p)?[0];
        let band = neutral_wavenumbers(&s1, &p);
        let mut peak = (0.0, f64::NEG_INFINITY);
        for i in 0..=600 {
            let k = 0.6 * i as f64 / 600.0;
            let mu = dispersion(&s1, &p, k)?.mu_plus.re;
            if mu > peak.1 {
                peak = (k, mu);
            }
        }
        match band {
            Ok((lo, hi)) => println!(
                "sigma = {:.4}: band ({lo:.5}, {hi:.5}), peak mu+ = {:+.3e} at k = {:.5}",
                p.sigma, peak.1, peak.0
            ),
            Err(_) => println!(
                "sigma = {:.4}: no unstable band, peak mu+ = {:+.3e} at k = {:.5}",
                p.sigma, peak.1, peak.0
            ),
        }
    }

    // sample curve at sigma_c - 0.01 for plotting
    let p = p0.with_sigma(sc - 0.01);
    let s1 = homogeneous_states(&p)?[0];
    let out = std::env::temp_dir().join("dispersion_example.csv");
    let mut rows = String::from("k,re_mu_plus,im_mu_plus\n");
    for i in 0..=300 {
        let k = 0.5 * i as f64 / 300.0;
        let d = dispersion(&s1, &p, k)?;
        rows.push_str(&format!("{k},{},{}\n", d.mu_plus.re, d.mu_plus.im));
    }
    std::fs::write(&out, rows)?;
    println!("curve written to {}", out.display());
    Ok(())
}
