//! Planform competition near onset from the three-mode amplitude equations.
//!
//! For a fixed gamma the quadratic and cubic coefficients decide which
//! patterns exist and which of them the amplitude dynamics stabilises:
//! stripes, two hexagon families (hot: maxima on the lattice, cold:
//! minima), and the mixed modes between them. The subcriticality index
//! c2^2 / (4 (c3 + 2 c4)^2) measures how far above onset the hexagon fold
//! reaches.

use benthos::homogeneous::{critical_point, homogeneous_states};
use benthos::kinetics::ParameterSet;
use benthos::landau::{
    amplitude_stability, hexagon_amplitudes, landau_coefficients, mixed_mode_amplitudes,
    stripe_amplitudes, subcriticality_index, AmplitudeTriple, EvalMode, PatternTag,
};
use benthos::Result;

fn show(label: &str, t: &AmplitudeTriple, lc: &benthos::landau::LandauCoefficients) -> Result<()> {
    let st = amplitude_stability(t, lc);
    let eigs: Vec<String> = st.eigenvalues.iter().map(|z| format!("{:+.4}", z.re)).collect();
    println!(
        "  {label:<12} ({:+.4}, {:+.4}, {:+.4})  {}  growth rates: {}",
        t.a1.re,
        t.a2.re,
        t.a3.re,
        if st.stable { "stable  " } else { "unstable" },
        eigs.join(", ")
    );
    Ok(())
}

fn main() -> Result<()> {
    let gamma = 0.25;
    let p0 = ParameterSet::standard(0.12, gamma);
    let (sc, kc) = critical_point(&p0, (0.08, 0.2))?;
    let pc = p0.with_sigma(sc);
    let s0 = homogeneous_states(&pc)?[0];

    for offset in [0.002, 0.01, 0.05] {
        let lc = landau_coefficients(&s0, &pc, kc, sc - offset, EvalMode::Classical)?;
        println!(
            "sigma = sigma_c - {offset} (c1 = {:+.5}, c2 = {:+.5}, c3 = {:+.5}, c4 = {:+.5}):",
            lc.c1.re, lc.c2.re, lc.c3.re, lc.c4.re
        );
        show("homogeneous", &AmplitudeTriple::homogeneous(), &lc)?;
        if let Ok((sp, _)) = stripe_amplitudes(&lc) {
            show("stripes", &AmplitudeTriple::stripe(sp), &lc)?;
        }
        if let Ok((hp, hm)) = hexagon_amplitudes(&lc) {
            show("hot hex", &AmplitudeTriple::hexagon(hp, PatternTag::HexagonPlus), &lc)?;
            show("cold hex", &AmplitudeTriple::hexagon(hm, PatternTag::HexagonMinus), &lc)?;
        }
        for t in mixed_mode_amplitudes(&lc) {
            if let Some(kind) = t.mixed_kind() {
                show(&format!("{kind:?}").to_lowercase(), &t, &lc)?;
            }
        }
    }

    println!("subcriticality index along the onset curve:");
    for gamma in [0.25, 0.1, 0.05, 0.004] {
        let p = ParameterSet::standard(0.12, gamma);
        let bracket = if gamma < 0.1 { (0.1, 0.24) } else { (0.08, 0.2) };
        let (sc, kc) = critical_point(&p, bracket)?;
        let s = homogeneous_states(&p.with_sigma(sc))?[0];
        let lc = landau_coefficients(&s, &p.with_sigma(sc), kc, sc, EvalMode::Classical)?;
        println!("  gamma = {gamma}: index = {:.4}", subcriticality_index(&lc)?);
    }
    Ok(())
}
