//! Dempster's rule, discounting and pignistic probabilities on a few masses.

use evigrid::{classify_mass, combine_masses, discount_mass, pignistic, BeliefMass};

fn show(label: &str, m: BeliefMass) {
    println!(
        "{label:<28} m(O)={:.4} m(F)={:.4} m(OF)={:.4}  BetP={:.4}  {:?}",
        m.m_o,
        m.m_f,
        m.m_u,
        pignistic(m),
        classify_mass(m)
    );
}

fn main() -> evigrid::Result<()> {
    let hit = BeliefMass::new(0.9, 0.0, 0.1)?;
    let pass = BeliefMass::new(0.0, 0.7, 0.3)?;

    show("occupied observation", hit);
    show("free observation", pass);
    show("vacuous", BeliefMass::VACUOUS);

    let twice = combine_masses(hit, hit)?;
    show("occupied + occupied", twice);
    show("occupied + free (conflict)", combine_masses(hit, pass)?);
    show("occupied + vacuous", combine_masses(hit, BeliefMass::VACUOUS)?);

    // Evidence fades toward ignorance as it ages.
    let mut aged = twice;
    for step in 1..=4 {
        aged = discount_mass(aged, 0.5);
        show(&format!("discounted x{step}"), aged);
    }
    Ok(())
}
