//! The full analysis pipeline on the two-party box with perfectly correlated
//! and anti-correlated contexts: no-signalling, contextuality with an exact
//! infeasibility certificate, strong contextuality, and the modal-logic
//! characterization.
//!
//! ```bash
//! cargo run --example pr_box_pipeline
//! ```

use contextua::logic::{
    delta_pr, delta_pr_prefixed, det_sentence, validates_sequent, Formula, Sequent,
};
use contextua::scenario::{
    canonical_pr_box, check_no_signalling, emit_table, empirical_to_model, find_global_section,
    global_support_assignment, SectionCertificate, SectionOutcome,
};

fn main() -> contextua::Result<()> {
    let pr = canonical_pr_box();
    println!("{}", emit_table(&pr));

    println!("no-signalling: {}", check_no_signalling(&pr).holds);

    match find_global_section(&pr)? {
        SectionOutcome::Section(_) => println!("global section: found (unexpected!)"),
        SectionOutcome::Infeasible(SectionCertificate::Dual { rows, gap }) => {
            println!("global section: infeasible, certificate gap {gap}");
            let active: Vec<String> = rows
                .iter()
                .filter(|(_, y)| !num_traits::Zero::is_zero(y))
                .map(|(label, y)| format!("{label} * {y}"))
                .collect();
            println!("dual rows: {}", active.join(", "));
        }
        SectionOutcome::Infeasible(_) => unreachable!("rational models certify dually"),
    }

    println!(
        "strongly contextual: {}",
        global_support_assignment(&pr)?.is_none()
    );

    // the model validates its description entailing the failure of determinacy
    let flat = empirical_to_model(&pr, false)?;
    let det = det_sentence(&pr.scenario);
    let seq = Sequent {
        antecedents: delta_pr(),
        consequent: Formula::not(det.clone()),
    };
    println!("description |- !Det: {}", validates_sequent(&flat, &seq)?);

    // with a latent stage, the prefixed description forces indeterminacy
    // after the internal transition
    let staged = empirical_to_model(&pr, true)?;
    let seq_i = Sequent {
        antecedents: delta_pr_prefixed(),
        consequent: Formula::nec("i", Formula::not(det)),
    };
    println!(
        "staged description |- [i]!Det: {}",
        validates_sequent(&staged, &seq_i)?
    );
    Ok(())
}
