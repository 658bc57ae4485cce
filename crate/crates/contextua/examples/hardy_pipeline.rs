//! The Hardy model: contextual but not strongly so. Runs both section
//! deciders (possibilistic and exact-rational), finds a support witness, and
//! builds the two-latent-point model whose root leaves determinacy possible
//! but not necessary.
//!
//! ```bash
//! cargo run --example hardy_pipeline
//! ```

use contextua::logic::{delta_hardy, det_sentence, print_formula, Evaluator, Formula};
use contextua::scenario::{
    build_weak_hv_model, canonical_hardy_supports, canonical_hardy_table, check_no_signalling,
    emit_table, find_global_section, global_support_assignment, SectionOutcome,
};

fn main() -> contextua::Result<()> {
    let hardy = canonical_hardy_table();
    println!("{}", emit_table(&hardy));
    println!("no-signalling: {}", check_no_signalling(&hardy).holds);

    let possibilistic = canonical_hardy_supports();
    println!(
        "possibilistic section: {}",
        match find_global_section(&possibilistic)? {
            SectionOutcome::Section(_) => "exists".to_string(),
            SectionOutcome::Infeasible(_) => "none (contextual over booleans)".to_string(),
        }
    );
    println!(
        "rational section: {}",
        match find_global_section(&hardy)? {
            SectionOutcome::Section(_) => "exists".to_string(),
            SectionOutcome::Infeasible(_) => "none (contextual over rationals)".to_string(),
        }
    );

    let order = hardy.scenario.measurement_order();
    let witness = global_support_assignment(&hardy)?
        .expect("the Hardy model is not strongly contextual");
    println!("support witness: {}", witness.csv(&order));

    let weak = build_weak_hv_model(&hardy, &witness)?;
    let root = weak.root_state()?;
    let mut eval = Evaluator::new(&weak);
    let det = det_sentence(&hardy.scenario);
    for f in delta_hardy() {
        assert!(eval.extension(&f)?.contains(&root));
    }
    println!("weak model root satisfies every description conjunct");
    println!(
        "root satisfies <i>Det: {}",
        eval.extension(&Formula::pos("i", det.clone()))?.contains(&root)
    );
    println!(
        "root satisfies [i]Det: {}  ({} fails as expected)",
        eval.extension(&Formula::nec("i", det.clone()))?.contains(&root),
        print_formula(&Formula::nec("i", det)),
    );
    Ok(())
}
