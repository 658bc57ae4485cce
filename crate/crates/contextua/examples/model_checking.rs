//! Parses and evaluates formulas of the dynamic probabilistic language on the
//! box model: boxes quantify over every context that projects onto their
//! label, probability atoms compare exact rationals, and labels with no
//! transitions hold vacuously.
//!
//! ```bash
//! cargo run --example model_checking
//! ```

use contextua::logic::{parse_formula, print_formula, Evaluator};
use contextua::scenario::{canonical_pr_box, empirical_to_model};

fn main() -> contextua::Result<()> {
    let model = empirical_to_model(&canonical_pr_box(), false)?;
    let root = model.root_state()?;
    let mut eval = Evaluator::new(&model);

    let queries = [
        "[ab](a=0 <-> b=0)",
        "[a'b'](a'=0 (+) b'=0)",
        // the bare label a quantifies over both ab and ab'
        "[a](a=0 | a=1)",
        "[a]a=0",
        "P(a=0 | a) = 1/2",
        "P(a=0 | a) > 1/2",
        "P(a=0 & b=0 | ab) >= 1/2",
        "<ab>(a=1 & b=1)",
    ];
    for text in queries {
        let f = parse_formula(text)?;
        let holds = eval.extension(&f)?.contains(&root);
        println!("{:36} at root: {}", print_formula(&f), holds);
    }

    // at a leaf state there is no further ab transition, so the box holds
    // vacuously and the evaluator records it
    let tree = model.initial_tree();
    let leaf = contextua::presheaf::StateRef::new(tree.index_of("z_ab")?, "0,0");
    let f = parse_formula("[ab](a=1 & b=1)")?;
    let holds = eval.extension(&f)?.contains(&leaf);
    println!(
        "{:36} at z_ab/0,0: {} (vacuous: {})",
        print_formula(&f),
        holds,
        eval.vacuous.contains(&leaf)
    );
    Ok(())
}
