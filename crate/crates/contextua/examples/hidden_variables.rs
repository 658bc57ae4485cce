//! Constructs the deterministic hidden-variable model of a glueable table and
//! verifies the averaging identity: forgetting the latent stage reproduces the
//! observed tables, transition by transition.
//!
//! ```bash
//! cargo run --example hidden_variables
//! ```

use contextua::logic::{det_sentence, extension, Formula};
use contextua::scenario::{
    build_hv_model, context_label, extract_empirical, find_global_section, product_demo_box,
    SectionOutcome,
};

fn main() -> contextua::Result<()> {
    let model = product_demo_box();
    let SectionOutcome::Section(section) = find_global_section(&model)? else {
        panic!("product models always glue");
    };

    let hv = build_hv_model(&model, &section)?;
    println!(
        "latent stage carries {} deterministic instruction sets",
        hv.latent.len()
    );

    // averaging over the latent stage reproduces the observed tables
    let reproduced = extract_empirical(&hv.model, &model.scenario)?;
    for (i, ctx) in model.scenario.maximal_contexts().iter().enumerate() {
        assert!(reproduced.tables[i].agrees(&model.tables[i]));
        println!("table {} reproduced exactly", context_label(ctx));
    }

    // each instruction set answers deterministically, so determinacy is
    // necessary after the latent transition
    let i_det = Formula::nec("i", det_sentence(&model.scenario));
    let root = hv.model.root_state()?;
    println!(
        "root satisfies [i]Det: {}",
        extension(&hv.model, &i_det)?.contains(&root)
    );
    Ok(())
}
