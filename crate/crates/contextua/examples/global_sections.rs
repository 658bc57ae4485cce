//! Exact global-section feasibility: a product model glues, a mixture with
//! enough anti-correlation does not, and the phase transition sits at an exact
//! rational weight.
//!
//! ```bash
//! cargo run --example global_sections
//! ```

use contextua::random::{
    mix_models, random_section_model, ratio, scenario_triangle, seeded_rng,
    triangle_anticorrelation,
};
use contextua::scenario::{find_global_section, product_demo_box, SectionOutcome};

fn main() -> contextua::Result<()> {
    let product = product_demo_box();
    match find_global_section(&product)? {
        SectionOutcome::Section(s) => {
            let order = product.scenario.measurement_order();
            println!("product model glues; section support:");
            for (a, w) in s.support() {
                println!("  {}: {}", a.csv(&order), w);
            }
        }
        SectionOutcome::Infeasible(_) => println!("product model failed to glue (unexpected!)"),
    }

    // sweep a mixture from a glueable model to the anti-correlation box
    let mut rng = seeded_rng(1);
    let base = random_section_model(&mut rng, &scenario_triangle());
    let anti = triangle_anticorrelation();
    println!("\ntriangle mixtures: lambda * section-marginals + (1 - lambda) * anticorrelation");
    for num in 0..=4 {
        let lambda = ratio(num, 4);
        let mixed = mix_models(lambda.clone(), &base, &anti);
        let verdict = match find_global_section(&mixed)? {
            SectionOutcome::Section(_) => "glues",
            SectionOutcome::Infeasible(_) => "contextual",
        };
        println!("  lambda = {lambda}: {verdict}");
    }
    Ok(())
}
