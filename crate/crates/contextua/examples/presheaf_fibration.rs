//! The round trip between presheaves over a tree and fibrations into it: the
//! dependent sum of a presheaf satisfies unique lifts, its fibers read back as
//! an isomorphic presheaf, and injected defects are rejected.
//!
//! ```bash
//! cargo run --example presheaf_fibration
//! ```

use std::collections::BTreeMap;

use contextua::random::{broken_bundle, random_label_tree, random_presheaf, seeded_rng};
use contextua::tree::{fibration_to_presheaf, presheaf_to_fibration, LabelTree, Presheaf};

fn main() -> contextua::Result<()> {
    // the one-party scenario: one state branching into two outcomes per choice
    let base = LabelTree::new("x", &[("x", "y", "a"), ("x", "z", "a'")])?;
    let presheaf = Presheaf::new(
        base,
        vec![
            vec!["s".into()],
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
        ],
        BTreeMap::from([(1, vec![0, 0]), (2, vec![0, 0])]),
    )?;
    let bundle = presheaf_to_fibration(&presheaf);
    println!(
        "dependent sum has {} states over {} stages; fibration: {}",
        bundle.total.len(),
        bundle.base.node_count(),
        bundle.is_fibration()
    );
    let back = fibration_to_presheaf(&bundle)?;
    println!("round trip isomorphic: {}", presheaf.isomorphic(&back));

    let mut rng = seeded_rng(2);
    let mut ok = 0;
    for _ in 0..20 {
        let tree = random_label_tree(&mut rng, 6);
        let p = random_presheaf(&mut rng, &tree, 3);
        let b = presheaf_to_fibration(&p);
        if b.is_fibration() && p.isomorphic(&fibration_to_presheaf(&b)?) {
            ok += 1;
        }
    }
    println!("random round trips isomorphic: {ok}/20");

    let rejected = (0..10).filter(|_| !broken_bundle(&mut rng).is_fibration()).count();
    println!("bundles with injected defects rejected: {rejected}/10");
    Ok(())
}
