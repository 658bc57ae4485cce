//! The marginalization reading of no-signalling: restricting a bipartite
//! description to one party gives the same marginal whatever weights the other
//! party's choices carry — and exactly that fails on a signalling table.
//!
//! ```bash
//! cargo run --example no_signalling_marginals
//! ```

use std::collections::BTreeMap;

use contextua::presheaf::PartyRestriction;
use contextua::random::{random_ns_222, random_signalling_222, ratio, seeded_rng};
use contextua::rel::Elem;
use contextua::scenario::{
    bipartite_bundle, check_no_signalling_bundle, marginal_through,
};
use contextua::semiring::NonNegRational;

/// Point mass on the `k`-th stage of every choice fiber.
fn point_mass_choice(
    party: &PartyRestriction,
    k: usize,
) -> BTreeMap<Elem, BTreeMap<Elem, NonNegRational>> {
    party
        .party_nodes
        .iter()
        .map(|t| {
            let fiber: Vec<Elem> = party
                .node_map
                .iter()
                .filter(|(_, v)| *v == t)
                .map(|(u, _)| u.clone())
                .collect();
            let pick = fiber[k.min(fiber.len() - 1)].clone();
            (t.clone(), BTreeMap::from([(pick, ratio(1, 1))]))
        })
        .collect()
}

fn main() -> contextua::Result<()> {
    let left = vec!["a".to_string(), "a'".to_string()];
    let right = vec!["b".to_string(), "b'".to_string()];
    let mut rng = seeded_rng(11);

    let model = random_ns_222(&mut rng);
    let (bundle, parties) = bipartite_bundle(&model, &left, &right)?;
    println!("random no-signalling model:");
    let first = marginal_through(&bundle, &parties[0], &point_mass_choice(&parties[0], 0))?;
    let second = marginal_through(&bundle, &parties[0], &point_mass_choice(&parties[0], 1))?;
    for stage in ["z_a", "z_a'"] {
        for o in ["0", "1"] {
            let key = format!("{stage}/{o}");
            println!(
                "  P({key}) = {} under either choice (other leg: {})",
                first.fiber(stage).weight(&key),
                second.fiber(stage).weight(&key)
            );
            assert_eq!(first.fiber(stage).weight(&key), second.fiber(stage).weight(&key));
        }
    }
    assert!(check_no_signalling_bundle(&bundle, &parties).is_none());

    let signalling = random_signalling_222(&mut rng);
    let (bundle, parties) = bipartite_bundle(&signalling, &left, &right)?;
    let witness = check_no_signalling_bundle(&bundle, &parties)
        .expect("constructed tables signal");
    println!("\nsignalling model caught:");
    println!(
        "  party {}: state {} has mass {} over {} but {} over {}",
        witness.party, witness.state, witness.value0, witness.stage0, witness.value1, witness.stage1
    );
    Ok(())
}
