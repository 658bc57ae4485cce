//! Synchronized composition of two one-party scenarios over a shared clock:
//! the product tree pairs simultaneous stages, fibers multiply, and the
//! product weights carry no correlation between the parties.
//!
//! ```bash
//! cargo run --example compose_scenarios
//! ```

use std::collections::BTreeMap;

use contextua::presheaf::{fibered_product, RRelationalPresheaf};
use contextua::rel::{set, RRelation};
use contextua::semiring::NonNegRational;
use contextua::tree::{LabelTree, TreeProjection};

fn nn(p: i64, q: i64) -> NonNegRational {
    NonNegRational::ratio(p, q)
}

fn party(labels: (&str, &str), rows: [[(i64, i64); 2]; 2]) -> RRelationalPresheaf<NonNegRational> {
    let base = LabelTree::new("x", &[("x", "y", labels.0), ("x", "z", labels.1)]).unwrap();
    let fx = set(&["s"]);
    let fo = set(&["0", "1"]);
    let mk = |row: [(i64, i64); 2]| {
        RRelation::new(
            fx.clone(),
            fo.clone(),
            BTreeMap::from([("s".into(), fo.clone())]),
            BTreeMap::from([(
                "s".into(),
                BTreeMap::from([
                    ("0".into(), nn(row[0].0, row[0].1)),
                    ("1".into(), nn(row[1].0, row[1].1)),
                ]),
            )]),
        )
        .unwrap()
    };
    let edges = BTreeMap::from([(1, mk(rows[0])), (2, mk(rows[1]))]);
    RRelationalPresheaf::new(base, vec![fx.clone(), fo.clone(), fo.clone()], edges).unwrap()
}

fn main() -> contextua::Result<()> {
    let alice = party(("a", "a'"), [[(1, 2), (1, 2)], [(1, 3), (2, 3)]]);
    let bob = party(("b", "b'"), [[(1, 4), (3, 4)], [(1, 5), (4, 5)]]);
    let clock = LabelTree::new("c0", &[("c0", "c1", "tick")]).unwrap();
    let leg = |t: &LabelTree| {
        TreeProjection::new(
            t,
            &clock,
            t.nodes().map(|n| (n, usize::from(n != t.root()))).collect(),
        )
        .unwrap()
    };

    let product = fibered_product(
        &alice,
        &leg(&alice.base),
        &bob,
        &leg(&bob.base),
        &clock,
        |x, y| format!("{x}{y}"),
    )?;
    let base = &product.presheaf.base;
    println!("product tree has {} stages:", base.node_count());
    for child in base.edges() {
        let label = base.edge_label(child).unwrap();
        let d = product.presheaf.edges[&child].dist("s,s");
        let cells: Vec<String> = d
            .weights()
            .iter()
            .map(|(o, w)| format!("{o}: {w}"))
            .collect();
        println!("  context {label}: {}", cells.join(", "));
    }
    println!(
        "restriction legs returned: {}",
        product
            .parties
            .iter()
            .map(|p| p.name.clone())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}
