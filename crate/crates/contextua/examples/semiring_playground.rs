//! Weights and distributions over the three semirings: exact renormalization,
//! the distribution monad, and how possibilistic weights behave.
//!
//! ```bash
//! cargo run --example semiring_playground
//! ```

use std::collections::BTreeMap;

use contextua::semiring::{dist, Boolean, Distribution, NonNegRational, SignedRational};

fn main() -> contextua::Result<()> {
    // exact renormalization keeps zero-weight points in the carrier
    let family = BTreeMap::from([
        ("x", NonNegRational::ratio(3, 4)),
        ("y", NonNegRational::ratio(1, 4)),
        ("z", NonNegRational::ratio(0, 1)),
    ]);
    let d = Distribution::normalize(family)?;
    println!(
        "carrier {:?}, support {:?}",
        d.carrier().collect::<Vec<_>>(),
        d.support().map(|(p, _)| p).collect::<Vec<_>>()
    );

    // binding composes transitions and sums colliding paths
    let step = dist([("x", NonNegRational::ratio(1, 2)), ("y", NonNegRational::ratio(1, 2))])?;
    let next = step.bind(|p| {
        Some(match *p {
            "x" => Distribution::unit("u"),
            _ => dist([("u", NonNegRational::ratio(1, 2)), ("v", NonNegRational::ratio(1, 2))])
                .unwrap(),
        })
    })?;
    println!(
        "after two steps: u has {}, v has {}",
        next.weight(&"u"),
        next.weight(&"v")
    );

    // booleans renormalize to themselves: possibility is idempotent
    let possible = dist([("left", Boolean(true)), ("right", Boolean(true))])?;
    println!(
        "possibilistic support size: {}",
        possible.support().count()
    );

    // signed rationals admit negative weights that still sum to one
    let signed = dist([
        ("p", SignedRational::ratio(3, 2)),
        ("q", SignedRational::ratio(-1, 2)),
    ])?;
    println!(
        "signed distribution: p has {}, q has {}",
        signed.weight(&"p"),
        signed.weight(&"q")
    );
    Ok(())
}
