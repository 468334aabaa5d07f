//! Topological bisimulations between finite models.
//!
//! Two routes that must agree: `check_bisimulation` verifies a given
//! relation against the open-by-open definition (for every open around one
//! point there is an open around the other whose members are all covered),
//! while `largest_bisimulation` computes the greatest fixpoint by local
//! refinement over minimal neighborhoods. The first is the definition, the
//! second is the algorithm; tests hold them together.
//!
//! Plain bisimilarity transfers letter-only modal formulas. The `total`
//! flag (everything on both sides has a partner) extends that to `E` and
//! `A`; the `hybrid` flag (every nominal assigned on both sides, with the
//! named points related) extends it to the full language.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TopoModel;
use crate::topo::FiniteSpace;

/// Outcome of verifying a candidate relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BisimReport {
    /// The relation satisfies base agreement plus both open conditions.
    pub ok: bool,
    /// First violated condition, when not ok.
    pub reason: Option<String>,
    pub total: bool,
    pub hybrid: bool,
}

/// The greatest bisimulation over proposition letters, with its flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LargestBisim {
    pub pairs: BTreeSet<(u32, u32)>,
    pub total: bool,
    pub hybrid: bool,
}

fn letters_of(a: &TopoModel, b: &TopoModel) -> BTreeSet<String> {
    a.valuation()
        .keys()
        .chain(b.valuation().keys())
        .cloned()
        .collect()
}

fn holds(m: &TopoModel, letter: &str, w: u32) -> bool {
    m.valuation()
        .get(letter)
        .map(|s| s.contains(&w))
        .unwrap_or(false)
}

fn flags(
    a: &TopoModel,
    b: &TopoModel,
    pairs: &BTreeSet<(u32, u32)>,
) -> (bool, bool) {
    let total = a
        .space()
        .points()
        .iter()
        .all(|&x| pairs.iter().any(|&(u, _)| u == x))
        && b.space()
            .points()
            .iter()
            .all(|&y| pairs.iter().any(|&(_, v)| v == y));
    let noms: BTreeSet<&String> = a
        .nominal_assignment()
        .keys()
        .chain(b.nominal_assignment().keys())
        .collect();
    let hybrid = noms.iter().all(|i| {
        match (a.nominal_assignment().get(*i), b.nominal_assignment().get(*i)) {
            (Some(&x), Some(&y)) => pairs.contains(&(x, y)),
            _ => false,
        }
    });
    (total, hybrid)
}

/// Checks the literal topological definition: every pair agrees on all
/// letters, and in both directions, for every open around one component
/// there is an open around the other each of whose points is related to
/// some point of the first open.
pub fn check_bisimulation(
    a: &TopoModel,
    b: &TopoModel,
    pairs: &BTreeSet<(u32, u32)>,
) -> Result<BisimReport> {
    for &(x, y) in pairs {
        a.space().index_of(x)?;
        b.space().index_of(y)?;
    }
    let letters = letters_of(a, b);
    let a_opens = a.space().opens();
    let b_opens = b.space().opens();
    let mut reason = None;
    'outer: for &(x, y) in pairs {
        for l in &letters {
            if holds(a, l, x) != holds(b, l, y) {
                reason = Some(format!("({x}, {y}) disagree on letter {l}"));
                break 'outer;
            }
        }
        // Forth: opens around x must be answered by opens around y whose
        // points are all covered back into the chosen open.
        for o1 in a_opens.iter().filter(|o| o.contains(&x)) {
            let answered = b_opens.iter().any(|o2| {
                o2.contains(&y)
                    && o2
                        .iter()
                        .all(|&y2| o1.iter().any(|&x2| pairs.contains(&(x2, y2))))
            });
            if !answered {
                reason = Some(format!(
                    "open {o1:?} around {x} has no matching open around {y}"
                ));
                break 'outer;
            }
        }
        // Back: symmetric, with the relation read right to left.
        for o2 in b_opens.iter().filter(|o| o.contains(&y)) {
            let answered = a_opens.iter().any(|o1| {
                o1.contains(&x)
                    && o1
                        .iter()
                        .all(|&x2| o2.iter().any(|&y2| pairs.contains(&(x2, y2))))
            });
            if !answered {
                reason = Some(format!(
                    "open {o2:?} around {y} has no matching open around {x}"
                ));
                break 'outer;
            }
        }
    }
    let (total, hybrid) = flags(a, b, pairs);
    Ok(BisimReport {
        ok: reason.is_none(),
        reason,
        total,
        hybrid,
    })
}

/// Checks that a point map is interior: defined on every source point,
/// images of opens are open, preimages of opens are open. On spaces with
/// empty valuations this coincides with its graph passing the open
/// conditions of `check_bisimulation`.
pub fn check_interior_map(
    map: &BTreeMap<u32, u32>,
    from: &FiniteSpace,
    to: &FiniteSpace,
) -> Result<()> {
    for &x in from.points() {
        let y = map
            .get(&x)
            .ok_or_else(|| Error::InvalidMap(format!("point {x} has no image")))?;
        to.index_of(*y)?;
    }
    for o in from.opens() {
        let image: BTreeSet<u32> = o.iter().map(|x| map[x]).collect();
        if !to.is_open(&image)? {
            return Err(Error::InvalidMap(format!(
                "image {image:?} of open {o:?} is not open"
            )));
        }
    }
    for o in to.opens() {
        let pre: BTreeSet<u32> = from
            .points()
            .iter()
            .copied()
            .filter(|x| o.contains(&map[x]))
            .collect();
        if !from.is_open(&pre)? {
            return Err(Error::InvalidMap(format!(
                "preimage {pre:?} of open {o:?} is not open"
            )));
        }
    }
    Ok(())
}

/// Greatest fixpoint route. Starts from letter agreement and repeatedly
/// deletes pairs violating the successor conditions over minimal
/// neighborhoods: on finite spaces these local conditions are equivalent
/// to the open-by-open definition, which the tests confirm against
/// `check_bisimulation`.
pub fn largest_bisimulation(a: &TopoModel, b: &TopoModel) -> Result<LargestBisim> {
    let letters = letters_of(a, b);
    let an = a.space().len();
    let bn = b.space().len();
    // rows[i] = bitmask over b-point indices related to a-point i.
    let mut rows = vec![0u64; an];
    for (i, &x) in a.space().points().iter().enumerate() {
        for (j, &y) in b.space().points().iter().enumerate() {
            if letters.iter().all(|l| holds(a, l, x) == holds(b, l, y)) {
                rows[i] |= 1 << j;
            }
        }
    }
    let a_min: Vec<u64> = (0..an).map(|i| a.space().min_nbhd_mask(i)).collect();
    let b_min: Vec<u64> = (0..bn).map(|j| b.space().min_nbhd_mask(j)).collect();
    let bits = |m: u64| (0..64).filter(move |k| m & (1 << k) != 0);
    loop {
        let mut changed = false;
        for i in 0..an {
            for j in 0..bn {
                if rows[i] & (1 << j) == 0 {
                    continue;
                }
                // Every minimal-neighborhood member on one side needs a
                // related member on the other.
                let zig = bits(a_min[i]).all(|i2| rows[i2] & b_min[j] != 0);
                let zag = bits(b_min[j]).all(|j2| {
                    bits(a_min[i]).any(|i2| rows[i2] & (1 << j2) != 0)
                });
                if !(zig && zag) {
                    rows[i] &= !(1 << j);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut pairs = BTreeSet::new();
    for (i, &x) in a.space().points().iter().enumerate() {
        for (j, &y) in b.space().points().iter().enumerate() {
            if rows[i] & (1 << j) != 0 {
                pairs.insert((x, y));
            }
        }
    }
    let (total, hybrid) = flags(a, b, &pairs);
    Ok(LargestBisim {
        pairs,
        total,
        hybrid,
    })
}
