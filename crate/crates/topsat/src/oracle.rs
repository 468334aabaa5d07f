//! Brute-force search for quasi-models on small spaces.
//!
//! This is the ground-truth side of the satisfiability machinery: it knows
//! nothing about games. For each space size up to the bound it walks the
//! preorders up to isomorphism, every existential sign vector, and every
//! assignment of alphabet labels to points, then keeps exactly the
//! candidates `check_quasi_model` accepts. Exhaustive by construction, so
//! a miss genuinely means no quasi-model of that size exists; slow by
//! construction, so callers keep the bound small.

use crate::error::Result;
use crate::finrep::{check_quasi_model, QuasiModel, SpaceClass, Universe};
use crate::formula::{to_core, Formula};
use crate::topo::preorders_upto_iso;

/// Result of a bounded search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome {
    /// A validated quasi-model for the target.
    Witness(Box<QuasiModel>),
    /// No quasi-model with at most this many points exists.
    Exhausted(usize),
}

/// Calls `visit` on every valid quasi-model of the target (normalized to
/// core shape) with at most `max_points` points, in deterministic order,
/// until the visitor returns `false`. Isomorphic relabelings of one
/// underlying space appear once per label assignment, but no witness is
/// ever missed.
pub fn visit_quasi_models(
    target: &Formula,
    class: SpaceClass,
    max_points: usize,
    visit: &mut dyn FnMut(&QuasiModel) -> bool,
) -> Result<()> {
    let core = to_core(target);
    let uni = Universe::new(&core)?;
    for n in 1..=max_points {
        for r in preorders_upto_iso(n)? {
            for eps in 0u64..(1 << uni.existentials().len()) {
                let alphabet = uni.hintikka_alphabet(eps)?;
                if alphabet.is_empty() {
                    continue;
                }
                let mut assignment = vec![0usize; n];
                if !assign_rec(
                    &mut assignment,
                    0,
                    &alphabet,
                    &uni,
                    &r,
                    &core,
                    class,
                    visit,
                )? {
                    return Ok(());
                }
            }
        }
    }
    Ok(())
}

/// Depth-first assignment of alphabet labels to points; returns `false`
/// when the visitor asked to stop.
#[allow(clippy::too_many_arguments)]
fn assign_rec(
    assignment: &mut Vec<usize>,
    pos: usize,
    alphabet: &[u128],
    uni: &Universe,
    order: &crate::topo::Preorder,
    core: &Formula,
    class: SpaceClass,
    visit: &mut dyn FnMut(&QuasiModel) -> bool,
) -> Result<bool> {
    if pos == assignment.len() {
        let labels = order
            .points()
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, uni.mask_to_set(alphabet[assignment[i]])))
            .collect();
        let q = QuasiModel {
            order: order.clone(),
            labels,
            target: core.clone(),
        };
        if check_quasi_model(&q, class).is_ok() {
            return Ok(visit(&q));
        }
        return Ok(true);
    }
    'next: for k in 0..alphabet.len() {
        assignment[pos] = k;
        // Cheap prune: a nominal may label at most one point.
        let nom_mask = uni.nominal_mask();
        let here = alphabet[k] & nom_mask;
        if here != 0 {
            for &prev in &assignment[..pos] {
                if alphabet[prev] & here != 0 {
                    continue 'next;
                }
            }
        }
        if !assign_rec(assignment, pos + 1, alphabet, uni, order, core, class, visit)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// First valid quasi-model within the bound, if any.
pub fn find_quasi_model(
    target: &Formula,
    class: SpaceClass,
    max_points: usize,
) -> Result<Option<QuasiModel>> {
    let mut found = None;
    visit_quasi_models(target, class, max_points, &mut |q| {
        found = Some(q.clone());
        false
    })?;
    Ok(found)
}

/// Bounded decision: a witness or a certified exhaustion of the bound.
pub fn oracle_decide(
    target: &Formula,
    class: SpaceClass,
    max_points: usize,
) -> Result<OracleOutcome> {
    Ok(match find_quasi_model(target, class, max_points)? {
        Some(q) => OracleOutcome::Witness(Box::new(q)),
        None => OracleOutcome::Exhausted(max_points),
    })
}
