//! Shared helpers for the integration suites: an evaluator that works
//! straight from the open-set quantifiers (independent of the library's
//! preorder-based one), seeded random generators for formulas and finite
//! models, and a brute-force preorder enumerator.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use topsat::formula::to_core;
use topsat::topo::from_preorder;
use topsat::{Formula, Preorder, TopoModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Open-set evaluation.

/// Evaluates by quantifying over the whole open family: closure as "every
/// open around the point meets the extension", interior as "some open
/// around the point is contained in it". No specialization preorder.
pub fn open_set_extension(m: &TopoModel, f: &Formula) -> BTreeSet<u32> {
    let all: BTreeSet<u32> = m.space().points().iter().copied().collect();
    match f {
        Formula::Prop(p) => m.valuation().get(p).cloned().unwrap_or_default(),
        Formula::Nom(n) => m
            .nominal_assignment()
            .get(n)
            .map(|&w| BTreeSet::from([w]))
            .unwrap_or_default(),
        Formula::Neg(g) => {
            let e = open_set_extension(m, g);
            all.difference(&e).copied().collect()
        }
        Formula::And(l, r) => {
            let a = open_set_extension(m, l);
            let b = open_set_extension(m, r);
            a.intersection(&b).copied().collect()
        }
        Formula::Or(l, r) => {
            let a = open_set_extension(m, l);
            let b = open_set_extension(m, r);
            a.union(&b).copied().collect()
        }
        Formula::Impl(l, r) => {
            let a = open_set_extension(m, l);
            let b = open_set_extension(m, r);
            all.iter()
                .copied()
                .filter(|x| !a.contains(x) || b.contains(x))
                .collect()
        }
        Formula::Dia(g) => {
            let e = open_set_extension(m, g);
            all.iter()
                .copied()
                .filter(|&x| {
                    m.space()
                        .opens()
                        .iter()
                        .all(|o| !o.contains(&x) || o.intersection(&e).next().is_some())
                })
                .collect()
        }
        Formula::Box(g) => {
            let e = open_set_extension(m, g);
            all.iter()
                .copied()
                .filter(|&x| {
                    m.space()
                        .opens()
                        .iter()
                        .any(|o| o.contains(&x) && o.is_subset(&e))
                })
                .collect()
        }
        Formula::At(n, g) => {
            let w = m.nominal_assignment()[n];
            if open_set_extension(m, g).contains(&w) {
                all
            } else {
                BTreeSet::new()
            }
        }
        Formula::E(g) => {
            if open_set_extension(m, g).is_empty() {
                BTreeSet::new()
            } else {
                all
            }
        }
        Formula::A(g) => {
            if open_set_extension(m, g) == all {
                all
            } else {
                BTreeSet::new()
            }
        }
    }
}

pub fn open_set_eval(m: &TopoModel, f: &Formula, w: u32) -> bool {
    open_set_extension(m, f).contains(&w)
}

// ---------------------------------------------------------------------------
// Random formulas.

pub struct FormulaShape {
    /// Connective bound counted on the core form, after the jump and
    /// universal operators are rewritten away.
    pub max_core_connectives: usize,
    pub props: &'static [&'static str],
    pub noms: &'static [&'static str],
    /// How many global operators (@, E, A) the raw formula may carry.
    pub max_globals: usize,
}

impl Default for FormulaShape {
    fn default() -> Self {
        FormulaShape {
            max_core_connectives: 8,
            props: &["p", "q", "r"],
            noms: &["i", "j"],
            max_globals: 1,
        }
    }
}

fn count_e(f: &Formula) -> usize {
    match f {
        Formula::Prop(_) | Formula::Nom(_) => 0,
        Formula::Neg(g) | Formula::Dia(g) | Formula::Box(g) => count_e(g),
        Formula::At(_, g) => 1 + count_e(g),
        Formula::E(g) | Formula::A(g) => 1 + count_e(g),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Impl(l, r) => {
            count_e(l) + count_e(r)
        }
    }
}

fn grow(rng: &mut ChaCha8Rng, shape: &FormulaShape, budget: usize, globals: &mut usize) -> Formula {
    let leaf = |rng: &mut ChaCha8Rng| {
        if !shape.noms.is_empty() && rng.gen_bool(0.3) {
            Formula::nom(*shape.noms.choose(rng).unwrap())
        } else {
            Formula::prop(*shape.props.choose(rng).unwrap())
        }
    };
    if budget == 0 {
        return leaf(rng);
    }
    match rng.gen_range(0..12) {
        0 => leaf(rng),
        1 | 2 => Formula::neg(grow(rng, shape, budget - 1, globals)),
        3 | 4 => Formula::dia(grow(rng, shape, budget - 1, globals)),
        5 => Formula::box_(grow(rng, shape, budget - 1, globals)),
        6 if *globals > 0 && budget >= 3 && !shape.noms.is_empty() => {
            *globals -= 1;
            let n = *shape.noms.choose(rng).unwrap();
            Formula::at(n, grow(rng, shape, budget - 3, globals))
        }
        7 if *globals > 0 && budget >= 3 => {
            *globals -= 1;
            let g = grow(rng, shape, budget - 3, globals);
            if rng.gen_bool(0.5) {
                Formula::e(g)
            } else {
                Formula::a(g)
            }
        }
        rest => {
            let half = (budget - 1) / 2;
            let l = grow(rng, shape, budget - 1 - half, globals);
            let r = grow(rng, shape, half, globals);
            match rest {
                6 | 8 | 9 => Formula::and(l, r),
                7 | 10 => Formula::or(l, r),
                _ => Formula::impl_(l, r),
            }
        }
    }
}

/// A random formula whose core form fits the shape: connective count at
/// most the bound and at most one surviving global modality.
pub fn random_formula(rng: &mut ChaCha8Rng, shape: &FormulaShape) -> Formula {
    loop {
        let mut globals = shape.max_globals;
        let f = grow(rng, shape, shape.max_core_connectives, &mut globals);
        let core = to_core(&f);
        if core.connective_count() <= shape.max_core_connectives
            && count_e(&core) <= shape.max_globals
        {
            return f;
        }
    }
}

// ---------------------------------------------------------------------------
// Random finite models.

/// A random model on at most `max_points` points whose nominal assignment
/// covers every name the formula mentions (two names may share a point).
pub fn random_model(rng: &mut ChaCha8Rng, max_points: usize, f: &Formula) -> TopoModel {
    let n = rng.gen_range(1..=max_points) as u32;
    let points: Vec<u32> = (1..=n).collect();
    let mut pairs = Vec::new();
    for &u in &points {
        for &v in &points {
            if u != v && rng.gen_bool(0.3) {
                pairs.push((u, v));
            }
        }
    }
    let order = Preorder::closure_of(points.iter().copied(), &pairs).unwrap();
    let space = from_preorder(&order).unwrap();
    let valuation: BTreeMap<String, BTreeSet<u32>> = f
        .props()
        .into_iter()
        .map(|p| {
            let ext: BTreeSet<u32> = points.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            (p, ext)
        })
        .collect();
    let nominals: BTreeMap<String, u32> = f
        .nominals()
        .into_iter()
        .map(|i| (i, *points.choose(rng).unwrap()))
        .collect();
    TopoModel::new(space, valuation, nominals).unwrap()
}

pub fn modal_depth(f: &Formula) -> usize {
    match f {
        Formula::Prop(_) | Formula::Nom(_) => 0,
        Formula::Neg(g) | Formula::At(_, g) | Formula::E(g) | Formula::A(g) => modal_depth(g),
        Formula::Dia(g) | Formula::Box(g) => 1 + modal_depth(g),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Impl(l, r) => {
            modal_depth(l).max(modal_depth(r))
        }
    }
}

/// A random model whose named points satisfy the openness conditions that
/// stand for a T1 space: nothing reaches a named point, every point is
/// reachable from one, and at most three plain points hang under each
/// root, so the branching stays within the tree constructions' reach.
pub fn random_t1_rep(rng: &mut ChaCha8Rng) -> TopoModel {
    let roots = rng.gen_range(1..=2u32);
    let plain = rng.gen_range(1..=3u32);
    let points: Vec<u32> = (1..=roots + plain).collect();
    let mut pairs = Vec::new();
    for r in 1..=roots {
        for x in roots + 1..=roots + plain {
            if rng.gen_bool(0.6) {
                pairs.push((r, x));
            }
        }
    }
    for x in roots + 1..=roots + plain {
        for y in roots + 1..=roots + plain {
            if x != y && rng.gen_bool(0.3) {
                pairs.push((x, y));
            }
        }
    }
    // Leave no point stranded: hang strays under the first root.
    let order = Preorder::closure_of(points.iter().copied(), &pairs).unwrap();
    let mut reach: BTreeSet<u32> = BTreeSet::new();
    for r in 1..=roots {
        reach.extend(order.min_neighborhood(r).unwrap());
    }
    for &x in &points {
        if !reach.contains(&x) {
            pairs.push((1, x));
        }
    }
    let order = Preorder::closure_of(points.iter().copied(), &pairs).unwrap();
    let space = from_preorder(&order).unwrap();
    let valuation: BTreeMap<String, BTreeSet<u32>> = ["p", "q"]
        .iter()
        .map(|p| {
            let ext: BTreeSet<u32> = points.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            (p.to_string(), ext)
        })
        .collect();
    let names = ["i", "j"];
    let nominals: BTreeMap<String, u32> = (1..=roots)
        .map(|r| (names[r as usize - 1].to_string(), r))
        .collect();
    TopoModel::new(space, valuation, nominals).unwrap()
}

// ---------------------------------------------------------------------------
// Exhaustive preorders.

/// Every preorder on the points 1..=n, by brute force over reflexive
/// adjacency matrices filtered for transitivity.
pub fn all_preorders_on(n: usize) -> Vec<Preorder> {
    let slots: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let mut out = Vec::new();
    'mask: for mask in 0u32..1 << slots.len() {
        let mut rel = vec![vec![false; n]; n];
        for (i, row) in rel.iter_mut().enumerate() {
            row[i] = true;
        }
        for (b, &(i, j)) in slots.iter().enumerate() {
            if mask >> b & 1 == 1 {
                rel[i][j] = true;
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if rel[i][j] && rel[j][k] && !rel[i][k] {
                        continue 'mask;
                    }
                }
            }
        }
        let mut pairs: Vec<(u32, u32)> = (1..=n as u32).map(|i| (i, i)).collect();
        pairs.extend(
            slots
                .iter()
                .enumerate()
                .filter(|&(b, _)| mask >> b & 1 == 1)
                .map(|(_, &(i, j))| (i as u32 + 1, j as u32 + 1)),
        );
        out.push(Preorder::new(1..=n as u32, &pairs).unwrap());
    }
    out
}
