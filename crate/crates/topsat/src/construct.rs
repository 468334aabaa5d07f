//! Witness-model constructions.
//!
//! Finite verdicts stand for infinite spaces, and this module builds the
//! bridges in both directions. The Kolmogorov quotient turns any
//! nominal-free model into a T0 one. A finite representation (a finite
//! model whose named points satisfy the openness side conditions of
//! [`check_finite_rep`]) blows up into a symbolically presented infinite
//! model over the naturals: named points become singleton carrier
//! elements, the rest become arithmetic progressions, and the topology is
//! generated by pulled-back opens restricted by finite deletions. All the
//! obligations that make the collapse map an interior map and its graph a
//! total hybrid bisimulation reduce to finite arithmetic on the
//! descriptors, which [`verify_symbolic`] performs.
//!
//! The remaining constructions decompose and reshape finite
//! representations: `peel_off` splits a model into disjoint rooted copies
//! owned by its named points, `fatten_clusters` pads unnamed simple
//! clusters into proper ones, `unravel_to_full_tree` rolls a rooted model
//! out into a depth-truncated full n-ary tree, and `rational_embed`
//! realizes that tree inside the rationals with exact arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use num::integer::lcm;
use num::{BigInt, BigRational, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finrep::{check_finite_rep, SpaceClass};
use crate::model::TopoModel;
use crate::topo::{from_preorder, quotient_topology, Preorder};

/// Cap on the arithmetic window used to certify carrier partitions.
const MAX_PARTITION_WINDOW: u64 = 1 << 20;

/// Quotient by topological indistinguishability: collapses points that lie
/// in exactly the same opens. The result is always T0 and the projection
/// is an interior map whose graph is a total bisimulation.
///
/// Letters must not cut across indistinguishability classes, since the
/// projection could not agree on them; nominals are rejected outright
/// because a collapsed named point could name several sources.
pub fn kolmogorov_quotient(m: &TopoModel) -> Result<(TopoModel, BTreeMap<u32, u32>)> {
    m.validate()?;
    if !m.nominal_assignment().is_empty() {
        return Err(Error::Precondition(
            "quotient by indistinguishability handles nominal-free models only".into(),
        ));
    }
    // Two points lie in the same opens exactly when their minimal
    // neighborhoods coincide.
    let space = m.space();
    let mut rep_of: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
    let mut proj: BTreeMap<u32, u32> = BTreeMap::new();
    for &x in space.points() {
        let key: Vec<u32> = space.minimal_neighborhood(x)?.into_iter().collect();
        let r = *rep_of.entry(key).or_insert(x);
        proj.insert(x, r);
    }
    for (p, ext) in m.valuation() {
        for (&x, &r) in &proj {
            if ext.contains(&x) != ext.contains(&r) {
                return Err(Error::Precondition(format!(
                    "{p} distinguishes topologically indistinguishable points {x} and {r}"
                )));
            }
        }
    }
    let qspace = quotient_topology(space, &proj)?;
    let valuation: BTreeMap<String, BTreeSet<u32>> = m
        .valuation()
        .iter()
        .map(|(p, ext)| (p.clone(), ext.iter().map(|x| proj[x]).collect()))
        .collect();
    let quotient = TopoModel::new(qspace, valuation, BTreeMap::new())?;
    Ok((quotient, proj))
}

// ---------------------------------------------------------------------------
// Symbolic infinite models.

/// How one base point is realized inside the infinite carrier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ClassShape {
    /// One carrier element; realizes a nominal-named point.
    Singleton { at: u64 },
    /// The elements `at`, `at + stride`, `at + 2 stride`, and so on.
    Progression { at: u64, stride: u64 },
}

impl ClassShape {
    fn contains(&self, x: u64) -> bool {
        match *self {
            ClassShape::Singleton { at } => x == at,
            ClassShape::Progression { at, stride } => x >= at && (x - at) % stride == 0,
        }
    }

    fn first(&self) -> u64 {
        match *self {
            ClassShape::Singleton { at } | ClassShape::Progression { at, .. } => at,
        }
    }
}

/// Which family of basic opens the descriptors generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolicKind {
    /// Pulled-back opens intersected with cofinite sets; deletions may
    /// touch any carrier element, so every singleton is closed.
    T1Cofinite,
    /// Pulled-back opens minus finite sets of non-singleton elements;
    /// singletons stay in every open that covers their class, which keeps
    /// the space exactly T0.
    T0Deletions,
}

/// A finitely described infinite topological model over a finite base: a
/// partition of the carrier into one class per base point, plus the basic
/// opens generating the topology, written as pairs (O, F) for "the
/// carrier elements of the classes of O, minus F". The map collapsing
/// classes back to base points is the object under verification.
///
/// The carrier is the naturals from 1 whenever a progression is present;
/// with singletons only it is the finite set of their positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicModel {
    pub base: TopoModel,
    pub kind: SymbolicKind,
    pub classes: BTreeMap<u32, ClassShape>,
    pub opens: Vec<(BTreeSet<u32>, BTreeSet<u64>)>,
}

impl SymbolicModel {
    pub fn carrier_is_finite(&self) -> bool {
        self.classes
            .values()
            .all(|c| matches!(c, ClassShape::Singleton { .. }))
    }

    /// The base point whose class contains the carrier element.
    pub fn point_of(&self, x: u64) -> Option<u32> {
        self.classes
            .iter()
            .find(|(_, c)| c.contains(x))
            .map(|(&t, _)| t)
    }
}

/// Base points split into named and unnamed, each ascending.
fn arrange(rep: &TopoModel) -> (Vec<u32>, Vec<u32>) {
    let named: BTreeSet<u32> = rep.nominal_assignment().values().copied().collect();
    let unnamed: Vec<u32> = rep
        .space()
        .points()
        .iter()
        .copied()
        .filter(|t| !named.contains(t))
        .collect();
    (named.into_iter().collect(), unnamed)
}

/// Named points become the singleton prefix 1..m; the rest share the tail
/// as arithmetic progressions with stride n - m, one residue each.
fn carrier_classes(rep: &TopoModel) -> BTreeMap<u32, ClassShape> {
    let (named, unnamed) = arrange(rep);
    let m = named.len() as u64;
    let stride = unnamed.len() as u64;
    let mut classes = BTreeMap::new();
    for (j, t) in named.into_iter().enumerate() {
        classes.insert(t, ClassShape::Singleton { at: j as u64 + 1 });
    }
    for (j, t) in unnamed.into_iter().enumerate() {
        classes.insert(
            t,
            ClassShape::Progression {
                at: m + 1 + j as u64,
                stride,
            },
        );
    }
    classes
}

/// The infinite model whose collapse map realizes a finite representation
/// inside a T1 space: cofinite restrictions make every singleton closed,
/// and the openness obligations they create are discharged by the
/// representation condition on the base.
pub fn symbolic_witness_t1(rep: &TopoModel) -> Result<SymbolicModel> {
    check_finite_rep(rep, SpaceClass::T1)?;
    let classes = carrier_classes(rep);
    let full: BTreeSet<u32> = rep.space().points().iter().copied().collect();
    let mut opens = Vec::new();
    for o in rep.space().opens() {
        // Cofinite restrictions can erase singletons; pair each open with
        // the heaviest such erasure to exercise the image condition.
        let erased: BTreeSet<u64> = o
            .iter()
            .filter_map(|t| match classes[t] {
                ClassShape::Singleton { at } => Some(at),
                ClassShape::Progression { .. } => None,
            })
            .collect();
        if !erased.is_empty() {
            opens.push((o.clone(), erased));
        }
        opens.push((o, BTreeSet::new()));
    }
    for shape in classes.values() {
        opens.push((full.clone(), BTreeSet::from([shape.first()])));
    }
    opens.sort();
    opens.dedup();
    Ok(SymbolicModel {
        base: rep.clone(),
        kind: SymbolicKind::T1Cofinite,
        classes,
        opens,
    })
}

/// The infinite model whose collapse map realizes a finite representation
/// inside a T0 space: finite deletions never touch the singleton prefix,
/// so named points keep exactly the separations the base provides. With
/// every point named the base is already such a space and lifts as is.
pub fn symbolic_witness_t0(rep: &TopoModel) -> Result<SymbolicModel> {
    check_finite_rep(rep, SpaceClass::T0)?;
    let classes = carrier_classes(rep);
    let full: BTreeSet<u32> = rep.space().points().iter().copied().collect();
    let mut opens = Vec::new();
    for o in rep.space().opens() {
        let nudge: BTreeSet<u64> = o
            .iter()
            .filter_map(|t| match classes[t] {
                ClassShape::Progression { at, .. } => Some(at),
                ClassShape::Singleton { .. } => None,
            })
            .collect();
        if !nudge.is_empty() {
            opens.push((o.clone(), nudge));
        }
        opens.push((o, BTreeSet::new()));
    }
    for shape in classes.values() {
        if let ClassShape::Progression { at, .. } = shape {
            // The separation set for one unnamed carrier element.
            opens.push((full.clone(), BTreeSet::from([*at])));
        }
    }
    opens.sort();
    opens.dedup();
    Ok(SymbolicModel {
        base: rep.clone(),
        kind: SymbolicKind::T0Deletions,
        classes,
        opens,
    })
}

/// Certifies that the carrier classes partition the carrier. Beyond the
/// largest start every membership test is periodic in the least common
/// multiple of the strides, so one full period past the starts decides
/// all larger elements.
fn verify_partition(shapes: &[&ClassShape]) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidModel(format!("symbolic carrier: {msg}")));
    let mut period = 1u64;
    let mut max_at = 0u64;
    let mut finite = true;
    for s in shapes {
        match **s {
            ClassShape::Singleton { at } => {
                if at == 0 {
                    return bad("carrier elements start at 1".into());
                }
                max_at = max_at.max(at);
            }
            ClassShape::Progression { at, stride } => {
                if at == 0 || stride == 0 {
                    return bad(format!("degenerate progression ({at}, {stride})"));
                }
                finite = false;
                max_at = max_at.max(at);
                period = lcm(period, stride);
                if period > MAX_PARTITION_WINDOW {
                    return Err(Error::Capacity(
                        "partition check window exceeds its budget".into(),
                    ));
                }
            }
        }
    }
    if finite {
        // Singletons only: they must fill an initial segment exactly.
        let mut ats: Vec<u64> = shapes.iter().map(|s| s.first()).collect();
        ats.sort_unstable();
        if ats != (1..=shapes.len() as u64).collect::<Vec<_>>() {
            return bad("singletons do not fill an initial segment".into());
        }
        return Ok(());
    }
    let window = max_at
        .checked_add(period)
        .filter(|&w| w <= MAX_PARTITION_WINDOW)
        .ok_or_else(|| Error::Capacity("partition check window exceeds its budget".into()))?;
    for x in 1..=window {
        let owners = shapes.iter().filter(|s| s.contains(x)).count();
        if owners != 1 {
            return bad(format!("element {x} belongs to {owners} classes"));
        }
    }
    Ok(())
}

/// Verifies every obligation that makes the symbolic model a real model
/// of its kind collapsing onto the base: the classes partition the
/// carrier and biject with the base points, each designated basic open
/// pulls back from a base open and maps forward to one, deletions beyond
/// the designated ones stay open by the singleton-complement condition,
/// the space separates points as the kind demands, and the collapse graph
/// is a total hybrid bisimulation.
pub fn verify_symbolic(s: &SymbolicModel) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidModel(format!("symbolic model: {msg}")));
    s.base.validate()?;
    let points: BTreeSet<u32> = s.base.space().points().iter().copied().collect();
    let classed: BTreeSet<u32> = s.classes.keys().copied().collect();
    if classed != points {
        return bad("classes must biject with the base points".into());
    }
    let shapes: Vec<&ClassShape> = s.classes.values().collect();
    verify_partition(&shapes)?;
    let singleton_at: BTreeSet<u64> = s
        .classes
        .values()
        .filter_map(|c| match *c {
            ClassShape::Singleton { at } => Some(at),
            _ => None,
        })
        .collect();
    let carrier_cap = if s.carrier_is_finite() {
        Some(s.classes.len() as u64)
    } else {
        None
    };

    // Every nominal must denote one carrier element.
    for (name, t) in s.base.nominal_assignment() {
        if !matches!(s.classes.get(t), Some(ClassShape::Singleton { .. })) {
            return bad(format!("nominal '{name} names the infinite class of {t}"));
        }
    }
    // Non-singleton prefixes would let finite deletions separate a named
    // point from below, which the T0 family must never do.
    if s.kind == SymbolicKind::T0Deletions {
        let named: BTreeSet<u32> = s.base.nominal_assignment().values().copied().collect();
        for (t, c) in &s.classes {
            if matches!(c, ClassShape::Singleton { .. }) && !named.contains(t) {
                return bad(format!("unnamed singleton class at base point {t}"));
            }
        }
    }

    // Continuity: the preimage of each base open is its deletion-free
    // designated pair.
    for o in s.base.space().opens() {
        if !s.opens.iter().any(|(p, f)| *p == o && f.is_empty()) {
            return bad(format!("base open {o:?} has no designated preimage"));
        }
    }

    // Openness of every designated basic open: erasing the singletons
    // inside the deletion must land back on a base open.
    for (o, f) in &s.opens {
        if !s.base.space().is_open(o)? {
            return bad(format!("designated pair pulls back {o:?}, which is not open"));
        }
        if let Some(cap) = carrier_cap {
            if f.iter().any(|&x| x == 0 || x > cap) {
                return bad(format!("deletion {f:?} leaves the finite carrier"));
            }
        }
        if s.kind == SymbolicKind::T0Deletions && f.iter().any(|x| singleton_at.contains(x)) {
            return bad(format!("deletion {f:?} touches the singleton prefix"));
        }
        let image: BTreeSet<u32> = o
            .iter()
            .copied()
            .filter(|t| match s.classes[t] {
                ClassShape::Singleton { at } => !f.contains(&at),
                ClassShape::Progression { .. } => true,
            })
            .collect();
        if !s.base.space().is_open(&image)? {
            return bad(format!(
                "image {image:?} of the basic open ({o:?}, {f:?}) is not open"
            ));
        }
    }

    match s.kind {
        SymbolicKind::T1Cofinite => {
            // Undesignated cofinite restrictions erase arbitrary singleton
            // subsets; intersections reduce them all to one-point
            // erasures, so those complements settle every obligation.
            // They are also exactly what closes each singleton, giving
            // the separation the kind claims.
            for (t, c) in &s.classes {
                if let ClassShape::Singleton { .. } = c {
                    let rest: BTreeSet<u32> =
                        points.iter().copied().filter(|u| u != t).collect();
                    if !s.base.space().is_open(&rest)? {
                        return bad(format!(
                            "complement of singleton class {t} is not open in the base"
                        ));
                    }
                }
            }
        }
        SymbolicKind::T0Deletions => {
            // Unnamed elements are separated by deleting them from the
            // full carrier; distinct singletons fall back on the base
            // separations, which must exist.
            check_finite_rep(&s.base, SpaceClass::T0).map_err(|e| {
                Error::InvalidModel(format!("symbolic model: base separation failed: {e}"))
            })?;
        }
    }
    // Graph conditions for the collapse map: letters are pulled back
    // pointwise, so paired points agree by construction; the partition
    // makes the map total and the class-point bijection makes it onto;
    // nominals denote their singletons, checked above.
    Ok(())
}

// ---------------------------------------------------------------------------
// Decompositions of finite representations.

/// Splits a model into disjoint rooted components, one per named point,
/// each owning a fresh copy of that point's generated submodel. Shared
/// substructure is duplicated, so the result is totally hybrid-bisimilar
/// to the input while no component sees another's root.
///
/// Requires the named-complement condition (no arcs into a named point
/// from elsewhere, so generated submodels contain one named point each)
/// and that every point is reachable from some named point (dropped
/// points would break totality).
pub fn peel_off(rep: &TopoModel) -> Result<TopoModel> {
    check_finite_rep(rep, SpaceClass::T1)?;
    let roots: BTreeSet<u32> = rep.nominal_assignment().values().copied().collect();
    if roots.is_empty() {
        return Err(Error::Precondition(
            "splitting needs at least one named root".into(),
        ));
    }
    let mut reach: BTreeSet<u32> = BTreeSet::new();
    for &w in &roots {
        reach.extend(rep.space().minimal_neighborhood(w)?);
    }
    if let Some(stray) = rep.space().points().iter().find(|t| !reach.contains(t)) {
        return Err(Error::Precondition(format!(
            "point {stray} is not reachable from any named point"
        )));
    }
    let order = rep.space().to_preorder();
    let mut ids: Vec<u32> = Vec::new();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut valuation: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
    let mut nominals: BTreeMap<String, u32> = BTreeMap::new();
    for &w in &roots {
        let dom: Vec<u32> = rep.space().minimal_neighborhood(w)?.into_iter().collect();
        let base = ids.len() as u32;
        let id_of = |t: u32| base + 1 + dom.iter().position(|&u| u == t).unwrap() as u32;
        ids.extend(dom.iter().map(|&t| id_of(t)));
        for &u in &dom {
            for &v in &dom {
                if order.related(u, v)? {
                    pairs.push((id_of(u), id_of(v)));
                }
            }
        }
        for (p, ext) in rep.valuation() {
            let slot = valuation.entry(p.clone()).or_default();
            slot.extend(dom.iter().filter(|t| ext.contains(t)).map(|&t| id_of(t)));
        }
        for (name, &t) in rep.nominal_assignment() {
            if t == w {
                nominals.insert(name.clone(), id_of(w));
            }
        }
    }
    // Up-sets carry the relation over intact, so no closure is needed and
    // the constructor re-validates that.
    let order = Preorder::new(ids, &pairs)?;
    TopoModel::new(from_preorder(&order)?, valuation, nominals)
}

/// Gives every unnamed point that forms a simple cluster a twin with the
/// same letters and the same arcs plus the mutual pair, turning the
/// cluster into a proper one. Named points and proper clusters are left
/// alone; the twin relation is a total hybrid bisimulation.
pub fn fatten_clusters(m: &TopoModel) -> Result<TopoModel> {
    m.validate()?;
    let order = m.space().to_preorder();
    let named: BTreeSet<u32> = m.nominal_assignment().values().copied().collect();
    let points = order.points().to_vec();
    let mut next = points.iter().max().copied().unwrap_or(0) + 1;
    let mut twin: BTreeMap<u32, u32> = BTreeMap::new();
    for &x in &points {
        if named.contains(&x) {
            continue;
        }
        let mut proper = false;
        for &y in &points {
            if y != x && order.related(x, y)? && order.related(y, x)? {
                proper = true;
                break;
            }
        }
        if !proper {
            twin.insert(x, next);
            next += 1;
        }
    }
    if twin.is_empty() {
        return Ok(m.clone());
    }
    let mut pairs = order.pairs();
    for (&x, &t) in &twin {
        pairs.push((x, t));
        pairs.push((t, x));
        for &v in &points {
            if v != x {
                if order.related(v, x)? {
                    pairs.push((v, t));
                }
                if order.related(x, v)? {
                    pairs.push((t, v));
                }
            }
        }
    }
    let all: Vec<u32> = points.iter().copied().chain(twin.values().copied()).collect();
    let order = Preorder::closure_of(all, &pairs)?;
    let valuation: BTreeMap<String, BTreeSet<u32>> = m
        .valuation()
        .iter()
        .map(|(p, ext)| {
            let mut e = ext.clone();
            e.extend(ext.iter().filter_map(|x| twin.get(x)));
            (p.clone(), e)
        })
        .collect();
    TopoModel::new(
        from_preorder(&order)?,
        valuation,
        m.nominal_assignment().clone(),
    )
}

// ---------------------------------------------------------------------------
// Tree unraveling and the embedding into the rationals.

/// A depth-truncated full n-ary tree carrying one source point per node.
/// Nodes are stored breadth-first: the root is 0 and the children of node
/// v are n v + 1 + c for 0 <= c < n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTree {
    pub branching: usize,
    pub depth: usize,
    pub labels: Vec<u32>,
}

/// Nodes of the full tree: 1 + n + ... + n^d.
fn full_tree_size(n: usize, d: usize) -> usize {
    let mut total = 1usize;
    let mut level = 1usize;
    for _ in 0..d {
        level *= n;
        total += level;
    }
    total
}

impl LabeledTree {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Child indices of an internal node; empty at the last level.
    pub fn children(&self, v: usize) -> Vec<usize> {
        let first = self.branching * v + 1;
        (first..first + self.branching)
            .filter(|&c| c < self.labels.len())
            .collect()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v > 0).then(|| (v - 1) / self.branching)
    }

    /// Distance from the root.
    pub fn level(&self, v: usize) -> usize {
        let mut v = v;
        let mut k = 0;
        while v > 0 {
            v = (v - 1) / self.branching;
            k += 1;
        }
        k
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tree {\n  rankdir=TB;\n");
        for (v, label) in self.labels.iter().enumerate() {
            out.push_str(&format!("  n{v} [label=\"{label}\"];\n"));
        }
        for v in 0..self.labels.len() {
            for c in self.children(v) {
                out.push_str(&format!("  n{v} -> n{c};\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Rolls a rooted model out into the depth-d truncation of the full
/// n-ary tree. The root sheds its reflexive arc so that it labels only
/// the tree root; every other node's children carry exactly the
/// successors of its point, padded to n by repeating the first one.
///
/// Requires a named root that no other point reaches, a successor beside
/// the root itself, and n at least 2 and at least every out-degree.
pub fn unravel_to_full_tree(
    m: &TopoModel,
    root: u32,
    n: usize,
    d: usize,
) -> Result<LabeledTree> {
    m.validate()?;
    if !m.nominal_assignment().values().any(|&w| w == root) {
        return Err(Error::Precondition(format!(
            "unraveling root {root} must be named by a nominal"
        )));
    }
    let order = m.space().to_preorder();
    for &w in order.points() {
        if w != root && order.related(w, root)? {
            return Err(Error::Precondition(format!(
                "point {w} reaches the root, so the root label would recur"
            )));
        }
    }
    if n < 2 {
        return Err(Error::Precondition("branching must be at least 2".into()));
    }
    let succ = |x: u32| -> Result<Vec<u32>> {
        let mut s: Vec<u32> = m.space().minimal_neighborhood(x)?.into_iter().collect();
        if x == root {
            s.retain(|&v| v != root);
        }
        Ok(s)
    };
    for &x in order.points() {
        let deg = succ(x)?.len();
        if deg > n {
            return Err(Error::Precondition(format!(
                "point {x} has {deg} successors, branching {n} cannot carry them"
            )));
        }
    }
    if succ(root)?.is_empty() {
        return Err(Error::Precondition(
            "the root needs a successor besides itself".into(),
        ));
    }
    let mut labels = vec![root];
    let mut level_start = 0usize;
    for _ in 0..d {
        let level_end = labels.len();
        for v in level_start..level_end {
            let base = succ(labels[v])?;
            for c in 0..n {
                labels.push(*base.get(c).unwrap_or(&base[0]));
            }
        }
        level_start = level_end;
    }
    Ok(LabeledTree {
        branching: n,
        depth: d,
        labels,
    })
}

/// Checks the unraveling conditions on a finished tree: full shape, the
/// root point exactly at the tree root, and at every internal node the
/// set of child labels equal to the successor set of its point (sans the
/// root's own reflexive arc). Those local conditions make the labeling a
/// surjective p-morphism from the closed tree onto the model.
pub fn verify_tree_labeling(t: &LabeledTree, m: &TopoModel, root: u32) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidMap(format!("tree labeling: {msg}")));
    if t.branching < 2 || t.labels.len() != full_tree_size(t.branching, t.depth) {
        return bad("tree is not a full truncation".into());
    }
    if t.labels[0] != root {
        return bad(format!("root carries {} instead of {root}", t.labels[0]));
    }
    if t.labels.iter().filter(|&&x| x == root).count() != 1 {
        return bad("the root label recurs below the root".into());
    }
    for v in 0..t.labels.len() {
        let kids = t.children(v);
        if t.level(v) < t.depth {
            let mut want: BTreeSet<u32> = m
                .space()
                .minimal_neighborhood(t.labels[v])?
                .into_iter()
                .collect();
            if v == 0 {
                want.remove(&root);
            }
            let got: BTreeSet<u32> = kids.iter().map(|&c| t.labels[c]).collect();
            if kids.len() != t.branching || got != want {
                return bad(format!(
                    "node {v} labeled {} has children {got:?}, wants {want:?}",
                    t.labels[v]
                ));
            }
        } else if !kids.is_empty() {
            return bad(format!("leaf {v} has children"));
        }
    }
    Ok(())
}

/// Embeds the full tree into the rationals: the root at 0, and for a node
/// at level k with value f, the first child at f - 1/(n+1)^k and child
/// m >= 2 at f + (m-1)/(n+1)^k. Exact arithmetic; on the truncation the
/// map is injective and the value intervals of sibling subtrees are
/// pairwise disjoint, which the tests pin down.
pub fn rational_embed(t: &LabeledTree) -> Result<Vec<BigRational>> {
    if t.branching < 2 || t.labels.len() != full_tree_size(t.branching, t.depth) {
        return Err(Error::Precondition("tree is not a full truncation".into()));
    }
    let n = t.branching;
    let mut vals = vec![BigRational::zero(); t.labels.len()];
    let mut level_start = 0usize;
    let mut level_len = 1usize;
    let mut denom = BigInt::from(1);
    for _ in 0..t.depth {
        for v in level_start..level_start + level_len {
            let here = vals[v].clone();
            for (c, node) in t.children(v).into_iter().enumerate() {
                let offset = if c == 0 {
                    BigRational::new(BigInt::from(-1), denom.clone())
                } else {
                    BigRational::new(BigInt::from(c as i64), denom.clone())
                };
                vals[node] = here.clone() + offset;
            }
        }
        level_start += level_len;
        level_len *= n;
        denom *= BigInt::from(n as i64 + 1);
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisim::{check_bisimulation, check_interior_map, largest_bisimulation};
    use crate::formula::Formula;
    use crate::topo::{all_preorders, FiniteSpace, Separation};

    fn f(s: &str) -> Formula {
        s.parse().unwrap()
    }

    fn model(
        space: FiniteSpace,
        val: &[(&str, &[u32])],
        noms: &[(&str, u32)],
    ) -> TopoModel {
        TopoModel::new(
            space,
            val.iter()
                .map(|(p, s)| (p.to_string(), s.iter().copied().collect()))
                .collect(),
            noms.iter().map(|(i, w)| (i.to_string(), *w)).collect(),
        )
        .unwrap()
    }

    fn preorder_model(
        pairs: &[(u32, u32)],
        points: &[u32],
        val: &[(&str, &[u32])],
        noms: &[(&str, u32)],
    ) -> TopoModel {
        let order = Preorder::closure_of(points.iter().copied(), pairs).unwrap();
        model(from_preorder(&order).unwrap(), val, noms)
    }

    #[test]
    fn quotient_collapses_indistinguishable_points() {
        // One indiscrete pair carrying p collapses to a single point.
        let m = model(FiniteSpace::indiscrete([1, 2]).unwrap(), &[("p", &[1, 2])], &[]);
        let (q, proj) = kolmogorov_quotient(&m).unwrap();
        assert_eq!(q.space().len(), 1);
        assert_eq!(proj, BTreeMap::from([(1, 1), (2, 1)]));

        // Two indiscrete pairs, p on one of them: a discrete two-pointer.
        let space = FiniteSpace::new(
            [1, 2, 3, 4],
            [
                BTreeSet::new(),
                BTreeSet::from([1, 2]),
                BTreeSet::from([3, 4]),
                BTreeSet::from([1, 2, 3, 4]),
            ],
        )
        .unwrap();
        let m = model(space, &[("p", &[1, 2])], &[]);
        let (q, _) = kolmogorov_quotient(&m).unwrap();
        assert_eq!(q.space().len(), 2);
        assert!(q.space().check_separation(Separation::T1));

        // Distinguishable points survive untouched.
        let sier = model(
            FiniteSpace::new(
                [1, 2],
                [BTreeSet::new(), BTreeSet::from([1]), BTreeSet::from([1, 2])],
            )
            .unwrap(),
            &[("p", &[1])],
            &[],
        );
        let (q, proj) = kolmogorov_quotient(&sier).unwrap();
        assert_eq!(q.space().len(), 2);
        assert!(proj.values().collect::<BTreeSet<_>>().len() == 2);

        // A letter cutting across a class has no image valuation.
        let skewed = model(FiniteSpace::indiscrete([1, 2]).unwrap(), &[("p", &[1])], &[]);
        assert!(matches!(
            kolmogorov_quotient(&skewed),
            Err(Error::Precondition(_))
        ));
        // Nominals cannot be collapsed.
        let named = model(FiniteSpace::indiscrete([1, 2]).unwrap(), &[], &[("i", 1)]);
        assert!(kolmogorov_quotient(&named).is_err());
    }

    #[test]
    fn quotient_projection_is_interior_and_bisimilar() {
        for r in all_preorders(3) {
            let space = from_preorder(&r).unwrap();
            // Open extensions are saturated, so the quotient exists.
            let ext: Vec<u32> = space.minimal_neighborhood(1).unwrap().into_iter().collect();
            let m = model(space, &[("p", &ext)], &[]);
            let (q, proj) = kolmogorov_quotient(&m).unwrap();
            assert!(q.space().check_separation(Separation::T0));
            check_interior_map(&proj, m.space(), q.space()).unwrap();
            let graph: BTreeSet<(u32, u32)> = proj.iter().map(|(&x, &y)| (x, y)).collect();
            let rep = check_bisimulation(&m, &q, &graph).unwrap();
            assert!(rep.ok && rep.total, "{:?}", rep.reason);
        }
    }

    #[test]
    fn symbolic_t1_witnesses_by_shape() {
        // Named point below an open plain point: one singleton plus one
        // progression over the rest of the carrier.
        let rep = preorder_model(&[(1, 2)], &[1, 2], &[("p", &[2])], &[("i", 1)]);
        let s = symbolic_witness_t1(&rep).unwrap();
        assert_eq!(s.classes[&1], ClassShape::Singleton { at: 1 });
        assert_eq!(s.classes[&2], ClassShape::Progression { at: 2, stride: 1 });
        verify_symbolic(&s).unwrap();
        assert!(!s.carrier_is_finite());
        assert_eq!(s.point_of(1), Some(1));
        assert_eq!(s.point_of(17), Some(2));

        // Every point named: all singletons on a finite carrier.
        let disc = model(
            FiniteSpace::discrete([1, 2]).unwrap(),
            &[],
            &[("i", 1), ("j", 2)],
        );
        let s = symbolic_witness_t1(&disc).unwrap();
        assert!(s.carrier_is_finite());
        assert!(s
            .classes
            .values()
            .all(|c| matches!(c, ClassShape::Singleton { .. })));
        verify_symbolic(&s).unwrap();

        // Nominal-free Sierpinski: two progressions with stride 2.
        let sier = preorder_model(&[(2, 1)], &[1, 2], &[("p", &[1])], &[]);
        let s = symbolic_witness_t1(&sier).unwrap();
        assert_eq!(s.classes[&1], ClassShape::Progression { at: 1, stride: 2 });
        assert_eq!(s.classes[&2], ClassShape::Progression { at: 2, stride: 2 });
        verify_symbolic(&s).unwrap();

        // The named-complement condition is a real precondition.
        let bad = preorder_model(&[(2, 1)], &[1, 2], &[], &[("i", 1)]);
        assert!(matches!(
            symbolic_witness_t1(&bad),
            Err(Error::ClassMismatch(_))
        ));
    }

    #[test]
    fn symbolic_t0_witnesses_by_shape() {
        // A named point sharing a proper cluster with an unnamed one: the
        // infinite side is the whole carrier minus finite sets of unnamed
        // elements, where the named element is never separated from
        // below. This rep is beyond any T1 witness.
        let cluster = preorder_model(&[(1, 2), (2, 1)], &[1, 2], &[], &[("i", 1)]);
        assert!(symbolic_witness_t1(&cluster).is_err());
        let s = symbolic_witness_t0(&cluster).unwrap();
        assert_eq!(s.classes[&1], ClassShape::Singleton { at: 1 });
        assert_eq!(s.classes[&2], ClassShape::Progression { at: 2, stride: 1 });
        verify_symbolic(&s).unwrap();

        // One named, one plain point: singleton plus stride-1 progression.
        let rep = preorder_model(&[(1, 2)], &[1, 2], &[], &[("i", 1)]);
        let s = symbolic_witness_t0(&rep).unwrap();
        assert_eq!(s.classes[&2], ClassShape::Progression { at: 2, stride: 1 });
        verify_symbolic(&s).unwrap();

        // All points named: the base lifts as is.
        let disc = model(
            FiniteSpace::discrete([1, 2]).unwrap(),
            &[],
            &[("i", 1), ("j", 2)],
        );
        let s = symbolic_witness_t0(&disc).unwrap();
        assert!(s.carrier_is_finite());
        verify_symbolic(&s).unwrap();

        // Two named points in one cluster have no one-sided separation.
        let bad = preorder_model(&[(1, 2), (2, 1)], &[1, 2], &[], &[("i", 1), ("j", 2)]);
        assert!(symbolic_witness_t0(&bad).is_err());
    }

    #[test]
    fn symbolic_verification_catches_tampering() {
        let rep = preorder_model(&[(1, 2)], &[1, 2], &[("p", &[2])], &[("i", 1)]);
        let good = symbolic_witness_t1(&rep).unwrap();
        verify_symbolic(&good).unwrap();

        // An unnamed singleton class: the partition stays sound but the
        // one-point erasure maps some open onto a non-open set.
        let sier = preorder_model(&[(2, 1)], &[1, 2], &[], &[]);
        let mut s = symbolic_witness_t1(&sier).unwrap();
        s.classes.insert(1, ClassShape::Singleton { at: 1 });
        s.classes.insert(2, ClassShape::Progression { at: 2, stride: 1 });
        let err = verify_symbolic(&s).unwrap_err();
        assert!(err.to_string().contains("not open"), "got: {err}");

        // Overlapping progressions are caught by the window check.
        let mut s = symbolic_witness_t1(&rep).unwrap();
        s.classes.insert(2, ClassShape::Progression { at: 1, stride: 1 });
        let err = verify_symbolic(&s).unwrap_err();
        assert!(err.to_string().contains("classes"), "got: {err}");

        // A gap in the carrier as well.
        let mut s = symbolic_witness_t1(&rep).unwrap();
        s.classes.insert(2, ClassShape::Progression { at: 2, stride: 2 });
        assert!(verify_symbolic(&s).is_err());

        // Deleting a missing designated preimage breaks continuity.
        let mut s = symbolic_witness_t1(&rep).unwrap();
        s.opens.retain(|(o, f)| !(o.len() == 2 && f.is_empty()));
        let err = verify_symbolic(&s).unwrap_err();
        assert!(err.to_string().contains("preimage"), "got: {err}");

        // The T0 family must not delete prefix elements.
        let cluster = preorder_model(&[(1, 2), (2, 1)], &[1, 2], &[], &[("i", 1)]);
        let mut s = symbolic_witness_t0(&cluster).unwrap();
        s.opens.push((
            [1u32, 2].into_iter().collect(),
            [1u64].into_iter().collect(),
        ));
        let err = verify_symbolic(&s).unwrap_err();
        assert!(err.to_string().contains("prefix"), "got: {err}");

        // A designated pair whose first component is not open.
        let mut s = symbolic_witness_t1(&rep).unwrap();
        s.opens.push(([1u32].into_iter().collect(), BTreeSet::new()));
        assert!(verify_symbolic(&s).is_err());
    }

    #[test]
    fn peeling_duplicates_shared_structure() {
        // Two named roots over one shared plain point.
        let rep = preorder_model(
            &[(1, 3), (2, 3)],
            &[1, 2, 3],
            &[("p", &[3])],
            &[("a", 1), ("b", 2)],
        );
        let out = peel_off(&rep).unwrap();
        assert_eq!(out.space().len(), 4);
        // Each root keeps its own copy: p holds at two points now.
        assert_eq!(out.valuation()["p"].len(), 2);
        let l = largest_bisimulation(&rep, &out).unwrap();
        assert!(l.total && l.hybrid);
        for g in ["<>p", "'a & <>p", "E ('b & <>(p & ~'a))"] {
            assert_eq!(
                rep.satisfies_somewhere(&f(g)).unwrap(),
                out.satisfies_somewhere(&f(g)).unwrap(),
                "disagree on {g}"
            );
        }
        // No point of one component reaches the other.
        let order = out.space().to_preorder();
        let named: Vec<u32> = out.nominal_assignment().values().copied().collect();
        for &r1 in &named {
            for &r2 in &named {
                if r1 != r2 {
                    assert!(!order.related(r1, r2).unwrap());
                }
            }
        }

        // Already split input: same shape comes back.
        let split = preorder_model(
            &[(1, 2), (3, 4)],
            &[1, 2, 3, 4],
            &[("p", &[2, 4])],
            &[("a", 1), ("b", 3)],
        );
        let out = peel_off(&split).unwrap();
        assert_eq!(out.space().len(), 4);
        assert!(largest_bisimulation(&split, &out).unwrap().total);

        // A single root yields its generated submodel.
        let single = preorder_model(&[(1, 2), (2, 3)], &[1, 2, 3], &[], &[("a", 1)]);
        assert_eq!(peel_off(&single).unwrap().space().len(), 3);

        // Unreachable points and arcs into named points are rejected.
        let stray = preorder_model(&[(1, 2)], &[1, 2, 3], &[], &[("a", 1)]);
        assert!(matches!(peel_off(&stray), Err(Error::Precondition(_))));
        let into_named = preorder_model(&[(2, 1)], &[1, 2], &[], &[("a", 1)]);
        assert!(peel_off(&into_named).is_err());
        let unrooted = preorder_model(&[(1, 2)], &[1, 2], &[], &[]);
        assert!(peel_off(&unrooted).is_err());
    }

    #[test]
    fn fattening_makes_unnamed_clusters_proper() {
        // A lone reflexive p-point becomes a two-point cluster of p.
        let single = model(FiniteSpace::discrete([1]).unwrap(), &[("p", &[1])], &[]);
        let out = fatten_clusters(&single).unwrap();
        assert_eq!(out.space().len(), 2);
        assert_eq!(out.valuation()["p"].len(), 2);
        let order = out.space().to_preorder();
        let pts = order.points().to_vec();
        assert!(order.related(pts[0], pts[1]).unwrap());
        assert!(order.related(pts[1], pts[0]).unwrap());
        let l = largest_bisimulation(&single, &out).unwrap();
        assert!(l.total && l.hybrid);

        // Proper clusters and named points stay untouched.
        let cluster = preorder_model(&[(1, 2), (2, 1)], &[1, 2], &[("p", &[1, 2])], &[]);
        assert_eq!(fatten_clusters(&cluster).unwrap(), cluster);
        let named = model(FiniteSpace::discrete([1]).unwrap(), &[], &[("i", 1)]);
        assert_eq!(fatten_clusters(&named).unwrap(), named);

        // Mixed rooted model: only the unnamed simple points double, and
        // formula truth is preserved to modal depth three.
        let rep = preorder_model(
            &[(1, 2), (2, 3), (2, 4), (4, 3)],
            &[1, 2, 3, 4],
            &[("p", &[2, 3]), ("q", &[4])],
            &[("i", 1)],
        );
        let out = fatten_clusters(&rep).unwrap();
        assert_eq!(out.space().len(), 7);
        let l = largest_bisimulation(&rep, &out).unwrap();
        assert!(l.total && l.hybrid);
        for g in [
            "<>p",
            "<><>(q & <>p)",
            "[](p -> <>q)",
            "'i & <>(p & <>(q & <>p))",
            "E (q & []<>q)",
        ] {
            assert_eq!(
                rep.satisfies_somewhere(&f(g)).unwrap(),
                out.satisfies_somewhere(&f(g)).unwrap(),
                "disagree on {g}"
            );
        }
    }

    #[test]
    fn unraveling_fills_the_tree() {
        // Root above one leaf, binary, depth two.
        let rep = preorder_model(&[(1, 2)], &[1, 2], &[("p", &[2])], &[("i", 1)]);
        let t = unravel_to_full_tree(&rep, 1, 2, 2).unwrap();
        assert_eq!(t.labels, vec![1, 2, 2, 2, 2, 2, 2]);
        verify_tree_labeling(&t, &rep, 1).unwrap();

        // Depth zero: a single node.
        let t0 = unravel_to_full_tree(&rep, 1, 2, 0).unwrap();
        assert_eq!(t0.labels, vec![1]);
        verify_tree_labeling(&t0, &rep, 1).unwrap();

        // Out-degree two at the root: both successors appear as children.
        let fork = preorder_model(&[(1, 2), (1, 3)], &[1, 2, 3], &[], &[("i", 1)]);
        let t = unravel_to_full_tree(&fork, 1, 2, 1).unwrap();
        let kids: BTreeSet<u32> = t.labels[1..].iter().copied().collect();
        assert_eq!(kids, BTreeSet::from([2, 3]));
        verify_tree_labeling(&t, &fork, 1).unwrap();

        // A proper cluster below the root keeps both points among the
        // children at every level.
        let rolled = preorder_model(&[(1, 2), (2, 3), (3, 2)], &[1, 2, 3], &[], &[("i", 1)]);
        let t = unravel_to_full_tree(&rolled, 1, 2, 3).unwrap();
        verify_tree_labeling(&t, &rolled, 1).unwrap();

        // Too much branching for n, unnamed root, reachable root, and a
        // trivial root are all rejected.
        let wide = preorder_model(
            &[(1, 2), (1, 3), (1, 4)],
            &[1, 2, 3, 4],
            &[],
            &[("i", 1)],
        );
        assert!(matches!(
            unravel_to_full_tree(&wide, 1, 2, 1),
            Err(Error::Precondition(_))
        ));
        assert!(unravel_to_full_tree(&rep, 2, 2, 1).is_err());
        let reached = preorder_model(&[(1, 2), (2, 1)], &[1, 2], &[], &[("i", 1)]);
        assert!(unravel_to_full_tree(&reached, 1, 2, 1).is_err());
        let lone = model(FiniteSpace::discrete([1]).unwrap(), &[], &[("i", 1)]);
        assert!(unravel_to_full_tree(&lone, 1, 2, 1).is_err());

        // Tampered trees fail verification.
        let mut bad = unravel_to_full_tree(&rep, 1, 2, 2).unwrap();
        bad.labels[3] = 1;
        assert!(verify_tree_labeling(&bad, &rep, 1).is_err());
        let mut short = unravel_to_full_tree(&rep, 1, 2, 2).unwrap();
        short.labels.pop();
        assert!(verify_tree_labeling(&short, &rep, 1).is_err());
    }

    #[test]
    fn rational_embedding_matches_the_recurrence() {
        let rep = preorder_model(&[(1, 2)], &[1, 2], &[], &[("i", 1)]);
        let t = unravel_to_full_tree(&rep, 1, 2, 2).unwrap();
        let vals = rational_embed(&t).unwrap();
        let q = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
        assert_eq!(vals[0], q(0, 1));
        // Children of the root at distance one.
        assert_eq!(vals[1], q(-1, 1));
        assert_eq!(vals[2], q(1, 1));
        // Children of -1 shift by a third.
        assert_eq!(vals[3], q(-4, 3));
        assert_eq!(vals[4], q(-2, 3));

        // Injectivity and sibling-subtree interval separation.
        for n in [2usize, 3] {
            let t = unravel_to_full_tree(&rep, 1, n, 4).unwrap();
            let vals = rational_embed(&t).unwrap();
            let distinct: BTreeSet<&BigRational> = vals.iter().collect();
            assert_eq!(distinct.len(), vals.len(), "collision at branching {n}");
            for v in 0..vals.len() {
                let kids = t.children(v);
                let mut spans = Vec::new();
                for &k in &kids {
                    // Interval of the whole subtree below k.
                    let mut stack = vec![k];
                    let mut lo = vals[k].clone();
                    let mut hi = vals[k].clone();
                    while let Some(u) = stack.pop() {
                        lo = lo.min(vals[u].clone());
                        hi = hi.max(vals[u].clone());
                        stack.extend(t.children(u));
                    }
                    spans.push((lo, hi));
                }
                spans.sort();
                for w in spans.windows(2) {
                    assert!(w[0].1 < w[1].0, "subtree intervals overlap under node {v}");
                }
            }
        }

        // Truncation shape is enforced.
        let mut bad = t.clone();
        bad.labels.pop();
        assert!(rational_embed(&bad).is_err());
    }

    #[test]
    fn game_witnesses_feed_the_symbolic_constructions() {
        use crate::finrep::quasi_to_model;
        use crate::game::{decide, Verdict};

        // A named point with an escape is T1-satisfiable only on infinite
        // spaces; its witness must survive the full symbolic pipeline.
        let target = f("'i & <>~'i");
        let Verdict::Satisfiable(q) = decide(&target, SpaceClass::T1).unwrap() else {
            panic!("expected a witness");
        };
        let rep = quasi_to_model(&q).unwrap();
        check_finite_rep(&rep, SpaceClass::T1).unwrap();
        let s = symbolic_witness_t1(&rep).unwrap();
        verify_symbolic(&s).unwrap();
        assert!(!s.carrier_is_finite());

        // A name only approachable through a cluster needs the T0 family.
        let target = f("<>(~'i & <>'i)");
        let Verdict::Satisfiable(q) = decide(&target, SpaceClass::T0).unwrap() else {
            panic!("expected a witness");
        };
        let rep = quasi_to_model(&q).unwrap();
        let s = symbolic_witness_t0(&rep).unwrap();
        verify_symbolic(&s).unwrap();
        // The satisfying point's class collapses back onto a point that
        // satisfies the target in the base model.
        let (&t, _) = q
            .labels
            .iter()
            .find(|(_, l)| l.contains(&target))
            .expect("target somewhere");
        assert!(rep.eval(&target, t).unwrap());
        assert!(s.classes.contains_key(&t));
    }
}
