//! Finitary representations: formula universes, Hintikka sets, and
//! quasi-models.
//!
//! The universe of a core-shaped target is its subformula closure plus the
//! negations of all non-negations, indexed so that member sets fit in a
//! `u128` mask. A Hintikka set is a mask that decides every universe
//! formula consistently: negations flip, conjunctions are intersections,
//! and a member body forces its diamond.
//!
//! A quasi-model labels each point of a finite preorder (standing for its
//! Alexandroff space) with a Hintikka set such that diamonds match
//! minimal-neighborhood reachability exactly, existential formulas are
//! uniform across points, and every nominal of the universe names exactly
//! one point. Such an object certifies satisfiability: its label map is
//! literally the truth map of the model it induces. Per-class side
//! conditions on nominal points certify that the certificate also survives
//! into the T0 or T1 realm, where the realizing spaces are generally
//! infinite.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{self, Formula, FormulaSet};
use crate::model::TopoModel;
use crate::topo::{from_preorder, Preorder};

/// Cap on universe size; Hintikka sets are `u128` masks.
pub const MAX_UNIVERSE: usize = 128;

/// Cap on the number of Hintikka sets materialized for one sign vector.
const MAX_ALPHABET: usize = 1 << 18;

/// The class of spaces a satisfiability question ranges over. On finite
/// spaces T1 collapses to discreteness, so T1 questions are really about
/// infinite spaces; T2 coincides with T1 for this language and is folded
/// into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceClass {
    All,
    T0,
    T1,
}

impl std::fmt::Display for SpaceClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpaceClass::All => "all",
            SpaceClass::T0 => "t0",
            SpaceClass::T1 => "t1",
        })
    }
}

/// How one universe formula decomposes into earlier ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Shape {
    Prop,
    Nom,
    Neg(usize),
    And(usize, usize),
    Dia(usize),
    E(usize),
}

/// An indexed universe: the negation closure of a core-shaped target.
#[derive(Debug, Clone)]
pub struct Universe {
    formulas: Vec<Formula>,
    index: BTreeMap<Formula, usize>,
    shapes: Vec<Shape>,
    /// Indices in dependency order: children precede parents.
    topo: Vec<usize>,
    /// (diamond index, body index) pairs.
    diamonds: Vec<(usize, usize)>,
    /// (existential index, body index) pairs.
    es: Vec<(usize, usize)>,
    /// (name, nominal index) pairs.
    nominals: Vec<(String, usize)>,
    target: usize,
}

impl Universe {
    /// Builds the universe of a target already in core shape (no `[]`,
    /// `@`, `A`, `|`, `->`).
    pub fn new(target: &Formula) -> Result<Self> {
        if !target.is_core() {
            return Err(Error::Precondition(format!(
                "target must be core-shaped, got {target}"
            )));
        }
        let sf = formula::subformula_closure(target);
        let closed = formula::negation_closure(&sf);
        if closed.len() > MAX_UNIVERSE {
            return Err(Error::Capacity(format!(
                "universe has {} formulas, limit is {MAX_UNIVERSE}",
                closed.len()
            )));
        }
        let formulas: Vec<Formula> = closed.into_iter().collect();
        let index: BTreeMap<Formula, usize> = formulas
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i))
            .collect();
        let mut shapes = Vec::with_capacity(formulas.len());
        let mut diamonds = Vec::new();
        let mut es = Vec::new();
        let mut nominals = Vec::new();
        for (i, f) in formulas.iter().enumerate() {
            let shape = match f {
                Formula::Prop(_) => Shape::Prop,
                Formula::Nom(n) => {
                    nominals.push((n.clone(), i));
                    Shape::Nom
                }
                Formula::Neg(g) => Shape::Neg(index[g.as_ref()]),
                Formula::And(g, h) => Shape::And(index[g.as_ref()], index[h.as_ref()]),
                Formula::Dia(g) => {
                    let b = index[g.as_ref()];
                    diamonds.push((i, b));
                    Shape::Dia(b)
                }
                Formula::E(g) => {
                    let b = index[g.as_ref()];
                    es.push((i, b));
                    Shape::E(b)
                }
                other => {
                    return Err(Error::Precondition(format!(
                        "non-core connective in universe: {other}"
                    )))
                }
            };
            shapes.push(shape);
        }
        let mut topo: Vec<usize> = (0..formulas.len()).collect();
        topo.sort_by_key(|&i| (formulas[i].connective_count(), i));
        let target_idx = index[target];
        Ok(Universe {
            formulas,
            index,
            shapes,
            topo,
            diamonds,
            es,
            nominals,
            target: target_idx,
        })
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn index_of(&self, f: &Formula) -> Option<usize> {
        self.index.get(f).copied()
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub(crate) fn diamonds(&self) -> &[(usize, usize)] {
        &self.diamonds
    }

    pub(crate) fn existentials(&self) -> &[(usize, usize)] {
        &self.es
    }

    pub(crate) fn nominal_entries(&self) -> &[(String, usize)] {
        &self.nominals
    }

    /// Mask with one bit per nominal formula.
    pub(crate) fn nominal_mask(&self) -> u128 {
        self.nominals.iter().map(|&(_, i)| 1u128 << i).sum()
    }

    /// Checks the Hintikka conditions on a membership mask: negations are
    /// complements, conjunctions are intersections, a member body forces
    /// its diamond in (every point is in the closure of any set it is in).
    pub fn is_hintikka(&self, mask: u128) -> bool {
        let has = |i: usize| mask & (1 << i) != 0;
        self.shapes.iter().enumerate().all(|(i, s)| match *s {
            Shape::Prop | Shape::Nom | Shape::E(_) => true,
            Shape::Neg(b) => has(i) != has(b),
            Shape::And(a, b) => has(i) == (has(a) && has(b)),
            Shape::Dia(b) => has(i) || !has(b),
        })
    }

    /// All Hintikka masks whose existential signs equal `eps` (bit k of
    /// `eps` is the sign of `existentials()[k]`) and which contain no
    /// witness for an existential signed false.
    pub(crate) fn hintikka_alphabet(&self, eps: u64) -> Result<Vec<u128>> {
        let mut out = Vec::new();
        let mut mask = 0u128;
        self.alphabet_rec(0, &mut mask, eps, &mut out)?;
        out.sort_unstable();
        Ok(out)
    }

    fn alphabet_rec(
        &self,
        pos: usize,
        mask: &mut u128,
        eps: u64,
        out: &mut Vec<u128>,
    ) -> Result<()> {
        if pos == self.topo.len() {
            if out.len() >= MAX_ALPHABET {
                return Err(Error::Capacity(
                    "too many Hintikka sets for one sign vector".into(),
                ));
            }
            out.push(*mask);
            return Ok(());
        }
        let i = self.topo[pos];
        let has = |m: u128, j: usize| m & (1 << j) != 0;
        let choices: &[bool] = match self.shapes[i] {
            Shape::Prop | Shape::Nom => &[false, true],
            Shape::Neg(b) => {
                if has(*mask, b) {
                    &[false]
                } else {
                    &[true]
                }
            }
            Shape::And(a, b) => {
                if has(*mask, a) && has(*mask, b) {
                    &[true]
                } else {
                    &[false]
                }
            }
            Shape::Dia(b) => {
                if has(*mask, b) {
                    &[true]
                } else {
                    &[false, true]
                }
            }
            Shape::E(b) => {
                let k = self
                    .es
                    .iter()
                    .position(|&(ei, _)| ei == i)
                    .expect("existential is registered");
                let sign = eps & (1 << k) != 0;
                if !sign && has(*mask, b) {
                    // A false existential forbids local witnesses.
                    return Ok(());
                }
                if sign {
                    &[true]
                } else {
                    &[false]
                }
            }
        };
        for &c in choices {
            if c {
                *mask |= 1 << i;
            } else {
                *mask &= !(1u128 << i);
            }
            self.alphabet_rec(pos + 1, mask, eps, out)?;
        }
        *mask &= !(1u128 << i);
        Ok(())
    }

    pub fn mask_to_set(&self, mask: u128) -> BTreeSet<Formula> {
        self.formulas
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, f)| f.clone())
            .collect()
    }

    pub fn set_to_mask(&self, set: &BTreeSet<Formula>) -> Result<u128> {
        let mut mask = 0u128;
        for f in set {
            let i = self.index_of(f).ok_or_else(|| {
                Error::BadInput(format!("{f} is not in the universe of the target"))
            })?;
            mask |= 1 << i;
        }
        Ok(mask)
    }

    /// Masks whose diamonds may not grow along the canonical order: if a
    /// diamond is absent at `from`, both it and its body must be absent at
    /// `to`. Play steps and quasi-model reachability both live inside this
    /// relation.
    pub(crate) fn diamonds_shrink(&self, from: u128, to: u128) -> bool {
        to & self.forbidden_after(from) == 0
    }

    /// Bits that may not appear in any canonical successor of `from`.
    pub(crate) fn forbidden_after(&self, from: u128) -> u128 {
        let mut bad = 0u128;
        for &(di, bi) in &self.diamonds {
            if from & (1 << di) == 0 {
                bad |= (1 << di) | (1 << bi);
            }
        }
        bad
    }
}

/// A labeled finite preorder certifying satisfiability of `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasiModel {
    pub order: Preorder,
    pub labels: BTreeMap<u32, BTreeSet<Formula>>,
    pub target: Formula,
}

/// Validates a quasi-model against a space class. `Ok(())` means the
/// object certifies that `target` is satisfiable in some space of the
/// class; any defect is reported as `InvalidQuasiModel`.
pub fn check_quasi_model(q: &QuasiModel, class: SpaceClass) -> Result<()> {
    let uni = Universe::new(&q.target)?;
    let points: Vec<u32> = q.order.points().to_vec();
    if points.is_empty() {
        return Err(Error::InvalidQuasiModel("space has no points".into()));
    }
    let labeled: BTreeSet<u32> = q.labels.keys().copied().collect();
    let expected: BTreeSet<u32> = points.iter().copied().collect();
    if labeled != expected {
        return Err(Error::InvalidQuasiModel(
            "labels must cover exactly the points of the space".into(),
        ));
    }
    let mut masks = BTreeMap::new();
    for (&t, set) in &q.labels {
        let m = uni
            .set_to_mask(set)
            .map_err(|e| Error::InvalidQuasiModel(format!("label of {t}: {e}")))?;
        if !uni.is_hintikka(m) {
            return Err(Error::InvalidQuasiModel(format!(
                "label of {t} is not a Hintikka set"
            )));
        }
        masks.insert(t, m);
    }
    let target_bit = 1u128 << uni.target_index();
    if !masks.values().any(|&m| m & target_bit != 0) {
        return Err(Error::InvalidQuasiModel(
            "target holds at no point".into(),
        ));
    }
    // Diamonds match reachability: a diamond is in a label exactly when
    // the minimal neighborhood contains a point whose label has the body.
    for &t in &points {
        let idx = q.order.index_of(t)?;
        let nbhd: Vec<u32> = q.order.succ_indices(idx).map(|j| points[j]).collect();
        for &(di, bi) in uni.diamonds() {
            let have = masks[&t] & (1 << di) != 0;
            let reach = nbhd.iter().any(|s| masks[s] & (1 << bi) != 0);
            if have != reach {
                return Err(Error::InvalidQuasiModel(format!(
                    "{} at {t} but its body is {} in the minimal neighborhood",
                    uni.formulas()[di],
                    if reach { "present" } else { "absent" }
                )));
            }
        }
    }
    // Existentials are uniform and truthful.
    for &(ei, bi) in uni.existentials() {
        let witness = points.iter().any(|t| masks[t] & (1 << bi) != 0);
        for &t in &points {
            let have = masks[&t] & (1 << ei) != 0;
            if have != witness {
                return Err(Error::InvalidQuasiModel(format!(
                    "{} at {t} disagrees with the existence of a witness",
                    uni.formulas()[ei]
                )));
            }
        }
    }
    // Every universe nominal names exactly one point.
    let mut named = BTreeMap::new();
    for (name, ni) in uni.nominal_entries() {
        let holders: Vec<u32> = points
            .iter()
            .copied()
            .filter(|t| masks[t] & (1 << ni) != 0)
            .collect();
        if holders.len() != 1 {
            return Err(Error::InvalidQuasiModel(format!(
                "nominal '{name} labels {} points, needs exactly 1",
                holders.len()
            )));
        }
        named.insert(name.clone(), holders[0]);
    }
    // Separation obligations concern only the points the language can pin
    // down by name.
    let named_points: BTreeSet<u32> = named.values().copied().collect();
    match class {
        SpaceClass::All => {}
        SpaceClass::T1 => {
            // Complement of a named point is open iff it is up-closed,
            // i.e. no other point reaches the named one.
            for &t in &named_points {
                for &w in &points {
                    if w != t && q.order.related(w, t)? {
                        return Err(Error::InvalidQuasiModel(format!(
                            "complement of named point {t} is not open: {w} reaches it"
                        )));
                    }
                }
            }
        }
        SpaceClass::T0 => {
            // Some open must contain exactly one of any two named points,
            // which fails exactly when they reach each other.
            let named_vec: Vec<u32> = named_points.iter().copied().collect();
            for (k, &s) in named_vec.iter().enumerate() {
                for &t in &named_vec[k + 1..] {
                    if q.order.related(s, t)? && q.order.related(t, s)? {
                        return Err(Error::InvalidQuasiModel(format!(
                            "named points {s} and {t} share all opens"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Checks the per-class openness conditions that make a finite model a
/// representation of an infinite model of the class: T1 wants the
/// complement of every nominal-named point open, T0 wants any two
/// distinct named points separated one-sidedly by an open.
pub fn check_finite_rep(m: &TopoModel, class: SpaceClass) -> Result<()> {
    m.validate()?;
    let named: BTreeSet<u32> = m.nominal_assignment().values().copied().collect();
    match class {
        SpaceClass::All => {}
        SpaceClass::T1 => {
            for &t in &named {
                let rest: BTreeSet<u32> = m
                    .space()
                    .points()
                    .iter()
                    .copied()
                    .filter(|&w| w != t)
                    .collect();
                if !m.space().is_open(&rest)? {
                    return Err(Error::ClassMismatch(format!(
                        "complement of named point {t} is not open"
                    )));
                }
            }
        }
        SpaceClass::T0 => {
            // One-sided separation fails exactly when each point sits in
            // the other's smallest open.
            let named: Vec<u32> = named.into_iter().collect();
            for (k, &s) in named.iter().enumerate() {
                for &t in &named[k + 1..] {
                    if m.space().minimal_neighborhood(s)?.contains(&t)
                        && m.space().minimal_neighborhood(t)?.contains(&s)
                    {
                        return Err(Error::ClassMismatch(format!(
                            "no open separates named points {s} and {t}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// The model a quasi-model denotes: letters hold where their labels say,
/// nominals name their unique labeled point.
pub fn quasi_to_model(q: &QuasiModel) -> Result<TopoModel> {
    let uni = Universe::new(&q.target)?;
    let mut valuation: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
    let mut nominals: BTreeMap<String, u32> = BTreeMap::new();
    for (&t, set) in &q.labels {
        for f in set {
            match f {
                Formula::Prop(p) => {
                    valuation.entry(p.clone()).or_default().insert(t);
                }
                Formula::Nom(n) => {
                    if let Some(prev) = nominals.insert(n.clone(), t) {
                        if prev != t {
                            return Err(Error::InvalidQuasiModel(format!(
                                "nominal '{n} labels both {prev} and {t}"
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    for (name, _) in uni.nominal_entries() {
        if !nominals.contains_key(name) {
            return Err(Error::InvalidQuasiModel(format!(
                "nominal '{name} labels no point"
            )));
        }
    }
    TopoModel::new(from_preorder(&q.order)?, valuation, nominals)
}

/// The label map of a model: each point gets the universe formulas true at
/// it. The result is always a valid class-free quasi-model when every
/// universe nominal is assigned in the model.
pub fn model_to_quasi(m: &TopoModel, target: &Formula) -> Result<QuasiModel> {
    let core = formula::to_core(target);
    let uni = Universe::new(&core)?;
    let mut labels = BTreeMap::new();
    for &t in m.space().points() {
        let mut set = BTreeSet::new();
        for f in uni.formulas() {
            if m.eval(f, t)? {
                set.insert(f.clone());
            }
        }
        labels.insert(t, set);
    }
    Ok(QuasiModel {
        order: m.space().to_preorder(),
        labels,
        target: core,
    })
}

/// Filtration: collapses points that agree on every formula of a
/// subformula-closed set, takes the quotient topology, and pushes the
/// valuation through. Returns the quotient model and the projection map;
/// each class is represented by its smallest member.
///
/// For every member of the set, truth is preserved between a point and
/// its class: the extension of a boxed member is always a union of
/// classes, so it projects to an open set, and that carries the boxed
/// member down; the quotient topology carries it back up. No such
/// argument exists for opens outside those extensions, and indeed the
/// projection need not be an open map (see the inline tests for a
/// three-point example), so its graph is not a topobisimulation in
/// general.
pub fn filtrate(
    m: &TopoModel,
    sigma: &FormulaSet,
) -> Result<(TopoModel, BTreeMap<u32, u32>)> {
    m.validate()?;
    if m.space().is_empty() {
        return Err(Error::InvalidModel("cannot filtrate an empty model".into()));
    }
    for f in sigma {
        if !formula::subformula_closure(f).is_subset(sigma) {
            return Err(Error::BadInput(format!(
                "filtration set is not subformula-closed at {f}"
            )));
        }
    }
    // Theory per point, as the subset of true members.
    let theory = |t: u32| -> Result<Vec<bool>> {
        sigma.iter().map(|f| m.eval(f, t)).collect()
    };
    let mut rep: BTreeMap<Vec<bool>, u32> = BTreeMap::new();
    let mut proj: BTreeMap<u32, u32> = BTreeMap::new();
    for &t in m.space().points() {
        let r = *rep.entry(theory(t)?).or_insert(t);
        proj.insert(t, r);
    }
    let space = crate::topo::quotient_topology(m.space(), &proj)?;
    let valuation: BTreeMap<String, BTreeSet<u32>> = m
        .valuation()
        .iter()
        .map(|(p, ext)| (p.clone(), ext.iter().map(|x| proj[x]).collect()))
        .collect();
    let nominals: BTreeMap<String, u32> = m
        .nominal_assignment()
        .iter()
        .map(|(i, x)| (i.clone(), proj[x]))
        .collect();
    Ok((TopoModel::new(space, valuation, nominals)?, proj))
}

/// The negation-closed subformula set of a formula's core shape: the
/// filtration set that the satisfiability machinery uses throughout.
pub fn closure_set(target: &Formula) -> FormulaSet {
    let core = formula::to_core(target);
    formula::negation_closure(&formula::subformula_closure(&core))
}

// ---------------------------------------------------------------------------
// JSON form: formulas as concrete syntax strings, point keys as strings.
// The space travels in its preorder form and accepts any space form.

#[derive(Serialize, Deserialize)]
struct QuasiJson {
    space: Preorder,
    labels: BTreeMap<String, Vec<String>>,
    target: String,
}

impl Serialize for QuasiModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        QuasiJson {
            space: self.order.clone(),
            labels: self
                .labels
                .iter()
                .map(|(t, set)| {
                    (t.to_string(), set.iter().map(|f| f.to_string()).collect())
                })
                .collect(),
            target: self.target.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuasiModel {
    fn deserialize<D: serde::Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = QuasiJson::deserialize(d)?;
        let mut labels = BTreeMap::new();
        for (k, fs) in raw.labels {
            let point: u32 = k
                .parse()
                .map_err(|_| D::Error::custom(format!("bad point key {k:?}")))?;
            let mut set = BTreeSet::new();
            for f in fs {
                set.insert(formula::parse(&f).map_err(D::Error::custom)?);
            }
            labels.insert(point, set);
        }
        let target = formula::parse(&raw.target).map_err(D::Error::custom)?;
        Ok(QuasiModel {
            order: raw.space,
            labels,
            target,
        })
    }
}
