//! Topological models and formula evaluation.
//!
//! A model is a finite space, a valuation sending proposition letters to
//! point sets, and an assignment sending each nominal to a single point.
//! `<>` is topological closure, `[]` is interior; on a finite space these
//! reduce to existential and universal statements about the minimal open
//! neighborhood. `E`, `A`, and `@` quantify over the whole space.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::topo::FiniteSpace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopoModel {
    space: FiniteSpace,
    #[serde(default)]
    valuation: BTreeMap<String, BTreeSet<u32>>,
    #[serde(default)]
    nominals: BTreeMap<String, u32>,
}

impl TopoModel {
    pub fn new(
        space: FiniteSpace,
        valuation: BTreeMap<String, BTreeSet<u32>>,
        nominals: BTreeMap<String, u32>,
    ) -> Result<Self> {
        let m = TopoModel {
            space,
            valuation,
            nominals,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks that everything the valuation and assignment mention exists.
    /// Deserialized models must be passed through this before use.
    pub fn validate(&self) -> Result<()> {
        for (p, set) in &self.valuation {
            for &w in set {
                self.space.index_of(w).map_err(|_| {
                    Error::InvalidModel(format!("valuation of {p} mentions unknown point {w}"))
                })?;
            }
        }
        for (i, &w) in &self.nominals {
            self.space.index_of(w).map_err(|_| {
                Error::InvalidModel(format!("nominal '{i} is assigned unknown point {w}"))
            })?;
        }
        Ok(())
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn valuation(&self) -> &BTreeMap<String, BTreeSet<u32>> {
        &self.valuation
    }

    pub fn nominal_assignment(&self) -> &BTreeMap<String, u32> {
        &self.nominals
    }

    fn extension_mask(&self, f: &Formula) -> Result<u64> {
        let full = self.space.full_mask();
        Ok(match f {
            Formula::Prop(p) => match self.valuation.get(p) {
                Some(set) => self.space.mask_of(set)?,
                None => 0,
            },
            Formula::Nom(i) => {
                let w = *self
                    .nominals
                    .get(i)
                    .ok_or_else(|| Error::UnknownNominal(i.clone()))?;
                1 << self.space.index_of(w)?
            }
            Formula::Neg(g) => full & !self.extension_mask(g)?,
            Formula::And(g, h) => self.extension_mask(g)? & self.extension_mask(h)?,
            Formula::Or(g, h) => self.extension_mask(g)? | self.extension_mask(h)?,
            Formula::Impl(g, h) => {
                (full & !self.extension_mask(g)?) | self.extension_mask(h)?
            }
            Formula::Dia(g) => {
                // Closure: w is in it iff every open around w meets the
                // extension, i.e. the minimal neighborhood does.
                let ext = self.extension_mask(g)?;
                let mut m = 0u64;
                for idx in 0..self.space.len() {
                    if self.space.min_nbhd_mask(idx) & ext != 0 {
                        m |= 1 << idx;
                    }
                }
                m
            }
            Formula::Box(g) => {
                // Interior: the minimal neighborhood sits inside the
                // extension.
                let ext = self.extension_mask(g)?;
                let mut m = 0u64;
                for idx in 0..self.space.len() {
                    if self.space.min_nbhd_mask(idx) & !ext == 0 {
                        m |= 1 << idx;
                    }
                }
                m
            }
            Formula::At(i, g) => {
                let w = *self
                    .nominals
                    .get(i)
                    .ok_or_else(|| Error::UnknownNominal(i.clone()))?;
                let ext = self.extension_mask(g)?;
                if ext & (1 << self.space.index_of(w)?) != 0 {
                    full
                } else {
                    0
                }
            }
            Formula::E(g) => {
                if self.extension_mask(g)? != 0 {
                    full
                } else {
                    0
                }
            }
            Formula::A(g) => {
                if self.extension_mask(g)? == full {
                    full
                } else {
                    0
                }
            }
        })
    }

    /// The set of points where `f` holds.
    pub fn extension(&self, f: &Formula) -> Result<BTreeSet<u32>> {
        Ok(self.space.set_of(self.extension_mask(f)?))
    }

    /// Truth of `f` at the point `w`.
    pub fn eval(&self, f: &Formula, w: u32) -> Result<bool> {
        let idx = self.space.index_of(w)?;
        Ok(self.extension_mask(f)? & (1 << idx) != 0)
    }

    /// True iff `f` holds at some point.
    pub fn satisfies_somewhere(&self, f: &Formula) -> Result<bool> {
        Ok(self.extension_mask(f)? != 0)
    }

    /// True iff `f` holds at every point.
    pub fn holds_everywhere(&self, f: &Formula) -> Result<bool> {
        Ok(self.extension_mask(f)? == self.space.full_mask())
    }

    /// DOT rendering of the specialization preorder. Each node carries its
    /// point id plus the letters and nominals true there; reflexive arcs
    /// are dropped.
    pub fn to_dot(&self) -> String {
        let r = self.space.to_preorder();
        let mut out = String::from("digraph model {\n  rankdir=BT;\n  node [shape=box];\n");
        for &w in self.space.points() {
            let mut labels: Vec<String> = self
                .valuation
                .iter()
                .filter(|(_, set)| set.contains(&w))
                .map(|(p, _)| p.clone())
                .collect();
            labels.extend(
                self.nominals
                    .iter()
                    .filter(|(_, &v)| v == w)
                    .map(|(i, _)| format!("'{i}")),
            );
            let tail = if labels.is_empty() {
                String::new()
            } else {
                format!(": {}", labels.join(" "))
            };
            let _ = writeln!(out, "  n{w} [label=\"{w}{tail}\"];");
        }
        for (u, v) in r.pairs() {
            if u != v {
                let _ = writeln!(out, "  n{u} -> n{v};");
            }
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{from_preorder, Preorder};

    fn sierpinski_model() -> TopoModel {
        let space = FiniteSpace::new(
            [1, 2],
            [
                BTreeSet::new(),
                BTreeSet::from([1]),
                BTreeSet::from([1, 2]),
            ],
        )
        .unwrap();
        TopoModel::new(
            space,
            BTreeMap::from([("p".to_string(), BTreeSet::from([1]))]),
            BTreeMap::from([("i".to_string(), 2)]),
        )
        .unwrap()
    }

    fn f(src: &str) -> Formula {
        src.parse().unwrap()
    }

    #[test]
    fn sierpinski_frozen_values() {
        let m = sierpinski_model();
        // V(p) = {1}: the open point satisfies []p, the closed point sees p
        // in every neighborhood, so <>p holds everywhere.
        assert_eq!(m.extension(&f("p")).unwrap(), BTreeSet::from([1]));
        assert_eq!(m.extension(&f("[]p")).unwrap(), BTreeSet::from([1]));
        assert_eq!(m.extension(&f("<>p")).unwrap(), BTreeSet::from([1, 2]));
        assert_eq!(m.extension(&f("<>~p")).unwrap(), BTreeSet::from([2]));
        assert_eq!(m.extension(&f("'i")).unwrap(), BTreeSet::from([2]));
        assert_eq!(m.extension(&f("@'i <>p")).unwrap(), BTreeSet::from([1, 2]));
        assert_eq!(m.extension(&f("@'i []p")).unwrap(), BTreeSet::new());
        assert_eq!(m.extension(&f("E []p")).unwrap(), BTreeSet::from([1, 2]));
        assert_eq!(m.extension(&f("A <>p")).unwrap(), BTreeSet::from([1, 2]));
        assert_eq!(m.extension(&f("A p")).unwrap(), BTreeSet::new());
        assert!(m.eval(&f("[]p"), 1).unwrap());
        assert!(!m.eval(&f("[]p"), 2).unwrap());
        assert!(m.satisfies_somewhere(&f("~p & <>p")).unwrap());
        assert!(m.holds_everywhere(&f("p | <>p")).unwrap());
    }

    #[test]
    fn boolean_connectives() {
        let m = sierpinski_model();
        for w in [1u32, 2] {
            let p = m.eval(&f("p"), w).unwrap();
            let i = m.eval(&f("'i"), w).unwrap();
            assert_eq!(m.eval(&f("p & 'i"), w).unwrap(), p && i);
            assert_eq!(m.eval(&f("p | 'i"), w).unwrap(), p || i);
            assert_eq!(m.eval(&f("p -> 'i"), w).unwrap(), !p || i);
            assert_eq!(m.eval(&f("~p"), w).unwrap(), !p);
        }
    }

    #[test]
    fn unknown_names() {
        let m = sierpinski_model();
        // Unassigned letters have empty extensions; unassigned nominals are
        // errors since a nominal must name a point.
        assert_eq!(m.extension(&f("q")).unwrap(), BTreeSet::new());
        assert!(matches!(
            m.eval(&f("'nowhere"), 1),
            Err(Error::UnknownNominal(_))
        ));
        assert!(matches!(m.eval(&f("p"), 17), Err(Error::UnknownPoint(17))));
    }

    #[test]
    fn rejects_inconsistent_models() {
        let space = FiniteSpace::discrete([1, 2]).unwrap();
        assert!(matches!(
            TopoModel::new(
                space.clone(),
                BTreeMap::from([("p".to_string(), BTreeSet::from([9]))]),
                BTreeMap::new(),
            ),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            TopoModel::new(
                space,
                BTreeMap::new(),
                BTreeMap::from([("i".to_string(), 9)]),
            ),
            Err(Error::InvalidModel(_))
        ));
    }

    /// Second route to the modal clauses: evaluate on the specialization
    /// preorder in Kripke style, where `<>g` holds at `w` iff some
    /// `R`-successor of `w` satisfies `g`.
    fn kripke_eval(m: &TopoModel, r: &Preorder, g: &Formula, w: u32) -> bool {
        match g {
            Formula::Prop(p) => m
                .valuation()
                .get(p)
                .map(|s| s.contains(&w))
                .unwrap_or(false),
            Formula::Nom(i) => m.nominal_assignment()[i] == w,
            Formula::Neg(a) => !kripke_eval(m, r, a, w),
            Formula::And(a, b) => kripke_eval(m, r, a, w) && kripke_eval(m, r, b, w),
            Formula::Or(a, b) => kripke_eval(m, r, a, w) || kripke_eval(m, r, b, w),
            Formula::Impl(a, b) => !kripke_eval(m, r, a, w) || kripke_eval(m, r, b, w),
            Formula::Dia(a) => r
                .points()
                .iter()
                .any(|&v| r.related(w, v).unwrap() && kripke_eval(m, r, a, v)),
            Formula::Box(a) => r
                .points()
                .iter()
                .all(|&v| !r.related(w, v).unwrap() || kripke_eval(m, r, a, v)),
            Formula::At(i, a) => kripke_eval(m, r, a, m.nominal_assignment()[i]),
            Formula::E(a) => r.points().iter().any(|&v| kripke_eval(m, r, a, v)),
            Formula::A(a) => r.points().iter().all(|&v| kripke_eval(m, r, a, v)),
        }
    }

    #[test]
    fn topological_and_kripke_semantics_agree() {
        use crate::topo::all_preorders;
        let formulas: Vec<Formula> = [
            "p",
            "<>p",
            "[]p",
            "<>[]p",
            "[]<>p",
            "<>(p & ~q)",
            "[](p -> <>q)",
            "'i",
            "<>'i -> 'i",
            "@'i <>p",
            "E (p & ~<>q)",
            "A (p | q | <>p)",
            "<>(~'i & <>'i)",
        ]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
        for r in all_preorders(3) {
            let space = from_preorder(&r).unwrap();
            // A fixed but position-sensitive valuation.
            let m = TopoModel::new(
                space,
                BTreeMap::from([
                    ("p".to_string(), BTreeSet::from([1, 3])),
                    ("q".to_string(), BTreeSet::from([2])),
                ]),
                BTreeMap::from([("i".to_string(), 2)]),
            )
            .unwrap();
            for g in &formulas {
                for &w in r.points() {
                    assert_eq!(
                        m.eval(g, w).unwrap(),
                        kripke_eval(&m, &r, g, w),
                        "disagreement on {g} at {w} with R = {:?}",
                        r.pairs()
                    );
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let m = sierpinski_model();
        let js = serde_json::to_string(&m).unwrap();
        let back: TopoModel = serde_json::from_str(&js).unwrap();
        back.validate().unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn dot_output_mentions_everything() {
        let dot = sierpinski_model().to_dot();
        assert!(dot.contains("digraph"));
        assert!(dot.contains("n1 [label=\"1: p\"]"));
        assert!(dot.contains("n2 [label=\"2: 'i\"]"));
        assert!(dot.contains("n2 -> n1;"));
        assert!(!dot.contains("n1 -> n1;"));
    }
}
