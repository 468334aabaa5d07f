//! Finite topological spaces and their specialization preorders.
//!
//! A `FiniteSpace` stores its open family extensionally as bit masks over
//! the point list, so everything there is exact set arithmetic; it is
//! capped at 64 points because open families blow up combinatorially. A
//! `Preorder` stores successor bit rows and scales to thousands of points;
//! since finite spaces are Alexandroff, the two views are interchangeable
//! (`w R v` iff `v` lies in every open around `w`, opens are exactly the
//! up-closed sets), and big objects such as extracted witnesses live on
//! the preorder side only.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Hard cap on points per explicit space; open masks are `u64`.
pub const MAX_POINTS: usize = 64;

/// Hard cap on points per preorder.
pub const MAX_PREORDER_POINTS: usize = 4096;

/// Cap on the number of opens a constructed space may have.
const MAX_OPENS: usize = 1 << 20;

/// Separation axioms checked on finite spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Separation {
    T0,
    T1,
    T2,
}

/// A finite topological space: sorted point ids plus the full open family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSpace {
    points: Vec<u32>,
    opens: BTreeSet<u64>,
}

/// A reflexive transitive relation on a finite point set, stored as
/// successor bit rows: bit `v` of row `w` means `w R v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preorder {
    points: Vec<u32>,
    rows: Vec<Vec<u64>>,
}

fn row_words(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

fn row_get(row: &[u64], j: usize) -> bool {
    row[j / 64] & (1 << (j % 64)) != 0
}

fn row_set(row: &mut [u64], j: usize) {
    row[j / 64] |= 1 << (j % 64);
}

fn row_or_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d |= s;
    }
}

fn row_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn check_points(points: &[u32], cap: usize) -> Result<Vec<u32>> {
    let set: BTreeSet<u32> = points.iter().copied().collect();
    if set.len() != points.len() {
        return Err(Error::InvalidSpace("duplicate point ids".into()));
    }
    if set.len() > cap {
        return Err(Error::Capacity(format!(
            "{} points exceeds the {cap}-point limit",
            set.len()
        )));
    }
    Ok(set.into_iter().collect())
}

impl FiniteSpace {
    /// Builds a space from explicit opens, validating that the family
    /// contains the empty and full sets and is closed under union and
    /// intersection.
    pub fn new<I, S>(points: I, opens: S) -> Result<Self>
    where
        I: IntoIterator<Item = u32>,
        S: IntoIterator<Item = BTreeSet<u32>>,
    {
        let points = check_points(&points.into_iter().collect::<Vec<_>>(), MAX_POINTS)?;
        let mut space = FiniteSpace {
            points,
            opens: BTreeSet::new(),
        };
        let mut masks = BTreeSet::new();
        for o in opens {
            masks.insert(space.mask_of(&o)?);
        }
        space.opens = masks;
        space.validate_family()?;
        Ok(space)
    }

    fn validate_family(&self) -> Result<()> {
        let full = self.full_mask();
        if !self.opens.contains(&0) || !self.opens.contains(&full) {
            return Err(Error::InvalidSpace(
                "opens must contain the empty and the full set".into(),
            ));
        }
        let all: Vec<u64> = self.opens.iter().copied().collect();
        for (k, &a) in all.iter().enumerate() {
            for &b in &all[k + 1..] {
                if !self.opens.contains(&(a | b)) {
                    return Err(Error::InvalidSpace(format!(
                        "opens not closed under union: {:?} | {:?}",
                        self.set_of(a),
                        self.set_of(b)
                    )));
                }
                if !self.opens.contains(&(a & b)) {
                    return Err(Error::InvalidSpace(format!(
                        "opens not closed under intersection: {:?} & {:?}",
                        self.set_of(a),
                        self.set_of(b)
                    )));
                }
            }
        }
        Ok(())
    }

    /// The discrete space on the given points.
    pub fn discrete<I: IntoIterator<Item = u32>>(points: I) -> Result<Self> {
        let points = check_points(&points.into_iter().collect::<Vec<_>>(), MAX_POINTS)?;
        let n = points.len();
        if n > 20 {
            return Err(Error::Capacity(
                "discrete space with more than 2^20 opens".into(),
            ));
        }
        let mut opens = BTreeSet::new();
        for m in 0..(1u64 << n) {
            opens.insert(m);
        }
        Ok(FiniteSpace { points, opens })
    }

    /// The indiscrete space on the given points.
    pub fn indiscrete<I: IntoIterator<Item = u32>>(points: I) -> Result<Self> {
        let points = check_points(&points.into_iter().collect::<Vec<_>>(), MAX_POINTS)?;
        let full = if points.is_empty() {
            0
        } else {
            u64::MAX >> (64 - points.len())
        };
        let opens = [0, full].into_iter().collect();
        Ok(FiniteSpace { points, opens })
    }

    pub fn points(&self) -> &[u32] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub(crate) fn full_mask(&self) -> u64 {
        if self.points.is_empty() {
            0
        } else {
            u64::MAX >> (64 - self.points.len())
        }
    }

    pub(crate) fn index_of(&self, point: u32) -> Result<usize> {
        self.points
            .binary_search(&point)
            .map_err(|_| Error::UnknownPoint(point))
    }

    pub(crate) fn mask_of(&self, set: &BTreeSet<u32>) -> Result<u64> {
        let mut m = 0u64;
        for &p in set {
            m |= 1 << self.index_of(p)?;
        }
        Ok(m)
    }

    pub(crate) fn set_of(&self, mask: u64) -> BTreeSet<u32> {
        self.points
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &p)| p)
            .collect()
    }

    /// The open family as point sets, smallest mask first.
    pub fn opens(&self) -> Vec<BTreeSet<u32>> {
        self.opens.iter().map(|&m| self.set_of(m)).collect()
    }

    pub fn is_open(&self, set: &BTreeSet<u32>) -> Result<bool> {
        Ok(self.opens.contains(&self.mask_of(set)?))
    }

    /// Intersection of all opens containing `w`: its minimal neighborhood.
    pub fn minimal_neighborhood(&self, w: u32) -> Result<BTreeSet<u32>> {
        let idx = self.index_of(w)?;
        Ok(self.set_of(self.min_nbhd_mask(idx)))
    }

    pub(crate) fn min_nbhd_mask(&self, idx: usize) -> u64 {
        let bit = 1u64 << idx;
        let mut m = self.full_mask();
        for &o in &self.opens {
            if o & bit != 0 {
                m &= o;
            }
        }
        m
    }

    /// The specialization preorder: `w R v` iff `v` is in every open
    /// neighborhood of `w`.
    pub fn to_preorder(&self) -> Preorder {
        let n = self.points.len();
        let words = row_words(n);
        let rows = (0..n)
            .map(|i| {
                let mask = self.min_nbhd_mask(i);
                let mut row = vec![0u64; words];
                for j in 0..n {
                    if mask & (1 << j) != 0 {
                        row_set(&mut row, j);
                    }
                }
                row
            })
            .collect();
        Preorder {
            points: self.points.clone(),
            rows,
        }
    }

    /// Checks a separation axiom. On finite spaces T1 and T2 coincide (both
    /// force the discrete topology), but they are checked by their own
    /// definitions here.
    pub fn check_separation(&self, kind: Separation) -> bool {
        let n = self.points.len();
        match kind {
            Separation::T0 => {
                for i in 0..n {
                    for j in i + 1..n {
                        let (bi, bj) = (1u64 << i, 1u64 << j);
                        let separated = self
                            .opens
                            .iter()
                            .any(|&o| (o & bi != 0) != (o & bj != 0));
                        if !separated {
                            return false;
                        }
                    }
                }
                true
            }
            Separation::T1 => {
                let full = self.full_mask();
                (0..n).all(|i| self.opens.contains(&(full ^ (1 << i))))
            }
            Separation::T2 => {
                for i in 0..n {
                    for j in i + 1..n {
                        let (bi, bj) = (1u64 << i, 1u64 << j);
                        let ok = self.opens.iter().any(|&o1| {
                            o1 & bi != 0
                                && self
                                    .opens
                                    .iter()
                                    .any(|&o2| o2 & bj != 0 && o1 & o2 == 0)
                        });
                        if !ok {
                            return false;
                        }
                    }
                }
                true
            }
        }
    }
}

/// Generates the coarsest topology containing every subbase member: closes
/// `subbase + {empty, full}` under pairwise unions and intersections until
/// a fixpoint.
pub fn generate_topology<I, S>(points: I, subbase: S) -> Result<FiniteSpace>
where
    I: IntoIterator<Item = u32>,
    S: IntoIterator<Item = BTreeSet<u32>>,
{
    let points = check_points(&points.into_iter().collect::<Vec<_>>(), MAX_POINTS)?;
    let mut space = FiniteSpace {
        points,
        opens: BTreeSet::new(),
    };
    let mut opens: BTreeSet<u64> = BTreeSet::new();
    opens.insert(0);
    opens.insert(space.full_mask());
    for s in subbase {
        let m = space.mask_of(&s).map_err(|e| match e {
            Error::UnknownPoint(p) => {
                Error::InvalidSpace(format!("subbase member mentions unknown point {p}"))
            }
            other => other,
        })?;
        opens.insert(m);
    }
    let mut frontier: Vec<u64> = opens.iter().copied().collect();
    while let Some(a) = frontier.pop() {
        let existing: Vec<u64> = opens.iter().copied().collect();
        for b in existing {
            for c in [a | b, a & b] {
                if opens.insert(c) {
                    if opens.len() > MAX_OPENS {
                        return Err(Error::Capacity("generated topology too large".into()));
                    }
                    frontier.push(c);
                }
            }
        }
    }
    space.opens = opens;
    Ok(space)
}

impl Preorder {
    /// Builds a preorder from explicit pairs, rejecting relations that are
    /// not reflexive or not transitive.
    pub fn new<I: IntoIterator<Item = u32>>(points: I, pairs: &[(u32, u32)]) -> Result<Self> {
        let r = Self::from_pairs_unchecked(points, pairs)?;
        r.validate()?;
        Ok(r)
    }

    /// Builds the reflexive transitive closure of the given pairs.
    pub fn closure_of<I: IntoIterator<Item = u32>>(
        points: I,
        pairs: &[(u32, u32)],
    ) -> Result<Self> {
        let mut r = Self::from_pairs_unchecked(points, pairs)?;
        let n = r.points.len();
        for (i, row) in r.rows.iter_mut().enumerate() {
            row_set(row, i);
        }
        // Floyd-Warshall over bit rows.
        for k in 0..n {
            for i in 0..n {
                if row_get(&r.rows[i], k) {
                    let kr = r.rows[k].clone();
                    row_or_into(&mut r.rows[i], &kr);
                }
            }
        }
        Ok(r)
    }

    fn from_pairs_unchecked<I: IntoIterator<Item = u32>>(
        points: I,
        pairs: &[(u32, u32)],
    ) -> Result<Self> {
        let points = check_points(
            &points.into_iter().collect::<Vec<_>>(),
            MAX_PREORDER_POINTS,
        )?;
        let n = points.len();
        let mut rows = vec![vec![0u64; row_words(n)]; n];
        let idx = |p: u32| -> Result<usize> {
            points.binary_search(&p).map_err(|_| Error::UnknownPoint(p))
        };
        for &(u, v) in pairs {
            let (i, j) = (idx(u)?, idx(v)?);
            row_set(&mut rows[i], j);
        }
        Ok(Preorder { points, rows })
    }

    fn validate(&self) -> Result<()> {
        let n = self.points.len();
        for i in 0..n {
            if !row_get(&self.rows[i], i) {
                return Err(Error::NotPreorder(format!(
                    "missing reflexive pair ({0}, {0})",
                    self.points[i]
                )));
            }
        }
        for i in 0..n {
            for j in 0..n {
                if row_get(&self.rows[i], j) && !row_subset(&self.rows[j], &self.rows[i]) {
                    return Err(Error::NotPreorder(format!(
                        "not transitive at ({}, {})",
                        self.points[i], self.points[j]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[u32] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub(crate) fn index_of(&self, point: u32) -> Result<usize> {
        self.points
            .binary_search(&point)
            .map_err(|_| Error::UnknownPoint(point))
    }

    pub fn related(&self, u: u32, v: u32) -> Result<bool> {
        Ok(row_get(&self.rows[self.index_of(u)?], self.index_of(v)?))
    }

    #[cfg(test)]
    pub(crate) fn related_idx(&self, i: usize, j: usize) -> bool {
        row_get(&self.rows[i], j)
    }

    /// Successor indices of the point at index `i`.
    pub(crate) fn succ_indices(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.points.len();
        (0..n).filter(move |&j| row_get(&self.rows[i], j))
    }

    /// All pairs `(u, v)` with `u R v`, lexicographic.
    pub fn pairs(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for i in 0..self.points.len() {
            for j in self.succ_indices(i) {
                out.push((self.points[i], self.points[j]));
            }
        }
        out
    }

    /// The minimal neighborhood of `w` in the Alexandroff reading: its
    /// successor set.
    pub fn min_neighborhood(&self, w: u32) -> Result<BTreeSet<u32>> {
        let i = self.index_of(w)?;
        Ok(self.succ_indices(i).map(|j| self.points[j]).collect())
    }
}

/// The Alexandroff topology of a preorder: opens are exactly the up-closed
/// sets, i.e. all unions of successor sets. Explicit spaces are capped, so
/// this fails on large or bushy preorders.
pub fn from_preorder(r: &Preorder) -> Result<FiniteSpace> {
    let n = r.points.len();
    if n > MAX_POINTS {
        return Err(Error::Capacity(format!(
            "{n} points exceeds the {MAX_POINTS}-point limit for explicit spaces"
        )));
    }
    let bases: BTreeSet<u64> = (0..n)
        .map(|i| {
            let mut m = 0u64;
            for j in r.succ_indices(i) {
                m |= 1 << j;
            }
            m
        })
        .collect();
    let mut opens: BTreeSet<u64> = BTreeSet::new();
    opens.insert(0);
    let mut frontier: Vec<u64> = vec![0];
    while let Some(m) = frontier.pop() {
        for &b in &bases {
            let u = m | b;
            if opens.insert(u) {
                if opens.len() > MAX_OPENS {
                    return Err(Error::Capacity(
                        "preorder has too many up-closed sets".into(),
                    ));
                }
                frontier.push(u);
            }
        }
    }
    Ok(FiniteSpace {
        points: r.points.clone(),
        opens,
    })
}

/// Quotient topology along a total projection `point -> class id`: a class
/// set is open exactly when its preimage is open. Equivalently, the opens
/// are the images of saturated opens.
pub fn quotient_topology(t: &FiniteSpace, proj: &BTreeMap<u32, u32>) -> Result<FiniteSpace> {
    for &p in t.points() {
        if !proj.contains_key(&p) {
            return Err(Error::InvalidMap(format!("projection misses point {p}")));
        }
    }
    for p in proj.keys() {
        t.index_of(*p)?;
    }
    let class_points: Vec<u32> = proj
        .values()
        .copied()
        .collect::<BTreeSet<u32>>()
        .into_iter()
        .collect();
    let quotient_seed = FiniteSpace {
        points: check_points(&class_points, MAX_POINTS)?,
        opens: BTreeSet::new(),
    };
    // preimage mask per class index
    let mut pre = vec![0u64; quotient_seed.points.len()];
    for (&p, &c) in proj {
        pre[quotient_seed.index_of(c)?] |= 1 << t.index_of(p)?;
    }
    let mut opens = BTreeSet::new();
    for &o in &t.opens {
        let mut img = 0u64;
        let mut saturated_preimage = 0u64;
        for (ci, &pm) in pre.iter().enumerate() {
            if o & pm != 0 {
                img |= 1 << ci;
                saturated_preimage |= pm;
            }
        }
        if saturated_preimage == o {
            opens.insert(img);
        }
    }
    let q = FiniteSpace {
        points: quotient_seed.points,
        opens,
    };
    q.validate_family()
        .map_err(|e| Error::InvalidSpace(format!("quotient family broken: {e}")))?;
    Ok(q)
}

// ---------------------------------------------------------------------------
// JSON forms. A space serializes as {"points", "opens"}; a preorder as
// {"points", "preorder"}. Both deserialize from {"points"} plus exactly one
// of "opens", "preorder", "subbase".

#[derive(Serialize)]
struct SpaceOut<'a> {
    points: &'a [u32],
    opens: Vec<BTreeSet<u32>>,
}

#[derive(Serialize)]
struct PreorderOut<'a> {
    points: &'a [u32],
    preorder: Vec<(u32, u32)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceIn {
    points: Vec<u32>,
    #[serde(default)]
    opens: Option<Vec<BTreeSet<u32>>>,
    #[serde(default)]
    preorder: Option<Vec<(u32, u32)>>,
    #[serde(default)]
    subbase: Option<Vec<BTreeSet<u32>>>,
}

impl SpaceIn {
    fn count_given(&self) -> u8 {
        self.opens.is_some() as u8 + self.preorder.is_some() as u8 + self.subbase.is_some() as u8
    }
}

impl Serialize for FiniteSpace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpaceOut {
            points: &self.points,
            opens: self.opens(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteSpace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SpaceIn::deserialize(d)?;
        if raw.count_given() != 1 {
            return Err(D::Error::custom(
                "expected exactly one of \"opens\", \"preorder\", \"subbase\"",
            ));
        }
        let space = if let Some(opens) = raw.opens {
            FiniteSpace::new(raw.points, opens)
        } else if let Some(pairs) = raw.preorder {
            Preorder::new(raw.points, &pairs).and_then(|r| from_preorder(&r))
        } else {
            generate_topology(raw.points, raw.subbase.unwrap())
        };
        space.map_err(D::Error::custom)
    }
}

impl Serialize for Preorder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PreorderOut {
            points: &self.points,
            preorder: self.pairs(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Preorder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SpaceIn::deserialize(d)?;
        if raw.count_given() != 1 {
            return Err(D::Error::custom(
                "expected exactly one of \"opens\", \"preorder\", \"subbase\"",
            ));
        }
        let order = if let Some(pairs) = raw.preorder {
            Preorder::new(raw.points, &pairs)
        } else if let Some(opens) = raw.opens {
            FiniteSpace::new(raw.points, opens).map(|t| t.to_preorder())
        } else {
            generate_topology(raw.points, raw.subbase.unwrap()).map(|t| t.to_preorder())
        };
        order.map_err(D::Error::custom)
    }
}

/// All preorders on points `1..=n` up to isomorphism, one canonical
/// representative each. Brute force over off-diagonal edge sets with
/// permutation canonicalization; meant for small `n` (exhaustive search
/// bounds), where the counts run 1, 3, 9, 33.
pub(crate) fn preorders_upto_iso(n: usize) -> Result<Vec<Preorder>> {
    if n == 0 || n > 5 {
        return Err(Error::Capacity(format!(
            "isomorphism-free enumeration supports 1 to 5 points, got {n}"
        )));
    }
    let points: Vec<u32> = (1..=n as u32).collect();
    let mut perms: Vec<Vec<usize>> = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    permutations(&mut idx, 0, &mut perms);
    let offdiag: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .collect();
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut out = Vec::new();
    for choice in 0u64..(1 << offdiag.len()) {
        let mut succ = vec![0u64; n];
        for (i, s) in succ.iter_mut().enumerate() {
            *s |= 1 << i;
        }
        for (k, &(i, j)) in offdiag.iter().enumerate() {
            if choice & (1 << k) != 0 {
                succ[i] |= 1 << j;
            }
        }
        let transitive = (0..n).all(|i| {
            (0..n).all(|j| succ[i] & (1 << j) == 0 || succ[i] | succ[j] == succ[i])
        });
        if !transitive {
            continue;
        }
        // Canonical key: the lexicographically least permuted successor table.
        let key = perms
            .iter()
            .map(|perm| {
                let mut table: Vec<u64> = vec![0; n];
                for i in 0..n {
                    for j in 0..n {
                        if succ[i] & (1 << j) != 0 {
                            table[perm[i]] |= 1 << perm[j];
                        }
                    }
                }
                table
            })
            .min()
            .expect("at least the identity permutation");
        if seen.insert(key) {
            out.push(Preorder {
                points: points.clone(),
                rows: succ.iter().map(|&m| vec![m]).collect(),
            });
        }
    }
    Ok(out)
}

fn permutations(idx: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == idx.len() {
        out.push(idx.clone());
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permutations(idx, k + 1, out);
        idx.swap(k, i);
    }
}

/// All preorders on `n` labeled points, by brute force over off-diagonal
/// edge sets. Exhaustive generator for small-space tests.
#[cfg(test)]
pub(crate) fn all_preorders(n: usize) -> Vec<Preorder> {
    let points: Vec<u32> = (1..=n as u32).collect();
    let offdiag: Vec<(u32, u32)> = points
        .iter()
        .flat_map(|&u| points.iter().map(move |&v| (u, v)))
        .filter(|(u, v)| u != v)
        .collect();
    let mut out = Vec::new();
    for choice in 0u64..(1 << offdiag.len()) {
        let mut pairs: Vec<(u32, u32)> = points.iter().map(|&p| (p, p)).collect();
        for (k, &pr) in offdiag.iter().enumerate() {
            if choice & (1 << k) != 0 {
                pairs.push(pr);
            }
        }
        if let Ok(r) = Preorder::new(points.clone(), &pairs) {
            out.push(r);
        }
    }
    out
}
