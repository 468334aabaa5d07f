//! Browser bindings. Every export speaks JSON strings: requests are
//! plain arguments, responses are objects with either the payload or an
//! `error` field. Keeping the boundary stringly typed lets the crate
//! compile and test on the host as ordinary Rust.

use std::collections::BTreeMap;

use num::ToPrimitive;
use serde::Serialize;
use topsat::finrep::quasi_to_model;
use topsat::game::Session;
use topsat::{
    decide, rational_embed, unravel_to_full_tree, Formula, Preorder, SpaceClass, TopoModel,
    Verdict,
};
use wasm_bindgen::prelude::wasm_bindgen;

fn class_of(name: &str) -> Result<SpaceClass, String> {
    match name {
        "t0" => Ok(SpaceClass::T0),
        "t1" | "t2" => Ok(SpaceClass::T1),
        "all" => Ok(SpaceClass::All),
        other => Err(format!("unknown class {other:?}, expected t0, t1, t2 or all")),
    }
}

fn parse(formula: &str) -> Result<Formula, String> {
    formula.parse().map_err(|e: topsat::Error| e.to_string())
}

fn fail(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn emit<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| fail(&e.to_string()))
}

// ---------------------------------------------------------------------------
// Satisfiability with a drawable witness.

#[derive(Serialize)]
struct WitnessGraph {
    points: Vec<u32>,
    /// Specialization arrows between distinct points.
    edges: Vec<(u32, u32)>,
    /// Letters and quoted names true at each point.
    tags: BTreeMap<u32, Vec<String>>,
    /// A point satisfying the target.
    at: u32,
}

#[derive(Serialize)]
struct SatResponse {
    verdict: &'static str,
    core: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<WitnessGraph>,
}

fn witness_graph(m: &TopoModel, target: &Formula) -> Result<WitnessGraph, String> {
    let order = m.space().to_preorder();
    let mut edges = Vec::new();
    for &w in order.points() {
        for &v in order.points() {
            if w != v && order.related(w, v).map_err(|e| e.to_string())? {
                edges.push((w, v));
            }
        }
    }
    let mut tags: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for &w in m.space().points() {
        let mut t: Vec<String> = m
            .valuation()
            .iter()
            .filter(|(_, ext)| ext.contains(&w))
            .map(|(p, _)| p.clone())
            .collect();
        t.extend(
            m.nominal_assignment()
                .iter()
                .filter(|&(_, &x)| x == w)
                .map(|(i, _)| format!("'{i}")),
        );
        tags.insert(w, t);
    }
    let at = m
        .space()
        .points()
        .iter()
        .copied()
        .find(|&w| m.eval(target, w).unwrap_or(false))
        .ok_or("witness model misses its target")?;
    Ok(WitnessGraph {
        points: m.space().points().to_vec(),
        edges,
        tags,
        at,
    })
}

/// Decides satisfiability and, on SAT, returns the witness preorder for
/// drawing: `{verdict, core, witness?: {points, edges, tags, at}}`.
#[wasm_bindgen]
pub fn sat_check(formula: &str, class: &str) -> String {
    let run = || -> Result<SatResponse, String> {
        let f = parse(formula)?;
        let class = class_of(class)?;
        let core = topsat::formula::to_core(&f);
        match decide(&f, class).map_err(|e| e.to_string())? {
            Verdict::Unsatisfiable => Ok(SatResponse {
                verdict: "unsat",
                core: core.to_string(),
                witness: None,
            }),
            Verdict::Satisfiable(q) => {
                let m = quasi_to_model(&q).map_err(|e| e.to_string())?;
                Ok(SatResponse {
                    verdict: "sat",
                    core: core.to_string(),
                    witness: Some(witness_graph(&m, &q.target)?),
                })
            }
        }
    };
    match run() {
        Ok(r) => emit(&r),
        Err(e) => fail(&e),
    }
}

// ---------------------------------------------------------------------------
// Interactive game.

#[derive(Serialize)]
struct GameState {
    in_play: bool,
    boards: Vec<Vec<String>>,
    position: Vec<String>,
    challenges: Vec<String>,
}

/// One satisfiability game held across browser events. The page plays
/// Abelard; the engine answers for Eloise.
#[wasm_bindgen]
pub struct GamePanel {
    session: Option<Session>,
}

impl Default for GamePanel {
    fn default() -> Self {
        Self::new()
    }
}

#[wasm_bindgen]
impl GamePanel {
    #[wasm_bindgen(constructor)]
    pub fn new() -> GamePanel {
        GamePanel { session: None }
    }

    /// `{verdict: "sat"|"unsat"}` or `{error}`. SAT opens a session.
    pub fn start(&mut self, formula: &str, class: &str) -> String {
        self.session = None;
        let mut run = || -> Result<bool, String> {
            let f = parse(formula)?;
            let class = class_of(class)?;
            Ok(Session::start(&f, class)
                .map_err(|e| e.to_string())?
                .map(|s| self.session = Some(s))
                .is_some())
        };
        match run() {
            Ok(true) => r#"{"verdict":"sat"}"#.into(),
            Ok(false) => r#"{"verdict":"unsat"}"#.into(),
            Err(e) => fail(&e),
        }
    }

    /// Current boards, position and open challenges.
    pub fn state(&self) -> String {
        let Some(s) = &self.session else {
            return fail("no session; call start first");
        };
        emit(&GameState {
            in_play: s.position().is_some(),
            boards: s
                .boards()
                .iter()
                .map(|b| b.iter().map(|f| f.to_string()).collect())
                .collect(),
            position: s
                .position()
                .map(|p| p.iter().map(|f| f.to_string()).collect())
                .unwrap_or_default(),
            challenges: s.challenges().iter().map(|f| f.to_string()).collect(),
        })
    }

    /// Opens a play at board `k`; returns the new state or `{error}`.
    pub fn begin(&mut self, k: usize) -> String {
        let Some(s) = &mut self.session else {
            return fail("no session; call start first");
        };
        match s.begin(k) {
            Ok(()) => self.state(),
            Err(e) => fail(&e.to_string()),
        }
    }

    /// Challenges one diamond; returns the round's events or `{error}`
    /// naming the violated rule.
    pub fn challenge(&mut self, formula: &str) -> String {
        let Some(s) = &mut self.session else {
            return fail("no session; call start first");
        };
        let f = match parse(formula) {
            Ok(f) => f,
            Err(e) => return fail(&e),
        };
        match s.challenge(&f) {
            Ok(events) => emit(&events),
            Err(e) => fail(&e.to_string()),
        }
    }
}

// ---------------------------------------------------------------------------
// Rational embedding.

#[derive(Serialize)]
struct EmbedNode {
    value: String,
    approx: f64,
    level: usize,
    parent: Option<usize>,
}

/// Embeds the full `branching`-ary tree of depth `depth` into the
/// rationals and returns per-node `{value, approx, level, parent}`.
#[wasm_bindgen]
pub fn embed_tree(branching: usize, depth: usize) -> String {
    let run = || -> Result<Vec<EmbedNode>, String> {
        if !(2..=3).contains(&branching) || !(1..=6).contains(&depth) {
            return Err("branching must be 2..=3 and depth 1..=6".into());
        }
        // Any seed model with enough successors does; the page only draws
        // the shape and the values.
        let order = Preorder::new([1, 2], &[(1, 1), (2, 2), (1, 2)]).map_err(|e| e.to_string())?;
        let m = TopoModel::new(
            topsat::topo::from_preorder(&order).map_err(|e| e.to_string())?,
            BTreeMap::new(),
            [("i".to_string(), 1)].into_iter().collect(),
        )
        .map_err(|e| e.to_string())?;
        let tree = unravel_to_full_tree(&m, 1, branching, depth).map_err(|e| e.to_string())?;
        let values = rational_embed(&tree).map_err(|e| e.to_string())?;
        Ok(values
            .iter()
            .enumerate()
            .map(|(v, r)| EmbedNode {
                value: r.to_string(),
                approx: r.to_f64().unwrap_or(f64::NAN),
                level: tree.level(v),
                parent: tree.parent(v),
            })
            .collect())
    };
    match run() {
        Ok(nodes) => emit(&nodes),
        Err(e) => fail(&e),
    }
}
