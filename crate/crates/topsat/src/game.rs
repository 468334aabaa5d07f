//! The satisfiability game.
//!
//! Fix a sign for every existential formula and a finite set of initial
//! boards: Hintikka sets comprising one board carrying the target, a
//! witness board per true existential, and for every nominal exactly one
//! board carrying it (several nominals may share a board). Abelard opens a
//! play at any board and repeatedly challenges a diamond of the current
//! label; Eloise answers with a Hintikka set containing the body whose
//! diamonds do not grow. Answering with a named label is only legal when
//! it is one of the initial boards: such an answer ends the play, and over
//! T1 it is legal only as a self-answer, since there a named point is
//! closed and reachable from itself alone. A repeated challenge forces the
//! former answer and ends the play; Eloise survives it exactly when the
//! current label still shrinks into that answer. Over T0 the named boards
//! that Eloise's strategy visits form a reachability digraph, and she must
//! keep it free of cycles through two or more distinct named boards,
//! because mutually reachable named points can never be separated.
//!
//! Eloise has a winning strategy for some sign vector and board set iff
//! the target is satisfiable over the class. A winning strategy folds into
//! a quasi-model: boards and fresh answers become points, answers and
//! forced replays become arcs. The fold is re-validated before it is
//! returned, so a satisfiable verdict always carries a checked
//! certificate.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::finrep::{check_quasi_model, QuasiModel, SpaceClass, Universe};
use crate::formula::{to_core, Formula};
use crate::topo::Preorder;

/// Cap on initial boards; escape profiles are `u32` masks over them.
const MAX_BOARDS: usize = 32;

/// Cap on memoized game states per board set.
const MAX_SEARCH_NODES: usize = 1 << 21;

/// Cap on points in an extracted witness.
const MAX_WITNESS_POINTS: usize = 4096;

/// Outcome of the satisfiability decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// A validated certificate for the class.
    Satisfiable(Box<QuasiModel>),
    /// Every sign vector and board set loses.
    Unsatisfiable,
}

/// Decides satisfiability of `target` over the class and returns a
/// validated quasi-model on success.
pub fn decide(target: &Formula, class: SpaceClass) -> Result<Verdict> {
    match find_plan(target, class)? {
        Some((mut eng, budgets)) => Ok(Verdict::Satisfiable(Box::new(eng.extract(&budgets)?))),
        None => Ok(Verdict::Unsatisfiable),
    }
}

pub fn satisfiable(target: &Formula, class: SpaceClass) -> Result<bool> {
    Ok(find_plan(target, class)?.is_some())
}

/// Validity over the class, decided as unsatisfiability of the negation.
pub fn valid(target: &Formula, class: SpaceClass) -> Result<bool> {
    Ok(find_plan(&Formula::neg(target.clone()), class)?.is_none())
}

/// One play state: the current label and the commitments made so far,
/// sorted by diamond index.
type StateKey = (u128, Vec<(u16, u128)>);

/// An escape profile: the set of named boards a strategy may stop at,
/// as a mask over board indices. Smaller is safer, so states keep the
/// minimal achievable profiles as an antichain; an empty antichain means
/// the state is lost.
type Profile = u32;

/// The solver for one sign vector and board set.
struct Engine {
    uni: Universe,
    class: SpaceClass,
    eps: u64,
    alphabet: Vec<u128>,
    boards: Vec<u128>,
    nom_mask: u128,
    memo: HashMap<StateKey, Vec<Profile>>,
}

/// Eloise's answer to one fresh challenge.
enum Choice {
    /// The current point answers for itself.
    SelfAnswer,
    /// The play stops at an initial named board.
    Stop(usize),
    /// A fresh copy with this label.
    Fresh(u128),
}

impl Engine {
    fn new(uni: Universe, class: SpaceClass, eps: u64, alphabet: Vec<u128>, boards: Vec<u128>) -> Self {
        let nom_mask = uni.nominal_mask();
        Engine {
            uni,
            class,
            eps,
            alphabet,
            boards,
            nom_mask,
            memo: HashMap::new(),
        }
    }

    fn board_id(&self, label: u128) -> Option<usize> {
        self.boards.iter().position(|&b| b == label)
    }

    /// Whether a replayed challenge whose former answer was `resp` is
    /// survivable at `label`: the forced back-arc must shrink, and over T1
    /// it may not enter a named label from elsewhere.
    fn replay_ok(&self, label: u128, resp: u128) -> bool {
        self.uni.diamonds_shrink(label, resp)
            && (self.class != SpaceClass::T1 || resp & self.nom_mask == 0 || resp == label)
    }

    /// Minimal achievable escape profiles of a state, as an antichain;
    /// empty means Abelard wins. Commitments grow along every branch, so
    /// the recursion is well-founded.
    fn achievable(&mut self, label: u128, commit: &[(u16, u128)]) -> Result<Vec<Profile>> {
        let key = (label, commit.to_vec());
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        if self.memo.len() >= MAX_SEARCH_NODES {
            return Err(Error::Capacity(
                "game search exceeded its state budget".into(),
            ));
        }
        let mut acc: Vec<Profile> = vec![0];
        let diamonds: Vec<(usize, usize)> = self.uni.diamonds().to_vec();
        for (di, bi) in diamonds {
            if label & (1 << di) == 0 {
                continue;
            }
            if let Ok(pos) = commit.binary_search_by_key(&(di as u16), |&(d, _)| d) {
                if self.replay_ok(label, commit[pos].1) {
                    continue;
                }
                acc.clear();
                break;
            }
            let mut options: Vec<Profile> = Vec::new();
            for k in 0..self.alphabet.len() {
                let b = self.alphabet[k];
                if b & (1 << bi) == 0 || !self.uni.diamonds_shrink(label, b) {
                    continue;
                }
                if b & self.nom_mask != 0 && b != label {
                    // Named labels are playable only as initial boards.
                    if self.class == SpaceClass::T1 {
                        continue;
                    }
                    if let Some(id) = self.board_id(b) {
                        options.push(1 << id);
                    }
                    continue;
                }
                let sub = self.achievable(b, &commit_with(commit, di as u16, b))?;
                options.extend(sub);
            }
            if options.is_empty() {
                acc.clear();
                break;
            }
            let options = antichain(options);
            acc = antichain(
                acc.iter()
                    .flat_map(|&a| options.iter().map(move |&o| a | o))
                    .collect(),
            );
        }
        self.memo.insert(key, acc.clone());
        Ok(acc)
    }

    /// The first winning answer to a fresh challenge that stays within the
    /// escape budget, together with the escape profile of its
    /// continuation. `None` only at losing states.
    fn choose(
        &mut self,
        label: u128,
        commit: &[(u16, u128)],
        di: u16,
        bi: usize,
        budget: Profile,
    ) -> Result<Option<(Choice, Profile)>> {
        for k in 0..self.alphabet.len() {
            let b = self.alphabet[k];
            if b & (1 << bi) == 0 || !self.uni.diamonds_shrink(label, b) {
                continue;
            }
            if b & self.nom_mask != 0 && b != label {
                if self.class == SpaceClass::T1 {
                    continue;
                }
                if let Some(id) = self.board_id(b) {
                    if (1u32 << id) & !budget == 0 {
                        return Ok(Some((Choice::Stop(id), 1 << id)));
                    }
                }
                continue;
            }
            let sub = self.achievable(b, &commit_with(commit, di, b))?;
            if let Some(&t) = sub.iter().find(|&&t| t & !budget == 0) {
                let choice = if b == label {
                    Choice::SelfAnswer
                } else {
                    Choice::Fresh(b)
                };
                return Ok(Some((choice, t)));
            }
        }
        Ok(None)
    }

    /// Every board must be winnable; over T0 the named boards additionally
    /// need escape profiles whose digraph has no cycle through two or more
    /// distinct boards. Returns one escape budget per board.
    fn try_plan(&mut self) -> Result<Option<Vec<Profile>>> {
        let nb = self.boards.len();
        let mut ach = Vec::with_capacity(nb);
        for i in 0..nb {
            let a = self.achievable(self.boards[i], &[])?;
            if a.is_empty() {
                return Ok(None);
            }
            ach.push(a);
        }
        let mut budgets: Vec<Profile> = ach.iter().map(|a| a[0]).collect();
        if self.class != SpaceClass::T0 {
            return Ok(Some(budgets));
        }
        let named: Vec<usize> = (0..nb)
            .filter(|&i| self.boards[i] & self.nom_mask != 0)
            .collect();
        let mut pick = vec![0u32; named.len()];
        if !pick_acyclic(&named, &ach, 0, &mut pick) {
            return Ok(None);
        }
        for (k, &i) in named.iter().enumerate() {
            budgets[i] = pick[k];
        }
        Ok(Some(budgets))
    }

    /// Folds the winning strategy into a quasi-model and re-validates it.
    fn extract(&mut self, budgets: &[Profile]) -> Result<QuasiModel> {
        let mut labels: Vec<u128> = self.boards.clone();
        let mut arcs: Vec<(u32, u32)> = Vec::new();
        for i in 0..self.boards.len() {
            let board = self.boards[i];
            self.walk(i as u32, board, &[], budgets[i], &mut labels, &mut arcs)?;
        }
        let points: Vec<u32> = (1..=labels.len() as u32).collect();
        let pairs: Vec<(u32, u32)> = arcs.iter().map(|&(a, b)| (a + 1, b + 1)).collect();
        let order = Preorder::closure_of(points.clone(), &pairs)?;
        let label_map: BTreeMap<u32, BTreeSet<Formula>> = points
            .iter()
            .map(|&p| (p, self.uni.mask_to_set(labels[(p - 1) as usize])))
            .collect();
        let q = QuasiModel {
            order,
            labels: label_map,
            target: self.uni.formulas()[self.uni.target_index()].clone(),
        };
        check_quasi_model(&q, self.class)?;
        Ok(q)
    }

    /// Materializes the strategy below one point: an arc per diamond of
    /// its label, to a committed answer (replay), itself, a named board,
    /// or a fresh child.
    fn walk(
        &mut self,
        pt: u32,
        label: u128,
        commit: &[(u16, u128, u32)],
        budget: Profile,
        labels: &mut Vec<u128>,
        arcs: &mut Vec<(u32, u32)>,
    ) -> Result<()> {
        let diamonds: Vec<(usize, usize)> = self.uni.diamonds().to_vec();
        for (di, bi) in diamonds {
            if label & (1 << di) == 0 {
                continue;
            }
            if let Ok(pos) = commit.binary_search_by_key(&(di as u16), |&(d, _, _)| d) {
                arcs.push((pt, commit[pos].2));
                continue;
            }
            let flat: Vec<(u16, u128)> = commit.iter().map(|&(d, l, _)| (d, l)).collect();
            let (choice, profile) = self
                .choose(label, &flat, di as u16, bi, budget)?
                .ok_or_else(|| {
                    Error::Precondition("winning strategy lost an answer during the fold".into())
                })?;
            match choice {
                Choice::SelfAnswer => arcs.push((pt, pt)),
                Choice::Stop(id) => arcs.push((pt, id as u32)),
                Choice::Fresh(b) => {
                    if labels.len() >= MAX_WITNESS_POINTS {
                        return Err(Error::Capacity("extracted witness too large".into()));
                    }
                    let v = labels.len() as u32;
                    labels.push(b);
                    arcs.push((pt, v));
                    let mut child = commit.to_vec();
                    let pos = child.partition_point(|&(d, _, _)| d < di as u16);
                    child.insert(pos, (di as u16, b, v));
                    self.walk(v, b, &child, profile, labels, arcs)?;
                }
            }
        }
        Ok(())
    }
}

fn commit_with(commit: &[(u16, u128)], di: u16, b: u128) -> Vec<(u16, u128)> {
    let mut v = commit.to_vec();
    let pos = v.partition_point(|&(d, _)| d < di);
    v.insert(pos, (di, b));
    v
}

/// Minimal elements under mask inclusion. A subset is numerically no
/// larger, so one ascending pass suffices.
fn antichain(mut v: Vec<Profile>) -> Vec<Profile> {
    v.sort_unstable();
    v.dedup();
    let mut out: Vec<Profile> = Vec::new();
    for x in v {
        if !out.iter().any(|&y| y & !x == 0) {
            out.push(x);
        }
    }
    out
}

/// Searches the antichain product for escape profiles of the named boards
/// whose digraph has no cycle through two or more distinct boards.
fn pick_acyclic(named: &[usize], ach: &[Vec<Profile>], k: usize, pick: &mut Vec<u32>) -> bool {
    if k == named.len() {
        return !has_cross_cycle(named, pick);
    }
    for s in ach[named[k]].clone() {
        pick[k] = s;
        if pick_acyclic(named, ach, k + 1, pick) {
            return true;
        }
    }
    false
}

fn has_cross_cycle(named: &[usize], pick: &[u32]) -> bool {
    let edges: BTreeMap<usize, Vec<usize>> = named
        .iter()
        .zip(pick)
        .map(|(&u, &s)| {
            let vs = (0..MAX_BOARDS)
                .filter(|&j| s & (1 << j) != 0 && j != u)
                .collect();
            (u, vs)
        })
        .collect();
    // 0 white, 1 on the stack, 2 done.
    let mut color: BTreeMap<usize, u8> = BTreeMap::new();
    fn dfs(u: usize, edges: &BTreeMap<usize, Vec<usize>>, color: &mut BTreeMap<usize, u8>) -> bool {
        color.insert(u, 1);
        if let Some(vs) = edges.get(&u) {
            for &v in vs {
                match color.get(&v).copied().unwrap_or(0) {
                    1 => return true,
                    2 => {}
                    _ => {
                        if dfs(v, edges, color) {
                            return true;
                        }
                    }
                }
            }
        }
        color.insert(u, 2);
        false
    }
    named
        .iter()
        .any(|&u| color.get(&u).copied().unwrap_or(0) == 0 && dfs(u, &edges, &mut color))
}

/// Searches sign vectors and board sets smallest-first and returns the
/// first winning engine with one escape budget per board.
fn find_plan(target: &Formula, class: SpaceClass) -> Result<Option<(Engine, Vec<Profile>)>> {
    let core = to_core(target);
    let uni = Universe::new(&core)?;
    let nes = uni.existentials().len();
    if nes > 16 {
        return Err(Error::Capacity(format!(
            "{nes} existential formulas, sign enumeration supports 16"
        )));
    }
    let noms = uni.nominal_entries().len();
    if noms + nes + 1 > MAX_BOARDS {
        return Err(Error::Capacity(format!(
            "{noms} nominals and {nes} existentials may need more than {MAX_BOARDS} boards"
        )));
    }
    let nom_mask = uni.nominal_mask();
    for eps in 0..(1u64 << nes) {
        let alphabet = uni.hintikka_alphabet(eps)?;
        if alphabet.is_empty() {
            continue;
        }
        let mut obligations = vec![1u128 << uni.target_index()];
        for (k, &(_, bi)) in uni.existentials().iter().enumerate() {
            if eps & (1 << k) != 0 {
                obligations.push(1u128 << bi);
            }
        }
        for cover in nominal_covers(nom_mask, &alphabet) {
            let mut found: Option<(Engine, Vec<Profile>)> = None;
            board_sets(
                &cover,
                &obligations,
                &alphabet,
                nom_mask,
                &mut |boards| {
                    let mut eng = Engine::new(
                        uni.clone(),
                        class,
                        eps,
                        alphabet.clone(),
                        boards.to_vec(),
                    );
                    match eng.try_plan()? {
                        Some(budgets) => {
                            found = Some((eng, budgets));
                            Ok(true)
                        }
                        None => Ok(false),
                    }
                },
            )?;
            if found.is_some() {
                return Ok(found);
            }
        }
    }
    Ok(None)
}

/// All ways to realize every nominal on exactly one board: picks, for the
/// lowest unassigned nominal, a label containing it whose named content is
/// still unassigned, assigning that whole group at once.
fn nominal_covers(nom_mask: u128, alphabet: &[u128]) -> Vec<Vec<u128>> {
    fn rec(
        remaining: u128,
        nom_mask: u128,
        alphabet: &[u128],
        cur: &mut Vec<u128>,
        out: &mut Vec<Vec<u128>>,
    ) {
        if remaining == 0 {
            out.push(cur.clone());
            return;
        }
        let first = remaining & remaining.wrapping_neg();
        for &b in alphabet {
            let content = b & nom_mask;
            if content & first == 0 || content & !remaining != 0 {
                continue;
            }
            cur.push(b);
            rec(remaining & !content, nom_mask, alphabet, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(nom_mask, nom_mask, alphabet, &mut Vec::new(), &mut out);
    out
}

/// Visits board sets completing the cover: each obligation already held
/// somewhere is skipped, otherwise every nominal-free label carrying it is
/// tried. The visitor returns `true` to stop the search.
fn board_sets(
    cover: &[u128],
    obligations: &[u128],
    alphabet: &[u128],
    nom_mask: u128,
    f: &mut dyn FnMut(&[u128]) -> Result<bool>,
) -> Result<bool> {
    fn rec(
        boards: &mut Vec<u128>,
        obligations: &[u128],
        k: usize,
        alphabet: &[u128],
        nom_mask: u128,
        f: &mut dyn FnMut(&[u128]) -> Result<bool>,
    ) -> Result<bool> {
        if k == obligations.len() {
            return f(boards);
        }
        let need = obligations[k];
        if boards.iter().any(|&b| b & need != 0) {
            return rec(boards, obligations, k + 1, alphabet, nom_mask, f);
        }
        for &b in alphabet {
            if b & need == 0 || b & nom_mask != 0 {
                continue;
            }
            boards.push(b);
            let stop = rec(boards, obligations, k + 1, alphabet, nom_mask, f)?;
            boards.pop();
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }
    let mut boards = cover.to_vec();
    rec(&mut boards, obligations, 0, alphabet, nom_mask, f)
}

// ---------------------------------------------------------------------------
// Interactive play.

/// One transcript entry of an interactive session.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum GameEvent {
    Began { board: usize, label: Vec<String> },
    Challenged { formula: String },
    /// Eloise's answer; `fresh_point` is false for a self-answer.
    Answered { label: Vec<String>, fresh_point: bool },
    /// The play stopped at an initial named board.
    StoppedAtNamed { board: usize, label: Vec<String> },
    /// A repeated challenge forced the former answer and ended the play.
    StoppedReplay { formula: String, label: Vec<String> },
}

/// An interactive play against the engine: the caller is Abelard, the
/// engine answers along a fixed winning strategy. Exists only for
/// satisfiable targets.
pub struct Session {
    eng: Engine,
    budgets: Vec<Profile>,
    label: u128,
    commit: Vec<(u16, u128)>,
    budget: Profile,
    in_play: bool,
    log: Vec<GameEvent>,
}

impl Session {
    /// `None` when Eloise has no winning strategy for the class.
    pub fn start(target: &Formula, class: SpaceClass) -> Result<Option<Session>> {
        Ok(find_plan(target, class)?.map(|(eng, budgets)| Session {
            eng,
            budgets,
            label: 0,
            commit: Vec::new(),
            budget: 0,
            in_play: false,
            log: Vec::new(),
        }))
    }

    /// The sign vector the strategy fixed for the existential formulas.
    pub fn signs(&self) -> Vec<(Formula, bool)> {
        self.eng
            .uni
            .existentials()
            .iter()
            .enumerate()
            .map(|(k, &(ei, _))| {
                (
                    self.eng.uni.formulas()[ei].clone(),
                    self.eng.eps & (1 << k) != 0,
                )
            })
            .collect()
    }

    /// The initial boards, in index order.
    pub fn boards(&self) -> Vec<BTreeSet<Formula>> {
        self.eng
            .boards
            .iter()
            .map(|&b| self.eng.uni.mask_to_set(b))
            .collect()
    }

    /// Opens a play at the given board.
    pub fn begin(&mut self, board: usize) -> Result<()> {
        if board >= self.eng.boards.len() {
            return Err(Error::BadInput(format!(
                "board {board} does not exist, there are {}",
                self.eng.boards.len()
            )));
        }
        self.label = self.eng.boards[board];
        self.commit.clear();
        self.budget = self.budgets[board];
        self.in_play = true;
        self.log.push(GameEvent::Began {
            board,
            label: self.label_strings(self.label),
        });
        Ok(())
    }

    /// The diamonds of the current label: Abelard's legal challenges.
    pub fn challenges(&self) -> Vec<Formula> {
        if !self.in_play {
            return Vec::new();
        }
        self.eng
            .uni
            .diamonds()
            .iter()
            .filter(|&&(di, _)| self.label & (1 << di) != 0)
            .map(|&(di, _)| self.eng.uni.formulas()[di].clone())
            .collect()
    }

    /// The current label, while a play is open.
    pub fn position(&self) -> Option<BTreeSet<Formula>> {
        self.in_play.then(|| self.eng.uni.mask_to_set(self.label))
    }

    pub fn is_over(&self) -> bool {
        !self.in_play
    }

    pub fn transcript(&self) -> &[GameEvent] {
        &self.log
    }

    /// Plays one round: Abelard challenges a diamond of the current label,
    /// the engine answers. Returns the events of the round.
    pub fn challenge(&mut self, dia: &Formula) -> Result<Vec<GameEvent>> {
        if !self.in_play {
            return Err(Error::Precondition(
                "no play is open; call begin first".into(),
            ));
        }
        let di = self
            .eng
            .uni
            .index_of(dia)
            .filter(|&i| matches!(dia, Formula::Dia(_)) && self.label & (1 << i) != 0)
            .ok_or_else(|| {
                Error::BadInput(format!("{dia} is not a diamond of the current label"))
            })?;
        let bi = match self.eng.uni.diamonds().iter().find(|&&(d, _)| d == di) {
            Some(&(_, bi)) => bi,
            None => return Err(Error::BadInput(format!("{dia} is not a diamond"))),
        };
        let mut round = vec![GameEvent::Challenged {
            formula: dia.to_string(),
        }];
        if let Ok(pos) = self.commit.binary_search_by_key(&(di as u16), |&(d, _)| d) {
            let resp = self.commit[pos].1;
            round.push(GameEvent::StoppedReplay {
                formula: dia.to_string(),
                label: self.label_strings(resp),
            });
            self.in_play = false;
        } else {
            let (choice, profile) = self
                .eng
                .choose(self.label, &self.commit, di as u16, bi, self.budget)?
                .ok_or_else(|| {
                    Error::Precondition("winning strategy lost an answer".into())
                })?;
            match choice {
                Choice::SelfAnswer => {
                    self.commit = commit_with(&self.commit, di as u16, self.label);
                    self.budget = profile;
                    round.push(GameEvent::Answered {
                        label: self.label_strings(self.label),
                        fresh_point: false,
                    });
                }
                Choice::Fresh(b) => {
                    self.commit = commit_with(&self.commit, di as u16, b);
                    self.label = b;
                    self.budget = profile;
                    round.push(GameEvent::Answered {
                        label: self.label_strings(b),
                        fresh_point: true,
                    });
                }
                Choice::Stop(id) => {
                    round.push(GameEvent::StoppedAtNamed {
                        board: id,
                        label: self.label_strings(self.eng.boards[id]),
                    });
                    self.in_play = false;
                }
            }
        }
        self.log.extend(round.iter().cloned());
        Ok(round)
    }

    fn label_strings(&self, label: u128) -> Vec<String> {
        self.eng
            .uni
            .mask_to_set(label)
            .iter()
            .map(|g| g.to_string())
            .collect()
    }
}
