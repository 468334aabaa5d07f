//! The `topsat` binary: satisfiability, model checking, filtration,
//! bisimulation checking, witness construction, and an interactive
//! satisfiability game on the command line.
//!
//! Exit codes: 0 for success (SAT, valid, check passed), 1 for the
//! negative verdict (UNSAT, invalid, check failed), 2 for usage and
//! input errors.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use topsat::bisim::{check_bisimulation, largest_bisimulation};
use topsat::finrep::{closure_set, filtrate, quasi_to_model};
use topsat::game::Session;
use topsat::oracle::find_quasi_model;
use topsat::{
    check_quasi_model, decide, symbolic_witness_t0, symbolic_witness_t1, verify_symbolic,
    Formula, GameEvent, QuasiModel, SpaceClass, SymbolicModel, TopoModel, Verdict,
};

#[derive(Parser)]
#[command(name = "topsat", version, about = "Topological satisfiability for hybrid modal logic")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Space class named on the command line. `t2` is accepted as a synonym
/// for `t1`: the two classes are indistinguishable in this language.
#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    T0,
    T1,
    T2,
    All,
}

impl ClassArg {
    fn class(self) -> SpaceClass {
        match self {
            ClassArg::T0 => SpaceClass::T0,
            ClassArg::T1 | ClassArg::T2 => SpaceClass::T1,
            ClassArg::All => SpaceClass::All,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a formula and print its core form.
    Parse { formula: String },
    /// Evaluate a formula in a model file at a point.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        point: u32,
        formula: String,
    },
    /// Decide satisfiability over a space class.
    Sat {
        #[arg(long, value_enum, default_value_t = ClassArg::All)]
        class: ClassArg,
        /// Write the quasi-model witness here on SAT.
        #[arg(long)]
        witness: Option<PathBuf>,
        /// Cross-check the verdict against bounded model search.
        #[arg(long, value_name = "N")]
        oracle_max: Option<usize>,
        formula: String,
    },
    /// Decide validity over a space class.
    Valid {
        #[arg(long, value_enum, default_value_t = ClassArg::All)]
        class: ClassArg,
        /// Write the countermodel witness here when invalid.
        #[arg(long)]
        witness: Option<PathBuf>,
        formula: String,
    },
    /// Quotient a model by agreement on the closure set of a formula.
    Filtrate {
        #[arg(long)]
        model: PathBuf,
        /// Write the quotient model here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        formula: String,
    },
    /// Check a pair file as a topobisimulation, or compute the largest one.
    Bisim {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// JSON array of [left, right] point pairs to check; omit to compute.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Build and verify a symbolic witness model for a satisfiable formula.
    Witness {
        #[arg(long, value_enum)]
        class: ClassArg,
        /// Write the symbolic model here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        formula: String,
    },
    /// Play the satisfiability game as Abelard against the engine.
    Game {
        #[arg(long, value_enum, default_value_t = ClassArg::All)]
        class: ClassArg,
        /// Write the transcript here when the session ends.
        #[arg(long)]
        transcript: Option<PathBuf>,
        formula: String,
    },
    /// Write a model as a DOT digraph of its specialization preorder.
    ExportDot {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a quasi-model file against a space class.
    ValidateQuasi {
        #[arg(long, value_enum, default_value_t = ClassArg::All)]
        class: ClassArg,
        file: PathBuf,
    },
}

fn main() -> ExitCode {
    // Die quietly when the consumer of a pipe goes away, instead of
    // panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match run(Cli::parse().cmd) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// `Err` is reserved for usage and input faults; negative verdicts are
/// `Ok(1)`.
fn run(cmd: Cmd) -> Result<ExitCode, String> {
    match cmd {
        Cmd::Parse { formula } => {
            let f = parse(&formula)?;
            let core = topsat::formula::to_core(&f);
            println!("parsed: {f}");
            println!("core:   {core}");
            println!(
                "letters: {:?}  nominals: {:?}  core connectives: {}",
                f.props(),
                f.nominals(),
                core.connective_count()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check { model, point, formula } => {
            let f = parse(&formula)?;
            let m = read_model(&model)?;
            let v = m.eval(&f, point).map_err(|e| e.to_string())?;
            println!("{v}");
            Ok(verdict(v))
        }
        Cmd::Sat { class, witness, oracle_max, formula } => {
            let f = parse(&formula)?;
            let class = class.class();
            let result = decide(&f, class).map_err(|e| e.to_string())?;
            if let Some(bound) = oracle_max {
                cross_check(&f, class, &result, bound)?;
            }
            match result {
                Verdict::Satisfiable(q) => {
                    println!("SAT");
                    if let Some(path) = witness {
                        write_json(&path, &*q)?;
                        println!("witness written to {}", path.display());
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Verdict::Unsatisfiable => {
                    println!("UNSAT");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Cmd::Valid { class, witness, formula } => {
            let f = parse(&formula)?;
            match decide(&Formula::neg(f), class.class()).map_err(|e| e.to_string())? {
                Verdict::Unsatisfiable => {
                    println!("valid");
                    Ok(ExitCode::SUCCESS)
                }
                Verdict::Satisfiable(q) => {
                    println!("invalid");
                    if let Some(path) = witness {
                        write_json(&path, &*q)?;
                        println!("countermodel written to {}", path.display());
                    }
                    Ok(ExitCode::from(1))
                }
            }
        }
        Cmd::Filtrate { model, out, formula } => {
            let f = parse(&formula)?;
            let m = read_model(&model)?;
            let sigma = closure_set(&f);
            let (q, proj) = filtrate(&m, &sigma).map_err(|e| e.to_string())?;
            println!(
                "closure set: {} formulas; {} points -> {} classes",
                sigma.len(),
                m.space().len(),
                q.space().len()
            );
            for (w, c) in &proj {
                println!("  {w} -> {c}");
            }
            emit_json(out.as_deref(), &q, "quotient model")?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bisim { left, right, pairs } => {
            let a = read_model(&left)?;
            let b = read_model(&right)?;
            match pairs {
                Some(path) => {
                    let raw: Vec<(u32, u32)> = read_json(&path)?;
                    let rel: BTreeSet<(u32, u32)> = raw.into_iter().collect();
                    let rep = check_bisimulation(&a, &b, &rel).map_err(|e| e.to_string())?;
                    println!(
                        "topobisimulation: {}  total: {}  hybrid: {}",
                        rep.ok, rep.total, rep.hybrid
                    );
                    if let Some(reason) = rep.reason {
                        println!("defect: {reason}");
                    }
                    Ok(verdict(rep.ok))
                }
                None => {
                    let l = largest_bisimulation(&a, &b).map_err(|e| e.to_string())?;
                    println!(
                        "largest bisimulation: {} pairs  total: {}  hybrid: {}",
                        l.pairs.len(),
                        l.total,
                        l.hybrid
                    );
                    for (x, y) in &l.pairs {
                        println!("  {x} ~ {y}");
                    }
                    Ok(verdict(!l.pairs.is_empty()))
                }
            }
        }
        Cmd::Witness { class, out, formula } => {
            let f = parse(&formula)?;
            let space_class = class.class();
            if space_class == SpaceClass::All {
                return Err("witness construction needs --class t0 or t1".into());
            }
            match decide(&f, space_class).map_err(|e| e.to_string())? {
                Verdict::Unsatisfiable => {
                    println!("UNSAT");
                    Ok(ExitCode::from(1))
                }
                Verdict::Satisfiable(q) => {
                    let rep = quasi_to_model(&q).map_err(|e| e.to_string())?;
                    let s = match space_class {
                        SpaceClass::T1 => symbolic_witness_t1(&rep),
                        _ => symbolic_witness_t0(&rep),
                    }
                    .map_err(|e| e.to_string())?;
                    verify_symbolic(&s).map_err(|e| e.to_string())?;
                    describe_symbolic(&s);
                    emit_json(out.as_deref(), &s, "symbolic model")?;
                    Ok(ExitCode::SUCCESS)
                }
            }
        }
        Cmd::Game { class, transcript, formula } => {
            let f = parse(&formula)?;
            game_loop(&f, class.class(), transcript.as_deref())
        }
        Cmd::ExportDot { model, out } => {
            let m = read_model(&model)?;
            let dot = model_dot(&m).map_err(|e| e.to_string())?;
            match out {
                Some(path) => fs::write(&path, dot).map_err(|e| e.to_string())?,
                None => print!("{dot}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::ValidateQuasi { class, file } => {
            let q: QuasiModel = read_json(&file)?;
            match check_quasi_model(&q, class.class()) {
                Ok(()) => {
                    println!("valid quasi-model of {} over {}", q.target, class.class());
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    println!("invalid quasi-model: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
    }
}

fn parse(s: &str) -> Result<Formula, String> {
    s.parse().map_err(|e: topsat::Error| e.to_string())
}

fn verdict(positive: bool) -> ExitCode {
    if positive {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_model(path: &Path) -> Result<TopoModel, String> {
    let m: TopoModel = read_json(path)?;
    m.validate().map_err(|e| e.to_string())?;
    Ok(m)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
}

fn emit_json<T: serde::Serialize>(
    out: Option<&Path>,
    value: &T,
    what: &str,
) -> Result<(), String> {
    match out {
        Some(path) => {
            write_json(path, value)?;
            println!("{what} written to {}", path.display());
        }
        None => {
            println!("{}", serde_json::to_string_pretty(value).map_err(|e| e.to_string())?);
        }
    }
    Ok(())
}

/// Compares the game verdict with bounded exhaustive search. A model
/// found for a refuted formula is a hard fault; the converse gap only
/// means the bound was too small.
fn cross_check(
    f: &Formula,
    class: SpaceClass,
    result: &Verdict,
    bound: usize,
) -> Result<(), String> {
    let oracle = find_quasi_model(f, class, bound).map_err(|e| e.to_string())?;
    match (result, oracle) {
        (Verdict::Unsatisfiable, Some(_)) => Err(format!(
            "verdict mismatch: UNSAT, but search found a model within {bound} points"
        )),
        (Verdict::Satisfiable(_), None) => {
            println!("oracle: no model within {bound} points (witness needs more)");
            Ok(())
        }
        _ => {
            println!("oracle: agrees at bound {bound}");
            Ok(())
        }
    }
}

fn describe_symbolic(s: &SymbolicModel) {
    println!(
        "symbolic witness: {} classes, carrier {}, {} designated opens",
        s.classes.len(),
        if s.carrier_is_finite() { "finite" } else { "infinite" },
        s.opens.len()
    );
}

// ---------------------------------------------------------------------------
// DOT export.

/// Specialization digraph: an arrow w -> v for each distinct pair with v
/// in every open around w. Letters and names annotate the node labels.
fn model_dot(m: &TopoModel) -> topsat::Result<String> {
    let order = m.space().to_preorder();
    let mut s = String::from("digraph model {\n  rankdir=BT;\n  node [shape=ellipse];\n");
    for &w in m.space().points() {
        let mut tags: Vec<String> = m
            .valuation()
            .iter()
            .filter(|(_, ext)| ext.contains(&w))
            .map(|(p, _)| p.clone())
            .collect();
        tags.extend(
            m.nominal_assignment()
                .iter()
                .filter(|&(_, &x)| x == w)
                .map(|(i, _)| format!("'{i}")),
        );
        let label = if tags.is_empty() {
            format!("{w}")
        } else {
            format!("{w}\\n{}", tags.join(" "))
        };
        s.push_str(&format!("  p{w} [label=\"{label}\"];\n"));
    }
    for &w in order.points() {
        for &v in order.points() {
            if w != v && order.related(w, v)? {
                s.push_str(&format!("  p{w} -> p{v};\n"));
            }
        }
    }
    s.push_str("}\n");
    Ok(s)
}

// ---------------------------------------------------------------------------
// Interactive game.

/// Runs the stepper: the human is Abelard and challenges diamonds, the
/// engine is Eloise and answers along the winning strategy it found. An
/// unsatisfiable target gets its verdict up front and no game.
fn game_loop(
    f: &Formula,
    class: SpaceClass,
    transcript: Option<&Path>,
) -> Result<ExitCode, String> {
    let mut session = match Session::start(f, class).map_err(|e| e.to_string())? {
        Some(s) => s,
        None => {
            println!("UNSAT over {class}: Eloise has no strategy, no game to play");
            return Ok(ExitCode::from(1));
        }
    };
    println!("SAT over {class}; you are Abelard, the engine answers for Eloise.");
    let signs = session.signs();
    if !signs.is_empty() {
        println!("existential commitments:");
        for (g, yes) in signs {
            println!("  {} {g}", if yes { "+" } else { "-" });
        }
    }

    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    'session: loop {
        let boards = session.boards();
        println!("initial boards:");
        for (k, b) in boards.iter().enumerate() {
            println!("  [{k}] {}", set_string(b));
        }
        let board = loop {
            match prompt(&mut lines, "board (index, or q to quit)> ")? {
                None => break 'session,
                Some(word) => match word.parse::<usize>() {
                    Ok(k) if k < boards.len() => break k,
                    _ => println!("pick an index below {}", boards.len()),
                },
            }
        };
        session.begin(board).map_err(|e| e.to_string())?;

        while !session.is_over() {
            let position = session.position().expect("play is open");
            println!("position: {}", set_string(&position));
            let challenges = session.challenges();
            if challenges.is_empty() {
                println!("no open challenges: Eloise wins this play");
                break;
            }
            println!("your challenges:");
            for (k, c) in challenges.iter().enumerate() {
                println!("  [{k}] {c}");
            }
            let pick = match prompt(&mut lines, "challenge (index, or q to quit)> ")? {
                None => break 'session,
                Some(word) => word,
            };
            let dia = match pick.parse::<usize>() {
                Ok(k) if k < challenges.len() => challenges[k].clone(),
                // Allow a formula spelled out; the engine names the rule
                // any illegal choice breaks.
                _ => match pick.parse::<Formula>() {
                    Ok(g) => g,
                    Err(e) => {
                        println!("illegal move: {e}");
                        continue;
                    }
                },
            };
            match session.challenge(&dia) {
                Ok(events) => report(&events),
                Err(e) => println!("illegal move: {e}"),
            }
        }
        println!("play over.");
    }

    if let Some(path) = transcript {
        write_json(path, &session.transcript().to_vec())?;
        println!("transcript written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// Reads one trimmed line; `None` on end of input or an explicit quit.
fn prompt(
    lines: &mut io::Lines<io::StdinLock<'_>>,
    text: &str,
) -> Result<Option<String>, String> {
    print!("{text}");
    io::stdout().flush().map_err(|e| e.to_string())?;
    match lines.next() {
        None => Ok(None),
        Some(line) => {
            let word = line.map_err(|e| e.to_string())?.trim().to_string();
            if word == "q" || word == "quit" {
                Ok(None)
            } else {
                Ok(Some(word))
            }
        }
    }
}

fn report(events: &[GameEvent]) {
    for e in events {
        match e {
            GameEvent::Began { .. } => {}
            GameEvent::Challenged { formula } => println!("challenged: {formula}"),
            GameEvent::Answered { label, fresh_point: true } => println!(
                "Eloise answers with a fresh point (witness rule: the body joins \
                 the new label, every boxed member carries over): {}",
                label.join(", ")
            ),
            GameEvent::Answered { label, fresh_point: false } => println!(
                "Eloise answers with the current point (self-answer rule: the \
                 label already contains the challenged body): {}",
                label.join(", ")
            ),
            GameEvent::StoppedAtNamed { board, label } => println!(
                "Eloise returns to initial board {board} (naming rule: a named \
                 label may close the play): {}",
                label.join(", ")
            ),
            GameEvent::StoppedReplay { formula, label } => println!(
                "repeated challenge {formula}: the former answer is forced and \
                 the play stops (repetition rule): {}",
                label.join(", ")
            ),
        }
    }
}

fn set_string(s: &BTreeSet<Formula>) -> String {
    s.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(", ")
}
