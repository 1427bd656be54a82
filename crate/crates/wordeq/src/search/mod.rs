//! Breadth-first construction of the solution automaton.
//!
//! Starting from the initial states of a [`Problem`](crate::equation::Problem),
//! the driver in this module explores the space of equation states reachable
//! by sound transformation arcs and records every arc in an
//! [`Machine`](crate::edtol::Machine).  Exploration proceeds in rounds: a
//! popping round shortens small states, a block round compresses maximal
//! powers of a single letter, and a pair round compresses two-letter factors.
//! Each round strictly decreases a well-founded weight, so the explored graph
//! is finite; states are deduplicated up to renaming of generated symbols via
//! [`canonicalize`](crate::equation::canonicalize), and the relabelling is
//! stored on the arc so that the recorded morphisms stay exact.
//!
//! The submodules split the work: [`init`] enumerates the initial letter
//! abstractions, [`expand`] drives a single state expansion and the popping
//! round, [`block`] and [`pair`] implement the two compression rounds, and
//! [`witness`] replays one accepting path into a concrete solution.

pub mod block;
pub mod expand;
pub mod init;
pub mod pair;
pub mod witness;

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::alphabet::{ScratchPad, Sym};
use crate::edtol::Machine;
use crate::equation::{canonicalize, obviously_dead, validate_state, Problem, State, Validation};
use crate::{Error, Result};
use crate::transitions::{validate_edge, Label};

/// Sub-stage of the block compression loop for one letter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Guess the parity of each typed variable and pop the odd ones once.
    Parity {
        /// Typed variables of the current letter still awaiting their guess,
        /// one representative per involution pair.
        queue: Vec<Sym>,
    },
    /// Fix the parity of each length class and delete one letter from the
    /// odd classes.
    Odd {
        /// Length-class markers of the current letter still awaiting their
        /// parity decision, one representative per involution pair.
        queue: Vec<Sym>,
    },
    /// Pop two letters from every remaining typed variable so that halving
    /// acts on the variables as well.
    Pad {
        /// Typed variables of the current letter still awaiting their pops,
        /// one representative per involution pair.
        queue: Vec<Sym>,
    },
    /// Halve every visible block of the current letter.
    Halve,
}

/// Search phase attached to an automaton node.
///
/// The phase records where in the round structure the state sits, together
/// with the work queue of the current round.  Nodes are deduplicated on the
/// pair of canonical state and phase, so two visits to the same state inside
/// different rounds stay distinct.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Between rounds: choose the next round based on the state.
    Start,
    /// Popping round: uncross every variable once at its left border.
    Pop {
        /// Variable symbols, both polarities, still to process.
        queue: Vec<Sym>,
    },
    /// Block round: split the crossing variables guessed at initialisation.
    BlockSplit {
        /// Pending `(variable, block letter)` splits.
        queue: Vec<(Sym, Sym)>,
        /// Length-class markers allocated for the round, per block letter.
        markers: Vec<(Sym, Vec<Sym>)>,
    },
    /// Block round: place one marker per block according to a guessed
    /// partition of the blocks into length classes.
    BlockMark {
        /// Length-class markers allocated for the round, per block letter.
        markers: Vec<(Sym, Vec<Sym>)>,
    },
    /// Block round: shrink all blocks of each letter to single markers.
    BlockLoop {
        /// Block letters still to shrink, one representative per pair.
        letters: Vec<Sym>,
        /// Current sub-stage for the first letter in `letters`.
        stage: Stage,
    },
    /// Pair round: uncross variables against a guessed left/right split.
    PairUncross {
        /// Letters guessed to stand on the right of a compressed pair.
        right: std::collections::BTreeSet<Sym>,
        /// Variable symbols, both polarities, still to process.
        queue: Vec<Sym>,
    },
    /// Pair round: compress the crossing-free two-letter factors.
    PairLoop {
        /// Pending `(left, right)` pairs, one representative per pair of
        /// mirrored factors.
        queue: Vec<(Sym, Sym)>,
    },
    /// Accepting node; never expanded.
    Final,
}

impl Phase {
    /// Short tag for display and DOT output.
    pub fn tag(&self) -> &'static str {
        match self {
            Phase::Start => "start",
            Phase::Pop { .. } => "pop",
            Phase::BlockSplit { .. } => "block-split",
            Phase::BlockMark { .. } => "block-mark",
            Phase::BlockLoop { stage, .. } => match stage {
                Stage::Parity { .. } => "block-parity",
                Stage::Odd { .. } => "block-odd",
                Stage::Pad { .. } => "block-pad",
                Stage::Halve => "block-halve",
            },
            Phase::PairUncross { .. } => "pair-uncross",
            Phase::PairLoop { .. } => "pair-loop",
            Phase::Final => "final",
        }
    }
}

/// Tuning knobs for the automaton construction.
#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Abort with an incomplete machine after this many nodes.
    pub max_nodes: usize,
    /// Cap on the number of initial letter abstractions.
    pub max_initial_assignments: usize,
    /// Cap on the number of letter pairs oriented in one pair round.
    pub max_pair_letters: usize,
    /// Cap on the number of combined length-class partitions per marking
    /// step and on the number of crossing guesses per block round.
    pub max_partitions: usize,
    /// Cap on the number of arcs emitted by a single node expansion.
    pub max_arcs_per_node: usize,
    /// Consistency checks run on every stored node and arc; `None` disables
    /// them.
    pub validation: Option<Validation>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_nodes: 60_000,
            max_initial_assignments: 4_096,
            max_pair_letters: 8,
            max_partitions: 64,
            max_arcs_per_node: 4_096,
            validation: Some(Validation::Fast),
        }
    }
}

/// Apply a symbol renaming to a phase, re-sorting the queues.
fn rename_phase(rename: &BTreeMap<Sym, Sym>, phase: &Phase) -> Phase {
    let m = |s: &Sym| *rename.get(s).unwrap_or(s);
    match phase {
        Phase::Start => Phase::Start,
        Phase::Pop { queue } => {
            let mut queue: Vec<Sym> = queue.iter().map(m).collect();
            queue.sort();
            Phase::Pop { queue }
        }
        Phase::BlockSplit { queue, markers } => {
            let mut queue: Vec<(Sym, Sym)> =
                queue.iter().map(|(v, c)| (m(v), m(c))).collect();
            queue.sort();
            Phase::BlockSplit {
                queue,
                markers: rename_markers(rename, markers),
            }
        }
        Phase::BlockMark { markers } => Phase::BlockMark {
            markers: rename_markers(rename, markers),
        },
        Phase::BlockLoop { letters, stage } => {
            let mut letters: Vec<Sym> = letters.iter().map(m).collect();
            letters.sort();
            let stage = match stage {
                Stage::Parity { queue } => Stage::Parity {
                    queue: rename_sorted(rename, queue),
                },
                Stage::Odd { queue } => Stage::Odd {
                    queue: rename_sorted(rename, queue),
                },
                Stage::Pad { queue } => Stage::Pad {
                    queue: rename_sorted(rename, queue),
                },
                Stage::Halve => Stage::Halve,
            };
            Phase::BlockLoop { letters, stage }
        }
        Phase::PairUncross { right, queue } => Phase::PairUncross {
            right: right.iter().map(m).collect(),
            queue: rename_sorted(rename, queue),
        },
        Phase::PairLoop { queue } => {
            let mut queue: Vec<(Sym, Sym)> =
                queue.iter().map(|(p, q)| (m(p), m(q))).collect();
            queue.sort();
            Phase::PairLoop { queue }
        }
        Phase::Final => Phase::Final,
    }
}

fn rename_sorted(rename: &BTreeMap<Sym, Sym>, queue: &[Sym]) -> Vec<Sym> {
    let mut queue: Vec<Sym> = queue
        .iter()
        .map(|s| *rename.get(s).unwrap_or(s))
        .collect();
    queue.sort();
    queue
}

fn rename_markers(
    rename: &BTreeMap<Sym, Sym>,
    markers: &[(Sym, Vec<Sym>)],
) -> Vec<(Sym, Vec<Sym>)> {
    let mut markers: Vec<(Sym, Vec<Sym>)> = markers
        .iter()
        .map(|(c, ms)| (*rename.get(c).unwrap_or(c), rename_sorted(rename, ms)))
        .collect();
    markers.sort();
    markers
}

/// Build the full solution automaton for a problem.
///
/// The returned machine contains one node per reachable canonical pair of
/// state and phase, a single accepting node holding the solved word over the
/// seed letters, and one arc per sound transformation.  The machine is
/// trimmed to the nodes that lie on some accepting path.  If any cap in
/// `cfg` is hit, the machine's `incomplete` flag is set and the result is
/// still sound but possibly misses solutions.
pub fn build_machine(problem: &mut Problem, cfg: &SearchConfig) -> Result<Machine> {
    Ok(build_machine_raw(problem, cfg)?.trim())
}

#[doc(hidden)]
pub fn build_machine_raw(problem: &mut Problem, cfg: &SearchConfig) -> Result<Machine> {
    let mut machine = Machine::new(
        problem.seeds.clone(),
        problem.unknowns.len(),
        problem.bounds.clone(),
    );

    let final_state = problem.final_state();
    if let Some(v) = cfg.validation {
        validate_state(&problem.univ, &final_state, &problem.bounds, v)?;
    }
    let final_node = machine.add_node(final_state, "final");
    machine.finals.push(final_node);

    let mut memo: HashMap<(State, Phase), usize> = HashMap::new();
    let mut phases: Vec<Phase> = vec![Phase::Final];
    memo.insert(
        (machine.nodes[final_node].state.clone(), Phase::Final),
        final_node,
    );

    let assignments =
        init::initial_assignments(problem, cfg.max_initial_assignments);
    if assignments.truncated {
        machine.incomplete = true;
    }

    let mut work: VecDeque<usize> = VecDeque::new();
    for state in assignments.states {
        if obviously_dead(&problem.univ, &state) {
            continue;
        }
        if let Some(v) = cfg.validation {
            validate_state(&problem.univ, &state, &problem.bounds, v)?;
        }
        let key = (state.clone(), Phase::Start);
        let id = *memo.entry(key).or_insert_with(|| {
            let id = machine.add_node(state, "start");
            phases.push(Phase::Start);
            work.push_back(id);
            id
        });
        if !machine.initials.contains(&id) {
            machine.initials.push(id);
        }
    }

    while let Some(src) = work.pop_front() {
        if machine.nodes.len() > cfg.max_nodes {
            machine.incomplete = true;
            break;
        }
        let src_state = machine.nodes[src].state.clone();
        let src_phase = phases[src].clone();
        let mut scratch = ScratchPad::new();
        let mut incomplete = false;
        let arcs = expand::expand(
            problem,
            &src_state,
            &src_phase,
            cfg,
            &mut scratch,
            &mut incomplete,
        )?;
        if incomplete || arcs.len() > cfg.max_arcs_per_node {
            machine.incomplete = true;
        }
        for arc in arcs.into_iter().take(cfg.max_arcs_per_node) {
            if arc.state.w.len() > problem.bounds.hard {
                // Oversized states only ever abstract solutions that are
                // also reachable inside the size envelope, so dropping them
                // loses nothing.
                continue;
            }
            if obviously_dead(&problem.univ, &arc.state) {
                // Unsolvable states cannot lie on an accepting path; the
                // trim pass would delete them anyway.
                continue;
            }
            if matches!(arc.phase, Phase::Final) {
                // Accepting arcs always target the pre-registered node.
                debug_assert_eq!(arc.state, machine.nodes[final_node].state);
                machine.add_edge(src, final_node, arc.label);
                continue;
            }
            let canon = match canonicalize(&mut problem.univ, &arc.state) {
                Ok(c) => c,
                Err(Error::PoolExhausted(_)) => {
                    machine.incomplete = true;
                    continue;
                }
                Err(e) => return Err(e),
            };
            // Invert the canonical renaming so that the stored arc maps the
            // child's stored symbols back to the raw expansion result.
            let mut back: BTreeMap<Sym, Sym> = BTreeMap::new();
            for (&raw, &slot) in &canon.rename {
                if raw != slot {
                    back.insert(slot, raw);
                }
            }
            let label = if back.is_empty() {
                arc.label
            } else {
                Label::Renamed {
                    rename: back,
                    base: Box::new(arc.label),
                }
            };
            let phase = rename_phase(&canon.rename, &arc.phase);
            let key = (canon.state.clone(), phase.clone());
            let dst = match memo.get(&key) {
                Some(&dst) => dst,
                None => {
                    if let Some(v) = cfg.validation {
                        validate_state(&problem.univ, &canon.state, &problem.bounds, v)?;
                    }
                    let dst = machine.add_node(canon.state, arc.phase.tag());
                    phases.push(phase);
                    memo.insert(key, dst);
                    work.push_back(dst);
                    dst
                }
            };
            if cfg.validation.is_some() {
                let stored = &machine.nodes[dst].state;
                validate_edge(&problem.univ, &src_state, stored, &label)?;
            }
            machine.add_edge(src, dst, label);
        }
    }

    Ok(machine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Sym;
    use crate::edtol::EnumerateOptions;
    use crate::search::witness::witness_trace;

    #[test]
    fn fixture_machine_solves_ax_aaab() {
        let (mut problem, a, b, x) = crate::equation::tests::fixture();
        let cfg = SearchConfig::default();
        let machine = build_machine(&mut problem, &cfg).unwrap();
        assert!(machine.is_sat());
        assert!(!machine.incomplete);
        machine
            .validate(&problem.univ, crate::equation::Validation::Full { factor_cap: 10_000 })
            .unwrap();

        let enumeration = machine.enumerate(&EnumerateOptions::default());
        assert!(enumeration.exhaustive);
        assert_eq!(enumeration.tuples, vec![vec![vec![a, a, b]]]);

        let witness = witness_trace(&problem.univ, &machine)
            .unwrap()
            .expect("satisfiable machine has a witness");
        assert_eq!(witness.sigma[&x], vec![a, a, b]);
    }

    #[test]
    fn empty_equation_has_empty_machine() {
        let mut univ = crate::alphabet::Universe::new();
        let (a, _) = univ.add_letter_pair("a").unwrap();
        let (b, _) = univ.add_letter_pair("b").unwrap();
        let mut problem = Problem::single(univ, vec![a], vec![b], vec![]).unwrap();
        let machine = build_machine(&mut problem, &SearchConfig::default()).unwrap();
        assert!(!machine.is_sat());
        assert!(!machine.incomplete);
        assert!(machine.nodes.is_empty());
    }

    #[test]
    fn commutation_machine_has_a_cycle() {
        let mut univ = crate::alphabet::Universe::new();
        let (a, _) = univ.add_letter_pair("a").unwrap();
        let (x, _) = univ.add_var_pair("X").unwrap();
        let mut problem = Problem::single(univ, vec![a, x], vec![x, a], vec![x]).unwrap();
        let machine = build_machine(&mut problem, &SearchConfig::default()).unwrap();
        assert!(machine.is_sat());
        assert!(!machine.incomplete);
        assert!(machine.has_cycle());

        // Short solutions: 1, a, aa, ...
        let opts = EnumerateOptions {
            max_len: 3,
            ..EnumerateOptions::default()
        };
        let enumeration = machine.enumerate(&opts);
        let a_letter = a;
        for tuple in &enumeration.tuples {
            assert!(tuple[0].iter().all(|&s| s == a_letter));
        }
        assert!(enumeration.tuples.contains(&vec![vec![]]));
        assert!(enumeration.tuples.contains(&vec![vec![a]]));
        assert!(enumeration.tuples.contains(&vec![vec![a, a]]));
    }

    #[test]
    fn phase_tags_cover_all_rounds() {
        let p = Phase::BlockLoop {
            letters: vec![],
            stage: Stage::Halve,
        };
        assert_eq!(p.tag(), "block-halve");
        assert_eq!(Phase::Start.tag(), "start");
        assert_eq!(Phase::Final.tag(), "final");
    }

    #[test]
    fn rename_phase_resorts_queues() {
        let mut rename = BTreeMap::new();
        rename.insert(Sym(10), Sym(40));
        rename.insert(Sym(20), Sym(30));
        let phase = Phase::Pop {
            queue: vec![Sym(10), Sym(20)],
        };
        let out = rename_phase(&rename, &phase);
        assert_eq!(
            out,
            Phase::Pop {
                queue: vec![Sym(30), Sym(40)]
            }
        );
    }
}
