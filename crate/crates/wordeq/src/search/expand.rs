//! Expansion of a single automaton node.
//!
//! Every node carries a state and a [`Phase`].  Expansion first performs the
//! forced erasure of variables constrained to the empty image, then either
//! dispatches a new round (at [`Phase::Start`]) or continues the round the
//! phase is in.  Phases whose queue ran dry are advanced by [`normalize`]
//! without emitting arcs, so every emitted arc performs real work and the
//! automaton stays free of silent loops.

use std::collections::{BTreeMap, BTreeSet};

use crate::alphabet::{Nf, ScratchPad, Sym, Universe, HASH};
use crate::equation::{Problem, State};
use crate::{Error, Result};
use crate::search::{block, pair, Phase, SearchConfig, Stage};
use crate::transitions::{
    apply_erase, apply_pop, apply_reduce, pop_residuals, Label, MorphKind,
    MorphMap, SubstKind,
};

/// One candidate arc out of a node: label, raw successor state, and the
/// phase the successor continues in.
pub(crate) struct Arc {
    pub label: Label,
    pub state: State,
    pub phase: Phase,
}

/// Variable symbols occurring in the state, both polarities, sorted.
pub(crate) fn var_syms(state: &State) -> Vec<Sym> {
    state.x.iter().copied().collect()
}

/// Generated letter pairs that can be retired after an erasure: neither
/// polarity occurs in `W`, none is a type-relation key (an unplaced or
/// surviving marker) and none is a type-relation value (a block letter with
/// live typed symbols).  Returns both polarities of each retired pair.
pub(crate) fn retired_letters(univ: &Universe, state: &State) -> Vec<Sym> {
    let occurring: BTreeSet<Sym> = state.w.iter().copied().collect();
    let theta_values: BTreeSet<Sym> = state.theta.values().copied().collect();
    let mut out = Vec::new();
    for &s in &state.b {
        if s == HASH || univ.is_a_letter(s) || s > univ.inv(s) {
            continue;
        }
        let pair = [s, univ.inv(s)];
        let retired = pair.iter().all(|p| {
            !occurring.contains(p)
                && !theta_values.contains(p)
                && !state.theta.contains_key(p)
        });
        if retired {
            out.extend(pair);
        }
    }
    out
}

/// Advance a phase past exhausted queues and dead queue entries.  Never
/// emits arcs; expansion runs on the result.  Each step either ends the
/// round or lands on a stage with live work, so the rewriting terminates.
pub(crate) fn normalize(univ: &Universe, state: &State, phase: Phase) -> Phase {
    let mut phase = phase;
    loop {
        phase = match phase {
            Phase::Start | Phase::Final => return phase,
            Phase::Pop { queue } => {
                let queue: Vec<Sym> = queue
                    .into_iter()
                    .filter(|v| state.x.contains(v))
                    .collect();
                if queue.is_empty() {
                    Phase::Start
                } else {
                    return Phase::Pop { queue };
                }
            }
            Phase::BlockSplit { queue, markers } => {
                let queue: Vec<(Sym, Sym)> = queue
                    .into_iter()
                    .filter(|(v, _)| state.x.contains(v))
                    .collect();
                if queue.is_empty() {
                    Phase::BlockMark { markers }
                } else {
                    return Phase::BlockSplit { queue, markers };
                }
            }
            Phase::BlockMark { markers } => return Phase::BlockMark { markers },
            Phase::BlockLoop { letters, stage } => {
                if letters.is_empty() {
                    Phase::Start
                } else {
                    let c = letters[0];
                    if !state.b.contains(&c) {
                        // The letter's rider fired: its blocks are spelled
                        // by bare markers now.  Move to the next letter.
                        fresh_loop_phase(univ, state, letters[1..].to_vec())
                    } else {
                        match stage {
                            Stage::Parity { queue } => {
                                let queue = live_typed(univ, state, c, &queue);
                                if queue.is_empty() {
                                    Phase::BlockLoop {
                                        letters,
                                        stage: Stage::Odd {
                                            queue: marker_elements(univ, state, c),
                                        },
                                    }
                                } else {
                                    return Phase::BlockLoop {
                                        letters,
                                        stage: Stage::Parity { queue },
                                    };
                                }
                            }
                            Stage::Odd { queue } => {
                                let queue: Vec<Sym> = queue
                                    .into_iter()
                                    .filter(|m| {
                                        matches!(state.theta.get(m), Some(&t) if t == c || t == univ.inv(c))
                                    })
                                    .collect();
                                if queue.is_empty() {
                                    Phase::BlockLoop {
                                        letters,
                                        stage: Stage::Pad {
                                            queue: typed_elements(univ, state, c),
                                        },
                                    }
                                } else {
                                    return Phase::BlockLoop {
                                        letters,
                                        stage: Stage::Odd { queue },
                                    };
                                }
                            }
                            Stage::Pad { queue } => {
                                let queue = live_typed(univ, state, c, &queue);
                                if queue.is_empty() {
                                    Phase::BlockLoop {
                                        letters,
                                        stage: Stage::Halve,
                                    }
                                } else {
                                    return Phase::BlockLoop {
                                        letters,
                                        stage: Stage::Pad { queue },
                                    };
                                }
                            }
                            Stage::Halve => {
                                let visible = state
                                    .w
                                    .iter()
                                    .any(|&s| s == c || s == univ.inv(c));
                                if visible {
                                    return Phase::BlockLoop {
                                        letters,
                                        stage: Stage::Halve,
                                    };
                                }
                                // Hidden block content remains in typed
                                // variables; start the next pass with them.
                                // The rider fires whenever the letter loses
                                // its last occurrence, so this queue cannot
                                // be empty while the letter survives in B;
                                // advance defensively if it ever is.
                                let queue = typed_elements(univ, state, c);
                                if queue.is_empty() {
                                    fresh_loop_phase(
                                        univ,
                                        state,
                                        letters[1..].to_vec(),
                                    )
                                } else {
                                    Phase::BlockLoop {
                                        letters,
                                        stage: Stage::Parity { queue },
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Phase::PairUncross { right, queue } => {
                let queue: Vec<Sym> = queue
                    .into_iter()
                    .filter(|v| state.x.contains(v))
                    .collect();
                if queue.is_empty() {
                    Phase::PairLoop {
                        queue: lr_pairs(univ, state, &right),
                    }
                } else {
                    return Phase::PairUncross { right, queue };
                }
            }
            Phase::PairLoop { queue } => {
                let queue: Vec<(Sym, Sym)> = queue
                    .into_iter()
                    .filter(|&(p, q)| factor_occurs(univ, state, p, q))
                    .collect();
                if queue.is_empty() {
                    Phase::Start
                } else {
                    return Phase::PairLoop { queue };
                }
            }
        };
    }
}

/// The phase entering the block loop for the next letter in `letters`, with
/// a fresh parity queue; `Start` when no letters remain.
pub(crate) fn fresh_loop_phase(univ: &Universe, state: &State, letters: Vec<Sym>) -> Phase {
    match letters.first() {
        None => Phase::Start,
        Some(&c) => {
            let queue = typed_elements(univ, state, c);
            Phase::BlockLoop {
                letters,
                stage: Stage::Parity { queue },
            }
        }
    }
}

/// Filter a queue of typed-variable elements down to the live ones.
fn live_typed(univ: &Universe, state: &State, c: Sym, queue: &[Sym]) -> Vec<Sym> {
    queue
        .iter()
        .copied()
        .filter(|v| {
            state.x.contains(v)
                && matches!(state.theta.get(v), Some(&t) if t == c || t == univ.inv(c))
        })
        .collect()
}

/// Variable elements typed by the letter element of `c`: one representative
/// per pair, sorted.
pub(crate) fn typed_elements(univ: &Universe, state: &State, c: Sym) -> Vec<Sym> {
    let cbar = univ.inv(c);
    let mut out: Vec<Sym> = state
        .x
        .iter()
        .copied()
        .filter(|&v| {
            v < univ.inv(v)
                && matches!(state.theta.get(&v), Some(&t) if t == c || t == cbar)
        })
        .collect();
    out.sort();
    out
}

/// Marker elements typed by the letter element of `c`: typed letters, one
/// representative per pair, sorted.
pub(crate) fn marker_elements(univ: &Universe, state: &State, c: Sym) -> Vec<Sym> {
    let cbar = univ.inv(c);
    let mut out: Vec<Sym> = state
        .theta
        .iter()
        .filter(|&(&m, &t)| {
            univ.is_letter(m) && m < univ.inv(m) && (t == c || t == cbar)
        })
        .map(|(&m, _)| m)
        .collect();
    out.sort();
    out
}

/// Two-letter factors `pq` with `p` oriented left and `q` oriented right,
/// one representative per mirrored pair, sorted.  These are the factors the
/// pair round will compress.
pub(crate) fn lr_pairs(univ: &Universe, state: &State, right: &BTreeSet<Sym>) -> Vec<(Sym, Sym)> {
    let mut out: BTreeSet<(Sym, Sym)> = BTreeSet::new();
    for win in state.w.windows(2) {
        let (p, q) = (win[0], win[1]);
        if p == HASH || q == HASH || !univ.is_letter(p) || !univ.is_letter(q) {
            continue;
        }
        if right.contains(&q) && right.contains(&univ.inv(p)) {
            // A factor whose endpoints cancel never abbreviates to a letter:
            // every letter carries a nonzero constraint.
            let glue = state.mu_sym(univ, p).mul(state.mu_sym(univ, q), univ);
            if glue == Nf::Zero {
                continue;
            }
            let mirror = (univ.inv(q), univ.inv(p));
            out.insert((p, q).min(mirror));
        }
    }
    out.into_iter().collect()
}

/// True if the factor `pq` or its mirror is visible in `W`.
fn factor_occurs(univ: &Universe, state: &State, p: Sym, q: Sym) -> bool {
    let mirror = (univ.inv(q), univ.inv(p));
    state.w.windows(2).any(|win| {
        (win[0], win[1]) == (p, q) || (win[0], win[1]) == mirror
    })
}

/// Expand one node into its outgoing arcs.
pub(crate) fn expand(
    problem: &Problem,
    state: &State,
    phase: &Phase,
    cfg: &SearchConfig,
    scratch: &mut ScratchPad,
    incomplete: &mut bool,
) -> Result<Vec<Arc>> {
    let univ = &problem.univ;

    // Forced step: a variable constrained to the empty image is erased
    // before anything else, in any phase.  This keeps `One` out of every
    // other rule's preconditions.
    let forced = state
        .x
        .iter()
        .copied()
        .find(|&v| state.mu_sym(univ, v) == Nf::One);
    if let Some(v) = forced {
        let next = apply_erase(univ, state, v, &[]);
        let drop = retired_letters(univ, &next);
        let next = if drop.is_empty() {
            next
        } else {
            apply_erase(univ, state, v, &drop)
        };
        let phase = normalize(univ, &next, phase.clone());
        return Ok(vec![Arc {
            label: Label::Subst(SubstKind::Erase { var: v }),
            state: next,
            phase,
        }]);
    }

    match phase {
        Phase::Final => Ok(Vec::new()),
        Phase::Start => dispatch(problem, state, cfg, scratch, incomplete),
        Phase::Pop { queue } => pop_arcs(univ, state, queue),
        Phase::BlockSplit { queue, markers } => {
            block::split_arcs(univ, state, queue, markers, scratch)
        }
        Phase::BlockMark { markers } => {
            block::mark_arcs(univ, state, markers, cfg, incomplete)
        }
        Phase::BlockLoop { letters, stage } => block::loop_arcs(
            problem, state, letters, stage, cfg, scratch, incomplete,
        ),
        Phase::PairUncross { right, queue } => pair::uncross_arcs(
            problem, state, right, queue, cfg, scratch, incomplete,
        ),
        Phase::PairLoop { queue } => {
            pair::compress_arcs(problem, state, queue, cfg, scratch, incomplete)
        }
    }
}

/// Choose the next round for a state between rounds.
fn dispatch(
    problem: &Problem,
    state: &State,
    cfg: &SearchConfig,
    scratch: &mut ScratchPad,
    incomplete: &mut bool,
) -> Result<Vec<Arc>> {
    let univ = &problem.univ;
    if !state.theta.is_empty() {
        return Err(Error::Invariant(
            "between rounds every letter is untyped".into(),
        ));
    }

    // 1. Retire generated letters that no longer occur.
    let junk: Vec<Sym> = {
        let occurring = state.occurring_letters();
        state
            .b
            .iter()
            .copied()
            .filter(|&s| {
                s != HASH
                    && !univ.is_a_letter(s)
                    && !occurring.contains(&s)
                    && !occurring.contains(&univ.inv(s))
            })
            .collect()
    };
    if !junk.is_empty() {
        let next = apply_reduce(state, &junk);
        return Ok(vec![Arc {
            label: Label::Subst(SubstKind::Reduce { dropped: junk }),
            state: next,
            phase: Phase::Start,
        }]);
    }

    // 2. Variable-free states either accept or die.
    if state.var_free() {
        if !state.is_symmetric(univ) {
            return Ok(Vec::new());
        }
        return Ok(vec![final_arc(problem, state)]);
    }

    // 3. Small states run a popping round.
    if state.w.len() <= problem.bounds.small {
        let queue = var_syms(state);
        return pop_arcs(univ, state, &queue);
    }

    // 4. A visible letter square with uniform variable contexts starts a
    // block round.
    if let Some(arcs) =
        block::dispatch_blocks(problem, state, cfg, scratch, incomplete)?
    {
        return Ok(arcs);
    }

    // 5. Otherwise orient the visible two-letter factors and start a pair
    // round.
    if let Some(arcs) =
        pair::dispatch_pairs(problem, state, cfg, scratch, incomplete)?
    {
        return Ok(arcs);
    }

    // 6. No compressible structure: fall back to popping.  States on junk
    // branches grow past the hard size cap and are pruned there.
    let queue = var_syms(state);
    pop_arcs(univ, state, &queue)
}

/// The accepting arc of a solved state: map each seed letter to the segment
/// it abbreviates.
fn final_arc(problem: &Problem, state: &State) -> Arc {
    let univ = &problem.univ;
    let segs = state.segments();
    let mut map: MorphMap = BTreeMap::new();
    for (i, &s) in problem.seeds.iter().enumerate() {
        map.insert(s, segs[i].to_vec());
        map.insert(univ.inv(s), univ.inv_word(segs[i]));
    }
    Arc {
        label: Label::Morph {
            map,
            kind: MorphKind::Final,
        },
        state: problem.final_state(),
        phase: Phase::Final,
    }
}

/// Arcs of the popping round: the head variable pops one seed letter.
///
/// Variable images range over the seed alphabet alone.  Every compression
/// morphism fixes the seed letters, so any solution keeps a representation
/// whose hidden parts spell seed words throughout; popping the generated
/// abbreviation letters would only duplicate those witnesses under other
/// spellings and blow the reachable set up.
fn pop_arcs(univ: &Universe, state: &State, queue: &[Sym]) -> Result<Vec<Arc>> {
    debug_assert!(state.theta.is_empty(), "popping rounds run on untyped states");
    let v = queue[0];
    let rest = &queue[1..];
    let mut arcs = Vec::new();
    let mu_v = state.mu_sym(univ, v);
    for &d in &state.b {
        if d == HASH || !univ.is_a_letter(d) {
            continue;
        }
        let mu_d = state.mu_sym(univ, d);
        for nu in pop_residuals(univ, mu_d, mu_v) {
            let next = apply_pop(univ, state, v, &[d], nu);
            let phase = normalize(
                univ,
                &next,
                Phase::Pop {
                    queue: rest.to_vec(),
                },
            );
            arcs.push(Arc {
                label: Label::Subst(SubstKind::Pop {
                    var: v,
                    prefix: vec![d],
                }),
                state: next,
                phase,
            });
        }
    }
    Ok(arcs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::tests::fixture;

    #[test]
    fn retired_letters_respect_types() {
        let (p, a, _, _) = fixture();
        let mut univ = p.univ.clone();
        let (c, cbar) = univ.canon_letter_slot(0).unwrap();
        let (m, mbar) = univ.canon_letter_slot(1).unwrap();
        let mut st = p.initial.clone();
        st.b.insert(c);
        st.b.insert(cbar);
        st.b.insert(m);
        st.b.insert(mbar);
        st.mu.insert(c, Nf::Pair(a, a));
        st.mu.insert(cbar, Nf::Pair(univ.inv(a), univ.inv(a)));
        st.mu.insert(m, Nf::Pair(a, a));
        st.mu.insert(mbar, Nf::Pair(univ.inv(a), univ.inv(a)));
        // Non-occurring and untyped: both pairs retire.
        let drop = retired_letters(&univ, &st);
        assert_eq!(drop.len(), 4);
        // Typing m by c protects both pairs: m as a key, c as a value.
        st.theta.insert(m, c);
        st.theta.insert(mbar, cbar);
        assert!(retired_letters(&univ, &st).is_empty());
    }

    #[test]
    fn normalize_drains_empty_queues() {
        let (p, _, _, x) = fixture();
        let st = &p.initial;
        let u = &p.univ;
        assert_eq!(
            normalize(u, st, Phase::Pop { queue: vec![] }),
            Phase::Start
        );
        // Dead queue entries are filtered, live ones kept.
        let mut dead = p.initial.clone();
        dead.x.remove(&x);
        dead.x.remove(&u.inv(x));
        assert_eq!(
            normalize(u, &dead, Phase::Pop { queue: vec![x] }),
            Phase::Start
        );
        assert_eq!(
            normalize(u, st, Phase::Pop { queue: vec![x] }),
            Phase::Pop { queue: vec![x] }
        );
        assert_eq!(
            normalize(u, st, Phase::PairLoop { queue: vec![] }),
            Phase::Start
        );
    }
}
