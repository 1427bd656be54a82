//! The pair compression round.
//!
//! The round orients the letter pairs seen in visible two-letter factors:
//! each element picks a side, its involution partner takes the other, and
//! the factors read left-to-right across the divide become compressible.
//! Variables whose images could begin with a right-oriented letter pop that
//! letter first, so no compressible factor straddles a variable boundary;
//! a single pop suffices because a popped right letter followed by another
//! right letter is not a left-right factor.  Afterwards every visible
//! left-right factor is replaced by one fresh letter, mirrored factors by
//! the fresh letter's partner, which keeps the defining symmetry exact.

use std::collections::{BTreeMap, BTreeSet};

use crate::alphabet::{Nf, ScratchPad, Sym, Universe, HASH};
use crate::equation::{Problem, State};
use crate::Result;
use crate::search::expand::{expand, lr_pairs, normalize, var_syms, Arc};
use crate::search::{Phase, SearchConfig};
use crate::transitions::{
    apply_pop, pop_residuals, Label, MorphKind, MorphMap, SubstKind,
};

/// Letter elements eligible for orientation: representatives of letters
/// seen in a visible two-letter factor of distinct letters whose glued
/// constraint is nonzero.  Sorted; capped at `max` with the flag set.
fn orientable_elements(
    univ: &Universe,
    state: &State,
    max: usize,
    incomplete: &mut bool,
) -> Vec<Sym> {
    let mut elems: BTreeSet<Sym> = BTreeSet::new();
    for win in state.w.windows(2) {
        let (p, q) = (win[0], win[1]);
        if p == HASH || q == HASH || !univ.is_letter(p) || !univ.is_letter(q) {
            continue;
        }
        if p == q {
            continue;
        }
        let glue = state.mu_sym(univ, p).mul(state.mu_sym(univ, q), univ);
        if glue == Nf::Zero {
            continue;
        }
        elems.insert(p.min(univ.inv(p)));
        elems.insert(q.min(univ.inv(q)));
    }
    let mut elems: Vec<Sym> = elems.into_iter().collect();
    if elems.len() > max {
        *incomplete = true;
        elems.truncate(max);
    }
    elems
}

/// Start a pair round if some visible two-letter factor can compress.
///
/// Every orientation of the elements that makes at least one visible factor
/// left-right is explored; orientations without such a factor do no work
/// and are dropped, which is harmless because following any one orientation
/// preserves all solutions.  Returns `None` when no orientation qualifies.
pub(crate) fn dispatch_pairs(
    problem: &Problem,
    state: &State,
    cfg: &SearchConfig,
    scratch: &mut ScratchPad,
    incomplete: &mut bool,
) -> Result<Option<Vec<Arc>>> {
    let univ = &problem.univ;
    let elems =
        orientable_elements(univ, state, cfg.max_pair_letters, incomplete);
    if elems.is_empty() {
        return Ok(None);
    }
    let queue = var_syms(state);
    let mut arcs = Vec::new();
    for mask in 0u32..(1u32 << elems.len()) {
        let right: BTreeSet<Sym> = elems
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                if mask & (1 << i) != 0 {
                    e
                } else {
                    univ.inv(e)
                }
            })
            .collect();
        if lr_pairs(univ, state, &right).is_empty() {
            continue;
        }
        let phase = normalize(
            univ,
            state,
            Phase::PairUncross {
                right,
                queue: queue.clone(),
            },
        );
        arcs.extend(expand(problem, state, &phase, cfg, scratch, incomplete)?);
    }
    if arcs.is_empty() {
        return Ok(None);
    }
    Ok(Some(arcs))
}

/// Arcs resolving the head variable of the uncrossing queue: either its
/// image starts with a left letter and nothing happens, or it starts with
/// one of the right letters, which pops out.
pub(crate) fn uncross_arcs(
    problem: &Problem,
    state: &State,
    right: &BTreeSet<Sym>,
    queue: &[Sym],
    cfg: &SearchConfig,
    scratch: &mut ScratchPad,
    incomplete: &mut bool,
) -> Result<Vec<Arc>> {
    let univ = &problem.univ;
    debug_assert!(state.theta.is_empty());
    let v = queue[0];
    let rest = &queue[1..];

    // Image starts left-oriented: no work for this variable.
    let skip = normalize(
        univ,
        state,
        Phase::PairUncross {
            right: right.clone(),
            queue: rest.to_vec(),
        },
    );
    let mut arcs = expand(problem, state, &skip, cfg, scratch, incomplete)?;

    let mu_v = state.mu_sym(univ, v);
    for &d in right {
        // Earlier pops can retire letters the orientation still names.
        if !state.b.contains(&d) {
            continue;
        }
        let mu_d = state.mu_sym(univ, d);
        for nu in pop_residuals(univ, mu_d, mu_v) {
            let next = apply_pop(univ, state, v, &[d], nu);
            let phase = normalize(
                univ,
                &next,
                Phase::PairUncross {
                    right: right.clone(),
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

/// The arc compressing the head factor of the loop queue into a fresh
/// letter, its mirror into the partner letter.
pub(crate) fn compress_arcs(
    problem: &Problem,
    state: &State,
    queue: &[(Sym, Sym)],
    _cfg: &SearchConfig,
    scratch: &mut ScratchPad,
    _incomplete: &mut bool,
) -> Result<Vec<Arc>> {
    let univ = &problem.univ;
    debug_assert!(state.theta.is_empty());
    let (p, q) = queue[0];
    let rest = &queue[1..];
    let (pbar, qbar) = (univ.inv(p), univ.inv(q));

    let mu = state.mu_sym(univ, p).mul(state.mu_sym(univ, q), univ);
    debug_assert_ne!(mu, Nf::Zero);
    let (e, ebar) = scratch.letter_pair();

    let mut next = state.clone();
    next.b.insert(e);
    next.b.insert(ebar);
    next.mu.insert(e, mu);
    next.mu.insert(ebar, mu.invol(univ));

    // Occurrences of a fixed factor of distinct letters never overlap, and
    // neither do a factor and its mirror, so one greedy pass rewrites both
    // and commutes with the mirror symmetry of `W`.
    let mut w = Vec::with_capacity(next.w.len());
    let mut i = 0;
    while i < next.w.len() {
        if i + 1 < next.w.len() {
            let (s, t) = (next.w[i], next.w[i + 1]);
            if (s, t) == (p, q) {
                w.push(e);
                i += 2;
                continue;
            }
            if (s, t) == (qbar, pbar) {
                w.push(ebar);
                i += 2;
                continue;
            }
        }
        w.push(next.w[i]);
        i += 1;
    }
    next.w = w;

    let mut map: MorphMap = BTreeMap::new();
    map.insert(e, vec![p, q]);
    map.insert(ebar, vec![qbar, pbar]);
    let phase = normalize(univ, &next, Phase::PairLoop { queue: rest.to_vec() });
    Ok(vec![Arc {
        label: Label::Morph {
            map,
            kind: MorphKind::Pair,
        },
        state: next,
        phase,
    }])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::tests::fixture;

    /// A symmetric variable-free state over the fixture's letters.
    fn ground_state(problem: &Problem, first: &[Sym]) -> State {
        let univ = &problem.univ;
        let mut w = vec![HASH];
        w.extend_from_slice(first);
        w.push(HASH);
        let mut mirror: Vec<Sym> =
            first.iter().rev().map(|&s| univ.inv(s)).collect();
        w.append(&mut mirror);
        w.push(HASH);
        let mut b: BTreeSet<Sym> = [HASH].into();
        for &s in first {
            b.insert(s);
            b.insert(univ.inv(s));
        }
        State {
            w,
            b,
            x: BTreeSet::new(),
            theta: BTreeMap::new(),
            mu: BTreeMap::new(),
        }
    }

    #[test]
    fn compress_rewrites_factor_and_mirror() {
        let (problem, a, b, _) = fixture();
        let univ = &problem.univ;
        let state = ground_state(&problem, &[a, b]);
        let cfg = SearchConfig::default();
        let mut scratch = ScratchPad::new();
        let mut incomplete = false;
        let arcs = compress_arcs(
            &problem,
            &state,
            &[(a, b)],
            &cfg,
            &mut scratch,
            &mut incomplete,
        )
        .unwrap();
        assert_eq!(arcs.len(), 1);
        let arc = &arcs[0];
        assert_eq!(arc.phase, Phase::Start);
        // One fresh letter per side, mirrored.
        assert_eq!(arc.state.w.len(), 5);
        let e = arc.state.w[1];
        assert_eq!(arc.state.w, vec![HASH, e, HASH, univ.inv(e), HASH]);
        assert_eq!(arc.state.mu_sym(univ, e), Nf::Pair(a, b));
        match &arc.label {
            Label::Morph { map, kind } => {
                assert_eq!(*kind, MorphKind::Pair);
                assert_eq!(map[&e], vec![a, b]);
                assert_eq!(map[&univ.inv(e)], vec![univ.inv(b), univ.inv(a)]);
            }
            other => panic!("expected a morphism, got {other:?}"),
        }
        assert!(!incomplete);
    }

    #[test]
    fn cancelling_factors_do_not_dispatch() {
        let (problem, a, _, _) = fixture();
        let univ = &problem.univ;
        // The only factor is a letter next to its partner: nothing orients.
        let state = ground_state(&problem, &[a, univ.inv(a)]);
        let cfg = SearchConfig::default();
        let mut scratch = ScratchPad::new();
        let mut incomplete = false;
        let out = dispatch_pairs(
            &problem,
            &state,
            &cfg,
            &mut scratch,
            &mut incomplete,
        )
        .unwrap();
        assert!(out.is_none());
        assert!(!incomplete);
    }

    #[test]
    fn dispatch_compresses_ground_factors() {
        let (problem, a, b, _) = fixture();
        let univ = &problem.univ;
        let state = ground_state(&problem, &[a, b]);
        let cfg = SearchConfig::default();
        let mut scratch = ScratchPad::new();
        let mut incomplete = false;
        let arcs = dispatch_pairs(
            &problem,
            &state,
            &cfg,
            &mut scratch,
            &mut incomplete,
        )
        .unwrap()
        .expect("the factor ab orients");
        // Exactly one orientation sees a left-right factor: b right and a
        // left, which compresses ab and its mirror b^a^ together.
        assert_eq!(arcs.len(), 1);
        let arc = &arcs[0];
        assert_eq!(arc.phase, Phase::Start);
        let e = arc.state.w[1];
        assert_eq!(arc.state.w, vec![HASH, e, HASH, univ.inv(e), HASH]);
        assert!(!incomplete);
    }
}
