//! The block compression round.
//!
//! A block is a maximal power of one letter.  The round renames the visible
//! blocks of each active letter to a fresh typed copy, splits the variables
//! guessed to start inside a block, partitions the blocks of each letter
//! into length classes marked by fresh typed markers, and then shrinks all
//! blocks in lockstep: odd classes lose one letter into their marker, even
//! visible material is halved, and typed variables pop in step.  When a
//! letter loses its last occurrence its marker alone spells the block and a
//! rider retires the letter.
//!
//! Types make a block's material commute internally, so a state is
//! compared up to reordering inside each block; regions (maximal factors of
//! one letter's visible and typed material) are the unit all guesses work
//! on.  Every region has an involution partner in the segment carrying the
//! mirrored trace; marking writes mirrored markers into partner regions and
//! the shrinking steps edit all regions alike, which keeps the word
//! involution closed.

use std::collections::{BTreeMap, BTreeSet};

use crate::alphabet::{Nf, ScratchPad, Sym, Universe, HASH};
use crate::equation::{Problem, State};
use crate::Result;
use crate::search::expand::{
    expand, fresh_loop_phase, normalize, typed_elements, Arc,
};
use crate::search::{Phase, SearchConfig, Stage};
use crate::traces::normal_form;
use crate::transitions::{
    apply_pop, apply_split, pop_residuals, Label, MorphKind, MorphMap, SubstKind,
};

/// The smaller polarity of a symbol's pair, used to pick one representative
/// per involution pair.
fn rep(univ: &Universe, s: Sym) -> Sym {
    s.min(univ.inv(s))
}

/// A maximal factor of `W` belonging to one polarized letter: visible
/// copies of the letter, markers typed by it and variables typed by it.
#[derive(Debug)]
pub(crate) struct Region {
    /// Index of the segment containing the region.
    pub seg: usize,
    /// First position in `W` (inclusive).
    pub start: usize,
    /// Last position in `W` (exclusive).
    pub end: usize,
    /// The block letter, with the polarity it is written in.
    pub letter: Sym,
    /// Number of visible copies of `letter`.
    pub vis: usize,
    /// Typed variables inside, in order.
    pub typed_vars: Vec<Sym>,
    /// Typed markers inside, in order.
    pub markers: Vec<Sym>,
}

/// Split `W` into the regions of the given polarized letters.
pub(crate) fn compute_regions(
    univ: &Universe,
    state: &State,
    actives: &BTreeSet<Sym>,
) -> Vec<Region> {
    let mut out: Vec<Region> = Vec::new();
    let mut seg = 0usize;
    let mut current: Option<Region> = None;
    for (i, &s) in state.w.iter().enumerate() {
        let owner = if actives.contains(&s) {
            Some(s)
        } else {
            state.theta.get(&s).copied().filter(|t| actives.contains(t))
        };
        match owner {
            Some(c) => {
                let extend = matches!(&current, Some(r) if r.letter == c);
                if !extend {
                    if let Some(r) = current.take() {
                        out.push(r);
                    }
                    current = Some(Region {
                        seg: seg - 1,
                        start: i,
                        end: i,
                        letter: c,
                        vis: 0,
                        typed_vars: Vec::new(),
                        markers: Vec::new(),
                    });
                }
                let r = current.as_mut().unwrap();
                r.end = i + 1;
                if s == c {
                    r.vis += 1;
                } else if univ.is_var(s) {
                    r.typed_vars.push(s);
                } else {
                    r.markers.push(s);
                }
            }
            None => {
                if let Some(r) = current.take() {
                    out.push(r);
                }
                if s == HASH {
                    seg += 1;
                }
            }
        }
    }
    if let Some(r) = current.take() {
        out.push(r);
    }
    out
}

/// Pair every region with its involution partner.  The segments of a state
/// are involution closed as a multiset of traces, so they can be matched so
/// that each segment's partner carries the involuted trace; the regions of
/// matched segments then correspond in reverse order, with opposite
/// polarities and equal shapes.  Returns `partner[i] = j` with the pairing
/// an involution, or `None` if the word is not involution closed, which no
/// reachable state exhibits.
fn region_partners(
    univ: &Universe,
    state: &State,
    regions: &[Region],
) -> Option<Vec<usize>> {
    let segs = state.segments();
    let nfs: Vec<Vec<Sym>> = segs
        .iter()
        .map(|s| normal_form(&state.theta, s))
        .collect();
    let inv_nfs: Vec<Vec<Sym>> = segs
        .iter()
        .map(|s| normal_form(&state.theta, &univ.inv_word(s)))
        .collect();
    const UNMATCHED: usize = usize::MAX;
    let mut seg_partner = vec![UNMATCHED; segs.len()];
    for i in 0..segs.len() {
        if seg_partner[i] != UNMATCHED {
            continue;
        }
        // Segments of one trace class are interchangeable, so a greedy
        // match is as good as any.  A segment may be its own partner.
        let j = (i..segs.len())
            .find(|&j| seg_partner[j] == UNMATCHED && nfs[j] == inv_nfs[i])?;
        seg_partner[i] = j;
        seg_partner[j] = i;
    }
    let mut by_seg: Vec<Vec<usize>> = vec![Vec::new(); segs.len()];
    for (idx, r) in regions.iter().enumerate() {
        by_seg[r.seg].push(idx);
    }
    let mut partner = vec![UNMATCHED; regions.len()];
    for i in 0..segs.len() {
        let (mine, theirs) = (&by_seg[i], &by_seg[seg_partner[i]]);
        if mine.len() != theirs.len() {
            return None;
        }
        for (t, &ra) in mine.iter().enumerate() {
            let rb = theirs[theirs.len() - 1 - t];
            let (x, y) = (&regions[ra], &regions[rb]);
            if x.letter != univ.inv(y.letter)
                || x.vis != y.vis
                || x.typed_vars.len() != y.typed_vars.len()
            {
                return None;
            }
            partner[ra] = rb;
        }
    }
    Some(partner)
}

/// Start a block round if the state shows a visible letter square and the
/// variable contexts are uniform; `None` defers to the other rounds.
pub(crate) fn dispatch_blocks(
    problem: &Problem,
    state: &State,
    cfg: &SearchConfig,
    scratch: &mut ScratchPad,
    incomplete: &mut bool,
) -> Result<Option<Vec<Arc>>> {
    let univ = &problem.univ;
    let w = &state.w;

    // Only letters absorbing their own square can head a block: the round
    // turns squares into longer powers of one constraint.  A square of any
    // other letter is dead material the compression leaves alone.
    let glues = |d: Sym| {
        let mu = state.mu_sym(univ, d);
        mu.mul(mu, univ) == mu
    };
    let square_elems: BTreeSet<Sym> = w
        .windows(2)
        .filter(|p| p[0] == p[1] && p[0] != HASH && univ.is_letter(p[0]))
        .map(|p| rep(univ, p[0]))
        .filter(|&d| glues(d))
        .collect();
    if square_elems.is_empty() {
        return Ok(None);
    }

    // Left context of every variable occurrence; a block round needs them
    // unique per variable so that crossing guesses are well defined.  A
    // popping or pair round restores uniqueness when it fails.
    let mut ctx: BTreeMap<Sym, BTreeSet<Sym>> = BTreeMap::new();
    for i in 1..w.len() {
        if univ.is_var(w[i]) {
            ctx.entry(w[i]).or_default().insert(w[i - 1]);
        }
    }
    if ctx.values().any(|set| set.len() > 1) {
        return Ok(None);
    }
    let ctx: BTreeMap<Sym, Sym> =
        ctx.into_iter().map(|(v, set)| (v, *set.iter().next().unwrap())).collect();

    // Crossing variables: hidden parts spell seed words, so a variable
    // crosses into its neighbouring block exactly when its context is the
    // seed letter its image starts with.  No guess is left open: the only
    // seed letter whose image starts like `d` is `d` itself.
    let chosen: BTreeSet<Sym> = ctx
        .iter()
        .filter(|&(_, &d)| univ.is_a_letter(d) && glues(d))
        .filter(|&(&v, &d)| {
            state.mu_sym(univ, v).first() == state.mu_sym(univ, d).first()
        })
        .map(|(&v, _)| v)
        .collect();

    let mut arcs: Vec<Arc> = Vec::new();
    init_arcs(
        problem, state, &ctx, &square_elems, &chosen, cfg, scratch,
        incomplete, &mut arcs,
    )?;
    Ok(Some(arcs))
}

/// Maximal same-letter runs of `e` in `W`, as `(start, end)` position pairs.
fn runs_of(w: &[Sym], e: Sym) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < w.len() {
        if w[i] == e {
            let start = i;
            while i < w.len() && w[i] == e {
                i += 1;
            }
            out.push((start, i));
        } else {
            i += 1;
        }
    }
    out
}

/// True if the run `[p, q)` of the letter `e` is renamed: long runs always,
/// short ones when a crossing guess continues them on either side.
fn run_renamed(
    univ: &Universe,
    w: &[Sym],
    chosen: &BTreeSet<Sym>,
    p: usize,
    q: usize,
) -> bool {
    if q - p >= 2 {
        return true;
    }
    if q < w.len() && univ.is_var(w[q]) && chosen.contains(&w[q]) {
        return true;
    }
    p > 0 && univ.is_var(w[p - 1]) && chosen.contains(&univ.inv(w[p - 1]))
}

/// Emit the block-initialisation arcs for one crossing guess.
#[allow(clippy::too_many_arguments)]
fn init_arcs(
    problem: &Problem,
    state: &State,
    ctx: &BTreeMap<Sym, Sym>,
    square_elems: &BTreeSet<Sym>,
    chosen: &BTreeSet<Sym>,
    cfg: &SearchConfig,
    scratch: &mut ScratchPad,
    incomplete: &mut bool,
    arcs: &mut Vec<Arc>,
) -> Result<()> {
    let univ = &problem.univ;
    let w = &state.w;

    // Active elements: every squared letter plus the contexts of the guess.
    let mut elems: BTreeSet<Sym> = square_elems.clone();
    for v in chosen {
        elems.insert(rep(univ, ctx[v]));
    }

    // Renamed runs per element, split by polarity.
    let mut renamed: BTreeMap<Sym, Vec<(usize, usize, Sym)>> = BTreeMap::new();
    let mut blocks: BTreeMap<Sym, usize> = BTreeMap::new();
    for &d in &elems {
        let mut list = Vec::new();
        let mut count = 0usize;
        for e in [d, univ.inv(d)] {
            for (p, q) in runs_of(w, e) {
                if run_renamed(univ, w, chosen, p, q) {
                    if e == d {
                        count += 1;
                    }
                    list.push((p, q, e));
                }
            }
        }
        if count == 0 {
            // No renamed block of this element; it cannot take part.
            continue;
        }
        renamed.insert(d, list);
        blocks.insert(d, count);
    }
    if renamed.is_empty() {
        return Ok(());
    }
    // Every chosen variable needs its context element alive: the guess is
    // vacuous otherwise (cannot happen for mirror-consistent words, since
    // the involuted run of a renamed context run is itself renamed).
    if chosen.iter().any(|v| !renamed.contains_key(&rep(univ, ctx[v]))) {
        return Ok(());
    }
    let elems: Vec<Sym> = renamed.keys().copied().collect();

    // One marker-count guess per element, all combinations capped.
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for &d in &elems {
        let mut next = Vec::new();
        'outer: for combo in &combos {
            for k in 1..=blocks[&d] {
                if next.len() >= cfg.max_partitions {
                    *incomplete = true;
                    break 'outer;
                }
                let mut c = combo.clone();
                c.push(k);
                next.push(c);
            }
        }
        combos = next;
    }

    for combo in combos {
        let mut next = state.clone();
        let mut map: MorphMap = BTreeMap::new();
        let mut queue: Vec<(Sym, Sym)> = Vec::new();
        let mut markers: Vec<(Sym, Vec<Sym>)> = Vec::new();
        let mut fresh_of: BTreeMap<Sym, Sym> = BTreeMap::new();
        for (i, &d) in elems.iter().enumerate() {
            let dbar = univ.inv(d);
            let (c, cbar) = scratch.letter_pair();
            fresh_of.insert(d, c);
            fresh_of.insert(dbar, cbar);
            let mu_d = state.mu_sym(univ, d);
            next.b.insert(c);
            next.b.insert(cbar);
            next.mu.insert(c, mu_d);
            next.mu.insert(cbar, mu_d.invol(univ));
            map.insert(c, vec![d]);
            map.insert(cbar, vec![dbar]);
            let mut ms = Vec::new();
            for _ in 0..combo[i] {
                let (m, mbar) = scratch.letter_pair();
                next.b.insert(m);
                next.b.insert(mbar);
                next.mu.insert(m, mu_d);
                next.mu.insert(mbar, mu_d.invol(univ));
                next.theta.insert(m, c);
                next.theta.insert(mbar, cbar);
                map.insert(m, vec![d]);
                map.insert(mbar, vec![dbar]);
                ms.push(m);
            }
            let mbars: Vec<Sym> = ms.iter().map(|&m| univ.inv(m)).collect();
            markers.push((c, ms));
            markers.push((cbar, mbars));
            for &(p, q, e) in &renamed[&d] {
                let fresh = if e == d { c } else { cbar };
                for pos in p..q {
                    next.w[pos] = fresh;
                }
            }
        }
        for &v in chosen {
            queue.push((v, fresh_of[&ctx[&v]]));
        }
        queue.sort();
        markers.sort();
        let phase = normalize(
            univ,
            &next,
            Phase::BlockSplit { queue, markers: markers.clone() },
        );
        arcs.push(Arc {
            label: Label::Morph {
                map,
                kind: MorphKind::BlockInit,
            },
            state: next,
            phase,
        });
    }
    Ok(())
}

/// Arcs splitting the head crossing variable off its block letter: either
/// the image holds one copy of the letter (a plain pop) or at least two (a
/// split with a typed remainder).
pub(crate) fn split_arcs(
    univ: &Universe,
    state: &State,
    queue: &[(Sym, Sym)],
    markers: &[(Sym, Vec<Sym>)],
    scratch: &mut ScratchPad,
) -> Result<Vec<Arc>> {
    let (v, c) = queue[0];
    let rest = &queue[1..];
    let mut arcs = Vec::new();
    let mu_c = state.mu_sym(univ, c);
    let mu_v = state.mu_sym(univ, v);

    // The popped or typed prefix is the maximal power of the letter at the
    // border of the image: what remains cannot start with the letter again.
    // Shorter extractions witness the same solutions with the leftover
    // power spelled by the remainder variable, so they are pure duplicates.
    let maximal = |nu: &Nf| nu.first() != mu_c.first();

    for nu in pop_residuals(univ, mu_c, mu_v).into_iter().filter(maximal) {
        let next = apply_pop(univ, state, v, &[c], nu);
        let phase = normalize(
            univ,
            &next,
            Phase::BlockSplit {
                queue: rest.to_vec(),
                markers: markers.to_vec(),
            },
        );
        arcs.push(Arc {
            label: Label::Subst(SubstKind::Pop {
                var: v,
                prefix: vec![c],
            }),
            state: next,
            phase,
        });
    }

    // sigma(v) starts with at least two copies: the remainder variable
    // carries the rest of the block, one copy stays visible.  Its
    // constraint is the letter's own: a nonempty power of the letter
    // either keeps the letter's normal form or is not reduced at all.
    let prefix_mu = mu_c.mul(mu_c, univ);
    for nu in pop_residuals(univ, prefix_mu, mu_v) {
        let (y, _) = scratch.var_pair();
        let next = apply_split(univ, state, v, c, y, mu_c, nu);
        let phase = normalize(
            univ,
            &next,
            Phase::BlockSplit {
                queue: rest.to_vec(),
                markers: markers.to_vec(),
            },
        );
        arcs.push(Arc {
            label: Label::Subst(SubstKind::Split {
                var: v,
                letter: c,
                new_var: y,
            }),
            state: next,
            phase,
        });
    }
    Ok(arcs)
}

/// Per-class bookkeeping for the length-class partition filters.
#[derive(Clone, Default)]
struct ClassInfo {
    /// Visible length shared by the pure regions of the class, if any.
    pure: Option<usize>,
    /// Largest lower bound `vis + #typed` among the mixed regions.
    mixed_floor: usize,
}

/// Try to add a region `(vis, typed)` to a class.  Pure regions (no typed
/// variables) spell their block completely, so all pure members of a class
/// share one visible length; a region with hidden content only bounds the
/// length from below, each typed variable holding at least one letter.
fn class_admits(info: &mut ClassInfo, vis: usize, typed: usize) -> bool {
    if typed == 0 {
        match info.pure {
            Some(lambda) => vis == lambda,
            None => {
                if info.mixed_floor <= vis {
                    info.pure = Some(vis);
                    true
                } else {
                    false
                }
            }
        }
    } else {
        let floor = vis + typed;
        match info.pure {
            Some(lambda) if floor > lambda => false,
            _ => {
                info.mixed_floor = info.mixed_floor.max(floor);
                true
            }
        }
    }
}

/// Enumerate the partitions of the element's representative regions into
/// exactly `k` length classes that pass the consistency filters.  Classes
/// are numbered by first appearance, which fixes one canonical marker
/// assignment per partition.
fn partitions(regions: &[(usize, usize)], k: usize) -> Vec<Vec<usize>> {
    fn rec(
        regions: &[(usize, usize)],
        k: usize,
        i: usize,
        assign: &mut Vec<usize>,
        classes: &mut Vec<ClassInfo>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == regions.len() {
            // Two classes of fully spelled blocks with one length are the
            // same guess as their merge with one marker fewer, which is
            // enumerated separately: keep the merge only.
            let mut lambdas: Vec<usize> = classes
                .iter()
                .filter(|ci| ci.mixed_floor == 0)
                .filter_map(|ci| ci.pure)
                .collect();
            lambdas.sort_unstable();
            if classes.len() == k && lambdas.windows(2).all(|p| p[0] != p[1]) {
                out.push(assign.clone());
            }
            return;
        }
        // Not enough regions left to open all k classes: prune.
        if classes.len() + (regions.len() - i) < k {
            return;
        }
        let (vis, typed) = regions[i];
        let upper = (classes.len() + 1).min(k);
        for j in 0..upper {
            let fresh = j == classes.len();
            if fresh {
                classes.push(ClassInfo::default());
            }
            let saved = classes[j].clone();
            if class_admits(&mut classes[j], vis, typed) {
                assign[i] = j;
                rec(regions, k, i + 1, assign, classes, out);
            }
            if fresh {
                classes.pop();
            } else {
                classes[j] = saved;
            }
        }
    }
    let mut out = Vec::new();
    let mut assign = vec![0usize; regions.len()];
    let mut classes: Vec<ClassInfo> = Vec::new();
    rec(regions, k, 0, &mut assign, &mut classes, &mut out);
    out
}

/// Arcs placing the length-class markers: one partition of each element's
/// representative regions into classes, one marker written into every
/// representative region and its mirror into the involution partner.
pub(crate) fn mark_arcs(
    univ: &Universe,
    state: &State,
    markers: &[(Sym, Vec<Sym>)],
    cfg: &SearchConfig,
    incomplete: &mut bool,
) -> Result<Vec<Arc>> {
    let actives: BTreeSet<Sym> = markers.iter().map(|&(c, _)| c).collect();
    let regions = compute_regions(univ, state, &actives);
    let marker_table: BTreeMap<Sym, &Vec<Sym>> =
        markers.iter().map(|(c, ms)| (*c, ms)).collect();
    let Some(partner) = region_partners(univ, state, &regions) else {
        *incomplete = true;
        return Ok(Vec::new());
    };

    // Representative regions per element: the ones written in positive
    // polarity.  Each partner carries the mirrored material in the other
    // polarity and inherits the class.
    let mut by_elem: BTreeMap<Sym, Vec<usize>> = BTreeMap::new();
    for (i, r) in regions.iter().enumerate() {
        if rep(univ, r.letter) == r.letter {
            by_elem.entry(r.letter).or_default().push(i);
        }
    }

    // Every element must have regions to mark; a missing element means its
    // runs collapsed, which contradicts the marker allocation.
    let elems: Vec<Sym> = actives.iter().copied().filter(|&c| c < univ.inv(c)).collect();
    let mut per_elem: Vec<(Sym, Vec<Vec<usize>>)> = Vec::new();
    for &c in &elems {
        let Some(idxs) = by_elem.get(&c) else {
            return Ok(Vec::new());
        };
        let shaped: Vec<(usize, usize)> = idxs
            .iter()
            .map(|&i| (regions[i].vis, regions[i].typed_vars.len()))
            .collect();
        let k = marker_table[&c].len();
        let parts = partitions(&shaped, k);
        if parts.is_empty() {
            return Ok(Vec::new());
        }
        per_elem.push((c, parts));
    }

    // All combinations of per-element partitions, capped.
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for (_, parts) in &per_elem {
        let mut next = Vec::new();
        'outer: for combo in &combos {
            for pi in 0..parts.len() {
                if next.len() >= cfg.max_partitions {
                    *incomplete = true;
                    break 'outer;
                }
                let mut c = combo.clone();
                c.push(pi);
                next.push(c);
            }
        }
        combos = next;
    }

    let letters: Vec<Sym> = elems.clone();
    let mut arcs = Vec::new();
    for combo in combos {
        let mut w = state.w.clone();
        for (ei, (c, parts)) in per_elem.iter().enumerate() {
            let part = &parts[combo[ei]];
            let ms = marker_table[c];
            for (ri, &i) in by_elem[c].iter().enumerate() {
                let m = ms[part[ri]];
                write_marker(state, &mut w, &regions[i], m);
                write_marker(state, &mut w, &regions[partner[i]], univ.inv(m));
            }
        }
        let mut next = state.clone();
        next.w = w;
        let mut map: MorphMap = BTreeMap::new();
        for (c, ms) in markers {
            for &m in ms {
                map.insert(m, vec![*c]);
            }
        }
        let phase = normalize(
            univ,
            &next,
            fresh_loop_phase(univ, &next, letters.clone()),
        );
        arcs.push(Arc {
            label: Label::Morph {
                map,
                kind: MorphKind::BlockMark,
            },
            state: next,
            phase,
        });
    }
    Ok(arcs)
}

/// Replace one visible letter of the region with the marker.  The region's
/// material is one commutation clique, so the position is immaterial; the
/// first visible copy is the canonical choice.
fn write_marker(state: &State, w: &mut [Sym], r: &Region, m: Sym) {
    let pos = (r.start..r.end)
        .find(|&p| state.w[p] == r.letter)
        .expect("a marked region has a visible letter");
    w[pos] = m;
}

/// Retire a block letter whose last visible copy vanished and whose typed
/// variables are gone: the letter pair leaves `B` and its markers become
/// ordinary letters.  Returns `None` when the letter is still live.
fn rider(univ: &Universe, state: &State, c: Sym) -> Option<State> {
    let cbar = univ.inv(c);
    if state.w.iter().any(|&s| s == c || s == cbar) {
        return None;
    }
    let typed_var = state
        .x
        .iter()
        .any(|v| matches!(state.theta.get(v), Some(&t) if t == c || t == cbar));
    if typed_var {
        return None;
    }
    let mut next = state.clone();
    next.b.remove(&c);
    next.b.remove(&cbar);
    next.mu.remove(&c);
    next.mu.remove(&cbar);
    next.theta.retain(|_, &mut t| t != c && t != cbar);
    Some(next)
}

/// Arcs of the block loop for the head letter of `letters`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn loop_arcs(
    problem: &Problem,
    state: &State,
    letters: &[Sym],
    stage: &Stage,
    cfg: &SearchConfig,
    scratch: &mut ScratchPad,
    incomplete: &mut bool,
) -> Result<Vec<Arc>> {
    let univ = &problem.univ;
    let c = letters[0];
    let cbar = univ.inv(c);
    let actives: BTreeSet<Sym> = [c, cbar].into_iter().collect();

    match stage {
        // Guess the parity of each typed variable's hidden content; odd
        // ones pop one copy so that all hidden content is even afterwards.
        Stage::Parity { queue } => {
            let v = queue[0];
            let rest = &queue[1..];
            let skip_phase = normalize(
                univ,
                state,
                Phase::BlockLoop {
                    letters: letters.to_vec(),
                    stage: Stage::Parity { queue: rest.to_vec() },
                },
            );
            let mut arcs = expand(problem, state, &skip_phase, cfg, scratch, incomplete)?;
            let t = state.theta[&v];
            let mu_t = state.mu_sym(univ, t);
            for nu in pop_residuals(univ, mu_t, state.mu_sym(univ, v)) {
                if nu != Nf::One && nu != mu_t {
                    continue;
                }
                let next = apply_pop(univ, state, v, &[t], nu);
                let phase = normalize(
                    univ,
                    &next,
                    Phase::BlockLoop {
                        letters: letters.to_vec(),
                        stage: Stage::Parity { queue: rest.to_vec() },
                    },
                );
                arcs.push(Arc {
                    label: Label::Subst(SubstKind::Pop {
                        var: v,
                        prefix: vec![t],
                    }),
                    state: next,
                    phase,
                });
            }
            Ok(arcs)
        }

        // The visible parity of each marker's regions is observable: even
        // regions wait for the halving, odd regions push one visible copy
        // into the marker.  Mixed parities refute the class guess.
        Stage::Odd { queue } => {
            let m = queue[0];
            let rest = &queue[1..];
            let regions = compute_regions(univ, state, &actives);
            let mbar = univ.inv(m);
            let mine: Vec<&Region> = regions
                .iter()
                .filter(|r| r.markers.contains(&m) || r.markers.contains(&mbar))
                .collect();
            let odd = mine.iter().filter(|r| r.vis % 2 == 1).count();
            if odd == 0 {
                let phase = normalize(
                    univ,
                    state,
                    Phase::BlockLoop {
                        letters: letters.to_vec(),
                        stage: Stage::Odd { queue: rest.to_vec() },
                    },
                );
                return expand(problem, state, &phase, cfg, scratch, incomplete);
            }
            if odd != mine.len() {
                return Ok(Vec::new());
            }
            // Marking writes one marker per region and regions never merge
            // during the loop, so a repeated marker cannot arise; refute
            // defensively rather than emit an inconsistent arc.
            if mine.iter().any(|r| {
                r.markers.iter().filter(|&&s| s == m || s == mbar).count() != 1
            }) {
                return Ok(Vec::new());
            }
            // All odd: every region loses one visible copy into its marker,
            // which henceforth spells that copy itself.
            let t = state.theta[&m];
            let mu_m = state.mu_sym(univ, m);
            if state.mu_sym(univ, t).mul(mu_m, univ) != mu_m {
                // The letter does not absorb its own square; such blocks
                // cannot be shrunk by this machinery.
                *incomplete = true;
                return Ok(Vec::new());
            }
            let mut dropped: BTreeSet<usize> = BTreeSet::new();
            for r in &mine {
                let pos = (r.start..r.end)
                    .find(|&p| state.w[p] == r.letter)
                    .expect("an odd region has a visible letter");
                dropped.insert(pos);
            }
            let mut next = state.clone();
            next.w = state
                .w
                .iter()
                .enumerate()
                .filter(|(i, _)| !dropped.contains(i))
                .map(|(_, &s)| s)
                .collect();
            if let Some(after) = rider(univ, &next, c) {
                next = after;
            }
            let mut map: MorphMap = BTreeMap::new();
            map.insert(m, vec![t, m]);
            map.insert(mbar, vec![mbar, univ.inv(t)]);
            let phase = normalize(
                univ,
                &next,
                Phase::BlockLoop {
                    letters: letters.to_vec(),
                    stage: Stage::Odd { queue: rest.to_vec() },
                },
            );
            Ok(vec![Arc {
                label: Label::Morph {
                    map,
                    kind: MorphKind::BlockOdd,
                },
                state: next,
                phase,
            }])
        }

        // Every typed variable pops two copies: halving must shrink the
        // hidden content in step with the visible one.
        Stage::Pad { queue } => {
            let v = queue[0];
            let rest = &queue[1..];
            let t = state.theta[&v];
            let mu_t = state.mu_sym(univ, t);
            let prefix_mu = mu_t.mul(mu_t, univ);
            let mut arcs = Vec::new();
            for nu in pop_residuals(univ, prefix_mu, state.mu_sym(univ, v)) {
                if nu != Nf::One && nu != mu_t {
                    continue;
                }
                let next = apply_pop(univ, state, v, &[t, t], nu);
                let phase = normalize(
                    univ,
                    &next,
                    Phase::BlockLoop {
                        letters: letters.to_vec(),
                        stage: Stage::Pad { queue: rest.to_vec() },
                    },
                );
                arcs.push(Arc {
                    label: Label::Subst(SubstKind::Pop {
                        var: v,
                        prefix: vec![t, t],
                    }),
                    state: next,
                    phase,
                });
            }
            Ok(arcs)
        }

        // Halve the visible content of every region of the letter.
        Stage::Halve => {
            let regions = compute_regions(univ, state, &actives);
            if regions.iter().any(|r| r.vis % 2 == 1) {
                return Ok(Vec::new());
            }
            let mu_c = state.mu_sym(univ, c);
            if mu_c.mul(mu_c, univ) != mu_c {
                *incomplete = true;
                return Ok(Vec::new());
            }
            let mut dropped: BTreeSet<usize> = BTreeSet::new();
            for r in &regions {
                let mut seen = 0usize;
                for p in r.start..r.end {
                    if state.w[p] == r.letter {
                        seen += 1;
                        if seen % 2 == 0 {
                            dropped.insert(p);
                        }
                    }
                }
            }
            let mut next = state.clone();
            next.w = state
                .w
                .iter()
                .enumerate()
                .filter(|(i, _)| !dropped.contains(i))
                .map(|(_, &s)| s)
                .collect();
            let mut map: MorphMap = BTreeMap::new();
            map.insert(c, vec![c, c]);
            map.insert(cbar, vec![cbar, cbar]);
            let phase = normalize(
                univ,
                &next,
                Phase::BlockLoop {
                    letters: letters.to_vec(),
                    stage: Stage::Parity {
                        queue: typed_elements(univ, &next, c),
                    },
                },
            );
            Ok(vec![Arc {
                label: Label::Morph {
                    map,
                    kind: MorphKind::BlockHalve,
                },
                state: next,
                phase,
            }])
        }
    }
}
