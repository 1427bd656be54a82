//! Arc labels of the solution automaton and edge-level validation.
//!
//! Every arc is one of two shapes. A *substitution* arc rewrites variables
//! (popping a short prefix, erasing, or shedding a typed remainder) or
//! shrinks the alphabet without touching `W`; its label is the empty
//! morphism, so it contributes nothing to the words the automaton spells.
//! A *morphism* arc maps letters of the target state into words over the
//! source state, with `W_src` equal to the image of `W_dst` as a trace;
//! composing these labels along a path from an initial state to the final
//! state turns the seed word into solutions.
//!
//! [`validate_edge`] re-derives every claimed relation between the two
//! endpoint states instead of trusting the code that built them: words are
//! reconstructed or compared as traces, constraint values are recomputed,
//! and compression arcs must strictly decrease the lexicographic weight.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::alphabet::{Nf, Sym, Universe, Word, HASH};
use crate::equation::{weight4, State};
use crate::traces;
use crate::{Error, Result};

/// Letter images of a morphism arc; letters not listed map to themselves.
pub type MorphMap = BTreeMap<Sym, Word>;

/// The substitution arcs.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum SubstKind {
    /// `X -> uX` with `1 <= |u| <= 2`; the partner emits the mirrored
    /// suffix. For typed variables `u` is a power of the type letter.
    Pop { var: Sym, prefix: Word },
    /// `X -> 1`, legal only when `mu(X) = One`. May additionally retire
    /// letters whose last hidden occurrences vanished with the variable.
    Erase { var: Sym },
    /// `X -> c X' X` with a fresh `X'` typed by `c`: the variable sheds
    /// the remainder of a letter block it starts inside.
    Split { var: Sym, letter: Sym, new_var: Sym },
    /// Drop non-occurring letters from `B`; `W` is unchanged.
    Reduce { dropped: Vec<Sym> },
}

/// What a morphism arc does; drives kind-specific validation and rendering.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum MorphKind {
    /// Rename visible letter blocks to fresh typed copies, allocating the
    /// length-class markers of the round into the alphabet.
    BlockInit,
    /// Replace one visible block letter per block with the marker of its
    /// guessed length class.
    BlockMark,
    /// `c_lambda -> c c_lambda` for the classes of odd block length.
    BlockOdd,
    /// `c -> cc`: halve all blocks of `c`.
    BlockHalve,
    /// `c -> ab`: compress one two-letter factor everywhere.
    Pair,
    /// Map the seed letters onto the segments of a variable-free state.
    Final,
}

/// One arc label.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Label {
    Subst(SubstKind),
    Morph { map: MorphMap, kind: MorphKind },
    /// A base label composed with a bijective renaming of generated
    /// symbols: `rename` carries the stored target state onto the state the
    /// base label actually produces. Storing every state in a canonical
    /// form keeps the state space finite; this wrapper records how an
    /// individual arc deviates from the canonical names.
    Renamed {
        rename: BTreeMap<Sym, Sym>,
        base: Box<Label>,
    },
}

impl Label {
    /// True for the arcs that carry a letter morphism (the others label
    /// the automaton edge with the identity).
    pub fn is_morph(&self) -> bool {
        matches!(self, Label::Morph { .. })
    }

    /// Human-readable form for traces and DOT output.
    pub fn display(&self, univ: &Universe) -> String {
        match self {
            Label::Subst(SubstKind::Pop { var, prefix }) => format!(
                "{} -> {}{}",
                univ.name(*var),
                univ.display_word(prefix),
                univ.name(*var)
            ),
            Label::Subst(SubstKind::Erase { var }) => {
                format!("{} -> 1", univ.name(*var))
            }
            Label::Subst(SubstKind::Split { var, letter, new_var }) => format!(
                "{} -> {}{}{}",
                univ.name(*var),
                univ.name(*letter),
                univ.name(*new_var),
                univ.name(*var)
            ),
            Label::Subst(SubstKind::Reduce { dropped }) => {
                let names: Vec<String> = dropped.iter().map(|&s| univ.name(s)).collect();
                format!("drop {}", names.join(","))
            }
            Label::Morph { map, kind } => {
                let parts: Vec<String> = map
                    .iter()
                    .map(|(k, v)| format!("{}={}", univ.name(*k), univ.display_word(v)))
                    .collect();
                format!("{kind:?}[{}]", parts.join(" "))
            }
            Label::Renamed { rename, base } => {
                let parts: Vec<String> = rename
                    .iter()
                    .map(|(k, v)| format!("{}~{}", univ.name(*k), univ.name(*v)))
                    .collect();
                format!("{} ({})", base.display(univ), parts.join(" "))
            }
        }
    }
}

/// Apply a symbol renaming to a whole state. Constraint values mention
/// original letters only, so they pass through unchanged.
pub fn rename_state(rename: &BTreeMap<Sym, Sym>, state: &State) -> State {
    let map = |s: Sym| *rename.get(&s).unwrap_or(&s);
    State {
        w: state.w.iter().map(|&s| map(s)).collect(),
        b: state.b.iter().map(|&s| map(s)).collect(),
        x: state.x.iter().map(|&s| map(s)).collect(),
        theta: state.theta.iter().map(|(&k, &v)| (map(k), map(v))).collect(),
        mu: state.mu.iter().map(|(&k, &v)| (map(k), v)).collect(),
    }
}

/// Rewrite a word by splicing in images for the mapped symbols; symbols
/// outside the map copy over. Serves both substitution reconstruction and
/// morphism application.
pub fn word_image(map: &BTreeMap<Sym, Word>, w: &[Sym]) -> Word {
    let mut out = Vec::with_capacity(w.len());
    for &s in w {
        match map.get(&s) {
            Some(img) => out.extend_from_slice(img),
            None => out.push(s),
        }
    }
    out
}

/// The two-sided substitution map of a pop: `X -> uX`, partner mirrored.
pub fn pop_map(univ: &Universe, var: Sym, prefix: &[Sym]) -> BTreeMap<Sym, Word> {
    let mut image: Word = prefix.to_vec();
    image.push(var);
    let partner = univ.inv(var);
    let mut mirror: Word = vec![partner];
    mirror.extend(univ.inv_word(prefix));
    BTreeMap::from([(var, image), (partner, mirror)])
}

/// The two-sided substitution map of a split: `X -> c X' X`.
pub fn split_map(univ: &Universe, var: Sym, letter: Sym, new_var: Sym) -> BTreeMap<Sym, Word> {
    let partner = univ.inv(var);
    BTreeMap::from([
        (var, vec![letter, new_var, var]),
        (partner, vec![partner, univ.inv(new_var), univ.inv(letter)]),
    ])
}

/// All constraint values `nu` with `mu_prefix * nu = mu_var`: the possible
/// constraints of the variable remainder after popping a prefix with value
/// `mu_prefix`. Finite by enumeration over the original letters.
pub fn pop_residuals(univ: &Universe, mu_prefix: Nf, mu_var: Nf) -> Vec<Nf> {
    let mut out = Vec::new();
    let mut candidates = vec![Nf::One];
    for p in univ.a_letters() {
        for q in univ.a_letters() {
            candidates.push(Nf::Pair(p, q));
        }
    }
    for nu in candidates {
        if mu_prefix.mul(nu, univ) == mu_var {
            out.push(nu);
        }
    }
    out
}

/// Build the state after `X -> uX`. The caller chooses the residual
/// constraint for `X` from [`pop_residuals`].
pub fn apply_pop(univ: &Universe, state: &State, var: Sym, prefix: &[Sym], residual: Nf) -> State {
    let mut next = state.clone();
    next.w = word_image(&pop_map(univ, var, prefix), &state.w);
    next.mu.insert(var, residual);
    next.mu.insert(univ.inv(var), residual.invol(univ));
    next
}

/// Build the state after `X -> 1`, also retiring the letters in `drop`
/// (with their constraint and type entries) when the erasure removed the
/// last hidden occurrences of a block letter.
pub fn apply_erase(univ: &Universe, state: &State, var: Sym, drop: &[Sym]) -> State {
    let partner = univ.inv(var);
    let mut next = state.clone();
    next.w.retain(|&s| s != var && s != partner);
    next.x.remove(&var);
    next.x.remove(&partner);
    next.mu.remove(&var);
    next.mu.remove(&partner);
    next.theta.remove(&var);
    next.theta.remove(&partner);
    for &d in drop {
        next.b.remove(&d);
        next.mu.remove(&d);
        next.theta.remove(&d);
    }
    next.theta.retain(|_, c| !drop.contains(c));
    next
}

/// Build the state after `X -> c X' X` with `theta(X') = c`.
pub fn apply_split(
    univ: &Universe,
    state: &State,
    var: Sym,
    letter: Sym,
    new_var: Sym,
    mu_new: Nf,
    residual: Nf,
) -> State {
    let new_partner = univ.inv(new_var);
    let mut next = state.clone();
    next.w = word_image(&split_map(univ, var, letter, new_var), &state.w);
    next.x.insert(new_var);
    next.x.insert(new_partner);
    next.theta.insert(new_var, letter);
    next.theta.insert(new_partner, univ.inv(letter));
    next.mu.insert(new_var, mu_new);
    next.mu.insert(new_partner, mu_new.invol(univ));
    next.mu.insert(var, residual);
    next.mu.insert(univ.inv(var), residual.invol(univ));
    next
}

/// Build the state after dropping non-occurring letters.
pub fn apply_reduce(state: &State, dropped: &[Sym]) -> State {
    let mut next = state.clone();
    for &d in dropped {
        next.b.remove(&d);
        next.mu.remove(&d);
    }
    next
}

/// Check one arc against both endpoint states. Assumes each state has
/// already passed [`crate::equation::validate_state`]; this checks the
/// *relation* between them claimed by the label.
pub fn validate_edge(univ: &Universe, src: &State, dst: &State, label: &Label) -> Result<()> {
    let fail = |msg: String| -> Result<()> { Err(Error::Invariant(msg)) };
    match label {
        Label::Subst(SubstKind::Pop { var, prefix }) => {
            if !src.x.contains(var) {
                return fail(format!("pop of unknown variable {}", univ.name(*var)));
            }
            if prefix.is_empty() || prefix.len() > 2 {
                return fail(format!("pop prefix length {}", prefix.len()));
            }
            for &s in prefix {
                if s == HASH || !src.b.contains(&s) {
                    return fail(format!("pop prefix uses {}", univ.name(s)));
                }
            }
            if let Some(&c) = src.theta.get(var) {
                if prefix.iter().any(|&s| s != c) {
                    return fail(format!(
                        "typed variable {} must pop its type letter",
                        univ.name(*var)
                    ));
                }
            }
            if dst.b != src.b || dst.x != src.x || dst.theta != src.theta {
                return fail("pop must keep B, X and theta".into());
            }
            let expect = word_image(&pop_map(univ, *var, prefix), &src.w);
            if !traces::trace_eq(&dst.theta, &dst.w, &expect) {
                return fail("pop produced the wrong word".into());
            }
            let glued = src
                .mu_word(univ, prefix)
                .mul(dst.mu_sym(univ, *var), univ);
            if glued != src.mu_sym(univ, *var) {
                return fail("pop residual constraint does not glue back".into());
            }
            for (&k, &v) in &src.mu {
                if k != *var && k != univ.inv(*var) && dst.mu.get(&k) != Some(&v) {
                    return fail(format!("pop changed mu({})", univ.name(k)));
                }
            }
            Ok(())
        }
        Label::Subst(SubstKind::Erase { var }) => {
            let partner = univ.inv(*var);
            if !src.x.contains(var) {
                return fail(format!("erase of unknown variable {}", univ.name(*var)));
            }
            if src.mu_sym(univ, *var) != Nf::One {
                return fail("erase requires an empty-image constraint".into());
            }
            let expect: Word = src
                .w
                .iter()
                .copied()
                .filter(|&s| s != *var && s != partner)
                .collect();
            if !traces::trace_eq(&dst.theta, &dst.w, &expect) {
                return fail("erase produced the wrong word".into());
            }
            let mut x = src.x.clone();
            x.remove(var);
            x.remove(&partner);
            if dst.x != x {
                return fail("erase must remove exactly the variable pair".into());
            }
            if !dst.b.is_subset(&src.b) {
                return fail("erase cannot add letters".into());
            }
            let dropped: Vec<Sym> = src.b.difference(&dst.b).copied().collect();
            for &d in &dropped {
                if d == HASH || univ.is_a_letter(d) {
                    return fail(format!("erase cannot drop {}", univ.name(d)));
                }
                if dst.w.contains(&d) {
                    return fail(format!("erase dropped occurring letter {}", univ.name(d)));
                }
            }
            for (&k, &v) in &src.theta {
                let keep = k != *var && k != partner && !dropped.contains(&k) && !dropped.contains(&v);
                if keep != (dst.theta.get(&k) == Some(&v)) {
                    return fail("erase mangled the type relation".into());
                }
            }
            for k in dst.theta.keys() {
                if !src.theta.contains_key(k) {
                    return fail("erase added a type".into());
                }
            }
            for (&k, &v) in &src.mu {
                let keep = k != *var && k != partner && !dropped.contains(&k);
                if keep && dst.mu.get(&k) != Some(&v) {
                    return fail(format!("erase changed mu({})", univ.name(k)));
                }
            }
            Ok(())
        }
        Label::Subst(SubstKind::Split { var, letter, new_var }) => {
            if !src.x.contains(var) {
                return fail(format!("split of unknown variable {}", univ.name(*var)));
            }
            if src.theta.contains_key(var) {
                return fail("split applies to untyped variables only".into());
            }
            if *letter == HASH || !src.b.contains(letter) {
                return fail("split letter must belong to B".into());
            }
            if src.x.contains(new_var) || !dst.x.contains(new_var) || !univ.is_var(*new_var) {
                return fail("split remainder must be a fresh variable".into());
            }
            let mut x = src.x.clone();
            x.insert(*new_var);
            x.insert(univ.inv(*new_var));
            if dst.x != x || dst.b != src.b {
                return fail("split must add exactly the remainder pair".into());
            }
            let mut theta = src.theta.clone();
            theta.insert(*new_var, *letter);
            theta.insert(univ.inv(*new_var), univ.inv(*letter));
            if dst.theta != theta {
                return fail("split must type the remainder by its letter".into());
            }
            let expect = word_image(&split_map(univ, *var, *letter, *new_var), &src.w);
            if !traces::trace_eq(&dst.theta, &dst.w, &expect) {
                return fail("split produced the wrong word".into());
            }
            let mu_new = dst.mu_sym(univ, *new_var);
            if mu_new != Nf::One && mu_new != src.mu_sym(univ, *letter) {
                return fail("split remainder constraint must be One or the letter's".into());
            }
            let glued = src
                .mu_sym(univ, *letter)
                .mul(mu_new, univ)
                .mul(dst.mu_sym(univ, *var), univ);
            if glued != src.mu_sym(univ, *var) {
                return fail("split constraints do not glue back".into());
            }
            for (&k, &v) in &src.mu {
                if k != *var && k != univ.inv(*var) && dst.mu.get(&k) != Some(&v) {
                    return fail(format!("split changed mu({})", univ.name(k)));
                }
            }
            Ok(())
        }
        Label::Subst(SubstKind::Reduce { dropped }) => {
            if dropped.is_empty() {
                return fail("reduce must drop something".into());
            }
            if dst.w != src.w || dst.x != src.x {
                return fail("reduce must keep W and X".into());
            }
            if !src.theta.is_empty() || !dst.theta.is_empty() {
                return fail("reduce only runs on untyped states".into());
            }
            let mut b = src.b.clone();
            for &d in dropped {
                if d == HASH || univ.is_a_letter(d) {
                    return fail(format!("reduce cannot drop {}", univ.name(d)));
                }
                if src.w.contains(&d) {
                    return fail(format!("reduce dropped occurring letter {}", univ.name(d)));
                }
                if !b.remove(&d) {
                    return fail(format!("reduce dropped unknown letter {}", univ.name(d)));
                }
            }
            if dst.b != b {
                return fail("reduce alphabet mismatch".into());
            }
            for (&k, &v) in &src.mu {
                if !dropped.contains(&k) && dst.mu.get(&k) != Some(&v) {
                    return fail(format!("reduce changed mu({})", univ.name(k)));
                }
            }
            if weight4(dst) >= weight4(src) {
                return fail("reduce did not decrease the weight".into());
            }
            Ok(())
        }
        Label::Morph { map, kind } => {
            if dst.x != src.x {
                return fail("morphism arcs keep the variable set".into());
            }
            for &v in &dst.x {
                if dst.mu_sym(univ, v) != src.mu_sym(univ, v) {
                    return fail(format!("morphism changed mu({})", univ.name(v)));
                }
                if dst.theta.get(&v) != src.theta.get(&v) {
                    return fail(format!("morphism retyped {}", univ.name(v)));
                }
            }
            if map.is_empty() {
                return fail("empty morphism".into());
            }
            for (&k, img) in map {
                if k == HASH || !univ.is_letter(k) {
                    return fail(format!("morphism maps non-letter {}", univ.name(k)));
                }
                if !dst.b.contains(&k) {
                    return fail(format!("morphism key {} outside target B", univ.name(k)));
                }
                for &s in img {
                    if s == HASH || !src.b.contains(&s) || !univ.is_letter(s) {
                        return fail(format!("morphism image uses {}", univ.name(s)));
                    }
                }
                // Involution compatibility of the morphism itself.
                let mirror = map.get(&univ.inv(k)).cloned().unwrap_or_else(|| vec![univ.inv(k)]);
                if mirror != univ.inv_word(img) {
                    return fail(format!("morphism not involution compatible at {}", univ.name(k)));
                }
                // Constraint compatibility: mu_dst = mu_src of the image.
                // Seed letters carry placeholders, so they are exempt.
                if !univ.is_seed(k) && dst.mu_sym(univ, k) != src.mu_word(univ, img) {
                    return fail(format!("morphism constraint mismatch at {}", univ.name(k)));
                }
            }
            // The morphism must respect the target's commutation relations.
            for (&s, &c) in &dst.theta {
                let img_s = map.get(&s).cloned().unwrap_or_else(|| vec![s]);
                let img_c = map.get(&c).cloned().unwrap_or_else(|| vec![c]);
                let mut fwd = img_s.clone();
                fwd.extend_from_slice(&img_c);
                let mut bwd = img_c;
                bwd.extend_from_slice(&img_s);
                if !traces::trace_eq(&src.theta, &fwd, &bwd) {
                    return fail(format!(
                        "morphism breaks commutation of {} with its type",
                        univ.name(s)
                    ));
                }
            }
            // The defining property: W_src is the image of W_dst.
            let image = word_image(map, &dst.w);
            if !traces::trace_eq(&src.theta, &src.w, &image) {
                return fail("morphism image of the target word differs from the source".into());
            }
            match kind {
                MorphKind::BlockInit => {
                    if !dst.b.is_superset(&src.b) {
                        return fail("block init cannot drop letters".into());
                    }
                    let fresh: Vec<Sym> = dst.b.difference(&src.b).copied().collect();
                    for &k in map.keys() {
                        if !fresh.contains(&k) {
                            return fail("block init must map fresh letters only".into());
                        }
                    }
                    for &f in &fresh {
                        let img = map
                            .get(&f)
                            .ok_or_else(|| Error::Invariant("unmapped fresh letter".into()))?;
                        if img.len() != 1 || !src.b.contains(&img[0]) {
                            return fail("block init renames single letters".into());
                        }
                    }
                    // New types pair a marker with its block letter; both
                    // rename to the same original.
                    for (&s, &c) in &dst.theta {
                        if src.theta.get(&s) == Some(&c) {
                            continue;
                        }
                        if !fresh.contains(&s) || !fresh.contains(&c) || map[&s] != map[&c] {
                            return fail("block init type entries must pair fresh letters".into());
                        }
                    }
                }
                MorphKind::BlockMark => {
                    if dst.b != src.b || dst.theta != src.theta || dst.w.len() != src.w.len() {
                        return fail("marking keeps the alphabet, types and length".into());
                    }
                    for (&k, img) in map {
                        let Some(&c) = src.theta.get(&k) else {
                            return fail("marking renames typed markers only".into());
                        };
                        if img != &vec![c] {
                            return fail("markers must rename onto their type letter".into());
                        }
                        if src.w.contains(&k) {
                            return fail("marking places markers for the first time".into());
                        }
                    }
                }
                MorphKind::BlockOdd => {
                    if !dst.b.is_subset(&src.b) {
                        return fail("odd-marking cannot add letters".into());
                    }
                    for (&k, img) in map {
                        let Some(&c) = src.theta.get(&k) else {
                            return fail("odd-marking applies to typed markers".into());
                        };
                        // One polarity prepends, the mirrored one appends.
                        if img != &vec![c, k] && img != &vec![k, c] {
                            return fail("odd-marking must absorb one type letter".into());
                        }
                    }
                }
                MorphKind::BlockHalve => {
                    if dst.b != src.b || dst.theta != src.theta {
                        return fail("halving keeps the alphabet and types".into());
                    }
                    for (&k, img) in map {
                        if img != &vec![k, k] {
                            return fail("halving must double its letters".into());
                        }
                    }
                }
                MorphKind::Pair => {
                    if !src.theta.is_empty() || !dst.theta.is_empty() {
                        return fail("pair compression runs on untyped states".into());
                    }
                    let fresh: Vec<Sym> = dst.b.difference(&src.b).copied().collect();
                    if fresh.len() != 2 || map.len() != 2 {
                        return fail("pair compression introduces one letter pair".into());
                    }
                    for &k in map.keys() {
                        if !fresh.contains(&k) {
                            return fail("pair compression maps its fresh pair only".into());
                        }
                        if map[&k].len() != 2 {
                            return fail("pair compression images have length two".into());
                        }
                    }
                }
                MorphKind::Final => {
                    if !src.var_free() {
                        return fail("final arcs leave variable-free states".into());
                    }
                    let total: usize = map.values().map(|v| v.len()).sum();
                    if total > src.w.len() {
                        return fail("final morphism too large".into());
                    }
                    if map.iter().all(|(k, v)| v.len() == 1 && v[0] == *k) {
                        return fail("final morphism must not be the identity".into());
                    }
                    for seg in dst.segments() {
                        if seg.len() != 1 || !map.contains_key(&seg[0]) {
                            return fail("final states hold one seed letter per segment".into());
                        }
                    }
                }
            }
            if *kind != MorphKind::Final && weight4(dst) >= weight4(src) {
                return fail(format!("{kind:?} did not decrease the weight"));
            }
            Ok(())
        }
        Label::Renamed { rename, base } => {
            if matches!(**base, Label::Renamed { .. }) {
                return fail("renamings do not nest".into());
            }
            let mut images: std::collections::BTreeSet<Sym> = std::collections::BTreeSet::new();
            for (&k, &v) in rename {
                if k == v {
                    return fail("renaming holds an identity entry".into());
                }
                if k.0 < univ.frozen_end() {
                    return fail(format!("renaming touches frozen symbol {}", univ.name(k)));
                }
                if univ.kind(k) != univ.kind(v) {
                    return fail(format!("renaming changes the kind of {}", univ.name(k)));
                }
                if !images.insert(v) {
                    return fail("renaming is not injective".into());
                }
                if rename.get(&univ.inv(k)) != Some(&univ.inv(v)) {
                    return fail(format!(
                        "renaming not involution compatible at {}",
                        univ.name(k)
                    ));
                }
            }
            let raw = rename_state(rename, dst);
            validate_edge(univ, src, &raw, base)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::HASH;
    use crate::equation::{validate_state, Validation};
    use std::collections::BTreeSet;

    // aX = aaab with mu(X) = (a, b): the honest initial assignment.
    fn pinned_fixture() -> (crate::equation::Problem, Sym, Sym, Sym, State) {
        let (p, a, b, x) = crate::equation::tests::fixture();
        let mut st = p.initial.clone();
        st.mu.insert(x, Nf::Pair(a, b));
        st.mu.insert(p.univ.inv(x), Nf::Pair(a, b).invol(&p.univ));
        (p, a, b, x, st)
    }

    #[test]
    fn residuals_after_popping_a() {
        let (p, a, b, _, _) = pinned_fixture();
        let u = &p.univ;
        let got = pop_residuals(u, Nf::Pair(a, a), Nf::Pair(a, b));
        // (a,a) * nu = (a,b) forces nu = (p, b) with p != a^.
        let expect = vec![
            Nf::Pair(a, b),
            Nf::Pair(b, b),
            Nf::Pair(u.inv(b), b),
        ];
        assert_eq!(got.len(), 3);
        for nu in &expect {
            assert!(got.contains(nu), "missing {nu:?}");
        }
        // Nothing glues an empty remainder onto a mismatched target.
        assert!(pop_residuals(u, Nf::Pair(a, a), Nf::One).is_empty());
    }

    #[test]
    fn pop_arc_validates_and_rejects_tampering() {
        let (p, a, b, x, st) = pinned_fixture();
        let u = &p.univ;
        let dst = apply_pop(u, &st, x, &[a], Nf::Pair(a, b));
        validate_state(u, &dst, &p.bounds, Validation::Fast).unwrap();
        let label = Label::Subst(SubstKind::Pop { var: x, prefix: vec![a] });
        validate_edge(u, &st, &dst, &label).unwrap();
        // Occurrences rewrote on both polarities.
        assert_eq!(dst.w.iter().filter(|&&s| s == a).count(), st.w.iter().filter(|&&s| s == a).count() + 2);

        // Wrong residual: does not glue back to (a, b).
        let bad = apply_pop(u, &st, x, &[a], Nf::Pair(a, a));
        assert!(validate_edge(u, &st, &bad, &label).is_err());
        // Tampered word.
        let mut bad = dst.clone();
        bad.w.swap(1, 2);
        assert!(validate_edge(u, &st, &bad, &label).is_err());
        // Prefix outside B.
        let label_bad = Label::Subst(SubstKind::Pop { var: x, prefix: vec![HASH] });
        assert!(validate_edge(u, &st, &dst, &label_bad).is_err());
    }

    #[test]
    fn erase_arc_requires_one_constraint() {
        let (p, _, _, x, mut st) = pinned_fixture();
        let u = &p.univ;
        let label = Label::Subst(SubstKind::Erase { var: x });
        // With mu(X) = (a,b) erasing is illegal.
        let dst = apply_erase(u, &st, x, &[]);
        assert!(validate_edge(u, &st, &dst, &label).is_err());
        st.mu.insert(x, Nf::One);
        st.mu.insert(u.inv(x), Nf::One);
        let dst = apply_erase(u, &st, x, &[]);
        validate_edge(u, &st, &dst, &label).unwrap();
        assert!(dst.var_free());
        assert_eq!(dst.w.len(), st.w.len() - 4);
    }

    #[test]
    fn split_arc_types_the_remainder() {
        // # c X # X^ c^ # with mu(c) = (a,a), mu(X) = (a,a).
        let mut univ = Universe::new();
        let (a, _) = univ.add_letter_pair("a").unwrap();
        let (x, xbar) = univ.add_var_pair("X").unwrap();
        let (c, cbar) = univ.canon_letter_slot(0).unwrap();
        let st = State {
            w: vec![HASH, c, x, HASH, xbar, cbar, HASH],
            b: BTreeSet::from([HASH, a, univ.inv(a), c, cbar]),
            x: BTreeSet::from([x, xbar]),
            theta: TypeMapOf(&[]),
            mu: MuOf(&univ, &[(c, Nf::Pair(a, a)), (x, Nf::Pair(a, a))]),
        };
        let (y, _) = univ.canon_var_slot(0).unwrap();
        let dst = apply_split(&univ, &st, x, c, y, Nf::Pair(a, a), Nf::One);
        let label = Label::Subst(SubstKind::Split { var: x, letter: c, new_var: y });
        validate_edge(&univ, &st, &dst, &label).unwrap();
        assert_eq!(dst.theta.get(&y), Some(&c));
        assert_eq!(dst.w, vec![HASH, c, c, y, x, HASH, xbar, univ.inv(y), cbar, cbar, HASH]);

        // A remainder constraint other than One or mu(c) is rejected.
        let bad = apply_split(&univ, &st, x, c, y, Nf::Pair(a, univ.inv(a)), Nf::One);
        assert!(validate_edge(&univ, &st, &bad, &label).is_err());
    }

    #[test]
    fn halve_arc_checks_trace_image_and_weight() {
        let mut univ = Universe::new();
        let (a, _) = univ.add_letter_pair("a").unwrap();
        let (c, cbar) = univ.canon_letter_slot(0).unwrap();
        let mk = |w: Word| State {
            w,
            b: BTreeSet::from([HASH, a, univ.inv(a), c, cbar]),
            x: BTreeSet::new(),
            theta: TypeMapOf(&[]),
            mu: MuOf(&univ, &[(c, Nf::Pair(a, a))]),
        };
        let src = mk(vec![HASH, c, c, c, c, HASH, cbar, cbar, cbar, cbar, HASH]);
        let dst = mk(vec![HASH, c, c, HASH, cbar, cbar, HASH]);
        let map = MorphMap::from([(c, vec![c, c]), (cbar, vec![cbar, cbar])]);
        let label = Label::Morph { map: map.clone(), kind: MorphKind::BlockHalve };
        validate_edge(&univ, &src, &dst, &label).unwrap();
        // Halving a word of odd run length cannot reproduce the source.
        let odd = mk(vec![HASH, c, c, c, HASH, cbar, cbar, cbar, HASH]);
        assert!(validate_edge(&univ, &odd, &dst, &label).is_err());
    }

    #[test]
    fn pair_arc_compresses_both_polarities() {
        let mut univ = Universe::new();
        let (a, _) = univ.add_letter_pair("a").unwrap();
        let (b, _) = univ.add_letter_pair("b").unwrap();
        let (d, dbar) = univ.canon_letter_slot(0).unwrap();
        let src = State {
            w: vec![HASH, a, b, HASH, univ.inv(b), univ.inv(a), HASH],
            b: BTreeSet::from([HASH, a, univ.inv(a), b, univ.inv(b)]),
            x: BTreeSet::new(),
            theta: TypeMapOf(&[]),
            mu: MuOf(&univ, &[]),
        };
        let dst = State {
            w: vec![HASH, d, HASH, dbar, HASH],
            b: BTreeSet::from([HASH, a, univ.inv(a), b, univ.inv(b), d, dbar]),
            x: BTreeSet::new(),
            theta: TypeMapOf(&[]),
            mu: MuOf(&univ, &[(d, Nf::Pair(a, b))]),
        };
        let map = MorphMap::from([(d, vec![a, b]), (dbar, vec![univ.inv(b), univ.inv(a)])]);
        validate_edge(&univ, &src, &dst, &Label::Morph { map, kind: MorphKind::Pair }).unwrap();

        // Renaming a single letter does not decrease the weight: rejected.
        let src1 = State {
            w: vec![HASH, a, HASH, univ.inv(a), HASH],
            ..src.clone()
        };
        let dst1 = State {
            w: vec![HASH, d, HASH, dbar, HASH],
            mu: MuOf(&univ, &[(d, Nf::Pair(a, a))]),
            ..dst.clone()
        };
        let map1 = MorphMap::from([(d, vec![a]), (dbar, vec![univ.inv(a)])]);
        let err = validate_edge(&univ, &src1, &dst1, &Label::Morph { map: map1, kind: MorphKind::Pair });
        assert!(err.is_err());
    }

    #[test]
    fn block_init_renames_a_crossing_run() {
        // # b b X # X^ b^ b^ #, guessing that X starts with b.
        let mut univ = Universe::new();
        let (b, bbar) = univ.add_letter_pair("b").unwrap();
        let (x, xbar) = univ.add_var_pair("X").unwrap();
        let (c, cbar) = univ.canon_letter_slot(0).unwrap();
        let (lam, lambar) = univ.canon_letter_slot(1).unwrap();
        let src = State {
            w: vec![HASH, b, b, x, HASH, xbar, bbar, bbar, HASH],
            b: BTreeSet::from([HASH, b, bbar]),
            x: BTreeSet::from([x, xbar]),
            theta: TypeMapOf(&[]),
            mu: MuOf(&univ, &[(x, Nf::Pair(b, b))]),
        };
        let dst = State {
            w: vec![HASH, lam, c, x, HASH, xbar, cbar, lambar, HASH],
            b: BTreeSet::from([HASH, b, bbar, c, cbar, lam, lambar]),
            x: BTreeSet::from([x, xbar]),
            theta: TypeMapOf(&[(lam, c), (lambar, cbar)]),
            mu: MuOf(
                &univ,
                &[
                    (x, Nf::Pair(b, b)),
                    (c, Nf::Pair(b, b)),
                    (lam, Nf::Pair(b, b)),
                ],
            ),
        };
        let map = MorphMap::from([
            (c, vec![b]),
            (cbar, vec![bbar]),
            (lam, vec![b]),
            (lambar, vec![bbar]),
        ]);
        let label = Label::Morph { map, kind: MorphKind::BlockInit };
        validate_edge(&univ, &src, &dst, &label).unwrap();
        // Weight drops at the type component even though the length ties.
        assert_eq!(weight4(&src).0, weight4(&dst).0);
        assert!(weight4(&dst) < weight4(&src));
    }

    #[test]
    fn final_arc_reaches_the_seed_word() {
        let (p, a, b, x, st) = pinned_fixture();
        let mut univ = p.univ;
        // sigma(X) = aab, fully substituted: a variable-free symmetric state.
        let sigma = BTreeMap::from([(x, vec![a, a, b])]);
        let sigma = crate::equation::close_subst(&univ, &sigma);
        let solved = State {
            w: crate::equation::apply_subst(&univ, &st.w, &sigma),
            b: st.b.clone(),
            x: BTreeSet::new(),
            theta: TypeMapOf(&[]),
            mu: MuOf(&univ, &[]),
        };
        assert!(solved.is_symmetric(&univ));
        let seeds = &p.seeds;
        let mut w = vec![HASH];
        for &s in seeds {
            w.push(s);
            w.push(HASH);
        }
        for &s in seeds.iter().rev() {
            w.push(univ.inv(s));
            w.push(HASH);
        }
        let mut map = MorphMap::new();
        let mut mu = MuMapLocal::new();
        let segs: Vec<Word> = solved.segments().iter().take(3).map(|s| s.to_vec()).collect();
        for (i, seg) in segs.iter().enumerate() {
            map.insert(seeds[i], seg.clone());
            map.insert(univ.inv(seeds[i]), univ.inv_word(seg));
            mu.insert(seeds[i], crate::alphabet::mu0_word(&univ, seg));
            mu.insert(
                univ.inv(seeds[i]),
                crate::alphabet::mu0_word(&univ, seg).invol(&univ),
            );
        }
        let mut bset: BTreeSet<Sym> = solved.b.clone();
        for &s in seeds {
            bset.insert(s);
            bset.insert(univ.inv(s));
        }
        let fin = State {
            w,
            b: bset,
            x: BTreeSet::new(),
            theta: TypeMapOf(&[]),
            mu,
        };
        let label = Label::Morph { map, kind: MorphKind::Final };
        validate_edge(&univ, &solved, &fin, &label).unwrap();
        // And the identity is not allowed as a final arc.
        let id_map: MorphMap = fin
            .segments()
            .iter()
            .map(|s| (s[0], vec![s[0]]))
            .collect();
        assert!(validate_edge(&univ, &fin, &fin, &Label::Morph { map: id_map, kind: MorphKind::Final }).is_err());
        let _ = &mut univ;
    }

    #[test]
    fn reduce_arc_drops_dead_letters_only() {
        let (p, a, _, _, st) = pinned_fixture();
        let mut univ = p.univ;
        let (c, cbar) = univ.canon_letter_slot(0).unwrap();
        let mut src = st.clone();
        src.b.insert(c);
        src.b.insert(cbar);
        src.mu.insert(c, Nf::Pair(a, a));
        src.mu.insert(cbar, Nf::Pair(univ.inv(a), univ.inv(a)));
        let dst = apply_reduce(&src, &[c, cbar]);
        let label = Label::Subst(SubstKind::Reduce { dropped: vec![c, cbar] });
        validate_edge(&univ, &src, &dst, &label).unwrap();
        // Dropping an occurring letter is rejected.
        let bad_label = Label::Subst(SubstKind::Reduce { dropped: vec![a] });
        let bad_dst = apply_reduce(&src, &[a]);
        assert!(validate_edge(&univ, &src, &bad_dst, &bad_label).is_err());
    }

    // Small constructors keeping the test states terse.
    #[allow(non_snake_case)]
    fn TypeMapOf(entries: &[(Sym, Sym)]) -> crate::traces::TypeMap {
        entries.iter().copied().collect()
    }

    #[allow(non_snake_case)]
    fn MuOf(univ: &Universe, entries: &[(Sym, Nf)]) -> crate::equation::MuMap {
        let mut out = crate::equation::MuMap::new();
        for &(s, v) in entries {
            out.insert(s, v);
            out.insert(univ.inv(s), v.invol(univ));
        }
        out
    }

    type MuMapLocal = crate::equation::MuMap;
}
