//! Extended equations: the vertices of the solution automaton.
//!
//! An extended equation bundles a word `W` over constants and variables
//! with the constant alphabet `B`, the variable set `X`, the type relation
//! `theta` and the constraint map `mu`. `W` has the shape
//! `#s_1#s_2#...#s_k#`: an involution-symmetric list of `#`-separated
//! segments such that segment `i` and the involution of its mirror segment
//! constrain each other to equal images. A substitution solves the state
//! when applying it to `W` yields a word equal, in the partially
//! commutative sense of [`crate::traces`], to its own involution image.
//!
//! The initial solved form packs the variable list and both sides of the
//! system into one such word; every later state is reachable from it by
//! the arcs of [`crate::transitions`] and satisfies the six structural
//! invariants checked by [`validate_state`].

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::alphabet::{is_scratch, mu0_sym, Kind, Nf, Sym, Universe, Word, HASH};
use crate::traces::{self, TypeMap};
use crate::{Error, Result};

/// Constraint assignments for generated letters and variables. Original
/// letters are implicit (`a` maps to `(a, a)`), `#` maps to zero.
pub type MuMap = BTreeMap<Sym, Nf>;

/// One vertex payload of the automaton.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct State {
    /// The equation word, `#`-delimited at both ends.
    pub w: Word,
    /// Constant alphabet: always contains `#` and the original letters.
    pub b: BTreeSet<Sym>,
    /// Variables still present, closed under involution.
    pub x: BTreeSet<Sym>,
    /// Type relation: typed letters and typed variables to type letters.
    pub theta: TypeMap,
    /// Constraints for members of `b` and `x` outside the original letters.
    pub mu: MuMap,
}

impl State {
    /// Constraint value of one symbol.
    pub fn mu_sym(&self, univ: &Universe, s: Sym) -> Nf {
        if s == HASH {
            Nf::Zero
        } else if univ.is_a_letter(s) {
            mu0_sym(univ, s)
        } else {
            *self
                .mu
                .get(&s)
                .unwrap_or_else(|| panic!("mu missing for {}", univ.name(s)))
        }
    }

    /// Constraint value of a word (product in the constraint monoid).
    pub fn mu_word(&self, univ: &Universe, w: &[Sym]) -> Nf {
        let mut acc = Nf::One;
        for &s in w {
            acc = acc.mul(self.mu_sym(univ, s), univ);
            if acc == Nf::Zero {
                break;
            }
        }
        acc
    }

    /// The `#`-free segments of `W`, in order.
    pub fn segments(&self) -> Vec<&[Sym]> {
        segments_of(&self.w)
    }

    /// Number of variable occurrences in `W`.
    pub fn var_occurrences(&self, univ: &Universe) -> usize {
        self.w.iter().filter(|&&s| univ.is_var(s)).count()
    }

    /// True when no variables remain.
    pub fn var_free(&self) -> bool {
        self.x.is_empty()
    }

    /// True when `W` equals its own involution image as a trace: the
    /// defining property of solved (variable-free) states.
    pub fn is_symmetric(&self, univ: &Universe) -> bool {
        let mirrored = univ.inv_word(&self.w);
        traces::trace_eq(&self.theta, &self.w, &mirrored)
    }

    /// Letters of `b` that actually occur in `W`.
    pub fn occurring_letters(&self) -> BTreeSet<Sym> {
        self.w
            .iter()
            .copied()
            .filter(|s| self.b.contains(s))
            .collect()
    }
}

/// Split a `#...#` word into its segments.
pub fn segments_of(w: &[Sym]) -> Vec<&[Sym]> {
    assert!(
        w.first() == Some(&HASH) && w.last() == Some(&HASH),
        "equation words are #-delimited"
    );
    let mut out = Vec::new();
    let mut start = 1;
    for (i, &s) in w.iter().enumerate().skip(1) {
        if s == HASH {
            out.push(&w[start..i]);
            start = i + 1;
        }
    }
    out
}

/// Size parameters fixed per instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    /// Instance size `n = |A| + |UV|` (original letters incl. `#`, plus
    /// the total length of the system sides).
    pub n: usize,
    /// Length of the initial word.
    pub winit_len: usize,
    /// Number of `#` in the initial word (constant along every arc).
    pub num_hash: usize,
    /// Number of variable pairs in the initial word.
    pub m: usize,
    /// States at most this long re-enter the popping round.
    pub small: usize,
    /// Pair compression requires `small < |W| <= pair_start`.
    pub pair_start: usize,
    /// Longest intermediate word block compression may produce.
    pub block_max: usize,
    /// Absolute cap on `|W|`; exceeding it is a bug, not a branch.
    pub hard: usize,
}

impl Bounds {
    pub fn new(n: usize, winit_len: usize, num_hash: usize, m: usize) -> Self {
        Bounds {
            n,
            winit_len,
            num_hash,
            m,
            small: 96 * n + 6 * winit_len,
            pair_start: 104 * n + 6 * winit_len,
            block_max: 168 * n + 6 * winit_len,
            hard: 204 * n,
        }
    }
}

/// Lexicographic weight of a state; compressions strictly decrease it.
pub fn weight4(state: &State) -> (i64, i64, i64, i64) {
    let len = state.w.len() as i64;
    let occurring: BTreeSet<Sym> = state
        .w
        .iter()
        .copied()
        .filter(|s| state.b.contains(s))
        .collect();
    (
        len,
        len - occurring.len() as i64,
        len - state.theta.len() as i64,
        state.b.len() as i64,
    )
}

/// How thoroughly [`validate_state`] checks the factor-closure invariant.
#[derive(Clone, Copy, Debug)]
pub enum Validation {
    /// Segment-level certificate: the multiset of segment normal forms is
    /// closed under involution. Implies the factor condition; cheap.
    Fast,
    /// Additionally enumerate every `#`-free factor and test its
    /// involution image as a trace factor, with the given visit cap per
    /// query. Exponential in principle; for small states and tests.
    Full { factor_cap: usize },
}

/// Check the structural invariants of a state. Every state created during
/// a run passes through this.
pub fn validate_state(
    univ: &Universe,
    state: &State,
    bounds: &Bounds,
    level: Validation,
) -> Result<()> {
    let fail = |msg: String| Err(Error::Invariant(msg));

    // 1. Length cap.
    if state.w.len() > bounds.hard {
        return fail(format!("|W| = {} exceeds {}", state.w.len(), bounds.hard));
    }
    // 2. Variable occurrences.
    let var_occ = state.var_occurrences(univ);
    let var_cap = if state.theta.is_empty() {
        4 * bounds.n
    } else {
        12 * bounds.n
    };
    if var_occ > var_cap {
        return fail(format!("{var_occ} variable occurrences exceed {var_cap}"));
    }
    // 3. Separator count and shape.
    if state.w.first() != Some(&HASH) || state.w.last() != Some(&HASH) {
        return fail("W must start and end with #".into());
    }
    let hashes = state.w.iter().filter(|&&s| s == HASH).count();
    if hashes != bounds.num_hash {
        return fail(format!("{} separators, expected {}", hashes, bounds.num_hash));
    }
    // Alphabet sanity: b and x are involution closed, contain what W uses,
    // and no scratch symbol leaked into a stored state.
    if !state.b.contains(&HASH) {
        return fail("# missing from B".into());
    }
    for a in univ.a_letters() {
        if !state.b.contains(&a) {
            return fail(format!("original letter {} missing from B", univ.name(a)));
        }
    }
    for set in [&state.b, &state.x] {
        for &s in set.iter() {
            if is_scratch(s) {
                return fail(format!("scratch symbol {} stored", univ.name(s)));
            }
            if !set.contains(&univ.inv(s)) {
                return fail(format!("{} lacks its involution partner", univ.name(s)));
            }
        }
    }
    for &s in &state.w {
        let ok = match univ.kind(s) {
            Kind::Hash => true,
            Kind::Letter => state.b.contains(&s),
            Kind::Var => state.x.contains(&s),
        };
        if !ok {
            return fail(format!("W uses {} outside B and X", univ.name(s)));
        }
    }
    // 4. Nonzero constraints, with the right key set and value shapes.
    // Seed letters carry placeholder entries (their real constraint is the
    // product of the segment they abbreviate), so the shape checks skip them.
    for (&s, &v) in &state.mu {
        if v == Nf::Zero && !univ.is_seed(s) {
            return fail(format!("mu({}) = 0", univ.name(s)));
        }
        if univ.is_letter(s) && v == Nf::One && !univ.is_seed(s) {
            return fail(format!("letter {} with empty constraint", univ.name(s)));
        }
        if let Nf::Pair(a, b) = v {
            if !univ.is_a_letter(a) || !univ.is_a_letter(b) {
                return fail(format!(
                    "mu({}) mentions non-original letters",
                    univ.name(s)
                ));
            }
        }
        // Involution compatibility of the constraint map.
        let partner = univ.inv(s);
        if state.mu.get(&partner) != Some(&v.invol(univ)) {
            return fail(format!("mu not involution compatible at {}", univ.name(s)));
        }
    }
    for &s in state.b.iter().chain(state.x.iter()) {
        if s == HASH || univ.is_a_letter(s) {
            continue;
        }
        if !state.mu.contains_key(&s) {
            return fail(format!("mu missing for {}", univ.name(s)));
        }
    }
    for key in state.mu.keys() {
        if !state.b.contains(key) && !state.x.contains(key) {
            return fail(format!("mu key {} outside B and X", univ.name(*key)));
        }
    }
    // Type relation sanity: typed symbols are generated letters or
    // variables, types are generated letters, both closed under involution,
    // and type letters are not themselves typed.
    for (&s, &c) in &state.theta {
        if univ.is_a_letter(s) || s == HASH || univ.is_a_letter(c) || !univ.is_letter(c) {
            return fail("type relation touches original letters".into());
        }
        if !state.b.contains(&c) {
            return fail(format!("type letter {} not in B", univ.name(c)));
        }
        if state.theta.contains_key(&c) {
            return fail(format!("type letter {} is itself typed", univ.name(c)));
        }
        if state.theta.get(&univ.inv(s)) != Some(&univ.inv(c)) {
            return fail(format!("theta not involution compatible at {}", univ.name(s)));
        }
        match univ.kind(s) {
            Kind::Letter if state.b.contains(&s) => {}
            Kind::Var if state.x.contains(&s) => {}
            _ => return fail(format!("typed symbol {} outside B and X", univ.name(s))),
        }
        // A typed symbol stands for a power of its type letter, so its
        // constraint is the letter's (or One for an erasable variable).
        let type_mu = state.mu_sym(univ, c);
        let own_mu = state.mu_sym(univ, s);
        let ok = match univ.kind(s) {
            Kind::Var => own_mu == Nf::One || own_mu == type_mu,
            _ => own_mu == type_mu,
        };
        if !ok {
            return fail(format!(
                "constraint of typed symbol {} does not match its type",
                univ.name(s)
            ));
        }
    }
    // 5. Every variable appears.
    for &v in &state.x {
        if !state.w.contains(&v) {
            return fail(format!("variable {} does not appear in W", univ.name(v)));
        }
    }
    // 6. Involution closure of #-free factors.
    let segs = state.segments();
    let nf_of = |w: &[Sym]| traces::normal_form(&state.theta, w);
    let mut fwd: Vec<Word> = segs.iter().map(|s| nf_of(s)).collect();
    let mut bwd: Vec<Word> = segs.iter().map(|s| nf_of(&univ.inv_word(s))).collect();
    fwd.sort();
    bwd.sort();
    if fwd != bwd {
        return fail("segment multiset not closed under involution".into());
    }
    if let Validation::Full { factor_cap } = level {
        let mut factors: BTreeSet<Word> = BTreeSet::new();
        for seg in &segs {
            for i in 0..seg.len() {
                for j in i + 1..=seg.len() {
                    factors.insert(seg[i..j].to_vec());
                }
            }
        }
        for f in &factors {
            let mirrored = univ.inv_word(f);
            match traces::is_factor(&state.theta, &mirrored, &state.w, factor_cap) {
                Some(true) => {}
                Some(false) => {
                    return fail(format!(
                        "factor {} has no mirror factor",
                        univ.display_word(f)
                    ))
                }
                None => {
                    return fail("factor closure check exceeded its visit cap".into());
                }
            }
        }
    }
    Ok(())
}

/// A compiled instance: universe, initial solved form, bounds, seeds.
pub struct Problem {
    pub univ: Universe,
    /// Positive representatives of the variable pairs, in slot order.
    pub vars: Vec<Sym>,
    /// Subset of `vars` whose images the caller wants reported.
    pub unknowns: Vec<Sym>,
    /// Seed letters `_s1.._s{m+2k}`, one per first-half segment of the
    /// initial word; the accepting state spells `#_s1#...#` plus mirrors.
    pub seeds: Vec<Sym>,
    pub winit: Word,
    pub initial: State,
    pub bounds: Bounds,
}

impl Problem {
    /// Build the initial solved form for a system of equations
    /// `U_i = V_i` over one universe. All variables used must be listed in
    /// `vars`; `unknowns` selects which of them to report. User-facing
    /// paths reject `#` inside the sides before calling this; the group
    /// encoder relies on the joining `#`s it inserts itself.
    pub fn new(
        mut univ: Universe,
        sides: Vec<(Word, Word)>,
        vars: Vec<Sym>,
        unknowns: Vec<Sym>,
    ) -> Result<Problem> {
        if sides.is_empty() {
            return Err(Error::Invariant("empty system".into()));
        }
        for (u, v) in &sides {
            for &s in u.iter().chain(v.iter()) {
                if s == HASH {
                    return Err(Error::HashReserved("equation sides"));
                }
                match univ.kind(s) {
                    Kind::Letter if univ.is_a_letter(s) => {}
                    Kind::Var if vars.contains(&s) || vars.contains(&univ.inv(s)) => {}
                    _ => {
                        return Err(Error::Invariant(format!(
                            "symbol {} in the system is not a declared letter or listed variable",
                            univ.name(s)
                        )))
                    }
                }
            }
        }
        for u in &unknowns {
            if !vars.contains(u) {
                return Err(Error::Invariant("unknowns must be listed variables".into()));
            }
        }
        for (i, &v) in vars.iter().enumerate() {
            if vars[..i].contains(&v) || vars.contains(&univ.inv(v)) {
                return Err(Error::Invariant(format!(
                    "variable {} listed twice (or with its partner)",
                    univ.name(v)
                )));
            }
            let occurs = sides
                .iter()
                .flat_map(|(u, w)| u.iter().chain(w.iter()))
                .any(|&s| s == v || s == univ.inv(v));
            if !occurs {
                return Err(Error::Invariant(format!(
                    "variable {} does not occur in the system",
                    univ.name(v)
                )));
            }
        }

        // Join the sides: U = U_1 # U_2 # ... and likewise V.
        let mut u_all: Word = Vec::new();
        let mut v_all: Word = Vec::new();
        for (i, (u, v)) in sides.iter().enumerate() {
            if i > 0 {
                u_all.push(HASH);
                v_all.push(HASH);
            }
            u_all.extend_from_slice(u);
            v_all.extend_from_slice(v);
        }

        let uv_len = u_all.len() + v_all.len();
        let n = univ.a_len() + 1 + uv_len;
        let m = vars.len();

        let mut w: Word = vec![HASH];
        for &x in &vars {
            w.push(x);
            w.push(HASH);
        }
        w.extend_from_slice(&u_all);
        w.push(HASH);
        w.extend_from_slice(&v_all);
        w.push(HASH);
        w.extend(univ.inv_word(&u_all));
        w.push(HASH);
        w.extend(univ.inv_word(&v_all));
        w.push(HASH);
        for &x in vars.iter().rev() {
            w.push(univ.inv(x));
            w.push(HASH);
        }

        let num_hash = w.iter().filter(|&&s| s == HASH).count();
        let bounds = Bounds::new(n, w.len(), num_hash, m);

        // One seed per first-half segment: m variable segments plus the k
        // pieces of each joined side.
        let k = sides.len();
        let mut seeds = Vec::with_capacity(m + 2 * k);
        for i in 1..=m + 2 * k {
            let (pos, _) = univ.add_seed_pair(i);
            seeds.push(pos);
        }
        univ.set_pool_caps(n);

        let mut b: BTreeSet<Sym> = BTreeSet::new();
        b.insert(HASH);
        b.extend(univ.a_letters());
        let mut x: BTreeSet<Sym> = BTreeSet::new();
        for &v in &vars {
            x.insert(v);
            x.insert(univ.inv(v));
        }
        // The initial mu is a placeholder (all pairs unconstrained is not
        // expressible); real initial states enumerate admissible
        // assignments in the search. Until then variables carry One.
        let mu: MuMap = x.iter().map(|&v| (v, Nf::One)).collect();
        let initial = State {
            w: w.clone(),
            b,
            x,
            theta: TypeMap::new(),
            mu,
        };

        Ok(Problem {
            univ,
            vars,
            unknowns,
            seeds,
            winit: w,
            initial,
            bounds,
        })
    }

    /// Single-equation convenience used by tests and the monoid CLI path.
    pub fn single(univ: Universe, u: Word, v: Word, vars: Vec<Sym>) -> Result<Problem> {
        let unknowns = vars.clone();
        Problem::new(univ, vec![(u, v)], vars, unknowns)
    }

    /// The shared accepting state `#_s1#..#_s{m+2k}#` followed by the
    /// mirror copies. Variable-free, type-free, with placeholder
    /// constraints on the seeds; every solved state maps onto it by one
    /// final arc sending each seed to the segment it abbreviates.
    pub fn final_state(&self) -> State {
        let univ = &self.univ;
        let mut w: Word = vec![HASH];
        for &s in &self.seeds {
            w.push(s);
            w.push(HASH);
        }
        for &s in self.seeds.iter().rev() {
            w.push(univ.inv(s));
            w.push(HASH);
        }
        let mut b: BTreeSet<Sym> = BTreeSet::new();
        b.insert(HASH);
        b.extend(univ.a_letters());
        let mut mu = MuMap::new();
        for &s in &self.seeds {
            b.insert(s);
            b.insert(univ.inv(s));
            mu.insert(s, Nf::One);
            mu.insert(univ.inv(s), Nf::One);
        }
        State {
            w,
            b,
            x: BTreeSet::new(),
            theta: TypeMap::new(),
            mu,
        }
    }
}

/// Substitute variables in a word; `sigma` must cover every variable that
/// occurs (partners included).
pub fn apply_subst(univ: &Universe, w: &[Sym], sigma: &BTreeMap<Sym, Word>) -> Word {
    let mut out = Vec::with_capacity(w.len());
    for &s in w {
        if univ.is_var(s) {
            let image = sigma
                .get(&s)
                .unwrap_or_else(|| panic!("sigma missing for {}", univ.name(s)));
            out.extend_from_slice(image);
        } else {
            out.push(s);
        }
    }
    out
}

/// Close a substitution under the involution: images of partners are the
/// involution images.
pub fn close_subst(univ: &Universe, sigma: &BTreeMap<Sym, Word>) -> BTreeMap<Sym, Word> {
    let mut out = sigma.clone();
    for (&v, w) in sigma {
        out.entry(univ.inv(v)).or_insert_with(|| univ.inv_word(w));
    }
    out
}

/// Does `sigma` solve the state? Substitutes, then compares the word with
/// its involution image as traces. For states without types this is plain
/// word symmetry, hence exactly "all segment equations hold".
pub fn is_solution_of_state(univ: &Universe, state: &State, sigma: &BTreeMap<Sym, Word>) -> bool {
    let sigma = close_subst(univ, sigma);
    for &v in &state.x {
        let Some(img) = sigma.get(&v) else {
            return false;
        };
        // Solutions must respect the constraint map.
        let have = state.mu_word(univ, img);
        if have != state.mu_sym(univ, v) {
            return false;
        }
    }
    let expanded = apply_subst(univ, &state.w, &sigma);
    let mirrored = univ.inv_word(&expanded);
    traces::trace_eq(&state.theta, &expanded, &mirrored)
}

/// Quick refutation for untyped states: true when some segment equation
/// provably has no solution, so the state cannot lie on an accepting path.
///
/// For a type-free state the defining condition `W` equals its involution
/// image decomposes segment-wise: the image of segment `i` must equal the
/// image of the involution of segment `n-1-i` literally, because the `#`
/// occurrences of the two sides align. Each check below is a necessary
/// condition for one such pair to have a solution, so pruning a state that
/// fails one never loses a solution; it only skips branches the trim pass
/// would discard later at far greater cost.
pub fn obviously_dead(univ: &Universe, state: &State) -> bool {
    if !state.theta.is_empty() {
        return false;
    }
    let segs = state.segments();
    let n = segs.len();
    (0..n / 2).any(|i| {
        let t = univ.inv_word(segs[n - 1 - i]);
        segment_pair_dead(univ, state, segs[i], &t)
    })
}

/// Can no substitution give `s` and `t` the same image? Sound, not
/// complete: `false` promises nothing.
fn segment_pair_dead(univ: &Universe, state: &State, s: &[Sym], t: &[Sym]) -> bool {
    // Erasable variables contribute nothing; drop them up front. Every
    // element kept maps to at least one symbol (constants to themselves,
    // variables to nonempty words).
    let keep = |w: &[Sym]| -> Word {
        w.iter()
            .copied()
            .filter(|&c| !(univ.is_var(c) && state.mu_sym(univ, c) == Nf::One))
            .collect()
    };
    let s = keep(s);
    let t = keep(t);

    // Length window. A side without variables has a fixed image length.
    let has_var = |w: &[Sym]| w.iter().any(|&c| univ.is_var(c));
    if (!has_var(&t) && s.len() > t.len()) || (!has_var(&s) && t.len() > s.len()) {
        return true;
    }
    // Both sides ground: the words must agree outright.
    if !has_var(&s) && !has_var(&t) {
        return s != t;
    }
    // The images must agree on the aligned runs of constants at either end.
    literal_clash(univ, state, &s, &t, false) || literal_clash(univ, state, &s, &t, true)
}

/// Walk `s` and `t` from the front (`last = false`) or back (`last = true`)
/// while both positions hold constants; those positions of the images are
/// forced, so any mismatch refutes. At the first variable the positions
/// decouple, but that variable still pins one more image letter through its
/// constraint: compare it against what faces it and stop.
fn literal_clash(univ: &Universe, state: &State, s: &[Sym], t: &[Sym], last: bool) -> bool {
    let edge = |c: Sym| match state.mu_sym(univ, c) {
        Nf::Pair(p, q) => Some(if last { q } else { p }),
        _ => None,
    };
    let at = |w: &[Sym], i: usize| if last { w[w.len() - 1 - i] } else { w[i] };
    for i in 0..s.len().min(t.len()) {
        let (a, b) = (at(s, i), at(t, i));
        if !univ.is_var(a) && !univ.is_var(b) {
            if a != b {
                return true;
            }
            continue;
        }
        // Variable met: its image starts (or ends) with the letter named by
        // its constraint, and so does whatever stands opposite.
        if let (Some(p), Some(q)) = (edge(a), edge(b)) {
            return p != q;
        }
        return false;
    }
    false
}

// ---------------------------------------------------------------------
// Canonicalization
// ---------------------------------------------------------------------

/// Result of canonical renaming: the stored state plus the map from the
/// symbols of the input to the canonical slots (identity entries omitted;
/// frozen symbols are never renamed).
pub struct Canonical {
    pub state: State,
    pub rename: BTreeMap<Sym, Sym>,
}

/// Rename generated letters and variables into shared canonical slots, in
/// an order determined only by the structure of the state (first
/// occurrence in the type-aware normal form of `W`, then non-occurring
/// symbols keyed by what references them). Two states differing only by
/// the identity of generated symbols map to equal stored states, which is
/// what makes the memo detect loops across rounds.
pub fn canonicalize(univ: &mut Universe, state: &State) -> Result<Canonical> {
    // Normal form with an occurrence-order comparator would need a custom
    // trace kernel; instead exploit that only typed letters move: compute
    // the normal form with symbols compared by first occurrence in W.
    let order_word = occurrence_normal_form(state);

    let mut rename: BTreeMap<Sym, Sym> = BTreeMap::new();
    let mut next_letter = 0usize;
    let mut next_var = 0usize;
    let frozen = univ.frozen_end();
    let mut assign = |univ: &mut Universe,
                      rename: &mut BTreeMap<Sym, Sym>,
                      s: Sym|
     -> Result<()> {
        if s.0 < frozen || rename.contains_key(&s) {
            return Ok(());
        }
        let (pos, neg) = match univ.kind(s) {
            Kind::Letter => {
                let slot = univ.canon_letter_slot(next_letter)?;
                next_letter += 1;
                slot
            }
            Kind::Var => {
                let slot = univ.canon_var_slot(next_var)?;
                next_var += 1;
                slot
            }
            Kind::Hash => return Ok(()),
        };
        rename.insert(s, pos);
        rename.insert(univ.inv(s), neg);
        Ok(())
    };

    for &s in &order_word {
        assign(univ, &mut rename, s)?;
    }
    // Symbols of B and X that do not occur in W: order them by what still
    // references them so the order is isomorphism invariant where it can
    // be. Key: type-target of an occurring symbol (by its occurrence
    // index), then partner of an occurring symbol, then constraint value.
    let occ_index = |s: Sym| order_word.iter().position(|&t| t == s);
    let mut rest: Vec<(u8, usize, Nf, Sym)> = Vec::new();
    for &s in state.b.iter().chain(state.x.iter()) {
        if s.0 < frozen || rename.contains_key(&s) {
            continue;
        }
        let typed_by: Option<usize> = state
            .theta
            .iter()
            .filter(|&(_, &c)| c == s)
            .filter_map(|(&t, _)| occ_index(t))
            .min();
        let key = if let Some(i) = typed_by {
            (0u8, i)
        } else if let Some(i) = occ_index(univ.inv(s)) {
            (1u8, i)
        } else {
            (2u8, 0)
        };
        let mu = state.mu.get(&s).copied().unwrap_or(Nf::One);
        rest.push((key.0, key.1, mu, s));
    }
    rest.sort();
    for (_, _, _, s) in rest {
        assign(univ, &mut rename, s)?;
    }

    let map = |s: Sym| *rename.get(&s).unwrap_or(&s);
    let w: Word = order_word.iter().map(|&s| map(s)).collect();
    let b: BTreeSet<Sym> = state.b.iter().map(|&s| map(s)).collect();
    let x: BTreeSet<Sym> = state.x.iter().map(|&s| map(s)).collect();
    let theta: TypeMap = state
        .theta
        .iter()
        .map(|(&k, &v)| (map(k), map(v)))
        .collect();
    let mu: MuMap = state.mu.iter().map(|(&k, &v)| (map(k), v)).collect();
    Ok(Canonical {
        state: State { w, b, x, theta, mu },
        rename,
    })
}

/// Greedy normal form of `W` where the preference order between frontable
/// symbols is first occurrence in `W` itself (an isomorphism-invariant
/// order), not raw symbol indices.
fn occurrence_normal_form(state: &State) -> Word {
    if state.theta.is_empty() {
        return state.w.clone();
    }
    let mut first_occ: BTreeMap<Sym, usize> = BTreeMap::new();
    for (i, &s) in state.w.iter().enumerate() {
        first_occ.entry(s).or_insert(i);
    }
    let theta = &state.theta;
    let inert = |s: Sym| !theta.contains_key(&s) && !theta.values().any(|&c| c == s);
    let mut rest: Vec<Sym> = state.w.clone();
    let mut out: Word = Vec::with_capacity(rest.len());
    while !rest.is_empty() {
        let mut best: Option<(usize, usize)> = None; // (occurrence key, position)
        let mut seen: Vec<Sym> = Vec::new();
        for (i, &s) in rest.iter().enumerate() {
            if seen.iter().all(|&p| traces::independent(theta, p, s)) {
                let key = first_occ[&s];
                if best.map_or(true, |(bk, _)| key < bk) {
                    best = Some((key, i));
                }
            }
            if !seen.contains(&s) {
                seen.push(s);
            }
            if inert(s) {
                break;
            }
        }
        let (_, i) = best.expect("position 0 is always frontable");
        out.push(rest.remove(i));
    }
    out
}

/// Human-readable rendering of a state for logs and DOT labels.
pub fn display_state(univ: &Universe, state: &State) -> String {
    let mut parts: Vec<String> = Vec::new();
    parts.push(univ.display_word(&state.w));
    if !state.theta.is_empty() {
        let types: Vec<String> = state
            .theta
            .iter()
            .map(|(k, v)| format!("{}:{}", univ.name(*k), univ.name(*v)))
            .collect();
        parts.push(format!("theta[{}]", types.join(",")));
    }
    parts.join(" ")
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// aX = aaab over {a, b}: the running single-variable example.
    pub(crate) fn fixture() -> (Problem, Sym, Sym, Sym) {
        let mut univ = Universe::new();
        let (a, _) = univ.add_letter_pair("a").unwrap();
        let (b, _) = univ.add_letter_pair("b").unwrap();
        let (x, _) = univ.add_var_pair("X").unwrap();
        let p = Problem::single(univ, vec![a, x], vec![a, a, a, b], vec![x]).unwrap();
        (p, a, b, x)
    }

    #[test]
    fn winit_shape_and_size() {
        let (p, a, b, x) = fixture();
        let u = &p.univ;
        let xbar = u.inv(x);
        let abar = u.inv(a);
        let bbar = u.inv(b);
        let expect: Word = vec![
            HASH, x, HASH, // #X#
            a, x, HASH, // aX#
            a, a, a, b, HASH, // aaab#
            xbar, abar, HASH, // X^a^#
            bbar, abar, abar, abar, HASH, // b^a^a^a^#
            xbar, HASH, // X^#
        ];
        assert_eq!(p.winit, expect);
        // n = |A| + |UV| with A = {#, a, a^, b, b^}.
        assert_eq!(p.bounds.n, 5 + 6);
        assert!(p.winit.len() <= 6 * p.bounds.n);
        assert_eq!(p.bounds.num_hash, 2 * 1 + 5);
        let var_occ = p.initial.var_occurrences(u);
        assert!(var_occ <= 4 * p.bounds.n);
        assert_eq!(p.seeds.len(), 3);
        // Thresholds as functions of n and |W_init|.
        assert_eq!(p.bounds.small, 96 * 11 + 6 * p.winit.len());
        assert_eq!(p.bounds.pair_start, p.bounds.small + 8 * 11);
        assert_eq!(p.bounds.hard, 204 * 11);
        assert!(p.bounds.hard > p.bounds.block_max);
    }

    #[test]
    fn segments_mirror_pairing() {
        let (p, _, _, _) = fixture();
        let segs = p.initial.segments();
        assert_eq!(segs.len(), 2 * 1 + 4);
        let u = &p.univ;
        for i in 0..segs.len() {
            let j = segs.len() - 1 - i;
            // Initially segment i is exactly the involution of segment j
            // except for the U/V cross pairing; check the variable slots.
            if i == 0 {
                assert_eq!(segs[j], &u.inv_word(segs[i])[..]);
            }
        }
    }

    #[test]
    fn initial_state_validates() {
        let (p, _, _, _) = fixture();
        validate_state(&p.univ, &p.initial, &p.bounds, Validation::Fast).unwrap();
        validate_state(
            &p.univ,
            &p.initial,
            &p.bounds,
            Validation::Full { factor_cap: 100_000 },
        )
        .unwrap();
    }

    #[test]
    fn validation_rejects_broken_states() {
        let (p, a, _, x) = fixture();
        let u = &p.univ;
        // Missing separator at the end.
        let mut bad = p.initial.clone();
        bad.w.pop();
        assert!(validate_state(u, &bad, &p.bounds, Validation::Fast).is_err());
        // A variable that never occurs.
        let mut bad = p.initial.clone();
        bad.w.retain(|&s| s != x && s != u.inv(x));
        bad.w.insert(1, a); // keep separator count by replacing X slots
        bad.w.insert(bad.w.len() - 1, u.inv(a));
        assert!(validate_state(u, &bad, &p.bounds, Validation::Fast).is_err());
        // Asymmetric segment multiset.
        let mut bad = p.initial.clone();
        let pos = bad.w.iter().position(|&s| s == a).unwrap();
        bad.w[pos] = u.inv(a);
        assert!(validate_state(u, &bad, &p.bounds, Validation::Fast).is_err());
    }

    #[test]
    fn weight_orders_by_length_first() {
        let (p, a, _, _) = fixture();
        let w1 = weight4(&p.initial);
        let mut longer = p.initial.clone();
        longer.w.insert(1, a);
        longer.w.insert(1, u32_inv(&p.univ, a));
        let w2 = weight4(&longer);
        assert!(w2 > w1);
    }

    fn u32_inv(u: &Universe, s: Sym) -> Sym {
        u.inv(s)
    }

    #[test]
    fn solution_check_on_initial_state() {
        let (p, a, b, x) = fixture();
        let octx = &p.univ;
        // sigma(X) = aab solves aX = aaab.
        let mut sigma = BTreeMap::new();
        sigma.insert(x, vec![a, a, b]);
        // mu(X) = One placeholder fails; fix to the true constraint first.
        let mut st = p.initial.clone();
        st.mu.insert(x, Nf::Pair(a, b));
        st.mu.insert(octx.inv(x), Nf::Pair(a, b).invol(octx));
        assert!(is_solution_of_state(octx, &st, &sigma));
        let mut wrong = BTreeMap::new();
        wrong.insert(x, vec![a, b]);
        assert!(!is_solution_of_state(octx, &st, &wrong));
    }

    #[test]
    fn deadness_sees_through_constraints() {
        let (p, a, b, x) = fixture();
        let u = &p.univ;
        let with_mu = |mu: Nf| {
            let mut st = p.initial.clone();
            st.mu.insert(x, mu);
            st.mu.insert(u.inv(x), mu.invol(u));
            st
        };
        // sigma(X) must start with a to match aX against aaab.
        assert!(!obviously_dead(u, &with_mu(Nf::Pair(a, b))));
        assert!(obviously_dead(u, &with_mu(Nf::Pair(b, b))));
        assert!(obviously_dead(u, &with_mu(Nf::Pair(u.inv(b), b))));
        // ... and end with b.
        assert!(obviously_dead(u, &with_mu(Nf::Pair(a, a))));
        // An erasable X leaves a against aaab: lengths refute.
        assert!(obviously_dead(u, &with_mu(Nf::One)));
    }

    #[test]
    fn deadness_counts_forced_lengths() {
        // aaabX = aaab with a non-erasable X: the left image is longer.
        let mut fresh = Universe::new();
        let (a2, _) = fresh.add_letter_pair("a").unwrap();
        let (b2, _) = fresh.add_letter_pair("b").unwrap();
        let (x2, _) = fresh.add_var_pair("X").unwrap();
        let p2 = Problem::single(fresh, vec![a2, a2, a2, b2, x2], vec![a2, a2, a2, b2], vec![x2])
            .unwrap();
        let u2 = &p2.univ;
        let mut st = p2.initial.clone();
        st.mu.insert(x2, Nf::Pair(b2, b2));
        st.mu.insert(u2.inv(x2), Nf::Pair(b2, b2).invol(u2));
        assert!(obviously_dead(u2, &st));
        // Erasable X makes both sides ground and equal.
        let mut st = p2.initial.clone();
        st.mu.insert(x2, Nf::One);
        st.mu.insert(u2.inv(x2), Nf::One);
        assert!(!obviously_dead(u2, &st));
    }

    #[test]
    fn deadness_rejects_ground_mismatch() {
        let mut univ = Universe::new();
        let (a, _) = univ.add_letter_pair("a").unwrap();
        let (b, _) = univ.add_letter_pair("b").unwrap();
        let p = Problem::single(univ, vec![a], vec![b], vec![]).unwrap();
        assert!(obviously_dead(&p.univ, &p.initial));
    }

    #[test]
    fn canonicalize_is_stable_under_symbol_identity() {
        let (p, a, _, _) = fixture();
        let mut univ = p.univ;
        // Two copies of "the same" state built with different generated
        // letters must canonicalize identically.
        let mk = |univ: &mut Universe, skip: usize| -> State {
            let mut pad = crate::alphabet::ScratchPad::new();
            for _ in 0..skip {
                pad.letter_pair();
            }
            let (c, cbar) = pad.letter_pair();
            let mut st = p.initial.clone();
            let pos = st.w.iter().position(|&s| s == a).unwrap();
            st.w[pos] = c;
            let mirror = st.w.iter().rposition(|&s| s == univ.inv(a)).unwrap();
            st.w[mirror] = cbar;
            st.b.insert(c);
            st.b.insert(cbar);
            st.mu.insert(c, Nf::Pair(a, a));
            st.mu.insert(cbar, Nf::Pair(univ.inv(a), univ.inv(a)));
            st
        };
        let s1 = mk(&mut univ, 0);
        let s2 = mk(&mut univ, 3);
        assert_ne!(s1, s2);
        let c1 = canonicalize(&mut univ, &s1).unwrap();
        let c2 = canonicalize(&mut univ, &s2).unwrap();
        assert_eq!(c1.state, c2.state);
        // The rename map tracks where each scratch symbol went.
        assert_eq!(c1.rename.len(), 2);
    }
}
