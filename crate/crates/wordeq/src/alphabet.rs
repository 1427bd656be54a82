//! Symbol universe, involution, and the finite constraint monoid.
//!
//! All downstream code manipulates words over [`Sym`] indices resolved by a
//! [`Universe`]: the separator `#` at index 0, constant letters in
//! involution pairs, and variables, also in pairs. The involution has no
//! fixed point besides `#` itself.
//!
//! Symbols below the freeze watermark (original letters, original
//! variables, seed letters) keep their identity for the whole run. Later
//! symbols are canonical slots shared between states: a slot's meaning
//! (constraint value, type) is per-state, only its name, kind and partner
//! are global. During one expansion step, brand new symbols come from a
//! [`ScratchPad`] in a reserved index range and are renamed into canonical
//! slots before the resulting state is stored.
//!
//! The constraint monoid [`Nf`] abstracts a constant word `w` over the
//! original letters to `One` if empty, to `Pair(first, last)` if freely
//! reduced and nonempty, and to `Zero` otherwise (`#` also maps to zero).
//! Multiplication glues words: `(a,b)(c,d) = (a,d)` unless `b` cancels
//! `c`, in which case the product is zero.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::{Error, Result};

/// Index into a [`Universe`]. Ordering is allocation order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Sym(pub u32);

/// The separator symbol, present in every universe at index 0.
pub const HASH: Sym = Sym(0);

/// Start of the scratch index range for letters (see [`ScratchPad`]).
const SCRATCH_LETTER_BASE: u32 = 1 << 24;
/// Start of the scratch index range for variables.
const SCRATCH_VAR_BASE: u32 = 1 << 25;

/// A word is a plain symbol sequence.
pub type Word = Vec<Sym>;

/// What a symbol is.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Kind {
    /// The separator `#`.
    Hash,
    /// A constant letter.
    Letter,
    /// A variable.
    Var,
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// True if the symbol lives in a scratch range rather than in the tables.
pub fn is_scratch(s: Sym) -> bool {
    s.0 >= SCRATCH_LETTER_BASE
}

/// Per-run symbol tables.
#[derive(Clone, Serialize, Deserialize)]
pub struct Universe {
    names: Vec<String>,
    inv: Vec<Sym>,
    kinds: Vec<Kind>,
    /// End (exclusive) of the original letter range `1..a_end`.
    a_end: u32,
    /// Symbols below this index are never renamed by canonicalization.
    frozen: u32,
    /// Canonical letter slots allocated so far (positive symbol of each pair).
    canon_letters: Vec<Sym>,
    /// Canonical variable slots allocated so far.
    canon_vars: Vec<Sym>,
    /// Cap on canonical letter slots, set from the instance size.
    letter_cap: usize,
    /// Cap on canonical variable slots.
    var_cap: usize,
    /// Seed letters (positive symbol of each pair), in allocation order.
    seeds: Vec<Sym>,
}

impl Universe {
    /// A universe containing only `#`.
    pub fn new() -> Self {
        Universe {
            names: vec!["#".to_string()],
            inv: vec![HASH],
            kinds: vec![Kind::Hash],
            a_end: 1,
            frozen: 1,
            canon_letters: Vec::new(),
            canon_vars: Vec::new(),
            letter_cap: usize::MAX,
            var_cap: usize::MAX,
            seeds: Vec::new(),
        }
    }

    fn add_pair_raw(&mut self, name: String, kind: Kind) -> (Sym, Sym) {
        let pos = Sym(self.names.len() as u32);
        let neg = Sym(pos.0 + 1);
        let neg_name = format!("{name}^");
        self.names.push(name);
        self.names.push(neg_name);
        self.inv.push(neg);
        self.inv.push(pos);
        self.kinds.push(kind);
        self.kinds.push(kind);
        (pos, neg)
    }

    fn check_name(&self, name: &str) -> Result<()> {
        if name.is_empty() {
            return Err(Error::BadName(name.into(), "empty"));
        }
        if name.starts_with('_') || name.starts_with('~') {
            return Err(Error::BadName(name.into(), "leading _ and ~ are reserved"));
        }
        if name
            .chars()
            .any(|c| c.is_whitespace() || "#^=,;".contains(c))
        {
            return Err(Error::BadName(name.into(), "contains a reserved character"));
        }
        if self.names.iter().any(|n| n == name) {
            return Err(Error::BadName(name.into(), "already declared"));
        }
        Ok(())
    }

    /// Declare an original letter; its partner is named with a `^` suffix.
    /// Original letters must all be declared before variables and seeds.
    pub fn add_letter_pair(&mut self, name: &str) -> Result<(Sym, Sym)> {
        self.check_name(name)?;
        if self.a_end != self.names.len() as u32 {
            return Err(Error::Invariant(
                "letters must be declared before variables and seeds".into(),
            ));
        }
        let pair = self.add_pair_raw(name.to_string(), Kind::Letter);
        self.a_end = self.names.len() as u32;
        self.frozen = self.a_end;
        Ok(pair)
    }

    /// Declare an original variable pair.
    pub fn add_var_pair(&mut self, name: &str) -> Result<(Sym, Sym)> {
        self.check_name(name)?;
        let pair = self.add_pair_raw(name.to_string(), Kind::Var);
        self.frozen = self.names.len() as u32;
        Ok(pair)
    }

    /// Declare a generated variable pair (triangulation helpers). The name
    /// is prefixed with `_` so it cannot clash with user names.
    pub fn add_generated_var_pair(&mut self, stem: &str) -> (Sym, Sym) {
        let pair = self.add_pair_raw(format!("_{stem}"), Kind::Var);
        self.frozen = self.names.len() as u32;
        pair
    }

    /// Declare a seed letter pair `_s{i}`; frozen like original symbols.
    pub fn add_seed_pair(&mut self, i: usize) -> (Sym, Sym) {
        let pair = self.add_pair_raw(format!("_s{i}"), Kind::Letter);
        self.frozen = self.names.len() as u32;
        self.seeds.push(pair.0);
        pair
    }

    /// True for seed letters (either polarity). Seed constraints are carried
    /// by the machine's final component, so their normal-form entries are
    /// placeholders and exempt from the value-shape checks.
    pub fn is_seed(&self, s: Sym) -> bool {
        self.seeds.contains(&s) || self.seeds.contains(&self.inv(s))
    }

    /// Symbols below this index keep their identity across states.
    pub fn frozen_end(&self) -> u32 {
        self.frozen
    }

    /// Set pool caps from the instance size measure.
    pub fn set_pool_caps(&mut self, n: usize) {
        self.letter_cap = 615 * n;
        self.var_cap = 6 * n;
    }

    /// The `j`-th canonical letter slot (0-based), allocating as needed.
    /// Returns the pair (positive, negative).
    pub fn canon_letter_slot(&mut self, j: usize) -> Result<(Sym, Sym)> {
        while self.canon_letters.len() <= j {
            if self.canon_letters.len() >= self.letter_cap {
                return Err(Error::PoolExhausted("letters"));
            }
            let k = self.canon_letters.len() + 1;
            let (pos, _) = self.add_pair_raw(format!("_c{k}"), Kind::Letter);
            self.canon_letters.push(pos);
        }
        let pos = self.canon_letters[j];
        Ok((pos, self.inv(pos)))
    }

    /// The `j`-th canonical variable slot (0-based), allocating as needed.
    pub fn canon_var_slot(&mut self, j: usize) -> Result<(Sym, Sym)> {
        while self.canon_vars.len() <= j {
            if self.canon_vars.len() >= self.var_cap {
                return Err(Error::PoolExhausted("variables"));
            }
            let k = self.canon_vars.len() + 1;
            let (pos, _) = self.add_pair_raw(format!("_X{k}"), Kind::Var);
            self.canon_vars.push(pos);
        }
        let pos = self.canon_vars[j];
        Ok((pos, self.inv(pos)))
    }

    /// Involution partner. `#` is its own partner; everything else flips
    /// within its pair.
    pub fn inv(&self, s: Sym) -> Sym {
        if is_scratch(s) {
            Sym(s.0 ^ 1)
        } else {
            self.inv[s.0 as usize]
        }
    }

    /// Apply the involution to a word: reverse and flip each symbol.
    pub fn inv_word(&self, w: &[Sym]) -> Word {
        w.iter().rev().map(|&s| self.inv(s)).collect()
    }

    pub fn kind(&self, s: Sym) -> Kind {
        if s.0 >= SCRATCH_VAR_BASE {
            Kind::Var
        } else if s.0 >= SCRATCH_LETTER_BASE {
            Kind::Letter
        } else {
            self.kinds[s.0 as usize]
        }
    }

    pub fn is_var(&self, s: Sym) -> bool {
        self.kind(s) == Kind::Var
    }

    pub fn is_letter(&self, s: Sym) -> bool {
        self.kind(s) == Kind::Letter
    }

    /// True for the original letters (the ones solutions are written in).
    pub fn is_a_letter(&self, s: Sym) -> bool {
        s.0 >= 1 && s.0 < self.a_end
    }

    /// The original letters, in declaration order (positives and partners).
    pub fn a_letters(&self) -> impl Iterator<Item = Sym> + '_ {
        (1..self.a_end).map(Sym)
    }

    /// Number of original letters including partners.
    pub fn a_len(&self) -> usize {
        (self.a_end - 1) as usize
    }

    pub fn name(&self, s: Sym) -> String {
        if s.0 >= SCRATCH_VAR_BASE {
            let k = s.0 - SCRATCH_VAR_BASE;
            if k % 2 == 0 {
                format!("~Y{}", k / 2 + 1)
            } else {
                format!("~Y{}^", k / 2 + 1)
            }
        } else if s.0 >= SCRATCH_LETTER_BASE {
            let k = s.0 - SCRATCH_LETTER_BASE;
            if k % 2 == 0 {
                format!("~t{}", k / 2 + 1)
            } else {
                format!("~t{}^", k / 2 + 1)
            }
        } else {
            self.names[s.0 as usize].clone()
        }
    }

    /// Resolve a token (an original name, optionally with a `^` suffix).
    pub fn lookup(&self, token: &str) -> Option<Sym> {
        if token == "#" {
            return Some(HASH);
        }
        for (i, n) in self.names.iter().enumerate() {
            if n == token {
                return Some(Sym(i as u32));
            }
        }
        None
    }

    /// Render a word by concatenating symbol names.
    pub fn display_word(&self, w: &[Sym]) -> String {
        if w.is_empty() {
            return "1".to_string();
        }
        w.iter().map(|&s| self.name(s)).collect()
    }
}

impl Default for Universe {
    fn default() -> Self {
        Self::new()
    }
}

/// Expansion-local allocator for brand new symbols. Scratch symbols are
/// valid only until the state they occur in is canonicalized; they must
/// never be stored.
pub struct ScratchPad {
    next_letter: u32,
    next_var: u32,
}

impl ScratchPad {
    pub fn new() -> Self {
        ScratchPad {
            next_letter: 0,
            next_var: 0,
        }
    }

    /// A fresh letter pair (positive, negative).
    pub fn letter_pair(&mut self) -> (Sym, Sym) {
        let pos = Sym(SCRATCH_LETTER_BASE + self.next_letter);
        self.next_letter += 2;
        (pos, Sym(pos.0 + 1))
    }

    /// A fresh variable pair (positive, negative).
    pub fn var_pair(&mut self) -> (Sym, Sym) {
        let pos = Sym(SCRATCH_VAR_BASE + self.next_var);
        self.next_var += 2;
        (pos, Sym(pos.0 + 1))
    }
}

impl Default for ScratchPad {
    fn default() -> Self {
        Self::new()
    }
}

/// Element of the constraint monoid over the original letters.
///
/// Abstracts constant words: `One` for the empty word, `Pair(a, b)` for a
/// freely reduced nonempty word starting with `a` and ending with `b`,
/// `Zero` for everything else (unreduced words and words containing `#`).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Nf {
    Zero,
    One,
    Pair(Sym, Sym),
}

impl Nf {
    /// Monoid multiplication. Zero is absorbing, One is neutral, and
    /// `(a,b)(c,d)` is `(a,d)` unless `b = inv(c)`.
    pub fn mul(self, rhs: Nf, univ: &Universe) -> Nf {
        match (self, rhs) {
            (Nf::Zero, _) | (_, Nf::Zero) => Nf::Zero,
            (Nf::One, x) | (x, Nf::One) => x,
            (Nf::Pair(a, b), Nf::Pair(c, d)) => {
                if b == univ.inv(c) {
                    Nf::Zero
                } else {
                    Nf::Pair(a, d)
                }
            }
        }
    }

    /// The involution is an anti-homomorphism: `inv((a,b)) = (inv b, inv a)`.
    pub fn invol(self, univ: &Universe) -> Nf {
        match self {
            Nf::Pair(a, b) => Nf::Pair(univ.inv(b), univ.inv(a)),
            other => other,
        }
    }

    /// First letter of any word with this abstraction, if determined.
    pub fn first(self) -> Option<Sym> {
        match self {
            Nf::Pair(a, _) => Some(a),
            _ => None,
        }
    }

    /// Last letter of any word with this abstraction, if determined.
    pub fn last(self) -> Option<Sym> {
        match self {
            Nf::Pair(_, b) => Some(b),
            _ => None,
        }
    }
}

/// Abstraction of a single original symbol: `#` to zero, letter `a` to
/// `(a, a)`.
pub fn mu0_sym(univ: &Universe, s: Sym) -> Nf {
    if s == HASH {
        Nf::Zero
    } else {
        debug_assert!(univ.is_a_letter(s), "mu0 is only defined on original letters");
        Nf::Pair(s, s)
    }
}

/// Abstraction of a constant word over the original letters (plus `#`).
/// Zero exactly when the word contains `#` or is not freely reduced.
pub fn mu0_word(univ: &Universe, w: &[Sym]) -> Nf {
    let mut acc = Nf::One;
    for &s in w {
        acc = acc.mul(mu0_sym(univ, s), univ);
        if acc == Nf::Zero {
            break;
        }
    }
    acc
}

/// True if the word over original letters has no factor `a inv(a)`.
pub fn is_reduced(univ: &Universe, w: &[Sym]) -> bool {
    w.windows(2).all(|p| p[1] != univ.inv(p[0]))
}

/// Freely reduce: cancel all factors `a inv(a)` until none remain. The
/// result is independent of cancellation order.
pub fn free_reduce(univ: &Universe, w: &[Sym]) -> Word {
    let mut out: Word = Vec::with_capacity(w.len());
    for &s in w {
        if out.last() == Some(&univ.inv(s)) {
            out.pop();
        } else {
            out.push(s);
        }
    }
    out
}
