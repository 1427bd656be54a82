//! Words with partial commutation between typed letters and their types.
//!
//! During block compression a symbol `x` may carry a type `theta(x) = c`,
//! meaning `x` stands for an unknown power of `c`.  All the material of one
//! block letter commutes internally: a typed symbol commutes with its type
//! letter and with every other symbol of the same type, and nothing else
//! commutes.  Two words are equivalent when one can be turned into the
//! other by swapping adjacent independent letters. This module decides
//! equivalence (projection criterion), computes a canonical representative
//! (greedy smallest frontable letter), and tests trace factors.
//!
//! [`swap_closure`] is the brute force reference: the full equivalence
//! class by breadth first search over adjacent swaps. It is exponential
//! and exists as ground truth for tests.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::alphabet::{Sym, Word};

/// Partial map from typed symbols (letters or variables) to their type
/// letter. Both members of an involution pair appear explicitly.
pub type TypeMap = BTreeMap<Sym, Sym>;

/// Two distinct symbols commute exactly when one is the other's type or
/// both carry the same type: each block letter's material is one clique.
pub fn independent(theta: &TypeMap, x: Sym, y: Sym) -> bool {
    if theta.get(&x) == Some(&y) || theta.get(&y) == Some(&x) {
        return true;
    }
    x != y && theta.get(&x).is_some() && theta.get(&x) == theta.get(&y)
}

/// True if the symbol commutes with nothing: it is not typed and is not
/// the type of anything.
fn inert(theta: &TypeMap, s: Sym) -> bool {
    !theta.contains_key(&s) && !theta.values().any(|&c| c == s)
}

/// Keep only the occurrences of `x` and `y`.
pub fn project(w: &[Sym], x: Sym, y: Sym) -> Word {
    w.iter().copied().filter(|&s| s == x || s == y).collect()
}

/// Equivalence of words modulo the commutations `x theta(x) = theta(x) x`.
///
/// Projection criterion: equal letter multisets, and equal projections to
/// every dependent pair of distinct letters.
pub fn trace_eq(theta: &TypeMap, u: &[Sym], v: &[Sym]) -> bool {
    if theta.is_empty() {
        return u == v;
    }
    if u.len() != v.len() {
        return false;
    }
    let mut counts: BTreeMap<Sym, i64> = BTreeMap::new();
    for &s in u {
        *counts.entry(s).or_insert(0) += 1;
    }
    for &s in v {
        *counts.entry(s).or_insert(0) -= 1;
    }
    if counts.values().any(|&c| c != 0) {
        return false;
    }
    let symbols: Vec<Sym> = counts.keys().copied().collect();
    for (i, &x) in symbols.iter().enumerate() {
        for &y in &symbols[i + 1..] {
            if !independent(theta, x, y) && project(u, x, y) != project(v, x, y) {
                return false;
            }
        }
    }
    true
}

/// Canonical representative of a trace class: repeatedly emit the smallest
/// letter that can be commuted to the front of what remains. Two words are
/// trace equivalent exactly when their normal forms are equal.
pub fn normal_form(theta: &TypeMap, w: &[Sym]) -> Word {
    if theta.is_empty() {
        return w.to_vec();
    }
    let mut rest: Vec<Sym> = w.to_vec();
    let mut out: Word = Vec::with_capacity(rest.len());
    while !rest.is_empty() {
        let mut best: Option<(Sym, usize)> = None;
        let mut seen: Vec<Sym> = Vec::new();
        for i in 0..rest.len() {
            let s = rest[i];
            if seen.iter().all(|&p| independent(theta, p, s))
                && best.map_or(true, |(bs, _)| s < bs)
            {
                best = Some((s, i));
            }
            if !seen.contains(&s) {
                seen.push(s);
            }
            // An inert letter blocks everything after it from reaching the
            // front, so no later position can be a candidate.
            if inert(theta, s) {
                break;
            }
        }
        let (_, i) = best.expect("position 0 is always frontable");
        out.push(rest.remove(i));
    }
    out
}

/// Trace factor test: is some member of `needle`'s class a contiguous
/// factor of some member of `hay`'s class? Searches the swap closure of
/// `hay` with backtracking over pending swaps; `visit_cap` bounds the
/// number of distinct words visited. Returns `None` when the cap is hit
/// before an answer is certain.
pub fn is_factor(theta: &TypeMap, needle: &[Sym], hay: &[Sym], visit_cap: usize) -> Option<bool> {
    if needle.is_empty() {
        return Some(true);
    }
    if needle.len() > hay.len() {
        return Some(false);
    }
    // Since the closure of `hay` is itself closed under swaps, it contains
    // a word with a member of needle's class as a factor iff it contains a
    // word with the literal needle as a factor.
    let mut queue: VecDeque<Word> = VecDeque::new();
    let mut seen: BTreeSet<Word> = BTreeSet::new();
    queue.push_back(hay.to_vec());
    seen.insert(hay.to_vec());
    while let Some(w) = queue.pop_front() {
        if w.windows(needle.len()).any(|win| win == needle) {
            return Some(true);
        }
        for i in 0..w.len().saturating_sub(1) {
            if w[i] != w[i + 1] && independent(theta, w[i], w[i + 1]) {
                let mut next = w.clone();
                next.swap(i, i + 1);
                if !seen.contains(&next) {
                    if seen.len() >= visit_cap {
                        return None;
                    }
                    seen.insert(next.clone());
                    queue.push_back(next);
                }
            }
        }
    }
    Some(false)
}

/// The full equivalence class of `w`, by breadth first search over
/// adjacent swaps of independent letters. Exponential; reference
/// implementation for tests only. `None` when the class exceeds `cap`.
pub fn swap_closure(theta: &TypeMap, w: &[Sym], cap: usize) -> Option<BTreeSet<Word>> {
    let mut seen: BTreeSet<Word> = BTreeSet::new();
    let mut queue: VecDeque<Word> = VecDeque::new();
    seen.insert(w.to_vec());
    queue.push_back(w.to_vec());
    while let Some(cur) = queue.pop_front() {
        for i in 0..cur.len().saturating_sub(1) {
            if cur[i] != cur[i + 1] && independent(theta, cur[i], cur[i + 1]) {
                let mut next = cur.clone();
                next.swap(i, i + 1);
                if !seen.contains(&next) {
                    if seen.len() >= cap {
                        return None;
                    }
                    seen.insert(next.clone());
                    queue.push_back(next);
                }
            }
        }
    }
    Some(seen)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Plain symbols for kernel tests; no universe needed, involution and
    // kinds play no role in the trace laws.
    const A: Sym = Sym(10);
    const C: Sym = Sym(11);
    const X: Sym = Sym(12); // typed by C
    const D: Sym = Sym(13);
    const Y: Sym = Sym(14); // typed by D

    fn theta() -> TypeMap {
        let mut t = TypeMap::new();
        t.insert(X, C);
        t.insert(Y, D);
        t
    }

    /// All words of the given length over the alphabet.
    fn words(alphabet: &[Sym], len: usize) -> Vec<Word> {
        if len == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for w in words(alphabet, len - 1) {
            for &s in alphabet {
                let mut w2 = w.clone();
                w2.push(s);
                out.push(w2);
            }
        }
        out
    }

    #[test]
    fn typed_letter_commutes_with_its_type_only() {
        let t = theta();
        assert!(independent(&t, X, C));
        assert!(independent(&t, C, X));
        assert!(!independent(&t, X, A));
        assert!(!independent(&t, X, Y));
        assert!(!independent(&t, C, D));
        assert!(trace_eq(&t, &[X, C], &[C, X]));
        assert!(!trace_eq(&t, &[X, A], &[A, X]));
        assert!(!trace_eq(&t, &[X, Y], &[Y, X]));
    }

    #[test]
    fn closure_of_cx_is_both_orders() {
        let t = theta();
        let cls = swap_closure(&t, &[C, X], 100).unwrap();
        assert_eq!(cls.len(), 2);
        assert!(cls.contains(&vec![C, X]));
        assert!(cls.contains(&vec![X, C]));
        let cls2 = swap_closure(&t, &[A, C], 100).unwrap();
        assert_eq!(cls2.len(), 1);
    }

    #[test]
    fn same_type_symbols_form_a_clique() {
        let mut t = theta();
        let m = Sym(15);
        t.insert(m, C);
        assert!(independent(&t, m, X));
        assert!(independent(&t, m, C));
        assert!(!independent(&t, m, Y));
        assert!(!independent(&t, m, m));
        assert!(trace_eq(&t, &[m, X, C], &[C, X, m]));
        // Projection criterion and normal form stay exact with a clique.
        let ab = [A, C, X, m];
        for len in 0..=4 {
            for u in words(&ab, len) {
                let cls = swap_closure(&t, &u, 10_000).unwrap();
                let nf = normal_form(&t, &u);
                for v in words(&ab, len) {
                    assert_eq!(trace_eq(&t, &u, &v), cls.contains(&v), "u={u:?} v={v:?}");
                    assert_eq!(normal_form(&t, &v) == nf, cls.contains(&v), "u={u:?} v={v:?}");
                }
            }
        }
    }

    #[test]
    fn trace_eq_matches_closure_exhaustively() {
        let t = theta();
        let ab = [A, C, X];
        for len in 0..=4 {
            for u in words(&ab, len) {
                let cls = swap_closure(&t, &u, 10_000).unwrap();
                for v in words(&ab, len) {
                    assert_eq!(
                        trace_eq(&t, &u, &v),
                        cls.contains(&v),
                        "u={u:?} v={v:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn normal_form_is_canonical() {
        let t = theta();
        let ab = [A, C, X, Y];
        for len in 0..=4 {
            for u in words(&ab, len) {
                let nf = normal_form(&t, &u);
                // Same class, idempotent.
                assert!(trace_eq(&t, &u, &nf), "nf left the class of {u:?}");
                assert_eq!(normal_form(&t, &nf), nf);
                // Equal normal forms exactly on trace equality.
                for v in words(&ab, len) {
                    assert_eq!(
                        trace_eq(&t, &u, &v),
                        normal_form(&t, &v) == nf,
                        "u={u:?} v={v:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn normal_form_fronts_smaller_type() {
        let t = theta();
        // X is typed by C and C < X, so the normal form of XC is CX.
        assert_eq!(normal_form(&t, &[X, C]), vec![C, X]);
        assert_eq!(normal_form(&t, &[C, X]), vec![C, X]);
        // A is inert and blocks reordering across it.
        assert_eq!(normal_form(&t, &[X, A, C]), vec![X, A, C]);
    }

    #[test]
    fn is_factor_matches_brute_force() {
        let t = theta();
        let ab = [A, C, X];
        for wlen in 0..=4 {
            for w in words(&ab, wlen) {
                let cls = swap_closure(&t, &w, 10_000).unwrap();
                for ulen in 0..=2 {
                    for u in words(&ab, ulen) {
                        let brute = cls
                            .iter()
                            .any(|m| m.windows(u.len().max(1)).any(|win| win == &u[..]) || u.is_empty());
                        assert_eq!(
                            is_factor(&t, &u, &w, 10_000),
                            Some(brute),
                            "u={u:?} w={w:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn is_factor_sees_through_commutation() {
        let t = theta();
        // CC is a factor of CXC only after commuting X out of the middle.
        assert_eq!(is_factor(&t, &[C, C], &[C, X, C], 1000), Some(true));
        assert_eq!(is_factor(&t, &[C, C], &[C, A, C], 1000), Some(false));
        // Cap of 1 word visited cannot decide the commuting case.
        assert_eq!(is_factor(&t, &[C, C], &[C, X, C], 1), None);
    }

    #[test]
    fn projection_keeps_the_pair_in_order() {
        assert_eq!(project(&[A, C, X, C, A], C, X), vec![C, X, C]);
        assert_eq!(project(&[A], C, X), Vec::<Sym>::new());
    }
}
