//! Brute force ground truth.
//!
//! Enumerates assignments of reduced words to variables and keeps the ones
//! that satisfy the system, literally (monoid) or after free reduction
//! (group). Deliberately built on nothing but the symbol tables, so its
//! answers are independent of the automaton construction it is used to
//! cross-check.

use std::collections::BTreeMap;

use crate::alphabet::{free_reduce, is_reduced, Sym, Universe, Word};
use crate::equation::{apply_subst, close_subst};

/// Which equality the solver checks after substitution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Semantics {
    /// Sides must be equal as words.
    Monoid,
    /// Sides must be equal after free reduction.
    Group,
}

/// All reduced words over the original letters up to `max_len`, in
/// length-then-lex order (lex by symbol index).
pub fn reduced_words(univ: &Universe, max_len: usize) -> Vec<Word> {
    let letters: Vec<Sym> = univ.a_letters().collect();
    let mut out: Vec<Word> = vec![vec![]];
    let mut layer: Vec<Word> = vec![vec![]];
    for _ in 0..max_len {
        let mut next: Vec<Word> = Vec::new();
        for w in &layer {
            for &s in &letters {
                if w.last() != Some(&univ.inv(s)) {
                    let mut w2 = w.clone();
                    w2.push(s);
                    next.push(w2);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Does the closed assignment satisfy every equation of the system?
pub fn satisfies(
    univ: &Universe,
    sides: &[(Word, Word)],
    semantics: Semantics,
    sigma: &BTreeMap<Sym, Word>,
) -> bool {
    let sigma = close_subst(univ, sigma);
    sides.iter().all(|(u, v)| {
        let lhs = apply_subst(univ, u, &sigma);
        let rhs = apply_subst(univ, v, &sigma);
        match semantics {
            Semantics::Monoid => lhs == rhs,
            Semantics::Group => free_reduce(univ, &lhs) == free_reduce(univ, &rhs),
        }
    })
}

/// Sort key shared with the automaton enumerator so both sides of the
/// oracle comparison list tuples identically: total length first, then
/// componentwise length-then-lex.
pub fn tuple_key(tuple: &[Word]) -> (usize, Vec<(usize, Word)>) {
    (
        tuple.iter().map(|w| w.len()).sum(),
        tuple.iter().map(|w| (w.len(), w.clone())).collect(),
    )
}

/// Solve by enumeration: every assignment of reduced words of length at
/// most `max_len` to `vars` (positive representatives; partners take the
/// involuted images) satisfying the whole system. Tuples are returned in
/// slot order of `vars`, sorted by [`tuple_key`].
pub fn brute_solutions(
    univ: &Universe,
    sides: &[(Word, Word)],
    vars: &[Sym],
    semantics: Semantics,
    max_len: usize,
) -> Vec<Vec<Word>> {
    let pool = reduced_words(univ, max_len);
    let mut out: Vec<Vec<Word>> = Vec::new();
    let mut tuple: Vec<Word> = Vec::with_capacity(vars.len());
    fn rec(
        univ: &Universe,
        sides: &[(Word, Word)],
        semantics: Semantics,
        vars: &[Sym],
        pool: &[Word],
        tuple: &mut Vec<Word>,
        out: &mut Vec<Vec<Word>>,
    ) {
        if tuple.len() == vars.len() {
            let sigma: BTreeMap<Sym, Word> = vars
                .iter()
                .copied()
                .zip(tuple.iter().cloned())
                .collect();
            if satisfies(univ, sides, semantics, &sigma) {
                out.push(tuple.clone());
            }
            return;
        }
        for w in pool {
            tuple.push(w.clone());
            rec(univ, sides, semantics, vars, pool, tuple, out);
            tuple.pop();
        }
    }
    rec(univ, sides, semantics, vars, &pool, &mut tuple, &mut out);
    out.sort_by_key(|t| tuple_key(t));
    out
}

/// Reject assignments whose images are not reduced; solution sets are
/// defined over reduced words in both semantics.
pub fn all_reduced(univ: &Universe, sigma: &BTreeMap<Sym, Word>) -> bool {
    sigma.values().all(|w| is_reduced(univ, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Universe, Sym, Sym, Sym) {
        let mut u = Universe::new();
        let (a, _) = u.add_letter_pair("a").unwrap();
        let (b, _) = u.add_letter_pair("b").unwrap();
        let (x, _) = u.add_var_pair("X").unwrap();
        (u, a, b, x)
    }

    #[test]
    fn reduced_words_count_and_order() {
        let (u, a, _, _) = setup();
        let words = reduced_words(&u, 3);
        // 1 + 4 + 4*3 + 4*3*3 over a 4-letter alphabet.
        assert_eq!(words.len(), 1 + 4 + 12 + 36);
        assert_eq!(words[0], Vec::<Sym>::new());
        assert_eq!(words[1], vec![a]);
        assert!(words.iter().all(|w| is_reduced(&u, w)));
        let mut sorted = words.clone();
        sorted.sort_by_key(|w| (w.len(), w.clone()));
        assert_eq!(words, sorted);
    }

    #[test]
    fn unique_solution_of_ax_aaab() {
        let (u, a, b, x) = setup();
        let sols = brute_solutions(
            &u,
            &[(vec![a, x], vec![a, a, a, b])],
            &[x],
            Semantics::Monoid,
            3,
        );
        assert_eq!(sols, vec![vec![vec![a, a, b]]]);
        // The same equation read in the free group has the same single
        // solution at this bound.
        let gsols = brute_solutions(
            &u,
            &[(vec![a, x], vec![a, a, a, b])],
            &[x],
            Semantics::Group,
            3,
        );
        assert_eq!(gsols, sols);
    }

    #[test]
    fn commutation_solutions_differ_by_semantics() {
        let (u, a, _, x) = setup();
        let sides = [(vec![x, a], vec![a, x])];
        let msols = brute_solutions(&u, &sides, &[x], Semantics::Monoid, 2);
        // In the free monoid only powers of a commute with a.
        assert_eq!(msols, vec![vec![vec![]], vec![vec![a]], vec![vec![a, a]]]);
        let gsols = brute_solutions(&u, &sides, &[x], Semantics::Group, 2);
        // In the free group negative powers join in.
        let abar = u.inv(a);
        assert_eq!(
            gsols,
            vec![
                vec![vec![]],
                vec![vec![a]],
                vec![vec![abar]],
                vec![vec![a, a]],
                vec![vec![abar, abar]],
            ]
        );
    }

    #[test]
    fn xxbar_collapses_only_in_groups() {
        let (u, _, _, x) = setup();
        let xbar = u.inv(x);
        let sides = [(vec![x, xbar], vec![])];
        let msols = brute_solutions(&u, &sides, &[x], Semantics::Monoid, 2);
        assert_eq!(msols.len(), 1); // only the empty image
        let gsols = brute_solutions(&u, &sides, &[x], Semantics::Group, 2);
        assert_eq!(gsols.len(), 1 + 4 + 12); // every reduced word
    }

    #[test]
    fn unsatisfiable_constant_equation() {
        let (u, a, b, x) = setup();
        let sols = brute_solutions(&u, &[(vec![a], vec![b])], &[x], Semantics::Monoid, 2);
        assert!(sols.is_empty());
    }

    #[test]
    fn system_constrains_jointly() {
        let (u, a, b, x) = setup();
        // X a = a X and X b = b X forces X to be a power of both, so empty.
        let sides = [
            (vec![x, a], vec![a, x]),
            (vec![x, b], vec![b, x]),
        ];
        let sols = brute_solutions(&u, &sides, &[x], Semantics::Monoid, 3);
        assert_eq!(sols, vec![vec![vec![]]]);
    }
}
