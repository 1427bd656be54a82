//! Enumeration of the initial letter abstractions.
//!
//! Before the search starts, every variable is annotated with the normal
//! form of its eventual image: either the empty word or the pair of its
//! first and last letters.  Each consistent annotation yields one initial
//! automaton node.  Consistency means that mirrored segments of the initial
//! word carry involuted normal forms, which prunes most of the raw
//! `(1 + |A|^2)^m` grid before it is materialised.

use std::collections::BTreeMap;

use crate::alphabet::{mu0_sym, Nf, Sym, Universe};
use crate::equation::{Problem, State};

/// Result of the initial enumeration.
pub struct Assignments {
    /// One state per consistent abstraction, in lexicographic guess order.
    pub states: Vec<State>,
    /// True if `cap` stopped the enumeration early.
    pub truncated: bool,
}

/// Normal form of a segment under a partial variable annotation.
///
/// Returns `None` when the segment mentions a variable that has no value
/// yet.  Letters contribute their ground normal form.
fn seg_mu(
    univ: &Universe,
    seg: &[Sym],
    partial: &BTreeMap<Sym, Nf>,
) -> Option<Nf> {
    let mut acc = Nf::One;
    for &s in seg {
        let v = if univ.is_var(s) {
            *partial.get(&s)?
        } else {
            mu0_sym(univ, s)
        };
        acc = acc.mul(v, univ);
    }
    Some(acc)
}

/// Enumerate all consistent initial abstractions of a problem, capped.
pub fn initial_assignments(problem: &Problem, cap: usize) -> Assignments {
    let univ = &problem.univ;
    let base = &problem.initial;
    let vars = &problem.vars;

    // Candidate normal forms for one variable: empty, or any first/last
    // letter pair that some reduced word realises.  A pair `(f, inv f)`
    // needs a third letter in between, so it is only offered when the
    // alphabet has at least two letter pairs.
    let letters: Vec<Sym> = univ.a_letters().collect();
    let mut cands: Vec<Nf> = vec![Nf::One];
    for &f in &letters {
        for &l in &letters {
            if l == univ.inv(f) && univ.a_len() < 4 {
                continue;
            }
            cands.push(Nf::Pair(f, l));
        }
    }

    // Schedule the mirror checks: the pair of segments (i, mirror(i)) is
    // checked as soon as the last variable element occurring in either is
    // assigned.
    let segs = base.segments();
    let nsegs = segs.len();
    let mut elem_of: BTreeMap<Sym, usize> = BTreeMap::new();
    for (k, &v) in vars.iter().enumerate() {
        elem_of.insert(v, k);
        elem_of.insert(univ.inv(v), k);
    }
    let mut checks_at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); vars.len()];
    let mut ground_checks: Vec<(usize, usize)> = Vec::new();
    for i in 0..nsegs / 2 {
        let j = nsegs - 1 - i;
        let mut last: Option<usize> = None;
        for &s in segs[i].iter().chain(segs[j].iter()) {
            if let Some(&k) = elem_of.get(&s) {
                last = Some(last.map_or(k, |l| l.max(k)));
            }
        }
        match last {
            Some(k) => checks_at[k].push((i, j)),
            None => ground_checks.push((i, j)),
        }
    }

    let mut out = Assignments {
        states: Vec::new(),
        truncated: false,
    };
    for &(i, j) in &ground_checks {
        let a = seg_mu(univ, segs[i], &BTreeMap::new());
        let b = seg_mu(univ, segs[j], &BTreeMap::new());
        if a != b.map(|n| n.invol(univ)) {
            return out;
        }
    }

    let mut partial: BTreeMap<Sym, Nf> = BTreeMap::new();
    dfs(
        univ, base, vars, &cands, &segs, &checks_at, cap, 0, &mut partial, &mut out,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    univ: &Universe,
    base: &State,
    vars: &[Sym],
    cands: &[Nf],
    segs: &[&[Sym]],
    checks_at: &[Vec<(usize, usize)>],
    cap: usize,
    k: usize,
    partial: &mut BTreeMap<Sym, Nf>,
    out: &mut Assignments,
) {
    if out.truncated {
        return;
    }
    if k == vars.len() {
        if out.states.len() >= cap {
            out.truncated = true;
            return;
        }
        let mut state = base.clone();
        for (&v, &nf) in partial.iter() {
            state.mu.insert(v, nf);
        }
        out.states.push(state);
        return;
    }
    let v = vars[k];
    for &nf in cands {
        partial.insert(v, nf);
        partial.insert(univ.inv(v), nf.invol(univ));
        let ok = checks_at[k].iter().all(|&(i, j)| {
            let a = seg_mu(univ, segs[i], partial);
            let b = seg_mu(univ, segs[j], partial);
            a == b.map(|n| n.invol(univ))
        });
        if ok {
            dfs(
                univ, base, vars, cands, segs, checks_at, cap, k + 1, partial, out,
            );
        }
    }
    partial.remove(&v);
    partial.remove(&univ.inv(v));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Universe;
    use crate::equation::tests::fixture;

    #[test]
    fn consistent_assignments_only() {
        // a X = a a a b: the segment pair (aX, mu-mirror of inv(aaab))
        // forces mu(aX) = (a, b), so mu(X) is (f, b) with f not cancelling
        // the leading a.  That leaves (a,b), (b,b) and (inv b, b).
        let (p, a, b, x) = fixture();
        let asn = initial_assignments(&p, 4096);
        assert!(!asn.truncated);
        let mut got: Vec<Nf> = asn.states.iter().map(|st| st.mu[&x]).collect();
        got.sort();
        let mut want = vec![
            Nf::Pair(a, b),
            Nf::Pair(b, b),
            Nf::Pair(p.univ.inv(b), b),
        ];
        want.sort();
        assert_eq!(got, want);
        for st in &asn.states {
            let segs = st.segments();
            let n = segs.len();
            for i in 0..n / 2 {
                let lhs = st.mu_word(&p.univ, segs[i]);
                let rhs = st.mu_word(&p.univ, segs[n - 1 - i]);
                assert_eq!(lhs, rhs.invol(&p.univ));
            }
        }
    }

    #[test]
    fn ground_conflict_yields_nothing() {
        let mut univ = Universe::new();
        let (a, _) = univ.add_letter_pair("a").unwrap();
        let (b, _) = univ.add_letter_pair("b").unwrap();
        let (x, _) = univ.add_var_pair("X").unwrap();
        let p = Problem::single(univ, vec![a, x], vec![b], vec![x]).unwrap();
        let asn = initial_assignments(&p, 4096);
        // mu(aX) always starts with a, so no guess matches mu(b) = (b, b).
        assert!(asn.states.is_empty());
        assert!(!asn.truncated);
    }

    #[test]
    fn cap_marks_truncation() {
        let mut univ = Universe::new();
        let (a, _) = univ.add_letter_pair("a").unwrap();
        let (b, _) = univ.add_letter_pair("b").unwrap();
        let (x, _) = univ.add_var_pair("X").unwrap();
        let (y, _) = univ.add_var_pair("Y").unwrap();
        let _ = (a, b);
        let p = Problem::single(univ, vec![x, y], vec![y, x], vec![x, y]).unwrap();
        let asn = initial_assignments(&p, 3);
        assert!(asn.truncated);
        assert_eq!(asn.states.len(), 3);
    }
}
