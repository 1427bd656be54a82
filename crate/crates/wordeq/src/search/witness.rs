//! Deterministic solution witnesses.
//!
//! A witness is a shortest accepted path through the automaton together
//! with, at every vertex of the path, a substitution solving that vertex's
//! equation.  The substitutions are built backwards from the accepting
//! vertex, pulling a solution of each arc's destination through the arc's
//! label, and the one at the initial vertex assigns the original unknowns
//! words over the original letters: a checked solution of the input
//! equation.  The path choice is deterministic: breadth-first over vertex
//! indices, lowest arc first.

use std::collections::BTreeMap;

use crate::alphabet::{Sym, Universe, Word};
use crate::edtol::Machine;
use crate::equation::{is_solution_of_state, State};
use crate::{Error, Result};
use crate::transitions::{rename_state, word_image, Label, SubstKind};

/// One arc of the witness path, with a solution of the source vertex.
#[derive(Clone, Debug)]
pub struct TraceStep {
    /// Source vertex index.
    pub src: usize,
    /// Destination vertex index.
    pub dst: usize,
    /// The arc label taken.
    pub label: Label,
    /// A substitution solving the source vertex's equation, both
    /// polarities of every variable present.
    pub sigma: BTreeMap<Sym, Word>,
}

/// A checked accepted path from an initial vertex to a final one.
#[derive(Clone, Debug)]
pub struct Witness {
    /// The path, initial vertex first.
    pub steps: Vec<TraceStep>,
    /// The solution at the initial vertex: images of the unknowns over the
    /// original letters.
    pub sigma: BTreeMap<Sym, Word>,
}

/// Pull a solution of an arc's destination back to its source.
fn pull_back(
    univ: &Universe,
    dst_state: &State,
    label: &Label,
    sigma: &BTreeMap<Sym, Word>,
) -> Result<BTreeMap<Sym, Word>> {
    match label {
        Label::Subst(SubstKind::Pop { var, prefix }) => {
            let mut out = sigma.clone();
            let tail = sigma
                .get(var)
                .ok_or_else(|| witness_bug("popped variable lost"))?;
            let mut img = prefix.clone();
            img.extend_from_slice(tail);
            out.insert(univ.inv(*var), univ.inv_word(&img));
            out.insert(*var, img);
            Ok(out)
        }
        Label::Subst(SubstKind::Erase { var }) => {
            let mut out = sigma.clone();
            out.insert(*var, Vec::new());
            out.insert(univ.inv(*var), Vec::new());
            Ok(out)
        }
        Label::Subst(SubstKind::Split { var, letter, new_var }) => {
            let mut out = sigma.clone();
            let shed = sigma
                .get(new_var)
                .ok_or_else(|| witness_bug("split remainder lost"))?;
            let tail = sigma
                .get(var)
                .ok_or_else(|| witness_bug("split variable lost"))?;
            let mut img = vec![*letter];
            img.extend_from_slice(shed);
            img.extend_from_slice(tail);
            out.remove(new_var);
            out.remove(&univ.inv(*new_var));
            out.insert(univ.inv(*var), univ.inv_word(&img));
            out.insert(*var, img);
            Ok(out)
        }
        Label::Subst(SubstKind::Reduce { .. }) => Ok(sigma.clone()),
        Label::Morph { map, .. } => Ok(sigma
            .iter()
            .map(|(&v, img)| (v, word_image(map, img)))
            .collect()),
        Label::Renamed { rename, base } => {
            let raw = rename_state(rename, dst_state);
            let renamed: BTreeMap<Sym, Word> = sigma
                .iter()
                .map(|(&v, img)| {
                    let v = rename.get(&v).copied().unwrap_or(v);
                    let img: Word = img
                        .iter()
                        .map(|&s| rename.get(&s).copied().unwrap_or(s))
                        .collect();
                    (v, img)
                })
                .collect();
            pull_back(univ, &raw, base, &renamed)
        }
    }
}

fn witness_bug(what: &str) -> Error {
    Error::Invariant(format!("witness transport failed: {what}"))
}

/// Extract a witness from a machine, or `None` when no accepted path
/// exists.  Every step's substitution is checked against its vertex.
pub fn witness_trace(univ: &Universe, machine: &Machine) -> Result<Option<Witness>> {
    let Some(edges) = shortest_path(machine) else {
        return Ok(None);
    };

    // Solve backwards from the accepting vertex, which has no variables.
    let mut sigmas: Vec<BTreeMap<Sym, Word>> = vec![BTreeMap::new()];
    for &ei in edges.iter().rev() {
        let e = &machine.edges[ei];
        let dst_state = &machine.nodes[e.dst].state;
        let sigma = pull_back(univ, dst_state, &e.label, sigmas.last().unwrap())?;
        sigmas.push(sigma);
    }
    sigmas.reverse();

    let mut steps = Vec::with_capacity(edges.len());
    for (i, &ei) in edges.iter().enumerate() {
        let e = &machine.edges[ei];
        let state = &machine.nodes[e.src].state;
        if !is_solution_of_state(univ, state, &sigmas[i]) {
            return Err(witness_bug("a step does not solve its vertex"));
        }
        steps.push(TraceStep {
            src: e.src,
            dst: e.dst,
            label: e.label.clone(),
            sigma: sigmas[i].clone(),
        });
    }
    let sigma = match steps.first() {
        Some(s) => s.sigma.clone(),
        // Degenerate machine: an initial vertex is itself final.
        None => BTreeMap::new(),
    };
    Ok(Some(Witness { steps, sigma }))
}

/// Shortest initial-to-final path as a list of arc indices, breadth-first
/// with ties broken by vertex and arc order.
fn shortest_path(machine: &Machine) -> Option<Vec<usize>> {
    let adj = machine.out_adj();
    let mut parent: Vec<Option<usize>> = vec![None; machine.nodes.len()];
    let mut seen = vec![false; machine.nodes.len()];
    let mut queue = std::collections::VecDeque::new();
    for &i in &machine.initials {
        if !seen[i] {
            seen[i] = true;
            queue.push_back(i);
        }
    }
    let is_final = {
        let mut f = vec![false; machine.nodes.len()];
        for &i in &machine.finals {
            f[i] = true;
        }
        f
    };
    let mut hit = queue.iter().copied().find(|&i| is_final[i]);
    while hit.is_none() {
        let Some(v) = queue.pop_front() else {
            return None;
        };
        for &ei in &adj[v] {
            let dst = machine.edges[ei].dst;
            if seen[dst] {
                continue;
            }
            seen[dst] = true;
            parent[dst] = Some(ei);
            if is_final[dst] {
                hit = Some(dst);
                break;
            }
            queue.push_back(dst);
        }
    }
    let mut edges = Vec::new();
    let mut v = hit.unwrap();
    while let Some(ei) = parent[v] {
        edges.push(ei);
        v = machine.edges[ei].src;
    }
    edges.reverse();
    Some(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equation::tests::fixture;

    #[test]
    fn pull_back_through_pop_and_erase() {
        let (problem, _a, b, x) = fixture();
        let univ = &problem.univ;
        // Final-side state: X gone. Walk back through X -> 1, then
        // X -> bX: the source solution must be sigma(X) = b.
        let mut dst = problem.initial.clone();
        dst.x.clear();
        let erased = pull_back(
            univ,
            &dst,
            &Label::Subst(SubstKind::Erase { var: x }),
            &BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(erased[&x], Vec::<Sym>::new());
        let popped = pull_back(
            univ,
            &dst,
            &Label::Subst(SubstKind::Pop {
                var: x,
                prefix: vec![b],
            }),
            &erased,
        )
        .unwrap();
        assert_eq!(popped[&x], vec![b]);
        assert_eq!(popped[&univ.inv(x)], vec![univ.inv(b)]);
    }

    #[test]
    fn pull_back_through_morphism_expands_images() {
        let (problem, a, b, x) = fixture();
        let univ = &problem.univ;
        let dst = problem.initial.clone();
        // A morphism replacing some letter e by ab expands inside images.
        let mut sigma = BTreeMap::new();
        sigma.insert(x, vec![a]);
        sigma.insert(univ.inv(x), vec![univ.inv(a)]);
        let map = BTreeMap::from([
            (a, vec![a, b]),
            (univ.inv(a), vec![univ.inv(b), univ.inv(a)]),
        ]);
        let out = pull_back(
            univ,
            &dst,
            &Label::Morph {
                map,
                kind: crate::transitions::MorphKind::Pair,
            },
            &sigma,
        )
        .unwrap();
        assert_eq!(out[&x], vec![a, b]);
        assert_eq!(out[&univ.inv(x)], vec![univ.inv(b), univ.inv(a)]);
    }

    #[test]
    fn pull_back_through_rename_translates_symbols() {
        let (problem, a, b, x) = fixture();
        let univ = &problem.univ;
        let dst = problem.initial.clone();
        // Stored symbols: the destination talks about b where the raw arc
        // talked about a.
        let rename = BTreeMap::from([(b, a), (univ.inv(b), univ.inv(a))]);
        let mut sigma = BTreeMap::new();
        sigma.insert(x, vec![b]);
        sigma.insert(univ.inv(x), vec![univ.inv(b)]);
        let out = pull_back(
            univ,
            &dst,
            &Label::Renamed {
                rename,
                base: Box::new(Label::Subst(SubstKind::Pop {
                    var: x,
                    prefix: vec![a],
                })),
            },
            &sigma,
        )
        .unwrap();
        assert_eq!(out[&x], vec![a, a]);
        assert_eq!(out[&univ.inv(x)], vec![univ.inv(a), univ.inv(a)]);
    }
}
