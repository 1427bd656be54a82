//! The solution automaton: vertices, labelled arcs, trimming,
//! classification, enumeration, JSON and DOT export.
//!
//! A [`Machine`] is a finite directed graph. Every vertex carries an
//! extended equation, every arc a [`Label`]: either a substitution (which
//! acts as the identity on letters) or a proper morphism mapping each
//! letter of the destination's alphabet to a word over the source's.
//! Accepted paths run from an initial vertex to a final one; composing the
//! arc labels from the final end backwards and applying the composite to
//! the single seed letters sitting in the final vertex's first `m`
//! segments yields one solution tuple, and every solution arises from some
//! accepted path. The solution set is therefore an EDT0L language with
//! this machine as its rational control.
//!
//! Because every non-final label sends each letter to a nonempty word,
//! walking an arc backwards never shortens a tuple. That single fact
//! drives everything here: enumeration can prune by length, and the
//! finiteness test reduces to finding a cycle that properly grows some
//! letter still relevant to a variable segment (see
//! [`Machine::classify`]).

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::alphabet::{Sym, Universe, Word};
use crate::equation::{display_state, validate_state, Bounds, State, Validation};
use crate::oracle;
use crate::transitions::{validate_edge, word_image, Label};
use crate::{Error, Result};

/// One vertex of the automaton.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Node {
    /// The extended equation this vertex carries.
    pub state: State,
    /// Free-form note about how the vertex arose (search phase); only used
    /// for display and debugging.
    pub tag: String,
}

/// One arc of the automaton.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    /// Maps words over the destination's alphabet to words over the
    /// source's; substitutions act as the identity on letters.
    pub label: Label,
}

/// The solution automaton of one compiled instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Machine {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Vertices accepted paths start from, one per admissible initial
    /// constraint assignment.
    pub initials: Vec<usize>,
    /// Seed-shaped, variable-free vertices accepted paths end in.
    pub finals: Vec<usize>,
    /// Positive seed letters in segment order; final vertices hold these
    /// (or their inverses) one per segment.
    pub seeds: Vec<Sym>,
    /// Number of variable pairs; the first `m` segments of a final vertex
    /// describe the variable images.
    pub m: usize,
    /// Instance size bounds, kept for validation and reporting.
    pub bounds: Bounds,
    /// True when exploration stopped at a resource cap. Parts of the
    /// automaton may then be missing: positive findings (membership, a
    /// growing cycle) remain trustworthy, absence claims do not.
    pub incomplete: bool,
}

/// Cardinality of the solution set, as read off the machine.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum SolutionClass {
    /// No accepted path: no solutions.
    Empty,
    /// Accepted paths exist but no cycle can grow a variable image.
    Finite,
    /// Some accepted path can be pumped into infinitely many solutions.
    Infinite,
}

/// A [`SolutionClass`] plus whether it is proven.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Classification {
    pub class: SolutionClass,
    /// False when a resource cap was hit and the class could still move up
    /// (an incomplete `Empty` may really be `Finite` or `Infinite`, an
    /// incomplete `Finite` may be `Infinite`). `Infinite` is always final:
    /// the growing cycle is an explicit witness.
    pub definitive: bool,
}

/// Caps for [`Machine::enumerate`].
#[derive(Clone, Copy, Debug)]
pub struct EnumerateOptions {
    /// Stop once this many distinct solution tuples have been collected.
    pub max_solutions: usize,
    /// Drop a partial tuple once one component exceeds this many letters.
    /// Labels never erase letters, so such a tuple can only grow further
    /// and no solution below the bound is lost.
    pub max_len: usize,
    /// Abort after this many distinct (vertex, tuple) pairs.
    pub max_visited: usize,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions {
            max_solutions: 512,
            max_len: 64,
            max_visited: 500_000,
        }
    }
}

/// Result of [`Machine::enumerate`].
#[derive(Clone, Debug)]
pub struct Enumeration {
    /// Variable image tuples, one word per variable pair in declaration
    /// order, sorted by total length, then componentwise.
    pub tuples: Vec<Vec<Word>>,
    /// True when `tuples` is provably the entire solution set: no cap was
    /// hit during enumeration and the machine itself is complete.
    pub exhaustive: bool,
}

/// Image of one tuple component under an arc label, read backwards.
fn component_image(label: &Label, w: &[Sym]) -> Word {
    match label {
        Label::Morph { map, .. } => word_image(map, w),
        Label::Subst(_) => w.to_vec(),
        Label::Renamed { rename, base } => {
            let renamed: Word = w
                .iter()
                .map(|s| *rename.get(s).unwrap_or(s))
                .collect();
            component_image(base, &renamed)
        }
    }
}

/// Image of a single letter under an arc label, read backwards.
fn letter_image(label: &Label, c: Sym) -> Word {
    match label {
        Label::Morph { map, .. } => map.get(&c).cloned().unwrap_or_else(|| vec![c]),
        Label::Subst(_) => vec![c],
        Label::Renamed { rename, base } => {
            letter_image(base, *rename.get(&c).unwrap_or(&c))
        }
    }
}

impl Machine {
    /// An empty machine for the given instance data.
    pub fn new(seeds: Vec<Sym>, m: usize, bounds: Bounds) -> Self {
        Machine {
            nodes: Vec::new(),
            edges: Vec::new(),
            initials: Vec::new(),
            finals: Vec::new(),
            seeds,
            m,
            bounds,
            incomplete: false,
        }
    }

    /// Append a vertex and return its index.
    pub fn add_node(&mut self, state: State, tag: impl Into<String>) -> usize {
        self.nodes.push(Node {
            state,
            tag: tag.into(),
        });
        self.nodes.len() - 1
    }

    /// Append an arc.
    pub fn add_edge(&mut self, src: usize, dst: usize, label: Label) {
        self.edges.push(Edge { src, dst, label });
    }

    /// Outgoing arc indices per vertex.
    pub fn out_adj(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.src].push(i);
        }
        adj
    }

    /// Incoming arc indices per vertex.
    pub fn in_adj(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.dst].push(i);
        }
        adj
    }

    /// Vertices lying on some accepted path: reachable from an initial
    /// vertex and co-reachable from a final one.
    pub fn live_mask(&self) -> Vec<bool> {
        let forward = self.reach(&self.initials, &self.out_adj(), |e| e.dst);
        let backward = self.reach(&self.finals, &self.in_adj(), |e| e.src);
        forward
            .into_iter()
            .zip(backward)
            .map(|(f, b)| f && b)
            .collect()
    }

    fn reach(
        &self,
        starts: &[usize],
        adj: &[Vec<usize>],
        step: impl Fn(&Edge) -> usize,
    ) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &s in starts {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &ei in &adj[v] {
                let w = step(&self.edges[ei]);
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// True when some accepted path exists, i.e. the instance has a
    /// solution.
    pub fn is_sat(&self) -> bool {
        self.live_mask().into_iter().any(|b| b)
    }

    /// The sub-machine of vertices on accepted paths, indices remapped.
    pub fn trim(&self) -> Machine {
        let mask = self.live_mask();
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut out = Machine::new(self.seeds.clone(), self.m, self.bounds);
        out.incomplete = self.incomplete;
        for (i, node) in self.nodes.iter().enumerate() {
            if mask[i] {
                remap[i] = out.add_node(node.state.clone(), node.tag.clone());
            }
        }
        for e in &self.edges {
            if mask[e.src] && mask[e.dst] {
                out.add_edge(remap[e.src], remap[e.dst], e.label.clone());
            }
        }
        out.initials = self
            .initials
            .iter()
            .filter(|&&i| mask[i])
            .map(|&i| remap[i])
            .collect();
        out.finals = self
            .finals
            .iter()
            .filter(|&&i| mask[i])
            .map(|&i| remap[i])
            .collect();
        out
    }

    /// Re-check every vertex and arc against the structural invariants.
    /// Final vertices must additionally be variable-free sinks.
    pub fn validate(&self, univ: &Universe, level: Validation) -> Result<()> {
        let n = self.nodes.len();
        for node in &self.nodes {
            validate_state(univ, &node.state, &self.bounds, level)?;
        }
        for e in &self.edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::Invariant("arc endpoint out of range".into()));
            }
            validate_edge(univ, &self.nodes[e.src].state, &self.nodes[e.dst].state, &e.label)?;
        }
        for &i in self.initials.iter().chain(self.finals.iter()) {
            if i >= n {
                return Err(Error::Invariant("marked vertex out of range".into()));
            }
        }
        let out = self.out_adj();
        for &f in &self.finals {
            if !self.nodes[f].state.var_free() {
                return Err(Error::Invariant("final vertex contains a variable".into()));
            }
            if !out[f].is_empty() {
                return Err(Error::Invariant("final vertex has outgoing arcs".into()));
            }
        }
        Ok(())
    }

    /// True when the trimmed graph contains a directed cycle. Cycles are
    /// what make infinitely many accepting paths possible; whether the
    /// solution set itself is infinite is [`classify`](Machine::classify)'s
    /// sharper question.
    pub fn has_cycle(&self) -> bool {
        let t = self.trim();
        let adj: Vec<Vec<usize>> = t
            .out_adj()
            .iter()
            .map(|es| es.iter().map(|&ei| t.edges[ei].dst).collect())
            .collect();
        let comp = tarjan(&adj);
        let mut sizes = vec![0usize; t.nodes.len()];
        for &c in &comp {
            sizes[c] += 1;
        }
        (0..t.nodes.len()).any(|v| sizes[comp[v]] > 1)
            || adj.iter().enumerate().any(|(v, ns)| ns.contains(&v))
    }

    /// Letters feeding the variable segments at each final vertex.
    fn variable_seed_pairs(&self) -> Vec<(usize, Sym)> {
        let mut roots = Vec::new();
        for &f in &self.finals {
            let segs = self.nodes[f].state.segments();
            for seg in segs.iter().take(self.m) {
                for &c in *seg {
                    roots.push((f, c));
                }
            }
        }
        roots
    }

    /// Decide whether some cycle grows a letter that still contributes to
    /// a variable image.
    ///
    /// Work in the letter-flow graph whose vertices are pairs `(machine
    /// vertex, letter)` and which has an arc `(v, c) -> (u, d)` for every
    /// machine arc `u -> v` and every letter `d` in the label image of
    /// `c`, flagged as growing when that image has two or more letters.
    /// Only pairs reachable from the variable-segment letters of final
    /// vertices matter: those are exactly the letters whose copies survive
    /// into some variable image. The solution set is infinite if and only
    /// if a growing arc lies on a cycle of this graph. Walking such a
    /// cycle once returns the letter to its vertex while adding at least
    /// one extra letter to the tracked component, and since no label
    /// erases letters the extras persist all the way to an initial vertex,
    /// so pumping yields arbitrarily long variable images. Conversely an
    /// unbounded solution set forces some flow path to cross a growing arc
    /// twice, closing such a cycle.
    fn has_growing_cycle(&self) -> bool {
        let in_adj = self.in_adj();
        let mut index: BTreeMap<(usize, Sym), usize> = BTreeMap::new();
        let mut pairs: Vec<(usize, Sym)> = Vec::new();
        let mut queue: VecDeque<usize> = VecDeque::new();
        for root in self.variable_seed_pairs() {
            if !index.contains_key(&root) {
                index.insert(root, pairs.len());
                pairs.push(root);
                queue.push_back(pairs.len() - 1);
            }
        }
        // (flow source, flow target, grows)
        let mut flow: Vec<(usize, usize, bool)> = Vec::new();
        while let Some(pi) = queue.pop_front() {
            let (v, c) = pairs[pi];
            for &ei in &in_adj[v] {
                let e = &self.edges[ei];
                let img = letter_image(&e.label, c);
                let grows = img.len() >= 2;
                let mut targets: BTreeSet<Sym> = BTreeSet::new();
                targets.extend(img);
                for d in targets {
                    let key = (e.src, d);
                    let qi = *index.entry(key).or_insert_with(|| {
                        pairs.push(key);
                        queue.push_back(pairs.len() - 1);
                        pairs.len() - 1
                    });
                    flow.push((pi, qi, grows));
                }
            }
        }
        let mut adj = vec![Vec::new(); pairs.len()];
        for &(s, t, _) in &flow {
            adj[s].push(t);
        }
        let comp = tarjan(&adj);
        flow.iter().any(|&(s, t, g)| g && comp[s] == comp[t])
    }

    /// Classify the solution set by trimming and searching for a growing
    /// cycle.
    pub fn classify(&self) -> Classification {
        let t = self.trim();
        if t.nodes.is_empty() {
            return Classification {
                class: SolutionClass::Empty,
                definitive: !self.incomplete,
            };
        }
        if t.has_growing_cycle() {
            return Classification {
                class: SolutionClass::Infinite,
                definitive: true,
            };
        }
        Classification {
            class: SolutionClass::Finite,
            definitive: !self.incomplete,
        }
    }

    /// List solution tuples by walking arcs backwards from the final
    /// vertices, applying each label to the tuple of variable components,
    /// and collecting tuples that arrive at an initial vertex.
    pub fn enumerate(&self, opts: &EnumerateOptions) -> Enumeration {
        let t = self.trim();
        let in_adj = t.in_adj();
        let initial_set: BTreeSet<usize> = t.initials.iter().copied().collect();
        let mut found: BTreeSet<Vec<Word>> = BTreeSet::new();
        let mut seen: BTreeSet<(usize, Vec<Word>)> = BTreeSet::new();
        let mut queue: VecDeque<(usize, Vec<Word>)> = VecDeque::new();
        let mut truncated = false;
        for &f in &t.finals {
            let tuple: Vec<Word> = t.nodes[f]
                .state
                .segments()
                .iter()
                .take(t.m)
                .map(|seg| seg.to_vec())
                .collect();
            if seen.insert((f, tuple.clone())) {
                queue.push_back((f, tuple));
            }
        }
        'walk: while let Some((v, tuple)) = queue.pop_front() {
            if initial_set.contains(&v) {
                found.insert(tuple.clone());
                if found.len() >= opts.max_solutions {
                    truncated = true;
                    break 'walk;
                }
            }
            for &ei in &in_adj[v] {
                let e = &t.edges[ei];
                let next: Vec<Word> = tuple
                    .iter()
                    .map(|w| component_image(&e.label, w))
                    .collect();
                if next.iter().any(|w| w.len() > opts.max_len) {
                    truncated = true;
                    continue;
                }
                if seen.len() >= opts.max_visited {
                    truncated = true;
                    break 'walk;
                }
                if seen.insert((e.src, next.clone())) {
                    queue.push_back((e.src, next));
                }
            }
        }
        let mut tuples: Vec<Vec<Word>> = found.into_iter().collect();
        tuples.sort_by_key(|t| oracle::tuple_key(t));
        Enumeration {
            tuples,
            exhaustive: !truncated && !self.incomplete,
        }
    }
}

/// Strongly connected components of a directed graph given as adjacency
/// lists; returns a component id per vertex. Iterative so that deep
/// machines cannot overflow the call stack.
fn tarjan(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut comp = vec![UNSET; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut next_comp = 0usize;
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some((v, start)) = call.pop() {
            if start == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let mut descended = false;
            for j in start..adj[v].len() {
                let w = adj[v][j];
                if index[w] == UNSET {
                    call.push((v, j + 1));
                    call.push((w, 0));
                    descended = true;
                    break;
                }
                if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if descended {
                continue;
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp[w] = next_comp;
                    if w == v {
                        break;
                    }
                }
                next_comp += 1;
            }
            if let Some(&(p, _)) = call.last() {
                low[p] = low[p].min(low[v]);
            }
        }
    }
    comp
}

#[derive(Serialize)]
struct DocOut<'a> {
    universe: &'a Universe,
    machine: &'a Machine,
}

#[derive(Deserialize)]
struct DocIn {
    universe: Universe,
    machine: Machine,
}

/// Serialize a machine together with its symbol tables.
pub fn to_json(univ: &Universe, machine: &Machine) -> Result<String> {
    Ok(serde_json::to_string_pretty(&DocOut {
        universe: univ,
        machine,
    })?)
}

/// Inverse of [`to_json`].
pub fn from_json(text: &str) -> Result<(Universe, Machine)> {
    let doc: DocIn = serde_json::from_str(text)?;
    Ok((doc.universe, doc.machine))
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Render the machine in Graphviz DOT format. Initial vertices are drawn
/// bold, final vertices with a double border.
pub fn to_dot(univ: &Universe, machine: &Machine) -> String {
    let mut out = String::new();
    out.push_str("digraph solutions {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=box, fontname=\"monospace\"];\n");
    for (i, node) in machine.nodes.iter().enumerate() {
        let mut attrs = format!(
            "label=\"{}: {}\"",
            i,
            dot_escape(&display_state(univ, &node.state))
        );
        if machine.initials.contains(&i) {
            attrs.push_str(", style=bold");
        }
        if machine.finals.contains(&i) {
            attrs.push_str(", peripheries=2");
        }
        out.push_str(&format!("  n{i} [{attrs}];\n"));
    }
    for e in &machine.edges {
        out.push_str(&format!(
            "  n{} -> n{} [label=\"{}\"];\n",
            e.src,
            e.dst,
            dot_escape(&e.label.display(univ))
        ));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{Nf, HASH};
    use crate::transitions::MorphKind;

    // A hand-built two-vertex machine over one letter pair and one
    // variable pair (m = 1): vertex 0 stands in for the initial equation,
    // vertex 1 is the seed-shaped final vertex reached by a final arc
    // sending seed 1 to `a` and the other seeds to the empty word. The
    // states are structurally plausible but not validated; these tests
    // exercise the graph algorithms, not the invariants.
    fn toy() -> (Universe, Machine, Sym) {
        let mut univ = Universe::new();
        let (a, _) = univ.add_letter_pair("a").unwrap();
        let (x, _) = univ.add_var_pair("X").unwrap();
        let mut seeds = Vec::new();
        for i in 1..=3 {
            let (s, _) = univ.add_seed_pair(i);
            seeds.push(s);
        }

        let mut fw: Word = vec![HASH];
        for &s in &seeds {
            fw.push(s);
            fw.push(HASH);
        }
        for &s in seeds.iter().rev() {
            fw.push(univ.inv(s));
            fw.push(HASH);
        }
        let fin = State {
            b: fw.iter().copied().collect(),
            x: BTreeSet::new(),
            theta: BTreeMap::new(),
            mu: BTreeMap::new(),
            w: fw,
        };

        let pre_w: Word = vec![HASH, a, HASH, a, HASH, univ.inv(a), HASH, univ.inv(a), HASH];
        let mut theta = BTreeMap::new();
        theta.insert(x, a);
        let mut mu = BTreeMap::new();
        mu.insert(a, Nf::Pair(a, a));
        let pre = State {
            b: pre_w.iter().copied().collect(),
            x: BTreeSet::new(),
            theta,
            mu,
            w: pre_w,
        };

        let bounds = Bounds::new(4, 9, 7, 1);
        let mut machine = Machine::new(seeds.clone(), 1, bounds);
        let n0 = machine.add_node(pre, "pre");
        let n1 = machine.add_node(fin, "final");
        let mut map: BTreeMap<Sym, Word> = BTreeMap::new();
        map.insert(seeds[0], vec![a]);
        map.insert(univ.inv(seeds[0]), vec![univ.inv(a)]);
        for &s in &seeds[1..] {
            map.insert(s, Vec::new());
            map.insert(univ.inv(s), Vec::new());
        }
        machine.add_edge(
            n0,
            n1,
            Label::Morph {
                map,
                kind: MorphKind::Final,
            },
        );
        machine.initials.push(n0);
        machine.finals.push(n1);
        (univ, machine, a)
    }

    fn doubling_loop(univ: &Universe, a: Sym) -> Label {
        let mut map: BTreeMap<Sym, Word> = BTreeMap::new();
        map.insert(a, vec![a, a]);
        map.insert(univ.inv(a), vec![univ.inv(a), univ.inv(a)]);
        Label::Morph {
            map,
            kind: MorphKind::BlockHalve,
        }
    }

    #[test]
    fn chain_machine_is_finite_with_one_solution() {
        let (_univ, machine, a) = toy();
        assert!(machine.is_sat());
        let c = machine.classify();
        assert_eq!(c.class, SolutionClass::Finite);
        assert!(c.definitive);
        let e = machine.enumerate(&EnumerateOptions::default());
        assert!(e.exhaustive);
        assert_eq!(e.tuples, vec![vec![vec![a]]]);
    }

    #[test]
    fn trim_removes_stranded_vertices() {
        let (_univ, mut machine, _) = toy();
        let stray = machine.add_node(machine.nodes[0].state.clone(), "stray");
        machine.add_edge(stray, stray, Label::Subst(crate::transitions::SubstKind::Reduce { dropped: vec![] }));
        assert_eq!(machine.nodes.len(), 3);
        let t = machine.trim();
        assert_eq!(t.nodes.len(), 2);
        assert_eq!(t.edges.len(), 1);
        assert_eq!(t.initials, vec![0]);
        assert_eq!(t.finals, vec![1]);
    }

    #[test]
    fn doubling_cycle_is_infinite_and_pumps() {
        let (univ, mut machine, a) = toy();
        machine.add_edge(0, 0, doubling_loop(&univ, a));
        let c = machine.classify();
        assert_eq!(c.class, SolutionClass::Infinite);
        assert!(c.definitive);
        // Even a capped machine proves infinity once the cycle is present.
        machine.incomplete = true;
        assert!(machine.classify().definitive);

        let e = machine.enumerate(&EnumerateOptions {
            max_solutions: 4,
            max_len: 16,
            max_visited: 1000,
        });
        assert!(!e.exhaustive);
        assert!(e.tuples.contains(&vec![vec![a]]));
        assert!(e.tuples.contains(&vec![vec![a, a]]));
        assert!(e.tuples.contains(&vec![vec![a, a, a, a]]));
    }

    #[test]
    fn unreachable_finals_classify_empty() {
        let (_univ, mut machine, _) = toy();
        machine.edges.clear();
        assert!(!machine.is_sat());
        let c = machine.classify();
        assert_eq!(c.class, SolutionClass::Empty);
        assert!(c.definitive);
        machine.incomplete = true;
        assert!(!machine.classify().definitive);
    }

    #[test]
    fn json_round_trip_preserves_structure_and_names() {
        let (univ, mut machine, a) = toy();
        machine.add_edge(0, 0, doubling_loop(&univ, a));
        let text = to_json(&univ, &machine).unwrap();
        let (univ2, machine2) = from_json(&text).unwrap();
        assert_eq!(univ2.name(a), "a");
        assert_eq!(machine2.nodes.len(), machine.nodes.len());
        assert_eq!(machine2.edges.len(), machine.edges.len());
        assert_eq!(machine2.seeds, machine.seeds);
        assert_eq!(machine2.m, machine.m);
        // Map-typed fields (alphabet, types, constraints) survive intact.
        assert_eq!(machine2.nodes[0].state, machine.nodes[0].state);
        assert_eq!(machine2.nodes[1].state, machine.nodes[1].state);
        assert_eq!(
            machine2.classify().class,
            SolutionClass::Infinite
        );
    }

    #[test]
    fn dot_output_marks_finals_and_labels_arcs() {
        let (univ, machine, _) = toy();
        let dot = to_dot(&univ, &machine);
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("peripheries=2"));
        assert!(dot.contains("n0 -> n1"));
        assert!(dot.contains("style=bold"));
    }

    #[test]
    fn tarjan_splits_known_components() {
        // 0 -> 1 -> 2 -> 0 is one component; 3 <-> 4 another; 2 -> 3
        // bridges them; 5 is alone.
        let adj = vec![vec![1], vec![2], vec![0, 3], vec![4], vec![3], vec![]];
        let comp = tarjan(&adj);
        assert_eq!(comp[0], comp[1]);
        assert_eq!(comp[1], comp[2]);
        assert_eq!(comp[3], comp[4]);
        assert_ne!(comp[0], comp[3]);
        assert_ne!(comp[5], comp[0]);
        assert_ne!(comp[5], comp[3]);
        // Components come out in reverse topological order.
        assert!(comp[3] < comp[0]);
    }

    #[test]
    fn validate_rejects_final_with_out_arcs() {
        let (univ, mut machine, a) = toy();
        machine.add_edge(1, 0, doubling_loop(&univ, a));
        let err = machine.validate(&univ, Validation::Fast);
        assert!(err.is_err());
    }
}
