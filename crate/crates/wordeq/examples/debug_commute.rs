//! Temporary diagnostic: node distribution for the commutation equation.

use std::collections::BTreeMap;

use wordeq::alphabet::Universe;
use wordeq::equation::Problem;
use wordeq::search::{build_machine_raw, SearchConfig};

fn main() {
    let max_nodes: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_000);
    let mut univ = Universe::new();
    let (a, _) = univ.add_letter_pair("a").unwrap();
    let (x, _) = univ.add_var_pair("X").unwrap();
    let mut problem = Problem::single(univ, vec![a, x], vec![x, a], vec![x]).unwrap();
    let cfg = SearchConfig {
        max_nodes,
        validation: None,
        ..SearchConfig::default()
    };
    let t0 = std::time::Instant::now();
    let machine = build_machine_raw(&mut problem, &cfg).unwrap();
    let dt = t0.elapsed();
    println!(
        "nodes={} edges={} incomplete={} has_cycle={} classify={:?} time={dt:?}",
        machine.nodes.len(),
        machine.edges.len(),
        machine.incomplete,
        machine.has_cycle(),
        machine.classify(),
    );

    let mut by_tag: BTreeMap<&str, usize> = BTreeMap::new();
    let mut wlen_by_tag: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut bsize: BTreeMap<usize, usize> = BTreeMap::new();
    for n in &machine.nodes {
        *by_tag.entry(n.tag.as_str()).or_default() += 1;
        let e = wlen_by_tag.entry(n.tag.as_str()).or_insert((usize::MAX, 0));
        e.0 = e.0.min(n.state.w.len());
        e.1 = e.1.max(n.state.w.len());
        *bsize.entry(n.state.b.len()).or_default() += 1;
    }
    println!("by tag (count, min |W|, max |W|):");
    for (tag, c) in &by_tag {
        let (lo, hi) = wlen_by_tag[tag];
        println!("  {tag:12} {c:7}  |W| in {lo}..={hi}");
    }
    println!("by |B|: {bsize:?}");

    // Sample states at each large |B| to inspect their letters.
    for want in [11usize, 13, 15, 17] {
        let mut shown = 0;
        for n in &machine.nodes {
            if n.state.b.len() == want && n.state.w.len() < 80 && shown < 2 {
                let w: Vec<String> = n
                    .state
                    .w
                    .iter()
                    .map(|s| problem.univ.name(*s).to_string())
                    .collect();
                let b: Vec<String> = n
                    .state
                    .b
                    .iter()
                    .map(|s| problem.univ.name(*s).to_string())
                    .collect();
                let th: Vec<String> = n
                    .state
                    .theta
                    .iter()
                    .map(|(k, v)| {
                        format!("{}:{}", problem.univ.name(*k), problem.univ.name(*v))
                    })
                    .collect();
                println!(
                    "sample tag={} |B|={} |W|={} B={{{}}} theta={{{}}}\n  W={}",
                    n.tag,
                    want,
                    n.state.w.len(),
                    b.join(","),
                    th.join(","),
                    w.join(" ")
                );
                shown += 1;
            }
        }
    }
}
