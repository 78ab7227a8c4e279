//! Divergence-preserving branching bisimilarity by signature refinement.
//!
//! τ-strongly-connected components are collapsed first: their states are
//! always equivalent, and a component with an internal τ-step is divergent.
//! Components are then processed in reverse topological order of the τ-graph
//! so that a state's signature can include those of its inert τ-successors.

use std::collections::BTreeSet;

use rustc_hash::FxHashMap;

use crate::action::Action;
use crate::lts::Lts;
use crate::CheckError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equivalence {
    pub equivalent: bool,
    /// Number of equivalence classes over both systems together.
    pub classes: usize,
    /// Class of each initial state; distinct classes distinguish them.
    pub left_class: u32,
    pub right_class: u32,
}

struct Graph {
    states: usize,
    tau: u32,
    /// (source, label, target)
    edges: Vec<(u32, u32, u32)>,
}

/// Old block, divergence and outgoing (label, target block) pairs.
type Signature = (u32, bool, Vec<(u32, u32)>);

/// Tarjan's algorithm on τ-edges, iteratively. Components are numbered in
/// the order they complete, so every τ-successor component gets a smaller
/// number than its predecessors.
fn tau_components(g: &Graph) -> (Vec<u32>, usize) {
    let n = g.states;
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(s, l, t) in &g.edges {
        if l == g.tau {
            adj[s as usize].push(t);
        }
    }
    const UNSEEN: u32 = u32::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut call: Vec<(u32, usize)> = Vec::new();
    let mut counter = 0u32;
    let mut comps = 0u32;
    for root in 0..n as u32 {
        if index[root as usize] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            let vi = v as usize;
            if *i == 0 {
                index[vi] = counter;
                low[vi] = counter;
                counter += 1;
                stack.push(v);
                on_stack[vi] = true;
            }
            if let Some(&w) = adj[vi].get(*i) {
                *i += 1;
                let wi = w as usize;
                if index[wi] == UNSEEN {
                    call.push((w, 0));
                } else if on_stack[wi] {
                    low[vi] = low[vi].min(index[wi]);
                }
                continue;
            }
            call.pop();
            if let Some(&(u, _)) = call.last() {
                low[u as usize] = low[u as usize].min(low[vi]);
            }
            if low[vi] == index[vi] {
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w as usize] = false;
                    comp[w as usize] = comps;
                    if w == v {
                        break;
                    }
                }
                comps += 1;
            }
        }
    }
    (comp, comps as usize)
}

/// Equivalence class per state (classes are numbered densely).
fn partition(g: &Graph) -> Vec<u32> {
    let (comp, m) = tau_components(g);
    let mut divergent = vec![false; m];
    let mut qedges: BTreeSet<(u32, u32, u32)> = BTreeSet::new();
    for &(s, l, t) in &g.edges {
        let (cs, ct) = (comp[s as usize], comp[t as usize]);
        if l == g.tau && cs == ct {
            divergent[cs as usize] = true;
        } else {
            qedges.insert((cs, l, ct));
        }
    }
    let mut out: Vec<Vec<(u32, u32)>> = vec![Vec::new(); m];
    for (c, l, d) in qedges {
        out[c as usize].push((l, d));
    }

    let mut block = vec![0u32; m];
    let mut blocks = 1;
    loop {
        let mut sigs: Vec<Vec<(u32, u32)>> = vec![Vec::new(); m];
        let mut div = vec![false; m];
        let mut ids: FxHashMap<Signature, u32> = FxHashMap::default();
        let mut next = vec![0u32; m];
        // Component numbers are a reverse topological order of the τ-DAG.
        for c in 0..m {
            let b = block[c];
            let mut sig = Vec::new();
            let mut d = divergent[c];
            for &(l, t) in &out[c] {
                if l == g.tau && block[t as usize] == b {
                    sig.extend_from_slice(&sigs[t as usize]);
                    d |= div[t as usize];
                } else {
                    sig.push((l, block[t as usize]));
                }
            }
            sig.sort_unstable();
            sig.dedup();
            let fresh = ids.len() as u32;
            next[c] = *ids.entry((b, d, sig.clone())).or_insert(fresh);
            sigs[c] = sig;
            div[c] = d;
        }
        let count = ids.len();
        block = next;
        if count == blocks {
            return comp.iter().map(|&c| block[c as usize]).collect();
        }
        blocks = count;
    }
}

fn union(left: &Lts, right: &Lts) -> Graph {
    let mut ids: FxHashMap<Action, u32> = FxHashMap::default();
    ids.insert(Action::Tau, 0);
    let mut id = |a: &Action| {
        let n = ids.len() as u32;
        *ids.entry(a.clone()).or_insert(n)
    };
    let offset = left.num_states() as u32;
    let mut edges = Vec::with_capacity(left.num_transitions() + right.num_transitions());
    for (s, e) in left.transitions() {
        edges.push((s, id(left.action(e.label)), e.target));
    }
    for (s, e) in right.transitions() {
        edges.push((s + offset, id(right.action(e.label)), e.target + offset));
    }
    Graph {
        states: left.num_states() + right.num_states(),
        tau: 0,
        edges,
    }
}

/// Classes of a single system.
pub fn classes(lts: &Lts) -> Vec<u32> {
    partition(&union(lts, &crate::lts::LtsBuilder::new(0).build(0)))[..lts.num_states()].to_vec()
}

/// Both systems must already have their internal actions renamed to τ.
pub fn dpbb_equivalent(left: &Lts, right: &Lts) -> Result<Equivalence, CheckError> {
    let (la, ra) = (left.visible_alphabet(), right.visible_alphabet());
    if la != ra {
        return Err(CheckError::AlphabetMismatch {
            left_only: la.difference(&ra).map(|a| a.to_string()).collect(),
            right_only: ra.difference(&la).map(|a| a.to_string()).collect(),
        });
    }
    let g = union(left, right);
    let p = partition(&g);
    let left_class = p[left.initial() as usize];
    let right_class = p[left.num_states() + right.initial() as usize];
    Ok(Equivalence {
        equivalent: left_class == right_class,
        classes: p.iter().collect::<BTreeSet<_>>().len(),
        left_class,
        right_class,
    })
}
