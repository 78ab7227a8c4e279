//! Conditional liveness: after a trigger, `success` happens within finitely
//! many steps unless interrupting steps keep occurring, and `success` stays
//! reachable throughout.
//!
//! The outer part is a box over all paths (optionally with data folded into
//! an outer monitor). The inner part is a greatest fixpoint Y around a least
//! fixpoint Z, evaluated on the product of the LTS with an integer counter.
//! Each step from an inner node yields obligations: its target must be in
//! Y (interrupt steps) or in Z (steps that must make progress).

use std::hash::Hash;

use indexmap::IndexSet;
use rustc_hash::FxBuildHasher;

use crate::action::Action;
use crate::lts::Lts;
use crate::CheckError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Obligation {
    /// Target (with this counter) must be in the greatest fixpoint.
    Nu(i32),
    /// Target (with this counter) must be in the least fixpoint.
    Mu(i32),
}

pub trait Progress {
    type Outer: Clone + Eq + Hash;

    fn outer_initial(&self) -> Self::Outer;

    fn outer_step(&self, o: &Self::Outer, a: &Action) -> Self::Outer;

    /// Initial inner counter when `a`, taken in outer state `o`, starts an
    /// obligation.
    fn trigger(&self, o: &Self::Outer, a: &Action) -> Option<i32>;

    fn is_success(&self, a: &Action) -> bool;

    /// Obligations on the target of an `a` step taken with counter `n`.
    /// Never called for success steps, which discharge everything.
    fn obligations(&self, n: i32, a: &Action, out: &mut Vec<Obligation>);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessEnd {
    /// From the last state the success action can no longer occur.
    SuccessUnreachable,
    /// The walk returned to an earlier position without progress.
    Cycle,
}

#[derive(Debug, Clone)]
pub struct Witness {
    /// From the initial state up to and including the trigger.
    pub prefix: Vec<Action>,
    pub walk: Vec<Action>,
    pub end: WitnessEnd,
}

struct Inner {
    nodes: IndexSet<(u32, i32), FxBuildHasher>,
    offsets: Vec<usize>,
    /// (is_mu, target node, label)
    edges: Vec<(bool, u32, u32)>,
}

fn can_succeed<P: Progress>(lts: &Lts, spec: &P) -> Vec<bool> {
    let n = lts.num_states();
    let success: Vec<bool> = lts.labels().iter().map(|a| spec.is_success(a)).collect();
    let (offsets, preds) = lts.reverse();
    let mut mark = vec![false; n];
    let mut stack = Vec::new();
    for s in 0..n as u32 {
        if lts.successors(s).iter().any(|e| success[e.label as usize]) {
            mark[s as usize] = true;
            stack.push(s);
        }
    }
    while let Some(s) = stack.pop() {
        for &(p, _) in &preds[offsets[s as usize] as usize..offsets[s as usize + 1] as usize] {
            if !mark[p as usize] {
                mark[p as usize] = true;
                stack.push(p);
            }
        }
    }
    mark
}

fn build_inner<P: Progress>(lts: &Lts, spec: &P, starts: &[(u32, i32)], cap: usize) -> Result<Inner, CheckError> {
    let success: Vec<bool> = lts.labels().iter().map(|a| spec.is_success(a)).collect();
    let mut nodes: IndexSet<(u32, i32), FxBuildHasher> = starts.iter().copied().collect();
    let mut offsets = vec![0];
    let mut edges = Vec::new();
    let mut obs = Vec::new();
    let mut next = 0;
    while next < nodes.len() {
        let (s, n) = nodes[next];
        for e in lts.successors(s) {
            if success[e.label as usize] {
                continue;
            }
            obs.clear();
            spec.obligations(n, lts.action(e.label), &mut obs);
            for ob in &obs {
                let (mu, m) = match *ob {
                    Obligation::Nu(m) => (false, m),
                    Obligation::Mu(m) => (true, m),
                };
                let (i, fresh) = nodes.insert_full((e.target, m));
                if fresh && nodes.len() > cap {
                    return Err(CheckError::StateCapExceeded { cap });
                }
                edges.push((mu, i as u32, e.label));
            }
        }
        offsets.push(edges.len());
        next += 1;
    }
    Ok(Inner { nodes, offsets, edges })
}

/// νY.μZ over the inner graph. Returns membership in the fixpoint.
fn solve(inner: &Inner, good: &[bool]) -> Vec<bool> {
    let n = inner.nodes.len();
    let out = |v: usize| &inner.edges[inner.offsets[v]..inner.offsets[v + 1]];
    // Reverse Mu edges, with multiplicity.
    let mut mu_preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    for v in 0..n {
        for &(mu, w, _) in out(v) {
            if mu {
                mu_preds[w as usize].push(v as u32);
            }
        }
    }
    let mut y = vec![true; n];
    loop {
        let mut pending = vec![0usize; n];
        let mut z = vec![false; n];
        let mut queue = Vec::new();
        let blocked: Vec<bool> = (0..n)
            .map(|v| !good[v] || out(v).iter().any(|&(mu, w, _)| !mu && !y[w as usize]))
            .collect();
        for v in 0..n {
            pending[v] = out(v).iter().filter(|e| e.0).count();
            if pending[v] == 0 && !blocked[v] {
                z[v] = true;
                queue.push(v as u32);
            }
        }
        while let Some(w) = queue.pop() {
            for &v in &mu_preds[w as usize] {
                let v = v as usize;
                pending[v] -= 1;
                if pending[v] == 0 && !blocked[v] && !z[v] {
                    z[v] = true;
                    queue.push(v as u32);
                }
            }
        }
        debug_assert!(z.iter().zip(&y).all(|(&zv, &yv)| !zv || yv), "Y must shrink");
        if z == y {
            return y;
        }
        y = z;
    }
}

/// `Ok(None)` when the property holds.
pub fn check_progress<P: Progress>(lts: &Lts, spec: &P, cap: usize) -> Result<Option<Witness>, CheckError> {
    // Outer product, breadth first, remembering how each node was reached.
    let mut outer: IndexSet<(u32, P::Outer), FxBuildHasher> = IndexSet::default();
    let mut parent: Vec<(u32, u32)> = vec![(0, 0)];
    outer.insert((lts.initial(), spec.outer_initial()));
    let mut starts: Vec<(u32, i32)> = Vec::new();
    let mut origins: Vec<(u32, u32)> = Vec::new();
    let mut next = 0;
    while next < outer.len() {
        let (s, o) = outer[next].clone();
        for e in lts.successors(s) {
            let a = lts.action(e.label);
            if let Some(n0) = spec.trigger(&o, a) {
                starts.push((e.target, n0));
                origins.push((next as u32, e.label));
            }
            let (_, fresh) = outer.insert_full((e.target, spec.outer_step(&o, a)));
            if fresh {
                if outer.len() > cap {
                    return Err(CheckError::StateCapExceeded { cap });
                }
                parent.push((next as u32, e.label));
            }
        }
        next += 1;
    }
    if starts.is_empty() {
        return Ok(None);
    }
    let reach = can_succeed(lts, spec);
    let inner = build_inner(lts, spec, &starts, cap)?;
    let good: Vec<bool> = inner.nodes.iter().map(|&(s, _)| reach[s as usize]).collect();
    let w = solve(&inner, &good);

    let Some(k) = starts.iter().position(|st| !w[inner.nodes.get_index_of(st).unwrap()]) else {
        return Ok(None);
    };
    let (mut i, label) = origins[k];
    let mut prefix = vec![lts.action(label).clone()];
    while i != 0 {
        let (p, l) = parent[i as usize];
        prefix.push(lts.action(l).clone());
        i = p;
    }
    prefix.reverse();

    let mut v = inner.nodes.get_index_of(&starts[k]).unwrap();
    let mut visited = vec![false; inner.nodes.len()];
    let mut walk = Vec::new();
    let end = loop {
        visited[v] = true;
        if !good[v] {
            break WitnessEnd::SuccessUnreachable;
        }
        let edges = &inner.edges[inner.offsets[v]..inner.offsets[v + 1]];
        // Prefer steps that should have made progress.
        let step = edges
            .iter()
            .filter(|e| !w[e.1 as usize])
            .max_by_key(|e| e.0)
            .expect("a node outside the fixpoint has a failing obligation");
        walk.push(lts.action(step.2).clone());
        v = step.1 as usize;
        if visited[v] {
            break WitnessEnd::Cycle;
        }
    };
    Ok(Some(Witness { prefix, walk, end }))
}

/// The plain pattern without data: any trigger starts an obligation, the
/// listed interrupts reset to the outer variable, and every other step must
/// make progress.
pub struct Plain<T, S, I> {
    pub trigger: T,
    pub success: S,
    pub interrupt: I,
}

impl<T, S, I> Progress for Plain<T, S, I>
where
    T: Fn(&Action) -> bool,
    S: Fn(&Action) -> bool,
    I: Fn(&Action) -> bool,
{
    type Outer = ();

    fn outer_initial(&self) {}

    fn outer_step(&self, _: &(), _: &Action) {}

    fn trigger(&self, _: &(), a: &Action) -> Option<i32> {
        (self.trigger)(a).then_some(0)
    }

    fn is_success(&self, a: &Action) -> bool {
        (self.success)(a)
    }

    fn obligations(&self, _: i32, a: &Action, out: &mut Vec<Obligation>) {
        out.push(if (self.interrupt)(a) {
            Obligation::Nu(0)
        } else {
            Obligation::Mu(0)
        });
    }
}
