//! Breadth-first generation of the reachable state space of a model.

use std::hash::Hash;

use indexmap::IndexSet;
use rustc_hash::{FxBuildHasher, FxHashMap};

use crate::action::Action;
use crate::lts::{Edge, Lts};
use crate::CheckError;

pub const DEFAULT_STATE_CAP: usize = 50_000_000;

pub trait Model {
    type State: Clone + Eq + Hash;

    fn initial(&self) -> Self::State;

    /// Must push successors in a deterministic order.
    fn successors(&self, state: &Self::State, out: &mut Vec<(Action, Self::State)>);
}

pub struct Explored<S> {
    pub lts: Lts,
    /// Index `i` is the state numbered `i` in `lts`.
    pub states: IndexSet<S, FxBuildHasher>,
}

/// States are numbered in discovery order, so the same model always yields
/// the same numbering.
pub fn explore<M: Model>(model: &M, cap: usize) -> Result<Explored<M::State>, CheckError> {
    let mut states: IndexSet<M::State, FxBuildHasher> = IndexSet::default();
    states.insert(model.initial());
    let mut labels: Vec<Action> = Vec::new();
    let mut label_index: FxHashMap<Action, u32> = FxHashMap::default();
    // Sources are visited in order, so edges come out grouped by source.
    let mut offsets = vec![0u32];
    let mut edges: Vec<Edge> = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    while next < states.len() {
        out.clear();
        model.successors(&states[next], &mut out);
        for (action, target) in out.drain(..) {
            let (index, fresh) = states.insert_full(target);
            if fresh && states.len() > cap {
                return Err(CheckError::StateCapExceeded { cap });
            }
            let label = match label_index.get(&action) {
                Some(&l) => l,
                None => {
                    labels.push(action.clone());
                    label_index.insert(action, labels.len() as u32 - 1);
                    labels.len() as u32 - 1
                }
            };
            edges.push(Edge {
                label,
                target: index as u32,
            });
        }
        offsets.push(u32::try_from(edges.len()).map_err(|_| CheckError::StateCapExceeded { cap })?);
        next += 1;
    }
    Ok(Explored {
        lts: Lts::from_parts(0, labels, offsets, edges),
        states,
    })
}
