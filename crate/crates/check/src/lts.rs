use std::collections::BTreeSet;

use rustc_hash::FxHashMap;

use crate::action::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub label: u32,
    pub target: u32,
}

/// Labelled transition system with transitions grouped by source state.
#[derive(Debug, Clone)]
pub struct Lts {
    initial: u32,
    labels: Vec<Action>,
    offsets: Vec<u32>,
    edges: Vec<Edge>,
}

#[derive(Debug, Default)]
pub struct LtsBuilder {
    states: usize,
    labels: Vec<Action>,
    index: FxHashMap<Action, u32>,
    transitions: Vec<(u32, Edge)>,
}

impl LtsBuilder {
    pub fn new(states: usize) -> Self {
        LtsBuilder {
            states,
            ..Default::default()
        }
    }

    pub fn label(&mut self, action: &Action) -> u32 {
        if let Some(&l) = self.index.get(action) {
            return l;
        }
        let l = self.labels.len() as u32;
        self.labels.push(action.clone());
        self.index.insert(action.clone(), l);
        l
    }

    pub fn ensure_states(&mut self, states: usize) {
        self.states = self.states.max(states);
    }

    pub fn add(&mut self, source: u32, action: &Action, target: u32) {
        let label = self.label(action);
        self.add_labelled(source, label, target);
    }

    pub fn add_labelled(&mut self, source: u32, label: u32, target: u32) {
        self.ensure_states(source.max(target) as usize + 1);
        self.transitions.push((source, Edge { label, target }));
    }

    pub fn build(self, initial: u32) -> Lts {
        let states = self.states.max(initial as usize + 1);
        let mut offsets = vec![0u32; states + 1];
        for (s, _) in &self.transitions {
            offsets[*s as usize + 1] += 1;
        }
        for i in 0..states {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut edges = vec![Edge { label: 0, target: 0 }; self.transitions.len()];
        for (s, e) in self.transitions {
            edges[fill[s as usize] as usize] = e;
            fill[s as usize] += 1;
        }
        Lts {
            initial,
            labels: self.labels,
            offsets,
            edges,
        }
    }
}

impl Lts {
    /// `edges[offsets[s]..offsets[s + 1]]` leave state `s`.
    pub(crate) fn from_parts(initial: u32, labels: Vec<Action>, offsets: Vec<u32>, edges: Vec<Edge>) -> Lts {
        debug_assert_eq!(*offsets.last().unwrap() as usize, edges.len());
        Lts {
            initial,
            labels,
            offsets,
            edges,
        }
    }

    pub fn initial(&self) -> u32 {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_transitions(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[Action] {
        &self.labels
    }

    pub fn action(&self, label: u32) -> &Action {
        &self.labels[label as usize]
    }

    pub fn successors(&self, state: u32) -> &[Edge] {
        let s = state as usize;
        &self.edges[self.offsets[s] as usize..self.offsets[s + 1] as usize]
    }

    pub fn transitions(&self) -> impl Iterator<Item = (u32, Edge)> + '_ {
        (0..self.num_states() as u32).flat_map(move |s| self.successors(s).iter().map(move |e| (s, *e)))
    }

    pub fn label_of(&self, action: &Action) -> Option<u32> {
        self.labels.iter().position(|a| a == action).map(|i| i as u32)
    }

    /// Labels that occur on some transition, excluding τ.
    pub fn visible_alphabet(&self) -> BTreeSet<Action> {
        let mut used = vec![false; self.labels.len()];
        for e in &self.edges {
            used[e.label as usize] = true;
        }
        self.labels
            .iter()
            .zip(used)
            .filter(|(a, u)| *u && !a.is_tau())
            .map(|(a, _)| a.clone())
            .collect()
    }

    /// Renames every action matching `hidden` to τ.
    pub fn hide(&self, hidden: impl Fn(&Action) -> bool) -> Lts {
        let mut b = LtsBuilder::new(0);
        let map: Vec<u32> = self
            .labels
            .iter()
            .map(|a| if hidden(a) { b.label(&Action::Tau) } else { b.label(a) })
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                label: map[e.label as usize],
                target: e.target,
            })
            .collect();
        Lts::from_parts(self.initial, b.labels, self.offsets.clone(), edges)
    }

    /// Predecessor lists in the same grouped layout: `(offsets, sources)`.
    pub(crate) fn reverse(&self) -> (Vec<u32>, Vec<(u32, u32)>) {
        let n = self.num_states();
        let mut offsets = vec![0u32; n + 1];
        for e in &self.edges {
            offsets[e.target as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut preds = vec![(0, 0); self.edges.len()];
        for (s, e) in self.transitions() {
            let slot = &mut fill[e.target as usize];
            preds[*slot as usize] = (s, e.label);
            *slot += 1;
        }
        (offsets, preds)
    }
}
