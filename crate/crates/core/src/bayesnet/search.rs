//! Score-based structure search: greedy hill climbing and tabu search over
//! single-edge moves.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::score::{family_score, DiscreteData, ScoreSpec};
use super::Dag;
use crate::rng;
use crate::{Error, Result};

pub const DEFAULT_TENURE: usize = 10;
pub const DEFAULT_TABU_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Add(usize, usize),
    Delete(usize, usize),
    /// Turn `from → to` into `to → from`.
    Reverse(usize, usize),
}

impl Move {
    fn inverse(self) -> Move {
        match self {
            Move::Add(u, v) => Move::Delete(u, v),
            Move::Delete(u, v) => Move::Add(u, v),
            Move::Reverse(u, v) => Move::Reverse(v, u),
        }
    }

    fn apply(self, dag: &mut Dag) {
        match self {
            Move::Add(u, v) => dag.add_edge(u, v),
            Move::Delete(u, v) => dag.remove_edge(u, v),
            Move::Reverse(u, v) => {
                dag.remove_edge(u, v);
                dag.add_edge(v, u);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub dag: Dag,
    pub score: f64,
    /// Score after each accepted move, starting with the empty graph.
    pub trace: Vec<f64>,
}

struct Searcher<'a> {
    data: &'a DiscreteData,
    penalty: f64,
    max_parents: usize,
    pairs: Vec<(usize, usize)>,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl<'a> Searcher<'a> {
    fn new(data: &'a DiscreteData, spec: &ScoreSpec, seed: u64) -> Self {
        let n = data.node_count();
        let mut pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
            .collect();
        // the order only decides ties between equally good moves
        pairs.shuffle(&mut rng::seeded(seed));
        Searcher {
            data,
            penalty: spec.penalty(n, data.rows()),
            max_parents: spec.max_parents,
            pairs,
            cache: HashMap::new(),
        }
    }

    fn family(&mut self, node: usize, parents: Vec<usize>) -> f64 {
        let (data, penalty) = (self.data, self.penalty);
        *self
            .cache
            .entry((node, parents))
            .or_insert_with_key(|(node, parents)| family_score(data, *node, parents, penalty))
    }

    fn with(parents: &[usize], add: usize) -> Vec<usize> {
        let mut p = parents.to_vec();
        if let Err(pos) = p.binary_search(&add) {
            p.insert(pos, add);
        }
        p
    }

    fn without(parents: &[usize], drop: usize) -> Vec<usize> {
        parents.iter().copied().filter(|&p| p != drop).collect()
    }

    fn total(&mut self, dag: &Dag) -> f64 {
        (0..dag.node_count())
            .map(|i| self.family(i, dag.parents(i).to_vec()))
            .sum()
    }

    /// Every legal move with its score change, in the searcher's fixed order.
    fn candidates(&mut self, dag: &Dag) -> Vec<(Move, f64)> {
        let mut out = Vec::new();
        for idx in 0..self.pairs.len() {
            let (u, v) = self.pairs[idx];
            let pv = dag.parents(v).to_vec();
            if dag.has_edge(u, v) {
                let before_v = self.family(v, pv.clone());
                let after_v = self.family(v, Self::without(&pv, u));
                out.push((Move::Delete(u, v), after_v - before_v));

                let pu = dag.parents(u).to_vec();
                if pu.len() < self.max_parents && !dag.reaches(u, v, Some((u, v))) {
                    let before_u = self.family(u, pu.clone());
                    let after_u = self.family(u, Self::with(&pu, v));
                    out.push((Move::Reverse(u, v), after_v - before_v + after_u - before_u));
                }
            } else if !dag.has_edge(v, u) && pv.len() < self.max_parents && !dag.reaches(v, u, None) {
                let before = self.family(v, pv.clone());
                let after = self.family(v, Self::with(&pv, u));
                out.push((Move::Add(u, v), after - before));
            }
        }
        out
    }
}

fn tolerance(score: f64) -> f64 {
    1e-9 * score.abs().max(1.0)
}

fn check(data: &DiscreteData, spec: &ScoreSpec, gate: usize) -> Result<()> {
    if data.rows() == 0 {
        return Err(Error::Size { needed: 1, got: 0 });
    }
    if gate >= data.node_count() {
        return Err(Error::Parameter(format!(
            "gate node {gate} out of range for {} nodes",
            data.node_count()
        )));
    }
    if spec.max_parents == 0 {
        return Err(Error::Parameter("max_parents must be at least 1".into()));
    }
    Ok(())
}

fn climb(searcher: &mut Searcher, dag: &mut Dag, trace: &mut Vec<f64>) -> f64 {
    let mut current = searcher.total(dag);
    trace.push(current);
    loop {
        let best = searcher
            .candidates(dag)
            .into_iter()
            .fold(None::<(Move, f64)>, |best, c| match best {
                Some(b) if b.1 <= c.1 => Some(b),
                _ => Some(c),
            });
        match best {
            Some((mv, delta)) if delta < -tolerance(current) => {
                mv.apply(dag);
                debug_assert!(dag.is_acyclic());
                current += delta;
                trace.push(current);
            }
            _ => return current,
        }
    }
}

/// Greedy search from the empty graph: repeatedly apply the best add,
/// delete or reverse move while it strictly lowers the criterion.
///
/// The gate node gets no special structural treatment; `gate` is only
/// validated.
pub fn hill_climb(data: &DiscreteData, spec: &ScoreSpec, gate: usize, seed: u64) -> Result<SearchResult> {
    check(data, spec, gate)?;
    let mut searcher = Searcher::new(data, spec, seed);
    let mut dag = Dag::empty(data.node_count());
    let mut trace = Vec::new();
    let score = climb(&mut searcher, &mut dag, &mut trace);
    Ok(SearchResult { dag, score, trace })
}

/// Hill climbing followed by `max_iters` tabu steps. Each tabu step takes
/// the best admissible move even if it worsens the score; undoing any of the
/// last `tenure` moves is forbidden unless it would beat the best structure
/// seen so far. Returns that best structure.
pub fn tabu_search(
    data: &DiscreteData,
    spec: &ScoreSpec,
    gate: usize,
    seed: u64,
    tenure: usize,
    max_iters: usize,
) -> Result<SearchResult> {
    check(data, spec, gate)?;
    if tenure == 0 {
        return Err(Error::Parameter("tabu tenure must be at least 1".into()));
    }
    let mut searcher = Searcher::new(data, spec, seed);
    let mut dag = Dag::empty(data.node_count());
    let mut trace = Vec::new();
    let mut current = climb(&mut searcher, &mut dag, &mut trace);
    let mut best = (dag.clone(), current);
    let mut tabu: VecDeque<Move> = VecDeque::with_capacity(tenure + 1);

    for _ in 0..max_iters {
        let chosen = searcher
            .candidates(&dag)
            .into_iter()
            .filter(|(mv, delta)| {
                !tabu.contains(mv) || current + delta < best.1 - tolerance(best.1)
            })
            .fold(None::<(Move, f64)>, |acc, c| match acc {
                Some(b) if b.1 <= c.1 => Some(b),
                _ => Some(c),
            });
        let Some((mv, delta)) = chosen else { break };
        mv.apply(&mut dag);
        debug_assert!(dag.is_acyclic());
        current += delta;
        trace.push(current);
        tabu.push_back(mv.inverse());
        if tabu.len() > tenure {
            tabu.pop_front();
        }
        if current < best.1 - tolerance(best.1) {
            best = (dag.clone(), current);
        }
    }
    // recompute to shed accumulated rounding from the running sum
    let score = searcher.total(&best.0);
    Ok(SearchResult { dag: best.0, score, trace })
}
