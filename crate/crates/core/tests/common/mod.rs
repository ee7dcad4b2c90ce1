//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's inference, scoring or counting code.
#![allow(dead_code)]

use bnmoe::bayesnet::{BayesianNetwork, Cpt, Dag, Discretizer};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every labelled DAG on `n` nodes whose in-degree never exceeds
/// `max_parents`, as per-node parent bitmasks.
pub fn enumerate_dags(n: usize, max_parents: usize) -> Vec<Vec<u32>> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let mut parents = vec![0u32; n];
        for (bit, &(u, v)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                parents[v] |= 1 << u;
            }
        }
        if parents.iter().any(|p| p.count_ones() as usize > max_parents) {
            continue;
        }
        if acyclic(&parents) {
            out.push(parents);
        }
    }
    out
}

/// Kahn's algorithm on bitmasks.
fn acyclic(parents: &[u32]) -> bool {
    let n = parents.len();
    let mut removed = 0u32;
    for _ in 0..n {
        match (0..n).find(|&v| removed >> v & 1 == 0 && parents[v] & !removed == 0) {
            Some(v) => removed |= 1 << v,
            None => return false,
        }
    }
    true
}

pub fn dag_from_masks(parents: &[u32]) -> Dag {
    let n = parents.len();
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|v| (0..n).filter(move |&u| parents[v] >> u & 1 == 1).map(move |u| (u, v)))
        .collect();
    Dag::from_edges(n, &edges).expect("enumerated graph is acyclic")
}

/// Row of `cpt` selected by a full assignment, lowest parent id most
/// significant.
fn cpt_row(cpt: &Cpt, cards: &[usize], states: &[usize]) -> usize {
    cpt.parents.iter().fold(0, |acc, &p| acc * cards[p] + states[p])
}

/// `Π_i P(x_i | parents)` read straight from the tables.
pub fn joint(cpts: &[Cpt], cards: &[usize], states: &[usize]) -> f64 {
    cpts.iter()
        .map(|c| c.table[cpt_row(c, cards, states)][states[c.node]])
        .product()
}

/// All complete assignments in mixed-radix order.
pub fn assignments(cards: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = cards.iter().product();
    (0..total)
        .map(|mut idx| {
            let mut s = vec![0; cards.len()];
            for i in (0..cards.len()).rev() {
                s[i] = idx % cards[i];
                idx /= cards[i];
            }
            s
        })
        .collect()
}

/// `P(query | evidence)` by summing the joint over every consistent
/// assignment.
pub fn enumerate_posterior(cpts: &[Cpt], cards: &[usize], query: usize, evidence: &[Option<usize>]) -> Vec<f64> {
    let mut dist = vec![0.0; cards[query]];
    for s in assignments(cards) {
        if evidence.iter().enumerate().all(|(i, e)| e.is_none_or(|v| s[i] == v)) {
            dist[s[query]] += joint(cpts, cards, &s);
        }
    }
    let z: f64 = dist.iter().sum();
    dist.iter().map(|p| p / z).collect()
}

/// Random CPT rows bounded away from zero.
fn random_row(rng: &mut impl Rng, r: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..r).map(|_| rng.gen_range(0.05..1.0)).collect();
    let z: f64 = raw.iter().sum();
    raw.iter().map(|v| v / z).collect()
}

pub fn random_cpts(rng: &mut impl Rng, dag: &Dag, cards: &[usize]) -> Vec<Cpt> {
    (0..dag.node_count())
        .map(|node| {
            let parents = dag.parents(node).to_vec();
            let q: usize = parents.iter().map(|&p| cards[p]).product();
            Cpt {
                node,
                parents,
                states: cards[node],
                table: (0..q).map(|_| random_row(rng, cards[node])).collect(),
            }
        })
        .collect()
}

/// Random DAG on `n` nodes: edges only go forward in a shuffled order, at
/// most `max_parents` per node.
pub fn random_dag(rng: &mut impl Rng, n: usize, max_parents: usize) -> Dag {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for (pos, &v) in order.iter().enumerate() {
        let mut preds: Vec<usize> = order[..pos].to_vec();
        preds.shuffle(rng);
        for &u in preds.iter().take(max_parents) {
            if rng.gen_bool(0.5) {
                edges.push((u, v));
            }
        }
    }
    Dag::from_edges(n, &edges).unwrap()
}

/// Discretizer mapping the value `s` of each feature to state `s`, with
/// bin centers equal to the state index.
pub fn identity_discretizer(cards: &[usize]) -> Discretizer {
    Discretizer {
        edges: cards.iter().map(|&r| (0..r - 1).map(|s| s as f64 + 0.5).collect()).collect(),
        centers: cards.iter().map(|&r| (0..r).map(|s| s as f64).collect()).collect(),
    }
}

/// Network over `cards.len() - 1` features plus the gate (last node) with
/// the given tables, built without fitting.
pub fn network(dag: Dag, cards: Vec<usize>, cpts: Vec<Cpt>) -> BayesianNetwork {
    let gate = cards.len() - 1;
    BayesianNetwork { dag, discretizer: identity_discretizer(&cards[..gate]), cards, cpts, gate }
}

/// Ancestral sampling of `n` complete assignments.
pub fn sample(rng: &mut impl Rng, dag: &Dag, cards: &[usize], cpts: &[Cpt], n: usize) -> Vec<Vec<usize>> {
    let order = dag.topological_order().unwrap();
    (0..n)
        .map(|_| {
            let mut s = vec![0; cards.len()];
            for &v in &order {
                let row = &cpts[v].table[cpt_row(&cpts[v], cards, &s)];
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                s[v] = row.len() - 1;
                for (k, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        s[v] = k;
                        break;
                    }
                }
            }
            s
        })
        .collect()
}

/// `I_B` computed monolithically from raw joint counts rather than family
/// by family: `−2 Σ_rows ln θ̂(x_i | pa_i) + c · Σ_i q_i (r_i − 1)`.
pub fn monolithic_score(rows: &[Vec<usize>], cards: &[usize], parents: &[Vec<usize>], c: f64) -> f64 {
    use std::collections::HashMap;
    let mut loglik = 0.0;
    let mut params = 0usize;
    for (i, pa) in parents.iter().enumerate() {
        let mut family: HashMap<(Vec<usize>, usize), usize> = HashMap::new();
        let mut parent_counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for r in rows {
            let key: Vec<usize> = pa.iter().map(|&p| r[p]).collect();
            *family.entry((key.clone(), r[i])).or_default() += 1;
            *parent_counts.entry(key).or_default() += 1;
        }
        for r in rows {
            let key: Vec<usize> = pa.iter().map(|&p| r[p]).collect();
            loglik += (family[&(key.clone(), r[i])] as f64 / parent_counts[&key] as f64).ln();
        }
        params += pa.iter().map(|&p| cards[p]).product::<usize>() * (cards[i] - 1);
    }
    -2.0 * loglik + c * params as f64
}
