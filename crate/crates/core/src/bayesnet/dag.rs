use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Directed acyclic graph stored as a sorted parent list per node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "DagRepr", try_from = "DagRepr")]
pub struct Dag {
    parents: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct DagRepr {
    nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl From<Dag> for DagRepr {
    fn from(dag: Dag) -> Self {
        DagRepr { nodes: dag.node_count(), edges: dag.edges() }
    }
}

impl TryFrom<DagRepr> for Dag {
    type Error = Error;

    fn try_from(repr: DagRepr) -> Result<Self> {
        Dag::from_edges(repr.nodes, &repr.edges)
    }
}

impl Dag {
    pub fn empty(nodes: usize) -> Self {
        Dag { parents: vec![Vec::new(); nodes] }
    }

    /// Build from `(from, to)` pairs, rejecting self-loops, duplicates,
    /// out-of-range ids and cycles.
    pub fn from_edges(nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut dag = Dag::empty(nodes);
        for &(u, v) in edges {
            if u >= nodes || v >= nodes {
                return Err(Error::Data(format!("edge {u}->{v} out of range for {nodes} nodes")));
            }
            if u == v {
                return Err(Error::Data(format!("self-loop on node {u}")));
            }
            if dag.has_edge(u, v) {
                return Err(Error::Data(format!("duplicate edge {u}->{v}")));
            }
            dag.add_edge(u, v);
        }
        if !dag.is_acyclic() {
            return Err(Error::Data("edge list contains a cycle".into()));
        }
        Ok(dag)
    }

    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    pub fn add_edge(&mut self, from: usize, to: usize) {
        if let Err(pos) = self.parents[to].binary_search(&from) {
            self.parents[to].insert(pos, from);
        }
    }

    pub fn remove_edge(&mut self, from: usize, to: usize) {
        if let Ok(pos) = self.parents[to].binary_search(&from) {
            self.parents[to].remove(pos);
        }
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// All edges sorted by `(from, to)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(v, ps)| ps.iter().map(move |&u| (u, v)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.node_count()).filter(|&v| self.has_edge(node, v)).collect()
    }

    /// Whether a directed path `from ⇝ to` exists, optionally ignoring one edge.
    pub fn reaches(&self, from: usize, to: usize, skip: Option<(usize, usize)>) -> bool {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(u) = stack.pop() {
            if u == to {
                return true;
            }
            for v in 0..n {
                if !seen[v] && self.has_edge(u, v) && skip != Some((u, v)) {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        false
    }

    /// Kahn ordering; `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.node_count();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = ready.pop() {
            order.push(u);
            for v in (0..n).rev() {
                if self.has_edge(u, v) {
                    indegree[v] -= 1;
                    if indegree[v] == 0 {
                        ready.push(v);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }
}

/// Number of labeled DAGs on `nodes` vertices (Robinson's recurrence).
pub fn count_dags(nodes: usize) -> Result<u64> {
    if nodes == 0 {
        return Err(Error::Parameter("node count must be at least 1".into()));
    }
    if nodes > 8 {
        return Err(Error::Parameter(format!("count_dags supports at most 8 nodes, got {nodes}")));
    }
    let mut a = vec![1i128; nodes + 1];
    for n in 1..=nodes {
        let mut total = 0i128;
        let mut binom = 1i128;
        for k in 1..=n {
            binom = binom * (n - k + 1) as i128 / k as i128;
            let term = binom * (1i128 << (k * (n - k))) * a[n - k];
            total += if k % 2 == 1 { term } else { -term };
        }
        a[n] = total;
    }
    Ok(a[nodes] as u64)
}

/// Star graph with the gate node (id `d`) as the only parent of each feature.
pub fn naive_bayes_structure(d: usize, k: usize) -> Result<Dag> {
    if d == 0 || k == 0 {
        return Err(Error::Parameter("naive Bayes structure needs d >= 1 and K >= 1".into()));
    }
    let edges: Vec<_> = (0..d).map(|j| (d, j)).collect();
    Dag::from_edges(d + 1, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robinson_counts() {
        let expect = [1u64, 3, 25, 543, 29281, 3781503, 1138779265, 783702329343];
        for (n, &e) in expect.iter().enumerate() {
            assert_eq!(count_dags(n + 1).unwrap(), e);
        }
        assert!(count_dags(9).is_err());
        assert!(count_dags(0).is_err());
    }

    #[test]
    fn rejects_cycles_and_loops() {
        assert!(Dag::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).is_err());
        assert!(Dag::from_edges(2, &[(1, 1)]).is_err());
        assert!(Dag::from_edges(2, &[(0, 1), (0, 1)]).is_err());
        assert!(Dag::from_edges(2, &[(0, 5)]).is_err());
    }

    #[test]
    fn reachability() {
        let dag = Dag::from_edges(4, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(dag.reaches(0, 2, None));
        assert!(dag.reaches(0, 2, Some((0, 2))));
        let chain = Dag::from_edges(3, &[(0, 2)]).unwrap();
        assert!(!chain.reaches(0, 2, Some((0, 2))));
        assert!(!dag.reaches(2, 0, None));
        assert!(!dag.reaches(0, 3, None));
    }

    #[test]
    fn naive_bayes_star() {
        let dag = naive_bayes_structure(2, 3).unwrap();
        assert_eq!(dag.edges(), vec![(2, 0), (2, 1)]);
        let six = naive_bayes_structure(6, 6).unwrap();
        assert_eq!(six.edge_count(), 6);
        assert!(six.edges().iter().all(|&(u, _)| u == 6));
        assert!(six.is_acyclic());
    }

    #[test]
    fn json_uses_edge_list() {
        let dag = Dag::from_edges(3, &[(2, 0), (0, 1)]).unwrap();
        let text = serde_json::to_string(&dag).unwrap();
        assert_eq!(text, r#"{"nodes":3,"edges":[[0,1],[2,0]]}"#);
        let back: Dag = serde_json::from_str(&text).unwrap();
        assert_eq!(back, dag);
        assert!(serde_json::from_str::<Dag>(r#"{"nodes":2,"edges":[[0,1],[1,0]]}"#).is_err());
    }
}
