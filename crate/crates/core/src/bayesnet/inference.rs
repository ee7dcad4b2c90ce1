//! Exact inference by variable elimination over table factors.

use super::cpt::Cpt;

/// Non-negative function over a set of discrete variables. `vars` is sorted
/// and `values` is row-major (the last variable varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    pub fn scalar(value: f64) -> Self {
        Factor { vars: Vec::new(), cards: Vec::new(), values: vec![value] }
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.vars.len()];
        for i in (0..self.vars.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    /// Decode a flat index into per-variable states.
    fn decode(&self, mut idx: usize, out: &mut [usize]) {
        for i in (0..self.vars.len()).rev() {
            out[i] = idx % self.cards[i];
            idx /= self.cards[i];
        }
    }

    pub fn from_cpt(cpt: &Cpt, cards: &[usize]) -> Self {
        let mut vars = cpt.parents.clone();
        vars.push(cpt.node);
        vars.sort_unstable();
        let fcards: Vec<usize> = vars.iter().map(|&v| cards[v]).collect();
        let mut f = Factor {
            vars,
            cards: fcards,
            values: Vec::new(),
        };
        let size: usize = f.cards.iter().product();
        let mut states = vec![0; f.vars.len()];
        let mut values = Vec::with_capacity(size);
        for idx in 0..size {
            f.decode(idx, &mut states);
            let state_of = |v: usize| states[f.vars.binary_search(&v).unwrap()];
            let config = cpt.parents.iter().fold(0, |acc, &p| acc * cards[p] + state_of(p));
            values.push(cpt.prob(config, state_of(cpt.node)));
        }
        f.values = values;
        f
    }

    /// Fix `var = state` and drop it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Ok(pos) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let strides = self.strides();
        let mut out = Factor {
            vars: self.vars.clone(),
            cards: self.cards.clone(),
            values: Vec::new(),
        };
        out.vars.remove(pos);
        out.cards.remove(pos);
        let size: usize = out.cards.iter().product();
        let mut states = vec![0; out.vars.len()];
        out.values = (0..size)
            .map(|idx| {
                out.decode(idx, &mut states);
                let mut flat = state * strides[pos];
                for (i, &s) in states.iter().enumerate() {
                    let orig = if i < pos { i } else { i + 1 };
                    flat += s * strides[orig];
                }
                self.values[flat]
            })
            .collect();
        out
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars: Vec<usize> = self.vars.iter().chain(&other.vars).copied().collect();
        vars.sort_unstable();
        vars.dedup();
        let cards: Vec<usize> = vars
            .iter()
            .map(|v| match self.vars.binary_search(v) {
                Ok(i) => self.cards[i],
                Err(_) => other.cards[other.vars.binary_search(v).unwrap()],
            })
            .collect();
        let mut out = Factor { vars, cards, values: Vec::new() };
        let (sa, sb) = (self.strides(), other.strides());
        let map_a: Vec<Option<usize>> = out.vars.iter().map(|v| self.vars.binary_search(v).ok()).collect();
        let map_b: Vec<Option<usize>> = out.vars.iter().map(|v| other.vars.binary_search(v).ok()).collect();
        let size: usize = out.cards.iter().product();
        let mut states = vec![0; out.vars.len()];
        out.values = (0..size)
            .map(|idx| {
                out.decode(idx, &mut states);
                let (mut ia, mut ib) = (0, 0);
                for (i, &s) in states.iter().enumerate() {
                    if let Some(p) = map_a[i] {
                        ia += s * sa[p];
                    }
                    if let Some(p) = map_b[i] {
                        ib += s * sb[p];
                    }
                }
                self.values[ia] * other.values[ib]
            })
            .collect();
        out
    }

    pub fn sum_out(&self, var: usize) -> Factor {
        let Ok(pos) = self.vars.binary_search(&var) else {
            return self.clone();
        };
        let strides = self.strides();
        let mut out = Factor {
            vars: self.vars.clone(),
            cards: self.cards.clone(),
            values: Vec::new(),
        };
        out.vars.remove(pos);
        out.cards.remove(pos);
        let size: usize = out.cards.iter().product();
        let mut states = vec![0; out.vars.len()];
        out.values = (0..size)
            .map(|idx| {
                out.decode(idx, &mut states);
                let mut base = 0;
                for (i, &s) in states.iter().enumerate() {
                    let orig = if i < pos { i } else { i + 1 };
                    base += s * strides[orig];
                }
                (0..self.cards[pos]).map(|k| self.values[base + k * strides[pos]]).sum()
            })
            .collect();
        out
    }
}

/// `P(query | evidence)` where `evidence[i]` is the observed state of node
/// `i`, if any. Unobserved non-query nodes are summed out, cheapest first.
pub fn query(cpts: &[Cpt], cards: &[usize], query: usize, evidence: &[Option<usize>]) -> Vec<f64> {
    let mut factors: Vec<Factor> = cpts
        .iter()
        .map(|cpt| {
            let mut f = Factor::from_cpt(cpt, cards);
            for (node, state) in evidence.iter().enumerate() {
                if let Some(s) = state {
                    if node != query {
                        f = f.reduce(node, *s);
                    }
                }
            }
            f
        })
        .collect();

    let mut hidden: Vec<usize> = (0..cards.len())
        .filter(|&v| v != query && evidence.get(v).copied().flatten().is_none())
        .collect();
    while !hidden.is_empty() {
        // pick the variable whose elimination creates the smallest factor
        let (pos, _) = hidden
            .iter()
            .enumerate()
            .map(|(pos, &v)| {
                let mut scope: Vec<usize> = factors
                    .iter()
                    .filter(|f| f.vars.contains(&v))
                    .flat_map(|f| f.vars.iter().copied())
                    .collect();
                scope.sort_unstable();
                scope.dedup();
                (pos, scope.iter().map(|&u| cards[u]).product::<usize>())
            })
            .min_by_key(|&(pos, size)| (size, pos))
            .unwrap();
        let var = hidden.remove(pos);
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = rest;
        if let Some(prod) = touching.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(prod.sum_out(var));
        }
    }

    let joint = factors
        .into_iter()
        .fold(Factor::scalar(1.0), |acc, f| acc.product(&f));
    let mut dist = if joint.vars == [query] {
        joint.values
    } else {
        // query absent from every factor cannot happen with a full CPT set
        vec![joint.values[0]; cards[query]]
    };
    let total: f64 = dist.iter().sum();
    for p in &mut dist {
        *p /= total;
    }
    dist
}

/// Product of CPT entries for one complete assignment.
pub fn joint_probability(cpts: &[Cpt], cards: &[usize], states: &[usize]) -> f64 {
    cpts.iter()
        .map(|cpt| {
            let config = cpt.parents.iter().fold(0, |acc, &p| acc * cards[p] + states[p]);
            cpt.prob(config, states[cpt.node])
        })
        .product()
}
