#![allow(dead_code)]

use faithlab_core::causal::{CptModel, Dag, Node};
use rand::Rng;

/// Labeled DAG count by Robinson's recurrence,
/// a(n) = Σ_{k=1..n} (−1)^{k+1} C(n,k) 2^{k(n−k)} a(n−k).
pub fn robinson_count(n: usize) -> i128 {
    let mut a = vec![1i128];
    for m in 1..=n {
        let mut total = 0i128;
        for k in 1..=m {
            let term = binom(m, k) * (1i128 << (k * (m - k))) * a[m - k];
            total += if k % 2 == 1 { term } else { -term };
        }
        a.push(total);
    }
    a[n]
}

fn binom(n: usize, k: usize) -> i128 {
    (0..k).fold(1i128, |acc, i| acc * (n - i) as i128 / (i + 1) as i128)
}

/// Random DAG on `n` observable nodes: a random topological order with
/// each forward edge present with probability ½.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize) -> Dag {
    let nodes: Vec<Node> = (0..n).map(|i| Node::observable(format!("v{i}"))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut parents = vec![0u64; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.5) {
                parents[order[j]] |= 1 << order[i];
            }
        }
    }
    Dag::from_masks(nodes, parents).unwrap()
}

/// Random CPTs: node cardinalities in {2, 3}, each row drawn uniformly on
/// (0, 1) and normalized.
pub fn random_model<R: Rng>(rng: &mut R, dag: &Dag) -> CptModel {
    let n = dag.len();
    let cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=3)).collect();
    let tables = (0..n)
        .map(|v| {
            let rows: usize = dag.parents(v).iter().map(|&p| cards[p]).product();
            let mut t = Vec::with_capacity(rows * cards[v]);
            for _ in 0..rows {
                let raw: Vec<f64> = (0..cards[v]).map(|_| rng.random_range(0.0..1.0) + 1e-3).collect();
                let s: f64 = raw.iter().sum();
                t.extend(raw.iter().map(|x| x / s));
            }
            t
        })
        .collect();
    CptModel::new("random", dag.clone(), cards, tables).unwrap()
}

/// All (x, y, z) queries over the nodes of `dag`, with x < y.
pub fn all_queries(n: usize) -> Vec<(usize, usize, u64)> {
    let mut out = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let rest: Vec<usize> = (0..n).filter(|&k| k != x && k != y).collect();
            for subset in 0..1u32 << rest.len() {
                let z = rest
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| subset & (1 << b) != 0)
                    .fold(0u64, |m, (_, &k)| m | (1 << k));
                out.push((x, y, z));
            }
        }
    }
    out
}

pub fn names_of(dag: &Dag, mask: u64) -> Vec<String> {
    (0..dag.len())
        .filter(|k| mask & (1 << k) != 0)
        .map(|k| dag.name(k).to_string())
        .collect()
}
