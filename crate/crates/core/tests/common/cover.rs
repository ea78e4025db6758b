//! Literal greedy cover on a dense adjacency matrix.
#![allow(clippy::needless_range_loop)]

use gcnpoison::graph::Graph;
use gcnpoison::rng::rng;
use rand::Rng;

use super::random_graph;

/// The greedy cover written out step by step on a dense adjacency matrix,
/// stopping once `100·|T| ≥ percent·|V|`. Once `k` exceeds every degree no
/// node can score again; the remaining places go to the lowest indices.
pub fn literal_greedy_cover(g: &Graph, percent: usize) -> Vec<usize> {
    let n = g.n_nodes();
    let adj: Vec<Vec<bool>> = (0..n).map(|u| (0..n).map(|v| g.has_edge(u, v)).collect()).collect();
    let mut m = vec![0i64; n];
    let mut in_t = vec![false; n];
    let mut t = Vec::new();
    let mut k = 0i64;
    while 100 * t.len() < percent * n {
        if k > n as i64 {
            for u in 0..n {
                if 100 * t.len() >= percent * n {
                    break;
                }
                if !in_t[u] {
                    in_t[u] = true;
                    t.push(u);
                }
            }
            break;
        }
        let score = |u: usize, m: &[i64]| (0..n).filter(|&w| adj[u][w] && m[w] == k).count();
        let mut v = usize::MAX;
        let mut best = 0;
        for u in 0..n {
            if in_t[u] {
                continue;
            }
            let s = score(u, &m);
            if v == usize::MAX || s > best {
                v = u;
                best = s;
            }
        }
        if best == 0 {
            k += 1;
        } else {
            in_t[v] = true;
            t.push(v);
            m[v] = -1;
            for w in 0..n {
                if adj[v][w] && !in_t[w] {
                    m[w] += 1;
                }
            }
        }
    }
    t
}

pub fn random_cover_case(seed: u64) -> (Graph, usize) {
    let mut r = rng(seed);
    let n = r.gen_range(1..=50);
    let density = [0.0, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8][r.gen_range(0..7)];
    let percent = r.gen_range(1..100);
    (random_graph(&mut r, n, density), percent)
}
