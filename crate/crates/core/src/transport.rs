//! Exact 1-Wasserstein distance between small discrete distributions.
//!
//! Solved as a min-cost flow by successive shortest paths on the bipartite
//! transport network. Each augmentation saturates either a supply or a demand
//! arc, so at most `m + n` rounds are needed.

use crate::linalg::Matrix;

/// Mass below this level is treated as already shipped.
const MASS_EPS: f64 = 1e-14;

/// A sparse distribution as `(state, probability)` pairs with positive mass.
pub type Sparse = [(usize, f64)];

/// `W1` between `p` and `q` under ground metric `cost`.
pub fn wasserstein1(p: &Sparse, q: &Sparse, cost: &Matrix) -> f64 {
    match (p, q) {
        ([(i, _)], _) => q.iter().map(|&(j, w)| w * cost[(*i, j)]).sum(),
        (_, [(j, _)]) => p.iter().map(|&(i, w)| w * cost[(i, *j)]).sum(),
        _ => min_cost_flow(p, q, cost),
    }
}

struct Arc {
    to: usize,
    cap: f64,
    cost: f64,
}

fn min_cost_flow(p: &Sparse, q: &Sparse, cost: &Matrix) -> f64 {
    let (m, n) = (p.len(), q.len());
    let source = m + n;
    let sink = source + 1;
    let nodes = sink + 1;
    let mut arcs: Vec<Arc> = Vec::with_capacity(2 * (m * n + m + n));
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |arcs: &mut Vec<Arc>, from: usize, to: usize, cap: f64, c: f64| {
        adj[from].push(arcs.len());
        arcs.push(Arc { to, cap, cost: c });
        adj[to].push(arcs.len());
        arcs.push(Arc { to: from, cap: 0.0, cost: -c });
    };
    for (a, &(_, w)) in p.iter().enumerate() {
        add(&mut arcs, source, a, w, 0.0);
    }
    for (b, &(_, w)) in q.iter().enumerate() {
        add(&mut arcs, m + b, sink, w, 0.0);
    }
    for (a, &(i, _)) in p.iter().enumerate() {
        for (b, &(j, _)) in q.iter().enumerate() {
            add(&mut arcs, a, m + b, f64::INFINITY, cost[(i, j)]);
        }
    }

    let mut remaining: f64 = p.iter().map(|x| x.1).sum::<f64>().min(q.iter().map(|x| x.1).sum());
    let mut total = 0.0;
    let mut dist = vec![0.0; nodes];
    let mut via = vec![usize::MAX; nodes];
    while remaining > MASS_EPS {
        // Bellman-Ford; residual costs may be negative.
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        via.iter_mut().for_each(|v| *v = usize::MAX);
        dist[source] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &adj[u] {
                    let arc = &arcs[e];
                    if arc.cap > MASS_EPS && dist[u] + arc.cost < dist[arc.to] - 1e-15 {
                        dist[arc.to] = dist[u] + arc.cost;
                        via[arc.to] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_infinite() {
            break;
        }
        let mut push = remaining;
        let mut v = sink;
        while v != source {
            let e = via[v];
            push = push.min(arcs[e].cap);
            v = arcs[e ^ 1].to;
        }
        let mut v = sink;
        while v != source {
            let e = via[v];
            arcs[e].cap -= push;
            arcs[e ^ 1].cap += push;
            v = arcs[e ^ 1].to;
        }
        total += push * dist[sink];
        remaining -= push;
    }
    total
}
