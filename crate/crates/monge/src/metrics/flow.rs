//! Exact dense transportation solver.
//!
//! Successive shortest augmenting paths with node potentials (Dijkstra on
//! reduced costs) over the complete bipartite network. Marginals are scaled
//! to integers so feasibility bookkeeping is exact; costs stay in f64.

/// Marginal scale: weights are mapped to integers summing to exactly this.
const SCALE: u64 = 1 << 52;

/// Rounds probability weights to u64 supplies summing to exactly `SCALE`.
///
/// The rounding residue (at most a few units per atom) lands on the largest
/// weight, which dwarfs it.
pub(crate) fn integerize(weights: &[f64]) -> Vec<u64> {
    let mut out: Vec<i64> = weights
        .iter()
        .map(|&w| (w * SCALE as f64).round() as i64)
        .collect();
    let sum: i64 = out.iter().sum();
    let residue = SCALE as i64 - sum;
    let argmax = weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    out[argmax] += residue;
    debug_assert!(out.iter().all(|&v| v > 0));
    out.into_iter().map(|v| v as u64).collect()
}

/// Minimum-cost transport of `supply` to `demand` (equal sums) under the
/// dense cost matrix `cost[i * m + j]`. Returns the integer flow matrix.
pub(crate) fn min_cost_transport(supply: &[u64], demand: &[u64], cost: &[f64]) -> Vec<u64> {
    let n = supply.len();
    let m = demand.len();
    debug_assert_eq!(cost.len(), n * m);
    debug_assert_eq!(
        supply.iter().sum::<u64>(),
        demand.iter().sum::<u64>()
    );

    let mut flow = vec![0u64; n * m];
    let mut remaining_supply = supply.to_vec();
    let mut remaining_demand = demand.to_vec();
    // Node potentials: sources then sinks.
    let mut pot = vec![0.0f64; n + m];

    let mut dist = vec![0.0f64; n + m];
    let mut parent = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];

    let mut left: u64 = supply.iter().sum();
    while left > 0 {
        // Multi-source Dijkstra over the residual network.
        for v in 0..n + m {
            dist[v] = f64::INFINITY;
            parent[v] = usize::MAX;
            done[v] = false;
        }
        for i in 0..n {
            if remaining_supply[i] > 0 {
                dist[i] = 0.0;
            }
        }
        let mut best_sink = usize::MAX;
        loop {
            let mut u = usize::MAX;
            let mut du = f64::INFINITY;
            for v in 0..n + m {
                if !done[v] && dist[v] < du {
                    du = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n && remaining_demand[u - n] > 0 {
                best_sink = u;
                break;
            }
            if u < n {
                // Forward arcs i -> all sinks, unbounded capacity.
                let i = u;
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    // Reduced cost, clamped against float noise.
                    let cand = du + (cost[i * m + j] + pot[i] - pot[v]).max(0.0);
                    if cand < dist[v] {
                        dist[v] = cand;
                        parent[v] = i;
                    }
                }
            } else {
                // Backward arcs j -> i exist where flow is positive.
                let j = u - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] == 0 {
                        continue;
                    }
                    let cand = du + (-cost[i * m + j] + pot[u] - pot[i]).max(0.0);
                    if cand < dist[i] {
                        dist[i] = cand;
                        parent[i] = u;
                    }
                }
            }
        }
        assert!(
            best_sink != usize::MAX,
            "transportation network must stay feasible"
        );

        // Bottleneck along the augmenting path.
        let sink = best_sink;
        let j_final = sink - n;
        let mut bottleneck = remaining_demand[j_final];
        let mut v = sink;
        while parent[v] != usize::MAX {
            let u = parent[v];
            if u < n && v >= n {
                // forward arc: unbounded
            } else if u >= n && v < n {
                bottleneck = bottleneck.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        let source = v;
        debug_assert!(source < n);
        bottleneck = bottleneck.min(remaining_supply[source]);
        debug_assert!(bottleneck > 0);

        // Apply the augmentation.
        let mut v = sink;
        while parent[v] != usize::MAX {
            let u = parent[v];
            if u < n && v >= n {
                flow[u * m + (v - n)] += bottleneck;
            } else {
                flow[v * m + (u - n)] -= bottleneck;
            }
            v = u;
        }
        remaining_supply[source] -= bottleneck;
        remaining_demand[j_final] -= bottleneck;
        left -= bottleneck;

        // Potential update keeps reduced costs non-negative.
        let d_sink = dist[sink];
        for v in 0..n + m {
            pot[v] += dist[v].min(d_sink);
        }
    }
    flow
}

/// Converts an integer flow back to a probability coupling.
pub(crate) fn flow_to_coupling(flow: &[u64]) -> Vec<f64> {
    flow.iter().map(|&f| f as f64 / SCALE as f64).collect()
}
