//! Directed-graph helpers over dense node indices.

use alloc::vec;
use alloc::vec::Vec;

/// Strongly connected components of the subgraph induced by `active`,
/// in reverse topological order (sink components first). Each component is
/// sorted ascending. Iterative Tarjan.
pub fn sccs(adj: &[Vec<usize>], active: &[bool]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0usize;
    // (node, next edge position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if !active[root] || index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if !active[w] {
                    continue;
                }
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                out.push(comp);
            }
        }
    }
    out
}

/// Components with no edge leaving them (within `active`).
pub fn bottom_sccs(adj: &[Vec<usize>], active: &[bool]) -> Vec<Vec<usize>> {
    let comps = sccs(adj, active);
    let mut which = vec![usize::MAX; adj.len()];
    for (k, c) in comps.iter().enumerate() {
        for &v in c {
            which[v] = k;
        }
    }
    comps
        .iter()
        .enumerate()
        .filter(|(k, c)| c.iter().all(|&v| adj[v].iter().all(|&w| !active[w] || which[w] == *k)))
        .map(|(_, c)| c.clone())
        .collect()
}

/// Nodes reachable from `sources` through active nodes (sources included if
/// active).
pub fn reachable(adj: &[Vec<usize>], active: &[bool], sources: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut todo: Vec<usize> = sources.iter().copied().filter(|&s| active[s]).collect();
    for &s in &todo {
        seen[s] = true;
    }
    while let Some(v) = todo.pop() {
        for &w in &adj[v] {
            if active[w] && !seen[w] {
                seen[w] = true;
                todo.push(w);
            }
        }
    }
    seen
}

/// Nodes that can reach some node of `targets` (backward reachability).
pub fn can_reach(adj: &[Vec<usize>], active: &[bool], targets: &[bool]) -> Vec<bool> {
    let n = adj.len();
    let mut rev = vec![Vec::new(); n];
    for (v, succ) in adj.iter().enumerate() {
        for &w in succ {
            rev[w].push(v);
        }
    }
    let sources: Vec<usize> = (0..n).filter(|&v| targets[v] && active[v]).collect();
    reachable(&rev, active, &sources)
}

pub fn is_strongly_connected(adj: &[Vec<usize>], nodes: &[usize]) -> bool {
    let mut active = vec![false; adj.len()];
    for &v in nodes {
        active[v] = true;
    }
    sccs(adj, &active).len() == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_example() {
        // 0 -> 1 -> 2 -> 0, 2 -> 3, 3 -> 4 -> 3, 5 isolated
        let adj = vec![vec![1], vec![2], vec![0, 3], vec![4], vec![3], vec![]];
        let active = vec![true; 6];
        let mut comps = sccs(&adj, &active);
        comps.sort();
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3, 4], vec![5]]);
        let mut bottoms = bottom_sccs(&adj, &active);
        bottoms.sort();
        assert_eq!(bottoms, vec![vec![3, 4], vec![5]]);
        assert!(!is_strongly_connected(&adj, &[0, 1, 2, 3]));
        assert!(is_strongly_connected(&adj, &[0, 1, 2]));
    }

    #[test]
    fn inactive_nodes_cut_edges() {
        let adj = vec![vec![1], vec![2], vec![0]];
        let sc = sccs(&adj, &[true, false, true]);
        assert_eq!(sc.len(), 2);
        let r = reachable(&adj, &[true, true, true], &[1]);
        assert_eq!(r, vec![true, true, true]);
        let back = can_reach(&adj, &[true, false, true], &[true, false, false]);
        assert_eq!(back, vec![true, false, true]);
    }

    #[test]
    fn long_chain_does_not_overflow() {
        let n = 50_000;
        let adj: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + 1) % n]).collect();
        assert_eq!(sccs(&adj, &vec![true; n]).len(), 1);
    }
}
