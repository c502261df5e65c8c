use std::collections::BTreeSet;

/// Minimum degree ordering of a symmetric sparsity pattern.
///
/// `adjacency[i]` lists the neighbours of node `i` (self loops and
/// duplicates are ignored; the pattern is symmetrized). Returns `perm` with
/// `perm[k]` the node eliminated at step `k`. Ties go to the lowest index so
/// the result is deterministic.
pub fn minimum_degree(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut graph: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, nbrs) in adjacency.iter().enumerate() {
        for &j in nbrs {
            if i != j {
                graph[i].insert(j);
                graph[j].insert(i);
            }
        }
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (graph[i].len(), i)).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        perm.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut graph[v]).into_iter().collect();
        for &a in &nbrs {
            queue.remove(&(graph[a].len(), a));
            graph[a].remove(&v);
        }
        for (k, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[k + 1..] {
                graph[a].insert(b);
                graph[b].insert(a);
            }
        }
        for &a in &nbrs {
            queue.insert((graph[a].len(), a));
        }
    }
    perm
}
