//! Strongly connected components by an iterative Tarjan pass, so deep graphs
//! cannot overflow the call stack.

use super::graph::FirmGraph;

const UNSEEN: u32 = u32::MAX;

/// Calls `emit` with the members of every strongly connected component of the
/// subgraph induced by `alive` (all nodes when `None`). Components arrive in
/// reverse topological order; members are in stack order.
pub fn for_each_scc<F>(graph: &FirmGraph, alive: Option<&[bool]>, mut emit: F)
where
    F: FnMut(&[u32]),
{
    let n = graph.len();
    let live = |v: usize| alive.is_none_or(|a| a[v]);
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut call: Vec<(u32, u32)> = Vec::new();
    let mut counter = 0u32;

    for root in 0..n {
        if !live(root) || index[root] != UNSEEN {
            continue;
        }
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root as u32);
        on_stack[root] = true;
        call.push((root as u32, 0));

        while let Some(frame) = call.last_mut() {
            let v = frame.0 as usize;
            let succ = graph.successors(v);
            if (frame.1 as usize) < succ.len() {
                let w = succ[frame.1 as usize] as usize;
                frame.1 += 1;
                if !live(w) {
                    continue;
                }
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w as u32);
                    on_stack[w] = true;
                    call.push((w as u32, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(parent) = call.last() {
                let p = parent.0 as usize;
                low[p] = low[p].min(low[v]);
            }
            if low[v] == index[v] {
                let cut = stack
                    .iter()
                    .rposition(|&x| x as usize == v)
                    .expect("root is on the stack");
                for &x in &stack[cut..] {
                    on_stack[x as usize] = false;
                }
                emit(&stack[cut..]);
                stack.truncate(cut);
            }
        }
    }
}

/// Component label per node, `u32::MAX` for nodes outside `alive`.
pub fn scc_labels(graph: &FirmGraph, alive: Option<&[bool]>) -> Vec<u32> {
    let mut labels = vec![UNSEEN; graph.len()];
    let mut next = 0u32;
    for_each_scc(graph, alive, |members| {
        for &v in members {
            labels[v as usize] = next;
        }
        next += 1;
    });
    labels
}

/// Largest strongly connected cluster of the live subgraph, as sorted node
/// indices. Among equal sizes the one holding the smallest id wins.
pub fn lscc_masked(graph: &FirmGraph, alive: Option<&[bool]>) -> Vec<usize> {
    let mut best: Option<(usize, u32, Vec<u32>)> = None;
    for_each_scc(graph, alive, |members| {
        let size = members.len();
        let min = *members.iter().min().expect("components are non-empty");
        let better = match &best {
            None => true,
            Some((s, m, _)) => size > *s || (size == *s && min < *m),
        };
        if better {
            best = Some((size, min, members.to_vec()));
        }
    });
    let mut out: Vec<usize> = best
        .map(|(_, _, m)| m.into_iter().map(|v| v as usize).collect())
        .unwrap_or_default();
    out.sort_unstable();
    out
}

pub fn lscc(graph: &FirmGraph) -> Vec<usize> {
    lscc_masked(graph, None)
}

/// Size of the largest strongly connected cluster of the live subgraph.
pub fn lscc_size(graph: &FirmGraph, alive: Option<&[bool]>) -> usize {
    let mut best = 0;
    for_each_scc(graph, alive, |m| best = best.max(m.len()));
    best
}
