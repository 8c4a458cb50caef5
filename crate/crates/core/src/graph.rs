//! Reachability on small dense directed graphs given by an edge predicate.

/// Marks every vertex reachable from `start` (following edges forward, or
/// backward when `reverse` is set). Only vertices with `include[v]` are visited.
pub(crate) fn reach(
    n: usize,
    start: usize,
    include: &[bool],
    reverse: bool,
    edge: &impl Fn(usize, usize) -> bool,
) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if seen[v] || !include[v] {
                continue;
            }
            let linked = if reverse { edge(v, u) } else { edge(u, v) };
            if linked {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// True iff the subgraph induced by `include` is strongly connected.
/// An empty or single-vertex subgraph counts as connected.
pub(crate) fn strongly_connected(
    n: usize,
    include: &[bool],
    edge: impl Fn(usize, usize) -> bool,
) -> bool {
    let Some(start) = (0..n).find(|&v| include[v]) else {
        return true;
    };
    let fwd = reach(n, start, include, false, &edge);
    if (0..n).any(|v| include[v] && !fwd[v]) {
        return false;
    }
    let bwd = reach(n, start, include, true, &edge);
    (0..n).all(|v| !include[v] || bwd[v])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_is_strongly_connected() {
        let all = [true; 4];
        assert!(strongly_connected(4, &all, |u, v| v == (u + 1) % 4));
        assert!(!strongly_connected(4, &all, |u, v| v == u + 1));
    }

    #[test]
    fn excluded_vertices_are_ignored() {
        let inc = [true, true, false];
        assert!(strongly_connected(3, &inc, |u, v| u != v && u < 2 && v < 2));
        assert!(strongly_connected(3, &[false; 3], |_, _| false));
    }
}
