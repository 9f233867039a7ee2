//! Dense Gaussian elimination, applied one strongly connected block at a time.

use super::VerifyError;

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Strongly connected components of the graph restricted to `nodes`
/// (`succ` yields successors; those outside `nodes` are ignored). Components
/// come out in reverse topological order: every component appears after all
/// components it can reach.
pub fn tarjan_scc(
    n: usize,
    in_set: &[bool],
    succ: &dyn Fn(usize) -> Vec<usize>,
) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0usize;
    for root in 0..n {
        if !in_set[root] || index[root] != UNVISITED {
            continue;
        }
        // Explicit DFS stack of (node, successors, cursor).
        let mut dfs: Vec<(usize, Vec<usize>, usize)> = Vec::new();
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        dfs.push((root, succ(root), 0));
        while let Some((v, succs, cursor)) = dfs.last_mut() {
            let v = *v;
            if *cursor < succs.len() {
                let w = succs[*cursor];
                *cursor += 1;
                if !in_set[w] {
                    continue;
                }
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    let sw = succ(w);
                    dfs.push((w, sw, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                dfs.pop();
                if let Some((u, _, _)) = dfs.last() {
                    low[*u] = low[*u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("scc stack underflow");
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
    }
    out
}

/// Solves `a x = b` in place (row-major `n x n`) with partial pivoting and
/// checks the residual against the original system.
pub fn solve_dense(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>, VerifyError> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -1.0), |acc, e| if e.1 > acc.1 { e } else { acc });
        if best < 1e-300 {
            return Err(VerifyError::Singular { size: n });
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            m[r * n + col] = 0.0;
            for k in col + 1..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= m[col * n + k] * x[k];
        }
        x[col] = s / m[col * n + col];
    }
    let mut residual: f64 = 0.0;
    for r in 0..n {
        let mut s = -b[r];
        for k in 0..n {
            s += a[r * n + k] * x[k];
        }
        residual = residual.max(s.abs());
    }
    if residual > RESIDUAL_TOLERANCE {
        return Err(VerifyError::Residual { residual });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // 2x + y = 3, x + 3y = 5 -> x = 0.8, y = 1.4
        let x = solve_dense(&[2.0, 1.0, 1.0, 3.0], &[3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        // Needs a pivot swap.
        let x = solve_dense(&[0.0, 1.0, 1.0, 0.0], &[2.0, 3.0], 2).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
        assert!(matches!(
            solve_dense(&[1.0, 1.0, 1.0, 1.0], &[1.0, 2.0], 2),
            Err(VerifyError::Singular { .. })
        ));
    }

    #[test]
    fn scc_order_is_reverse_topological() {
        // 0 -> 1 <-> 2 -> 3
        let edges = [vec![1], vec![2], vec![1, 3], vec![]];
        let comps = tarjan_scc(4, &[true; 4], &|v| edges[v].clone());
        assert_eq!(comps, vec![vec![3], vec![1, 2], vec![0]]);
        let comps = tarjan_scc(4, &[true, true, false, true], &|v| edges[v].clone());
        assert_eq!(comps, vec![vec![1], vec![0], vec![3]]);
    }
}
