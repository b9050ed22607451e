use std::collections::BTreeSet;

use super::SymSparse;

/// Minimum-degree fill-reducing ordering of the graph of `q`.
///
/// Returns `perm` with `perm[new] = old`. Works on the explicit elimination
/// graph; ties are broken by the smaller vertex index so the result is
/// deterministic.
pub fn minimum_degree(q: &SymSparse) -> Vec<usize> {
    let n = q.dim();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in q.iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }

    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some((_, v)) = queue.pop_first() {
        perm.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            queue.remove(&(adj[u].len(), u));
            merge_clique(&adj[u], &nbrs, u, v, &mut merged);
            std::mem::swap(&mut adj[u], &mut merged);
            queue.insert((adj[u].len(), u));
        }
    }
    perm
}

/// `out = (current ∪ clique) \ {skip_self, eliminated}` for sorted inputs.
fn merge_clique(current: &[usize], clique: &[usize], skip_self: usize, eliminated: usize, out: &mut Vec<usize>) {
    out.clear();
    let (mut a, mut b) = (0, 0);
    loop {
        let next = match (current.get(a), clique.get(b)) {
            (Some(&x), Some(&y)) if x == y => {
                a += 1;
                b += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                a += 1;
                x
            }
            (_, Some(&y)) => {
                b += 1;
                y
            }
            (Some(&x), None) => {
                a += 1;
                x
            }
            (None, None) => break,
        };
        if next != skip_self && next != eliminated {
            out.push(next);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_permutation(p: &[usize]) -> bool {
        let mut seen = vec![false; p.len()];
        p.iter().all(|&i| i < p.len() && !std::mem::replace(&mut seen[i], true))
    }

    #[test]
    fn arrow_matrix_puts_hub_last() {
        // hub vertex 0 connected to everything: eliminating it first fills the matrix
        let n = 6;
        let mut t: Vec<_> = (0..n).map(|i| (i, i, 4.0)).collect();
        t.extend((1..n).map(|i| (i, 0, 1.0)));
        let q = SymSparse::from_triplets(n, &t).unwrap();
        let perm = minimum_degree(&q);
        assert!(is_permutation(&perm));
        // the hub ties with the last leaf once everything else is gone
        assert!(perm[n - 2..].contains(&0));
    }

    #[test]
    fn ordering_is_deterministic() {
        let n = 30;
        let mut t: Vec<_> = (0..n).map(|i| (i, i, 3.0)).collect();
        t.extend((1..n).map(|i| (i, i - 1, -1.0)));
        t.push((n - 1, 0, -1.0));
        let q = SymSparse::from_triplets(n, &t).unwrap();
        assert_eq!(minimum_degree(&q), minimum_degree(&q));
        assert!(is_permutation(&minimum_degree(&q)));
    }

    #[test]
    fn merge_excludes_self_and_eliminated() {
        let mut out = Vec::new();
        merge_clique(&[1, 3, 7], &[2, 3, 5, 9], 5, 7, &mut out);
        assert_eq!(out, vec![1, 2, 3, 9]);
    }
}
