//! Minimum-degree fill-reducing ordering on the quotient graph.
//!
//! Eliminated pivots become *elements*; a variable's neighbourhood is the
//! union of its remaining variable edges and the variable lists of its
//! adjacent elements. Elements adjacent to a pivot are absorbed into the new
//! element, and variables with identical quotient adjacency are merged into
//! supervariables and eliminated together. Degrees are approximate external
//! degrees in the style of AMD.
//!
//! An optional elimination class per node restricts pivots: every node of
//! class `c` is ordered before any node of class `c + 1`. Nodes whose initial
//! degree is far above average are postponed to the end of their class.

use std::collections::{BTreeSet, HashMap};

use super::SparseMatrix;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum State {
    Var,
    Elem,
    Absorbed,
    Merged,
}

/// Minimum-degree permutation of a square pattern; `perm[k]` is the original
/// index eliminated `k`-th. Values are ignored, and the pattern is symmetrized.
pub fn minimum_degree(pattern: &SparseMatrix) -> Vec<usize> {
    minimum_degree_classes(pattern, &vec![0; pattern.ncols()])
}

/// [`minimum_degree`] with elimination classes (see module docs).
pub fn minimum_degree_classes(pattern: &SparseMatrix, class: &[u8]) -> Vec<usize> {
    let n = pattern.ncols();
    assert_eq!(pattern.nrows(), n, "ordering needs a square pattern");
    assert_eq!(class.len(), n);

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, _) in pattern.triplets() {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }

    // Very dense nodes are taken out of the graph and appended per class.
    let dense_cut = ((10.0 * (n as f64).sqrt()) as usize).max(16);
    let dense: Vec<bool> = adj.iter().map(|a| a.len() > dense_cut && n > 64).collect();
    for (i, a) in adj.iter_mut().enumerate() {
        if !dense[i] {
            a.retain(|&j| !dense[j]);
        }
    }
    let mut postponed: Vec<Vec<usize>> =
        vec![Vec::new(); class.iter().map(|&c| c as usize + 1).max().unwrap_or(1)];
    for i in (0..n).filter(|&i| dense[i]) {
        postponed[class[i] as usize].push(i);
    }

    let mut g = QuotientGraph::new(adj, &dense);
    let mut heap: BTreeSet<(u8, usize, usize)> = BTreeSet::new();
    for i in 0..n {
        if !dense[i] {
            let d = g.vars[i].len();
            g.degree[i] = d;
            heap.insert((class[i], d, i));
        }
    }

    let mut order = Vec::with_capacity(n);
    let mut current_class = 0u8;
    while let Some(&(cls, _, p)) = heap.first() {
        // Flush postponed dense nodes of every class that is now finished.
        while current_class < cls {
            order.append(&mut postponed[current_class as usize]);
            current_class += 1;
        }
        heap.pop_first();
        let lp = g.eliminate(p, &mut order);
        for &i in &lp {
            heap.remove(&(class[i], g.degree[i], i));
        }
        g.merge_indistinguishable(&lp, class);
        g.update_degrees(p, &lp);
        for &i in &lp {
            if g.state[i] == State::Var {
                heap.insert((class[i], g.degree[i], i));
            }
        }
    }
    for rest in postponed.iter_mut() {
        order.append(rest);
    }
    debug_assert_eq!(order.len(), n);
    order
}

struct QuotientGraph {
    vars: Vec<Vec<usize>>,
    elems: Vec<Vec<usize>>,
    elem_vars: Vec<Vec<usize>>,
    state: Vec<State>,
    weight: Vec<usize>,
    members: Vec<Vec<usize>>,
    degree: Vec<usize>,
    mark: Vec<usize>,
    stamp: usize,
    wext: Vec<isize>,
    /// Total weight of uneliminated variables.
    live: usize,
}

impl QuotientGraph {
    fn new(adj: Vec<Vec<usize>>, excluded: &[bool]) -> Self {
        let n = adj.len();
        let live = excluded.iter().filter(|&&d| !d).count();
        let state = excluded
            .iter()
            .map(|&d| if d { State::Absorbed } else { State::Var })
            .collect();
        Self {
            vars: adj,
            elems: vec![Vec::new(); n],
            elem_vars: vec![Vec::new(); n],
            state,
            weight: vec![1; n],
            members: (0..n).map(|i| vec![i]).collect(),
            degree: vec![0; n],
            mark: vec![0; n],
            stamp: 0,
            wext: vec![0; n],
            live,
        }
    }

    fn next_stamp(&mut self) -> usize {
        self.stamp += 1;
        self.stamp
    }

    /// Turns pivot `p` into an element and returns its variable list.
    fn eliminate(&mut self, p: usize, order: &mut Vec<usize>) -> Vec<usize> {
        let s = self.next_stamp();
        self.mark[p] = s;
        let mut lp = Vec::new();
        for e in std::mem::take(&mut self.elems[p]) {
            if self.state[e] != State::Elem {
                continue;
            }
            for v in std::mem::take(&mut self.elem_vars[e]) {
                if self.state[v] == State::Var && self.mark[v] != s {
                    self.mark[v] = s;
                    lp.push(v);
                }
            }
            self.state[e] = State::Absorbed;
        }
        for v in std::mem::take(&mut self.vars[p]) {
            if self.state[v] == State::Var && self.mark[v] != s {
                self.mark[v] = s;
                lp.push(v);
            }
        }
        self.live -= self.weight[p];
        order.append(&mut self.members[p]);
        self.state[p] = State::Elem;
        self.elem_vars[p] = lp.clone();

        for &i in &lp {
            let state = &self.state;
            let mark = &self.mark;
            self.elems[i].retain(|&e| state[e] == State::Elem && e != p);
            self.elems[i].push(p);
            self.vars[i].retain(|&v| state[v] == State::Var && mark[v] != s);
        }
        lp
    }

    fn merge_indistinguishable(&mut self, lp: &[usize], class: &[u8]) {
        let mut buckets: HashMap<(u8, usize, usize, u64), Vec<usize>> = HashMap::new();
        for &i in lp {
            self.vars[i].sort_unstable();
            self.elems[i].sort_unstable();
            let h = self.vars[i]
                .iter()
                .chain(&self.elems[i])
                .fold(0u64, |acc, &x| {
                    acc.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                        .wrapping_add(x as u64 + 1)
                });
            buckets
                .entry((class[i], self.vars[i].len(), self.elems[i].len(), h))
                .or_default()
                .push(i);
        }
        for (_, group) in buckets {
            for a in 0..group.len() {
                let i = group[a];
                if self.state[i] != State::Var {
                    continue;
                }
                for &j in &group[a + 1..] {
                    if self.state[j] == State::Var
                        && self.vars[i] == self.vars[j]
                        && self.elems[i] == self.elems[j]
                    {
                        self.state[j] = State::Merged;
                        self.weight[i] += self.weight[j];
                        let moved = std::mem::take(&mut self.members[j]);
                        self.members[i].extend(moved);
                        self.vars[j].clear();
                        self.elems[j].clear();
                    }
                }
            }
        }
    }

    /// Live weight of element `e`, compacting its variable list.
    fn element_weight(&mut self, e: usize) -> usize {
        let state = &self.state;
        let list = &mut self.elem_vars[e];
        list.retain(|&v| state[v] == State::Var);
        list.iter().map(|&v| self.weight[v]).sum()
    }

    /// Approximate external degrees for the variables of new element `p`:
    /// `|A_i| + |L_p \ i| + Σ_e |L_e \ L_p|`, capped by the number of live
    /// variables. Elements contained in `L_p` are absorbed.
    fn update_degrees(&mut self, p: usize, lp: &[usize]) {
        let s = self.next_stamp();
        let lp_live: Vec<usize> = lp
            .iter()
            .copied()
            .filter(|&i| self.state[i] == State::Var)
            .collect();
        let lp_weight: usize = lp_live.iter().map(|&i| self.weight[i]).sum();
        for &i in &lp_live {
            for idx in 0..self.elems[i].len() {
                let e = self.elems[i][idx];
                if e == p || self.state[e] != State::Elem {
                    continue;
                }
                if self.mark[e] != s {
                    self.mark[e] = s;
                    self.wext[e] = self.element_weight(e) as isize;
                }
                self.wext[e] -= self.weight[i] as isize;
            }
        }
        for &i in &lp_live {
            let mut deg = lp_weight - self.weight[i];
            let mut absorbed = false;
            for &e in &self.elems[i] {
                if e != p && self.state[e] == State::Elem {
                    if self.wext[e] <= 0 {
                        absorbed = true;
                    } else {
                        deg += self.wext[e] as usize;
                    }
                }
            }
            if absorbed {
                for idx in 0..self.elems[i].len() {
                    let e = self.elems[i][idx];
                    if e != p && self.state[e] == State::Elem && self.wext[e] <= 0 {
                        self.state[e] = State::Absorbed;
                        self.elem_vars[e].clear();
                    }
                }
                let state = &self.state;
                self.elems[i].retain(|&e| state[e] == State::Elem);
            }
            for &v in &self.vars[i] {
                if self.state[v] == State::Var {
                    deg += self.weight[v];
                }
            }
            self.degree[i] = deg.min(self.live - self.weight[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplets;

    fn pattern(n: usize, edges: &[(usize, usize)]) -> SparseMatrix {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, 1.0).unwrap();
        }
        for &(a, b) in edges {
            t.push(a, b, 1.0).unwrap();
            t.push(b, a, 1.0).unwrap();
        }
        t.to_csc()
    }

    fn is_permutation(p: &[usize], n: usize) -> bool {
        let mut seen = vec![false; n];
        p.len() == n
            && p.iter()
                .all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
    }

    #[test]
    fn star_center_is_eliminated_late() {
        let edges: Vec<_> = (1..8).map(|i| (0, i)).collect();
        let p = minimum_degree(&pattern(8, &edges));
        assert!(is_permutation(&p, 8));
        // Once one leaf remains the tie with the centre is harmless.
        assert!(p[6..].contains(&0));
    }

    #[test]
    fn classes_are_respected() {
        let edges: Vec<_> = (0..9).map(|i| (i, i + 1)).collect();
        let class: Vec<u8> = (0..10).map(|i| if i % 3 == 0 { 1 } else { 0 }).collect();
        let p = minimum_degree_classes(&pattern(10, &edges), &class);
        assert!(is_permutation(&p, 10));
        let first_late = p.iter().position(|&i| class[i] == 1).unwrap();
        assert!(p[first_late..].iter().all(|&i| class[i] == 1));
    }

    #[test]
    fn empty_and_diagonal() {
        assert!(minimum_degree(&SparseMatrix::zeros(0, 0)).is_empty());
        let p = minimum_degree(&SparseMatrix::identity(5));
        assert!(is_permutation(&p, 5));
    }
}
