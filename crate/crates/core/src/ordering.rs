//! Nested-dissection ordering for sparse Cholesky.
//!
//! Separators are BFS level sets rooted at a pseudo-peripheral vertex, which
//! for two-dimensional surface meshes gives `O(√n)` separators.

use std::collections::VecDeque;

/// Subgraphs at or below this size are appended without further dissection.
const LEAF_SIZE: usize = 48;

/// Symmetric graph in adjacency-list (CSR) form, no self loops.
#[derive(Debug, Clone)]
pub struct Graph {
    pub ptr: Vec<usize>,
    pub adj: Vec<usize>,
}

impl Graph {
    /// Off-diagonal pattern of a symmetric CSR matrix.
    pub fn from_csr(n: usize, row_ptr: &[usize], col_idx: &[usize]) -> Self {
        let mut ptr = Vec::with_capacity(n + 1);
        let mut adj = Vec::with_capacity(col_idx.len());
        ptr.push(0);
        for i in 0..n {
            adj.extend(col_idx[row_ptr[i]..row_ptr[i + 1]].iter().copied().filter(|&j| j != i));
            ptr.push(adj.len());
        }
        Graph { ptr, adj }
    }

    pub fn n(&self) -> usize {
        self.ptr.len() - 1
    }

    fn neighbours(&self, v: usize) -> &[usize] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }
}

struct Dissector<'g> {
    graph: &'g Graph,
    /// Which subgraph each vertex currently belongs to.
    part: Vec<usize>,
    level: Vec<usize>,
    next_part: usize,
    order: Vec<usize>,
}

/// Elimination order: `perm[k]` is the original vertex eliminated `k`-th.
pub fn nested_dissection(graph: &Graph) -> Vec<usize> {
    let n = graph.n();
    let mut d = Dissector {
        graph,
        part: vec![0; n],
        level: vec![usize::MAX; n],
        next_part: 1,
        order: Vec::with_capacity(n),
    };
    d.dissect((0..n).collect(), 0);
    debug_assert_eq!(d.order.len(), n);
    d.order
}

impl Dissector<'_> {
    fn new_part(&mut self, nodes: &[usize]) -> usize {
        let id = self.next_part;
        self.next_part += 1;
        for &v in nodes {
            self.part[v] = id;
        }
        id
    }

    /// BFS inside `part` from `root`; returns the visit order and level widths.
    fn bfs(&mut self, root: usize, part: usize) -> (Vec<usize>, Vec<usize>) {
        let mut visited = vec![root];
        let mut widths = vec![1];
        self.level[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            let lv = self.level[v];
            for &w in self.graph.neighbours(v) {
                if self.part[w] == part && self.level[w] == usize::MAX {
                    self.level[w] = lv + 1;
                    if widths.len() <= lv + 1 {
                        widths.push(0);
                    }
                    widths[lv + 1] += 1;
                    visited.push(w);
                    queue.push_back(w);
                }
            }
        }
        (visited, widths)
    }

    fn clear_levels(&mut self, nodes: &[usize]) {
        for &v in nodes {
            self.level[v] = usize::MAX;
        }
    }

    fn degree_in(&self, v: usize, part: usize) -> usize {
        self.graph.neighbours(v).iter().filter(|&&w| self.part[w] == part).count()
    }

    fn dissect(&mut self, nodes: Vec<usize>, part: usize) {
        if nodes.len() <= LEAF_SIZE {
            self.order.extend_from_slice(&nodes);
            return;
        }
        // pseudo-peripheral root
        let mut root = nodes[0];
        let (mut visited, mut widths) = self.bfs(root, part);
        for _ in 0..8 {
            let last_level = widths.len() - 1;
            let candidate = visited
                .iter()
                .copied()
                .filter(|&v| self.level[v] == last_level)
                .min_by_key(|&v| (self.degree_in(v, part), v))
                .unwrap();
            self.clear_levels(&visited);
            let (v2, w2) = self.bfs(candidate, part);
            if w2.len() <= widths.len() {
                // no gain: restore the BFS from the current root
                self.clear_levels(&v2);
                let (v3, w3) = self.bfs(root, part);
                visited = v3;
                widths = w3;
                break;
            }
            root = candidate;
            visited = v2;
            widths = w2;
        }

        if visited.len() < nodes.len() {
            // disconnected: split off the reached component
            let rest: Vec<usize> = nodes.iter().copied().filter(|&v| self.level[v] == usize::MAX).collect();
            let reached = visited;
            self.clear_levels(&reached);
            let pa = self.new_part(&reached);
            let pb = self.new_part(&rest);
            self.dissect(reached, pa);
            self.dissect(rest, pb);
            return;
        }

        // separator level: first level where the cumulative count passes half
        let half = nodes.len() / 2;
        let mut acc = 0;
        let mut sep_level = 0;
        for (l, &w) in widths.iter().enumerate() {
            acc += w;
            if acc >= half {
                sep_level = l;
                break;
            }
        }
        if sep_level == 0 || sep_level + 1 >= widths.len() {
            self.clear_levels(&visited);
            self.order.extend_from_slice(&nodes);
            return;
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut sep = Vec::new();
        for &v in &visited {
            let l = self.level[v];
            if l < sep_level {
                a.push(v);
            } else if l > sep_level {
                b.push(v);
            } else {
                // separator vertices with no neighbour beyond the separator can join A
                let touches_b = self
                    .graph
                    .neighbours(v)
                    .iter()
                    .any(|&w| self.part[w] == part && self.level[w] == sep_level + 1);
                if touches_b {
                    sep.push(v);
                } else {
                    a.push(v);
                }
            }
        }
        self.clear_levels(&visited);
        let pa = self.new_part(&a);
        let pb = self.new_part(&b);
        self.new_part(&sep);
        self.dissect(a, pa);
        self.dissect(b, pb);
        self.order.extend_from_slice(&sep);
    }
}
