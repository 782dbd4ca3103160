use crate::kinematics::Config;

/// Rooted tree of configurations with per-node cost-from-root.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tree {
    nodes: Vec<Config>,
    parent: Vec<Option<usize>>,
    cost: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    pub fn new(root: Config) -> Self {
        Self {
            nodes: vec![root],
            parent: vec![None],
            cost: vec![0.0],
            children: vec![Vec::new()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &Config {
        &self.nodes[i]
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn cost(&self, i: usize) -> f64 {
        self.cost[i]
    }

    pub fn add(&mut self, q: Config, parent: usize) -> usize {
        let c = self.cost[parent] + self.nodes[parent].distance(&q);
        self.nodes.push(q);
        self.parent.push(Some(parent));
        self.cost.push(c);
        self.children.push(Vec::new());
        let id = self.nodes.len() - 1;
        self.children[parent].push(id);
        id
    }

    /// Lowest index among the closest nodes.
    pub fn nearest(&self, q: &Config) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, n) in self.nodes.iter().enumerate() {
            let d = n.distance(q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    pub fn near(&self, q: &Config, radius: f64) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].distance(q) <= radius)
            .collect()
    }

    /// Moves `node` under `new_parent` and refreshes costs below it.
    pub fn reparent(&mut self, node: usize, new_parent: usize) {
        if let Some(old) = self.parent[node] {
            self.children[old].retain(|&c| c != node);
        }
        self.parent[node] = Some(new_parent);
        self.children[new_parent].push(node);
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            let p = self.parent[n].expect("non-root");
            self.cost[n] = self.cost[p] + self.nodes[p].distance(&self.nodes[n]);
            stack.extend_from_slice(&self.children[n]);
        }
    }

    /// Configurations from the root to `i`.
    pub fn path_to(&self, i: usize) -> Vec<Config> {
        let mut out = vec![self.nodes[i].clone()];
        let mut cur = i;
        while let Some(p) = self.parent[cur] {
            out.push(self.nodes[p].clone());
            cur = p;
        }
        out.reverse();
        out
    }

    /// Every non-root cost equals its parent's plus the edge length.
    pub fn costs_consistent(&self, tol: f64) -> bool {
        (1..self.len()).all(|i| {
            let p = self.parent[i].expect("non-root");
            (self.cost[i] - self.cost[p] - self.nodes[p].distance(&self.nodes[i])).abs() <= tol
        })
    }
}
