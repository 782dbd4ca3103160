//! Embodiment and spatial graphs over robot and workspace tokens, and their
//! additive attention-bias form.
//!
//! Token order is `[robot nodes; workspace nodes]`. Row `i` of the
//! adjacency is the attending (query) token and column `j` the attended
//! (key) token, so "workspace informs robot" means robot rows are true in
//! workspace columns.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("row {0} of the adjacency has no edges")]
    EmptyRow(usize),
    #[error("invalid graph: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureGraph {
    n_robot: usize,
    n_work: usize,
    robot_link_tags: Vec<usize>,
    adjacency: Vec<bool>,
}

/// Robot-robot block: equal tags or tags one apart are connected.
pub fn build_embodiment_edges(robot_link_tags: &[usize]) -> Vec<bool> {
    let n = robot_link_tags.len();
    let mut block = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            block[i * n + j] = robot_link_tags[i].abs_diff(robot_link_tags[j]) <= 1;
        }
    }
    block
}

/// Full adjacency with only spatial edges and self-loops set: every robot
/// row attends to every workspace column, workspace rows only to themselves.
pub fn build_spatial_edges(n_robot: usize, n_work: usize) -> Vec<bool> {
    let l = n_robot + n_work;
    let mut adj = vec![false; l * l];
    for i in 0..l {
        adj[i * l + i] = true;
    }
    for i in 0..n_robot {
        for j in n_robot..l {
            adj[i * l + j] = true;
        }
    }
    adj
}

impl StructureGraph {
    pub fn build(robot_link_tags: &[usize], n_work: usize) -> Result<Self, GraphError> {
        let n_robot = robot_link_tags.len();
        if n_robot == 0 || n_work == 0 {
            return Err(GraphError::Invalid(format!(
                "need at least one robot and one workspace node (got {n_robot}, {n_work})"
            )));
        }
        let l = n_robot + n_work;
        let mut adjacency = build_spatial_edges(n_robot, n_work);
        let emb = build_embodiment_edges(robot_link_tags);
        for i in 0..n_robot {
            for j in 0..n_robot {
                adjacency[i * l + j] = emb[i * n_robot + j];
            }
        }
        Ok(Self {
            n_robot,
            n_work,
            robot_link_tags: robot_link_tags.to_vec(),
            adjacency,
        })
    }

    /// Arbitrary adjacency over `n_robot + n_work` tokens, for ablations and
    /// tests. Validity of rows is checked when converting to a bias.
    pub fn from_adjacency(n_robot: usize, n_work: usize, adjacency: Vec<bool>) -> Result<Self, GraphError> {
        let l = n_robot + n_work;
        if adjacency.len() != l * l {
            return Err(GraphError::Invalid(format!(
                "adjacency has {} entries, expected {}",
                adjacency.len(),
                l * l
            )));
        }
        Ok(Self {
            n_robot,
            n_work,
            robot_link_tags: Vec::new(),
            adjacency,
        })
    }

    /// Every token attends to every token.
    pub fn complete(n_robot: usize, n_work: usize) -> Self {
        let l = n_robot + n_work;
        Self {
            n_robot,
            n_work,
            robot_link_tags: Vec::new(),
            adjacency: vec![true; l * l],
        }
    }

    pub fn n_robot(&self) -> usize {
        self.n_robot
    }

    pub fn n_work(&self) -> usize {
        self.n_work
    }

    pub fn len(&self) -> usize {
        self.n_robot + self.n_work
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn robot_link_tags(&self) -> &[usize] {
        &self.robot_link_tags
    }

    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.len() + j]
    }

    pub fn adjacency(&self) -> &[bool] {
        &self.adjacency
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&e| e).count()
    }

    /// Dense 0/1 grid, one row per line.
    pub fn to_text(&self) -> String {
        let l = self.len();
        let mut s = String::with_capacity(l * (2 * l + 1) + 64);
        let _ = writeln!(s, "# robot={} workspace={}", self.n_robot, self.n_work);
        for i in 0..l {
            let row: Vec<&str> = (0..l).map(|j| if self.edge(i, j) { "1" } else { "0" }).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Additive attention mask: `0` where an edge exists, `-inf` elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionBias {
    size: usize,
    values: Vec<f64>,
}

impl AttentionBias {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Zero bias, equivalent to no mask.
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            values: vec![0.0; size * size],
        }
    }
}

pub fn adjacency_to_bias(graph: &StructureGraph) -> Result<AttentionBias, GraphError> {
    let l = graph.len();
    for i in 0..l {
        if !(0..l).any(|j| graph.edge(i, j)) {
            return Err(GraphError::EmptyRow(i));
        }
    }
    Ok(AttentionBias {
        size: l,
        values: graph
            .adjacency
            .iter()
            .map(|&e| if e { 0.0 } else { f64::NEG_INFINITY })
            .collect(),
    })
}
