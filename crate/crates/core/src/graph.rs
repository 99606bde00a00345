//! Per-frame graph construction.
//!
//! Six constructors share one output shape: a [`FrameGraph`] whose
//! `neighbor_sets[i]` lists the nodes whose features flow *into* node i.
//! Star graphs add a synthetic center node at index 0; the other types use
//! only the measured points.

use crate::nn::Tensor2;
use crate::pointcloud::{Point3, PointFrame, PointSequence};
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("k must be >= 1, got {0}")]
    InvalidK(usize),
    #[error("radius must be > 0, got {0}")]
    InvalidRadius(f64),
}

/// How the star center's coordinates are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "point", rename_all = "snake_case")]
pub enum CenterMode {
    /// A fixed point, by default (0, 1, 0).
    Static(Point3),
    /// Coordinate-wise mean of the frame's points ((0,0,0) when empty).
    Mean,
    /// The origin.
    Zero,
}

impl Default for CenterMode {
    fn default() -> Self {
        CenterMode::Static(Point3::new(0.0, 1.0, 0.0))
    }
}

pub fn center_point(frame: &PointFrame, mode: CenterMode) -> Point3 {
    match mode {
        CenterMode::Static(p) => p,
        CenterMode::Zero => Point3::origin(),
        CenterMode::Mean => {
            if frame.is_empty() {
                return Point3::origin();
            }
            let n = frame.len() as f64;
            let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
            for p in &frame.points {
                x += p.x;
                y += p.y;
                z += p.z;
            }
            Point3::new(x / n, y / n, z / n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphType {
    DStar,
    UStar,
    Knn,
    Radius,
    Fc,
    Empty,
}

impl GraphType {
    pub const ALL: [GraphType; 6] = [
        GraphType::DStar,
        GraphType::UStar,
        GraphType::Knn,
        GraphType::Radius,
        GraphType::Fc,
        GraphType::Empty,
    ];

    pub fn is_star(self) -> bool {
        matches!(self, GraphType::DStar | GraphType::UStar)
    }

    pub fn name(self) -> &'static str {
        match self {
            GraphType::DStar => "dstar",
            GraphType::UStar => "ustar",
            GraphType::Knn => "knn",
            GraphType::Radius => "radius",
            GraphType::Fc => "fc",
            GraphType::Empty => "empty",
        }
    }
}

impl std::str::FromStr for GraphType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dstar" => Ok(GraphType::DStar),
            "ustar" => Ok(GraphType::UStar),
            "knn" => Ok(GraphType::Knn),
            "radius" => Ok(GraphType::Radius),
            "fc" => Ok(GraphType::Fc),
            "empty" => Ok(GraphType::Empty),
            other => Err(format!(
                "unknown graph type '{other}' (expected dstar|ustar|knn|radius|fc|empty)"
            )),
        }
    }
}

/// Constructor choice plus its parameters; `k` is used by Knn, `radius` by
/// Radius, `center` by the star types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub graph_type: GraphType,
    pub k: usize,
    pub radius: f64,
    pub center: CenterMode,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { graph_type: GraphType::DStar, k: 5, radius: 0.5, center: CenterMode::default() }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        match self.graph_type {
            GraphType::Knn if self.k < 1 => Err(GraphError::InvalidK(self.k)),
            GraphType::Radius if !(self.radius > 0.0) => {
                Err(GraphError::InvalidRadius(self.radius))
            }
            _ => Ok(()),
        }
    }
}

/// One frame's graph. `nodes` holds the length-3 feature of every node,
/// with the center (if any) at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameGraph {
    pub nodes: Vec<[f64; 3]>,
    pub neighbor_sets: Vec<Vec<usize>>,
    pub has_center: bool,
}

impl FrameGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Directed edge count: the total size of all neighbor sets.
    pub fn edge_count(&self) -> usize {
        self.neighbor_sets.iter().map(Vec::len).sum()
    }

    /// Node features as an (n x 3) matrix, ready for the network.
    pub fn feature_matrix(&self) -> Tensor2 {
        let data: Vec<f64> = self.nodes.iter().flat_map(|p| p.iter().copied()).collect();
        Tensor2::from_vec(self.nodes.len(), 3, data)
    }

    /// Dense A with A(i,j) = 1 iff j ∈ N(p_i).
    pub fn adjacency_matrix(&self) -> Tensor2 {
        let n = self.node_count();
        let mut a = Tensor2::zeros(n, n);
        for (i, ns) in self.neighbor_sets.iter().enumerate() {
            for &j in ns {
                a.set(i, j, 1.0);
            }
        }
        a
    }

    /// Inverse of `adjacency_matrix`, used by round-trip tests.
    pub fn from_adjacency(nodes: Vec<[f64; 3]>, a: &Tensor2, has_center: bool) -> Self {
        assert_eq!(a.rows(), nodes.len());
        assert_eq!(a.cols(), nodes.len());
        let neighbor_sets = (0..a.rows())
            .map(|i| (0..a.cols()).filter(|&j| a.get(i, j) != 0.0).collect())
            .collect();
        Self { nodes, neighbor_sets, has_center }
    }

    /// Adjacency as CSV text, one row per line.
    pub fn adjacency_csv(&self) -> String {
        let a = self.adjacency_matrix();
        let mut out = String::new();
        for i in 0..a.rows() {
            let row: Vec<String> =
                a.row(i).iter().map(|&v| format!("{}", v as i64)).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn frame_nodes_with_center(frame: &PointFrame, center: Point3) -> Vec<[f64; 3]> {
    let mut nodes = Vec::with_capacity(frame.len() + 1);
    nodes.push(center.to_array());
    nodes.extend(frame.points.iter().map(|p| p.to_array()));
    nodes
}

/// Directed star: every point receives the center, the center receives
/// nothing. An empty frame still yields the center-only graph.
pub fn build_dstar(frame: &PointFrame, center: Point3) -> FrameGraph {
    let n = frame.len();
    let mut neighbor_sets = Vec::with_capacity(n + 1);
    neighbor_sets.push(Vec::new());
    for _ in 0..n {
        neighbor_sets.push(vec![0]);
    }
    FrameGraph { nodes: frame_nodes_with_center(frame, center), neighbor_sets, has_center: true }
}

/// Undirected star: center and points exchange features both ways.
pub fn build_ustar(frame: &PointFrame, center: Point3) -> FrameGraph {
    let n = frame.len();
    let mut neighbor_sets = Vec::with_capacity(n + 1);
    neighbor_sets.push((1..=n).collect());
    for _ in 0..n {
        neighbor_sets.push(vec![0]);
    }
    FrameGraph { nodes: frame_nodes_with_center(frame, center), neighbor_sets, has_center: true }
}

/// k-nearest-neighbor graph over the points themselves (no center). Each
/// node receives its min(k, n-1) nearest points; distance ties break to the
/// lower index.
pub fn build_knn(frame: &PointFrame, k: usize) -> FrameGraph {
    assert!(k >= 1, "k must be >= 1");
    let n = frame.len();
    let kk = k.min(n.saturating_sub(1));
    let mut neighbor_sets = Vec::with_capacity(n);
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        if kk > 0 {
            others.select_nth_unstable_by(kk - 1, |&a, &b| {
                let da = frame.points[i].distance(&frame.points[a]);
                let db = frame.points[i].distance(&frame.points[b]);
                da.partial_cmp(&db).unwrap().then(a.cmp(&b))
            });
            others.truncate(kk);
            others.sort_unstable();
        } else {
            others.clear();
        }
        neighbor_sets.push(others);
    }
    FrameGraph {
        nodes: frame.points.iter().map(|p| p.to_array()).collect(),
        neighbor_sets,
        has_center: false,
    }
}

/// Distance-threshold graph (no center); inclusive bound, symmetric.
pub fn build_radius(frame: &PointFrame, r: f64) -> FrameGraph {
    assert!(r > 0.0, "radius must be positive");
    let n = frame.len();
    let neighbor_sets = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && frame.points[i].distance(&frame.points[j]) <= r)
                .collect()
        })
        .collect();
    FrameGraph {
        nodes: frame.points.iter().map(|p| p.to_array()).collect(),
        neighbor_sets,
        has_center: false,
    }
}

/// Fully connected graph over the points (no center).
pub fn build_fc(frame: &PointFrame) -> FrameGraph {
    let n = frame.len();
    let neighbor_sets = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
    FrameGraph {
        nodes: frame.points.iter().map(|p| p.to_array()).collect(),
        neighbor_sets,
        has_center: false,
    }
}

/// Edgeless graph: every node isolated, so GraphConv degenerates to a
/// pointwise transform.
pub fn build_empty(frame: &PointFrame) -> FrameGraph {
    let n = frame.len();
    FrameGraph {
        nodes: frame.points.iter().map(|p| p.to_array()).collect(),
        neighbor_sets: vec![Vec::new(); n],
        has_center: false,
    }
}

pub fn build_frame(frame: &PointFrame, config: &GraphConfig) -> FrameGraph {
    match config.graph_type {
        GraphType::DStar => build_dstar(frame, center_point(frame, config.center)),
        GraphType::UStar => build_ustar(frame, center_point(frame, config.center)),
        GraphType::Knn => build_knn(frame, config.k),
        GraphType::Radius => build_radius(frame, config.radius),
        GraphType::Fc => build_fc(frame),
        GraphType::Empty => build_empty(frame),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSequence {
    pub graphs: Vec<FrameGraph>,
    pub label: usize,
    pub subject_id: u32,
}

impl GraphSequence {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

/// Applies the configured constructor to every frame. Parameter validation
/// happens up front so a bad config cannot half-process a sequence.
pub fn build_sequence(seq: &PointSequence, config: &GraphConfig) -> Result<GraphSequence, GraphError> {
    config.validate()?;
    Ok(GraphSequence {
        graphs: seq.frames.iter().map(|f| build_frame(f, config)).collect(),
        label: seq.label,
        subject_id: seq.subject_id,
    })
}

/// Writes a graph sequence as inspectable JSONL: a header line followed by
/// one object per frame.
pub fn write_graph_jsonl<W: Write>(w: &mut W, seq: &GraphSequence) -> io::Result<()> {
    writeln!(
        w,
        "{}",
        serde_json::json!({
            "format": "graphseq",
            "version": 1,
            "frames": seq.len(),
            "label": seq.label,
            "subject": seq.subject_id,
        })
    )?;
    for (idx, g) in seq.graphs.iter().enumerate() {
        let line = serde_json::json!({
            "frame": idx,
            "nodes": g.nodes,
            "neighbors": g.neighbor_sets,
            "has_center": g.has_center,
        });
        writeln!(w, "{line}")?;
    }
    Ok(())
}
