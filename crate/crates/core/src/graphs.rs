//! Graph structures for walks, with the port pairing used by the coined shift.
//!
//! Every graph stores, for each vertex, `max_degree` port slots. A slot is
//! either wired to a slot at a neighbouring vertex or empty. The wiring is an
//! involution on wired slots: following a port and then the port it lands on
//! returns to the start. For general graphs the wired slots at `x` are
//! `0..degree(x)`; on the finite line the endpoints keep the direction meaning
//! of their slots, so the left endpoint has only slot 1 wired and the right
//! endpoint only slot 0.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Error, Result};

const EMPTY: usize = usize::MAX;

/// Largest hypercube dimension accepted by [`build_hypercube`].
pub const MAX_HYPERCUBE_DIM: usize = 20;

/// One end of an edge: a vertex together with the port slot used there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Port {
    pub vertex: usize,
    pub port: usize,
}

/// Family a graph was generated from. Walks use this to pick the shift rule and
/// coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphKind {
    Line { halfwidth: usize },
    Cycle { size: usize },
    Hypercube { dim: usize },
    GluedTrees { depth: usize, seed: u64 },
    General,
}

/// Optional per-vertex metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexLabel {
    /// Signed position on the line.
    Coordinate(i64),
    /// Bit string of a hypercube vertex.
    Bits(u64),
    /// Column index of a glued-trees vertex, 1-based.
    Column(usize),
    None,
}

#[derive(Debug, Clone)]
pub struct GraphSpec {
    kind: GraphKind,
    max_degree: usize,
    degree: Vec<usize>,
    /// Slot table indexed by `vertex * max_degree + port`, holding the paired slot
    /// in the same encoding, or `EMPTY`.
    slots: Vec<usize>,
    neighbours: Vec<Vec<usize>>,
    labels: Vec<VertexLabel>,
}

impl GraphSpec {
    fn from_slots(
        kind: GraphKind,
        max_degree: usize,
        slots: Vec<usize>,
        labels: Vec<VertexLabel>,
    ) -> Self {
        let n = labels.len();
        let mut degree = vec![0; n];
        let mut neighbours = vec![Vec::new(); n];
        for x in 0..n {
            let mut set = BTreeSet::new();
            for c in 0..max_degree {
                let s = slots[x * max_degree + c];
                if s != EMPTY {
                    degree[x] += 1;
                    set.insert(s / max_degree);
                }
            }
            neighbours[x] = set.into_iter().collect();
        }
        GraphSpec {
            kind,
            max_degree,
            degree,
            slots,
            neighbours,
            labels,
        }
    }

    /// Builds a graph from undirected edges, numbering ports at each vertex by
    /// increasing neighbour index.
    fn from_edges(kind: GraphKind, n: usize, edges: &[(usize, usize)], labels: Vec<VertexLabel>) -> Self {
        let mut nbrs = vec![Vec::new(); n];
        for &(u, v) in edges {
            nbrs[u].push(v);
            nbrs[v].push(u);
        }
        for list in nbrs.iter_mut() {
            list.sort_unstable();
        }
        let d = nbrs.iter().map(Vec::len).max().unwrap_or(0);
        let mut slots = vec![EMPTY; n * d];
        for x in 0..n {
            for (c, &y) in nbrs[x].iter().enumerate() {
                let back = nbrs[y].binary_search(&x).expect("symmetric neighbour lists");
                slots[x * d + c] = y * d + back;
            }
        }
        GraphSpec::from_slots(kind, d, slots, labels)
    }

    pub fn kind(&self) -> &GraphKind {
        &self.kind
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn degree(&self, x: usize) -> usize {
        self.degree[x]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    /// Size of the (vertex, port) basis.
    pub fn basis_size(&self) -> usize {
        self.vertex_count() * self.max_degree
    }

    /// The port pairing: where slot `port` at `vertex` is wired to.
    pub fn port(&self, vertex: usize, port: usize) -> Option<Port> {
        match self.slots[vertex * self.max_degree + port] {
            EMPTY => None,
            s => Some(Port {
                vertex: s / self.max_degree,
                port: s % self.max_degree,
            }),
        }
    }

    /// Slot table in basis-index form; `None` marks an empty slot.
    pub fn paired_index(&self, index: usize) -> Option<usize> {
        match self.slots[index] {
            EMPTY => None,
            s => Some(s),
        }
    }

    pub fn neighbours(&self, x: usize) -> &[usize] {
        &self.neighbours[x]
    }

    pub fn is_adjacent(&self, x: usize, y: usize) -> bool {
        self.neighbours[x].binary_search(&y).is_ok()
    }

    pub fn label(&self, x: usize) -> VertexLabel {
        self.labels[x]
    }

    pub fn labels(&self) -> &[VertexLabel] {
        &self.labels
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let n = self.vertex_count();
        DMatrix::from_fn(n, n, |i, j| if self.is_adjacent(i, j) { 1.0 } else { 0.0 })
    }

    pub fn edge_count(&self) -> usize {
        self.neighbours.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Signed coordinate used for moments on the line and the cycle.
    pub fn coordinate(&self, x: usize) -> Option<i64> {
        match self.kind {
            GraphKind::Line { halfwidth } => Some(x as i64 - halfwidth as i64),
            GraphKind::Cycle { .. } => Some(x as i64),
            _ => None,
        }
    }

    /// Vertex index of a signed line coordinate.
    pub fn line_index(&self, coordinate: i64) -> Option<usize> {
        match self.kind {
            GraphKind::Line { halfwidth } => {
                let i = coordinate + halfwidth as i64;
                (0..self.vertex_count() as i64).contains(&i).then_some(i as usize)
            }
            GraphKind::Cycle { size } => Some(coordinate.rem_euclid(size as i64) as usize),
            _ => None,
        }
    }

    /// Checks every structural invariant, returning the first violation.
    pub fn validate(&self) -> Result<()> {
        let d = self.max_degree;
        let two_cycle = matches!(self.kind, GraphKind::Cycle { size: 2 });
        for (i, &s) in self.slots.iter().enumerate() {
            if s == EMPTY {
                continue;
            }
            if self.slots[s] != i {
                return Err(Error::Contract(format!(
                    "port pairing is not an involution at slot {i}"
                )));
            }
            let (x, y) = (i / d, s / d);
            if x == y {
                return Err(Error::Contract(format!("self-loop at vertex {x}")));
            }
            if !self.is_adjacent(x, y) {
                return Err(Error::Contract(format!("port at {x} leads to non-neighbour {y}")));
            }
        }
        for x in 0..self.vertex_count() {
            // Each adjacency entry is covered by exactly one wired slot, except the
            // two-vertex cycle whose single edge carries both directions.
            if !two_cycle && self.degree[x] != self.neighbours[x].len() {
                return Err(Error::Contract(format!(
                    "vertex {x}: {} wired ports for {} neighbours",
                    self.degree[x],
                    self.neighbours[x].len()
                )));
            }
            for &y in &self.neighbours[x] {
                if !self.is_adjacent(y, x) {
                    return Err(Error::Contract(format!("adjacency not symmetric at ({x},{y})")));
                }
            }
        }
        if self.degree.iter().copied().max().unwrap_or(0) != d {
            return Err(Error::Contract("max degree does not match port slots".into()));
        }
        Ok(())
    }
}

/// Path on `2 * halfwidth + 1` vertices, indexed so that vertex `i` sits at
/// coordinate `i - halfwidth`. Port 0 steps toward `-1`, port 1 toward `+1`.
pub fn build_line(halfwidth: usize) -> Result<GraphSpec> {
    if halfwidth == 0 {
        return Err(param("halfwidth", "must be at least 1"));
    }
    let n = 2 * halfwidth + 1;
    let mut slots = vec![EMPTY; 2 * n];
    for i in 0..n {
        if i > 0 {
            slots[2 * i] = 2 * (i - 1) + 1;
        }
        if i + 1 < n {
            slots[2 * i + 1] = 2 * (i + 1);
        }
    }
    let labels = (0..n)
        .map(|i| VertexLabel::Coordinate(i as i64 - halfwidth as i64))
        .collect();
    Ok(GraphSpec::from_slots(GraphKind::Line { halfwidth }, 2, slots, labels))
}

/// Cycle on `size` vertices. Port 1 always means `+1 mod size`.
pub fn build_cycle(size: usize) -> Result<GraphSpec> {
    if size < 2 {
        return Err(param("size", "a cycle needs at least 2 vertices"));
    }
    let mut slots = vec![EMPTY; 2 * size];
    for i in 0..size {
        slots[2 * i] = 2 * ((i + size - 1) % size) + 1;
        slots[2 * i + 1] = 2 * ((i + 1) % size);
    }
    let labels = (0..size).map(|i| VertexLabel::Coordinate(i as i64)).collect();
    Ok(GraphSpec::from_slots(GraphKind::Cycle { size }, 2, slots, labels))
}

/// The `dim`-dimensional hypercube. Port `j` flips bit `j` (bit `j` has value `2^j`).
pub fn build_hypercube(dim: usize) -> Result<GraphSpec> {
    if dim == 0 || dim > MAX_HYPERCUBE_DIM {
        return Err(Error::Size(format!(
            "hypercube dimension {dim} outside 1..={MAX_HYPERCUBE_DIM}"
        )));
    }
    let n = 1usize << dim;
    let mut slots = vec![EMPTY; n * dim];
    for x in 0..n {
        for j in 0..dim {
            slots[x * dim + j] = (x ^ (1 << j)) * dim + j;
        }
    }
    let labels = (0..n).map(|x| VertexLabel::Bits(x as u64)).collect();
    Ok(GraphSpec::from_slots(GraphKind::Hypercube { dim }, dim, slots, labels))
}

/// Vertex layout of a glued-trees graph of a given depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GluedTreesLayout {
    pub depth: usize,
}

impl GluedTreesLayout {
    /// Vertices in one binary tree.
    pub fn tree_size(&self) -> usize {
        (1 << (self.depth + 1)) - 1
    }

    pub fn vertex_count(&self) -> usize {
        2 * self.tree_size()
    }

    pub fn entrance(&self) -> usize {
        0
    }

    pub fn exit(&self) -> usize {
        self.vertex_count() - 1
    }

    pub fn column_count(&self) -> usize {
        2 * self.depth + 2
    }

    /// Leaves of the left tree, in index order.
    pub fn left_leaves(&self) -> std::ops::Range<usize> {
        (1 << self.depth) - 1..self.tree_size()
    }

    /// Leaves of the right tree, in index order.
    pub fn right_leaves(&self) -> std::ops::Range<usize> {
        let t = self.tree_size();
        t..t + (1 << self.depth)
    }
}

/// Two binary trees of the given depth whose leaves are joined by a random
/// bipartite 2-regular wiring determined by `seed`.
///
/// The left tree is stored in heap order at indices `0..T`; the right tree is
/// the mirror image at `T..2T`, so the exit vertex is `2T - 1`.
pub fn build_glued_trees(depth: usize, seed: u64) -> Result<GraphSpec> {
    if depth == 0 {
        return Err(param("depth", "must be at least 1"));
    }
    let layout = GluedTreesLayout { depth };
    let t = layout.tree_size();
    let n = layout.vertex_count();
    let mirror = |i: usize| n - 1 - i;
    let mut edges = Vec::with_capacity(n + 2 * (1 << depth));
    for child in 1..t {
        let parent = (child - 1) / 2;
        edges.push((parent, child));
        edges.push((mirror(child), mirror(parent)));
    }
    let leaves = 1usize << depth;
    let left: Vec<usize> = layout.left_leaves().collect();
    let right: Vec<usize> = layout.right_leaves().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first: Vec<usize> = (0..leaves).collect();
    first.shuffle(&mut rng);
    let mut second: Vec<usize> = (0..leaves).collect();
    // With a single leaf pair the two matchings necessarily coincide.
    if leaves > 1 {
        loop {
            second.shuffle(&mut rng);
            if first.iter().zip(&second).all(|(a, b)| a != b) {
                break;
            }
        }
    }
    for i in 0..leaves {
        edges.push((left[i], right[first[i]]));
        if leaves > 1 {
            edges.push((left[i], right[second[i]]));
        }
    }
    let labels = (0..n)
        .map(|i| {
            let (tree_index, right_tree) = if i < t { (i, false) } else { (mirror(i), true) };
            let level = usize::BITS as usize - 1 - (tree_index + 1).leading_zeros() as usize;
            let column = if right_tree { 2 * depth + 2 - level } else { level + 1 };
            VertexLabel::Column(column)
        })
        .collect();
    Ok(GraphSpec::from_edges(
        GraphKind::GluedTrees { depth, seed },
        n,
        &edges,
        labels,
    ))
}

/// Parses an undirected edge list.
///
/// Format: an optional header `N <count>`, then one `u v` pair per line.
/// Blank lines and `#` comments are ignored. Without a header the vertex count
/// is one more than the largest index seen.
pub fn load_graph(text: &str) -> Result<GraphSpec> {
    let mut declared: Option<usize> = None;
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut fields = content.split_whitespace();
        let a = fields.next().unwrap_or("");
        let b = fields.next();
        if fields.next().is_some() {
            return Err(Error::Parse {
                line,
                message: format!("expected two fields, found `{content}`"),
            });
        }
        if a == "N" {
            if declared.is_some() || !edges.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "header `N <count>` must come first and only once".into(),
                });
            }
            let count = b.and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| Error::Parse {
                line,
                message: "header needs a vertex count".into(),
            })?;
            declared = Some(count);
            continue;
        }
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line,
                message: format!("`{s}` is not a vertex index"),
            })
        };
        let u = parse(a)?;
        let v = parse(b.ok_or_else(|| Error::Parse {
            line,
            message: "edge needs two endpoints".into(),
        })?)?;
        if u == v {
            return Err(Error::Parse {
                line,
                message: format!("self-loop at vertex {u}"),
            });
        }
        if let Some(n) = declared {
            if u >= n || v >= n {
                return Err(Error::Parse {
                    line,
                    message: format!("edge ({u}, {v}) references a vertex outside 0..{n}"),
                });
            }
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate edge ({u}, {v})"),
            });
        }
        edges.push((u, v, line));
    }
    if edges.is_empty() {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            message: "no edges".into(),
        });
    }
    let n = declared.unwrap_or_else(|| edges.iter().map(|&(u, v, _)| u.max(v)).max().unwrap() + 1);
    let pairs: Vec<(usize, usize)> = edges.iter().map(|&(u, v, _)| (u, v)).collect();
    Ok(GraphSpec::from_edges(
        GraphKind::General,
        n,
        &pairs,
        vec![VertexLabel::None; n],
    ))
}
