//! Hierarchical conforming tetrahedral meshes of the unit cube.
//!
//! Meshes are immutable: [`SimplicialMesh::refine_with`] and
//! [`SimplicialMesh::coarsen_with`] return new meshes. Every tetrahedron
//! is a leaf of a refinement forest whose roots are the cells of a
//! structured Kuhn mesh. Vertices of a tetrahedron are stored in bisection
//! order together with a tag `k` in `1..=3`; the refinement edge joins
//! `vertices[0]` and `vertices[k]` (Maubach's tagged bisection). On Kuhn
//! meshes this keeps the hierarchy nested, conforming after closure, and
//! shape regular (a finite number of similarity classes).

mod geometry;
mod transfer;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

pub use geometry::{geometry_tables, CellGeometry, FaceGeometry, GeometryTables};
pub use transfer::{build_transfer, check_nested, PointLocator, Stencil, TransferMap};

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

pub type Point = Vec3;

/// Floor on element diameters produced by adaptive refinement.
pub const DEFAULT_H_MIN: f64 = 0.0108253;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Structured roots of equal `n` are identical, so they share one lineage and
/// every uniform or adaptive refinement of them is nested with the others.
fn structured_root_id(n: usize) -> u64 {
    (1 << 63) | n as u64
}

/// Identity of one immutable mesh instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MeshId(pub u64);

/// The structured mesh a hierarchy grew from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lineage {
    pub root: u64,
    pub root_n: usize,
}

/// One tetrahedron of the refinement forest.
#[derive(Clone, Debug, PartialEq)]
pub struct TetNode {
    /// Vertices in bisection order.
    pub vertices: [usize; 4],
    /// Refinement edge is `vertices[0]`–`vertices[tag]`.
    pub tag: u8,
    pub level: u32,
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
    /// Vertex created when this node was bisected.
    pub midpoint: Option<usize>,
}

impl TetNode {
    pub fn refinement_edge(&self) -> (usize, usize) {
        (self.vertices[0], self.vertices[self.tag as usize])
    }
}

/// A triangular face with its adjacent cells. `left < right` when both exist;
/// boundary faces have no right cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub vertices: [usize; 3],
    pub left: usize,
    pub right: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineOptions {
    /// Marked cells whose children would have a diameter below this floor are
    /// left alone. Closure bisections ignore the floor.
    pub h_min: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions { h_min: DEFAULT_H_MIN }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RefineStats {
    pub marked: usize,
    pub skipped_by_floor: usize,
    pub bisections: usize,
    pub closure_bisections: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoarsenOptions {
    /// Parents below this level are never restored.
    pub min_level: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoarsenStats {
    pub merged_pairs: usize,
    /// Marked cells that were not merged.
    pub skipped: usize,
}

/// Result of the exhaustive legality check.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub nonmanifold_faces: usize,
    pub unmatched_interior_faces: usize,
    pub min_volume: f64,
    pub total_volume: f64,
    pub boundary_area: f64,
}

impl AuditReport {
    pub fn is_conforming(&self) -> bool {
        self.nonmanifold_faces == 0 && self.unmatched_interior_faces == 0
    }

    pub fn is_valid(&self) -> bool {
        self.is_conforming()
            && self.min_volume > 0.0
            && (self.total_volume - 1.0).abs() <= 1e-12
            && (self.boundary_area - 6.0).abs() <= 1e-11
    }
}

#[derive(Clone, Debug)]
pub struct SimplicialMesh {
    id: MeshId,
    lineage: Lineage,
    vertices: Vec<Point>,
    forest: Vec<TetNode>,
    cells: Vec<usize>,
    faces: Vec<Face>,
    cell_faces: Vec<[usize; 4]>,
}

/// Kuhn mesh of the unit cube: `n` subdivisions per axis, six tetrahedra per
/// sub-cube, all sharing the sub-cube's main diagonal.
pub fn build_structured_cube(n: usize) -> Result<SimplicialMesh> {
    if n == 0 {
        return Err(Error::DegenerateInput(
            "structured cube needs at least one subdivision per axis".into(),
        ));
    }
    let np = n + 1;
    let idx = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let h = n as f64;
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 / h, j as f64 / h, k as f64 / h]);
            }
        }
    }
    const PATHS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut forest = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for path in PATHS {
                    let mut c = [i, j, k];
                    let mut verts = [idx(i, j, k), 0, 0, 0];
                    for (step, &axis) in path.iter().enumerate() {
                        c[axis] += 1;
                        verts[step + 1] = idx(c[0], c[1], c[2]);
                    }
                    forest.push(TetNode {
                        vertices: verts,
                        tag: 3,
                        level: 0,
                        parent: None,
                        children: None,
                        midpoint: None,
                    });
                }
            }
        }
    }
    let cells = (0..forest.len()).collect();
    Ok(SimplicialMesh::assemble(
        Lineage {
            root: structured_root_id(n),
            root_n: n,
        },
        vertices,
        forest,
        cells,
    ))
}

impl SimplicialMesh {
    fn assemble(
        lineage: Lineage,
        vertices: Vec<Point>,
        forest: Vec<TetNode>,
        cells: Vec<usize>,
    ) -> Self {
        let (faces, cell_faces) = build_faces(&forest, &cells);
        SimplicialMesh {
            id: MeshId(fresh_id()),
            lineage,
            vertices,
            forest,
            cells,
            faces,
            cell_faces,
        }
    }

    /// Rebuild a mesh from flat data, e.g. a checkpoint. Every cell becomes a
    /// root of a new forest at its recorded level.
    pub fn from_cells(
        vertices: Vec<Point>,
        cells: Vec<([usize; 4], u8, u32)>,
        root_n: usize,
    ) -> Result<Self> {
        let mut forest = Vec::with_capacity(cells.len());
        for (c, &(verts, tag, level)) in cells.iter().enumerate() {
            if verts.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Parse(format!("cell {c} references a missing vertex")));
            }
            if !(1..=3).contains(&tag) {
                return Err(Error::Parse(format!("cell {c} has refinement tag {tag}")));
            }
            forest.push(TetNode {
                vertices: verts,
                tag,
                level,
                parent: None,
                children: None,
                midpoint: None,
            });
        }
        let ids = (0..forest.len()).collect();
        Ok(SimplicialMesh::assemble(
            Lineage {
                root: fresh_id(),
                root_n,
            },
            vertices,
            forest,
            ids,
        ))
    }

    pub fn id(&self) -> MeshId {
        self.id
    }

    pub fn lineage(&self) -> Lineage {
        self.lineage
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Face indices of a cell; entry `i` is the face opposite local vertex `i`.
    pub fn cell_faces(&self, cell: usize) -> [usize; 4] {
        self.cell_faces[cell]
    }

    pub fn forest(&self) -> &[TetNode] {
        &self.forest
    }

    pub fn cell(&self, cell: usize) -> &TetNode {
        &self.forest[self.cells[cell]]
    }

    /// Forest index of an active cell.
    pub fn cell_node(&self, cell: usize) -> usize {
        self.cells[cell]
    }

    pub fn cell_vertices(&self, cell: usize) -> [usize; 4] {
        self.forest[self.cells[cell]].vertices
    }

    pub fn cell_points(&self, cell: usize) -> [Point; 4] {
        let v = self.cell_vertices(cell);
        [
            self.vertices[v[0]],
            self.vertices[v[1]],
            self.vertices[v[2]],
            self.vertices[v[3]],
        ]
    }

    pub fn parent(&self, cell: usize) -> Option<&TetNode> {
        self.cell(cell).parent.map(|p| &self.forest[p])
    }

    pub fn level(&self, cell: usize) -> u32 {
        self.cell(cell).level
    }

    pub fn diameter(&self, cell: usize) -> f64 {
        vec3::diameter(&self.cell_points(cell))
    }

    pub fn min_diameter(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.diameter(c))
            .fold(f64::INFINITY, f64::min)
    }

    /// True for an unrefined structured mesh.
    pub fn is_structured_root(&self) -> bool {
        self.forest.len() == self.cells.len()
            && self.forest.iter().all(|n| n.parent.is_none() && n.level == 0)
            && self.num_cells() == 6 * self.lineage.root_n.pow(3)
    }

    /// Ratio of diameter to inscribed-sphere diameter.
    pub fn shape_ratio(&self, cell: usize) -> f64 {
        let p = self.cell_points(cell);
        let e1 = vec3::sub(&p[1], &p[0]);
        let e2 = vec3::sub(&p[2], &p[0]);
        let e3 = vec3::sub(&p[3], &p[0]);
        let volume = vec3::dot(&e1, &vec3::cross(&e2, &e3)).abs() / 6.0;
        let area = |a: &Point, b: &Point, c: &Point| {
            0.5 * vec3::norm(&vec3::cross(&vec3::sub(b, a), &vec3::sub(c, a)))
        };
        let surface = area(&p[1], &p[2], &p[3])
            + area(&p[0], &p[2], &p[3])
            + area(&p[0], &p[1], &p[3])
            + area(&p[0], &p[1], &p[2]);
        let inradius = 3.0 * volume / surface;
        vec3::diameter(&p) / (2.0 * inradius)
    }

    pub fn max_shape_ratio(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.shape_ratio(c))
            .fold(0.0, f64::max)
    }

    /// Bisect the marked cells and close the result. Uses the default
    /// diameter floor.
    pub fn refine(&self, marked: &[usize]) -> SimplicialMesh {
        self.refine_with(marked, &RefineOptions::default()).0
    }

    /// Bisect every cell `times` times, ignoring the diameter floor.
    pub fn refine_uniform(&self, times: usize) -> SimplicialMesh {
        let opts = RefineOptions { h_min: 0.0 };
        let mut mesh = self.clone();
        for _ in 0..times {
            let all: Vec<usize> = (0..mesh.num_cells()).collect();
            mesh = mesh.refine_with(&all, &opts).0;
        }
        mesh
    }

    /// Whether bisecting `cell` keeps both children at or above the diameter
    /// floor `h_min`.
    pub fn refinable(&self, cell: usize, h_min: f64) -> bool {
        if h_min <= 0.0 {
            return true;
        }
        let node = self.cell(cell);
        let pts = self.cell_points(cell);
        let k = node.tag as usize;
        let z = vec3::midpoint(&pts[0], &pts[k]);
        let (c1, c2) = child_points(&pts, k, z);
        vec3::diameter(&c1).min(vec3::diameter(&c2)) >= h_min * (1.0 - 1e-12)
    }

    pub fn refine_with(&self, marked: &[usize], opts: &RefineOptions) -> (SimplicialMesh, RefineStats) {
        let mut stats = RefineStats::default();
        let mut marked: Vec<usize> = marked.to_vec();
        marked.sort_unstable();
        marked.dedup();
        assert!(
            marked.last().is_none_or(|&c| c < self.num_cells()),
            "marked cell index out of range"
        );
        stats.marked = marked.len();
        if marked.is_empty() {
            return (self.clone(), stats);
        }

        let mut vertices = self.vertices.clone();
        let mut forest = self.forest.clone();
        let mut active = self.cells.clone();
        let mut splits: HashMap<(usize, usize), usize> = HashMap::new();

        let mut queue: Vec<usize> = Vec::with_capacity(marked.len());
        for &c in &marked {
            if !self.refinable(c, opts.h_min) {
                stats.skipped_by_floor += 1;
                continue;
            }
            queue.push(c);
        }

        let mut first_pass = true;
        let mut passes = 0usize;
        while !queue.is_empty() {
            passes += 1;
            assert!(passes < 10_000, "bisection closure did not terminate");
            for &pos in &queue {
                let [c1, c2] = bisect(&mut vertices, &mut forest, &mut splits, active[pos]);
                active[pos] = c1;
                active.push(c2);
                if first_pass {
                    stats.bisections += 1;
                } else {
                    stats.closure_bisections += 1;
                }
            }
            first_pass = false;
            queue = active
                .iter()
                .enumerate()
                .filter(|(_, &node)| {
                    let v = forest[node].vertices;
                    EDGES.iter().any(|&(a, b)| splits.contains_key(&edge_key(v[a], v[b])))
                })
                .map(|(pos, _)| pos)
                .collect();
        }
        stats.bisections += stats.closure_bisections;
        (
            SimplicialMesh::assemble(self.lineage, vertices, forest, active),
            stats,
        )
    }

    pub fn coarsen(&self, marked: &[usize]) -> (SimplicialMesh, CoarsenStats) {
        self.coarsen_with(marked, &CoarsenOptions::default())
    }

    /// Undo bisections whose whole edge patch is marked. A patch is the set of
    /// cells sharing the midpoint vertex created by one edge bisection; it is
    /// merged only when every cell in it is marked and is one of a complete
    /// sibling pair, which restores the conforming pre-bisection state.
    pub fn coarsen_with(&self, marked: &[usize], opts: &CoarsenOptions) -> (SimplicialMesh, CoarsenStats) {
        let mut is_marked = vec![false; self.num_cells()];
        for &c in marked {
            assert!(c < self.num_cells(), "marked cell index out of range");
            is_marked[c] = true;
        }
        let n_marked = is_marked.iter().filter(|&&m| m).count();
        let mut stats = CoarsenStats::default();
        if n_marked == 0 {
            return (self.clone(), stats);
        }

        let mut node_cell: Vec<Option<usize>> = vec![None; self.forest.len()];
        for (c, &node) in self.cells.iter().enumerate() {
            node_cell[node] = Some(c);
        }
        let incidence = self.vertex_cells();

        let mut seen = vec![false; self.vertices.len()];
        let mut removed = vec![false; self.num_cells()];
        let mut restored: Vec<usize> = Vec::new();
        for c in 0..self.num_cells() {
            if !is_marked[c] {
                continue;
            }
            let Some(p) = self.cell(c).parent else { continue };
            let parent = &self.forest[p];
            let z = parent.midpoint.expect("parent node without midpoint");
            if seen[z] {
                continue;
            }
            seen[z] = true;
            let patch = &incidence[z];
            let mut parents = Vec::new();
            let eligible = patch.iter().all(|&t| {
                if !is_marked[t] {
                    return false;
                }
                let Some(tp) = self.cell(t).parent else { return false };
                let pnode = &self.forest[tp];
                if pnode.midpoint != Some(z) || pnode.level < opts.min_level {
                    return false;
                }
                let [a, b] = pnode.children.expect("parent without children");
                if node_cell[a].is_none() || node_cell[b].is_none() {
                    return false;
                }
                parents.push(tp);
                true
            });
            if !eligible {
                continue;
            }
            for &t in patch {
                removed[t] = true;
            }
            parents.sort_unstable();
            parents.dedup();
            restored.extend(parents);
        }
        stats.merged_pairs = restored.len();
        stats.skipped = n_marked - 2 * restored.len();
        if restored.is_empty() {
            return (self.clone(), stats);
        }

        let mut forest = self.forest.clone();
        let mut active = Vec::with_capacity(self.num_cells());
        for (c, &node) in self.cells.iter().enumerate() {
            if !removed[c] {
                active.push(node);
                continue;
            }
            let p = forest[node].parent.unwrap();
            if forest[p].children.unwrap()[0] == node {
                active.push(p);
            }
        }
        for &p in &restored {
            forest[p].children = None;
            forest[p].midpoint = None;
        }

        // Keep only active nodes and their ancestors.
        let mut keep = vec![false; forest.len()];
        for &node in &active {
            let mut cur = Some(node);
            while let Some(n) = cur {
                if keep[n] {
                    break;
                }
                keep[n] = true;
                cur = forest[n].parent;
            }
        }
        let mut node_map = vec![usize::MAX; forest.len()];
        let mut next = 0;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                node_map[i] = next;
                next += 1;
            }
        }

        let mut used = vec![false; self.vertices.len()];
        for &node in &active {
            for v in forest[node].vertices {
                used[v] = true;
            }
        }
        let mut vertex_map = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (i, p) in self.vertices.iter().enumerate() {
            if used[i] {
                vertex_map[i] = vertices.len();
                vertices.push(*p);
            }
        }

        let new_forest: Vec<TetNode> = forest
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep[*i])
            .map(|(_, mut n)| {
                n.vertices = n.vertices.map(|v| {
                    let m = vertex_map[v];
                    debug_assert!(m != usize::MAX, "kept node references a removed vertex");
                    m
                });
                n.parent = n.parent.map(|p| node_map[p]);
                n.children = n.children.map(|ch| ch.map(|c| node_map[c]));
                n.midpoint = n.midpoint.map(|z| vertex_map[z]);
                n
            })
            .collect();
        let active = active.into_iter().map(|n| node_map[n]).collect();
        (
            SimplicialMesh::assemble(self.lineage, vertices, new_forest, active),
            stats,
        )
    }

    /// Cells incident to each vertex, ascending.
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.vertices.len()];
        for c in 0..self.num_cells() {
            for v in self.cell_vertices(c) {
                inc[v].push(c);
            }
        }
        inc
    }

    /// Exhaustive face-pair audit, independent of the stored face table.
    pub fn audit(&self) -> AuditReport {
        let mut counts: HashMap<[usize; 3], usize> = HashMap::with_capacity(2 * self.num_cells());
        let mut min_volume = f64::INFINITY;
        let mut total_volume = 0.0;
        for c in 0..self.num_cells() {
            let v = self.cell_vertices(c);
            for f in 0..4 {
                let mut key = [0usize; 3];
                let mut k = 0;
                for (i, &vi) in v.iter().enumerate() {
                    if i != f {
                        key[k] = vi;
                        k += 1;
                    }
                }
                key.sort_unstable();
                *counts.entry(key).or_insert(0) += 1;
            }
            let p = self.cell_points(c);
            let e1 = vec3::sub(&p[1], &p[0]);
            let e2 = vec3::sub(&p[2], &p[0]);
            let e3 = vec3::sub(&p[3], &p[0]);
            let vol = vec3::dot(&e1, &vec3::cross(&e2, &e3)).abs() / 6.0;
            min_volume = min_volume.min(vol);
            total_volume += vol;
        }
        let mut nonmanifold = 0;
        let mut unmatched = 0;
        let mut boundary_area = 0.0;
        for (key, &count) in &counts {
            match count {
                1 => {
                    let p = key.map(|v| self.vertices[v]);
                    if on_same_cube_face(&p) {
                        boundary_area += 0.5
                            * vec3::norm(&vec3::cross(
                                &vec3::sub(&p[1], &p[0]),
                                &vec3::sub(&p[2], &p[0]),
                            ));
                    } else {
                        unmatched += 1;
                    }
                }
                2 => {}
                _ => nonmanifold += 1,
            }
        }
        AuditReport {
            nonmanifold_faces: nonmanifold,
            unmatched_interior_faces: unmatched,
            min_volume,
            total_volume,
            boundary_area,
        }
    }

    /// Canonical geometric description (sorted coordinate tuples per cell),
    /// used to compare meshes independently of index order.
    pub fn canonical_cells(&self) -> Vec<[[u64; 3]; 4]> {
        let mut out: Vec<[[u64; 3]; 4]> = (0..self.num_cells())
            .map(|c| {
                let mut pts = self.cell_points(c).map(|p| p.map(f64::to_bits));
                pts.sort_unstable();
                pts
            })
            .collect();
        out.sort_unstable();
        out
    }
}

const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

#[inline]
fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn child_vertices(v: [usize; 4], k: usize, z: usize) -> ([usize; 4], [usize; 4]) {
    let mut first = v;
    first[k] = z;
    let mut second = [0; 4];
    let mut m = 0;
    for &x in &v[1..=k] {
        second[m] = x;
        m += 1;
    }
    second[m] = z;
    m += 1;
    for &x in &v[k + 1..] {
        second[m] = x;
        m += 1;
    }
    (first, second)
}

fn child_points(p: &[Point; 4], k: usize, z: Point) -> ([Point; 4], [Point; 4]) {
    let mut first = *p;
    first[k] = z;
    let mut second = [[0.0; 3]; 4];
    let mut m = 0;
    for x in &p[1..=k] {
        second[m] = *x;
        m += 1;
    }
    second[m] = z;
    m += 1;
    for x in &p[k + 1..] {
        second[m] = *x;
        m += 1;
    }
    (first, second)
}

fn bisect(
    vertices: &mut Vec<Point>,
    forest: &mut Vec<TetNode>,
    splits: &mut HashMap<(usize, usize), usize>,
    node: usize,
) -> [usize; 2] {
    let parent = forest[node].clone();
    debug_assert!(parent.children.is_none());
    let k = parent.tag as usize;
    let (a, b) = parent.refinement_edge();
    let z = *splits.entry(edge_key(a, b)).or_insert_with(|| {
        vertices.push(vec3::midpoint(&vertices[a], &vertices[b]));
        vertices.len() - 1
    });
    let next_tag = if k > 1 { k as u8 - 1 } else { 3 };
    let (first, second) = child_vertices(parent.vertices, k, z);
    let ids = [forest.len(), forest.len() + 1];
    for verts in [first, second] {
        forest.push(TetNode {
            vertices: verts,
            tag: next_tag,
            level: parent.level + 1,
            parent: Some(node),
            children: None,
            midpoint: None,
        });
    }
    forest[node].children = Some(ids);
    forest[node].midpoint = Some(z);
    ids
}

fn on_same_cube_face(p: &[Point; 3]) -> bool {
    (0..3).any(|axis| {
        [0.0, 1.0]
            .iter()
            .any(|&side| p.iter().all(|q| (q[axis] - side).abs() <= 1e-13))
    })
}

fn build_faces(forest: &[TetNode], cells: &[usize]) -> (Vec<Face>, Vec<[usize; 4]>) {
    let mut entries: Vec<([usize; 3], u32, u8)> = Vec::with_capacity(4 * cells.len());
    for (c, &node) in cells.iter().enumerate() {
        let v = forest[node].vertices;
        for f in 0..4u8 {
            let mut key = [0usize; 3];
            let mut k = 0;
            for (i, &vi) in v.iter().enumerate() {
                if i != f as usize {
                    key[k] = vi;
                    k += 1;
                }
            }
            key.sort_unstable();
            entries.push((key, c as u32, f));
        }
    }
    entries.sort_unstable();
    let mut faces = Vec::with_capacity(entries.len() / 2 + 1);
    let mut cell_faces = vec![[usize::MAX; 4]; cells.len()];
    let mut i = 0;
    while i < entries.len() {
        let (key, left, lf) = entries[i];
        let fidx = faces.len();
        cell_faces[left as usize][lf as usize] = fidx;
        let mut right = None;
        if i + 1 < entries.len() && entries[i + 1].0 == key {
            let (_, r, rf) = entries[i + 1];
            cell_faces[r as usize][rf as usize] = fidx;
            right = Some(r as usize);
            i += 1;
            // A third cell on the same face would be a defect; the audit reports it.
            while i + 1 < entries.len() && entries[i + 1].0 == key {
                i += 1;
            }
        }
        faces.push(Face {
            vertices: key,
            left: left as usize,
            right,
        });
        i += 1;
    }
    (faces, cell_faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structured_counts() {
        for (n, nv, nc) in [(1, 8, 6), (2, 27, 48), (3, 64, 162)] {
            let m = build_structured_cube(n).unwrap();
            assert_eq!(m.num_vertices(), nv);
            assert_eq!(m.num_cells(), nc);
            assert!(m.audit().is_valid());
        }
        assert!(matches!(build_structured_cube(0), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn face_count_matches_euler_relation() {
        // Each cell has four faces; interior faces are shared.
        let m = build_structured_cube(2).unwrap();
        let boundary = m.faces().iter().filter(|f| f.is_boundary()).count();
        let interior = m.faces().len() - boundary;
        assert_eq!(4 * m.num_cells(), boundary + 2 * interior);
        assert_eq!(boundary, 6 * 2 * 2 * 2);
        for f in m.faces() {
            if let Some(r) = f.right {
                assert!(f.left < r);
            }
        }
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = build_structured_cube(2).unwrap();
        let r = m.refine(&[]);
        assert_eq!(r.canonical_cells(), m.canonical_cells());
        assert_eq!(r.num_vertices(), m.num_vertices());
    }

    #[test]
    fn full_refinement_of_unit_cube_needs_no_closure() {
        let m = build_structured_cube(1).unwrap();
        let opts = RefineOptions { h_min: 0.0 };
        let all: Vec<usize> = (0..6).collect();
        let (r, stats) = m.refine_with(&all, &opts);
        assert_eq!(stats.closure_bisections, 0);
        assert_eq!(r.num_cells(), 12);
        // every original tet has exactly two children
        for node in &r.forest()[..6] {
            assert!(node.children.is_some());
        }
        assert!(r.audit().is_valid());
        let r3 = m.refine_uniform(3);
        assert_eq!(r3.num_cells(), 48);
        assert!(r3.audit().is_valid());
    }

    #[test]
    fn single_mark_triggers_closure() {
        let m = build_structured_cube(2).unwrap();
        let (r, stats) = m.refine_with(&[0], &RefineOptions { h_min: 0.0 });
        assert!(r.audit().is_valid());
        assert_eq!(stats.bisections, stats.closure_bisections + 1);
        // a second round on one child requires conformity closure across sub-cubes
        let (r2, stats2) = r.refine_with(&[0], &RefineOptions { h_min: 0.0 });
        assert!(r2.audit().is_valid());
        assert!(stats2.closure_bisections > 0);
    }

    #[test]
    fn diameter_floor_skips_marked_cells() {
        let m = build_structured_cube(1).unwrap();
        let (r, stats) = m.refine_with(&[0, 1], &RefineOptions { h_min: 10.0 });
        assert_eq!(stats.skipped_by_floor, 2);
        assert_eq!(r.num_cells(), 6);
    }

    #[test]
    fn refine_then_coarsen_restores_mesh() {
        let m = build_structured_cube(2).unwrap();
        let r = m.refine_uniform(1).refine(&[3]);
        let base = m.refine_uniform(1);
        let fine = base.refine(&[3]);
        let new_cells: Vec<usize> = (0..fine.num_cells())
            .filter(|&c| fine.level(c) == 2)
            .collect();
        let (back, stats) = fine.coarsen(&new_cells);
        assert_eq!(stats.skipped, 0);
        assert_eq!(back.canonical_cells(), base.canonical_cells());
        assert_eq!(back.num_vertices(), base.num_vertices());
        assert_eq!(back.vertices(), base.vertices());
        assert!(r.audit().is_valid());
    }

    #[test]
    fn incomplete_sibling_pair_is_skipped() {
        let m = build_structured_cube(1).unwrap().refine_uniform(1);
        let (c, stats) = m.coarsen(&[0]);
        assert_eq!(stats.skipped, 1);
        assert_eq!(stats.merged_pairs, 0);
        assert_eq!(c.canonical_cells(), m.canonical_cells());
        let (c, stats) = m.coarsen(&[]);
        assert_eq!(stats.skipped, 0);
        assert_eq!(c.num_cells(), m.num_cells());
    }

    #[test]
    fn coarsening_never_removes_roots() {
        let m = build_structured_cube(1).unwrap();
        let all: Vec<usize> = (0..6).collect();
        let (c, stats) = m.coarsen(&all);
        assert_eq!(stats.skipped, 6);
        assert_eq!(c.num_cells(), 6);
    }

    #[test]
    fn min_level_blocks_coarsening() {
        let m = build_structured_cube(1).unwrap().refine_uniform(2);
        let all: Vec<usize> = (0..m.num_cells()).collect();
        let (c, _) = m.coarsen_with(&all, &CoarsenOptions { min_level: 1 });
        assert!(c.forest().iter().all(|n| n.level >= 1 || n.children.is_some()));
        assert_eq!(c.num_cells(), 12);
    }

    #[test]
    fn shape_ratio_is_periodic_under_bisection() {
        let mut m = build_structured_cube(1).unwrap();
        let mut worst_first_cycle: f64 = 0.0;
        for level in 0..9 {
            let ratio = m.max_shape_ratio();
            if level < 3 {
                worst_first_cycle = worst_first_cycle.max(ratio);
            } else {
                assert!(ratio <= worst_first_cycle * (1.0 + 1e-12), "level {level}: {ratio}");
            }
            m = m.refine_uniform(1);
        }
    }
}
