//! Conforming triangulations refined by newest vertex bisection.
//!
//! A [`Mesh`] keeps every cell ever created in an arena indexed by [`CellId`]
//! together with the list of active (leaf) cells. Local edge `i` of a cell is
//! the edge opposite its vertex `i`; the refinement edge is one of those three
//! local edges and the vertex opposite to it is the newest vertex.
//! Bisection always produces two children whose refinement edges are opposite
//! the new midpoint, which is what keeps the family of shapes finite.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::forcing::Curve;
use crate::geometry::{self, Point};

pub type CellId = usize;
pub type VertexId = usize;

type EdgeKey = (u32, u32);

#[inline]
fn edge_key(a: u32, b: u32) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub vertices: [u32; 3],
    /// Local index of the edge that is split on bisection.
    pub refinement_edge: u8,
    pub generation: u32,
    pub parent: Option<u32>,
    pub children: Option<[u32; 2]>,
}

impl Cell {
    /// Endpoints of local edge `i` (the edge opposite vertex `i`).
    #[inline]
    pub fn edge(&self, i: usize) -> (u32, u32) {
        (self.vertices[(i + 1) % 3], self.vertices[(i + 2) % 3])
    }
}

/// Cells on either side of an edge; `second` is `None` on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeCells {
    pub first: u32,
    pub second: Option<u32>,
}

impl EdgeCells {
    pub fn other(&self, c: u32) -> Option<u32> {
        if self.first == c {
            self.second
        } else {
            Some(self.first)
        }
    }
}

/// Bookkeeping for one `refine` call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefineStep {
    pub marked: usize,
    pub bisections: usize,
    pub active_before: usize,
    pub active_after: usize,
}

/// Cells removed and created by an in-place refinement.
#[derive(Debug, Clone, Default)]
pub struct RefineDelta {
    pub removed: Vec<CellId>,
    pub added: Vec<CellId>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    vertex_parents: Vec<Option<[u32; 2]>>,
    cells: Vec<Cell>,
    is_active: Vec<bool>,
    active: Vec<CellId>,
    edges: HashMap<EdgeKey, EdgeCells>,
    n_roots: usize,
    history: Vec<RefineStep>,
}

impl Mesh {
    /// Builds an initial mesh. Clockwise triangles are reoriented; the
    /// refinement edge of every cell is its longest edge, ties going to the
    /// edge whose opposite vertex has the lowest id.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::input("mesh needs at least one triangle"));
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::input("vertex coordinates must be finite"));
        }
        let nv = vertices.len();
        let mut cells = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::input(format!("triangle {k} references a missing vertex")));
            }
            let mut v = [t[0] as u32, t[1] as u32, t[2] as u32];
            let o = geometry::orient(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if o == 0.0 || !o.is_finite() {
                return Err(Error::input(format!("triangle {k} is degenerate")));
            }
            if o < 0.0 {
                v.swap(1, 2);
            }
            cells.push(Cell {
                vertices: v,
                refinement_edge: longest_edge(&vertices, v),
                generation: 0,
                parent: None,
                children: None,
            });
        }
        let n = cells.len();
        let mut mesh = Mesh {
            vertex_parents: vec![None; nv],
            vertices,
            is_active: vec![true; n],
            active: (0..n).collect(),
            cells,
            edges: HashMap::new(),
            n_roots: n,
            history: Vec::new(),
        };
        mesh.rebuild_edges()?;
        mesh.check_conforming()?;
        Ok(mesh)
    }

    /// Structured grid on `[x0, x1] × [y0, y1]` with `nx × ny` squares, each
    /// split along its rising diagonal.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::masked_grid(x0, x1, y0, y1, nx, ny, |_, _| true)
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::rectangle(0.0, 1.0, 0.0, 1.0, n, n)
    }

    /// `(-1, 1)² \ [0, 1]²` with squares of side `1/n`.
    pub fn l_shape(n: usize) -> Result<Self> {
        let m = 2 * n;
        Self::masked_grid(-1.0, 1.0, -1.0, 1.0, m, m, |i, j| !(i >= n && j >= n))
    }

    fn masked_grid(
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        nx: usize,
        ny: usize,
        keep: impl Fn(usize, usize) -> bool,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || !(x1 > x0) || !(y1 > y0) {
            return Err(Error::input("grid needs positive extents and counts"));
        }
        let mut index = vec![usize::MAX; (nx + 1) * (ny + 1)];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut vid = |i: usize, j: usize, vertices: &mut Vec<Point>| -> usize {
            let slot = &mut index[j * (nx + 1) + i];
            if *slot == usize::MAX {
                *slot = vertices.len();
                vertices.push([
                    x0 + (x1 - x0) * i as f64 / nx as f64,
                    y0 + (y1 - y0) * j as f64 / ny as f64,
                ]);
            }
            *slot
        };
        for j in 0..ny {
            for i in 0..nx {
                if !keep(i, j) {
                    continue;
                }
                let a = vid(i, j, &mut vertices);
                let b = vid(i + 1, j, &mut vertices);
                let c = vid(i + 1, j + 1, &mut vertices);
                let d = vid(i, j + 1, &mut vertices);
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        Self::new(vertices, triangles)
    }

    fn rebuild_edges(&mut self) -> Result<()> {
        self.edges.clear();
        for &c in &self.active {
            let cell = &self.cells[c];
            for i in 0..3 {
                let (a, b) = cell.edge(i);
                match self.edges.get_mut(&edge_key(a, b)) {
                    None => {
                        self.edges.insert(
                            edge_key(a, b),
                            EdgeCells {
                                first: c as u32,
                                second: None,
                            },
                        );
                    }
                    Some(e) if e.second.is_none() => e.second = Some(c as u32),
                    Some(_) => {
                        return Err(Error::input(format!(
                            "edge ({a}, {b}) is shared by more than two cells"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Number of cells ever created, including refined ancestors.
    pub fn n_created(&self) -> usize {
        self.cells.len()
    }

    pub fn n_roots(&self) -> usize {
        self.n_roots
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: VertexId) -> Point {
        self.vertices[v]
    }

    /// Endpoints of the edge a vertex was created on, `None` for initial vertices.
    pub fn vertex_parents(&self, v: VertexId) -> Option<[u32; 2]> {
        self.vertex_parents[v]
    }

    /// Active cell ids in ascending order.
    pub fn active(&self) -> &[CellId] {
        &self.active
    }

    pub fn is_active(&self, c: CellId) -> bool {
        self.is_active.get(c).copied().unwrap_or(false)
    }

    pub fn cell(&self, c: CellId) -> &Cell {
        &self.cells[c]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn history(&self) -> &[RefineStep] {
        &self.history
    }

    pub fn edge_cells(&self, a: u32, b: u32) -> Option<EdgeCells> {
        self.edges.get(&edge_key(a, b)).copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle(&self, c: CellId) -> [Point; 3] {
        let v = self.cells[c].vertices;
        [
            self.vertices[v[0] as usize],
            self.vertices[v[1] as usize],
            self.vertices[v[2] as usize],
        ]
    }

    pub fn area(&self, c: CellId) -> f64 {
        geometry::triangle_area(&self.triangle(c))
    }

    /// Cell size `|T|^{1/2}`.
    pub fn h(&self, c: CellId) -> f64 {
        self.area(c).sqrt()
    }

    /// Vertices that lie on a boundary edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for (&(a, b), e) in &self.edges {
            if e.second.is_none() {
                flags[a as usize] = true;
                flags[b as usize] = true;
            }
        }
        flags
    }

    /// Positions of `ids` in the active list.
    pub fn active_positions(&self) -> HashMap<CellId, usize> {
        self.active.iter().enumerate().map(|(i, &c)| (c, i)).collect()
    }

    /// Root cell and bisection path (0 = first child) of a cell.
    pub fn lineage(&self, c: CellId) -> (usize, Vec<u8>) {
        let mut path = Vec::with_capacity(self.cells[c].generation as usize);
        let mut cur = c;
        while let Some(p) = self.cells[cur].parent {
            let kids = self.cells[p as usize].children.expect("parent has children");
            path.push(if kids[0] as usize == cur { 0 } else { 1 });
            cur = p as usize;
        }
        path.reverse();
        (cur, path)
    }

    /// Checks that every interior edge is shared by two active cells, that no
    /// active vertex sits inside an active edge and that all areas are positive.
    pub fn check_conforming(&self) -> Result<()> {
        let mut seen: HashMap<EdgeKey, u8> = HashMap::with_capacity(self.active.len() * 2);
        for &c in &self.active {
            if !(self.area(c) > 0.0) {
                return Err(Error::input(format!("cell {c} has non-positive area")));
            }
            for i in 0..3 {
                let (a, b) = self.cells[c].edge(i);
                let n = seen.entry(edge_key(a, b)).or_insert(0);
                *n += 1;
                if *n > 2 {
                    return Err(Error::input(format!("edge ({a}, {b}) has more than two cells")));
                }
            }
        }
        if seen.len() != self.edges.len()
            || seen.iter().any(|(k, &n)| {
                self.edges
                    .get(k)
                    .map_or(true, |e| (e.second.is_some() as u8 + 1) != n)
            })
        {
            return Err(Error::input("edge adjacency is stale"));
        }
        let mut used = vec![false; self.vertices.len()];
        for &c in &self.active {
            for &v in &self.cells[c].vertices {
                used[v as usize] = true;
            }
        }
        let keys: Vec<EdgeKey> = seen.keys().copied().collect();
        let segs: Vec<(Point, Point)> = keys
            .iter()
            .map(|&(a, b)| (self.vertices[a as usize], self.vertices[b as usize]))
            .collect();
        let cell = segs
            .iter()
            .map(|s| geometry::dist(s.0, s.1))
            .fold(0.0, f64::max)
            .max(1e-300);
        let grid = geometry::SegmentGrid::new(&segs, cell);
        for (v, p) in self.vertices.iter().enumerate() {
            if !used[v] {
                continue;
            }
            let bb = geometry::Aabb::of_points(&[*p]);
            for k in grid.candidates(&bb) {
                let (a, b) = keys[k as usize];
                if a as usize == v || b as usize == v {
                    continue;
                }
                let (pa, pb) = segs[k as usize];
                let len = geometry::dist(pa, pb);
                if geometry::point_segment_distance(*p, pa, pb) <= 1e-12 * len {
                    return Err(Error::input(format!(
                        "hanging vertex {v} on edge ({a}, {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Newest vertex bisection of the marked cells followed by the
    /// conforming closure.
    pub fn refine(&self, marked: &[CellId]) -> Result<Mesh> {
        let mut out = self.clone();
        out.refine_in_place(marked)?;
        Ok(out)
    }

    pub fn refine_in_place(&mut self, marked: &[CellId]) -> Result<RefineDelta> {
        for &c in marked {
            if !self.is_active(c) {
                return Err(Error::input(format!("cell {c} is not an active cell")));
            }
        }
        let active_before = self.active.len();
        let arena_len = self.cells.len();
        let mut delta = RefineDelta::default();
        if marked.is_empty() {
            self.history.push(RefineStep {
                marked: 0,
                bisections: 0,
                active_before,
                active_after: active_before,
            });
            return Ok(delta);
        }
        let mut queue: VecDeque<CellId> = {
            let mut m = marked.to_vec();
            m.sort_unstable();
            m.dedup();
            m.into_iter().collect()
        };
        let n_marked = queue.len();
        let mut midpoints: HashMap<EdgeKey, u32> = HashMap::new();
        let mut bisections = 0;
        while let Some(c) = queue.pop_front() {
            if !self.is_active[c] {
                continue;
            }
            bisections += 1;
            let kids = self.bisect(c, &mut midpoints, &mut queue);
            delta.removed.push(c);
            delta.added.extend(kids);
        }
        self.active = (0..self.cells.len()).filter(|&c| self.is_active[c]).collect();
        delta.added.retain(|&c| self.is_active[c]);
        delta.removed.retain(|&c| c < arena_len);
        self.history.push(RefineStep {
            marked: n_marked,
            bisections,
            active_before,
            active_after: self.active.len(),
        });
        Ok(delta)
    }

    fn bisect(
        &mut self,
        c: CellId,
        midpoints: &mut HashMap<EdgeKey, u32>,
        queue: &mut VecDeque<CellId>,
    ) -> [CellId; 2] {
        let cell = self.cells[c].clone();
        let e = cell.refinement_edge as usize;
        let apex = cell.vertices[e];
        let a = cell.vertices[(e + 1) % 3];
        let b = cell.vertices[(e + 2) % 3];
        let key = edge_key(a, b);
        let m = *midpoints.entry(key).or_insert_with(|| {
            let pa = self.vertices[a as usize];
            let pb = self.vertices[b as usize];
            self.vertices.push(geometry::midpoint(pa, pb));
            self.vertex_parents.push(Some([key.0, key.1]));
            (self.vertices.len() - 1) as u32
        });

        for i in 0..3 {
            let (p, q) = cell.edge(i);
            let k = edge_key(p, q);
            let ec = self.edges.get_mut(&k).expect("active edge is registered");
            if ec.first == c as u32 {
                match ec.second.take() {
                    Some(s) => ec.first = s,
                    None => {
                        self.edges.remove(&k);
                    }
                }
            } else {
                ec.second = None;
            }
        }
        self.is_active[c] = false;

        let c0 = self.cells.len();
        let c1 = c0 + 1;
        let gen = cell.generation + 1;
        // (apex, a, m) and (apex, m, b) keep counter-clockwise order
        self.cells.push(Cell {
            vertices: [apex, a, m],
            refinement_edge: 2,
            generation: gen,
            parent: Some(c as u32),
            children: None,
        });
        self.cells.push(Cell {
            vertices: [apex, m, b],
            refinement_edge: 1,
            generation: gen,
            parent: Some(c as u32),
            children: None,
        });
        self.is_active.push(true);
        self.is_active.push(true);
        self.cells[c].children = Some([c0 as u32, c1 as u32]);

        for &child in &[c0, c1] {
            for i in 0..3 {
                let (p, q) = self.cells[child].edge(i);
                let k = edge_key(p, q);
                match self.edges.get_mut(&k) {
                    Some(ec) => ec.second = Some(child as u32),
                    None => {
                        self.edges.insert(
                            k,
                            EdgeCells {
                                first: child as u32,
                                second: None,
                            },
                        );
                    }
                }
                if midpoints.contains_key(&k) {
                    // the neighbour across this edge has already split it
                    queue.push_back(child);
                }
            }
        }
        // the cell across the split edge now has a hanging node
        if let Some(ec) = self.edges.get(&key) {
            queue.push_back(ec.first as usize);
        }
        [c0, c1]
    }

    /// Whether `self` is obtained from `coarse` by refinement within the same
    /// cell arena (ids preserved).
    pub fn is_refinement_of(&self, coarse: &Mesh) -> bool {
        if coarse.cells.len() > self.cells.len()
            || coarse.n_roots != self.n_roots
            || coarse.vertices.len() > self.vertices.len()
        {
            return false;
        }
        if coarse.vertices[..] != self.vertices[..coarse.vertices.len()] {
            return false;
        }
        for (i, c) in coarse.cells.iter().enumerate() {
            let s = &self.cells[i];
            if c.vertices != s.vertices || c.parent != s.parent {
                return false;
            }
        }
        coarse
            .active
            .iter()
            .all(|&c| self.is_active[c] || self.cells[c].children.is_some())
    }

    /// Overlay of two refinements `t1`, `t2` of the common coarse mesh `t0`:
    /// every point is covered by the smaller of the two covering cells. The
    /// result lives in the cell arena of `t0`.
    pub fn overlay(t1: &Mesh, t2: &Mesh, t0: &Mesh) -> Result<Mesh> {
        for (name, t) in [("t1", t1), ("t2", t2)] {
            if t.n_roots != t0.n_roots {
                return Err(Error::input(format!("{name} has a different set of root cells")));
            }
            for r in 0..t0.n_roots {
                if t.triangle(r) != t0.triangle(r) {
                    return Err(Error::input(format!("{name} root cell {r} differs from t0")));
                }
            }
        }
        let nodes = |t: &Mesh| -> HashSet<(usize, Vec<u8>)> {
            (0..t.cells.len()).map(|c| t.lineage(c)).collect()
        };
        let internal = |t: &Mesh| -> HashSet<(usize, Vec<u8>)> {
            (0..t.cells.len())
                .filter(|&c| t.cells[c].children.is_some())
                .map(|c| t.lineage(c))
                .collect()
        };
        let (n1, n2) = (nodes(t1), nodes(t2));
        for &c in &t0.active {
            let key = t0.lineage(c);
            if !n1.contains(&key) || !n2.contains(&key) {
                return Err(Error::input(format!(
                    "t1 and t2 must both refine t0 (cell {c} of t0 is missing)"
                )));
            }
        }
        let mut split = internal(t1);
        split.extend(internal(t2));
        let mut out = t0.clone();
        loop {
            let marked: Vec<CellId> = out
                .active
                .iter()
                .copied()
                .filter(|&c| split.contains(&out.lineage(c)))
                .collect();
            if marked.is_empty() {
                break;
            }
            out.refine_in_place(&marked)?;
        }
        Ok(out)
    }
}

fn longest_edge(vertices: &[Point], v: [u32; 3]) -> u8 {
    let len2 = |i: usize| {
        let p = vertices[v[(i + 1) % 3] as usize];
        let q = vertices[v[(i + 2) % 3] as usize];
        let d = geometry::sub(p, q);
        geometry::dot(d, d)
    };
    let lens = [len2(0), len2(1), len2(2)];
    let max = lens.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-12 * max;
    (0..3)
        .filter(|&i| lens[i] >= max - tol)
        .min_by_key(|&i| v[i])
        .unwrap() as u8
}

/// Active cells whose closure meets the curve, with `diam = max h_T` over them.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceSet {
    pub cells: Vec<CellId>,
    pub diam: f64,
}

pub fn interface_cells(mesh: &Mesh, curve: &Curve) -> InterfaceSet {
    let mut cells = Vec::new();
    let mut diam: f64 = 0.0;
    for &c in mesh.active() {
        let t = mesh.triangle(c);
        if curve.meets_triangle(&t) {
            cells.push(c);
            diam = diam.max(mesh.h(c));
        }
    }
    InterfaceSet { cells, diam }
}
