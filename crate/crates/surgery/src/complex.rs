//! Polygon-gluing engine for compact surfaces with boundary.
//!
//! A surface is described by a list of polygonal faces whose sides are either
//! glued pairwise or left free (boundary). Everything is counted exactly:
//! vertices are corner classes under the identifications induced by the side
//! gluings, edges are glued pairs plus free sides.

use std::collections::HashMap;

/// Reference to side `side` of face `face`; the side runs from corner `side`
/// to corner `side + 1` (mod the face size).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SideRef {
    pub face: usize,
    pub side: usize,
}

#[derive(Clone, Debug)]
struct Face<L> {
    corners: usize,
    labels: Vec<Option<L>>,
}

/// A free side carries a label so boundary cycles can be attributed to
/// whatever the caller maps them onto, together with a weight (e.g. the
/// fraction of a closed orbit the side covers).
#[derive(Clone, Debug)]
pub struct Complex<L> {
    faces: Vec<Face<L>>,
    /// side -> (partner, reversed)
    glue: HashMap<SideRef, (SideRef, bool)>,
    weights: HashMap<SideRef, i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryCycle<L> {
    pub sides: Vec<SideRef>,
    pub label: L,
    pub weight: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentCensus<L> {
    pub vertices: i64,
    pub edges: i64,
    pub faces: i64,
    pub boundary: Vec<BoundaryCycle<L>>,
    pub orientable: bool,
}

impl<L> ComponentCensus<L> {
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices - self.edges + self.faces
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComplexError {
    AlreadyGlued(SideRef),
    NotAManifold { vertex_corners: usize, fan_corners: usize },
    MixedBoundaryLabels,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

impl<L: Clone + PartialEq> Complex<L> {
    pub fn new() -> Self {
        Self { faces: Vec::new(), glue: HashMap::new(), weights: HashMap::new() }
    }

    pub fn add_face(&mut self, corners: usize) -> usize {
        assert!(corners >= 3);
        self.faces.push(Face { corners, labels: vec![None; corners] });
        self.faces.len() - 1
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn set_boundary_label(&mut self, side: SideRef, label: L, weight: i64) {
        self.faces[side.face].labels[side.side] = Some(label);
        self.weights.insert(side, weight);
    }

    /// Glue two sides. With `reversed == false` the start corner of `a` is
    /// identified with the start corner of `b`; otherwise with its end corner.
    pub fn glue(&mut self, a: SideRef, b: SideRef, reversed: bool) -> Result<(), ComplexError> {
        for s in [a, b] {
            if self.glue.contains_key(&s) {
                return Err(ComplexError::AlreadyGlued(s));
            }
        }
        self.glue.insert(a, (b, reversed));
        self.glue.insert(b, (a, reversed));
        Ok(())
    }

    fn corner_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.faces.len() + 1);
        let mut acc = 0;
        for f in &self.faces {
            off.push(acc);
            acc += f.corners;
        }
        off.push(acc);
        off
    }

    fn side_ends(&self, s: SideRef) -> (usize, usize) {
        let n = self.faces[s.face].corners;
        (s.side, (s.side + 1) % n)
    }

    /// Corner classes and face components.
    fn classes(&self) -> (Vec<usize>, UnionFind, Vec<usize>) {
        let off = self.corner_offsets();
        let total = *off.last().unwrap();
        let mut corners = UnionFind::new(total);
        let mut faces = UnionFind::new(self.faces.len());
        let mut glued: Vec<_> = self.glue.iter().collect();
        glued.sort_by_key(|(k, _)| **k);
        for (&a, &(b, reversed)) in glued {
            let (a0, a1) = self.side_ends(a);
            let (b0, b1) = self.side_ends(b);
            let (b_start, b_end) = if reversed { (b1, b0) } else { (b0, b1) };
            corners.union(off[a.face] + a0, off[b.face] + b_start);
            corners.union(off[a.face] + a1, off[b.face] + b_end);
            faces.union(a.face, b.face);
        }
        let mut corners = corners;
        let roots = (0..total).map(|c| corners.find(c)).collect();
        (roots, faces, off)
    }

    /// Orientation sign per face, or `None` when some component is
    /// non-orientable. Adjacent faces of an oriented surface traverse a
    /// shared edge in opposite directions.
    fn orientation(&self, comps: &mut UnionFind) -> (Vec<i8>, Vec<bool>) {
        let n = self.faces.len();
        let mut sign = vec![0i8; n];
        let mut ok = vec![true; n];
        for start in 0..n {
            if sign[start] != 0 {
                continue;
            }
            sign[start] = 1;
            let mut stack = vec![start];
            while let Some(f) = stack.pop() {
                for side in 0..self.faces[f].corners {
                    let s = SideRef { face: f, side };
                    if let Some(&(t, reversed)) = self.glue.get(&s) {
                        let want = if reversed { sign[f] } else { -sign[f] };
                        if sign[t.face] == 0 {
                            sign[t.face] = want;
                            stack.push(t.face);
                        } else if sign[t.face] != want {
                            let root = comps.find(f);
                            ok[root] = false;
                        }
                    }
                }
            }
        }
        (sign, ok)
    }

    /// Exact census of every connected component, ordered by the smallest
    /// face index it contains.
    pub fn census(&self) -> Result<Vec<ComponentCensus<L>>, ComplexError> {
        let (corner_root, mut comps, off) = self.classes();
        let (sign, orientable_by_root) = self.orientation(&mut comps);
        self.check_links(&corner_root, &off)?;

        let mut order: Vec<usize> = Vec::new();
        let mut index_of: HashMap<usize, usize> = HashMap::new();
        for f in 0..self.faces.len() {
            let r = comps.find(f);
            if !index_of.contains_key(&r) {
                index_of.insert(r, order.len());
                order.push(r);
            }
        }
        let mut out: Vec<ComponentCensus<L>> = order
            .iter()
            .map(|&r| ComponentCensus {
                vertices: 0,
                edges: 0,
                faces: 0,
                boundary: Vec::new(),
                orientable: orientable_by_root[r],
            })
            .collect();

        let mut seen_vertex = std::collections::HashSet::new();
        for f in 0..self.faces.len() {
            let c = index_of[&comps.find(f)];
            out[c].faces += 1;
            for k in 0..self.faces[f].corners {
                if seen_vertex.insert(corner_root[off[f] + k]) {
                    out[c].vertices += 1;
                }
                let s = SideRef { face: f, side: k };
                match self.glue.get(&s) {
                    // count each glued pair once
                    Some(&(t, _)) if t < s => {}
                    _ => out[c].edges += 1,
                }
            }
        }

        for cycle in self.boundary_cycles(&corner_root, &off, &sign)? {
            let c = index_of[&comps.find(cycle.sides[0].face)];
            out[c].boundary.push(cycle);
        }
        Ok(out)
    }

    /// The side of `face` other than `side` that touches corner `corner`.
    fn other_side_at(&self, face: usize, side: usize, corner: usize) -> usize {
        let n = self.faces[face].corners;
        if side == corner {
            (corner + n - 1) % n
        } else {
            corner
        }
    }

    /// Where corner `corner` of `s.face` lands on the partner side of `s`.
    fn partner_corner(&self, s: SideRef, corner: usize) -> (SideRef, usize) {
        let (t, reversed) = self.glue[&s];
        let (s0, _) = self.side_ends(s);
        let (t0, t1) = self.side_ends(t);
        let at_start = corner == s0;
        let c = match (at_start, reversed) {
            (true, false) | (false, true) => t0,
            _ => t1,
        };
        (t, c)
    }

    /// Walks the fan of faces around a vertex starting from a corner through
    /// `side`; returns the visited corners and the free side that stopped the
    /// walk (if any).
    fn walk_fan(&self, start: SideRef, corner: usize) -> (Vec<(usize, usize)>, Option<(SideRef, usize)>) {
        let mut visited = vec![(start.face, corner)];
        let mut face = start.face;
        let mut corner = corner;
        let mut side = self.other_side_at(face, start.side, corner);
        loop {
            let s = SideRef { face, side };
            if !self.glue.contains_key(&s) {
                return (visited, Some((s, corner)));
            }
            let (t, c) = self.partner_corner(s, corner);
            if t.face == start.face && c == visited[0].1 {
                return (visited, None);
            }
            face = t.face;
            corner = c;
            visited.push((face, corner));
            side = self.other_side_at(face, t.side, corner);
            if visited.len() > 4 * self.faces.len() + 8 {
                // cycled without returning to the start corner
                return (visited, None);
            }
        }
    }

    fn check_links(&self, corner_root: &[usize], off: &[usize]) -> Result<(), ComplexError> {
        let mut per_vertex: HashMap<usize, usize> = HashMap::new();
        for &r in corner_root {
            *per_vertex.entry(r).or_default() += 1;
        }
        let mut done = std::collections::HashSet::new();
        for f in 0..self.faces.len() {
            for k in 0..self.faces[f].corners {
                let root = corner_root[off[f] + k];
                if !done.insert(root) {
                    continue;
                }
                // walk both ways from this corner; a manifold link is a single
                // arc or circle, so the two walks together see every corner
                let n = self.faces[f].corners;
                let first = SideRef { face: f, side: (k + n - 1) % n };
                let (a, closed) = self.walk_fan(first, k);
                let total = if closed.is_none() {
                    a.len()
                } else {
                    let second = SideRef { face: f, side: k };
                    let (b, _) = self.walk_fan(second, k);
                    a.len() + b.len() - 1
                };
                let expected = per_vertex[&root];
                if total != expected {
                    return Err(ComplexError::NotAManifold { vertex_corners: expected, fan_corners: total });
                }
            }
        }
        Ok(())
    }

    fn boundary_cycles(
        &self,
        corner_root: &[usize],
        off: &[usize],
        sign: &[i8],
    ) -> Result<Vec<BoundaryCycle<L>>, ComplexError> {
        let mut free: Vec<SideRef> = Vec::new();
        for f in 0..self.faces.len() {
            for side in 0..self.faces[f].corners {
                let s = SideRef { face: f, side };
                if !self.glue.contains_key(&s) {
                    free.push(s);
                }
            }
        }
        let mut used = std::collections::HashSet::new();
        let mut cycles = Vec::new();
        for &start in &free {
            if used.contains(&start) {
                continue;
            }
            let mut sides = Vec::new();
            let mut cur = start;
            loop {
                used.insert(cur);
                sides.push(cur);
                // leave through the end corner in the face's induced orientation
                let (c0, c1) = self.side_ends(cur);
                let exit = if sign[cur.face] >= 0 { c1 } else { c0 };
                let (_, stop) = self.walk_fan(cur, exit);
                let (next, _) = stop.expect("free side always ends a fan");
                let _ = corner_root[off[next.face]];
                if next == start {
                    break;
                }
                if used.contains(&next) {
                    break;
                }
                cur = next;
            }
            let label = self.faces[start.face].labels[start.side].clone();
            let mut weight = 0;
            for s in &sides {
                if self.faces[s.face].labels[s.side] != label {
                    return Err(ComplexError::MixedBoundaryLabels);
                }
                weight += self.weights.get(s).copied().unwrap_or(0);
            }
            cycles.push(BoundaryCycle {
                sides,
                label: label.ok_or(ComplexError::MixedBoundaryLabels)?,
                weight,
            });
        }
        Ok(cycles)
    }
}

impl<L: Clone + PartialEq> Default for Complex<L> {
    fn default() -> Self {
        Self::new()
    }
}
