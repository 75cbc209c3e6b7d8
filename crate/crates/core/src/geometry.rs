//! Convex hulls in 2D and 3D and their halfspace forms.
//!
//! Lower-dimensional sets keep a full-rank description by pairing opposing
//! inequalities: a segment in the plane is two rows for its supporting line
//! plus two end caps, a point is four (2D) or six (3D) coordinate pins.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::StateActionKey;

/// Cross products below this are treated as collinear.
pub const COLLINEAR_TOL: f64 = 1e-12;
/// Rank threshold for the 3D degeneracy pre-pass.
pub const RANK_TOL: f64 = 1e-10;
/// Slack for vertex/facet consistency checks.
pub const CONSISTENCY_TOL: f64 = 1e-7;

pub type Point2 = [f64; 2];
pub type Point3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Owner {
    pub h: usize,
    pub o: StateActionKey,
}

/// Vertex and halfspace description `{x : Hx ≤ b}` of a value set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuePolytope {
    pub dimension: usize,
    pub vertices: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub owner: Owner,
}

impl ValuePolytope {
    pub fn from_points_2d(points: &[Point2], owner: Owner) -> Self {
        let hull = convex_hull_2d(points);
        let (h, b) = to_halfspaces_2d(&hull);
        ValuePolytope {
            dimension: 2,
            vertices: hull.iter().map(|p| p.to_vec()).collect(),
            h,
            b,
            owner,
        }
    }

    pub fn from_points_3d(points: &[Point3], owner: Owner) -> Self {
        let hull = convex_hull_3d_halfspaces(points);
        ValuePolytope {
            dimension: 3,
            vertices: hull.vertices.iter().map(|p| p.to_vec()).collect(),
            h: hull.h.iter().map(|r| r.to_vec()).collect(),
            b: hull.b,
            owner,
        }
    }

    /// The single point `x`.
    pub fn point(x: &[f64], owner: Owner) -> Self {
        match x.len() {
            2 => Self::from_points_2d(&[[x[0], x[1]]], owner),
            3 => Self::from_points_3d(&[[x[0], x[1], x[2]]], owner),
            d => panic!("unsupported dimension {d}"),
        }
    }

    /// Vertex maximizing coordinate 0, ties by coordinate 1.
    pub fn lex_max_vertex(&self) -> &[f64] {
        self.vertices
            .iter()
            .max_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])))
            .expect("polytope has vertices")
    }

    /// Vertex minimizing coordinate `k`, ties by the largest coordinate 0.
    pub fn min_vertex(&self, k: usize) -> &[f64] {
        self.vertices
            .iter()
            .min_by(|a, b| a[k].total_cmp(&b[k]).then(b[0].total_cmp(&a[0])))
            .expect("polytope has vertices")
    }

    /// Checks the vertex/facet cross-consistency invariants.
    pub fn check_consistency(&self, tol: f64) -> Result<(), String> {
        if self.vertices.is_empty() {
            return Err("no vertices".into());
        }
        for v in &self.vertices {
            if !contains(self, v, tol) {
                return Err(format!("vertex {v:?} violates its own halfspaces"));
            }
        }
        for (row, &b) in self.h.iter().zip(&self.b) {
            let tight = self
                .vertices
                .iter()
                .filter(|v| (dot(row, v) - b).abs() <= tol)
                .count();
            // A facet of a k-dimensional set carries at least k vertices.
            if tight < self.affine_dim().max(1) {
                return Err(format!("facet {row:?} ≤ {b} supported by {tight} vertices"));
            }
        }
        Ok(())
    }

    fn affine_dim(&self) -> usize {
        match self.dimension {
            2 => {
                let pts: Vec<Point2> = self.vertices.iter().map(|v| [v[0], v[1]]).collect();
                match pts.len() {
                    1 => 0,
                    2 => 1,
                    _ => 2,
                }
            }
            _ => {
                let pts: Vec<Point3> = self.vertices.iter().map(|v| [v[0], v[1], v[2]]).collect();
                affine_frame(&pts).len() - 1
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// True iff `Hx ≤ b + tol` row-wise.
pub fn contains(poly: &ValuePolytope, x: &[f64], tol: f64) -> bool {
    assert_eq!(x.len(), poly.dimension, "dimension mismatch");
    poly.h.iter().zip(&poly.b).all(|(row, &b)| dot(row, x) <= b + tol)
}

fn cross2(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone chain. Returns the hull counterclockwise, starting at the
/// lexicographically smallest point, without collinear points.
pub fn convex_hull_2d(points: &[Point2]) -> Vec<Point2> {
    assert!(!points.is_empty(), "hull of an empty set");
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() <= COLLINEAR_TOL && (a[1] - b[1]).abs() <= COLLINEAR_TOL);
    if pts.len() == 1 {
        return pts;
    }
    let mut lower: Vec<Point2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross2(lower[lower.len() - 2], lower[lower.len() - 1], p) <= COLLINEAR_TOL {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(upper[upper.len() - 2], upper[upper.len() - 1], p) <= COLLINEAR_TOL {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() == 2 && lower[0] == lower[1] {
        lower.pop();
    }
    lower
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Halfspace rows for an output of [`convex_hull_2d`], with unit normals.
pub fn to_halfspaces_2d(hull: &[Point2]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut h = Vec::new();
    let mut b = Vec::new();
    match hull.len() {
        0 => panic!("empty hull"),
        1 => {
            let p = hull[0];
            for (row, rhs) in [([1.0, 0.0], p[0]), ([-1.0, 0.0], -p[0]), ([0.0, 1.0], p[1]), ([0.0, -1.0], -p[1])] {
                h.push(row.to_vec());
                b.push(rhs);
            }
        }
        2 => {
            let (p, q) = (hull[0], hull[1]);
            let len = norm(&[q[0] - p[0], q[1] - p[1]]);
            let d = [(q[0] - p[0]) / len, (q[1] - p[1]) / len];
            let n = [-d[1], d[0]];
            let line = dot(&n, &p);
            h.push(n.to_vec());
            b.push(line);
            h.push(vec![-n[0], -n[1]]);
            b.push(-line);
            h.push(d.to_vec());
            b.push(dot(&d, &q));
            h.push(vec![-d[0], -d[1]]);
            b.push(-dot(&d, &p));
        }
        k => {
            for i in 0..k {
                let (p, q) = (hull[i], hull[(i + 1) % k]);
                let e = [q[0] - p[0], q[1] - p[1]];
                let len = norm(&e);
                let n = [e[1] / len, -e[0] / len];
                h.push(n.to_vec());
                b.push(dot(&n, &p));
            }
        }
    }
    (h, b)
}

fn sub3(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: Point3, b: Point3) -> Point3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit3(a: Point3) -> Point3 {
    let n = norm(&a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Up to four affinely independent point indices: the first point, the
/// farthest from it, the farthest from their line, the farthest from their plane.
fn affine_frame(points: &[Point3]) -> Vec<usize> {
    let mut frame = vec![0];
    let p0 = points[0];
    let far = |score: &dyn Fn(Point3) -> f64| {
        let mut best = (0, 0.0);
        for (i, &p) in points.iter().enumerate() {
            let s = score(p);
            if s > best.1 {
                best = (i, s);
            }
        }
        best
    };
    let (i1, d1) = far(&|p| norm(&sub3(p, p0)));
    if d1 < RANK_TOL {
        return frame;
    }
    frame.push(i1);
    let dir = unit3(sub3(points[i1], p0));
    let (i2, d2) = far(&|p| norm(&cross3(dir, sub3(p, p0))));
    if d2 < RANK_TOL {
        return frame;
    }
    frame.push(i2);
    let n = unit3(cross3(dir, sub3(points[i2], p0)));
    let (i3, d3) = far(&|p| dot(&n, &sub3(p, p0)).abs());
    if d3 < RANK_TOL {
        return frame;
    }
    frame.push(i3);
    frame
}

/// Halfspaces plus the minimal vertex set of a 3D hull.
#[derive(Debug, Clone, PartialEq)]
pub struct Hull3 {
    pub h: Vec<Point3>,
    pub b: Vec<f64>,
    pub vertices: Vec<Point3>,
}

/// Unit vectors completing `n` to an orthonormal basis.
fn complete_basis(n: Point3) -> (Point3, Point3) {
    let pick = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = unit3(cross3(n, pick));
    let w = cross3(n, u);
    (u, w)
}

pub fn convex_hull_3d_halfspaces(points: &[Point3]) -> Hull3 {
    assert!(!points.is_empty(), "hull of an empty set");
    let frame = affine_frame(points);
    let p0 = points[frame[0]];
    let mut h = Vec::new();
    let mut b = Vec::new();
    let mut push = |row: Point3, rhs: f64| {
        h.push(row);
        b.push(rhs);
    };
    match frame.len() {
        1 => {
            for k in 0..3 {
                let mut e = [0.0; 3];
                e[k] = 1.0;
                push(e, p0[k]);
                e[k] = -1.0;
                push(e, -p0[k]);
            }
            Hull3 { h, b, vertices: vec![p0] }
        }
        2 => {
            let d = unit3(sub3(points[frame[1]], p0));
            let (n1, n2) = complete_basis(d);
            for n in [n1, n2] {
                let c = dot(&n, &p0);
                push(n, c);
                push([-n[0], -n[1], -n[2]], -c);
            }
            let proj = |p: &Point3| dot(&d, p);
            let lo = points.iter().copied().min_by(|a, b| proj(a).total_cmp(&proj(b))).unwrap();
            let hi = points.iter().copied().max_by(|a, b| proj(a).total_cmp(&proj(b))).unwrap();
            push(d, proj(&hi));
            push([-d[0], -d[1], -d[2]], -proj(&lo));
            Hull3 { h, b, vertices: vec![lo, hi] }
        }
        3 => {
            let n = unit3(cross3(sub3(points[frame[1]], p0), sub3(points[frame[2]], p0)));
            let (u, w) = complete_basis(n);
            let flat: Vec<Point2> = points.iter().map(|p| [dot(&u, p), dot(&w, p)]).collect();
            let hull = convex_hull_2d(&flat);
            let c = dot(&n, &p0);
            push(n, c);
            push([-n[0], -n[1], -n[2]], -c);
            let (rows, rhs) = to_halfspaces_2d(&hull);
            // a 2D "point" or "segment" here cannot happen: the frame has rank 2
            for (r, bb) in rows.iter().zip(rhs) {
                let row = [r[0] * u[0] + r[1] * w[0], r[0] * u[1] + r[1] * w[1], r[0] * u[2] + r[1] * w[2]];
                push(row, bb);
            }
            let vertices = hull
                .iter()
                .map(|q| points[flat.iter().position(|f| f == q).unwrap()])
                .collect();
            Hull3 { h, b, vertices }
        }
        _ => incremental_hull(points, &frame),
    }
}

#[derive(Clone, Copy)]
struct Face {
    v: [usize; 3],
    n: Point3,
    d: f64,
}

fn make_face(points: &[Point3], v: [usize; 3]) -> Face {
    let n = unit3(cross3(sub3(points[v[1]], points[v[0]]), sub3(points[v[2]], points[v[0]])));
    Face { v, n, d: dot(&n, &points[v[0]]) }
}

fn incremental_hull(points: &[Point3], frame: &[usize]) -> Hull3 {
    const VISIBLE: f64 = 1e-10;
    let [a, b, c, d] = [frame[0], frame[1], frame[2], frame[3]];
    let centroid = {
        let mut s = [0.0; 3];
        for &i in frame {
            for k in 0..3 {
                s[k] += points[i][k] / 4.0;
            }
        }
        s
    };
    let mut faces: Vec<Face> = Vec::new();
    for tri in [[a, b, c], [a, b, d], [a, c, d], [b, c, d]] {
        let mut f = make_face(points, tri);
        if dot(&f.n, &centroid) > f.d {
            f = make_face(points, [tri[0], tri[2], tri[1]]);
        }
        faces.push(f);
    }
    let in_frame: HashSet<usize> = frame.iter().copied().collect();
    for (i, &p) in points.iter().enumerate() {
        if in_frame.contains(&i) {
            continue;
        }
        let visible: Vec<bool> = faces.iter().map(|f| dot(&f.n, &p) - f.d > VISIBLE).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edges: HashSet<(usize, usize)> = HashSet::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, &v)| v) {
            for k in 0..3 {
                edges.insert((f.v[k], f.v[(k + 1) % 3]));
            }
        }
        let mut next: Vec<Face> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, &v)| !v)
            .map(|(f, _)| *f)
            .collect();
        let mut horizon: Vec<(usize, usize)> = edges.iter().copied().filter(|&(x, y)| !edges.contains(&(y, x))).collect();
        horizon.sort_unstable();
        for (x, y) in horizon {
            next.push(make_face(points, [x, y, i]));
        }
        faces = next;
    }

    // merge coplanar triangles into facets
    let mut planes: Vec<(Point3, f64)> = Vec::new();
    for f in &faces {
        let dup = planes
            .iter()
            .any(|(n, d)| dot(n, &f.n) > 1.0 - 1e-12 && (d - f.d).abs() < 1e-9);
        if !dup {
            planes.push((f.n, f.d));
        }
    }
    let mut used: Vec<usize> = faces.iter().flat_map(|f| f.v).collect();
    used.sort_unstable();
    used.dedup();
    let tight_rank = |p: &Point3| {
        let normals: Vec<Point3> = planes
            .iter()
            .filter(|(n, d)| (dot(n, p) - d).abs() <= 1e-9)
            .map(|(n, _)| *n)
            .collect();
        rank3(&normals)
    };
    let mut vertices: Vec<Point3> = used.iter().map(|&i| points[i]).filter(|p| tight_rank(p) == 3).collect();
    vertices.dedup();
    let mut seen = HashMap::new();
    vertices.retain(|p| seen.insert(p.map(f64::to_bits), ()).is_none());
    let (h, b): (Vec<Point3>, Vec<f64>) = planes
        .into_iter()
        .filter(|(n, d)| vertices.iter().filter(|v| (dot(n, *v) - d).abs() <= 1e-9).count() >= 3)
        .unzip();
    Hull3 { h, b, vertices }
}

fn rank3(vs: &[Point3]) -> usize {
    if vs.is_empty() {
        return 0;
    }
    let first = vs[0];
    let Some(second) = vs.iter().find(|v| norm(&cross3(first, **v)) > 1e-9) else {
        return 1;
    };
    let n = cross3(first, *second);
    if vs.iter().any(|v| dot(&n, v).abs() > 1e-9) {
        3
    } else {
        2
    }
}

/// Shoelace area of a counterclockwise polygon.
pub fn polygon_area(hull: &[Point2]) -> f64 {
    let k = hull.len();
    if k < 3 {
        return 0.0;
    }
    (0..k)
        .map(|i| {
            let (p, q) = (hull[i], hull[(i + 1) % k]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        / 2.0
}
