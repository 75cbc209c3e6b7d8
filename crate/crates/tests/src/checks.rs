//! Property checks shared by the acceptance suite and the core property tests.
//!
//! Each check returns `Err(reason)` on the first violated invariant so the
//! caller can report the offending input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spa_core::geometry::{self, Owner, Point2, Point3, ValuePolytope, COLLINEAR_TOL};
use spa_core::lp::{self, LinearProgram, LpStatus, Relation, Sense};
use spa_core::oracle;
use spa_core::policy_forward::{rollout, CommitmentPolicy, DeviationPlan};
use spa_core::StateActionKey;

use crate::exact_lp::{IntProgram, Outcome, Rel};

/// Containment slack for hull checks.
pub const HULL_TOL: f64 = 1e-9;
/// A vertex is extreme if its tight facet normals have rank `dimension`.
pub const TIGHT_TOL: f64 = 1e-7;
/// Objective agreement with the exact solver, relative to `1 + |v|`.
pub const LP_OBJ_TOL: f64 = 1e-6;
/// Allowed bound/row violation of the floating-point solution.
pub const LP_FEAS_TOL: f64 = 1e-7;
/// Monte Carlo means must fall within this many standard errors.
pub const MC_SIGMAS: f64 = 4.0;

fn owner() -> Owner {
    Owner {
        h: 1,
        o: StateActionKey::Root,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Point sets with a share of duplicates, collinear runs and grid points.
pub fn random_points_2d(rng: &mut impl Rng) -> Vec<Point2> {
    let n = rng.random_range(1..=30);
    let mut pts = Vec::with_capacity(n);
    match rng.random_range(0..4) {
        0 => {
            let (a, d) = ([rng.random::<f64>(), rng.random::<f64>()], [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5]);
            for _ in 0..n {
                let t = rng.random_range(0..8) as f64 / 4.0;
                pts.push([a[0] + t * d[0], a[1] + t * d[1]]);
            }
        }
        1 => {
            for _ in 0..n {
                pts.push([rng.random_range(0..4) as f64 / 4.0, rng.random_range(0..4) as f64 / 4.0]);
            }
        }
        _ => {
            for _ in 0..n {
                pts.push([3.0 * rng.random::<f64>(), 3.0 * rng.random::<f64>()]);
            }
        }
    }
    if rng.random_bool(0.3) {
        let p = pts[rng.random_range(0..pts.len())];
        pts.push(p);
    }
    pts
}

pub fn random_points_3d(rng: &mut impl Rng) -> Vec<Point3> {
    let n = rng.random_range(1..=25);
    let mut pts = Vec::with_capacity(n);
    let mode = rng.random_range(0..5);
    for _ in 0..n {
        let (u, v, w) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        pts.push(match mode {
            // segment
            0 => [u, 2.0 * u, 0.5 - u],
            // plane x + y + z = 1
            1 => [u, v * (1.0 - u), 1.0 - u - v * (1.0 - u)],
            // integer grid, many coplanar faces
            2 => [
                rng.random_range(0..3) as f64 / 2.0,
                rng.random_range(0..3) as f64 / 2.0,
                rng.random_range(0..3) as f64 / 2.0,
            ],
            _ => [3.0 * u, 3.0 * v, 3.0 * w],
        });
    }
    if rng.random_bool(0.3) {
        let p = pts[rng.random_range(0..pts.len())];
        pts.push(p);
    }
    pts
}

/// Rank of a set of unit normals. Nearly parallel normals of a barely convex
/// corner still count as independent, matching the hull's collinearity cutoff.
fn rank(rows: &[&[f64]], dim: usize) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let mut v = r.to_vec();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = dot(&v, &v).sqrt();
        if n > COLLINEAR_TOL {
            basis.push(v.iter().map(|x| x / n).collect());
            if basis.len() == dim {
                break;
            }
        }
    }
    basis.len()
}

fn check_polytope(poly: &ValuePolytope, points: &[Vec<f64>]) -> Result<(), String> {
    for p in points {
        if !geometry::contains(poly, p, HULL_TOL) {
            return Err(format!("input point {p:?} outside the hull"));
        }
    }
    for v in &poly.vertices {
        if !points.iter().any(|p| p == v) {
            return Err(format!("vertex {v:?} is not an input point"));
        }
        let tight: Vec<&[f64]> = poly
            .h
            .iter()
            .zip(&poly.b)
            .filter(|(row, &b)| (dot(row, v) - b).abs() <= TIGHT_TOL)
            .map(|(row, _)| row.as_slice())
            .collect();
        if rank(&tight, poly.dimension) < poly.dimension {
            return Err(format!("vertex {v:?} is not extreme"));
        }
    }
    poly.check_consistency(TIGHT_TOL)
}

fn same_set(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    let sorted = |s: &[Vec<f64>]| {
        let mut s = s.to_vec();
        s.sort_by(|x, y| x.iter().zip(y).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        s
    };
    a.len() == b.len() && sorted(a) == sorted(b)
}

/// Containment, minimality and idempotence of the planar hull.
pub fn check_hull_2d(points: &[Point2]) -> Result<(), String> {
    let poly = ValuePolytope::from_points_2d(points, owner());
    let input: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    check_polytope(&poly, &input)?;
    let hull = geometry::convex_hull_2d(points);
    let k = hull.len();
    if k >= 3 {
        for i in 0..k {
            let (o, a, b) = (hull[i], hull[(i + 1) % k], hull[(i + 2) % k]);
            let cross = (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
            if cross <= COLLINEAR_TOL {
                return Err(format!("hull turn at {a:?} is not strictly convex"));
            }
        }
    }
    if geometry::convex_hull_2d(&hull) != hull {
        return Err("hull of the hull differs".into());
    }
    Ok(())
}

/// Containment, minimality and idempotence of the 3D hull.
pub fn check_hull_3d(points: &[Point3]) -> Result<(), String> {
    let poly = ValuePolytope::from_points_3d(points, owner());
    let input: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    check_polytope(&poly, &input)?;
    let verts: Vec<Point3> = poly.vertices.iter().map(|v| [v[0], v[1], v[2]]).collect();
    let again = ValuePolytope::from_points_3d(&verts, owner());
    if !same_set(&again.vertices, &poly.vertices) {
        return Err("hull of the hull differs".into());
    }
    Ok(())
}

/// Small integer programs, a mix of feasible, infeasible and unbounded.
pub fn random_int_program(rng: &mut impl Rng) -> IntProgram {
    let n = rng.random_range(1..=5);
    let m = rng.random_range(1..=5);
    let coeff = |rng: &mut dyn rand::RngCore| rng.random_range(-3..=3i64);
    let rows = (0..m)
        .map(|_| {
            let a = (0..n).map(|_| coeff(rng)).collect();
            let rel = match rng.random_range(0..4) {
                0 => Rel::Ge,
                1 => Rel::Eq,
                _ => Rel::Le,
            };
            (a, rel, rng.random_range(-4..=10i64))
        })
        .collect();
    IntProgram {
        num_vars: n,
        maximize: rng.random_bool(0.5),
        c: (0..n).map(|_| coeff(rng)).collect(),
        rows,
        upper: (0..n).map(|_| rng.random_bool(0.5).then(|| rng.random_range(0..=5))).collect(),
    }
}

pub fn to_linear_program(p: &IntProgram) -> LinearProgram {
    let mut lp = LinearProgram::new(p.num_vars);
    for (j, u) in p.upper.iter().enumerate() {
        if let Some(u) = u {
            lp.set_bounds(j, 0.0, *u as f64);
        }
    }
    for (a, rel, b) in &p.rows {
        let rel = match rel {
            Rel::Le => Relation::Le,
            Rel::Eq => Relation::Eq,
            Rel::Ge => Relation::Ge,
        };
        lp.add_constraint(a.iter().enumerate().map(|(j, &c)| (j, c as f64)).collect(), rel, *b as f64);
    }
    let sense = if p.maximize { Sense::Maximize } else { Sense::Minimize };
    lp.set_objective(sense, p.c.iter().enumerate().map(|(j, &c)| (j, c as f64)).collect());
    lp
}

/// Status, objective and feasibility against the exact rational solve.
pub fn check_lp_against_exact(p: &IntProgram) -> Result<(), String> {
    let lp = to_linear_program(p);
    let got = lp::solve(&lp).map_err(|e| format!("solver error: {e}"))?;
    let want = p.solve_exact();
    match (&want, got.status) {
        (Outcome::Infeasible, LpStatus::Infeasible) | (Outcome::Unbounded, LpStatus::Unbounded) => Ok(()),
        (Outcome::Optimal { value, .. }, LpStatus::Optimal) => {
            let exact = crate::exact_lp::to_f64(value);
            let x = got.solution.as_deref().ok_or("optimal without a solution")?;
            let v = got.objective_value.ok_or("optimal without a value")?;
            if (v - exact).abs() > LP_OBJ_TOL * (1.0 + exact.abs()) {
                return Err(format!("objective {v} vs exact {exact}"));
            }
            let viol = lp.max_violation(x);
            if viol > LP_FEAS_TOL {
                return Err(format!("solution violates the program by {viol}"));
            }
            Ok(())
        }
        (w, s) => Err(format!("status {s:?}, exact {w:?}")),
    }
}

/// Sample means of truthful rollouts against the exact values.
pub fn check_rollout_means<P: CommitmentPolicy>(policy: &P, episodes: usize, seed: u64) -> Result<[f64; 2], String> {
    let exact = oracle::exact_policy_values(policy).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = [0.0; 2];
    let mut sq = [0.0; 2];
    for _ in 0..episodes {
        let (_, v) = rollout(policy, &DeviationPlan::Truthful, &mut rng).map_err(|e| e.to_string())?;
        for k in 0..2 {
            sum[k] += v[k];
            sq[k] += v[k] * v[k];
        }
    }
    let n = episodes as f64;
    let mut mean = [0.0; 2];
    for k in 0..2 {
        mean[k] = sum[k] / n;
        let var = (sq[k] / n - mean[k] * mean[k]).max(0.0) * n / (n - 1.0).max(1.0);
        let band = MC_SIGMAS * (var / n).sqrt() + 1e-9;
        if (mean[k] - exact[k]).abs() > band {
            return Err(format!("player {k}: mean {} vs exact {} (band {band})", mean[k], exact[k]));
        }
    }
    Ok(mean)
}
