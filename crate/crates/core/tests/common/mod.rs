//! Shared independent oracles for the property and acceptance suites.
//!
//! Everything here recomputes reference answers by some route other than the
//! library's own solve path: closed-form enumeration, lattice search over
//! the simplex, or grid refinement over a low-dimensional box.

#![allow(dead_code)]

use maxmean::data::{GroupedDataset, Prng, Sample};
use nalgebra::{DMatrix, DVector};

/// Exact minimax line fit over points `(x_i, y_i)`: minimizes
/// `max_i |w x_i + b − y_i|`.
///
/// The optimum of this linear program is attained at a basis of at most
/// three points, and for any triple the equioscillating line gives a lower
/// bound on the global value. Enumerating all triples (plus equal-x pair
/// bounds) and certifying the best candidate line against every point
/// therefore yields the exact optimum: the lower bound matching an achieved
/// feasible value is a proof of optimality. Panics if certification fails.
pub fn chebyshev_line_oracle(points: &[(f64, f64)]) -> (f64, f64, f64) {
    assert!(points.len() >= 2, "need at least two points");
    let max_abs_residual = |w: f64, b: f64| -> f64 {
        points
            .iter()
            .map(|&(x, y)| (w * x + b - y).abs())
            .fold(0.0_f64, f64::max)
    };

    let mut best: Option<(f64, f64, f64)> = None; // (value, w, b)
    let mut consider = |value: f64, w: f64, b: f64| {
        if best.is_none_or(|(v, _, _)| value > v) {
            best = Some((value, w, b));
        }
    };

    // pair bounds for duplicated x: residuals of the two points differ by a
    // constant, forcing value >= |y_i - y_j| / 2; the bisecting horizontal
    // through their midpoint achieves it for the pair alone
    let n = points.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if points[i].0 == points[j].0 {
                let value = (points[i].1 - points[j].1).abs() / 2.0;
                consider(value, 0.0, (points[i].1 + points[j].1) / 2.0);
            }
        }
    }

    // triples with distinct x: alternating-sign equioscillation
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let mut tri = [points[i], points[j], points[k]];
                tri.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let [(x1, y1), (x2, y2), (x3, y3)] = tri;
                if x1 == x2 || x2 == x3 {
                    continue; // covered by the pair bounds
                }
                // residuals (t, -t, t): equal outer residuals fix the slope
                let w = (y1 - y3) / (x1 - x3);
                let b = (y1 + y2 - w * (x1 + x2)) / 2.0;
                let t = (w * x1 + b - y1).abs();
                consider(t, w, b);
            }
        }
    }

    let (value, w, b) = best.expect("at least one candidate");
    // certificate: the best lower bound must be achieved by its own line
    let achieved = max_abs_residual(w, b);
    assert!(
        (achieved - value).abs() <= 1e-9 * value.abs().max(1.0),
        "oracle certificate failed: bound {value} vs achieved {achieved}"
    );
    (w, b, value)
}

/// Distinct points of a singleton-group 1-d dataset.
pub fn distinct_points(dataset: &GroupedDataset) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = dataset.iter_samples().map(|s| (s.x[0], s.y)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// QP objective `1/2 λ'Qλ − c'λ`.
pub fn qp_objective(q: &DMatrix<f64>, c: &DVector<f64>, lambda: &[f64]) -> f64 {
    let l = DVector::from_column_slice(lambda);
    0.5 * (q * &l).dot(&l) - c.dot(&l)
}

/// Grid search over the probability simplex by lattice pattern moves.
///
/// Starting from a vertex, repeatedly tries every transfer of mass `s`
/// between two coordinates, halving `s` once no transfer improves, until
/// `s < final_step`. All iterates stay on the lattice of step `s`, so this
/// is an exhaustive search of ever-finer simplex grids; for the convex QP
/// objective the final value is within curvature * step² of the optimum.
pub fn simplex_lattice_search(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    final_step: f64,
) -> (f64, Vec<f64>) {
    let n = c.len();
    let mut lambda = vec![0.0; n];
    let start = (0..n)
        .max_by(|&a, &b| c[a].partial_cmp(&c[b]).unwrap())
        .unwrap();
    lambda[start] = 1.0;
    let mut best = qp_objective(q, c, &lambda);
    let mut step = 0.5;
    // halve until the lattice is at least as fine as final_step
    while step * 2.0 > final_step {
        loop {
            let mut improved = false;
            for i in 0..n {
                for j in 0..n {
                    if i == j || lambda[i] < step - 1e-15 {
                        continue;
                    }
                    let mut trial = lambda.clone();
                    trial[i] -= step;
                    trial[j] += step;
                    let value = qp_objective(q, c, &trial);
                    if value < best {
                        best = value;
                        lambda = trial;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        step *= 0.5;
    }
    (best, lambda)
}

/// Literal exhaustive enumeration of the simplex grid with `divisions`
/// subdivisions per unit. Exponential in the dimension; intended for n <= 3.
pub fn simplex_enumerate(q: &DMatrix<f64>, c: &DVector<f64>, divisions: usize) -> f64 {
    let n = c.len();
    let mut lambda = vec![0.0; n];
    let mut best = f64::INFINITY;
    enumerate_compositions(divisions, n, 0, divisions, &mut lambda, &mut |lam| {
        best = best.min(qp_objective(q, c, lam));
    });
    best
}

fn enumerate_compositions(
    total: usize,
    n: usize,
    index: usize,
    remaining: usize,
    lambda: &mut Vec<f64>,
    visit: &mut impl FnMut(&[f64]),
) {
    if index == n - 1 {
        lambda[index] = remaining as f64 / total as f64;
        visit(lambda);
        return;
    }
    for k in 0..=remaining {
        lambda[index] = k as f64 / total as f64;
        enumerate_compositions(total, n, index + 1, remaining - k, lambda, visit);
    }
}

/// Objective of the regularized direction-finding problem:
/// `max_j (f_j + <G_j, d>) + 1/2 ||d||²`.
pub fn direction_objective(g: &DMatrix<f64>, f: &DVector<f64>, d: &[f64]) -> f64 {
    let dv = DVector::from_column_slice(d);
    let linearized = (g * &dv + f).max();
    linearized + 0.5 * dv.norm_squared()
}

/// Brute-force minimization of [`direction_objective`] by multilevel grid
/// refinement over the box `[-radius, radius]^n`. The objective is
/// 1-strongly convex, so the refined grid value converges to the global
/// minimum; `radius` must cover it (any radius >= max_j ||G_j|| does, since
/// the minimizer is -G'λ for simplex weights λ).
pub fn grid_min_direction(g: &DMatrix<f64>, f: &DVector<f64>, radius: f64) -> f64 {
    let dim = g.ncols();
    let points_per_axis = 13usize;
    let mut lo = vec![-radius; dim];
    let mut hi = vec![radius; dim];
    let mut best_value = f64::INFINITY;
    for _level in 0..18 {
        let mut best_point = vec![0.0; dim];
        let mut level_best = f64::INFINITY;
        let mut counters = vec![0usize; dim];
        'outer: loop {
            let point: Vec<f64> = (0..dim)
                .map(|a| {
                    lo[a] + (hi[a] - lo[a]) * counters[a] as f64 / (points_per_axis - 1) as f64
                })
                .collect();
            let value = direction_objective(g, f, &point);
            if value < level_best {
                level_best = value;
                best_point = point;
            }
            for counter in counters.iter_mut() {
                *counter += 1;
                if *counter < points_per_axis {
                    continue 'outer;
                }
                *counter = 0;
            }
            break;
        }
        best_value = best_value.min(level_best);
        for a in 0..dim {
            let span = (hi[a] - lo[a]) * 0.25;
            lo[a] = best_point[a] - span;
            hi[a] = best_point[a] + span;
        }
    }
    best_value
}

/// Random singleton-group 1-d dataset with distinct x's.
pub fn random_singleton_dataset(rng: &mut Prng, n_points: usize) -> GroupedDataset {
    let mut groups = Vec::with_capacity(n_points);
    for i in 0..n_points {
        // spread x deterministically to guarantee distinctness, jitter y
        let x = i as f64 * 0.37 + rng.uniform_open01();
        let y = rng.standard_normal() * 2.0;
        groups.push(vec![Sample::new(vec![x], y)]);
    }
    GroupedDataset::new(groups).unwrap()
}

/// Random grouped 1-d dataset with group sizes in `1..=max_group_size`.
pub fn random_grouped_dataset(
    rng: &mut Prng,
    n_groups: usize,
    max_group_size: usize,
) -> GroupedDataset {
    let mut groups = Vec::with_capacity(n_groups);
    for _ in 0..n_groups {
        let size = 1 + (rng.uniform_open01() * max_group_size as f64) as usize;
        let group: Vec<Sample> = (0..size)
            .map(|_| {
                Sample::new(
                    vec![rng.uniform_open01() * 4.0 - 2.0],
                    rng.uniform_open01() * 4.0 - 2.0,
                )
            })
            .collect();
        groups.push(group);
    }
    GroupedDataset::new(groups).unwrap()
}

/// Uniformly random unit direction via normalized Gaussians.
pub fn random_unit_direction(rng: &mut Prng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}
