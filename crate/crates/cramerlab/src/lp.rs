//! Dense two-phase simplex for the convex-membership feasibility system
//! sum_i w_i X_i = x, sum_i w_i = 1, w >= 0. Bland's rule, so it cannot
//! cycle; slow and simple on purpose, it is the independent oracle the
//! min-norm membership solver is validated against, and its fallback.

/// Outcome of the feasibility solve. Infeasible carries a Farkas vector
/// y of length n+1 with <y, (X_i, 1)> <= 0 for every generator and
/// <y, (x, 1)> = violation > 0, i.e. a separating functional.
pub(crate) enum LpFeasibility {
    Feasible { weights: Vec<f64> },
    Infeasible { farkas: Vec<f64>, violation: f64 },
}

const PIVOT_EPS: f64 = 1e-11;

/// Decides whether x lies in the convex hull of the rows of `points`
/// (flat row-major, `count` rows by `dim`).
pub(crate) fn convex_membership(points: &[f64], dim: usize, x: &[f64]) -> LpFeasibility {
    let count = points.len() / dim;
    let m = dim + 1;
    let cols = count + m;
    // tableau rows 0..m are constraints, row m is the phase-1 cost;
    // column layout: count real columns, m artificials, then the rhs
    let width = cols + 1;
    let mut t = vec![0.0; (m + 1) * width];
    let mut flip = vec![1.0; m];
    for r in 0..m {
        let b = if r < dim { x[r] } else { 1.0 };
        if b < 0.0 {
            flip[r] = -1.0;
        }
    }
    for j in 0..count {
        for r in 0..dim {
            t[r * width + j] = flip[r] * points[j * dim + r];
        }
        t[dim * width + j] = flip[dim];
    }
    for r in 0..m {
        t[r * width + count + r] = 1.0;
        let b = if r < dim { x[r] } else { 1.0 };
        t[r * width + cols] = flip[r] * b;
    }
    // phase-1 reduced costs: c_j - sum of constraint rows for real columns
    for j in 0..cols + 1 {
        let mut s = 0.0;
        for r in 0..m {
            s += t[r * width + j];
        }
        let c = if j >= count && j < cols { 1.0 } else { 0.0 };
        t[m * width + j] = c - s;
    }
    let mut basis: Vec<usize> = (count..cols).collect();

    loop {
        // Bland: entering column is the smallest index with negative cost
        let mut enter = None;
        for j in 0..cols {
            if t[m * width + j] < -PIVOT_EPS {
                enter = Some(j);
                break;
            }
        }
        let Some(e) = enter else { break };
        // ratio test, ties to the smallest basis index
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for r in 0..m {
            let a = t[r * width + e];
            if a > PIVOT_EPS {
                let ratio = t[r * width + cols] / a;
                let better = ratio < best - PIVOT_EPS
                    || (ratio < best + PIVOT_EPS
                        && leave.is_some_and(|l| basis[r] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(r);
                }
            }
        }
        let Some(l) = leave else {
            // phase-1 objective is bounded below by 0, so this cannot
            // happen with consistent data; stop rather than loop
            break;
        };
        pivot(&mut t, width, m, l, e);
        basis[l] = e;
    }

    let objective = -t[m * width + cols];
    let scale = 1.0 + x.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
    if objective <= 1e-9 * scale {
        let mut weights = vec![0.0; count];
        for (r, &b) in basis.iter().enumerate() {
            if b < count {
                weights[b] = t[r * width + cols];
            }
        }
        LpFeasibility::Feasible { weights }
    } else {
        // dual y_i = 1 - reduced cost of artificial i, undoing row flips
        let mut farkas = vec![0.0; m];
        for r in 0..m {
            farkas[r] = flip[r] * (1.0 - t[m * width + count + r]);
        }
        LpFeasibility::Infeasible {
            farkas,
            violation: objective,
        }
    }
}

fn pivot(t: &mut [f64], width: usize, m: usize, row: usize, col: usize) {
    let p = t[row * width + col];
    for v in t[row * width..(row + 1) * width].iter_mut() {
        *v /= p;
    }
    for r in 0..=m {
        if r == row {
            continue;
        }
        let f = t[r * width + col];
        if f != 0.0 {
            for j in 0..width {
                t[r * width + j] -= f * t[row * width + j];
            }
        }
    }
}
