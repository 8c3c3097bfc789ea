//! Dense phase-one simplex for small feasibility problems `A y ≤ b`, `y` free.
//!
//! Free variables are split as `y = y⁺ − y⁻`. Rows with a negative right-hand
//! side are negated and given an artificial variable; the sum of artificials
//! is minimized with Bland's rule. A positive optimum yields a Farkas
//! certificate `w ≥ 0`, `wᵀA = 0`, `wᵀb < 0` read off the final reduced costs.

const EPS: f64 = 1e-10;
const INFEASIBLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    /// A point `y` with `A y ≤ b` (up to round-off).
    Feasible(Vec<f64>),
    /// Multipliers `w ≥ 0` with `wᵀA = 0` and `wᵀb < 0`.
    Infeasible(Vec<f64>),
}

pub fn solve_feasibility(a: &[Vec<f64>], b: &[f64]) -> Feasibility {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    assert_eq!(b.len(), m, "one right-hand side per row");

    let sign: Vec<f64> = b
        .iter()
        .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let artificial_rows: Vec<usize> = (0..m).filter(|&i| sign[i] < 0.0).collect();
    if artificial_rows.is_empty() {
        return Feasibility::Feasible(vec![0.0; n]);
    }
    let k = artificial_rows.len();
    let cols = 2 * n + m + k;
    let slack = |i: usize| 2 * n + i;
    let art0 = 2 * n + m;

    // rows 0..m constraints, row m the phase-one cost row; last column is rhs
    let mut t = vec![vec![0.0; cols + 1]; m + 1];
    let mut basis = vec![0; m];
    let mut identity_col = vec![0; m];
    for i in 0..m {
        for j in 0..n {
            t[i][j] = sign[i] * a[i][j];
            t[i][n + j] = -sign[i] * a[i][j];
        }
        t[i][slack(i)] = sign[i];
        t[i][cols] = sign[i] * b[i];
        basis[i] = slack(i);
        identity_col[i] = slack(i);
    }
    let mut cost = vec![0.0; cols];
    for (r, &i) in artificial_rows.iter().enumerate() {
        let col = art0 + r;
        t[i][col] = 1.0;
        basis[i] = col;
        identity_col[i] = col;
        cost[col] = 1.0;
    }
    // reduced costs d_j = c_j − Σ_{basic rows} c_B t_ij
    for j in 0..=cols {
        let mut d = if j < cols { cost[j] } else { 0.0 };
        for &i in &artificial_rows {
            d -= t[i][j];
        }
        t[m][j] = d;
    }

    while let Some(enter) = (0..cols).find(|&j| t[m][j] < -EPS) {
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] > EPS {
                let r = t[i][cols] / t[i][enter];
                let better = match leave {
                    None => true,
                    Some(l) => r < best - EPS || (r <= best + EPS && basis[i] < basis[l]),
                };
                if better {
                    best = r;
                    leave = Some(i);
                }
            }
        }
        // the phase-one objective is bounded below by zero, so some row blocks the step
        let Some(row) = leave else { break };
        pivot(&mut t, row, enter);
        basis[row] = enter;
    }

    let objective = -t[m][cols];
    if objective > INFEASIBLE_TOL {
        // π_i = c_j − d_j for the column that started as e_i; w = −σ π
        let w = (0..m)
            .map(|i| {
                let j = identity_col[i];
                let pi = cost[j] - t[m][j];
                (-sign[i] * pi).max(0.0)
            })
            .collect();
        return Feasibility::Infeasible(w);
    }

    let mut z = vec![0.0; cols];
    for i in 0..m {
        z[basis[i]] = t[i][cols];
    }
    Feasibility::Feasible((0..n).map(|j| z[j] - z[n + j]).collect())
}

/// Drops redundant rows before calling [`solve_feasibility`]: rows with a
/// single nonzero coefficient collapse to the tightest bound per variable and
/// sign, and repeated coefficient rows keep the smallest right-hand side.
/// Certificates are mapped back onto the original rows.
pub fn solve_feasibility_presolved(a: &[Vec<f64>], b: &[f64]) -> Feasibility {
    use std::collections::HashMap;

    let n = a.first().map_or(0, Vec::len);
    // (variable, sign) -> (bound, original row, |coefficient|)
    let mut bounds: HashMap<(usize, bool), (f64, usize, f64)> = HashMap::new();
    let mut general: HashMap<Vec<u64>, (f64, usize)> = HashMap::new();
    for (i, row) in a.iter().enumerate() {
        let nonzero: Vec<usize> = (0..n).filter(|&j| row[j] != 0.0).collect();
        match nonzero.as_slice() {
            [j] => {
                let c = row[*j];
                let bound = b[i] / c.abs();
                let entry = bounds.entry((*j, c > 0.0)).or_insert((bound, i, c.abs()));
                if bound < entry.0 {
                    *entry = (bound, i, c.abs());
                }
            }
            _ => {
                let key = row.iter().map(|v| (v + 0.0).to_bits()).collect();
                let entry = general.entry(key).or_insert((b[i], i));
                if b[i] < entry.0 {
                    *entry = (b[i], i);
                }
            }
        }
    }
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut origin = Vec::new();
    let mut general: Vec<_> = general.into_values().collect();
    general.sort_by_key(|&(_, i)| i);
    for (bi, i) in general {
        rows.push(a[i].clone());
        rhs.push(bi);
        origin.push((i, 1.0));
    }
    let mut bounds: Vec<_> = bounds.into_iter().collect();
    bounds.sort_by_key(|&(key, _)| key);
    for ((j, positive), (bound, i, scale)) in bounds {
        let mut row = vec![0.0; n];
        row[j] = if positive { 1.0 } else { -1.0 };
        rows.push(row);
        rhs.push(bound);
        origin.push((i, scale));
    }
    if rows.is_empty() {
        return Feasibility::Feasible(vec![0.0; n]);
    }
    match solve_feasibility(&rows, &rhs) {
        Feasibility::Feasible(y) => Feasibility::Feasible(y),
        Feasibility::Infeasible(w) => {
            let mut full = vec![0.0; a.len()];
            for (wr, &(i, scale)) in w.iter().zip(&origin) {
                full[i] += wr / scale;
            }
            Feasibility::Infeasible(full)
        }
    }
}

fn pivot(t: &mut [Vec<f64>], row: usize, col: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let factor = r[col];
        if factor != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
        }
    }
}

/// Largest violation `max_i (A y − b)_i`, clamped at zero.
pub fn max_violation(a: &[Vec<f64>], b: &[f64], y: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(row, &bi)| row.iter().zip(y).map(|(u, v)| u * v).sum::<f64>() - bi)
        .fold(0.0, f64::max)
}

/// Checks a Farkas certificate: returns `(‖wᵀA‖∞, wᵀb)` after scaling `w`
/// to unit sum.
pub fn certificate_residuals(a: &[Vec<f64>], b: &[f64], w: &[f64]) -> (f64, f64) {
    let total: f64 = w.iter().sum();
    let scale = if total > 0.0 { 1.0 / total } else { 1.0 };
    let n = a.first().map_or(0, Vec::len);
    let mut combo = vec![0.0; n];
    for (row, &wi) in a.iter().zip(w) {
        for (c, v) in combo.iter_mut().zip(row) {
            *c += wi * scale * v;
        }
    }
    let wb: f64 = w.iter().zip(b).map(|(wi, bi)| wi * scale * bi).sum();
    (combo.iter().fold(0.0, |m, v| m.max(v.abs())), wb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivially_feasible() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(
            solve_feasibility(&a, &[1.0, 2.0]),
            Feasibility::Feasible(vec![0.0, 0.0])
        );
    }

    #[test]
    fn feasible_needs_phase_one() {
        // y ≥ 2, y ≤ 3
        let a = vec![vec![-1.0], vec![1.0]];
        let b = [-2.0, 3.0];
        match solve_feasibility(&a, &b) {
            Feasibility::Feasible(y) => assert!(max_violation(&a, &b, &y) < 1e-12, "{y:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_with_certificate() {
        // y1 + y2 ≥ 1, y1 ≤ 0, y2 ≤ 0
        let a = vec![vec![-1.0, -1.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let b = [-1.0, 0.0, 0.0];
        match solve_feasibility(&a, &b) {
            Feasibility::Infeasible(w) => {
                assert!(w.iter().all(|&v| v >= 0.0));
                let (res, wb) = certificate_residuals(&a, &b, &w);
                assert!(res < 1e-12, "{w:?}");
                assert!(wb < 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn presolve_keeps_verdicts() {
        let a = vec![
            vec![-1.0, -1.0],
            vec![2.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, -1.0],
        ];
        let b = [-1.0, 1.0, 0.0, 0.0, -0.5];
        match solve_feasibility_presolved(&a, &b) {
            Feasibility::Infeasible(w) => {
                let (res, wb) = certificate_residuals(&a, &b, &w);
                assert!(res < 1e-12 && wb < 0.0, "{w:?}");
            }
            other => panic!("{other:?}"),
        }
        let b = [-1.0, 3.0, 2.0, 0.0, -0.5];
        match solve_feasibility_presolved(&a, &b) {
            Feasibility::Feasible(y) => assert!(max_violation(&a, &b, &y) < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn free_variables_can_go_negative() {
        // y ≤ −5, y ≥ −6
        let a = vec![vec![1.0], vec![-1.0]];
        let b = [-5.0, 6.0];
        match solve_feasibility(&a, &b) {
            Feasibility::Feasible(y) => {
                assert!(max_violation(&a, &b, &y) < 1e-12 && y[0] <= -5.0 + 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }
}
