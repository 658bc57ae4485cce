//! Exact-rational linear feasibility.
//!
//! Phase-one simplex with Bland's anti-cycling rule over `BigRational`, for
//! systems `Ax = b, x >= 0`. Infeasibility comes with a Farkas certificate
//! `y` with `y^T A <= 0` componentwise and `y^T b > 0`, verified before it is
//! returned. A small Gaussian-elimination solver handles the sign-free case.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone)]
pub struct LpRow {
    pub label: String,
    pub coeffs: Vec<BigRational>,
    pub rhs: BigRational,
}

#[derive(Debug, Clone)]
pub struct DualCertificate {
    /// One multiplier per input row, in input order.
    pub rows: Vec<(String, BigRational)>,
    /// `y^T b`, strictly positive.
    pub gap: BigRational,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Feasible(Vec<BigRational>),
    Infeasible(DualCertificate),
}

/// Decides feasibility of `Ax = b, x >= 0`.
pub fn solve_feasibility(num_vars: usize, rows: &[LpRow]) -> LpOutcome {
    let m = rows.len();
    let n = num_vars;
    // rows normalized to nonnegative rhs; remember flips for the certificate
    let mut flipped = vec![false; m];
    // tableau: m rows of [A | I | b], objective row last
    let mut t: Vec<Vec<BigRational>> = Vec::with_capacity(m + 1);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.coeffs.len(), n, "row width mismatch");
        let flip = row.rhs.is_negative();
        flipped[i] = flip;
        let sign = if flip { -BigRational::one() } else { BigRational::one() };
        let mut r: Vec<BigRational> = row.coeffs.iter().map(|c| c * &sign).collect();
        for j in 0..m {
            r.push(if j == i { BigRational::one() } else { BigRational::zero() });
        }
        r.push(&row.rhs * &sign);
        t.push(r);
    }
    // objective: minimize the artificial total; reduced costs start at
    // -(column sums), artificial columns at zero, value at -(rhs sum)
    let width = n + m + 1;
    let mut obj = vec![BigRational::zero(); width];
    for r in &t {
        for (j, v) in r.iter().enumerate() {
            if j < n || j == width - 1 {
                obj[j] -= v;
            }
        }
    }
    t.push(obj);

    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        // Bland: entering column is the lowest-indexed negative reduced cost
        let enter = (0..n + m).find(|&j| t[m][j].is_negative());
        let Some(enter) = enter else { break };
        // ratio test; ties broken by smallest basic variable
        let mut leave: Option<usize> = None;
        let mut best: Option<BigRational> = None;
        for i in 0..m {
            if t[i][enter].is_positive() {
                let ratio = &t[i][width - 1] / &t[i][enter];
                let better = match &best {
                    None => true,
                    Some(b) => ratio < *b || (ratio == *b && basis[i] < basis[leave.unwrap()]),
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
        }
        let leave = leave.expect("phase-one objective is bounded below");
        pivot(&mut t, leave, enter, width);
        basis[leave] = enter;
    }

    let objective = -t[m][width - 1].clone();
    if objective.is_positive() {
        // Farkas multipliers from the artificial reduced costs: y_i = 1 - rc_i,
        // with the sign flip undone per row.
        let mut y = Vec::with_capacity(m);
        for (i, row) in rows.iter().enumerate() {
            let mut yi = BigRational::one() - &t[m][n + i];
            if flipped[i] {
                yi = -yi;
            }
            y.push((row.label.clone(), yi));
        }
        // verify before handing it out
        for j in 0..n {
            let dot: BigRational = rows
                .iter()
                .zip(&y)
                .map(|(r, (_, yi))| &r.coeffs[j] * yi)
                .sum();
            debug_assert!(!dot.is_positive(), "certificate fails on column {j}");
        }
        let gap: BigRational = rows.iter().zip(&y).map(|(r, (_, yi))| &r.rhs * yi).sum();
        debug_assert!(gap.is_positive(), "certificate gap must be positive");
        return LpOutcome::Infeasible(DualCertificate { rows: y, gap });
    }

    // drive leftover artificials out of the basis where a real pivot exists
    for i in 0..m {
        if basis[i] >= n && !t[i][width - 1].is_zero() {
            unreachable!("zero objective leaves artificials at value zero");
        }
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| !t[i][j].is_zero()) {
                pivot(&mut t, i, j, width);
                basis[i] = j;
            }
            // otherwise the row is redundant; the artificial stays basic at zero
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[i][width - 1].clone();
        }
    }
    debug_assert!(rows.iter().all(|r| {
        let lhs: BigRational = r.coeffs.iter().zip(&x).map(|(c, v)| c * v).sum();
        lhs == r.rhs
    }));
    LpOutcome::Feasible(x)
}

fn pivot(t: &mut [Vec<BigRational>], row: usize, col: usize, width: usize) {
    let inv = t[row][col].clone();
    for v in t[row].iter_mut() {
        *v /= &inv;
    }
    for i in 0..t.len() {
        if i != row && !t[i][col].is_zero() {
            let factor = t[i][col].clone();
            for j in 0..width {
                let delta = &t[row][j] * &factor;
                t[i][j] -= delta;
            }
        }
    }
}

/// As [`solve_linear`], but inconsistency returns the row combination that
/// derives `0 = gap` with a positive gap.
pub fn solve_linear_certified(
    num_vars: usize,
    rows: &[LpRow],
) -> std::result::Result<Vec<BigRational>, DualCertificate> {
    let m = rows.len();
    // track multipliers by augmenting with the identity
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut v = r.coeffs.clone();
            for j in 0..m {
                v.push(if j == i { BigRational::one() } else { BigRational::zero() });
            }
            v.push(r.rhs.clone());
            v
        })
        .collect();
    let width = num_vars + m + 1;
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0;
    for col in 0..num_vars {
        if row == m {
            break;
        }
        let Some(p) = (row..m).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        let inv = a[row][col].clone();
        for v in a[row].iter_mut() {
            *v /= &inv;
        }
        for i in 0..m {
            if i != row && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for j in 0..width {
                    let delta = &a[row][j] * &f;
                    a[i][j] -= delta;
                }
            }
        }
        pivots.push((row, col));
        row += 1;
    }
    for r in a.iter().skip(row) {
        let gap = r[width - 1].clone();
        if !gap.is_zero() {
            let sign = if gap.is_negative() { -BigRational::one() } else { BigRational::one() };
            let y: Vec<(String, BigRational)> = rows
                .iter()
                .enumerate()
                .map(|(i, lr)| (lr.label.clone(), &r[num_vars + i] * &sign))
                .collect();
            return Err(DualCertificate {
                rows: y,
                gap: gap * sign,
            });
        }
    }
    let mut x = vec![BigRational::zero(); num_vars];
    for (r, c) in pivots {
        x[c] = a[r][width - 1].clone();
    }
    Ok(x)
}

/// Solves `Ax = b` over the rationals with no sign constraint; free variables
/// are set to zero. Returns `None` when the system is inconsistent.
pub fn solve_linear(num_vars: usize, rows: &[LpRow]) -> Option<Vec<BigRational>> {
    let m = rows.len();
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| {
            let mut v = r.coeffs.clone();
            v.push(r.rhs.clone());
            v
        })
        .collect();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0;
    for col in 0..num_vars {
        if row == m {
            break;
        }
        let Some(p) = (row..m).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        let inv = a[row][col].clone();
        for v in a[row].iter_mut() {
            *v /= &inv;
        }
        for i in 0..m {
            if i != row && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for j in 0..=num_vars {
                    let delta = &a[row][j] * &f;
                    a[i][j] -= delta;
                }
            }
        }
        pivots.push((row, col));
        row += 1;
    }
    for r in a.iter().skip(row) {
        if !r[num_vars].is_zero() {
            return None;
        }
    }
    let mut x = vec![BigRational::zero(); num_vars];
    for (r, c) in pivots {
        x[c] = a[r][num_vars].clone();
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(d))
    }

    fn row(label: &str, coeffs: &[(i64, i64)], rhs: (i64, i64)) -> LpRow {
        LpRow {
            label: label.into(),
            coeffs: coeffs.iter().map(|&(p, d)| q(p, d)).collect(),
            rhs: q(rhs.0, rhs.1),
        }
    }

    #[test]
    fn feasible_simplex_returns_a_solution() {
        // x0 + x1 = 1, x0 - x1 = 0 -> (1/2, 1/2)
        let rows = vec![
            row("sum", &[(1, 1), (1, 1)], (1, 1)),
            row("diff", &[(1, 1), (-1, 1)], (0, 1)),
        ];
        match solve_feasibility(2, &rows) {
            LpOutcome::Feasible(x) => {
                assert_eq!(x, vec![q(1, 2), q(1, 2)]);
            }
            LpOutcome::Infeasible(_) => panic!("system is feasible"),
        }
    }

    #[test]
    fn infeasible_simplex_returns_a_verified_certificate() {
        // x0 = 1 and x0 = 0 cannot both hold
        let rows = vec![
            row("one", &[(1, 1)], (1, 1)),
            row("zero", &[(1, 1)], (0, 1)),
        ];
        match solve_feasibility(1, &rows) {
            LpOutcome::Feasible(_) => panic!("system is infeasible"),
            LpOutcome::Infeasible(cert) => {
                assert!(cert.gap.is_positive());
                let dot: BigRational = rows
                    .iter()
                    .zip(&cert.rows)
                    .map(|(r, (_, y))| &r.coeffs[0] * y)
                    .sum();
                assert!(!dot.is_positive());
            }
        }
    }

    #[test]
    fn nonnegativity_matters() {
        // x0 - x1 = 1, x0 + x1 = 0 has the signed solution (1/2, -1/2) only
        let rows = vec![
            row("d", &[(1, 1), (-1, 1)], (1, 1)),
            row("s", &[(1, 1), (1, 1)], (0, 1)),
        ];
        assert!(matches!(solve_feasibility(2, &rows), LpOutcome::Infeasible(_)));
        let x = solve_linear(2, &rows).unwrap();
        assert_eq!(x, vec![q(1, 2), q(-1, 2)]);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let rows = vec![
            row("a", &[(1, 1), (1, 1)], (1, 1)),
            row("b", &[(2, 1), (2, 1)], (2, 1)),
        ];
        assert!(matches!(solve_feasibility(2, &rows), LpOutcome::Feasible(_)));
    }

    #[test]
    fn inconsistent_linear_system_is_detected() {
        let rows = vec![
            row("a", &[(1, 1)], (1, 1)),
            row("b", &[(2, 1)], (3, 1)),
        ];
        assert!(solve_linear(1, &rows).is_none());
    }
}
