//! Exact linear algebra for parameter recovery: splitting expressions into
//! affine parts and solving by matching monomial coefficients.

use std::collections::BTreeSet;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::expr::{Expr, Rational, Symbol};

/// `e = offset + Σ_A vars^A · cols[A]`, per expression. `None` when some
/// expression has degree above one in `vars`.
pub(crate) fn affine_split(exprs: &[Expr], vars: &[Symbol]) -> Result<Option<(Vec<Expr>, Vec<Vec<Expr>>)>> {
    let mut offsets = Vec::with_capacity(exprs.len());
    let mut cols = Vec::with_capacity(exprs.len());
    for e in exprs {
        let coeffs = e
            .coefficients(vars)
            .map_err(|a| Error::Unsupported(format!("parameters inside `{a}`")))?;
        let mut offset = Expr::zero();
        let mut row = vec![Expr::zero(); vars.len()];
        for (key, c) in coeffs {
            match key.iter().sum::<u32>() {
                0 => offset = c,
                1 => row[key.iter().position(|&k| k == 1).expect("degree one")] = c,
                _ => return Ok(None),
            }
        }
        offsets.push(offset);
        cols.push(row);
    }
    Ok(Some((offsets, cols)))
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Solution {
    Unique(Vec<Expr>),
    NotInImage,
    /// The columns are linearly dependent.
    Singular,
}

/// Solve `Σ_A v^A cols[a][A] = rhs[a]` for `v` by matching coefficients of
/// monomials in `vars`. Column coefficients must be rational; the right-hand
/// side may be symbolic.
pub(crate) fn solve_coefficients(cols: &[Vec<Expr>], rhs: &[Expr], vars: &[Symbol], n: usize) -> Result<Solution> {
    let expand = |e: &Expr| {
        e.coefficients(vars)
            .map_err(|a| Error::Unsupported(format!("`{a}` is not polynomial in the fibre")))
    };
    let mut rows: Vec<(Vec<Rational>, Expr)> = Vec::new();
    for (a, r) in rhs.iter().enumerate() {
        let rhs_c = expand(r)?;
        let col_c = cols[a].iter().map(expand).collect::<Result<Vec<_>>>()?;
        let mut keys: BTreeSet<Vec<u32>> = rhs_c.keys().cloned().collect();
        for c in &col_c {
            keys.extend(c.keys().cloned());
        }
        for key in keys {
            let mut row = Vec::with_capacity(n);
            for c in &col_c {
                let v = c.get(&key).cloned().unwrap_or_default();
                row.push(v.as_constant().ok_or_else(|| {
                    Error::Unsupported(format!("non-constant parameter coefficient `{v}`"))
                })?);
            }
            rows.push((row, rhs_c.get(&key).cloned().unwrap_or_default()));
        }
    }
    let mut pivot_row = 0;
    let mut pivots = Vec::new();
    for col in 0..n {
        let Some(p) = (pivot_row..rows.len()).find(|&r| !rows[r].0[col].is_zero()) else {
            continue;
        };
        rows.swap(pivot_row, p);
        let inv = Rational::one() / rows[pivot_row].0[col].clone();
        let (row, rhs) = &mut rows[pivot_row];
        for v in row.iter_mut() {
            *v *= inv.clone();
        }
        *rhs = rhs.scale(&inv);
        let (prow, prhs) = rows[pivot_row].clone();
        for (r, (row, rhs)) in rows.iter_mut().enumerate() {
            if r == pivot_row || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (v, pv) in row.iter_mut().zip(&prow) {
                *v -= f.clone() * pv;
            }
            *rhs = &*rhs - &prhs.scale(&f);
        }
        pivots.push(col);
        pivot_row += 1;
    }
    if rows[pivot_row..].iter().any(|(_, r)| !r.is_zero()) {
        return Ok(Solution::NotInImage);
    }
    if pivots.len() < n {
        return Ok(Solution::Singular);
    }
    Ok(Solution::Unique(rows[..n].iter().map(|(_, r)| r.clone()).collect()))
}
