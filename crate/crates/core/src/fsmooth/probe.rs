//! Finite-difference smoothness probes and witness point sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

const H0: f64 = 1e-2;
const H_MIN: f64 = 1e-5;
/// Nominal convergence order of the central stencils.
pub const NOMINAL_RATE: f64 = 2.0;
/// Accepted relative shortfall of the observed rate.
pub const RATE_TOLERANCE: f64 = 0.2;
const NOISE_FACTOR: f64 = 64.0;
/// The one-sided gap must shrink by at least this factor over the ladder.
const KINK_SHRINK: f64 = 16.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderReport {
    pub order: usize,
    /// Median observed rate, worst component; `None` when the differences
    /// vanish below rounding noise.
    pub rate: Option<f64>,
    pub passes: bool,
}

/// Outcome of a smoothness probe. A probe, not a proof.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeVerdict {
    pub passes: bool,
    pub failed_order: Option<usize>,
    pub orders: Vec<OrderReport>,
}

fn steps() -> Vec<f64> {
    let mut hs = Vec::new();
    let mut h = H0;
    while h >= H_MIN {
        hs.push(h);
        h /= 2.0;
    }
    hs
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite rates"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Observed rates of a sequence of estimates at halving steps, skipping
/// differences drowned in rounding noise.
fn rates(estimates: &[f64], floors: &[f64]) -> Vec<f64> {
    let deltas: Vec<(f64, bool)> = estimates
        .windows(2)
        .zip(floors.iter().skip(1))
        .map(|(w, floor)| {
            let d = (w[0] - w[1]).abs();
            (d, d > *floor && d.is_finite())
        })
        .collect();
    deltas
        .windows(2)
        .filter(|w| w[0].1 && w[1].1)
        .map(|w| (w[0].0 / w[1].0).log2())
        .collect()
}

/// Probe derivatives of orders `1..=order` of `f` at `t0` with central
/// stencils at steps `1e-2 · 2^-j` down to `1e-5`. Each derivative passes
/// when the observed convergence rate is at least 80% of the nominal
/// second order; first derivatives must also have vanishing gap between
/// forward and backward quotients, which exposes kinks that symmetric
/// stencils cancel.
pub fn smoothness_probe<F>(f: F, t0: f64, order: usize) -> Result<ProbeVerdict>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    if !(1..=3).contains(&order) {
        return Err(Error::Unsupported(format!("probe order {order} (1 to 3 supported)")));
    }
    let hs = steps();
    let f0 = f(t0)?;
    let dim = f0.len();
    let mut samples = Vec::with_capacity(hs.len());
    let mut scale: f64 = f0.iter().fold(0.0, |m, v| m.max(v.abs()));
    for &h in &hs {
        let row = [f(t0 - 2.0 * h)?, f(t0 - h)?, f(t0 + h)?, f(t0 + 2.0 * h)?];
        for v in row.iter().flatten() {
            if !v.is_finite() {
                return Err(Error::Evaluation(format!("non-finite value near {t0}")));
            }
            scale = scale.max(v.abs());
        }
        samples.push(row);
    }
    let eps = f64::EPSILON * (scale + 1.0) * NOISE_FACTOR;
    let mut orders = Vec::with_capacity(order);
    let mut failed = None;
    for k in 1..=order {
        let weight = [1.0, 4.0, 6.0][k - 1];
        let floors: Vec<f64> = hs.iter().map(|h| weight * eps / h.powi(k as i32)).collect();
        let mut worst: Option<f64> = None;
        let mut ok = true;
        for c in 0..dim {
            let est: Vec<f64> = hs
                .iter()
                .zip(&samples)
                .map(|(h, [m2, m1, p1, p2])| match k {
                    1 => (p1[c] - m1[c]) / (2.0 * h),
                    2 => (p1[c] - 2.0 * f0[c] + m1[c]) / (h * h),
                    _ => (p2[c] - 2.0 * p1[c] + 2.0 * m1[c] - m2[c]) / (2.0 * h * h * h),
                })
                .collect();
            let rs = rates(&est, &floors);
            if !rs.is_empty() {
                let r = median(rs);
                worst = Some(worst.map_or(r, |w: f64| w.min(r)));
                if r < NOMINAL_RATE * (1.0 - RATE_TOLERANCE) {
                    ok = false;
                }
            }
            if k == 1 {
                let gaps: Vec<f64> = hs
                    .iter()
                    .zip(&samples)
                    .map(|(h, [_, m1, p1, _])| ((p1[c] - f0[c]) / h - (f0[c] - m1[c]) / h).abs())
                    .collect();
                let last = gaps.len() - 1;
                let settled = gaps[last] <= floors[last] || gaps[last] * KINK_SHRINK <= gaps[0];
                if !settled {
                    ok = false;
                }
            }
        }
        orders.push(OrderReport {
            order: k,
            rate: worst,
            passes: ok,
        });
        if !ok && failed.is_none() {
            failed = Some(k);
        }
    }
    Ok(ProbeVerdict {
        passes: failed.is_none(),
        failed_order: failed,
        orders,
    })
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut k: u32, base: u32) -> f64 {
    let inv = 1.0 / f64::from(base);
    let mut out = 0.0;
    let mut scale = inv;
    while k > 0 {
        out += f64::from(k % base) * scale;
        k /= base;
        scale *= inv;
    }
    out
}

/// Eight points of a Halton sequence in `[lo, hi]^dim`, shifted by a seeded
/// random rotation.
pub fn witness_points(dim: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "at most {} witness dimensions", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (1..=8)
        .map(|k| {
            (0..dim)
                .map(|d| {
                    let u = (radical_inverse(k, PRIMES[d]) + shift[d]).fract();
                    lo + (hi - lo) * u
                })
                .collect()
        })
        .collect()
}
