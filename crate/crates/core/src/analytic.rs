//! Continuum-limit expected delivery time.
//!
//! With one uniformly placed long-range contact per node, the message landing band
//! after one hop is a first-step chain over the annuli around the target. Writing
//! `g_k` for the expected hop count from band `[(k-1)r, kr)`, the increments
//! `u_k = g_{k+1} - g_k` obey `u_k = β_k · u_{k-1}` with `β_k = 1 - α(k-1)²`,
//! `u_0 = 1`, so
//!
//! ```text
//! g_{k+1} = 1 + Σ_{j=1..k} Π_{i=1..j} β_i,     1 <= k <= k_max = ⌊R/2r - 1⌋
//! ```
//!
//! where `α = πr² / (R² - πr²)` is the chance that a long-range contact lands within
//! one hop of the target.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative guard used when flooring `R/2r - 1`, so ratios such as `R = 102r` that
/// are integral on paper but not in binary still land on the right band count.
const FLOOR_GUARD: f64 = 1e-12;

fn validate_side_range<T: Real>(side: T, range: T) -> Result<()> {
    if !(range > T::zero() && range.is_finite()) {
        return Err(Error::param("r", format!("communication range must be finite and > 0, got {range}")));
    }
    if !(side.is_finite() && side > range + range) {
        return Err(Error::param("R", format!("domain side must exceed 2r = {}, got R = {side}", range + range)));
    }
    Ok(())
}

/// `α = πr² / (R² - πr²)`: the probability a uniform long-range contact lands in `B(X_t, r)`.
pub fn alpha<T: Real>(side: T, range: T) -> Result<T> {
    validate_side_range(side, range)?;
    let disc = T::PI() * range * range;
    Ok(disc / (side * side - disc))
}

/// `⌊R/2r - 1⌋`, floored with a small relative guard against representation error.
pub fn k_max<T: Real>(side: T, range: T) -> Result<usize> {
    validate_side_range(side, range)?;
    let x = (side / (range + range)).as_f64() - 1.0;
    let guarded = x + FLOOR_GUARD * x.abs().max(1.0);
    Ok(guarded.floor().max(0.0) as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContinuumParams<T> {
    side: T,
    range: T,
    alpha: T,
    k_max: usize,
}

impl<T: Real> ContinuumParams<T> {
    pub fn new(side: T, range: T) -> Result<Self> {
        let alpha = alpha(side, range)?;
        let k_max = k_max(side, range)?;
        let params = ContinuumParams { side, range, alpha, k_max };
        // β_i > 0 up to k_max follows from π < 4; checked rather than assumed.
        if let Some(i) = (1..=k_max).find(|&i| params.beta(i) <= T::zero()) {
            return Err(Error::Invariant(format!("β_{i} = {} is not positive", params.beta(i))));
        }
        Ok(params)
    }

    pub fn side(&self) -> T {
        self.side
    }

    pub fn range(&self) -> T {
        self.range
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Largest separation free of edge effects, `R/2 - r`.
    pub fn max_separation(&self) -> T {
        self.side / T::lit(2.0) - self.range
    }

    /// `β_k = 1 - α(k-1)²`.
    pub fn beta(&self, k: usize) -> T {
        let m = T::lit(k.saturating_sub(1) as f64);
        T::one() - self.alpha * m * m
    }
}

/// One row of the exported curve: band `k` with its separation range in units of `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurveRow<T> {
    pub k: usize,
    pub d_lo: T,
    pub d_hi: T,
    pub beta: Option<T>,
    pub u: Option<T>,
    pub g: T,
}

/// The table `g_0 ..= g_{k_max+1}` together with `u_k` and `β_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeliveryCurve<T> {
    params: ContinuumParams<T>,
    g: Vec<T>,
    u: Vec<T>,
    beta: Vec<T>,
}

/// Builds the delivery table for domain side `side` and range `range`.
pub fn delivery_table<T: Real>(side: T, range: T) -> Result<DeliveryCurve<T>> {
    DeliveryCurve::new(ContinuumParams::new(side, range)?)
}

impl<T: Real> DeliveryCurve<T> {
    pub fn new(params: ContinuumParams<T>) -> Result<Self> {
        let k_max = params.k_max();
        let beta: Vec<T> = (1..=k_max).map(|i| params.beta(i)).collect();

        let mut u = Vec::with_capacity(k_max + 1);
        u.push(T::one());
        for b in &beta {
            let prev = *u.last().expect("u_0 present");
            u.push(*b * prev);
        }

        let mut g = Vec::with_capacity(k_max + 2);
        g.push(T::zero());
        g.push(T::one());
        let mut partial = T::zero();
        for uk in &u[1..] {
            partial = partial + *uk;
            g.push(T::one() + partial);
        }

        Ok(DeliveryCurve { params, g, u, beta })
    }

    pub fn params(&self) -> &ContinuumParams<T> {
        &self.params
    }

    pub fn k_max(&self) -> usize {
        self.params.k_max()
    }

    /// `g_0 ..= g_{k_max+1}`.
    pub fn g(&self) -> &[T] {
        &self.g
    }

    /// `u_0 ..= u_{k_max}`.
    pub fn u(&self) -> &[T] {
        &self.u
    }

    /// `β_1 ..= β_{k_max}` (index 0 holds `β_1`).
    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    /// The saturated value `g_{k_max+1}` used on the outermost band.
    pub fn plateau(&self) -> T {
        *self.g.last().expect("g has at least two entries")
    }

    /// Expected hop count at separation `d` (same unit as `r`).
    pub fn g_of_d(&self, d: T) -> Result<T> {
        let max = self.params.max_separation();
        if !(d >= T::zero() && d <= max) {
            return Err(Error::EdgeEffect { d: d.as_f64(), max: max.as_f64() });
        }
        if d == T::zero() {
            return Ok(T::zero());
        }
        // d in [(k-1)r, kr) maps to g_k; everything from k_max·r on is capped.
        let band = (d / self.params.range()).floor().to_usize().unwrap_or(usize::MAX);
        let k = band.saturating_add(1).min(self.k_max() + 1);
        Ok(self.g[k])
    }

    /// Rows `k = 0 ..= k_max + 1`, separations in units of `r`.
    pub fn rows(&self) -> Vec<CurveRow<T>> {
        let k_max = self.k_max();
        let top = self.params.max_separation() / self.params.range();
        (0..=k_max + 1)
            .map(|k| {
                let (d_lo, d_hi) = match k {
                    0 => (T::zero(), T::zero()),
                    _ if k == k_max + 1 => (T::lit(k_max as f64), top),
                    _ => (T::lit((k - 1) as f64), T::lit(k as f64)),
                };
                CurveRow {
                    k,
                    d_lo,
                    d_hi,
                    beta: (1..=k_max).contains(&k).then(|| self.beta[k - 1]),
                    u: self.u.get(k).copied(),
                    g: self.g[k],
                }
            })
            .collect()
    }
}

pub const CURVE_CSV_HEADER: &str = "k,d_lo/r,d_hi/r,beta_k,u_k,g_k";

/// CSV export of the curve. Undefined `β_k` / `u_k` cells are left empty.
pub fn curve_csv<T: Real>(curve: &DeliveryCurve<T>) -> String {
    let mut out = String::with_capacity(64 * (curve.k_max() + 3));
    out.push_str(CURVE_CSV_HEADER);
    out.push('\n');
    let opt = |v: Option<T>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in curve.rows() {
        let _ = writeln!(out, "{},{},{},{},{},{}", row.k, row.d_lo, row.d_hi, opt(row.beta), opt(row.u), row.g);
    }
    out
}

/// Delivery time without long-range contacts: `0` if `d = 0`, else `⌊d/r⌋ + 1`.
pub fn no_lrc_delivery_time<T: Real>(d: T, range: T) -> Result<u64> {
    if !(range > T::zero() && range.is_finite()) {
        return Err(Error::param("r", format!("communication range must be finite and > 0, got {range}")));
    }
    if !(d >= T::zero() && d.is_finite()) {
        return Err(Error::param("d", format!("separation must be finite and >= 0, got {d}")));
    }
    if d == T::zero() {
        return Ok(0);
    }
    Ok((d / range).floor().to_u64().unwrap_or(u64::MAX).saturating_add(1))
}
