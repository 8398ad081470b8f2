//! Shared numerical routines: Gaussian helpers, the Black formula and its
//! inversion, a compact Nelder–Mead search and quadrature utilities.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile.
pub fn norm_inv(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

/// Undiscounted Black (forward) call price `E[(F_T - K)+]`.
pub fn black_call(forward: f64, strike: f64, vol: f64, maturity: f64) -> f64 {
    let st = vol * maturity.sqrt();
    if st <= 0.0 {
        return (forward - strike).max(0.0);
    }
    if strike <= 0.0 {
        return forward - strike;
    }
    let d1 = ((forward / strike).ln() + 0.5 * st * st) / st;
    forward * norm_cdf(d1) - strike * norm_cdf(d1 - st)
}

/// Undiscounted Black (forward) put price `E[(K - F_T)+]`.
pub fn black_put(forward: f64, strike: f64, vol: f64, maturity: f64) -> f64 {
    black_call(forward, strike, vol, maturity) - (forward - strike)
}

/// Implied Black volatility from an undiscounted call price.
///
/// Bisection bracket followed by Newton polish; the price must lie between
/// intrinsic and the forward.
pub fn implied_vol_black(price: f64, forward: f64, strike: f64, maturity: f64) -> Result<f64> {
    let intrinsic = (forward - strike).max(0.0);
    if !(price.is_finite() && forward > 0.0 && strike > 0.0 && maturity > 0.0) {
        return Err(Error::Numerical(format!(
            "implied vol inputs out of range: price={price}, F={forward}, K={strike}, T={maturity}"
        )));
    }
    if price < intrinsic - 1e-12 * forward || price > forward {
        return Err(Error::Numerical(format!(
            "call price {price} outside [{intrinsic}, {forward}] at K={strike}"
        )));
    }
    let (mut lo, mut hi) = (1e-9, 5.0);
    if black_call(forward, strike, hi, maturity) < price {
        return Err(Error::Numerical(format!(
            "price {price} above the vol bracket cap at K={strike}"
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if black_call(forward, strike, mid, maturity) < price {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut vol = 0.5 * (lo + hi);
    // Newton polish: vega = F * phi(d1) * sqrt(T)
    for _ in 0..8 {
        let st = vol * maturity.sqrt();
        let d1 = ((forward / strike).ln() + 0.5 * st * st) / st;
        let vega = forward * norm_pdf(d1) * maturity.sqrt();
        if vega < 1e-14 * forward {
            break;
        }
        let diff = black_call(forward, strike, vol, maturity) - price;
        let step = diff / vega;
        vol = (vol - step).clamp(lo * 0.5, hi * 2.0);
        if step.abs() < 1e-14 {
            break;
        }
    }
    Ok(vol)
}

/// Trapezoid rule over an irregular grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0)
}

/// Result of a Nelder–Mead minimization.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fmin: f64,
    pub iterations: usize,
}

/// Derivative-free simplex minimization (Nelder–Mead with standard
/// reflection/expansion/contraction coefficients and a shrink fallback).
///
/// `scale` sets the initial simplex edge per coordinate. Deterministic for
/// a fixed starting point.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: &[f64],
    max_iter: usize,
    f_tol: f64,
) -> NelderMeadResult {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += scale[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        // Order simplex by value.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        if (values[worst] - values[best]).abs() <= f_tol * (1.0 + values[best].abs()) {
            break;
        }

        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for j in 0..n {
                centroid[j] += simplex[i][j] / n as f64;
            }
        }

        let reflect: Vec<f64> = (0..n)
            .map(|j| centroid[j] + alpha * (centroid[j] - simplex[worst][j]))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < values[best] {
            let expand: Vec<f64> = (0..n)
                .map(|j| centroid[j] + gamma * (reflect[j] - centroid[j]))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
        } else if f_reflect < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|j| centroid[j] + rho * (simplex[worst][j] - centroid[j]))
                .collect();
            let f_contract = f(&contract);
            if f_contract < values[worst] {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                let best_point = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for j in 0..n {
                        simplex[i][j] = best_point[j] + sigma * (simplex[i][j] - best_point[j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    NelderMeadResult {
        x: simplex[best].clone(),
        fmin: values[best],
        iterations,
    }
}
