//! Independent checks of the forward map.
//!
//! The spectral oracle solves the concentric two-phase disk exactly:
//! conductivity `k` on `r < rho` and 1 on `rho < r < 1`. Separation of
//! variables gives `Lambda e^{in phi} = lambda_|n| e^{in phi}` with
//!
//! ```text
//! lambda_n = n (1 - c_n) / (1 + c_n),  c_n = eta rho^(2n),  eta = (1 - k) / (1 + k).
//! ```
//!
//! (Outer solution `A r^n + B r^-n`, inner `C r^n`; continuity of `u` and of
//! the flux at `rho` give `B / A = -eta rho^(2n)`.)

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{ForwardModel, SensitivityTensor};
use crate::error::{EitError, Result};
use crate::geometry::{Arc, ElectrodeSet};

/// Oracle value with a rigorous bound on the neglected tail `n > n_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEntry {
    pub value: f64,
    pub tail_bound: f64,
}

fn check_inputs(rho: f64, k: f64, n_max: usize) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(EitError::InvalidInput(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(EitError::InvalidInput(format!("inner conductivity k must be > 0, got {k}")));
    }
    if n_max < 16 {
        return Err(EitError::InvalidInput(format!("n_max must be >= 16, got {n_max}")));
    }
    Ok(())
}

/// `lambda_n` of the concentric disk.
pub fn transmission_eigenvalue(rho: f64, k: f64, n: usize) -> f64 {
    let eta = (1.0 - k) / (1.0 + k);
    let c = eta * rho.powi(2 * n as i32);
    n as f64 * (1.0 - c) / (1.0 + c)
}

/// `d lambda_n / d k`.
fn transmission_eigenvalue_dk(rho: f64, k: f64, n: usize) -> f64 {
    let eta = (1.0 - k) / (1.0 + k);
    let r = rho.powi(2 * n as i32);
    let c = eta * r;
    4.0 * n as f64 * r / ((1.0 + c).powi(2) * (1.0 + k).powi(2))
}

/// Real and imaginary part of `(1 / 2 pi) int_a^b e^{-i n phi} d phi`.
fn fourier(arc: &Arc, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let (a, b) = (arc.start, arc.end);
    let s = 1.0 / (2.0 * PI * nf);
    (s * ((nf * b).sin() - (nf * a).sin()), s * ((nf * b).cos() - (nf * a).cos()))
}

/// `(|J_i||J_j|)^(-1/2) 4 pi sum_{n=1}^{n_max} w_n Re(g_i(n) conj(g_j(n)))`.
fn modal_sum(arc_i: &Arc, arc_j: &Arc, n_max: usize, weight: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for n in 1..=n_max {
        let (ri, ii) = fourier(arc_i, n);
        let (rj, ij) = fourier(arc_j, n);
        acc += weight(n) * (ri * rj + ii * ij);
    }
    4.0 * PI * acc / (arc_i.measure() * arc_j.measure()).sqrt()
}

fn geometric_tail(rho: f64, n_max: usize) -> f64 {
    let next = (n_max + 1) as f64;
    rho.powi(2 * (n_max as i32 + 1)) / (next * (1.0 - rho * rho))
}

/// `<(Lambda_k - Lambda_1) 1_{J_i}, 1_{J_j}>`, normalised, for the concentric disk.
pub fn spectral_oracle_entry(rho: f64, k: f64, arc_i: &Arc, arc_j: &Arc, n_max: usize) -> Result<OracleEntry> {
    check_inputs(rho, k, n_max)?;
    let value = modal_sum(arc_i, arc_j, n_max, |n| transmission_eigenvalue(rho, k, n) - n as f64);
    let eta = ((1.0 - k) / (1.0 + k)).abs();
    let norm = (arc_i.measure() * arc_j.measure()).sqrt();
    let tail_bound = 8.0 * eta / (PI * (1.0 - eta)) * geometric_tail(rho, n_max) / norm;
    Ok(OracleEntry { value, tail_bound })
}

/// Derivative of [`spectral_oracle_entry`] with respect to `k`.
pub fn spectral_oracle_sensitivity_entry(
    rho: f64,
    k: f64,
    arc_i: &Arc,
    arc_j: &Arc,
    n_max: usize,
) -> Result<OracleEntry> {
    check_inputs(rho, k, n_max)?;
    let value = modal_sum(arc_i, arc_j, n_max, |n| transmission_eigenvalue_dk(rho, k, n));
    let eta = ((1.0 - k) / (1.0 + k)).abs();
    let norm = (arc_i.measure() * arc_j.measure()).sqrt();
    let tail_bound = 16.0 / (PI * (1.0 - eta).powi(2) * (1.0 + k).powi(2)) * geometric_tail(rho, n_max) / norm;
    Ok(OracleEntry { value, tail_bound })
}

fn oracle_matrix(
    electrodes: &ElectrodeSet,
    entry: impl Fn(&Arc, &Arc) -> Result<OracleEntry>,
) -> Result<(DMatrix<f64>, f64)> {
    let m = electrodes.len();
    let mut g = DMatrix::zeros(m, m);
    let mut tail: f64 = 0.0;
    for i in 0..m {
        for j in i..m {
            let e = entry(&electrodes.arcs[i], &electrodes.arcs[j])?;
            g[(i, j)] = e.value;
            g[(j, i)] = e.value;
            tail = tail.max(e.tail_bound);
        }
    }
    Ok((g, tail))
}

/// Full oracle matrix and the largest entrywise tail bound.
pub fn spectral_oracle_matrix(rho: f64, k: f64, electrodes: &ElectrodeSet, n_max: usize) -> Result<(DMatrix<f64>, f64)> {
    oracle_matrix(electrodes, |a, b| spectral_oracle_entry(rho, k, a, b, n_max))
}

pub fn spectral_oracle_sensitivity_matrix(
    rho: f64,
    k: f64,
    electrodes: &ElectrodeSet,
    n_max: usize,
) -> Result<(DMatrix<f64>, f64)> {
    oracle_matrix(electrodes, |a, b| spectral_oracle_sensitivity_entry(rho, k, a, b, n_max))
}

/// Central differences `(G(theta + s e_k) - G(theta - s e_k)) / 2s`.
pub fn fd_sensitivity(model: &dyn ForwardModel, theta: &[f64], step: f64) -> Result<SensitivityTensor> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(EitError::InvalidInput(format!("finite-difference step must be > 0, got {step}")));
    }
    let space = model.space();
    space.check(theta)?;
    let mut slices = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[k] += step;
        minus[k] -= step;
        if !space.contains(&plus) || !space.contains(&minus) {
            return Err(EitError::InvalidInput(format!(
                "finite-difference step {step} leaves the parameter box in coordinate {k}"
            )));
        }
        let gp = model.forward_matrix(&plus)?.g;
        let gm = model.forward_matrix(&minus)?.g;
        slices.push((gp - gm) / (2.0 * step));
    }
    Ok(SensitivityTensor { slices, theta: theta.to_vec() })
}
