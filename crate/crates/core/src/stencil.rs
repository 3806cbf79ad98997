//! Finite-difference stencils that are exact for polynomials.
//!
//! The derivative at `at` of the Lagrange interpolant through nodes `t_j` is
//! `Σ_j L_j'(at) f(t_j)`. When `f` is a polynomial of degree below the
//! number of nodes the interpolant is `f` itself, so the stencil returns the
//! exact derivative.

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Weights `L_j'(at)` of the Lagrange basis over distinct `nodes`.
pub fn lagrange_derivative_weights(nodes: &[f64], at: f64) -> Result<Vec<f64>> {
    let n = nodes.len();
    if n == 0 {
        return Err(Error::InvalidArgument("stencil needs at least one node".into()));
    }
    for i in 0..n {
        for j in i + 1..n {
            if nodes[i] == nodes[j] {
                return Err(Error::InvalidArgument(format!("duplicate stencil node {}", nodes[i])));
            }
        }
    }
    let weights = (0..n)
        .map(|j| {
            let tj = nodes[j];
            let mut acc = CompensatedSum::new();
            for l in (0..n).filter(|&l| l != j) {
                let mut term = 1.0 / (tj - nodes[l]);
                for m in (0..n).filter(|&m| m != j && m != l) {
                    term *= (at - nodes[m]) / (tj - nodes[m]);
                }
                acc.add(term);
            }
            acc.total()
        })
        .collect();
    Ok(weights)
}

/// Weights for `f'(0)` from `f(0), f(h), …, f(degree·h)`.
pub fn forward_derivative_weights(degree: usize, h: f64) -> Result<Vec<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("step {h} must be positive")));
    }
    let nodes: Vec<f64> = (0..=degree).map(|j| j as f64).collect();
    let unit = lagrange_derivative_weights(&nodes, 0.0)?;
    Ok(unit.into_iter().map(|w| w / h).collect())
}

/// Contracts a row-major tensor of shape `(w.len())^axes` with `w` along
/// every axis, innermost axis first. This is the mixed partial derivative
/// `∂^axes / ∂s_1 … ∂s_axes` at the origin when `values` holds the function
/// on the tensor grid.
pub fn mixed_partial(weights: &[f64], axes: usize, values: &[f64]) -> Result<f64> {
    let p = weights.len();
    let expected = p.checked_pow(axes as u32).unwrap_or(usize::MAX);
    if values.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "tensor has {} values, expected {p}^{axes} = {expected}",
            values.len()
        )));
    }
    let mut current = values.to_vec();
    for _ in 0..axes {
        current = current
            .chunks_exact(p)
            .map(|row| row.iter().zip(weights).map(|(v, w)| v * w).collect::<CompensatedSum>().total())
            .collect();
    }
    Ok(current[0])
}
