//! Tensor-grid trapezoidal quadrature over a box in `R^d`, `d <= 3`.
//!
//! The integrands we care about (products and square roots of Gaussian
//! mixture densities) are smooth and decay like Gaussians, so the trapezoid
//! rule on a box spanning +-12 standard deviations converges geometrically once
//! the grid step drops below the narrowest component scale. Refinement doubles
//! the number of intervals per axis; the change between successive levels is
//! the reported error estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Minimum starting points per axis for `d = 1`. Every dimension starts from
    /// the coarsest grid whose step is at most half the narrowest standard
    /// deviation, but never fewer than the per-dimension minimum.
    pub points_1d: usize,
    pub min_points_2d: usize,
    pub min_points_3d: usize,
    /// Half-width of the integration box in component standard deviations.
    pub sigma_span: f64,
    /// Target absolute change between refinement levels.
    pub tol: f64,
    pub max_refinements: usize,
    /// Upper bound on the total number of grid nodes at any level.
    pub max_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            points_1d: 2048,
            min_points_2d: 129,
            min_points_3d: 33,
            sigma_span: 12.0,
            tol: 1e-7,
            max_refinements: 4,
            max_nodes: 1 << 24,
        }
    }
}

/// Axis-aligned integration box.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Narrowest standard deviation of any component, per axis.
    pub min_scale: Vec<f64>,
}

impl Domain {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

/// Result of integrating several functions on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrals {
    pub values: Vec<f64>,
    pub points_per_axis: usize,
}

impl QuadratureSpec {
    fn starting_points(&self, domain: &Domain) -> Result<usize> {
        let d = domain.dim();
        let min_points = match d {
            1 => self.points_1d.max(3),
            2 => self.min_points_2d,
            3 => self.min_points_3d,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "quadrature supports d <= 3, got {d}"
                )))
            }
        };
        let needed = (0..d)
            .map(|a| {
                let width = domain.upper[a] - domain.lower[a];
                (2.0 * width / domain.min_scale[a]).ceil() as usize + 1
            })
            .max()
            .unwrap_or(min_points);
        Ok(needed.max(min_points))
    }

    /// Integrates `f` over `domain`, where `f(x, out)` writes `m` integrand
    /// values at `x`. Returns the integrals at the finest level reached and the
    /// max absolute change of `score(values)` between the last two levels.
    ///
    /// `score` maps raw integrals to the quantity whose convergence matters
    /// (for Hellinger, the normalized affinity).
    pub fn integrate<F, S>(&self, domain: &Domain, m: usize, f: F, score: S) -> Result<(Integrals, f64)>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
        S: Fn(&[f64]) -> f64,
    {
        let d = domain.dim();
        let mut points = self.starting_points(domain)?;
        let mut prev_score: Option<f64> = None;
        let mut err = f64::INFINITY;
        for level in 0..=self.max_refinements {
            if level > 0 && points.checked_pow(d as u32).is_none_or(|n| n > self.max_nodes) {
                break;
            }
            let values = trapezoid(domain, points, m, &f);
            let s = score(&values);
            if let Some(p) = prev_score {
                err = (s - p).abs();
                if err <= self.tol {
                    return Ok((
                        Integrals {
                            values,
                            points_per_axis: points,
                        },
                        err,
                    ));
                }
            }
            prev_score = Some(s);
            points = 2 * (points - 1) + 1;
        }
        Err(Error::Precision {
            value: prev_score.unwrap_or(f64::NAN),
            estimate: err,
        })
    }
}

/// Trapezoid rule with `points` nodes per axis. Rows along the first axis are
/// evaluated in parallel and reduced in index order.
fn trapezoid<F>(domain: &Domain, points: usize, m: usize, f: &F) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let d = domain.dim();
    let steps: Vec<f64> = (0..d)
        .map(|a| (domain.upper[a] - domain.lower[a]) / (points - 1) as f64)
        .collect();
    let edge = |i: usize| if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
    let inner = points.pow(d as u32 - 1);
    let rows: Vec<Vec<f64>> = (0..points)
        .into_par_iter()
        .map(|i0| {
            let mut acc = vec![0.0; m];
            let mut out = vec![0.0; m];
            let mut x = vec![0.0; d];
            x[0] = domain.lower[0] + i0 as f64 * steps[0];
            for flat in 0..inner {
                let mut rest = flat;
                let mut w = edge(i0);
                for a in (1..d).rev() {
                    let i = rest % points;
                    rest /= points;
                    x[a] = domain.lower[a] + i as f64 * steps[a];
                    w *= edge(i);
                }
                f(&x, &mut out);
                for (acc, o) in acc.iter_mut().zip(&out) {
                    *acc += w * o;
                }
            }
            acc
        })
        .collect();
    let cell: f64 = steps.iter().product();
    let mut total = vec![0.0; m];
    for row in rows {
        for (t, r) in total.iter_mut().zip(row) {
            *t += r;
        }
    }
    total.iter_mut().for_each(|t| *t *= cell);
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_in_two_dims() {
        let domain = Domain {
            lower: vec![-12.0, -12.0],
            upper: vec![12.0, 12.0],
            min_scale: vec![1.0, 1.0],
        };
        let (res, err) = QuadratureSpec::default()
            .integrate(
                &domain,
                1,
                |x, out| out[0] = (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp() / (2.0 * std::f64::consts::PI),
                |v| v[0],
            )
            .unwrap();
        assert!((res.values[0] - 1.0).abs() < 1e-12);
        assert!(err <= 1e-7);
    }

    #[test]
    fn rejects_high_dimensions() {
        let domain = Domain {
            lower: vec![0.0; 4],
            upper: vec![1.0; 4],
            min_scale: vec![1.0; 4],
        };
        let r = QuadratureSpec::default().integrate(&domain, 1, |_, o| o[0] = 1.0, |v| v[0]);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }
}
