//! Generalized Gauss–Laguerre rules for the weight x^α e^{-x} on (0, ∞).
//!
//! Nodes and weights come from the Golub–Welsch eigenproblem of the
//! Jacobi matrix. Only the first component of each eigenvector is needed,
//! so the implicit QL sweep tracks a single row and costs O(n²).

use crate::chf::gamma::gamma;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LaguerreRule {
    pub alpha: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LaguerreRule {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 || alpha <= -1.0 {
            return Err(Error::Domain(format!(
                "Gauss-Laguerre rule needs n >= 1 and alpha > -1 (n = {n}, alpha = {alpha})"
            )));
        }
        let mut diag: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 + alpha + 1.0).collect();
        let mut off: Vec<f64> = (0..n)
            .map(|i| {
                let k = (i + 1) as f64;
                if i + 1 < n {
                    (k * (k + alpha)).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let mut first = vec![0.0; n];
        first[0] = 1.0;
        tridiagonal_ql(&mut diag, &mut off, &mut first)?;

        let mu0 = gamma(alpha + 1.0)?;
        let mut pairs: Vec<(f64, f64)> = diag
            .into_iter()
            .zip(first)
            .map(|(x, v)| (x, mu0 * v * v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(Self {
            alpha,
            nodes,
            weights,
        })
    }

    /// ∫₀^∞ x^α e^{-x} f(x) dx.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
/// `off[i]` couples rows i and i+1. On return `diag` holds eigenvalues and
/// `first` the first components of the matching normalized eigenvectors.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 1 {
        return Ok(());
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NonConvergence {
                    what: "tridiagonal QL",
                    iterations: iter,
                });
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let fz = first[i + 1];
                first[i + 1] = s * first[i] + c * fz;
                first[i] = c * first[i] - s * fz;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}
