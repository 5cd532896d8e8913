use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::{LinalgError, Lu, Matrix};
use crate::Tolerances;

/// Spectral radius of a nonnegative matrix together with a nonnegative
/// eigenvector normalized to unit 1-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronResult {
    pub lambda_star: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the eigenvector was certified strictly positive (the
    /// Collatz-Wielandt bounds closed on a positive iterate).
    pub positive: bool,
}

impl PerronResult {
    /// `||X v - lambda* v||_inf`.
    pub fn residual(&self, x: &Matrix) -> f64 {
        x.mul_vec(&self.vector)
            .iter()
            .zip(&self.vector)
            .map(|(xv, v)| (xv - self.lambda_star * v).abs())
            .fold(0.0, f64::max)
    }

    fn rescaled(mut self, scale: f64) -> Self {
        self.lambda_star *= scale;
        self
    }
}

pub fn spectral_radius(x: &Matrix) -> Result<PerronResult, LinalgError> {
    spectral_radius_with(x, &Tolerances::default())
}

/// Spectral radius via the strongly connected components of the support
/// graph of `X`.
///
/// An irreducible `X` goes straight to [`iterate`]. Otherwise `lambda*` is
/// the largest root over the irreducible diagonal blocks. Power iteration on
/// the whole reducible matrix can stall when two blocks have nearly equal
/// roots, as in the block-diagonal gains of a time-varying channel. The
/// eigenvector then comes from inverse iteration just above `lambda*`, where
/// `(sigma I - X)^-1` is entrywise nonnegative.
pub fn spectral_radius_with(x: &Matrix, tol: &Tolerances) -> Result<PerronResult, LinalgError> {
    x.require_square()?;
    x.check_finite()?;
    x.check_nonnegative()?;
    let n = x.rows();
    let scale = x.max_entry();
    if scale == 0.0 {
        return Ok(PerronResult {
            lambda_star: 0.0,
            vector: vec![1.0 / n as f64; n],
            iterations: 0,
            converged: true,
            positive: false,
        });
    }
    let s = x.scaled(1.0 / scale);
    let blocks = components(&s);
    if blocks.len() == 1 {
        return Ok(iterate(&s, tol).rescaled(scale));
    }

    let (mut root, mut iterations, mut converged) = (0.0_f64, 0, true);
    for block in &blocks {
        if let [i] = block[..] {
            root = root.max(s[(i, i)]);
            continue;
        }
        let mut sub = Matrix::zeros(block.len(), block.len());
        for (a, &i) in block.iter().enumerate() {
            for (b, &j) in block.iter().enumerate() {
                sub[(a, b)] = s[(i, j)];
            }
        }
        let r = iterate(&sub, tol);
        iterations += r.iterations;
        converged &= r.converged;
        root = root.max(r.lambda_star);
    }
    if root == 0.0 {
        // Every block is a zero 1x1, so X is nilpotent.
        return Ok(iterate(&s, tol).rescaled(scale));
    }
    let vector = eigenvector_near(&s, root).unwrap_or_else(|| {
        converged = false;
        vec![1.0 / n as f64; n]
    });
    Ok(PerronResult {
        lambda_star: root * scale,
        vector,
        iterations,
        converged,
        positive: false,
    })
}

/// Strongly connected components of the graph with an edge `i -> j` for
/// every positive `x_ij`, each sorted.
fn components(x: &Matrix) -> Vec<Vec<usize>> {
    let n = x.rows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if x[(i, j)] > 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|v| v.index()).collect();
            c.sort_unstable();
            c
        })
        .collect()
}

/// Power iteration on `X + c_k I` for `X` scaled to unit maximum entry. The
/// shift `c_k` tracks the current eigenvalue estimate (never below
/// `power_min_shift`).
///
/// The shift keeps the iteration from cycling on periodic matrices, for
/// example the 2x2 `[[0, a], [b, 0]]` that every two-user channel produces.
/// Convergence is declared when the Collatz-Wielandt bounds
/// `min_i (Xv)_i / v_i <= lambda* <= max_i (Xv)_i / v_i` agree to
/// `power_rel_tol`, or, for nearly reducible inputs where those bounds close
/// slowly, when the geometric tail of the eigenvalue sequence falls below it.
fn iterate(s: &Matrix, tol: &Tolerances) -> PerronResult {
    let n = s.rows();
    let rel = tol.power_rel_tol;
    let mut v = vec![1.0 / n as f64; n];
    let mut prev_estimate: Option<f64> = None;
    let mut prev_change: Option<f64> = None;
    let mut tail_hits = 0;
    for it in 1..=tol.power_max_iter {
        let w = s.mul_vec(&v);
        let estimate: f64 = w.iter().sum();
        if estimate == 0.0 {
            // X^k 1 = 0 for a nonnegative X means X is nilpotent.
            return PerronResult {
                lambda_star: 0.0,
                vector: v,
                iterations: it,
                converged: true,
                positive: false,
            };
        }

        if v.iter().all(|&vi| vi > 0.0) {
            let (lo, hi) = w
                .iter()
                .zip(&v)
                .map(|(wi, vi)| wi / vi)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
            if hi - lo <= rel * hi {
                return PerronResult {
                    lambda_star: estimate,
                    vector: v,
                    iterations: it,
                    converged: true,
                    positive: true,
                };
            }
        }

        if let Some(prev) = prev_estimate {
            let change = (estimate - prev).abs();
            let small_tail = match prev_change {
                _ if change == 0.0 => true,
                Some(pc) if change < pc => {
                    let q = change / pc;
                    change * q / (1.0 - q) <= rel * estimate
                }
                _ => false,
            };
            tail_hits = if small_tail { tail_hits + 1 } else { 0 };
            if tail_hits >= 3 {
                return PerronResult {
                    lambda_star: estimate,
                    vector: v,
                    iterations: it,
                    converged: true,
                    positive: false,
                };
            }
            prev_change = Some(change);
        }
        prev_estimate = Some(estimate);

        let c = estimate.max(tol.power_min_shift);
        let norm = estimate + c;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = (wi + c * *vi) / norm;
        }
    }

    let iterations = tol.power_max_iter;
    if n <= 3 {
        if let Some(root) = dominant_root_small(s) {
            let vector = eigenvector_near(s, root).unwrap_or_else(|| v.clone());
            return PerronResult {
                lambda_star: root,
                vector,
                iterations,
                converged: true,
                positive: false,
            };
        }
    }
    let estimate: f64 = s.mul_vec(&v).iter().sum();
    PerronResult {
        lambda_star: estimate,
        vector: v,
        iterations,
        converged: false,
        positive: false,
    }
}

/// Coefficients `[c0, c1, .., c_{n-1}]` of `det(t I - X) = t^n + c_{n-1} t^{n-1} + .. + c0`
/// for `n <= 3`.
fn char_poly_small(x: &Matrix) -> Vec<f64> {
    match x.rows() {
        1 => vec![-x[(0, 0)]],
        2 => {
            let tr = x[(0, 0)] + x[(1, 1)];
            let det = x[(0, 0)] * x[(1, 1)] - x[(0, 1)] * x[(1, 0)];
            vec![det, -tr]
        }
        3 => {
            let tr = x[(0, 0)] + x[(1, 1)] + x[(2, 2)];
            let minor = |i: usize, j: usize| x[(i, i)] * x[(j, j)] - x[(i, j)] * x[(j, i)];
            let m2 = minor(0, 1) + minor(0, 2) + minor(1, 2);
            let det = Lu::factor(x).map(|lu| lu.determinant()).unwrap_or(0.0);
            vec![-det, m2, -tr]
        }
        _ => unreachable!("char_poly_small only handles n <= 3"),
    }
}

fn eval_monic(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(1.0, |acc, &c| acc * t + c)
}

/// Largest real root of the characteristic polynomial of a nonnegative
/// `n <= 3` matrix, bracketed on `[0, max row sum]`.
pub(crate) fn dominant_root_small(x: &Matrix) -> Option<f64> {
    let coeffs = char_poly_small(x);
    let hi = x.norm_inf();
    if hi == 0.0 {
        return Some(0.0);
    }
    const SCAN: usize = 4096;
    let mut upper = hi * (1.0 + 1e-12);
    if eval_monic(&coeffs, upper) < 0.0 {
        return None;
    }
    for k in (0..SCAN).rev() {
        let t = hi * k as f64 / SCAN as f64;
        let pt = eval_monic(&coeffs, t);
        if pt == 0.0 {
            return Some(t);
        }
        if pt < 0.0 {
            let mut lower = t;
            for _ in 0..200 {
                let mid = 0.5 * (lower + upper);
                if mid <= lower || mid >= upper {
                    break;
                }
                if eval_monic(&coeffs, mid) < 0.0 {
                    lower = mid;
                } else {
                    upper = mid;
                }
            }
            return Some(0.5 * (lower + upper));
        }
        upper = t;
    }
    None
}

fn eigenvector_near(x: &Matrix, lambda: f64) -> Option<Vec<f64>> {
    let n = x.rows();
    let shift = lambda * (1.0 + 1e-10) + 1e-300;
    let mut m = x.scaled(-1.0);
    for i in 0..n {
        m[(i, i)] += shift;
    }
    let lu = Lu::factor(&m).ok()?;
    let mut v = vec![1.0; n];
    for _ in 0..3 {
        v = lu.solve(&v, 0.0).ok()?;
        let norm: f64 = v.iter().map(|x| x.abs()).sum();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        v.iter_mut().for_each(|x| *x = x.abs() / norm);
    }
    Some(v)
}
