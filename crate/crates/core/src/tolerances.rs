//! Numerical tolerances shared by the kernels and solvers.
//!
//! Every threshold the crate uses lives in [`Tolerances`]. Tests tighten or
//! loosen individual fields through struct update syntax:
//!
//! ```
//! use sinr_region::Tolerances;
//! let strict = Tolerances { power_rel_tol: 1e-14, ..Tolerances::default() };
//! assert!(strict.power_rel_tol < Tolerances::default().power_rel_tol);
//! ```

/// Tolerance record threaded through [`crate::Solver`] and the linear algebra kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative convergence target for the spectral radius.
    pub power_rel_tol: f64,
    /// Iteration cap for power iteration.
    pub power_max_iter: usize,
    /// Smallest diagonal shift applied during power iteration, relative to the
    /// largest matrix entry.
    pub power_min_shift: f64,
    /// A pivot is treated as zero when `|pivot| <= singular_pivot_rel * ||X||_inf`.
    pub singular_pivot_rel: f64,
    /// Recovered powers below `-negative_power_tol * max(1, ||p||_inf)` are errors;
    /// anything above is clamped to zero.
    pub negative_power_tol: f64,
    /// `recover_power` refuses gamma within this relative distance of `1 / lambda*`.
    pub unconstrained_margin: f64,
    /// Relative window in which constraint values count as tied for binding.
    pub tie_rel: f64,
    /// Largest accepted deviation of `sum(rho)` from one.
    pub probability_sum_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            power_rel_tol: 1e-13,
            power_max_iter: 100_000,
            power_min_shift: 1e-12,
            singular_pivot_rel: 1e-14,
            negative_power_tol: 1e-10,
            unconstrained_margin: 1e-12,
            tie_rel: 1e-12,
            probability_sum_tol: 1e-12,
        }
    }
}
