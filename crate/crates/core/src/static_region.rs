//! Closed-form max-min SINR for a fixed channel.
//!
//! For one constraint `sum_{i in Omega} p_i <= p` the optimum is
//! `gamma* = 1 / lambda*(psi(diag(mu) A, eta / p, Omega))`; for several, the
//! minimum over constraints. Without constraints it is `1 / lambda*(diag(mu) A)`,
//! infinite when that spectral radius is zero.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use thiserror::Error;

use crate::linalg::{self, psi, LinalgError, Lu, Matrix, PerronResult};
use crate::model::{ChannelModel, Direction, ModelError, NormalizedGain, PowerConstraint};
use crate::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("direction has {found} weights but the channel has {expected} users")]
    DirectionLength { expected: usize, found: usize },
    #[error(
        "direction weight for user {user} is zero; solve the reduced system on the users with positive weight instead"
    )]
    ZeroWeight { user: usize },
    #[error("constraint refers to users beyond the channel's {users}")]
    ConstraintUsers { users: usize },
    #[error("spectral radius iteration did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("gamma must be finite and nonnegative, got {0}")]
    InvalidGamma(f64),
    #[error("gamma {gamma} exceeds the unconstrained limit {limit}; no nonnegative power achieves it")]
    BeyondUnconstrainedLimit { gamma: f64, limit: f64 },
    #[error("power system is singular at gamma {gamma} (unconstrained limit {limit})")]
    NearSingular { gamma: f64, limit: f64 },
    #[error("recovered power for user {user} is negative ({value:e})")]
    NegativePower { user: usize, value: f64 },
    #[error("a sweep needs at least 2 directions, got {0}")]
    TooFewPoints(usize),
    #[error("angle sampling needs exactly 2 users, the channel has {0}; pass explicit directions")]
    AngleSamplingUsers(usize),
    #[error("channel states disagree: {0}")]
    StateMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which constraint attains the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    Unconstrained,
    /// 0-based position in the constraint list.
    Constraint(usize),
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Unconstrained => f.write_str("unconstrained"),
            Binding::Constraint(k) => write!(f, "{}", k + 1),
        }
    }
}

/// Maximum balanced SINR for one constraint (or none), with the Perron root it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxSinr {
    pub gamma_star: f64,
    pub lambda_star: f64,
    pub iterations: usize,
}

impl MaxSinr {
    fn from_perron(p: &PerronResult) -> Self {
        Self {
            gamma_star: if p.lambda_star == 0.0 {
                f64::INFINITY
            } else {
                1.0 / p.lambda_star
            },
            lambda_star: p.lambda_star,
            iterations: p.iterations,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.gamma_star.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Infinite when `unbounded`.
    pub gamma_star: f64,
    pub unbounded: bool,
    pub binding: Binding,
    /// Every constraint within `tie_rel` of the minimum, 0-based, in input order.
    pub ties: Vec<usize>,
    /// `gamma*` of each constraint taken alone, in input order.
    pub per_constraint: Vec<f64>,
    /// Power at the optimum: length `n`, or `l * n` for time-varying channels
    /// (state-major). `None` without constraints, where the supremum is not attained.
    pub power: Option<Vec<f64>>,
    /// Achieved SINR per link of `power`, or `mu_i * gamma*` when `power` is `None`.
    pub sinr: Vec<f64>,
    /// `log2(1 + sinr)` in bits per channel use.
    pub rate: Vec<f64>,
    /// Number of channel states (1 for a fixed channel).
    pub states: usize,
    /// `rho`-weighted power per user, for time-varying channels.
    pub average_power: Option<Vec<f64>>,
}

/// One solved direction of a boundary sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub gamma_star: f64,
    pub unbounded: bool,
    /// `mu_i * gamma*`.
    pub sinr: Vec<f64>,
    pub rate: Vec<f64>,
    pub binding: Binding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Angle for automatically sampled two-user sweeps.
    pub theta: Option<f64>,
    pub mu: Direction,
    pub result: Result<BoundaryPoint, SolveError>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directions {
    /// `m` interior angles of `(0, pi/2)` for two users.
    Count(usize),
    Explicit(Vec<Direction>),
}

/// Boundary curves for each constraint alone, without constraints, and combined.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSweep {
    pub unconstrained: Vec<SweepPoint>,
    pub per_constraint: Vec<Vec<SweepPoint>>,
    pub combined: Vec<SweepPoint>,
}

pub fn rate(sinr: f64) -> f64 {
    sinr.ln_1p() / std::f64::consts::LN_2
}

/// `theta_k = k * (pi/2) / (m + 1)` for `k = 1..=m`, paired with `(cos, sin)`.
pub fn angle_directions(m: usize) -> Vec<(f64, Direction)> {
    (1..=m)
        .map(|k| {
            let theta = k as f64 * FRAC_PI_2 / (m + 1) as f64;
            (
                theta,
                Direction::from_angle(theta).expect("interior angles have positive weights"),
            )
        })
        .collect()
}

/// `F = I - gamma diag(mu) A`.
pub fn f_matrix(ch: &ChannelModel, d: &Direction, gamma: f64) -> Matrix {
    let m = ch.normalize().weighted(d);
    &Matrix::identity(ch.users()) - &m.scaled(gamma)
}

/// `F` with column `i` replaced by `gamma * eta`.
pub fn h_matrix(ch: &ChannelModel, d: &Direction, gamma: f64, i: usize) -> Result<Matrix, SolveError> {
    let mut h = f_matrix(ch, d, gamma);
    let col: Vec<f64> = ch.eta(d).iter().map(|e| gamma * e).collect();
    h.set_column(i, &col)?;
    Ok(h)
}

/// `f(gamma) = det(F)`.
pub fn f_det(ch: &ChannelModel, d: &Direction, gamma: f64) -> Result<f64, SolveError> {
    Ok(linalg::determinant(&f_matrix(ch, d, gamma))?)
}

/// `u(gamma) = p det(F) - sum_{i in Omega} det(H_i)`, the numerator of the
/// power constraint after Cramer's rule.
pub fn u_omega_cramer(ch: &ChannelModel, d: &Direction, c: &PowerConstraint, gamma: f64) -> Result<f64, SolveError> {
    let mut u = c.bound() * f_det(ch, d, gamma)?;
    for &i in c.users() {
        u -= linalg::determinant(&h_matrix(ch, d, gamma, i)?)?;
    }
    Ok(u)
}

/// The same numerator collapsed to a single determinant,
/// `p det(psi(F, -gamma eta / p, Omega))`.
pub fn u_omega(ch: &ChannelModel, d: &Direction, c: &PowerConstraint, gamma: f64) -> Result<f64, SolveError> {
    let y: Vec<f64> = ch.eta(d).iter().map(|e| -gamma * e / c.bound()).collect();
    let m = psi(&f_matrix(ch, d, gamma), &y, c.users())?;
    Ok(c.bound() * linalg::determinant(&m)?)
}

/// `psi(diag(mu) A, eta / p, Omega)`, whose Perron root is `1 / gamma*`.
pub fn constraint_matrix(ch: &ChannelModel, d: &Direction, c: &PowerConstraint) -> Result<Matrix, SolveError> {
    let y: Vec<f64> = ch.eta(d).iter().map(|e| e / c.bound()).collect();
    Ok(psi(&ch.normalize().weighted(d), &y, c.users())?)
}

/// Solvers parameterized by a [`Tolerances`] record.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Solver {
    pub tol: Tolerances,
}

impl Solver {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol }
    }

    pub(crate) fn perron(&self, m: &Matrix) -> Result<PerronResult, SolveError> {
        let p = linalg::spectral_radius_with(m, &self.tol)?;
        if !p.converged {
            return Err(SolveError::NotConverged {
                iterations: p.iterations,
            });
        }
        Ok(p)
    }

    pub fn unconstrained_max_sinr(&self, a: &NormalizedGain, d: &Direction) -> Result<MaxSinr, SolveError> {
        check_length(a.users(), d)?;
        Ok(MaxSinr::from_perron(&self.perron(&a.weighted(d))?))
    }

    pub fn constrained_max_sinr(
        &self,
        ch: &ChannelModel,
        d: &Direction,
        c: &PowerConstraint,
    ) -> Result<MaxSinr, SolveError> {
        check_positive(ch.users(), d)?;
        if !c.fits(ch.users()) {
            return Err(SolveError::ConstraintUsers { users: ch.users() });
        }
        Ok(MaxSinr::from_perron(&self.perron(&constraint_matrix(ch, d, c)?)?))
    }

    /// Minimum over the constraints, with the power vector that attains it.
    /// An empty list gives the unconstrained limit.
    pub fn multi_constrained_max_sinr(
        &self,
        ch: &ChannelModel,
        d: &Direction,
        cs: &[PowerConstraint],
    ) -> Result<SolveReport, SolveError> {
        if cs.is_empty() {
            let bound = self.unconstrained_max_sinr(&ch.normalize(), d)?;
            let sinr: Vec<f64> = d
                .weights()
                .iter()
                .map(|&m| if m == 0.0 { 0.0 } else { m * bound.gamma_star })
                .collect();
            return Ok(SolveReport {
                gamma_star: bound.gamma_star,
                unbounded: bound.is_unbounded(),
                binding: Binding::Unconstrained,
                ties: Vec::new(),
                per_constraint: Vec::new(),
                power: None,
                rate: sinr.iter().map(|&s| rate(s)).collect(),
                sinr,
                states: 1,
                average_power: None,
            });
        }
        check_positive(ch.users(), d)?;
        let mut per_constraint = Vec::with_capacity(cs.len());
        for c in cs {
            per_constraint.push(self.constrained_max_sinr(ch, d, c)?.gamma_star);
        }
        let (binding, ties) = pick_binding(&per_constraint, self.tol.tie_rel);
        let gamma_star = per_constraint[binding];
        let power = self.recover_power(ch, d, gamma_star)?;
        let sinr = ch.sinr(&power);
        Ok(SolveReport {
            gamma_star,
            unbounded: false,
            binding: Binding::Constraint(binding),
            ties,
            per_constraint,
            rate: sinr.iter().map(|&s| rate(s)).collect(),
            sinr,
            power: Some(power),
            states: 1,
            average_power: None,
        })
    }

    /// Solves `(I - gamma diag(mu) A) p = gamma eta`.
    ///
    /// At the unconstrained limit the system is singular; `gamma` within
    /// `unconstrained_margin` of it is an error rather than a huge power.
    /// Negative entries down to `-negative_power_tol * max(1, |p|)` are
    /// rounding and are clamped to zero.
    pub fn recover_power(&self, ch: &ChannelModel, d: &Direction, gamma: f64) -> Result<Vec<f64>, SolveError> {
        check_length(ch.users(), d)?;
        let m = ch.normalize().weighted(d);
        let eta = ch.eta(d);
        self.balanced_power(&m, &eta, gamma)
    }

    pub(crate) fn balanced_power(&self, m: &Matrix, eta: &[f64], gamma: f64) -> Result<Vec<f64>, SolveError> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(SolveError::InvalidGamma(gamma));
        }
        let n = eta.len();
        if gamma == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let limit = MaxSinr::from_perron(&self.perron(m)?).gamma_star;
        if gamma > limit {
            return Err(SolveError::BeyondUnconstrainedLimit { gamma, limit });
        }
        if gamma >= limit * (1.0 - self.tol.unconstrained_margin) {
            return Err(SolveError::NearSingular { gamma, limit });
        }
        let f = &Matrix::identity(n) - &m.scaled(gamma);
        let rhs: Vec<f64> = eta.iter().map(|e| gamma * e).collect();
        let mut p = match Lu::factor(&f)?.solve(&rhs, self.tol.singular_pivot_rel) {
            Ok(p) => p,
            Err(LinalgError::Singular { .. }) => return Err(SolveError::NearSingular { gamma, limit }),
            Err(e) => return Err(e.into()),
        };
        let scale = p.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
        if let Some((i, &v)) = p
            .iter()
            .enumerate()
            .find(|(_, &v)| v < -self.tol.negative_power_tol * scale || !v.is_finite())
        {
            return Err(SolveError::NegativePower { user: i + 1, value: v });
        }
        p.iter_mut().for_each(|x| *x = x.max(0.0));
        Ok(p)
    }

    pub fn boundary_point(
        &self,
        ch: &ChannelModel,
        d: &Direction,
        cs: &[PowerConstraint],
    ) -> Result<BoundaryPoint, SolveError> {
        let report = self.multi_constrained_max_sinr(ch, d, cs)?;
        let sinr: Vec<f64> = d
            .weights()
            .iter()
            .map(|&m| if m == 0.0 { 0.0 } else { m * report.gamma_star })
            .collect();
        Ok(BoundaryPoint {
            gamma_star: report.gamma_star,
            unbounded: report.unbounded,
            rate: sinr.iter().map(|&s| rate(s)).collect(),
            sinr,
            binding: report.binding,
        })
    }

    /// Solves every direction independently; a failed direction keeps its
    /// error in place.
    pub fn sweep_boundary(
        &self,
        ch: &ChannelModel,
        cs: &[PowerConstraint],
        directions: &Directions,
    ) -> Result<Vec<SweepPoint>, SolveError> {
        let dirs = resolve_directions(ch.users(), directions)?;
        Ok(dirs
            .into_iter()
            .map(|(theta, mu)| {
                let result = self.boundary_point(ch, &mu, cs);
                SweepPoint { theta, mu, result }
            })
            .collect())
    }

    pub fn sweep_region(
        &self,
        ch: &ChannelModel,
        cs: &[PowerConstraint],
        directions: &Directions,
    ) -> Result<RegionSweep, SolveError> {
        Ok(RegionSweep {
            unconstrained: self.sweep_boundary(ch, &[], directions)?,
            per_constraint: cs
                .iter()
                .map(|c| self.sweep_boundary(ch, std::slice::from_ref(c), directions))
                .collect::<Result<_, _>>()?,
            combined: self.sweep_boundary(ch, cs, directions)?,
        })
    }
}

fn resolve_directions(users: usize, directions: &Directions) -> Result<Vec<(Option<f64>, Direction)>, SolveError> {
    match directions {
        Directions::Count(m) => {
            if users != 2 {
                return Err(SolveError::AngleSamplingUsers(users));
            }
            if *m < 2 {
                return Err(SolveError::TooFewPoints(*m));
            }
            Ok(angle_directions(*m).into_iter().map(|(t, d)| (Some(t), d)).collect())
        }
        Directions::Explicit(list) => {
            if list.len() < 2 {
                return Err(SolveError::TooFewPoints(list.len()));
            }
            Ok(list.iter().cloned().map(|d| (None, d)).collect())
        }
    }
}

/// First minimum in input order plus every value within `tie_rel` of it.
pub(crate) fn pick_binding(values: &[f64], tie_rel: f64) -> (usize, Vec<usize>) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let ties: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= min + tie_rel * min.abs())
        .map(|(k, _)| k)
        .collect();
    let first = values.iter().position(|&v| v == min).unwrap_or(0);
    (first, ties)
}

pub(crate) fn check_length(users: usize, d: &Direction) -> Result<(), SolveError> {
    if d.len() != users {
        return Err(SolveError::DirectionLength {
            expected: users,
            found: d.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_positive(users: usize, d: &Direction) -> Result<(), SolveError> {
    check_length(users, d)?;
    match d.weights().iter().position(|&m| m <= 0.0) {
        Some(i) => Err(SolveError::ZeroWeight { user: i + 1 }),
        None => Ok(()),
    }
}
