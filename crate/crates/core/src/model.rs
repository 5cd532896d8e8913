//! Channels, directions and power constraints, plus the channel spec file.
//!
//! Users are 0-based in the API and 1-based in files and reports. Field paths
//! in error messages use JSON positions, so `gains[1][1]` is `g_22`.

use std::fmt;
use std::path::Path;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {kind}")]
pub struct ModelError {
    pub path: String,
    pub kind: ModelErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelErrorKind {
    #[error("expected length {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("at least one user is required")]
    NoUsers,
    #[error("value must be finite")]
    NonFinite,
    #[error("diagonal gain must be positive, found {0}")]
    NonPositiveDiagonal(f64),
    #[error("gain must be nonnegative, found {0}")]
    NegativeGain(f64),
    #[error("noise variance must be positive, found {0}")]
    NonPositiveNoise(f64),
    #[error("direction weight must be nonnegative, found {0}")]
    NegativeWeight(f64),
    #[error("direction needs at least one positive weight")]
    ZeroDirection,
    #[error("constraint must name at least one user")]
    EmptyConstraint,
    #[error("user {index} out of range 1..={users}")]
    UserOutOfRange { index: usize, users: usize },
    #[error("user {0} listed twice")]
    DuplicateUser(usize),
    #[error("power bound must be positive, found {0}")]
    NonPositiveBound(f64),
    #[error("probability must be positive, found {0}")]
    NonPositiveProbability(f64),
    #[error("probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("at least one channel state is required")]
    NoStates,
    #[error("state has {found} users, expected {expected}")]
    StateUsers { expected: usize, found: usize },
    #[error("ratio to the direct gain g_ii overflows")]
    RatioOverflow,
    #[error("all states must share one noise vector")]
    NoiseMismatch,
}

impl ModelError {
    fn new(path: impl Into<String>, kind: ModelErrorKind) -> Self {
        Self {
            path: path.into(),
            kind,
        }
    }

    fn prefixed(mut self, prefix: &str) -> Self {
        self.path = if self.path.is_empty() {
            prefix.to_owned()
        } else if self.path.starts_with('[') {
            format!("{prefix}{}", self.path)
        } else {
            format!("{prefix}.{}", self.path)
        };
        self
    }
}

/// Gain matrix `G` (`g_ij`: transmitter `j` to receiver `i`) and receiver noise variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    gains: Matrix,
    noise: Vec<f64>,
}

impl ChannelModel {
    pub fn new(gains: Vec<Vec<f64>>, noise: Vec<f64>) -> Result<Self, ModelError> {
        let n = gains.len();
        if n == 0 {
            return Err(ModelError::new("gains", ModelErrorKind::NoUsers));
        }
        for (i, row) in gains.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::new(
                    format!("gains[{i}]"),
                    ModelErrorKind::Dimension {
                        expected: n,
                        found: row.len(),
                    },
                ));
            }
            for (j, &g) in row.iter().enumerate() {
                let path = || format!("gains[{i}][{j}]");
                if !g.is_finite() {
                    return Err(ModelError::new(path(), ModelErrorKind::NonFinite));
                }
                if i == j && g <= 0.0 {
                    return Err(ModelError::new(path(), ModelErrorKind::NonPositiveDiagonal(g)));
                }
                if g < 0.0 {
                    return Err(ModelError::new(path(), ModelErrorKind::NegativeGain(g)));
                }
            }
        }
        if noise.len() != n {
            return Err(ModelError::new(
                "noise",
                ModelErrorKind::Dimension {
                    expected: n,
                    found: noise.len(),
                },
            ));
        }
        for (i, &s) in noise.iter().enumerate() {
            if !s.is_finite() {
                return Err(ModelError::new(format!("noise[{i}]"), ModelErrorKind::NonFinite));
            }
            if s <= 0.0 {
                return Err(ModelError::new(
                    format!("noise[{i}]"),
                    ModelErrorKind::NonPositiveNoise(s),
                ));
            }
        }
        // The solvers work with a_ij = g_ij / g_ii and sigma_i^2 / g_ii.
        for (i, row) in gains.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                if i != j && !(g / row[i]).is_finite() {
                    return Err(ModelError::new(
                        format!("gains[{i}][{j}]"),
                        ModelErrorKind::RatioOverflow,
                    ));
                }
            }
            if !(noise[i] / row[i]).is_finite() {
                return Err(ModelError::new(format!("noise[{i}]"), ModelErrorKind::RatioOverflow));
            }
        }
        let gains = Matrix::from_rows(&gains).expect("validated above");
        Ok(Self { gains, noise })
    }

    pub fn users(&self) -> usize {
        self.noise.len()
    }

    pub fn gains(&self) -> &Matrix {
        &self.gains
    }

    pub fn gain(&self, receiver: usize, transmitter: usize) -> f64 {
        self.gains[(receiver, transmitter)]
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    pub fn direct_gains(&self) -> Vec<f64> {
        (0..self.users()).map(|i| self.gains[(i, i)]).collect()
    }

    /// `a_ij = g_ij / g_ii` off the diagonal, zero on it.
    pub fn normalize(&self) -> NormalizedGain {
        let n = self.users();
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            let gii = self.gains[(i, i)];
            for j in 0..n {
                if i != j {
                    a[(i, j)] = self.gains[(i, j)] / gii;
                }
            }
        }
        NormalizedGain(a)
    }

    /// `eta_i = mu_i sigma_i^2 / g_ii`.
    pub fn eta(&self, direction: &Direction) -> Vec<f64> {
        assert_eq!(direction.len(), self.users(), "direction length must match user count");
        direction
            .weights()
            .iter()
            .zip(&self.noise)
            .enumerate()
            .map(|(i, (mu, s))| mu * s / self.gains[(i, i)])
            .collect()
    }

    /// Per-user SINR `g_ii p_i / (sigma_i^2 + sum_{j != i} g_ij p_j)` for a power vector.
    pub fn sinr(&self, power: &[f64]) -> Vec<f64> {
        let n = self.users();
        assert_eq!(power.len(), n, "power length must match user count");
        (0..n)
            .map(|i| {
                let interference: f64 = (0..n).filter(|&j| j != i).map(|j| self.gains[(i, j)] * power[j]).sum();
                self.gains[(i, i)] * power[i] / (self.noise[i] + interference)
            })
            .collect()
    }

    /// Same channel with every cross gain multiplied by `t`.
    pub fn with_cross_gains_scaled(&self, t: f64) -> Result<Self, ModelError> {
        let mut rows = self.gains.to_rows();
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, g) in row.iter_mut().enumerate() {
                if i != j {
                    *g *= t;
                }
            }
        }
        Self::new(rows, self.noise.clone())
    }
}

/// Normalized gain matrix `A`: cross gains over direct gains, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGain(Matrix);

impl NormalizedGain {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn users(&self) -> usize {
        self.0.rows()
    }

    /// `diag(mu) A`.
    pub fn weighted(&self, direction: &Direction) -> Matrix {
        self.0.scale_rows(direction.weights())
    }
}

/// Ray `mu >= 0` in SINR space. Stored as given; the solvers are scale
/// invariant in the achieved SINR vector `mu * gamma*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    mu: Vec<f64>,
}

impl Direction {
    pub fn new(mu: Vec<f64>) -> Result<Self, ModelError> {
        if mu.is_empty() {
            return Err(ModelError::new("mu", ModelErrorKind::NoUsers));
        }
        for (i, &m) in mu.iter().enumerate() {
            if !m.is_finite() {
                return Err(ModelError::new(format!("mu[{i}]"), ModelErrorKind::NonFinite));
            }
            if m < 0.0 {
                return Err(ModelError::new(format!("mu[{i}]"), ModelErrorKind::NegativeWeight(m)));
            }
        }
        if mu.iter().all(|&m| m == 0.0) {
            return Err(ModelError::new("mu", ModelErrorKind::ZeroDirection));
        }
        Ok(Self { mu })
    }

    /// Equal weight for every user.
    pub fn uniform(users: usize) -> Result<Self, ModelError> {
        Self::new(vec![1.0; users])
    }

    /// `(cos theta, sin theta)` for two users.
    pub fn from_angle(theta: f64) -> Result<Self, ModelError> {
        let (s, c) = theta.sin_cos();
        Self::new(vec![c.max(0.0), s.max(0.0)])
    }

    /// Parses a comma separated weight list such as `1,0.5`.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mu = text
            .split(',')
            .enumerate()
            .map(|(i, part)| {
                part.trim()
                    .parse::<f64>()
                    .map_err(|_| ModelError::new(format!("mu[{i}]"), ModelErrorKind::NonFinite))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(mu)
    }

    pub fn weights(&self) -> &[f64] {
        &self.mu
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.mu.iter().all(|&m| m > 0.0)
    }

    /// Scaled to unit Euclidean length.
    pub fn normalized(&self) -> Self {
        let norm = self.mu.iter().map(|m| m * m).sum::<f64>().sqrt();
        Self {
            mu: self.mu.iter().map(|m| m / norm).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self, ModelError> {
        Self::new(self.mu.iter().map(|m| m * c).collect())
    }
}

/// `sum_{i in users} p_i <= bound` (or its expectation over channel states).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerConstraint {
    users: Vec<usize>,
    bound: f64,
}

impl PowerConstraint {
    /// `users` are 0-based and must be below `user_count`.
    pub fn new(users: Vec<usize>, bound: f64, user_count: usize) -> Result<Self, ModelError> {
        Self::build(users.iter().map(|&u| u + 1).collect(), bound, user_count)
    }

    /// `users` are 1-based as in the spec file.
    pub fn from_one_based(users: Vec<usize>, bound: f64, user_count: usize) -> Result<Self, ModelError> {
        Self::build(users, bound, user_count)
    }

    /// Constraint on every user's total power.
    pub fn total(bound: f64, user_count: usize) -> Result<Self, ModelError> {
        Self::new((0..user_count).collect(), bound, user_count)
    }

    fn build(one_based: Vec<usize>, bound: f64, user_count: usize) -> Result<Self, ModelError> {
        if one_based.is_empty() {
            return Err(ModelError::new("users", ModelErrorKind::EmptyConstraint));
        }
        let mut seen = vec![false; user_count];
        let mut users = Vec::with_capacity(one_based.len());
        for (k, &u) in one_based.iter().enumerate() {
            if u == 0 || u > user_count {
                return Err(ModelError::new(
                    format!("users[{k}]"),
                    ModelErrorKind::UserOutOfRange {
                        index: u,
                        users: user_count,
                    },
                ));
            }
            if seen[u - 1] {
                return Err(ModelError::new(format!("users[{k}]"), ModelErrorKind::DuplicateUser(u)));
            }
            seen[u - 1] = true;
            users.push(u - 1);
        }
        if !bound.is_finite() {
            return Err(ModelError::new("bound", ModelErrorKind::NonFinite));
        }
        if bound <= 0.0 {
            return Err(ModelError::new("bound", ModelErrorKind::NonPositiveBound(bound)));
        }
        users.sort_unstable();
        Ok(Self { users, bound })
    }

    /// Constrained users, 0-based and sorted.
    pub fn users(&self) -> &[usize] {
        &self.users
    }

    pub fn users_one_based(&self) -> Vec<usize> {
        self.users.iter().map(|u| u + 1).collect()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn with_bound(&self, bound: f64) -> Result<Self, ModelError> {
        if !bound.is_finite() {
            return Err(ModelError::new("bound", ModelErrorKind::NonFinite));
        }
        if bound <= 0.0 {
            return Err(ModelError::new("bound", ModelErrorKind::NonPositiveBound(bound)));
        }
        Ok(Self {
            users: self.users.clone(),
            bound,
        })
    }

    pub fn total_power(&self, power: &[f64]) -> f64 {
        self.users.iter().map(|&u| power[u]).sum()
    }

    pub(crate) fn fits(&self, user_count: usize) -> bool {
        self.users.iter().all(|&u| u < user_count)
    }
}

impl fmt::Display for PowerConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let users: Vec<String> = self.users.iter().map(|u| (u + 1).to_string()).collect();
        write!(f, "sum p{{{}}} <= {}", users.join(","), self.bound)
    }
}

/// Channel states drawn with probabilities `rho`; all share the noise vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeVaryingChannel {
    states: Vec<ChannelModel>,
    probabilities: Vec<f64>,
}

impl TimeVaryingChannel {
    pub fn new(states: Vec<ChannelModel>, probabilities: Vec<f64>) -> Result<Self, ModelError> {
        Self::with_tolerance(states, probabilities, Tolerances::default().probability_sum_tol)
    }

    fn with_tolerance(states: Vec<ChannelModel>, probabilities: Vec<f64>, tol: f64) -> Result<Self, ModelError> {
        let first = states
            .first()
            .ok_or_else(|| ModelError::new("states", ModelErrorKind::NoStates))?;
        if probabilities.len() != states.len() {
            return Err(ModelError::new(
                "prob",
                ModelErrorKind::Dimension {
                    expected: states.len(),
                    found: probabilities.len(),
                },
            ));
        }
        let n = first.users();
        for (k, s) in states.iter().enumerate() {
            if s.users() != n {
                return Err(ModelError::new(
                    format!("states[{k}].gains"),
                    ModelErrorKind::StateUsers {
                        expected: n,
                        found: s.users(),
                    },
                ));
            }
            if s.noise() != first.noise() {
                return Err(ModelError::new(
                    format!("states[{k}].noise"),
                    ModelErrorKind::NoiseMismatch,
                ));
            }
        }
        for (k, &r) in probabilities.iter().enumerate() {
            let path = format!("states[{k}].prob");
            if !r.is_finite() {
                return Err(ModelError::new(path, ModelErrorKind::NonFinite));
            }
            if r <= 0.0 {
                return Err(ModelError::new(path, ModelErrorKind::NonPositiveProbability(r)));
            }
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(ModelError::new("states", ModelErrorKind::ProbabilitySum(sum)));
        }
        Ok(Self { states, probabilities })
    }

    pub fn states(&self) -> &[ChannelModel] {
        &self.states
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn users(&self) -> usize {
        self.states[0].users()
    }

    pub fn noise(&self) -> &[f64] {
        self.states[0].noise()
    }
}

/// Either a fixed channel or a set of channel states.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    Static(ChannelModel),
    TimeVarying(TimeVaryingChannel),
}

impl ChannelSource {
    pub fn users(&self) -> usize {
        match self {
            Self::Static(ch) => ch.users(),
            Self::TimeVarying(tv) => tv.users(),
        }
    }
}

/// Parsed contents of a channel spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub source: ChannelSource,
    pub constraints: Vec<PowerConstraint>,
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> SpecError {
    SpecError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn number(v: &Value, path: &str) -> Result<f64, SpecError> {
    v.as_f64().ok_or_else(|| schema(path, "expected a number"))
}

fn number_array(v: &Value, path: &str) -> Result<Vec<f64>, SpecError> {
    let items = v
        .as_array()
        .ok_or_else(|| schema(path, "expected an array of numbers"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

fn number_matrix(v: &Value, path: &str) -> Result<Vec<Vec<f64>>, SpecError> {
    let rows = v.as_array().ok_or_else(|| schema(path, "expected an array of rows"))?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| number_array(row, &format!("{path}[{i}]")))
        .collect()
}

fn object<'a>(v: &'a Value, path: &str, allowed: &[&str]) -> Result<&'a Map<String, Value>, SpecError> {
    let obj = v.as_object().ok_or_else(|| schema(path, "expected an object"))?;
    if let Some(key) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        let at = if path.is_empty() {
            key.clone()
        } else {
            format!("{path}.{key}")
        };
        return Err(schema(at, "unknown key"));
    }
    Ok(obj)
}

fn field(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_owned()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Parses and validates channel spec text.
pub fn parse_channel_spec(text: &str) -> Result<ChannelSpec, SpecError> {
    let root: Value = serde_json::from_str(text)?;
    let obj = object(&root, "", &["gains", "noise", "constraints", "states"])?;
    let noise = number_array(obj.get("noise").ok_or_else(|| schema("noise", "missing key"))?, "noise")?;

    let source = match (obj.get("gains"), obj.get("states")) {
        (Some(_), Some(_)) => return Err(schema("states", "`states` replaces `gains`; give only one")),
        (None, None) => return Err(schema("gains", "missing key (or give `states`)")),
        (Some(g), None) => ChannelSource::Static(ChannelModel::new(number_matrix(g, "gains")?, noise)?),
        (None, Some(states)) => {
            let items = states.as_array().ok_or_else(|| schema("states", "expected an array"))?;
            let mut models = Vec::with_capacity(items.len());
            let mut rho = Vec::with_capacity(items.len());
            for (k, item) in items.iter().enumerate() {
                let path = format!("states[{k}]");
                let st = object(item, &path, &["gains", "prob"])?;
                let g = st
                    .get("gains")
                    .ok_or_else(|| schema(field(&path, "gains"), "missing key"))?;
                let gains = number_matrix(g, &field(&path, "gains"))?;
                if gains.len() != noise.len() {
                    return Err(ModelError::new(
                        field(&path, "gains"),
                        ModelErrorKind::StateUsers {
                            expected: noise.len(),
                            found: gains.len(),
                        },
                    )
                    .into());
                }
                let model = ChannelModel::new(gains, noise.clone()).map_err(|e| e.prefixed(&path))?;
                models.push(model);
                let p = st
                    .get("prob")
                    .ok_or_else(|| schema(field(&path, "prob"), "missing key"))?;
                rho.push(number(p, &field(&path, "prob"))?);
            }
            ChannelSource::TimeVarying(TimeVaryingChannel::new(models, rho)?)
        }
    };

    let n = source.users();
    let mut constraints = Vec::new();
    if let Some(cs) = obj.get("constraints") {
        let items = cs
            .as_array()
            .ok_or_else(|| schema("constraints", "expected an array"))?;
        for (k, item) in items.iter().enumerate() {
            let path = format!("constraints[{k}]");
            let c = object(item, &path, &["users", "bound"])?;
            let users_v = c
                .get("users")
                .ok_or_else(|| schema(field(&path, "users"), "missing key"))?;
            let users = users_v
                .as_array()
                .ok_or_else(|| schema(field(&path, "users"), "expected an array of user indices"))?
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    u.as_u64()
                        .and_then(|u| usize::try_from(u).ok())
                        .ok_or_else(|| schema(format!("{path}.users[{i}]"), "expected a positive integer"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let bound = number(
                c.get("bound")
                    .ok_or_else(|| schema(field(&path, "bound"), "missing key"))?,
                &field(&path, "bound"),
            )?;
            let constraint = PowerConstraint::from_one_based(users, bound, n).map_err(|e| e.prefixed(&path))?;
            constraints.push(constraint);
        }
    }
    Ok(ChannelSpec { source, constraints })
}

/// Reads and validates a channel spec file.
pub fn load_channel_spec(path: impl AsRef<Path>) -> Result<ChannelSpec, SpecError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_channel_spec(&text)
}

impl ChannelSpec {
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        match &self.source {
            ChannelSource::Static(ch) => {
                obj.insert("gains".into(), json!(ch.gains().to_rows()));
                obj.insert("noise".into(), json!(ch.noise()));
            }
            ChannelSource::TimeVarying(tv) => {
                obj.insert("noise".into(), json!(tv.noise()));
                let states: Vec<Value> = tv
                    .states()
                    .iter()
                    .zip(tv.probabilities())
                    .map(|(s, p)| json!({ "gains": s.gains().to_rows(), "prob": p }))
                    .collect();
                obj.insert("states".into(), Value::Array(states));
            }
        }
        let cs: Vec<Value> = self
            .constraints
            .iter()
            .map(|c| json!({ "users": c.users_one_based(), "bound": c.bound() }))
            .collect();
        obj.insert("constraints".into(), Value::Array(cs));
        Value::Object(obj)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("spec values are finite")
    }
}
