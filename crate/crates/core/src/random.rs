//! Seeded instance generator shared by `verify --seed`, tests and benches.
//!
//! Same seed, same stream, on every platform: ChaCha8 with fixed draw order.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;
use crate::model::{ChannelModel, ChannelSource, ChannelSpec, Direction, PowerConstraint, TimeVaryingChannel};

/// Sampling ranges; gains and bounds are log-uniform, the rest uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ranges {
    pub direct_gain: (f64, f64),
    pub cross_gain: (f64, f64),
    pub noise: (f64, f64),
    pub bound: (f64, f64),
    pub weight: (f64, f64),
}

impl Default for Ranges {
    fn default() -> Self {
        Self {
            direct_gain: (0.5, 2.0),
            cross_gain: (0.02, 0.4),
            noise: (0.05, 0.2),
            bound: (0.5, 4.0),
            weight: (0.3, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub channel: ChannelModel,
    pub direction: Direction,
    pub constraints: Vec<PowerConstraint>,
}

#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    pub ranges: Ranges,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            ranges: Ranges::default(),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn uniform(&mut self, (lo, hi): (f64, f64)) -> f64 {
        if lo == hi {
            lo
        } else {
            self.rng.random_range(lo..hi)
        }
    }

    pub fn log_uniform(&mut self, (lo, hi): (f64, f64)) -> f64 {
        self.uniform((lo.ln(), hi.ln())).exp()
    }

    pub fn index(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        self.rng.random_range(lo..=hi_inclusive)
    }

    /// Channel with shared noise `noise` (one variance per user).
    fn channel_with_noise(&mut self, noise: Vec<f64>) -> ChannelModel {
        let n = noise.len();
        let r = self.ranges;
        let gains = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            self.log_uniform(r.direct_gain)
                        } else {
                            self.log_uniform(r.cross_gain)
                        }
                    })
                    .collect()
            })
            .collect();
        ChannelModel::new(gains, noise).expect("sampled channel in range")
    }

    pub fn noise(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform(self.ranges.noise)).collect()
    }

    pub fn channel(&mut self, n: usize) -> ChannelModel {
        let noise = self.noise(n);
        self.channel_with_noise(noise)
    }

    /// Strictly positive direction.
    pub fn direction(&mut self, n: usize) -> Direction {
        Direction::new((0..n).map(|_| self.uniform(self.ranges.weight)).collect()).expect("positive weights")
    }

    pub fn bound(&mut self) -> f64 {
        self.log_uniform(self.ranges.bound)
    }

    /// Uniformly sized nonempty subset, then uniform members.
    pub fn subset(&mut self, n: usize) -> Vec<usize> {
        let k = self.index(1, n);
        let mut users = index::sample(&mut self.rng, n, k).into_vec();
        users.sort_unstable();
        users
    }

    pub fn subset_constraint(&mut self, n: usize) -> PowerConstraint {
        let users = self.subset(n);
        let bound = self.bound();
        PowerConstraint::new(users, bound, n).expect("valid subset")
    }

    /// One bound per user plus a total bound below their sum.
    pub fn per_user_and_total(&mut self, n: usize) -> Vec<PowerConstraint> {
        let mut cs: Vec<PowerConstraint> = (0..n)
            .map(|i| {
                let b = self.bound();
                PowerConstraint::new(vec![i], b, n).expect("valid user")
            })
            .collect();
        let sum: f64 = cs.iter().map(PowerConstraint::bound).sum();
        let total = sum * self.uniform((0.4, 0.9));
        cs.push(PowerConstraint::total(total, n).expect("positive total"));
        cs
    }

    /// Channel, direction and one random subset constraint.
    pub fn instance(&mut self, n: usize) -> Instance {
        let channel = self.channel(n);
        let direction = self.direction(n);
        let constraints = vec![self.subset_constraint(n)];
        Instance {
            channel,
            direction,
            constraints,
        }
    }

    /// `l` states sharing one noise vector, probabilities normalized to sum 1.
    pub fn time_varying(&mut self, n: usize, l: usize) -> TimeVaryingChannel {
        let noise = self.noise(n);
        let states = (0..l).map(|_| self.channel_with_noise(noise.clone())).collect();
        let raw: Vec<f64> = (0..l).map(|_| self.uniform((0.1, 1.0))).collect();
        let total: f64 = raw.iter().sum();
        let probabilities = raw.iter().map(|r| r / total).collect();
        TimeVaryingChannel::new(states, probabilities).expect("sampled states consistent")
    }

    /// Static spec with per-user and total bounds, for `verify --seed`.
    pub fn spec(&mut self, n: usize) -> ChannelSpec {
        let channel = self.channel(n);
        let constraints = self.per_user_and_total(n);
        ChannelSpec {
            source: ChannelSource::Static(channel),
            constraints,
        }
    }

    /// Entries uniform in `[lo, hi)`.
    pub fn matrix(&mut self, rows: usize, cols: usize, range: (f64, f64)) -> Matrix {
        let data: Vec<f64> = (0..rows * cols).map(|_| self.uniform(range)).collect();
        Matrix::from_row_major(rows, cols, data).expect("finite entries")
    }

    pub fn vector(&mut self, n: usize, range: (f64, f64)) -> Vec<f64> {
        (0..n).map(|_| self.uniform(range)).collect()
    }
}
