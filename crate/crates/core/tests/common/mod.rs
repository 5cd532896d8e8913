//! Brute-force references that share no code with the library's linear algebra.

#![allow(dead_code)]

pub type Rows = Vec<Vec<f64>>;

/// `|a - b| / |b|`, with `b` the reference.
pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Laplace expansion along successive rows; `cols` masks the columns still in play.
pub fn cofactor_det(x: &Rows) -> f64 {
    fn expand(x: &Rows, row: usize, cols: u64) -> f64 {
        if row == x.len() {
            return 1.0;
        }
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 0..x.len() {
            if cols & (1 << j) == 0 {
                continue;
            }
            if x[row][j] != 0.0 {
                sum += sign * x[row][j] * expand(x, row + 1, cols & !(1 << j));
            }
            sign = -sign;
        }
        sum
    }
    assert!(x.len() < 64);
    expand(x, 0, (1u64 << x.len()) - 1)
}

pub fn replace_column(x: &Rows, j: usize, col: &[f64]) -> Rows {
    let mut y = x.clone();
    for (r, &c) in y.iter_mut().zip(col) {
        r[j] = c;
    }
    y
}

pub fn add_to_columns(x: &Rows, y: &[f64], cols: &[usize]) -> Rows {
    let mut z = x.clone();
    for &j in cols {
        for (r, &v) in z.iter_mut().zip(y) {
            r[j] += v;
        }
    }
    z
}

/// Cramer's rule.
pub fn cramer_solve(x: &Rows, b: &[f64]) -> Vec<f64> {
    let d = cofactor_det(x);
    (0..x.len())
        .map(|j| cofactor_det(&replace_column(x, j, b)) / d)
        .collect()
}

/// `det(lambda I - x)`.
pub fn char_poly_at(x: &Rows, lambda: f64) -> f64 {
    let m: Rows = x
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .enumerate()
                .map(|(j, &v)| if i == j { lambda - v } else { -v })
                .collect()
        })
        .collect();
    cofactor_det(&m)
}

/// Largest real root of the characteristic polynomial of a nonnegative matrix:
/// scan down from the max row sum until the sign flips, then bisect.
pub fn perron_root_by_char_poly(x: &Rows, samples: usize) -> f64 {
    let top = x.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max) * (1.0 + 1e-9) + 1e-300;
    let f = |l: f64| char_poly_at(x, l);
    let step = top / samples as f64;
    let mut hi = top;
    let mut lo = top - step;
    while lo > 0.0 && f(lo) > 0.0 {
        hi = lo;
        lo -= step;
    }
    let lo = lo.max(0.0);
    bisect_root(&f, lo, hi)
}

fn bisect_root(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest positive root of `f` on `(0, hi]`: first sign change on a uniform
/// grid, refined by bisection.
pub fn smallest_positive_root(f: &dyn Fn(f64) -> f64, hi: f64, samples: usize) -> Option<f64> {
    let f0 = f(0.0);
    let mut prev = 0.0;
    for k in 1..=samples {
        let x = hi * k as f64 / samples as f64;
        let fx = f(x);
        if fx == 0.0 {
            return Some(x);
        }
        if (fx > 0.0) != (f0 > 0.0) {
            return Some(bisect_root(f, prev, x));
        }
        prev = x;
    }
    None
}

/// Tracks criterion results and prints one line each.
#[derive(Default)]
pub struct Ledger {
    pub failures: Vec<String>,
}

impl Ledger {
    pub fn record(&mut self, id: u32, name: &str, ok: bool, detail: impl AsRef<str>) {
        println!(
            "{} [{id:>2}] {name}: {}",
            if ok { "PASS" } else { "FAIL" },
            detail.as_ref()
        );
        if !ok {
            self.failures.push(format!("[{id}] {name}"));
        }
    }
}
