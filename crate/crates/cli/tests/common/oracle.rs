//! Brute-force reference statistics, written without the library's code
//! paths: insertion sort, compensated summation, pairwise variance and a
//! segment scan for quantiles.

pub const Z: f64 = 1.96;

#[derive(Debug, Clone, Copy)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
    pub lo: f64,
    pub hi: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &v in values.iter().filter(|v| !v.is_nan()) {
        let at = out.iter().position(|&x| x > v).unwrap_or(out.len());
        out.insert(at, v);
    }
    out
}

fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Piecewise-linear interpolation through (k/(n-1), x_k).
fn quantile(xs: &[f64], p: f64) -> f64 {
    let n = xs.len();
    if n == 1 {
        return xs[0];
    }
    let pos = p * (n - 1) as f64;
    for k in 0..n - 1 {
        let (a, b) = (k as f64, (k + 1) as f64);
        if pos >= a && pos <= b {
            return xs[k] + (pos - a) * (xs[k + 1] - xs[k]);
        }
    }
    xs[n - 1]
}

pub fn summarize(values: &[f64]) -> Summary {
    let xs = sorted(values);
    let n = xs.len();
    if n == 0 {
        let nan = f64::NAN;
        return Summary { n, mean: nan, stddev: nan, lo: nan, hi: nan, min: nan, q1: nan, median: nan, q3: nan, max: nan };
    }
    let mean = neumaier_sum(&xs) / n as f64;
    let stddev = if n < 2 {
        0.0
    } else {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((xs[i] - xs[j]).powi(2));
            }
        }
        (neumaier_sum(&pairs) / (n * (n - 1)) as f64).sqrt()
    };
    let half = Z * stddev / (n as f64).sqrt();
    Summary {
        n,
        mean,
        stddev,
        lo: mean - half,
        hi: mean + half,
        min: xs[0],
        q1: quantile(&xs, 0.25),
        median: quantile(&xs, 0.5),
        q3: quantile(&xs, 0.75),
        max: xs[n - 1],
    }
}

/// Cellwise oracle mean of equally shaped matrices.
pub fn mean_of(mats: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let rows = mats[0].len();
    let cols = mats[0][0].len();
    (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| summarize(&mats.iter().map(|m| m[r][c]).collect::<Vec<_>>()).mean)
                .collect()
        })
        .collect()
}

/// Equal within `tol`, with NaN matching only NaN.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= tol
}
