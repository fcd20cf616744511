//! Small inferential statistics used by the reports.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sided paired t-test. When the statistic is undefined (fewer than two
/// pairs or zero spread of the differences) `t` is 0, `defined` is false and
/// there is no p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    pub p_value: Option<f64>,
    pub defined: bool,
}

fn two_sided_p(t: f64, df: f64) -> Option<f64> {
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

/// Paired test of `b − a`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> TTest {
    let n = a.len().min(b.len());
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let mean = if n == 0 { 0.0 } else { diffs.iter().sum::<f64>() / n as f64 };
    let undefined = TTest {
        n,
        mean_diff: mean,
        t: 0.0,
        p_value: None,
        defined: false,
    };
    if n < 2 {
        return undefined;
    }
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return undefined;
    }
    let t = mean / (var / n as f64).sqrt();
    TTest {
        n,
        mean_diff: mean,
        t,
        p_value: two_sided_p(t, (n - 1) as f64),
        defined: true,
    }
}

/// Pearson correlation. When either variable is constant `r` is 0 and
/// `constant` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub n: usize,
    pub r: f64,
    pub p_value: Option<f64>,
    pub constant: bool,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Correlation {
    let n = x.len().min(y.len());
    let constant = Correlation {
        n,
        r: 0.0,
        p_value: None,
        constant: true,
    };
    if n < 2 {
        return constant;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return constant;
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let p_value = if n > 2 {
        if r.abs() >= 1.0 {
            Some(0.0)
        } else {
            let t = r * ((n - 2) as f64 / (1.0 - r * r)).sqrt();
            two_sided_p(t, (n - 2) as f64)
        }
    } else {
        None
    };
    Correlation {
        n,
        r,
        p_value,
        constant: false,
    }
}
