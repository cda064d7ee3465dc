//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Delinquent children by county (rows) and household-head education (columns).
pub const CHILDREN: [i64; 16] = [15, 1, 3, 1, 20, 10, 10, 15, 3, 10, 10, 2, 12, 14, 7, 2];

/// Law of the lattice coefficient `t` on `{t (1, -1)}` for a density
/// `exp(-rate * |t|)`, normalized by brute-force summation over `|t| <= support`.
pub fn enumerated_line_law(rate: f64, support: i64) -> BTreeMap<i64, f64> {
    let weights: BTreeMap<i64, f64> = (-support..=support)
        .map(|t| (t, (-rate * t.abs() as f64).exp()))
        .collect();
    let total: f64 = weights.values().sum();
    weights.into_iter().map(|(t, w)| (t, w / total)).collect()
}

/// Total variation distance between an empirical sample and a law.
pub fn tv_to_law(samples: &[i64], law: &BTreeMap<i64, f64>) -> f64 {
    let n = samples.len() as f64;
    let mut counts: BTreeMap<i64, f64> = BTreeMap::new();
    for &s in samples {
        *counts.entry(s).or_default() += 1.0;
    }
    let mut tv = 0.0;
    for (t, p) in law {
        tv += (counts.get(t).copied().unwrap_or(0.0) / n - p).abs();
    }
    for (t, c) in &counts {
        if !law.contains_key(t) {
            tv += c / n;
        }
    }
    tv / 2.0
}

/// Pearson goodness of fit against expected probabilities; cells with
/// expected count below 5 are pooled into their neighbour. Returns the p-value.
pub fn chi_square_gof(samples: &[i64], law: &BTreeMap<i64, f64>) -> f64 {
    let n = samples.len() as f64;
    let mut counts: BTreeMap<i64, f64> = BTreeMap::new();
    for &s in samples {
        *counts.entry(s).or_default() += 1.0;
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (t, p) in law {
        obs += counts.get(t).copied().unwrap_or(0.0);
        exp += p * n;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    // outside the law's support, plus the leftover cell
    let outside: f64 = counts
        .iter()
        .filter(|(t, _)| !law.contains_key(t))
        .map(|(_, c)| c)
        .sum();
    if let Some(last) = cells.last_mut() {
        last.0 += obs + outside;
        last.1 += exp;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Two-sample chi-square homogeneity test on integer samples; bins with
/// fewer than 10 pooled observations are merged. Returns the p-value.
pub fn chi_square_two_sample(a: &[i64], b: &[i64]) -> f64 {
    let mut counts: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for &x in a {
        counts.entry(x).or_default().0 += 1.0;
    }
    for &x in b {
        counts.entry(x).or_default().1 += 1.0;
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (_, (ca, cb)) in counts {
        acc.0 += ca;
        acc.1 += cb;
        if acc.0 + acc.1 >= 10.0 {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += acc.0;
        last.1 += acc.1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let stat: f64 = cells
        .iter()
        .map(|(x, y)| {
            let t = (nb / na).sqrt() * x - (na / nb).sqrt() * y;
            t * t / (x + y)
        })
        .sum();
    let df = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Sample mean and naive standard error.
pub fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Exact determinant by cofactor expansion along the first row.
pub fn cofactor_det(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    match n {
        0 => 1,
        1 => m[0][0],
        _ => (0..n)
            .filter(|&j| m[0][j] != 0)
            .map(|j| {
                let minor: Vec<Vec<i128>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(c, _)| c != j)
                            .map(|(_, &x)| x)
                            .collect()
                    })
                    .collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                sign * m[0][j] * cofactor_det(&minor)
            })
            .sum(),
    }
}

pub fn l2(z: &[i64]) -> f64 {
    (z.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>()).sqrt()
}
