//! CSV formats for histograms, noise draws and per-coordinate summaries.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One column `count`, one row per cell.
pub fn write_histogram_csv<W: Write>(writer: W, values: &[i64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["count"])?;
    for v in values {
        w.write_record([v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_histogram_csv<R: Read>(reader: R) -> Result<Vec<i64>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let (count,): (i64,) = rec?;
        out.push(count);
    }
    Ok(out)
}

/// Header `draw,c0,...,c{d-1}`, one row per draw.
pub fn write_draws_csv<W: Write>(writer: W, draws: &[Vec<i64>]) -> Result<()> {
    let dim = draws.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["draw".to_string()];
    header.extend((0..dim).map(|i| format!("c{i}")));
    w.write_record(&header)?;
    for (n, z) in draws.iter().enumerate() {
        if z.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: z.len(),
            });
        }
        let mut row = vec![n.to_string()];
        row.extend(z.iter().map(i64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_draws_csv<R: Read>(reader: R) -> Result<Vec<Vec<i64>>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        let row: Vec<i64> = rec?;
        out.push(row[1..].to_vec());
    }
    Ok(out)
}

/// Location and spread of one coordinate across draws; enough for a box plot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub coordinate: usize,
    pub mean: f64,
    /// Naive standard error `sd / sqrt(n)`.
    pub std_error: f64,
    pub min: i64,
    pub q1: i64,
    pub median: i64,
    pub q3: i64,
    pub max: i64,
}

/// Inverse empirical CDF: the smallest value whose cumulative share reaches `p`.
pub fn quantile(sorted: &[i64], p: f64) -> i64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn summarize(draws: &[Vec<i64>]) -> Vec<CoordinateSummary> {
    let Some(first) = draws.first() else {
        return Vec::new();
    };
    let n = draws.len() as f64;
    (0..first.len())
        .map(|i| {
            let mut col: Vec<i64> = draws.iter().map(|z| z[i]).collect();
            let mean = col.iter().map(|&x| x as f64).sum::<f64>() / n;
            let var = if draws.len() > 1 {
                col.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            col.sort_unstable();
            CoordinateSummary {
                coordinate: i,
                mean,
                std_error: (var / n).sqrt(),
                min: col[0],
                q1: quantile(&col, 0.25),
                median: quantile(&col, 0.5),
                q3: quantile(&col, 0.75),
                max: col[col.len() - 1],
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(writer: W, summary: &[CoordinateSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in summary {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(reader: R) -> Result<Vec<CoordinateSummary>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantiles() {
        let v = [1, 2, 3, 4];
        assert_eq!(quantile(&v, 0.25), 1);
        assert_eq!(quantile(&v, 0.5), 2);
        assert_eq!(quantile(&v, 0.75), 3);
        assert_eq!(quantile(&v, 1.0), 4);
        assert_eq!(quantile(&[7], 0.5), 7);
    }

    #[test]
    fn single_draw_summary() {
        let s = summarize(&[vec![3, -1]]);
        assert_eq!(s.len(), 2);
        assert_eq!((s[1].min, s[1].median, s[1].max), (-1, -1, -1));
        assert_eq!(s[0].std_error, 0.0);
    }

    #[test]
    fn draws_format() {
        let mut buf = Vec::new();
        write_draws_csv(&mut buf, &[vec![1, -1], vec![0, 0]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "draw,c0,c1\n0,1,-1\n1,0,0\n");
    }

    proptest! {
        #[test]
        fn draws_round_trip(draws in prop::collection::vec(prop::collection::vec(any::<i64>(), 3), 1..20)) {
            let mut buf = Vec::new();
            write_draws_csv(&mut buf, &draws).unwrap();
            prop_assert_eq!(read_draws_csv(&buf[..]).unwrap(), draws);
        }

        #[test]
        fn histogram_round_trip(values in prop::collection::vec(0i64..1_000_000, 0..50)) {
            let mut buf = Vec::new();
            write_histogram_csv(&mut buf, &values).unwrap();
            prop_assert_eq!(read_histogram_csv(&buf[..]).unwrap(), values);
        }

        #[test]
        fn summary_round_trip(draws in prop::collection::vec(prop::collection::vec(-50i64..50, 2), 1..30)) {
            let s = summarize(&draws);
            let mut buf = Vec::new();
            write_summary_csv(&mut buf, &s).unwrap();
            let back = read_summary_csv(&buf[..]).unwrap();
            prop_assert_eq!(back.len(), s.len());
            for (a, b) in back.iter().zip(&s) {
                prop_assert_eq!((a.min, a.q1, a.median, a.q3, a.max), (b.min, b.q1, b.median, b.q3, b.max));
                prop_assert!((a.mean - b.mean).abs() <= 1e-12 * b.mean.abs().max(1.0));
            }
        }
    }
}
