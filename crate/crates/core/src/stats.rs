//! Residual statistics: interpolated percentiles, per-layer box-plot
//! summaries and fixed-edge histograms.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fit::FitResult;

/// Linear-interpolation percentile on `(n - 1)` ranks.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    let mut sorted = values.to_vec();
    sort_finite(&mut sorted)?;
    percentile_sorted(&sorted, p)
}

fn sort_finite(values: &mut [f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyData);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("percentile input"));
    }
    values.sort_by(f64::total_cmp);
    Ok(())
}

/// [`percentile`] on data already sorted ascending.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyData);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidParameter {
            name: "percentile",
            value: p,
        });
    }
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = libm::floor(h) as usize;
    if lo + 1 >= sorted.len() {
        return Ok(sorted[sorted.len() - 1]);
    }
    Ok(sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo]))
}

/// Box-plot statistics: box from `q1` to `q3`, whiskers at `p5` and `p95`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub p5: f64,
    pub p95: f64,
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let mut sorted = values.to_vec();
        sort_finite(&mut sorted)?;
        let at = |p| percentile_sorted(&sorted, p);
        Ok(Self {
            median: at(50.0)?,
            q1: at(25.0)?,
            q3: at(75.0)?,
            p5: at(5.0)?,
            p95: at(95.0)?,
        })
    }

    pub fn is_ordered(&self) -> bool {
        self.p5 <= self.q1 && self.q1 <= self.median && self.median <= self.q3 && self.q3 <= self.p95
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSummary {
    pub layer_name: String,
    pub count: usize,
    pub degenerate_count: usize,
    /// `None` when the layer has no non-degenerate fits.
    pub stats: Option<BoxStats>,
}

impl LayerSummary {
    /// Summary over residuals of non-degenerate fits plus a count of degenerate ones.
    pub fn from_residuals(layer_name: &str, residuals: &[f64], degenerate_count: usize) -> Result<Self> {
        let stats = if residuals.is_empty() {
            None
        } else {
            Some(BoxStats::from_values(residuals)?)
        };
        Ok(Self {
            layer_name: layer_name.into(),
            count: residuals.len() + degenerate_count,
            degenerate_count,
            stats,
        })
    }
}

/// Summary of one layer's fits; degenerate fits are counted but excluded
/// from the statistics.
pub fn layer_summary(fits: &[FitResult], layer_name: &str) -> Result<LayerSummary> {
    let residuals: Vec<f64> = fits.iter().filter(|f| !f.degenerate).map(|f| f.rms).collect();
    let degenerate = fits.len() - residuals.len();
    LayerSummary::from_residuals(layer_name, &residuals, degenerate)
}

/// Counts per half-open bin `[e_i, e_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Values below the first edge.
    pub underflow: u64,
    /// Values at or above the last edge, and NaNs.
    pub overflow: u64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }
}

pub fn histogram(values: &[f64], bin_edges: &[f64]) -> Result<Histogram> {
    if bin_edges.len() < 2 {
        return Err(Error::InvalidSize("histogram needs at least two edges"));
    }
    if let Some(w) = bin_edges.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter {
            name: "bin_edges",
            value: w[1],
        });
    }
    let last = bin_edges[bin_edges.len() - 1];
    let mut hist = Histogram {
        edges: bin_edges.to_vec(),
        counts: alloc::vec![0; bin_edges.len() - 1],
        underflow: 0,
        overflow: 0,
    };
    for &v in values {
        if v < bin_edges[0] {
            hist.underflow += 1;
        } else if !(v < last) {
            hist.overflow += 1;
        } else {
            // Index of the last edge <= v.
            let i = bin_edges.partition_point(|&e| e <= v) - 1;
            hist.counts[i] += 1;
        }
    }
    Ok(hist)
}

pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_HIST_RANGE: (f64, f64) = (1e-6, 1.0);

/// `bins + 1` logarithmically spaced edges from `lo` to `hi` inclusive.
pub fn log_edges(bins: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::InvalidSize("histogram needs at least one bin"));
    }
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "range",
            value: lo,
        });
    }
    let ratio = libm::log(hi / lo);
    let mut edges: Vec<f64> = (0..=bins)
        .map(|i| lo * libm::exp(ratio * i as f64 / bins as f64))
        .collect();
    edges[0] = lo;
    edges[bins] = hi;
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 50.0).unwrap(), 2.5);
        for p in [0.0, 13.0, 50.0, 100.0] {
            assert_eq!(percentile(&[7.0], p).unwrap(), 7.0);
        }
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 100.0).unwrap(), 3.0);
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&[], 50.0), Err(Error::EmptyData));
        assert!(percentile(&[1.0], 101.0).is_err());
    }

    #[test]
    fn summary_constant_and_exclusion() {
        let s = LayerSummary::from_residuals("conv1", &[0.01; 5], 0).unwrap();
        let b = s.stats.unwrap();
        assert_eq!([b.median, b.q1, b.q3, b.p5, b.p95], [0.01; 5]);

        let mut fits = vec![];
        for (rms, degenerate) in [(0.1, false), (0.2, false), (0.0, true), (0.3, false), (0.4, false)] {
            fits.push(FitResult {
                params: crate::gabor::GaborParams::new(0.0, 0.0, crate::field::Freq2::ZERO, 1.0),
                rms,
                degenerate,
                iterations: 0,
                init_rank: 0,
                scale: 1.0,
            });
        }
        let s = layer_summary(&fits, "conv2").unwrap();
        assert_eq!((s.count, s.degenerate_count), (5, 1));
        assert_eq!(s.stats.unwrap().median, 0.25);

        let none = layer_summary(&fits[2..3], "flat").unwrap();
        assert_eq!((none.count, none.degenerate_count, none.stats), (1, 1, None));
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&[0.005, 0.05, 0.5], &[0.0, 0.01, 0.1, 1.0]).unwrap();
        assert_eq!(h.counts, vec![1, 1, 1]);
        let h = histogram(&[], &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(h.counts, vec![0, 0]);
        let h = histogram(&[-1.0, 0.0, 1.0, 2.0, f64::NAN], &[0.0, 1.0]).unwrap();
        assert_eq!((h.underflow, h.counts[0], h.overflow), (1, 1, 3));
        assert_eq!(h.total(), 5);
        assert!(histogram(&[1.0], &[0.0, 0.0, 1.0]).is_err());
        assert!(histogram(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn log_edges_span_range() {
        let e = log_edges(DEFAULT_BINS, DEFAULT_HIST_RANGE.0, DEFAULT_HIST_RANGE.1).unwrap();
        assert_eq!(e.len(), 51);
        assert_eq!((e[0], e[50]), (1e-6, 1.0));
        assert!(e.windows(2).all(|w| w[0] < w[1]));
        assert!((e[25] - 1e-3).abs() < 1e-15);
    }
}
