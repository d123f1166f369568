//! Equal-width histogram construction with square-root-rule bin counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::float::Real;

/// Errors from histogram construction.
#[derive(Debug, Error, PartialEq)]
pub enum HistogramError {
    /// Fewer than 2 values.
    #[error("need at least 2 values, got {0}")]
    TooFewValues(usize),
    /// All values identical: bin width would be zero.
    #[error("degenerate range: all values equal {0}")]
    DegenerateRange(f64),
    /// Zero bins requested or a non-finite value present.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Equal-width histogram over the exact data range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram<F> {
    /// Strictly increasing edges, length `nbins + 1`; first and last edge
    /// equal the data minimum and maximum exactly.
    pub bin_edges: Vec<F>,
    /// Per-bin counts; sums to `total`.
    pub counts: Vec<u64>,
    /// Number of binned values.
    pub total: u64,
}

impl<F: Real> Histogram<F> {
    pub fn nbins(&self) -> usize {
        self.counts.len()
    }

    /// Common bin width `(max − min)/nbins`.
    pub fn bin_width(&self) -> F {
        let n = self.nbins();
        (self.bin_edges[n] - self.bin_edges[0]) / F::of(n as f64)
    }

    /// Bin midpoints.
    pub fn centers(&self) -> Vec<F> {
        let w = self.bin_width();
        let half = w / F::of(2.0);
        (0..self.nbins())
            .map(|i| self.bin_edges[0] + w * F::of(i as f64) + half)
            .collect()
    }

    /// Per-bin density estimate `count/(total·binwidth)`; integrates to 1
    /// over the histogram support.
    pub fn densities(&self) -> Vec<F> {
        let norm = F::of(self.total as f64) * self.bin_width();
        self.counts.iter().map(|&c| F::of(c as f64) / norm).collect()
    }

    /// Checks edge monotonicity and the count-sum invariant.
    pub fn validate(&self) -> Result<(), HistogramError> {
        if self.counts.is_empty() || self.bin_edges.len() != self.counts.len() + 1 {
            return Err(HistogramError::InvalidParameter(
                "edges must be one longer than counts".into(),
            ));
        }
        if self.bin_edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HistogramError::InvalidParameter(
                "edges not strictly increasing".into(),
            ));
        }
        let sum: u64 = self.counts.iter().sum();
        if sum != self.total {
            return Err(HistogramError::InvalidParameter(format!(
                "counts sum to {sum}, total says {}",
                self.total
            )));
        }
        Ok(())
    }
}

/// Default bin count: square-root rule, rounded up (300 points → 18 bins).
pub fn default_nbins(n: usize) -> usize {
    (n as f64).sqrt().ceil() as usize
}

/// Bins `values` into `nbins` (default: square-root rule) equal-width bins
/// spanning `[min, max]` exactly. The maximum value lands in the last bin.
pub fn bin<F: Real>(values: &[F], nbins: Option<usize>) -> Result<Histogram<F>, HistogramError> {
    if values.len() < 2 {
        return Err(HistogramError::TooFewValues(values.len()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HistogramError::InvalidParameter("non-finite value".into()));
    }
    let nbins = nbins.unwrap_or_else(|| default_nbins(values.len()));
    if nbins == 0 {
        return Err(HistogramError::InvalidParameter("nbins = 0".into()));
    }
    let mut min = values[0];
    let mut max = values[0];
    for &v in &values[1..] {
        min = min.min(v);
        max = max.max(v);
    }
    if max <= min {
        return Err(HistogramError::DegenerateRange(min.as_f64()));
    }
    let range = max - min;
    let nbins_f = F::of(nbins as f64);
    let mut bin_edges: Vec<F> = (0..=nbins)
        .map(|i| min + range * F::of(i as f64) / nbins_f)
        .collect();
    bin_edges[0] = min;
    bin_edges[nbins] = max;
    if bin_edges.windows(2).any(|w| w[1] <= w[0]) {
        // Range too small for this many distinct edges in the float type.
        return Err(HistogramError::DegenerateRange(min.as_f64()));
    }
    let mut counts = vec![0u64; nbins];
    for &v in values {
        let idx = ((v - min) / range * nbins_f).as_f64().floor() as usize;
        counts[idx.min(nbins - 1)] += 1;
    }
    Ok(Histogram {
        bin_edges,
        counts,
        total: values.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_root_rule_gives_18_bins_for_300_points() {
        let values: Vec<f64> = (0..300).map(|i| i as f64).collect();
        let h = bin(&values, None).unwrap();
        assert_eq!(h.nbins(), 18);
        assert_eq!(h.total, 300);
        assert_eq!(h.counts.iter().sum::<u64>(), 300);
        h.validate().unwrap();
    }

    #[test]
    fn explicit_two_bins_split_evenly() {
        let h = bin(&[0.0, 1.0, 2.0, 3.0], Some(2)).unwrap();
        assert_eq!(h.counts, vec![2, 2]);
        assert_eq!(h.bin_edges, vec![0.0, 1.5, 3.0]);
    }

    #[test]
    fn edges_cover_data_range_exactly() {
        let values = [0.137, -2.4, 5.25, 1.0, 0.0];
        let h = bin(&values, Some(7)).unwrap();
        assert_eq!(h.bin_edges[0], -2.4);
        assert_eq!(h.bin_edges[7], 5.25);
        assert_eq!(h.total, 5);
    }

    #[test]
    fn uniform_samples_fill_bins_binomially() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let values: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..1.0)).collect();
        let h = bin(&values, None).unwrap();
        assert_eq!(h.nbins(), 100);
        // Expected 100 per bin; 5-sigma binomial band is 100 ± 50.
        assert!(
            h.counts.iter().all(|&c| (50..=150).contains(&c)),
            "counts outside 5-sigma band: {:?}",
            h.counts
        );
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert_eq!(bin::<f64>(&[1.0], None), Err(HistogramError::TooFewValues(1)));
        assert_eq!(
            bin(&[3.7, 3.7, 3.7], None),
            Err(HistogramError::DegenerateRange(3.7))
        );
        assert!(matches!(
            bin(&[0.0, f64::NAN], None),
            Err(HistogramError::InvalidParameter(_))
        ));
        assert!(matches!(
            bin(&[0.0, 1.0], Some(0)),
            Err(HistogramError::InvalidParameter(_))
        ));
    }

    #[test]
    fn densities_integrate_to_one() {
        let values: Vec<f64> = (0..500).map(|i| (i as f64 * 0.7).sin()).collect();
        let h = bin(&values, None).unwrap();
        let integral: f64 = h.densities().iter().map(|d| d * h.bin_width()).sum();
        assert!((integral - 1.0).abs() < 1e-12);
    }
}
