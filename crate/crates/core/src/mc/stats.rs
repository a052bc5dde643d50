use serde::{Deserialize, Serialize};

/// Default number of batches for batch-means standard errors.
pub const BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub replicates: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            replicates: 0,
        }
    }

    /// Fraction with the binomial standard error `sqrt(p(1-p)/n)`.
    pub fn binomial(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self {
                value: f64::NAN,
                std_error: f64::INFINITY,
                replicates: 0,
            };
        }
        let p = successes as f64 / trials as f64;
        Self {
            value: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            replicates: trials,
        }
    }

    /// `|self - other|` in units of the combined standard error. Returns
    /// infinity when the values differ but both errors vanish.
    pub fn z_distance(&self, other: &Estimate) -> f64 {
        let diff = (self.value - other.value).abs();
        let err = self.std_error.hypot(other.std_error);
        if diff == 0.0 {
            0.0
        } else if err == 0.0 {
            f64::INFINITY
        } else {
            diff / err
        }
    }
}

/// Sample mean with a batch-means standard error.
///
/// The samples are cut into `batches` contiguous groups; the error is the
/// standard deviation of the group means over `sqrt(batches)`.
pub fn batch_means(samples: &[f64], batches: usize) -> Estimate {
    let n = samples.len();
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            std_error: f64::INFINITY,
            replicates: 0,
        };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let b = batches.min(n / 2).max(1);
    let std_error = if b < 2 {
        if n < 2 {
            f64::INFINITY
        } else {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        }
    } else {
        let size = n / b;
        let means: Vec<f64> = (0..b)
            .map(|k| {
                let end = if k + 1 == b { n } else { (k + 1) * size };
                let chunk = &samples[k * size..end];
                chunk.iter().sum::<f64>() / chunk.len() as f64
            })
            .collect();
        let mm = means.iter().sum::<f64>() / b as f64;
        let var = means.iter().map(|x| (x - mm).powi(2)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    };
    Estimate {
        value: mean,
        std_error,
        replicates: n as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binomial_edges() {
        let e = Estimate::binomial(10, 10);
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
        let e = Estimate::binomial(25, 100);
        assert!((e.std_error - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn batch_means_matches_iid_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..64_000).map(|_| rng.random::<f64>()).collect();
        let e = batch_means(&xs, BATCHES);
        let iid = (1.0 / 12.0 / 64_000.0f64).sqrt();
        assert!((e.value - 0.5).abs() < 4.0 * iid);
        assert!(e.std_error > 0.5 * iid && e.std_error < 1.6 * iid, "{} vs {}", e.std_error, iid);
    }

    #[test]
    fn constant_samples_have_zero_error() {
        let e = batch_means(&[1.0; 100], BATCHES);
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn z_distance() {
        let a = Estimate { value: 1.0, std_error: 0.3, replicates: 1 };
        let b = Estimate { value: 2.0, std_error: 0.4, replicates: 1 };
        assert!((a.z_distance(&b) - 2.0).abs() < 1e-12);
        assert_eq!(Estimate::exact(1.0).z_distance(&Estimate::exact(2.0)), f64::INFINITY);
    }
}
