/// Rank-based popularity: `P(rank = k) = k^-s / sum_j j^-s`, ranks `1..=n`.
///
/// Sampling inverts a precomputed cumulative table.
#[derive(Clone, Debug)]
pub struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    pub fn new(n: usize, s: f64) -> Self {
        assert!(n >= 1, "zipf needs at least one rank");
        assert!(s >= 0.0 && s.is_finite(), "zipf exponent must be >= 0");
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = (1..=n)
            .map(|k| {
                acc += (k as f64).powf(-s);
                acc
            })
            .collect();
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }
        cdf[n - 1] = 1.0;
        Self { cdf }
    }

    pub fn n(&self) -> usize {
        self.cdf.len()
    }

    pub fn probability(&self, rank: usize) -> f64 {
        assert!((1..=self.n()).contains(&rank));
        let lo = if rank == 1 { 0.0 } else { self.cdf[rank - 2] };
        self.cdf[rank - 1] - lo
    }

    /// Maps `u` in `[0, 1)` to a rank in `1..=n`.
    pub fn sample(&self, u: f64) -> usize {
        debug_assert!((0.0..1.0).contains(&u));
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.n() - 1) + 1
    }
}

/// One-shot Zipf draw. Builds the table each call; keep a [`Zipf`] around
/// for repeated sampling.
pub fn zipf_sample(n: usize, s: f64, u: f64) -> usize {
    Zipf::new(n, s).sample(u)
}

/// Popularity weight after ageing: halves every `aging_tau` seconds.
pub fn aged_popularity(base_weight: f64, t_since_release: f64, aging_tau: f64) -> f64 {
    assert!(aging_tau > 0.0);
    base_weight * (-t_since_release / aging_tau).exp2()
}
