//! Two-phase weighted frequency-based epoch sampling.
//!
//! An epoch's draw budget is split in two: an α fraction is drawn with
//! replacement with probability proportional to
//! `ψ(1/freq(subject), 1/freq(object))` — so quadruples touching rare
//! entities come up more often — and the remaining (1-α) fraction is drawn
//! uniformly with replacement. Frequencies are the incremental counts
//! observed up to and including the current task's training data, so the
//! emphasis adapts as the entity distribution drifts.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FrequencyTracker, Quadruple};
use crate::error::{Error, Result};

/// How the two inverse frequencies of a quad are folded into one weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiMode {
    /// `min(1/freq(s), 1/freq(o))` — a quad is only as heavy as its more
    /// frequent endpoint.
    Min,
    /// `max(1/freq(s), 1/freq(o))` — one rare endpoint is enough.
    Max,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Fraction of the epoch drawn by weight; 0 is plain uniform sampling.
    pub alpha: f64,
    pub psi: PsiMode,
    /// Draws per epoch; 0 means "the size of the training set".
    pub epoch_size: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            psi: PsiMode::Max,
            epoch_size: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// `ψ(1/freq(s), 1/freq(o))` for one quad. Errors if either entity has a
/// zero count — the tracker must have observed the training data first.
pub fn quad_weight(tracker: &FrequencyTracker, quad: &Quadruple, psi: PsiMode) -> Result<f64> {
    let fs = tracker.freq(quad.subject);
    let fo = tracker.freq(quad.object);
    if fs == 0 || fo == 0 {
        return Err(Error::Data(format!(
            "quad ({}, {}, {}, {}) has an unobserved entity (freq {fs}/{fo}); \
             observe the training data before weighting",
            quad.subject, quad.relation, quad.object, quad.time
        )));
    }
    let ws = 1.0 / fs as f64;
    let wo = 1.0 / fo as f64;
    Ok(match psi {
        PsiMode::Min => ws.min(wo),
        PsiMode::Max => ws.max(wo),
        PsiMode::Mean => 0.5 * (ws + wo),
    })
}

/// Inverse-transform sampling over a cumulative weight sum: `O(n)` to build,
/// `O(log n)` per draw.
pub struct CumulativeSampler {
    cumulative: Vec<f64>,
    total: f64,
}

impl CumulativeSampler {
    pub fn new(weights: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for w in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Data(format!("invalid sampling weight {w}")));
            }
            total += w;
            cumulative.push(total);
        }
        if cumulative.is_empty() || total <= 0.0 {
            return Err(Error::Data(
                "need at least one positive sampling weight".into(),
            ));
        }
        Ok(Self { cumulative, total })
    }

    pub fn draw(&self, rng: &mut impl Rng) -> usize {
        let x = rng.gen_range(0.0..self.total);
        self.cumulative.partition_point(|&c| c <= x)
    }
}

/// One epoch of training draws: `round(α · epoch_size)` weighted draws
/// followed by uniform draws up to `epoch_size`, shuffled together.
/// Both phases draw with replacement. Deterministic given the rng state.
pub fn two_phase_sample(
    data: &[Quadruple],
    tracker: &FrequencyTracker,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<Vec<Quadruple>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("cannot sample from an empty task".into()));
    }
    let epoch_size = if cfg.epoch_size == 0 {
        data.len()
    } else {
        cfg.epoch_size
    };
    let weighted_draws = (cfg.alpha * epoch_size as f64).round() as usize;

    let mut out = Vec::with_capacity(epoch_size);
    if weighted_draws > 0 {
        let weights: Result<Vec<f64>> = data
            .iter()
            .map(|q| quad_weight(tracker, q, cfg.psi))
            .collect();
        let sampler = CumulativeSampler::new(weights?)?;
        for _ in 0..weighted_draws {
            out.push(data[sampler.draw(rng)]);
        }
    }
    for _ in weighted_draws..epoch_size {
        out.push(data[rng.gen_range(0..data.len())]);
    }
    out.shuffle(rng);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn tracked(quads: &[Quadruple]) -> FrequencyTracker {
        let mut t = FrequencyTracker::new();
        t.observe(quads);
        t
    }

    #[test]
    fn quad_weight_psi_modes() {
        // freq(0) = 2 (two subject slots), freq(1) = 4 via repeats.
        let stream = vec![
            Quadruple::new(0, 0, 1, 0),
            Quadruple::new(0, 0, 1, 1),
            Quadruple::new(2, 0, 1, 2),
            Quadruple::new(2, 0, 1, 3),
        ];
        let t = tracked(&stream);
        assert_eq!(t.freq(0), 2);
        assert_eq!(t.freq(1), 4);
        let q = Quadruple::new(0, 0, 1, 0);
        assert_eq!(quad_weight(&t, &q, PsiMode::Min).unwrap(), 0.25);
        assert_eq!(quad_weight(&t, &q, PsiMode::Max).unwrap(), 0.5);
        assert_eq!(quad_weight(&t, &q, PsiMode::Mean).unwrap(), 0.375);
    }

    #[test]
    fn fresh_entities_weight_one_under_every_psi() {
        let q = Quadruple::new(5, 0, 6, 0);
        let t = tracked(&[q]);
        for psi in [PsiMode::Min, PsiMode::Max, PsiMode::Mean] {
            assert_eq!(quad_weight(&t, &q, psi).unwrap(), 1.0);
        }
    }

    #[test]
    fn unobserved_entity_is_an_error() {
        let t = tracked(&[Quadruple::new(0, 0, 1, 0)]);
        let q = Quadruple::new(0, 0, 9, 0);
        assert!(quad_weight(&t, &q, PsiMode::Min).is_err());
    }

    #[test]
    fn phase_sizes_are_exact() {
        let data: Vec<Quadruple> = (0..10).map(|i| Quadruple::new(i, 0, i, 0)).collect();
        let t = tracked(&data);
        let cfg = SamplerConfig {
            alpha: 0.5,
            epoch_size: 100,
            ..Default::default()
        };
        let mut rng = stream_rng(1, Stream::Sampler);
        let sample = two_phase_sample(&data, &t, &cfg, &mut rng).unwrap();
        assert_eq!(sample.len(), 100);
    }

    #[test]
    fn same_seed_same_sequence() {
        let data: Vec<Quadruple> = (0..25).map(|i| Quadruple::new(i, 0, (i + 1) % 25, 0)).collect();
        let t = tracked(&data);
        let cfg = SamplerConfig {
            alpha: 0.3,
            epoch_size: 64,
            ..Default::default()
        };
        let mut r1 = stream_rng(77, Stream::Sampler);
        let mut r2 = stream_rng(77, Stream::Sampler);
        assert_eq!(
            two_phase_sample(&data, &t, &cfg, &mut r1).unwrap(),
            two_phase_sample(&data, &t, &cfg, &mut r2).unwrap()
        );
    }

    #[test]
    fn alpha_zero_is_uniform() {
        // χ² against the uniform distribution over 20 quads, 100k draws.
        let data: Vec<Quadruple> = (0..20).map(|i| Quadruple::new(i, 0, i, 0)).collect();
        let t = tracked(&data);
        let cfg = SamplerConfig {
            alpha: 0.0,
            epoch_size: 100_000,
            ..Default::default()
        };
        let mut rng = stream_rng(3, Stream::Sampler);
        let sample = two_phase_sample(&data, &t, &cfg, &mut rng).unwrap();
        let mut counts = vec![0f64; 20];
        for q in &sample {
            counts[q.subject] += 1.0;
        }
        let expected = 100_000.0 / 20.0;
        let chi2: f64 = counts
            .iter()
            .map(|c| (c - expected).powi(2) / expected)
            .sum();
        // 99th percentile of χ²(19) is 36.19.
        assert!(chi2 < 36.19, "chi2 = {chi2}");
    }

    #[test]
    fn alpha_one_follows_the_weights() {
        // Two quads with weights 0.25 and 0.75 → expect a 1:3 draw ratio.
        let a = Quadruple::new(0, 0, 0, 0);
        let b = Quadruple::new(1, 0, 1, 1);
        let mut t = FrequencyTracker::new();
        // freq(0) = 6, freq(1) = 2 → max-ψ weights 1/6 and 1/2, ratio 1:3.
        t.observe(&[a, a, a, b]);
        let data = vec![a, b];
        let cfg = SamplerConfig {
            alpha: 1.0,
            psi: PsiMode::Max,
            epoch_size: 100_000,
        };
        let mut rng = stream_rng(4, Stream::Sampler);
        let sample = two_phase_sample(&data, &t, &cfg, &mut rng).unwrap();
        let count_b = sample.iter().filter(|q| q.subject == 1).count() as f64;
        let ratio = count_b / 100_000.0;
        assert!((ratio - 0.75).abs() < 0.75 * 0.02, "ratio {ratio}");
    }

    #[test]
    fn mixture_marginal_matches_the_law() {
        // P(q) = α·w_q/Σw + (1-α)/N, χ² over 100k draws.
        let data: Vec<Quadruple> = (0..10).map(|i| Quadruple::new(i, 0, i, 0)).collect();
        let mut t = FrequencyTracker::new();
        for (i, q) in data.iter().enumerate() {
            for _ in 0..=i {
                t.observe(&[*q]);
            }
        }
        let alpha = 0.6;
        let cfg = SamplerConfig {
            alpha,
            psi: PsiMode::Min,
            epoch_size: 100_000,
        };
        let weights: Vec<f64> = data
            .iter()
            .map(|q| quad_weight(&t, q, PsiMode::Min).unwrap())
            .collect();
        let wsum: f64 = weights.iter().sum();
        let mut rng = stream_rng(9, Stream::Sampler);
        let sample = two_phase_sample(&data, &t, &cfg, &mut rng).unwrap();
        let mut counts = vec![0f64; 10];
        for q in &sample {
            counts[q.subject] += 1.0;
        }
        let chi2: f64 = counts
            .iter()
            .zip(&weights)
            .map(|(c, w)| {
                let p = alpha * w / wsum + (1.0 - alpha) / 10.0;
                let e = 100_000.0 * p;
                (c - e).powi(2) / e
            })
            .sum();
        // 99th percentile of χ²(9) is 21.67.
        assert!(chi2 < 21.67, "chi2 = {chi2}");
    }
}
