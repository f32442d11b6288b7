//! Two-stage fluorescence readout: a state-selective stage where only `|1⟩`
//! scatters, then a presence stage where every trapped atom scatters.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagingParams {
    /// Mean stage-1 count of an atom in `|1⟩`.
    pub lambda_bright1: f64,
    /// Mean stage-1 count of an atom in `|0⟩` or an empty site.
    pub lambda_dark1: f64,
    /// Mean stage-2 count of a present atom.
    pub lambda_present2: f64,
    /// Mean stage-2 count of an empty site.
    pub lambda_bg2: f64,
    /// Chance a bright atom goes dark partway through stage 1.
    pub depump_prob: f64,
    /// Chance a present atom is lost during stage 1.
    pub loss_prob_stage1: f64,
    /// Frequency offset of the presence-stage beams, rad/s. Metadata only.
    #[serde(default)]
    pub pgc_detuning_offset: f64,
}

impl ImagingParams {
    /// Noise-free imaging: dark sites give zero counts, bright ones many.
    pub fn ideal() -> Self {
        Self {
            lambda_bright1: 100.0,
            lambda_dark1: 0.0,
            lambda_present2: 100.0,
            lambda_bg2: 0.0,
            depump_prob: 0.0,
            loss_prob_stage1: 0.0,
            pgc_detuning_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let means = [
            ("lambda_bright1", self.lambda_bright1),
            ("lambda_dark1", self.lambda_dark1),
            ("lambda_present2", self.lambda_present2),
            ("lambda_bg2", self.lambda_bg2),
        ];
        for (name, v) in means {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be finite and >= 0"));
            }
        }
        for (name, v) in [("depump_prob", self.depump_prob), ("loss_prob_stage1", self.loss_prob_stage1)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrueState {
    Zero,
    One,
    Lost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    Zero,
    One,
    Loss,
}

impl Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Class::Zero => "Zero",
            Class::One => "One",
            Class::Loss => "Loss",
        }
    }
}

impl std::fmt::Display for Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub t1: u32,
    pub t2: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub class: Class,
    pub c1: u32,
    pub c2: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Counts {
    pub c1: u32,
    pub c2: u32,
    /// Whether the atom was still trapped for stage 2.
    pub survived: bool,
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(d) => d.sample(rng) as u32,
        Err(_) => 0,
    }
}

/// Draws the two camera counts for one site.
pub fn simulate_counts<R: Rng + ?Sized>(state: TrueState, p: &ImagingParams, rng: &mut R) -> Counts {
    let c1 = match state {
        TrueState::One => {
            if rng.random::<f64>() < p.depump_prob {
                let u: f64 = rng.random();
                poisson(u * p.lambda_bright1, rng)
            } else {
                poisson(p.lambda_bright1, rng)
            }
        }
        TrueState::Zero | TrueState::Lost => poisson(p.lambda_dark1, rng),
    };
    let survived = match state {
        TrueState::Lost => false,
        _ => rng.random::<f64>() >= p.loss_prob_stage1,
    };
    let c2 = poisson(if survived { p.lambda_present2 } else { p.lambda_bg2 }, rng);
    Counts { c1, c2, survived }
}

/// Stage 1 decides `|1⟩`; otherwise stage 2 separates `|0⟩` from an empty site.
pub fn classify(c1: u32, c2: u32, th: &Thresholds) -> Outcome {
    let class = if c1 > th.t1 {
        Class::One
    } else if c2 > th.t2 {
        Class::Zero
    } else {
        Class::Loss
    };
    Outcome { class, c1, c2 }
}

fn expected_class(s: TrueState) -> Class {
    match s {
        TrueState::Zero => Class::Zero,
        TrueState::One => Class::One,
        TrueState::Lost => Class::Loss,
    }
}

/// Number of labeled samples `classify` gets wrong under `th`.
pub fn misclassifications(labeled: &[(TrueState, u32, u32)], th: &Thresholds) -> usize {
    labeled
        .iter()
        .filter(|(s, c1, c2)| classify(*c1, *c2, th).class != expected_class(*s))
        .count()
}

/// Integer thresholds minimizing the training misclassification count.
///
/// Every pair up to the largest observed counts is scored; ties go to the
/// larger `t1`, then the larger `t2`.
pub fn calibrate_thresholds(labeled: &[(TrueState, u32, u32)]) -> Result<Thresholds> {
    for (s, name) in [(TrueState::Zero, "Zero"), (TrueState::One, "One"), (TrueState::Lost, "Lost")] {
        if !labeled.iter().any(|(t, _, _)| *t == s) {
            return Err(Error::MissingClass(name));
        }
    }
    let max1 = labeled.iter().map(|x| x.1).max().unwrap_or(0) as usize;
    let max2 = labeled.iter().map(|x| x.2).max().unwrap_or(0) as usize;

    // Samples bucketed by c1 so t1 can sweep upward incrementally.
    let mut by_c1: Vec<Vec<(TrueState, u32)>> = vec![Vec::new(); max1 + 1];
    for &(s, c1, c2) in labeled {
        by_c1[c1 as usize].push((s, c2));
    }
    let mut non_ones_above = labeled.iter().filter(|x| x.0 != TrueState::One).count();
    let mut ones_below = 0usize;
    // Stage-2 histograms of Zero and Lost samples with c1 <= t1.
    let mut zero_hist = vec![0usize; max2 + 2];
    let mut lost_hist = vec![0usize; max2 + 2];

    let mut best = (usize::MAX, Thresholds { t1: 0, t2: 0 });
    for t1 in 0..=max1 {
        for &(s, c2) in &by_c1[t1] {
            match s {
                TrueState::One => ones_below += 1,
                TrueState::Zero => {
                    non_ones_above -= 1;
                    zero_hist[c2 as usize] += 1;
                }
                TrueState::Lost => {
                    non_ones_above -= 1;
                    lost_hist[c2 as usize] += 1;
                }
            }
        }
        // Zero samples with c2 <= t2 are called Loss; Lost samples with
        // c2 > t2 are called Zero.
        let mut zero_low = 0usize;
        let mut lost_high: usize = lost_hist.iter().sum();
        for t2 in 0..=max2 {
            zero_low += zero_hist[t2];
            lost_high -= lost_hist[t2];
            let err = non_ones_above + ones_below + zero_low + lost_high;
            if err <= best.0 {
                best = (
                    err,
                    Thresholds {
                        t1: t1 as u32,
                        t2: t2 as u32,
                    },
                );
            }
        }
    }
    Ok(best.1)
}

/// Draws a labeled calibration set with `n_per_class` samples of each state.
/// Atoms lost during stage 1 are labeled [`TrueState::Lost`].
pub fn labeled_samples<R: Rng + ?Sized>(p: &ImagingParams, n_per_class: usize, rng: &mut R) -> Vec<(TrueState, u32, u32)> {
    let mut out = Vec::with_capacity(3 * n_per_class);
    for s in [TrueState::Zero, TrueState::One, TrueState::Lost] {
        for _ in 0..n_per_class {
            let c = simulate_counts(s, p, rng);
            let label = if c.survived { s } else { TrueState::Lost };
            out.push((label, c.c1, c.c2));
        }
    }
    out
}

/// Row-stochastic matrix: row = prepared state (Zero, One, Lost), column =
/// assigned class (Zero, One, Loss).
pub type Confusion = [[f64; 3]; 3];

pub fn confusion_matrix<R: Rng + ?Sized>(p: &ImagingParams, th: &Thresholds, n_samples: usize, rng: &mut R) -> Result<Confusion> {
    Ok(evaluate_readout(p, th, n_samples, rng)?.confusion)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutReport {
    pub confusion: Confusion,
    /// Mean of the Zero and One diagonal entries.
    pub state_fidelity: f64,
    /// Fraction of atoms prepared present that stage 2 still sees.
    pub survival: f64,
}

/// Confusion matrix, state fidelity and survival from `n_samples` fresh
/// draws per prepared state.
pub fn evaluate_readout<R: Rng + ?Sized>(p: &ImagingParams, th: &Thresholds, n_samples: usize, rng: &mut R) -> Result<ReadoutReport> {
    if n_samples == 0 {
        return Err(Error::param("n_samples", "must be > 0"));
    }
    let mut confusion = [[0.0; 3]; 3];
    let mut seen = 0usize;
    for (row, s) in [TrueState::Zero, TrueState::One, TrueState::Lost].into_iter().enumerate() {
        let mut counts = [0usize; 3];
        for _ in 0..n_samples {
            let c = simulate_counts(s, p, rng);
            let col = match classify(c.c1, c.c2, th).class {
                Class::Zero => 0,
                Class::One => 1,
                Class::Loss => 2,
            };
            counts[col] += 1;
            if s != TrueState::Lost && c.c2 > th.t2 {
                seen += 1;
            }
        }
        for (dst, n) in confusion[row].iter_mut().zip(counts) {
            *dst = n as f64 / n_samples as f64;
        }
    }
    Ok(ReadoutReport {
        state_fidelity: 0.5 * (confusion[0][0] + confusion[1][1]),
        survival: seen as f64 / (2 * n_samples) as f64,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn noisy() -> ImagingParams {
        ImagingParams {
            lambda_bright1: 45.0,
            lambda_dark1: 1.5,
            lambda_present2: 40.0,
            lambda_bg2: 1.5,
            depump_prob: 0.1,
            loss_prob_stage1: 0.003,
            pgc_detuning_offset: 0.0,
        }
    }

    #[test]
    fn classify_examples() {
        let th = Thresholds { t1: 7, t2: 12 };
        assert_eq!(classify(8, 0, &th).class, Class::One);
        assert_eq!(classify(0, 13, &th).class, Class::Zero);
        assert_eq!(classify(0, 0, &th).class, Class::Loss);
    }

    #[test]
    fn count_means() {
        let mut r = rng(1);
        let n = 10_000;
        let p = noisy();
        let bg: f64 = (0..n).map(|_| simulate_counts(TrueState::Lost, &p, &mut r).c2 as f64).sum::<f64>() / n as f64;
        assert!((bg - p.lambda_bg2).abs() < 3.0 * (p.lambda_bg2 / n as f64).sqrt());
        let clean = ImagingParams {
            depump_prob: 0.0,
            loss_prob_stage1: 0.0,
            ..p
        };
        let bright: f64 = (0..n).map(|_| simulate_counts(TrueState::One, &clean, &mut r).c1 as f64).sum::<f64>() / n as f64;
        assert!((bright - clean.lambda_bright1).abs() < 3.0 * (clean.lambda_bright1 / n as f64).sqrt());
    }

    #[test]
    fn cluster_topology() {
        let mut r = rng(2);
        let p = noisy();
        let mean = |s: TrueState, r: &mut ChaCha8Rng| {
            let v: Vec<Counts> = (0..2000).map(|_| simulate_counts(s, &p, r)).collect();
            let m1 = v.iter().map(|c| c.c1 as f64).sum::<f64>() / 2000.0;
            let m2 = v.iter().map(|c| c.c2 as f64).sum::<f64>() / 2000.0;
            (m1, m2)
        };
        let one = mean(TrueState::One, &mut r);
        let zero = mean(TrueState::Zero, &mut r);
        let lost = mean(TrueState::Lost, &mut r);
        assert!(one.0 > 5.0 * zero.0 && one.0 > 5.0 * lost.0);
        assert!(zero.1 > 5.0 * lost.1);
    }

    #[test]
    fn separated_clusters_calibrate_perfectly() {
        let mut r = rng(3);
        let p = ImagingParams {
            lambda_bright1: 100.0,
            lambda_dark1: 1.0,
            lambda_present2: 100.0,
            lambda_bg2: 1.0,
            depump_prob: 0.0,
            loss_prob_stage1: 0.0,
            pgc_detuning_offset: 0.0,
        };
        let data = labeled_samples(&p, 1000, &mut r);
        let th = calibrate_thresholds(&data).unwrap();
        assert_eq!(misclassifications(&data, &th), 0);
    }

    #[test]
    fn calibration_beats_any_manual_choice() {
        let mut r = rng(4);
        let data = labeled_samples(&noisy(), 1500, &mut r);
        let th = calibrate_thresholds(&data).unwrap();
        let best = misclassifications(&data, &th);
        for t1 in 0..30 {
            for t2 in 0..30 {
                assert!(best <= misclassifications(&data, &Thresholds { t1, t2 }));
            }
        }
    }

    #[test]
    fn missing_class_is_reported() {
        let data = vec![(TrueState::Zero, 0, 30), (TrueState::One, 40, 30)];
        assert_eq!(calibrate_thresholds(&data), Err(Error::MissingClass("Lost")));
    }

    #[test]
    fn ideal_imaging_gives_identity() {
        let th = Thresholds { t1: 0, t2: 0 };
        let c = confusion_matrix(&ImagingParams::ideal(), &th, 1000, &mut rng(5)).unwrap();
        for (i, row) in c.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn swapping_means_swaps_the_diagonal() {
        let p = ImagingParams {
            lambda_bright1: 30.0,
            lambda_dark1: 3.0,
            depump_prob: 0.0,
            loss_prob_stage1: 0.0,
            ..noisy()
        };
        let swapped = ImagingParams {
            lambda_bright1: p.lambda_dark1,
            lambda_dark1: p.lambda_bright1,
            ..p.clone()
        };
        let th = Thresholds { t1: 12, t2: 12 };
        let a = confusion_matrix(&p, &th, 5000, &mut rng(6)).unwrap();
        let b = confusion_matrix(&swapped, &th, 5000, &mut rng(6)).unwrap();
        assert!(a[1][1] > 0.99 && a[0][0] > 0.99);
        assert!(b[1][0] > 0.99 && b[0][1] > 0.99);
    }

    #[test]
    fn brighter_never_hurts_one_diagonal() {
        let th = Thresholds { t1: 8, t2: 12 };
        let mut last = 0.0;
        for lb in [10.0, 20.0, 30.0, 45.0, 60.0] {
            let p = ImagingParams {
                lambda_bright1: lb,
                ..noisy()
            };
            let c = confusion_matrix(&p, &th, 20_000, &mut rng(7)).unwrap();
            let one = c[1][1];
            assert!(one + 3.0 * (0.25f64 / 20_000.0).sqrt() >= last, "{lb}: {one} < {last}");
            last = one;
        }
    }
}
