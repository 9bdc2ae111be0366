//! One-coin competence estimation: a pairwise-agreement initializer followed
//! by EM.
//!
//! Classes are `1..=K`. Partial label matrices are supported: agreement rates
//! use co-labeled samples only and the M-step averages over the samples each
//! classifier actually labeled.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("classifiers {0} and {1} share no labeled sample")]
    NoOverlap(usize, usize),
    #[error("no usable classifier pair to initialize classifier {0}")]
    NoAnchorPair(usize),
    #[error("zero agreement statistic between anchors {0} and {1}")]
    ZeroDenominator(usize, usize),
    #[error("need at least 3 classifiers, got {0}")]
    TooFewClassifiers(usize),
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(u32),
    #[error("label matrix is empty")]
    Empty,
    #[error("label ({sample}, {classifier}) = {class} outside 1..={k}")]
    BadLabel {
        sample: usize,
        classifier: usize,
        class: u32,
        k: u32,
    },
    #[error("classifier {classifier} outside 0..{n}")]
    BadClassifier { classifier: usize, n: usize },
}

/// Observed labels, `samples x classifiers`, with missing entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    n_samples: usize,
    n_classifiers: usize,
    k: u32,
    cells: Vec<Option<u32>>,
}

impl LabelMatrix {
    pub fn new(n_classifiers: usize, k: u32) -> Result<Self, LearnError> {
        if k < 2 {
            return Err(LearnError::TooFewClasses(k));
        }
        Ok(LabelMatrix {
            n_samples: 0,
            n_classifiers,
            k,
            cells: Vec::new(),
        })
    }

    /// Appends a sample row; `row[m]` is classifier `m`'s class, if any.
    pub fn push_row(&mut self, row: &[Option<u32>]) -> Result<usize, LearnError> {
        if row.len() != self.n_classifiers {
            return Err(LearnError::BadClassifier {
                classifier: row.len(),
                n: self.n_classifiers,
            });
        }
        for (m, c) in row.iter().enumerate() {
            if let Some(c) = *c {
                if c == 0 || c > self.k {
                    return Err(LearnError::BadLabel {
                        sample: self.n_samples,
                        classifier: m,
                        class: c,
                        k: self.k,
                    });
                }
            }
        }
        self.cells.extend_from_slice(row);
        self.n_samples += 1;
        Ok(self.n_samples - 1)
    }

    pub fn from_triples(
        n_samples: usize,
        n_classifiers: usize,
        k: u32,
        triples: impl IntoIterator<Item = (usize, usize, u32)>,
    ) -> Result<Self, LearnError> {
        let mut mat = LabelMatrix::new(n_classifiers, k)?;
        mat.cells = vec![None; n_samples * n_classifiers];
        mat.n_samples = n_samples;
        for (s, m, c) in triples {
            if m >= n_classifiers || s >= n_samples {
                return Err(LearnError::BadClassifier {
                    classifier: m,
                    n: n_classifiers,
                });
            }
            if c == 0 || c > k {
                return Err(LearnError::BadLabel {
                    sample: s,
                    classifier: m,
                    class: c,
                    k,
                });
            }
            mat.cells[s * n_classifiers + m] = Some(c);
        }
        Ok(mat)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_classifiers(&self) -> usize {
        self.n_classifiers
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn get(&self, sample: usize, classifier: usize) -> Option<u32> {
        self.cells[sample * self.n_classifiers + classifier]
    }

    pub fn row(&self, sample: usize) -> &[Option<u32>] {
        &self.cells[sample * self.n_classifiers..(sample + 1) * self.n_classifiers]
    }

    pub fn n_labels(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }
}

/// Pairwise statistics `N_{mm'} = (K-1)/K (agree_rate - 1/K)`; `None` where a
/// pair has no co-labeled sample. The diagonal is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementMatrix {
    n: usize,
    values: Vec<Option<f64>>,
}

impl AgreementMatrix {
    pub fn from_dense(n: usize, values: Vec<Option<f64>>) -> Self {
        assert_eq!(values.len(), n * n);
        AgreementMatrix { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn entry(&self, a: usize, b: usize) -> Option<f64> {
        self.values[a * self.n + b]
    }

    pub fn get(&self, a: usize, b: usize) -> Result<f64, LearnError> {
        self.entry(a, b)
            .ok_or(LearnError::NoOverlap(a.min(b), a.max(b)))
    }
}

pub fn agreement_stats(data: &LabelMatrix) -> AgreementMatrix {
    let n = data.n_classifiers;
    let k = data.k as f64;
    let mut agree = vec![0usize; n * n];
    let mut both = vec![0usize; n * n];
    for s in 0..data.n_samples {
        let row = data.row(s);
        for a in 0..n {
            let Some(la) = row[a] else { continue };
            for b in (a + 1)..n {
                let Some(lb) = row[b] else { continue };
                both[a * n + b] += 1;
                if la == lb {
                    agree[a * n + b] += 1;
                }
            }
        }
    }
    let mut values = vec![None; n * n];
    for a in 0..n {
        for b in (a + 1)..n {
            let cnt = both[a * n + b];
            if cnt > 0 {
                let rate = agree[a * n + b] as f64 / cnt as f64;
                let v = (k - 1.0) / k * (rate - 1.0 / k);
                values[a * n + b] = Some(v);
                values[b * n + a] = Some(v);
            }
        }
    }
    AgreementMatrix { n, values }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub clamp_eps: f64,
    /// Flip when the initial mean is at least `1/K`, as the printed rule
    /// reads, instead of when it is below `1/K`.
    pub literal_flip: bool,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            max_iters: 100,
            tol: 1e-8,
            clamp_eps: 1e-4,
            literal_flip: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralInit {
    pub p_hat: Vec<f64>,
    /// Times the value under the square root was negative and clamped to 0.
    pub negative_sqrt: usize,
    pub flipped: bool,
}

pub fn clamp_estimates(p: &mut [f64], k: u32, eps: f64) {
    let lo = 1.0 / k as f64 + eps;
    let hi = 1.0 - eps;
    for v in p.iter_mut() {
        *v = v.clamp(lo, hi);
    }
}

/// Initial estimates from agreement statistics. For each classifier `i` the
/// anchor pair `(m, m')`, both distinct from `i`, maximizes `|N_{mm'}|` among
/// pairs whose three statistics are all defined (ties by lexicographic pair
/// order); then
/// `p_i = 1/K + sign(N_{im}) sqrt(N_{im} N_{im'} / N_{mm'})`.
/// The estimates are reflected through `1/K` when their mean falls below it,
/// then clamped.
pub fn spectral_init(
    stats: &AgreementMatrix,
    k: u32,
    opts: &LearnOptions,
) -> Result<SpectralInit, LearnError> {
    let n = stats.len();
    if n < 3 {
        return Err(LearnError::TooFewClassifiers(n));
    }
    let kf = k as f64;
    let mut p_hat = Vec::with_capacity(n);
    let mut negative_sqrt = 0;
    for i in 0..n {
        let mut anchor: Option<(usize, usize, f64)> = None;
        for a in 0..n {
            if a == i || stats.entry(i, a).is_none() {
                continue;
            }
            for b in (a + 1)..n {
                if b == i || stats.entry(i, b).is_none() {
                    continue;
                }
                let Some(v) = stats.entry(a, b) else { continue };
                if anchor.is_none_or(|(_, _, best)| v.abs() > best) {
                    anchor = Some((a, b, v.abs()));
                }
            }
        }
        let (a, b, _) = anchor.ok_or(LearnError::NoAnchorPair(i))?;
        let denom = stats.get(a, b)?;
        if denom == 0.0 {
            return Err(LearnError::ZeroDenominator(a, b));
        }
        let n_ia = stats.get(i, a)?;
        let n_ib = stats.get(i, b)?;
        let mut ratio = n_ia * n_ib / denom;
        if ratio < 0.0 {
            negative_sqrt += 1;
            ratio = 0.0;
        }
        let sign = if n_ia > 0.0 {
            1.0
        } else if n_ia < 0.0 {
            -1.0
        } else {
            0.0
        };
        p_hat.push(1.0 / kf + sign * ratio.sqrt());
    }
    let mean = p_hat.iter().sum::<f64>() / n as f64;
    let flip = if opts.literal_flip {
        mean >= 1.0 / kf
    } else {
        mean < 1.0 / kf
    };
    if flip {
        for v in &mut p_hat {
            *v = 2.0 / kf - *v;
        }
    }
    clamp_estimates(&mut p_hat, k, opts.clamp_eps);
    Ok(SpectralInit {
        p_hat,
        negative_sqrt,
        flipped: flip,
    })
}

/// Per-sample class posteriors, `samples x K`, rows summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    pub k: usize,
    pub q: Vec<f64>,
}

impl Posteriors {
    pub fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.k..(s + 1) * self.k]
    }
}

pub fn e_step(data: &LabelMatrix, p_hat: &[f64]) -> Posteriors {
    let k = data.k as usize;
    let other = (k - 1) as f64;
    let log_hit: Vec<f64> = p_hat.iter().map(|p| p.ln()).collect();
    let log_miss: Vec<f64> = p_hat.iter().map(|p| ((1.0 - p) / other).ln()).collect();
    let mut q = vec![0.0; data.n_samples * k];
    let mut logs = vec![0.0; k];
    for s in 0..data.n_samples {
        logs.iter_mut().for_each(|v| *v = 0.0);
        for (m, label) in data.row(s).iter().enumerate() {
            let Some(label) = *label else { continue };
            for (class, v) in logs.iter_mut().enumerate() {
                *v += if class + 1 == label as usize {
                    log_hit[m]
                } else {
                    log_miss[m]
                };
            }
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logs.iter().map(|v| (v - top).exp()).sum();
        for (class, v) in logs.iter().enumerate() {
            q[s * k + class] = (v - top).exp() / z;
        }
    }
    Posteriors { k, q }
}

/// `p_i` = mean posterior mass on classifier `i`'s own labels over the
/// samples it labeled. Classifiers with no labels keep `prior`.
pub fn m_step(data: &LabelMatrix, post: &Posteriors, prior: &[f64]) -> Vec<f64> {
    let n = data.n_classifiers;
    let mut hit = vec![0.0; n];
    let mut count = vec![0usize; n];
    for s in 0..data.n_samples {
        let q = post.row(s);
        for (m, label) in data.row(s).iter().enumerate() {
            if let Some(label) = *label {
                hit[m] += q[label as usize - 1];
                count[m] += 1;
            }
        }
    }
    (0..n)
        .map(|m| {
            if count[m] == 0 {
                prior[m]
            } else {
                hit[m] / count[m] as f64
            }
        })
        .collect()
}

/// One E-step and one M-step; the result is not clamped.
pub fn em_iterate(data: &LabelMatrix, p_hat: &[f64]) -> Vec<f64> {
    m_step(data, &e_step(data, p_hat), p_hat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedCompetences {
    pub p_hat: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub negative_sqrt: usize,
}

impl LearnedCompetences {
    /// `max_m |p_hat_m - p_m|`.
    pub fn error_inf(&self, truth: &[f64]) -> f64 {
        self.p_hat
            .iter()
            .zip(truth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn online_learn(
    data: &LabelMatrix,
    opts: &LearnOptions,
) -> Result<LearnedCompetences, LearnError> {
    if data.n_samples == 0 || data.n_labels() == 0 {
        return Err(LearnError::Empty);
    }
    let stats = agreement_stats(data);
    let init = spectral_init(&stats, data.k, opts)?;
    let mut p_hat = init.p_hat;
    let mut iterations_run = 0;
    let mut converged = false;
    while iterations_run < opts.max_iters {
        let mut next = em_iterate(data, &p_hat);
        clamp_estimates(&mut next, data.k, opts.clamp_eps);
        iterations_run += 1;
        let change = next
            .iter()
            .zip(&p_hat)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        p_hat = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(LearnedCompetences {
        p_hat,
        iterations_run,
        converged,
        negative_sqrt: init.negative_sqrt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simulate(p: &[f64], n: usize, seed: u64) -> LabelMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = LabelMatrix::new(p.len(), 2).unwrap();
        for _ in 0..n {
            let truth: u32 = if rng.gen_bool(0.5) { 1 } else { 2 };
            let row: Vec<Option<u32>> = p
                .iter()
                .map(|&q| Some(if rng.gen_bool(q) { truth } else { 3 - truth }))
                .collect();
            mat.push_row(&row).unwrap();
        }
        mat
    }

    fn pair(rows: &[[u32; 2]]) -> LabelMatrix {
        let mut mat = LabelMatrix::new(2, 2).unwrap();
        for r in rows {
            mat.push_row(&[Some(r[0]), Some(r[1])]).unwrap();
        }
        mat
    }

    #[test]
    fn agreement_full_half_none() {
        let all = agreement_stats(&pair(&[[1, 1], [2, 2], [1, 1], [2, 2]]));
        assert_eq!(all.get(0, 1).unwrap(), 0.25);
        let half = agreement_stats(&pair(&[[1, 1], [2, 1], [1, 2], [2, 2]]));
        assert_eq!(half.get(0, 1).unwrap(), 0.0);
        let never = agreement_stats(&pair(&[[1, 2], [2, 1]]));
        assert_eq!(never.get(1, 0).unwrap(), -0.25);
    }

    #[test]
    fn agreement_reports_pair_without_overlap() {
        let mat = LabelMatrix::from_triples(2, 3, 2, [(0, 0, 1), (0, 1, 1), (1, 2, 2)]).unwrap();
        let stats = agreement_stats(&mat);
        assert_eq!(stats.get(2, 0), Err(LearnError::NoOverlap(0, 2)));
        assert!(stats.get(0, 1).is_ok());
    }

    #[test]
    fn spectral_init_recovers_population_competences() {
        let truth = [0.9, 0.8, 0.7];
        let data = simulate(&truth, 100_000, 11);
        let init = spectral_init(&agreement_stats(&data), 2, &LearnOptions::default()).unwrap();
        for (a, b) in init.p_hat.iter().zip(truth) {
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
    }

    #[test]
    fn spectral_init_near_perfect_classifiers() {
        let data = simulate(&[0.99, 0.99, 0.99], 20_000, 3);
        let init = spectral_init(&agreement_stats(&data), 2, &LearnOptions::default()).unwrap();
        for v in init.p_hat {
            assert!((v - 0.99).abs() < 0.02, "{v}");
        }
    }

    #[test]
    fn flip_lifts_mean_above_chance() {
        // Population statistics for p = (0.9, 0.2, 0.2, 0.2): the raw initializer
        // lands at (0.1, 0.2, 0.2, 0.2).
        let p = [0.9, 0.2, 0.2, 0.2];
        let mut vals = vec![None; 16];
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    vals[a * 4 + b] = Some((2.0 * p[a] - 1.0) * (2.0 * p[b] - 1.0) / 4.0);
                }
            }
        }
        let stats = AgreementMatrix::from_dense(4, vals);
        let init = spectral_init(&stats, 2, &LearnOptions::default()).unwrap();
        assert!(init.flipped);
        let mean = init.p_hat.iter().sum::<f64>() / 4.0;
        assert!(mean >= 0.5);
        assert!((init.p_hat[0] - 0.9).abs() < 1e-12);
        assert!((init.p_hat[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn negative_ratio_is_clamped_and_counted() {
        let mut vals = vec![None; 9];
        let mut set = |a: usize, b: usize, v: f64| {
            vals[a * 3 + b] = Some(v);
            vals[b * 3 + a] = Some(v);
        };
        set(0, 1, 0.1);
        set(0, 2, -0.1);
        set(1, 2, 0.2);
        let init = spectral_init(
            &AgreementMatrix::from_dense(3, vals),
            2,
            &LearnOptions::default(),
        )
        .unwrap();
        // Every one of the three anchor products is negative here.
        assert_eq!(init.negative_sqrt, 3);
    }

    #[test]
    fn zero_anchor_statistic_is_an_error() {
        let vals = vec![Some(0.0); 9];
        let err = spectral_init(
            &AgreementMatrix::from_dense(3, vals),
            2,
            &LearnOptions::default(),
        );
        assert_eq!(err, Err(LearnError::ZeroDenominator(1, 2)));
    }

    #[test]
    fn m_step_on_one_hot_posteriors_gives_one() {
        let mut data = LabelMatrix::new(1, 2).unwrap();
        for l in [1, 2, 2, 1] {
            data.push_row(&[Some(l)]).unwrap();
        }
        let q: Vec<f64> = (0..4)
            .flat_map(|s| {
                if data.get(s, 0) == Some(1) {
                    [1.0, 0.0]
                } else {
                    [0.0, 1.0]
                }
            })
            .collect();
        assert_eq!(m_step(&data, &Posteriors { k: 2, q }, &[0.6]), vec![1.0]);
    }

    #[test]
    fn em_step_on_agreeing_pair_matches_hand_value() {
        let data = pair(&[[1, 1], [2, 2], [1, 1], [2, 2]]);
        let post = e_step(&data, &[0.7, 0.7]);
        for s in 0..4 {
            assert!((post.row(s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // q on the agreed class is 0.49 / (0.49 + 0.09) = 49/58.
        let next = em_iterate(&data, &[0.7, 0.7]);
        for v in next {
            assert!((v - 49.0 / 58.0).abs() < 1e-15);
        }
    }

    #[test]
    fn em_fixed_points() {
        // A lone classifier is a fixed point for any estimate.
        let mut lone = LabelMatrix::new(1, 2).unwrap();
        for l in [1, 2, 2] {
            lone.push_row(&[Some(l)]).unwrap();
        }
        let next = em_iterate(&lone, &[0.73]);
        assert!((next[0] - 0.73).abs() < 1e-12);

        // Unanimous classifiers at the clamp ceiling stay there.
        let mut unanimous = LabelMatrix::new(3, 2).unwrap();
        for l in [1, 2, 1, 2] {
            unanimous.push_row(&[Some(l); 3]).unwrap();
        }
        let opts = LearnOptions::default();
        let start = vec![1.0 - opts.clamp_eps; 3];
        let mut next = em_iterate(&unanimous, &start);
        clamp_estimates(&mut next, 2, opts.clamp_eps);
        for (a, b) in next.iter().zip(&start) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unlabeled_classifier_keeps_prior() {
        let mat = LabelMatrix::from_triples(2, 3, 2, [(0, 0, 1), (1, 1, 2)]).unwrap();
        let next = em_iterate(&mat, &[0.7, 0.8, 0.65]);
        assert_eq!(next[2], 0.65);
    }

    #[test]
    fn online_learn_is_deterministic_and_in_range() {
        let truth = [0.85, 0.8, 0.75, 0.7, 0.3];
        let data = simulate(&truth, 500, 5);
        let a = online_learn(&data, &LearnOptions::default()).unwrap();
        let b = online_learn(&data, &LearnOptions::default()).unwrap();
        assert_eq!(a, b);
        let mean = a.p_hat.iter().sum::<f64>() / a.p_hat.len() as f64;
        assert!(mean >= 0.5);
        assert!(a.p_hat.iter().all(|p| *p > 0.5 && *p < 1.0));
        for (est, t) in a.p_hat.iter().zip(&truth[..4]) {
            assert!((est - t).abs() < 0.06, "{est} vs {t}");
        }
    }

    #[test]
    fn online_learn_rejects_empty_data() {
        let data = LabelMatrix::new(3, 2).unwrap();
        assert_eq!(
            online_learn(&data, &LearnOptions::default()),
            Err(LearnError::Empty)
        );
    }

    #[test]
    fn bad_class_is_rejected() {
        let mut data = LabelMatrix::new(2, 2).unwrap();
        assert!(data.push_row(&[Some(3), None]).is_err());
        assert!(data.push_row(&[Some(0), None]).is_err());
    }
}
