//! Three-way claim verification (A = Supported, B = Not Supported,
//! C = Not Addressed): biased decoding, HCNS detection, metrics, bias
//! calibration, the class-balanced training loss and desk-scale verifiers.
//!
//! Decoding adds a scalar bias to the B logit and takes the argmax with the
//! fixed tie order A < B < C (earlier wins). The decision margin is
//! `(l_B + bias) - max(l_A, l_C)` by default; [`MarginMode::Raw`] drops the
//! bias from the margin.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::lexicon;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "A")]
    Supported,
    #[serde(rename = "B")]
    NotSupported,
    #[serde(rename = "C")]
    NotAddressed,
}

impl Verdict {
    pub const ALL: [Verdict; 3] = [Verdict::Supported, Verdict::NotSupported, Verdict::NotAddressed];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        ['A', 'B', 'C'][self.index()]
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'A' => Some(Self::Supported),
            'B' => Some(Self::NotSupported),
            'C' => Some(Self::NotAddressed),
            _ => None,
        }
    }
}

/// Pre-softmax logits for A, B, C. Serialized as `[l_A, l_B, l_C]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct VerifierLogits {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl From<[f64; 3]> for VerifierLogits {
    fn from([a, b, c]: [f64; 3]) -> Self {
        Self { a, b, c }
    }
}

impl From<VerifierLogits> for [f64; 3] {
    fn from(l: VerifierLogits) -> Self {
        [l.a, l.b, l.c]
    }
}

impl VerifierLogits {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn as_array(&self) -> [f64; 3] {
        (*self).into()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarginMode {
    #[default]
    BiasAdjusted,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasedDecision {
    pub verdict: Verdict,
    pub margin: f64,
    pub bias_applied: f64,
}

pub fn decode(logits: &VerifierLogits, bias: f64) -> Result<BiasedDecision> {
    decode_with(logits, bias, MarginMode::BiasAdjusted)
}

pub fn decode_with(logits: &VerifierLogits, bias: f64, mode: MarginMode) -> Result<BiasedDecision> {
    if !logits.is_finite() {
        return Err(Error::NonFinite(format!("verifier logits {:?}", logits.as_array())));
    }
    let adjusted_b = logits.b + bias;
    let verdict = if logits.a >= adjusted_b && logits.a >= logits.c {
        Verdict::Supported
    } else if adjusted_b >= logits.c {
        Verdict::NotSupported
    } else {
        Verdict::NotAddressed
    };
    let b_term = match mode {
        MarginMode::BiasAdjusted => adjusted_b,
        MarginMode::Raw => logits.b,
    };
    Ok(BiasedDecision {
        verdict,
        margin: b_term - logits.a.max(logits.c),
        bias_applied: bias,
    })
}

/// High-confidence Not Supported: decoded B under `bias_prec` and margin strictly above `delta`.
pub fn is_hcns(logits: &VerifierLogits, bias_prec: f64, delta: f64) -> bool {
    is_hcns_with(logits, bias_prec, delta, MarginMode::BiasAdjusted)
}

pub fn is_hcns_with(logits: &VerifierLogits, bias_prec: f64, delta: f64, mode: MarginMode) -> bool {
    match decode_with(logits, bias_prec, mode) {
        Ok(d) => d.verdict == Verdict::NotSupported && d.margin > delta,
        Err(_) => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub f1: [f64; 3],
    pub support: [usize; 3],
    /// `confusion[truth][pred]`
    pub confusion: [[usize; 3]; 3],
    pub macro_f1: f64,
    pub accuracy: f64,
}

impl ClassMetrics {
    pub fn recall_ns(&self) -> f64 {
        self.recall[Verdict::NotSupported.index()]
    }

    pub fn precision_ns(&self) -> f64 {
        self.precision[Verdict::NotSupported.index()]
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(pairs: &[(Verdict, Verdict)]) -> Result<ClassMetrics> {
    if pairs.is_empty() {
        return Err(Error::Empty("metric input"));
    }
    let mut confusion = [[0usize; 3]; 3];
    for &(truth, pred) in pairs {
        confusion[truth.index()][pred.index()] += 1;
    }
    let mut precision = [0.0; 3];
    let mut recall = [0.0; 3];
    let mut f1 = [0.0; 3];
    let mut support = [0; 3];
    for k in 0..3 {
        let tp = confusion[k][k];
        let predicted: usize = (0..3).map(|t| confusion[t][k]).sum();
        let actual: usize = confusion[k].iter().sum();
        support[k] = actual;
        precision[k] = ratio(tp, predicted);
        recall[k] = ratio(tp, actual);
        let s = precision[k] + recall[k];
        f1[k] = if s > 0.0 { 2.0 * precision[k] * recall[k] / s } else { 0.0 };
    }
    let correct: usize = (0..3).map(|k| confusion[k][k]).sum();
    Ok(ClassMetrics {
        precision,
        recall,
        f1,
        support,
        confusion,
        macro_f1: (f1[0] + f1[1] + f1[2]) / 3.0,
        accuracy: ratio(correct, pairs.len()),
    })
}

/// Inclusive grid `lo, lo + step, ..., <= hi`, rounded to 1e-10 to keep
/// values like -0.34 exact under repeated addition.
pub fn bias_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("bad grid {lo}:{hi}:{step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((lo + i as f64 * step) * 1e10).round() / 1e10)
        .collect())
}

pub fn default_bias_grid() -> Vec<f64> {
    bias_grid(-0.8, 1.6, 0.05).expect("static grid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub bias: f64,
    pub macro_f1: f64,
    pub recall_ns: f64,
    pub predicted_b: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSweep {
    pub best_bias: f64,
    pub best_objective: f64,
    pub lambda: f64,
    pub curve: Vec<BiasPoint>,
}

/// Evaluate `MacroF1(b) + lambda * Recall_NS(b)` on every grid point and
/// return the maximizer (smallest bias among ties) with the full curve.
pub fn sweep_bias(dev_set: &[(VerifierLogits, Verdict)], grid: &[f64], lambda: f64) -> Result<BiasSweep> {
    if dev_set.is_empty() {
        return Err(Error::Empty("dev set"));
    }
    if grid.is_empty() {
        return Err(Error::Empty("bias grid"));
    }
    let mut curve = Vec::with_capacity(grid.len());
    for &bias in grid {
        let mut pairs = Vec::with_capacity(dev_set.len());
        for (logits, truth) in dev_set {
            pairs.push((*truth, decode(logits, bias)?.verdict));
        }
        let m = compute_metrics(&pairs)?;
        curve.push(BiasPoint {
            bias,
            macro_f1: m.macro_f1,
            recall_ns: m.recall_ns(),
            predicted_b: pairs.iter().filter(|p| p.1 == Verdict::NotSupported).count(),
            objective: m.macro_f1 + lambda * m.recall_ns(),
        });
    }
    let best = curve
        .iter()
        .fold(None::<&BiasPoint>, |acc, p| match acc {
            None => Some(p),
            Some(b) if p.objective > b.objective || (p.objective == b.objective && p.bias < b.bias) => Some(p),
            keep => keep,
        })
        .expect("non-empty curve");
    Ok(BiasSweep {
        best_bias: best.bias,
        best_objective: best.objective,
        lambda,
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierLossConfig {
    pub class_weights: [f64; 3],
    pub temper_exponent: f64,
    pub label_smoothing: f64,
    pub focal_gamma: f64,
}

impl Default for VerifierLossConfig {
    fn default() -> Self {
        Self {
            class_weights: [1.0; 3],
            temper_exponent: 0.5,
            label_smoothing: 0.0,
            focal_gamma: 0.0,
        }
    }
}

impl VerifierLossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.class_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("class weights must be finite and > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.temper_exponent) {
            return Err(Error::InvalidParameter("temper exponent must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::InvalidParameter("label smoothing must lie in [0, 1)".into()));
        }
        if !(self.focal_gamma >= 0.0 && self.focal_gamma.is_finite()) {
            return Err(Error::InvalidParameter("focal gamma must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn log_softmax(z: [f64; 3]) -> [f64; 3] {
    let m = z[0].max(z[1]).max(z[2]);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    [z[0] - lse, z[1] - lse, z[2] - lse]
}

/// Weighted, label-smoothed, focal-modulated cross-entropy for one instance.
pub fn classification_loss(logits: &VerifierLogits, truth: Verdict, config: &VerifierLossConfig) -> Result<f64> {
    classification_loss_and_grad(logits, truth, config).map(|(l, _)| l)
}

/// Loss and its gradient with respect to the three logits.
///
/// `loss = w_y * (1 - p_y)^gamma * sum_c -q_c ln p_c`, with
/// `q = (1 - eps) * onehot(y) + eps / 3`.
pub fn classification_loss_and_grad(
    logits: &VerifierLogits,
    truth: Verdict,
    config: &VerifierLossConfig,
) -> Result<(f64, [f64; 3])> {
    let z = logits.as_array();
    let log_p = log_softmax(z);
    let p = log_p.map(f64::exp);
    let y = truth.index();
    let eps = config.label_smoothing;
    let q: [f64; 3] = std::array::from_fn(|c| if c == y { 1.0 - eps + eps / 3.0 } else { eps / 3.0 });
    let ce: f64 = -(0..3).map(|c| q[c] * log_p[c]).sum::<f64>();
    let one_minus_py: f64 = (0..3).filter(|&c| c != y).map(|c| p[c]).sum();
    let gamma = config.focal_gamma;
    let w = config.class_weights[y];
    let focal = if gamma == 0.0 { 1.0 } else { one_minus_py.powf(gamma) };

    let mut grad = [0.0; 3];
    for k in 0..3 {
        let delta_yk = if k == y { 1.0 } else { 0.0 };
        let focal_grad = if gamma == 0.0 || one_minus_py == 0.0 {
            0.0
        } else {
            -gamma * one_minus_py.powf(gamma - 1.0) * p[y] * (delta_yk - p[k])
        };
        grad[k] = w * (focal_grad * ce + focal * (p[k] - q[k]));
    }
    let loss = ensure_finite(w * focal * ce, "classification loss")?;
    Ok((loss, grad))
}

/// Tempered inverse-frequency weights `(total / n_c)^tau`, rescaled to mean 1.
pub fn class_weights(counts: [u64; 3], temper: f64) -> Result<[f64; 3]> {
    if counts.contains(&0) {
        return Err(Error::InvalidParameter("class counts must all be >= 1".into()));
    }
    let total: u64 = counts.iter().sum();
    let raw = counts.map(|n| (total as f64 / n as f64).powf(temper));
    let mean = raw.iter().sum::<f64>() / 3.0;
    Ok(raw.map(|r| r / mean))
}

/// Anything that maps a claim and its evidence to A/B/C logits.
pub trait VerifierClient: Send + Sync {
    fn score(&self, claim: &str, evidence: &[&str]) -> Result<VerifierLogits>;
}

impl<T: VerifierClient + ?Sized> VerifierClient for Box<T> {
    fn score(&self, claim: &str, evidence: &[&str]) -> Result<VerifierLogits> {
        (**self).score(claim, evidence)
    }
}

impl<T: VerifierClient + ?Sized> VerifierClient for std::sync::Arc<T> {
    fn score(&self, claim: &str, evidence: &[&str]) -> Result<VerifierLogits> {
        (**self).score(claim, evidence)
    }
}

/// Remote scoring request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub request_id: String,
    pub claim: String,
    pub evidence: Vec<String>,
}

/// Remote scoring response body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub request_id: String,
    pub logits: [f64; 3],
}

/// Token-overlap and polarity signals between a claim and its best-matching evidence.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LexicalSignals {
    pub overlap: f64,
    pub negation_mismatch: bool,
    pub antonym_mismatch: bool,
}

impl LexicalSignals {
    pub fn contradicts(&self) -> bool {
        self.negation_mismatch || self.antonym_mismatch
    }
}

pub fn lexical_signals(claim: &str, evidence: &[&str]) -> LexicalSignals {
    let claim_words = lexicon::words(claim);
    let content: BTreeSet<&str> = claim_words
        .iter()
        .map(String::as_str)
        .filter(|w| !lexicon::is_stopword(w) && !lexicon::is_negation(w))
        .collect();
    if content.is_empty() {
        return LexicalSignals::default();
    }
    let claim_negated = claim_words.iter().any(|w| lexicon::is_negation(w));

    let mut best = LexicalSignals::default();
    let mut best_overlap = -1.0;
    for text in evidence {
        let ev_words = lexicon::words(text);
        let ev: BTreeSet<&str> = ev_words.iter().map(String::as_str).collect();
        let mut matched = 0usize;
        let mut antonym_mismatch = false;
        for w in &content {
            if ev.contains(w) {
                matched += 1;
            } else if let Some(opp) = lexicon::antonym(w) {
                if ev.contains(opp) {
                    matched += 1;
                    antonym_mismatch = true;
                }
            }
        }
        let overlap = matched as f64 / content.len() as f64;
        if overlap > best_overlap {
            best_overlap = overlap;
            let ev_negated = ev_words.iter().any(|w| lexicon::is_negation(w));
            best = LexicalSignals {
                overlap,
                negation_mismatch: claim_negated != ev_negated,
                antonym_mismatch,
            };
        }
    }
    best
}

/// Heuristic verifier over token overlap and negation/antonym polarity.
/// Exists so the pipeline runs without a model.
#[derive(Debug, Clone, Copy)]
pub struct LexicalOracle {
    /// Overlap at which support and absence are equally likely.
    pub pivot: f64,
    pub scale: f64,
}

impl Default for LexicalOracle {
    fn default() -> Self {
        Self { pivot: 0.8, scale: 4.0 }
    }
}

impl VerifierClient for LexicalOracle {
    fn score(&self, claim: &str, evidence: &[&str]) -> Result<VerifierLogits> {
        let sig = lexical_signals(claim, evidence);
        let s = self.scale * (sig.overlap - self.pivot);
        let (a, b) = if sig.contradicts() { (-1.0, s) } else { (s, -1.0) };
        Ok(VerifierLogits::new(a, b, -s))
    }
}

pub const TOY_EXTRA_FEATURES: usize = 5;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Hashed bag of claim words followed by
/// `[1, overlap, negation_mismatch, antonym_mismatch, 1 - overlap]`.
pub fn toy_features(claim: &str, evidence: &[&str], hash_dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; hash_dim + TOY_EXTRA_FEATURES];
    let words = lexicon::words(claim);
    if hash_dim > 0 && !words.is_empty() {
        let unit = 1.0 / (words.len() as f64).sqrt();
        for w in &words {
            v[(fnv1a(w.as_bytes()) % hash_dim as u64) as usize] += unit;
        }
    }
    let sig = lexical_signals(claim, evidence);
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    v[hash_dim..].copy_from_slice(&[
        1.0,
        sig.overlap,
        flag(sig.negation_mismatch),
        flag(sig.antonym_mismatch),
        1.0 - sig.overlap,
    ]);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub claim: String,
    pub evidence: Vec<String>,
    pub label: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyTrainSettings {
    pub hash_dim: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ToyTrainSettings {
    fn default() -> Self {
        Self {
            hash_dim: 32,
            steps: 400,
            learning_rate: 0.5,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Linear three-class scorer; `weights` is row-major `[class][feature]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyLinearVerifier {
    pub hash_dim: usize,
    pub weights: Vec<f64>,
}

impl ToyLinearVerifier {
    pub fn feature_dim(&self) -> usize {
        self.hash_dim + TOY_EXTRA_FEATURES
    }

    pub fn initialized(hash_dim: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, &["toy-verifier-init"]);
        let dim = hash_dim + TOY_EXTRA_FEATURES;
        Self {
            hash_dim,
            weights: (0..3 * dim).map(|_| rng.gen_range(-0.01..0.01)).collect(),
        }
    }

    pub fn logits_for(&self, features: &[f64]) -> VerifierLogits {
        let d = self.feature_dim();
        let row = |k: usize| -> f64 {
            self.weights[k * d..(k + 1) * d]
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum()
        };
        VerifierLogits::new(row(0), row(1), row(2))
    }

    /// Mean loss over pre-computed `(features, label)` rows plus `l2/2 * |w|^2`,
    /// and its gradient with respect to the weights.
    pub fn loss_and_grad(
        &self,
        data: &[(Vec<f64>, Verdict)],
        config: &VerifierLossConfig,
        l2: f64,
    ) -> Result<(f64, Vec<f64>)> {
        if data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        let d = self.feature_dim();
        let n = data.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.weights.len()];
        for (x, y) in data {
            let (l, g) = classification_loss_and_grad(&self.logits_for(x), *y, config)?;
            loss += l / n;
            for k in 0..3 {
                let gk = g[k] / n;
                for (gw, xi) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *gw += gk * xi;
                }
            }
        }
        for (g, w) in grad.iter_mut().zip(&self.weights) {
            *g += l2 * w;
        }
        loss += 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        Ok((loss, grad))
    }

    pub fn predict(&self, claim: &str, evidence: &[&str]) -> VerifierLogits {
        self.logits_for(&toy_features(claim, evidence, self.hash_dim))
    }
}

impl VerifierClient for ToyLinearVerifier {
    fn score(&self, claim: &str, evidence: &[&str]) -> Result<VerifierLogits> {
        Ok(self.predict(claim, evidence))
    }
}

/// Full-batch gradient descent on [`classification_loss`].
///
/// Class weights are derived from the label counts with the configured
/// temper exponent (counts are add-one smoothed); the weights in `config`
/// are ignored.
pub fn train_toy_verifier(
    instances: &[LabeledInstance],
    config: &VerifierLossConfig,
    settings: &ToyTrainSettings,
) -> Result<ToyLinearVerifier> {
    config.validate()?;
    let present: BTreeSet<Verdict> = instances.iter().map(|i| i.label).collect();
    if present.len() < 2 {
        return Err(Error::InvalidParameter("training needs at least two classes".into()));
    }
    let mut counts = [1u64; 3];
    for inst in instances {
        counts[inst.label.index()] += 1;
    }
    let cfg = VerifierLossConfig {
        class_weights: class_weights(counts, config.temper_exponent)?,
        ..*config
    };
    let data: Vec<(Vec<f64>, Verdict)> = instances
        .iter()
        .map(|i| {
            let ev: Vec<&str> = i.evidence.iter().map(String::as_str).collect();
            (toy_features(&i.claim, &ev, settings.hash_dim), i.label)
        })
        .collect();

    let mut model = ToyLinearVerifier::initialized(settings.hash_dim, settings.seed);
    for step in 0..settings.steps {
        let (loss, grad) = model
            .loss_and_grad(&data, &cfg, settings.l2)
            .map_err(|_| Error::Diverged { step })?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step });
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= settings.learning_rate * g;
        }
    }
    if model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Diverged { step: settings.steps });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    const A: Verdict = Verdict::Supported;
    const B: Verdict = Verdict::NotSupported;
    const C: Verdict = Verdict::NotAddressed;

    fn l(a: f64, b: f64, c: f64) -> VerifierLogits {
        VerifierLogits::new(a, b, c)
    }

    #[test]
    fn decode_examples() {
        let d = decode(&l(0.1, 1.5, 0.0), -0.34).unwrap();
        assert_eq!(d.verdict, B);
        assert!((d.margin - 1.06).abs() < 1e-12);
        assert_eq!(decode(&l(2.0, 1.0, 0.0), -0.34).unwrap().verdict, A);
        assert_eq!(decode(&l(0.0, 0.0, 0.0), 0.0).unwrap().verdict, A);
        assert_eq!(decode(&l(0.0, 1.0, 1.0), 0.0).unwrap().verdict, B);
        assert_eq!(decode(&l(0.0, 0.0, 1.0), 0.0).unwrap().verdict, C);
        assert!(decode(&l(f64::NAN, 0.0, 0.0), 0.0).is_err());
        let raw = decode_with(&l(0.1, 1.5, 0.0), -0.34, MarginMode::Raw).unwrap();
        assert!((raw.margin - 1.4).abs() < 1e-12);
    }

    #[test]
    fn hcns_examples() {
        assert!(is_hcns(&l(0.1, 1.5, 0.0), -0.34, 0.8));
        assert!(!is_hcns(&l(0.0, 0.9, 0.0), -0.34, 0.8));
        assert_eq!(decode(&l(0.0, 0.9, 0.0), -0.34).unwrap().verdict, B);
        assert!(!is_hcns(&l(2.0, 1.0, 0.0), -0.34, 0.8));
        // strict inequality on the margin
        assert!(!is_hcns(&l(0.0, 1.0, 0.0), 0.0, 1.0));
    }

    #[test]
    fn metrics_by_hand() {
        let m = compute_metrics(&[(A, A), (A, B), (B, B), (C, C)]).unwrap();
        assert!((m.f1[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.f1[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.f1[2], 1.0);
        assert!((m.macro_f1 - 7.0 / 9.0).abs() < 1e-12);
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.recall_ns(), 1.0);
    }

    #[test]
    fn metrics_degenerate_and_perfect() {
        let perfect = compute_metrics(&[(A, A), (B, B), (C, C)]).unwrap();
        assert_eq!((perfect.macro_f1, perfect.accuracy), (1.0, 1.0));
        let all_b = compute_metrics(&[(A, B), (B, B), (C, B)]).unwrap();
        assert_eq!(all_b.recall, [0.0, 1.0, 0.0]);
        assert_eq!(all_b.precision[0], 0.0);
        assert!(compute_metrics(&[]).is_err());
    }

    #[test]
    fn grid_is_exact() {
        let g = default_bias_grid();
        assert_eq!(g.len(), 49);
        assert_eq!(g[0], -0.8);
        assert_eq!(g[9], -0.35);
        assert_eq!(*g.last().unwrap(), 1.6);
        assert!(bias_grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn sweep_prefers_smallest_maximizer() {
        let dev = vec![(l(3.0, 0.0, 0.0), A), (l(0.0, 3.0, 0.0), B), (l(0.0, 0.0, 3.0), C)];
        let sweep = sweep_bias(&dev, &default_bias_grid(), 0.1).unwrap();
        assert_eq!(sweep.best_bias, -0.8);
        assert!((sweep.best_objective - 1.1).abs() < 1e-12);
        assert_eq!(sweep.curve.len(), 49);
    }

    #[test]
    fn sweep_with_zero_lambda_is_macro_f1() {
        let dev = vec![(l(1.0, 0.7, 0.0), B), (l(1.0, 0.2, 0.0), A), (l(0.0, 0.1, 0.5), C)];
        let sweep = sweep_bias(&dev, &default_bias_grid(), 0.0).unwrap();
        for p in &sweep.curve {
            assert_eq!(p.objective, p.macro_f1);
        }
        let best_f1 = sweep.curve.iter().map(|p| p.macro_f1).fold(f64::MIN, f64::max);
        assert_eq!(sweep.best_objective, best_f1);
    }

    #[test]
    fn loss_examples() {
        let plain = VerifierLossConfig { temper_exponent: 0.0, ..Default::default() };
        let ln3 = 3f64.ln();
        assert!((classification_loss(&l(0.0, 0.0, 0.0), A, &plain).unwrap() - ln3).abs() < 1e-12);
        let weighted = VerifierLossConfig { class_weights: [2.0, 1.0, 1.0], ..plain };
        assert!((classification_loss(&l(0.0, 0.0, 0.0), A, &weighted).unwrap() - 2.0 * ln3).abs() < 1e-12);

        // p_y = 0.9 with the rest split evenly
        let z = l(0.9f64.ln(), 0.05f64.ln(), 0.05f64.ln());
        let focal = VerifierLossConfig { focal_gamma: 2.0, ..plain };
        let ce = classification_loss(&z, A, &plain).unwrap();
        let fl = classification_loss(&z, A, &focal).unwrap();
        assert!(fl < ce);
        assert!((fl - 0.01 * ce).abs() < 1e-12);
    }

    #[test]
    fn class_weight_examples() {
        assert_eq!(class_weights([5, 5, 5], 0.7).unwrap(), [1.0, 1.0, 1.0]);
        assert_eq!(class_weights([8, 1, 1], 0.0).unwrap(), [1.0, 1.0, 1.0]);
        let w = class_weights([8, 1, 1], 1.0).unwrap();
        let mean = (1.25 + 10.0 + 10.0) / 3.0;
        assert!((w[0] - 1.25 / mean).abs() < 1e-12);
        assert!((w[1] - 10.0 / mean).abs() < 1e-12);
        assert!((w[0] - 0.176).abs() < 1e-3 && (w[1] - 1.412).abs() < 1e-3);
        assert!(class_weights([0, 1, 1], 1.0).is_err());
    }

    #[test]
    fn logits_serialize_as_array() {
        let json = serde_json::to_string(&l(1.0, -2.0, 0.5)).unwrap();
        assert_eq!(json, "[1.0,-2.0,0.5]");
        assert_eq!(serde_json::to_string(&B).unwrap(), "\"B\"");
    }

    #[test]
    fn lexical_oracle_polarity() {
        let o = LexicalOracle::default();
        let ev = ["vancomycin was started for pneumonia."];
        let sup = decode(&o.score("Vancomycin started for pneumonia.", &ev).unwrap(), 0.0).unwrap();
        assert_eq!(sup.verdict, A);
        let con = decode(&o.score("Vancomycin stopped for pneumonia.", &ev).unwrap(), 0.0).unwrap();
        assert_eq!(con.verdict, B);
        let neg = decode(&o.score("No vancomycin for pneumonia.", &ev).unwrap(), 0.0).unwrap();
        assert_eq!(neg.verdict, B);
        let na = decode(&o.score("Creatinine improved after fluids.", &ev).unwrap(), 0.0).unwrap();
        assert_eq!(na.verdict, C);
    }

    #[test]
    fn toy_training_requires_two_classes() {
        let inst = vec![LabeledInstance { claim: "x y z".into(), evidence: vec![], label: A }; 3];
        assert!(train_toy_verifier(&inst, &VerifierLossConfig::default(), &ToyTrainSettings::default()).is_err());
    }

    fn central_difference_check(model: &ToyLinearVerifier, data: &[(Vec<f64>, Verdict)], cfg: &VerifierLossConfig) {
        let (_, grad) = model.loss_and_grad(data, cfg, 1e-3).unwrap();
        let h = 1e-5;
        for i in 0..model.weights.len() {
            let mut plus = model.clone();
            plus.weights[i] += h;
            let mut minus = model.clone();
            minus.weights[i] -= h;
            let fp = plus.loss_and_grad(data, cfg, 1e-3).unwrap().0;
            let fm = minus.loss_and_grad(data, cfg, 1e-3).unwrap().0;
            let numeric = (fp - fm) / (2.0 * h);
            let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-6);
            assert!(rel < 1e-6, "param {i}: analytic {} numeric {numeric} rel {rel}", grad[i]);
        }
    }

    #[test]
    fn toy_gradient_matches_finite_differences() {
        // hash_dim 5 + 5 extras = 10 features, 30 parameters
        let mut model = ToyLinearVerifier::initialized(5, 3);
        let mut rng = rng_for(9, &["fd"]);
        for w in &mut model.weights {
            *w = rng.gen_range(-1.0..1.0);
        }
        let data: Vec<(Vec<f64>, Verdict)> = (0..12)
            .map(|i| {
                let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (x, Verdict::from_index(i % 3).unwrap())
            })
            .collect();
        assert_eq!(model.weights.len(), 30);
        for cfg in [
            VerifierLossConfig::default(),
            VerifierLossConfig { class_weights: [0.5, 2.0, 1.0], label_smoothing: 0.1, focal_gamma: 2.0, ..Default::default() },
            VerifierLossConfig { label_smoothing: 0.2, focal_gamma: 0.5, ..Default::default() },
        ] {
            central_difference_check(&model, &data, &cfg);
        }
    }

    fn arb_logits() -> impl Strategy<Value = VerifierLogits> {
        (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b, c)| l(a, b, c))
    }

    proptest! {
        #[test]
        fn b_decodes_are_monotone_in_bias(z in arb_logits(), b1 in -2.0f64..2.0, db in 0.0f64..2.0) {
            if decode(&z, b1).unwrap().verdict == B {
                prop_assert_eq!(decode(&z, b1 + db).unwrap().verdict, B);
            }
        }

        #[test]
        fn zero_bias_is_plain_argmax(z in arb_logits()) {
            let arr = z.as_array();
            let mut best = 0;
            for k in 1..3 { if arr[k] > arr[best] { best = k; } }
            prop_assert_eq!(decode(&z, 0.0).unwrap().verdict.index(), best);
        }

        #[test]
        fn hcns_monotone_in_delta(z in arb_logits(), bias in -1.0f64..1.0, d1 in 0.0f64..2.0, dd in 0.0f64..2.0) {
            if is_hcns(&z, bias, d1 + dd) {
                prop_assert!(is_hcns(&z, bias, d1));
            }
        }

        #[test]
        fn decode_is_shift_invariant(z in arb_logits(), bias in -1.0f64..1.0, shift in -10.0f64..10.0) {
            let d = decode(&z, bias).unwrap();
            let s = decode(&l(z.a + shift, z.b + shift, z.c + shift), bias).unwrap();
            prop_assert_eq!(d.verdict, s.verdict);
            prop_assert!((d.margin - s.margin).abs() < 1e-9);
        }

        #[test]
        fn smoothed_loss_is_nonnegative(z in arb_logits(), y in 0usize..3, eps in 0.0f64..0.99, gamma in 0.0f64..4.0) {
            let cfg = VerifierLossConfig { label_smoothing: eps, focal_gamma: gamma, ..Default::default() };
            prop_assert!(classification_loss(&z, Verdict::from_index(y).unwrap(), &cfg).unwrap() >= 0.0);
        }

        #[test]
        fn plain_loss_is_cross_entropy(z in arb_logits(), y in 0usize..3) {
            let cfg = VerifierLossConfig::default();
            let expected = -log_softmax(z.as_array())[y];
            let got = classification_loss(&z, Verdict::from_index(y).unwrap(), &cfg).unwrap();
            prop_assert!((got - expected).abs() < 1e-12);
        }
    }
}
