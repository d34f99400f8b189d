//! Preference-score numerics, a toy softmax policy trained against a frozen
//! reference, and Best-of-K reranking.
//!
//! `s = β·[(log π(y⁺) − log π(y⁻)) − (log π_ref(y⁺) − log π_ref(y⁻))]`,
//! `loss = mean(−log σ(s))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mining::{utility, SummaryStats, UtilityWeights};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLogProbs {
    pub lp_pol_pos: f64,
    pub lp_pol_neg: f64,
    pub lp_ref_pos: f64,
    pub lp_ref_neg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpoConfig {
    pub beta: f64,
}

impl Default for DpoConfig {
    fn default() -> Self {
        Self { beta: 0.1 }
    }
}

impl DpoConfig {
    pub fn new(beta: f64) -> Result<Self> {
        let c = Self { beta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta > 0.0 && self.beta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)))
        }
    }
}

pub fn dpo_score(lp: &PairLogProbs, beta: f64) -> f64 {
    beta * ((lp.lp_pol_pos - lp.lp_pol_neg) - (lp.lp_ref_pos - lp.lp_ref_neg))
}

/// `ln σ(x)` without overflow for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn dpo_loss(batch: &[PairLogProbs], config: &DpoConfig) -> Result<f64> {
    config.validate()?;
    if batch.is_empty() {
        return Err(Error::Empty("preference batch"));
    }
    Ok(batch.iter().map(|lp| -log_sigmoid(dpo_score(lp, config.beta))).sum::<f64>() / batch.len() as f64)
}

/// `∂(−log σ(s))/∂s`
pub fn dloss_dscore(s: f64) -> f64 {
    -sigmoid(-s)
}

/// One preference over a toy policy: response indices for one prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyPair {
    pub prompt: usize,
    pub chosen: usize,
    pub rejected: usize,
}

/// Per-prompt categorical policy; `log π(y|x) = log_softmax(θ_x)[y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    pub n_prompts: usize,
    pub vocab: usize,
    /// Row-major `[prompt][response]`.
    pub params: Vec<f64>,
}

impl ToyPolicy {
    pub fn zeros(n_prompts: usize, vocab: usize) -> Self {
        Self { n_prompts, vocab, params: vec![0.0; n_prompts * vocab] }
    }

    pub fn random(n_prompts: usize, vocab: usize, scale: f64, seed: u64) -> Self {
        let mut rng = rng_for(seed, &["toy-policy-init"]);
        Self {
            n_prompts,
            vocab,
            params: (0..n_prompts * vocab).map(|_| rng.gen_range(-scale..=scale)).collect(),
        }
    }

    fn row(&self, prompt: usize) -> &[f64] {
        &self.params[prompt * self.vocab..(prompt + 1) * self.vocab]
    }

    pub fn log_probs(&self, prompt: usize) -> Vec<f64> {
        let row = self.row(prompt);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        row.iter().map(|v| v - lse).collect()
    }

    pub fn log_prob(&self, prompt: usize, response: usize) -> f64 {
        self.log_probs(prompt)[response]
    }

    pub fn check_pairs(&self, pairs: &[ToyPair]) -> Result<()> {
        for p in pairs {
            if p.prompt >= self.n_prompts || p.chosen >= self.vocab || p.rejected >= self.vocab {
                return Err(Error::InvalidParameter(format!("pair {p:?} is outside the toy vocabulary")));
            }
        }
        Ok(())
    }
}

pub fn pair_log_probs(policy: &ToyPolicy, reference: &ToyPolicy, pair: &ToyPair) -> PairLogProbs {
    PairLogProbs {
        lp_pol_pos: policy.log_prob(pair.prompt, pair.chosen),
        lp_pol_neg: policy.log_prob(pair.prompt, pair.rejected),
        lp_ref_pos: reference.log_prob(pair.prompt, pair.chosen),
        lp_ref_neg: reference.log_prob(pair.prompt, pair.rejected),
    }
}

/// Mean DPO loss over `pairs` and its gradient with respect to `policy.params`.
pub fn dpo_grad(
    pairs: &[ToyPair],
    config: &DpoConfig,
    policy: &ToyPolicy,
    reference: &ToyPolicy,
) -> Result<(f64, Vec<f64>)> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Empty("preference batch"));
    }
    policy.check_pairs(pairs)?;
    let n = pairs.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; policy.params.len()];
    for pair in pairs {
        let s = dpo_score(&pair_log_probs(policy, reference, pair), config.beta);
        loss -= log_sigmoid(s) / n;
        // d log_softmax_y / d θ_j = 1[j = y] − π_j; the π_j terms cancel between y⁺ and y⁻
        let g = dloss_dscore(s) * config.beta / n;
        let base = pair.prompt * policy.vocab;
        grad[base + pair.chosen] += g;
        grad[base + pair.rejected] -= g;
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpoTrainConfig {
    pub beta: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for DpoTrainConfig {
    fn default() -> Self {
        Self { beta: 0.1, steps: 500, learning_rate: 20.0, init_scale: 0.5, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub loss: f64,
    pub mean_margin: f64,
    pub frac_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTrainResult {
    pub policy: ToyPolicy,
    pub reference: ToyPolicy,
    pub trace: Vec<TracePoint>,
    pub final_margins: Vec<f64>,
}

impl ToyTrainResult {
    pub fn frac_positive(&self) -> f64 {
        frac_positive(&self.final_margins)
    }

    pub fn mean_margin(&self) -> f64 {
        mean(&self.final_margins)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 }
}

fn frac_positive(v: &[f64]) -> f64 {
    if v.is_empty() { 0.0 } else { v.iter().filter(|s| **s > 0.0).count() as f64 / v.len() as f64 }
}

pub fn margins(pairs: &[ToyPair], beta: f64, policy: &ToyPolicy, reference: &ToyPolicy) -> Vec<f64> {
    pairs.iter().map(|p| dpo_score(&pair_log_probs(policy, reference, p), beta)).collect()
}

/// Full-batch gradient descent from a seeded random policy; the reference
/// is a frozen copy of the initial policy. The trace has one point per step
/// (before the update) plus the final state.
pub fn train_toy_dpo(
    pairs: &[ToyPair],
    n_prompts: usize,
    vocab: usize,
    config: &DpoTrainConfig,
) -> Result<ToyTrainResult> {
    let dpo = DpoConfig::new(config.beta)?;
    let reference = ToyPolicy::random(n_prompts, vocab, config.init_scale, config.seed);
    reference.check_pairs(pairs)?;
    let mut policy = reference.clone();
    let mut trace = Vec::with_capacity(config.steps + 1);
    for step in 0..=config.steps {
        let (loss, grad) = dpo_grad(pairs, &dpo, &policy, &reference)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step });
        }
        let m = margins(pairs, config.beta, &policy, &reference);
        trace.push(TracePoint { step, loss, mean_margin: mean(&m), frac_positive: frac_positive(&m) });
        if step == config.steps {
            break;
        }
        for (p, g) in policy.params.iter_mut().zip(&grad) {
            *p -= config.learning_rate * g;
        }
        if policy.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { step });
        }
    }
    let final_margins = margins(pairs, config.beta, &policy, &reference);
    Ok(ToyTrainResult { policy, reference, trace, final_margins })
}

/// Pairs ordered by a hidden per-response quality, so every pair set is
/// acyclic and a policy satisfying all of them exists.
pub fn synthetic_toy_pairs(n_pairs: usize, n_prompts: usize, vocab: usize, seed: u64) -> Result<Vec<ToyPair>> {
    if n_prompts == 0 || vocab < 2 {
        return Err(Error::InvalidParameter("need at least one prompt and two responses".into()));
    }
    let mut rng = rng_for(seed, &["toy-pairs"]);
    let quality: Vec<f64> = (0..n_prompts * vocab).map(|_| rng.gen()).collect();
    let mut pairs = Vec::with_capacity(n_pairs);
    while pairs.len() < n_pairs {
        let prompt = rng.gen_range(0..n_prompts);
        let a = rng.gen_range(0..vocab);
        let b = rng.gen_range(0..vocab);
        if a == b {
            continue;
        }
        let (qa, qb) = (quality[prompt * vocab + a], quality[prompt * vocab + b]);
        let (chosen, rejected) = if qa >= qb { (a, b) } else { (b, a) };
        pairs.push(ToyPair { prompt, chosen, rejected });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSweepPoint {
    pub beta: f64,
    pub final_loss: f64,
    pub mean_margin: f64,
    pub frac_positive: f64,
}

/// Train once per β with otherwise identical settings.
pub fn beta_sweep(
    pairs: &[ToyPair],
    n_prompts: usize,
    vocab: usize,
    betas: &[f64],
    base: &DpoTrainConfig,
) -> Result<Vec<BetaSweepPoint>> {
    betas
        .iter()
        .map(|&beta| {
            let r = train_toy_dpo(pairs, n_prompts, vocab, &DpoTrainConfig { beta, ..*base })?;
            Ok(BetaSweepPoint {
                beta,
                final_loss: r.trace.last().map_or(f64::NAN, |t| t.loss),
                mean_margin: r.mean_margin(),
                frac_positive: r.frac_positive(),
            })
        })
        .collect()
}

/// The β grid plus the 0.3 probe.
pub const BETA_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.3];

/// Index of the highest-utility candidate; ties go to fewer B, then more
/// characters, then the lower index.
pub fn best_of_k(candidates: &[SummaryStats], weights: &UtilityWeights) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    let u: Vec<f64> = candidates.iter().map(|s| utility(s, weights)).collect();
    Ok(best_by_utility(candidates, &u))
}

/// [`best_of_k`] over precomputed utilities.
pub fn best_by_utility(candidates: &[SummaryStats], utilities: &[f64]) -> usize {
    (0..candidates.len().min(utilities.len()))
        .min_by(|&a, &b| {
            utilities[b]
                .total_cmp(&utilities[a])
                .then(candidates[a].n_b.cmp(&candidates[b].n_b))
                .then(candidates[b].chars.cmp(&candidates[a].chars))
                .then(a.cmp(&b))
        })
        .unwrap_or(0)
}
