//! JSON-in, JSON-out entry points for the static demo page in `www/`.
//!
//! The functions here are plain Rust so they can be tested natively; the
//! `wasm` module only wraps them for JavaScript.

use claimpref::claims::ClaimFilterConfig;
use claimpref::corpus::{segment_corpus, SegmentConfig};
use claimpref::dpo::{synthetic_toy_pairs, train_toy_dpo, DpoTrainConfig, TracePoint};
use claimpref::eval::{mining_diagnostics, DiagnosticsReport};
use claimpref::mining::{build_pools, select_pairs, MiningConfig, SelectionSettings, Strategy};
use claimpref::retrieval::{pack_evidence, retrieve_two_stage, subject_corpora, PackParams, RetrievalParams, SubjectCorpus};
use claimpref::seed::derive_seed;
use claimpref::synth::{gen_world, sample_labeled_claims, CorruptionSpec, SynthGenerator, SyntheticWorld};
use claimpref::verifier::{bias_grid, sweep_bias, BiasPoint, LexicalOracle, VerifierClient};
use serde::Serialize;

pub const MAX_SUBJECTS: usize = 40;
const NOTES_PER_SUBJECT: usize = 12;

fn world(subjects: usize, seed: u64) -> Result<(SyntheticWorld, Vec<SubjectCorpus>), String> {
    if subjects == 0 || subjects > MAX_SUBJECTS {
        return Err(format!("subjects must be in 1..={MAX_SUBJECTS}"));
    }
    let world = gen_world(subjects, NOTES_PER_SUBJECT, seed).map_err(|e| e.to_string())?;
    let notes: Vec<_> = world.notes().cloned().collect();
    let units = segment_corpus(&notes, &SegmentConfig::default());
    let corpora = subject_corpora(&notes, &units).map_err(|e| e.to_string())?;
    Ok((world, corpora))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct CalibrationView {
    pub n_instances: usize,
    pub best_bias: f64,
    pub best_objective: f64,
    pub curve: Vec<BiasPoint>,
}

/// Score sampled claims with the lexical verifier and sweep the B bias.
pub fn calibration(subjects: usize, lambda: f64, seed: u64) -> Result<CalibrationView, String> {
    let (world, corpora) = world(subjects, seed)?;
    let verifier = LexicalOracle::default();
    let (retrieval, packing) = (RetrievalParams::default(), PackParams::default());
    let mut dev = Vec::new();
    for (i, c) in sample_labeled_claims(&world, 12, seed).into_iter().enumerate() {
        let Some(corpus) = corpora.iter().find(|k| k.subject_id == c.subject_id) else { continue };
        let hits = retrieve_two_stage(&c.claim, corpus, &retrieval);
        let packed = pack_evidence(&hits, corpus, &packing, derive_seed(seed, &["pack", &i.to_string()]))
            .map_err(|e| e.to_string())?;
        let ev: Vec<&str> = packed.items.iter().map(|p| p.text.as_str()).collect();
        dev.push((verifier.score(&c.claim, &ev).map_err(|e| e.to_string())?, c.label));
    }
    let grid = bias_grid(-0.8, 1.6, 0.05).map_err(|e| e.to_string())?;
    let sweep = sweep_bias(&dev, &grid, lambda).map_err(|e| e.to_string())?;
    Ok(CalibrationView {
        n_instances: dev.len(),
        best_bias: sweep.best_bias,
        best_objective: sweep.best_objective,
        curve: sweep.curve,
    })
}

#[derive(Debug, Serialize)]
pub struct StrategyView {
    pub strategy: String,
    pub n_pairs: usize,
    pub diagnostics: Option<DiagnosticsReport>,
}

#[derive(Debug, Serialize)]
pub struct ExamplePair {
    pub prompt_id: String,
    pub chosen: String,
    pub rejected: String,
    pub chosen_b: usize,
    pub rejected_b: usize,
}

#[derive(Debug, Serialize)]
pub struct MiningView {
    pub n_prompts: usize,
    pub strategies: Vec<StrategyView>,
    pub example: Option<ExamplePair>,
}

/// Build candidate pools once and select pairs under every strategy.
pub fn mining(subjects: usize, bias_prec: f64, delta: f64, oracle_noise: f64, seed: u64) -> Result<MiningView, String> {
    let (world, corpora) = world(subjects, seed)?;
    let verifier = world.oracle(oracle_noise, derive_seed(seed, &["oracle"])).map_err(|e| e.to_string())?;
    let generator = SynthGenerator { world, spec: CorruptionSpec::mining_demo() };
    let filters = ClaimFilterConfig::default().compile().map_err(|e| e.to_string())?;
    let config = MiningConfig::default();
    let build = build_pools(&corpora, &generator, &verifier, &filters, &config, seed).map_err(|e| e.to_string())?;
    let mut view = MiningView { n_prompts: build.pools.len(), strategies: Vec::new(), example: None };
    for strategy in Strategy::ALL {
        let settings = SelectionSettings { strategy, bias_prec, delta };
        let (pairs, summary) = select_pairs(&build, &config, settings, seed);
        if strategy == Strategy::Full {
            view.example = pairs.first().map(|p| ExamplePair {
                prompt_id: p.prompt_id.clone(),
                chosen: p.chosen_text.clone(),
                rejected: p.rejected_text.clone(),
                chosen_b: p.chosen_stats.n_b,
                rejected_b: p.rejected_stats.n_b,
            });
        }
        view.strategies.push(StrategyView {
            strategy: strategy.name().to_owned(),
            n_pairs: summary.n_pairs,
            diagnostics: mining_diagnostics(&pairs).ok(),
        });
    }
    Ok(view)
}

#[derive(Debug, Serialize)]
pub struct DpoView {
    pub trace: Vec<TracePoint>,
    pub final_margins: Vec<f64>,
    pub frac_positive: f64,
}

/// Train the toy policy and return its loss and margin trajectory.
pub fn dpo(beta: f64, learning_rate: f64, steps: usize, seed: u64) -> Result<DpoView, String> {
    if steps > 5000 {
        return Err("at most 5000 steps".into());
    }
    let (n_prompts, vocab) = (10, 8);
    let pairs = synthetic_toy_pairs(50, n_prompts, vocab, seed).map_err(|e| e.to_string())?;
    let config = DpoTrainConfig { beta, learning_rate, steps, seed, ..DpoTrainConfig::default() };
    let r = train_toy_dpo(&pairs, n_prompts, vocab, &config).map_err(|e| e.to_string())?;
    Ok(DpoView { frac_positive: r.frac_positive(), trace: r.trace, final_margins: r.final_margins })
}

pub fn calibration_json(subjects: usize, lambda: f64, seed: u64) -> Result<String, String> {
    to_json(&calibration(subjects, lambda, seed)?)
}

pub fn mining_json(subjects: usize, bias_prec: f64, delta: f64, oracle_noise: f64, seed: u64) -> Result<String, String> {
    to_json(&mining(subjects, bias_prec, delta, oracle_noise, seed)?)
}

pub fn dpo_json(beta: f64, learning_rate: f64, steps: usize, seed: u64) -> Result<String, String> {
    to_json(&dpo(beta, learning_rate, steps, seed)?)
}

#[cfg(target_arch = "wasm32")]
mod wasm {
    use wasm_bindgen::prelude::*;

    // seeds cross the boundary as f64; JS numbers are exact up to 2^53
    fn seed(s: f64) -> u64 {
        s.max(0.0) as u64
    }

    #[wasm_bindgen]
    pub fn calibrate(subjects: u32, lambda: f64, s: f64) -> Result<String, JsError> {
        super::calibration_json(subjects as usize, lambda, seed(s)).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn mine(subjects: u32, bias_prec: f64, delta: f64, oracle_noise: f64, s: f64) -> Result<String, JsError> {
        super::mining_json(subjects as usize, bias_prec, delta, oracle_noise, seed(s)).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn dpo_train(beta: f64, learning_rate: f64, steps: u32, s: f64) -> Result<String, JsError> {
        super::dpo_json(beta, learning_rate, steps as usize, seed(s)).map_err(|e| JsError::new(&e))
    }
}
