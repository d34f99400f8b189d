//! Pipeline configuration: TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use claimpref::claims::ClaimFilterConfig;
use claimpref::corpus::SegmentConfig;
use claimpref::dpo::DpoTrainConfig;
use claimpref::eval::{SelectionGate, ValidityConfig, JUDGE_HC_CONFIDENCE};
use claimpref::mining::{MiningConfig, Strategy};
use claimpref::retrieval::{PackParams, RetrievalParams};
use claimpref::seed::sha256_hex;
use claimpref::synth::CorruptionSpec;
use claimpref::verifier::{ToyTrainSettings, VerifierLossConfig};
use serde::{Deserialize, Serialize};

/// Environment variable holding the remote verifier URL.
pub const VERIFIER_URL_ENV: &str = "CLAIMPREF_VERIFIER_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub master_seed: u64,
    pub paths: Paths,
    pub segment: SegmentConfig,
    pub retrieval: RetrievalParams,
    pub packing: PackParams,
    pub filters: ClaimFilterConfig,
    pub verifier: VerifierSection,
    pub calibration: CalibrationSection,
    pub mining: MiningConfig,
    pub strategy: Strategy,
    pub dpo: DpoSection,
    pub eval: EvalSection,
    pub synth: SynthSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            master_seed: 20240501,
            paths: Paths::default(),
            segment: SegmentConfig::default(),
            retrieval: RetrievalParams::default(),
            packing: PackParams::default(),
            filters: ClaimFilterConfig::default(),
            verifier: VerifierSection::default(),
            calibration: CalibrationSection::default(),
            mining: MiningConfig::default(),
            strategy: Strategy::Full,
            dpo: DpoSection::default(),
            eval: EvalSection::default(),
            synth: SynthSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Every artifact is written below this directory.
    pub work_dir: PathBuf,
    /// Input notes; defaults to the synthetic world's notes.
    pub notes: Option<PathBuf>,
    pub exclusions: Option<PathBuf>,
    /// Claims for `build-instances`; defaults to the synthetic world's claims.
    pub claims: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self { work_dir: PathBuf::from("work"), notes: None, exclusions: None, claims: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VerifierKind {
    /// Ground-truth labels of the synthetic world, optionally noisy.
    #[default]
    Oracle,
    /// Token-overlap and polarity heuristic.
    Lexical,
    /// Hashed linear model fitted by `calibrate --fit-toy`.
    Toy,
    /// HTTP scorer.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifierSection {
    pub kind: VerifierKind,
    pub url: Option<String>,
    pub oracle_noise: f64,
    pub toy_model: Option<PathBuf>,
    pub timeout_ms: u64,
    pub retries: u32,
    pub loss: VerifierLossConfig,
    pub toy: ToyTrainSettings,
}

impl Default for VerifierSection {
    fn default() -> Self {
        Self {
            kind: VerifierKind::Oracle,
            url: None,
            oracle_noise: 0.0,
            toy_model: None,
            timeout_ms: 10_000,
            retries: 3,
            loss: VerifierLossConfig::default(),
            toy: ToyTrainSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub lambda: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self { lo: -0.8, hi: 1.6, step: 0.05, lambda: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpoSection {
    pub n_pairs: usize,
    pub n_prompts: usize,
    pub vocab: usize,
    pub train: DpoTrainConfig,
}

impl Default for DpoSection {
    fn default() -> Self {
        Self { n_pairs: 50, n_prompts: 10, vocab: 8, train: DpoTrainConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub validity: ValidityConfig,
    pub gate: SelectionGate,
    pub judge_hc_confidence: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { validity: ValidityConfig::default(), gate: SelectionGate::default(), judge_hc_confidence: JUDGE_HC_CONFIDENCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub subjects: usize,
    pub notes_per_subject: usize,
    pub claims_per_subject: usize,
    pub corruption: CorruptionSpec,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { subjects: 30, notes_per_subject: 24, claims_per_subject: 30, corruption: CorruptionSpec::mining_demo() }
    }
}

impl PipelineConfig {
    /// Read a TOML file; a missing `path` means all defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fill values that depend on other sections or the environment, then check ranges.
    pub fn finalize(&mut self) -> Result<()> {
        self.mining.scoring.retrieval = self.retrieval;
        if self.verifier.url.is_none() {
            self.verifier.url = std::env::var(VERIFIER_URL_ENV).ok().filter(|u| !u.is_empty());
        }
        self.retrieval.validate()?;
        self.mining.validate()?;
        self.synth.corruption.validate()?;
        self.verifier.loss.validate()?;
        self.eval.validity.validate()?;
        self.eval.gate.validate()?;
        if !(0.0..0.5).contains(&self.verifier.oracle_noise) {
            bail!("verifier.oracle_noise must lie in [0, 0.5)");
        }
        if self.verifier.kind == VerifierKind::Remote && self.verifier.url.is_none() {
            bail!("the remote verifier needs a URL: pass --verifier-url, set verifier.url or export {VERIFIER_URL_ENV}");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding paths (inputs are
    /// hashed separately in each manifest).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        c.verifier.toy_model = None;
        sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }

    pub fn work(&self, rel: &str) -> PathBuf {
        self.paths.work_dir.join(rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_keeps_defaults() {
        let c: PipelineConfig = toml::from_str(
            "master_seed = 7\n[mining.scoring]\ndelta = 1.0\n[retrieval]\ntop_k_units = 20\n[verifier]\nkind = \"lexical\"\n",
        )
        .unwrap();
        assert_eq!(c.master_seed, 7);
        assert_eq!(c.mining.scoring.delta, 1.0);
        assert_eq!(c.mining.scoring.bias_prec, -0.34);
        assert_eq!(c.retrieval.top_k_units, 20);
        assert_eq!(c.retrieval.top_n_notes, 35);
        assert_eq!(c.verifier.kind, VerifierKind::Lexical);
    }

    #[test]
    fn documented_example_parses() {
        let doc = include_str!("../FORMATS.md");
        let start = doc.find("```toml\n").unwrap() + 8;
        let end = start + doc[start..].find("```").unwrap();
        let c: PipelineConfig = toml::from_str(&doc[start..end]).unwrap();
        assert_eq!(c.verifier.kind, VerifierKind::Remote);
        assert_eq!(c.verifier.timeout_ms, 5000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("master_sed = 1\n").is_err());
    }

    #[test]
    fn hash_ignores_paths() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.paths.work_dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.mining.scoring.delta = 0.6;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn finalize_copies_retrieval_into_mining() {
        let mut c = PipelineConfig::default();
        c.retrieval.top_k_units = 7;
        c.finalize().unwrap();
        assert_eq!(c.mining.scoring.retrieval.top_k_units, 7);
    }
}
