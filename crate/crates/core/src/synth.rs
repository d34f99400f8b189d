//! Seeded synthetic world: templated facts rendered into notes, candidate
//! summaries with planted Supported / Not Supported / Not Addressed claims,
//! and an oracle verifier that knows every planted label.
//!
//! Contradictions are produced by antonym or negation substitution on a fact
//! sentence. Not Addressed claims use a reserved vocabulary that never
//! appears in any note, so labels are consistent across subjects and the
//! oracle can score a claim from its text alone.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Note;
use crate::error::{Error, Result};
use crate::mining::{GenerationParams, GeneratorClient, PromptWindow};
use crate::seed::{rng_for, unit_interval};
use crate::text::normalize_text;
use crate::verifier::{Verdict, VerifierClient, VerifierLogits};

const DRUGS: &[&str] = &[
    "vancomycin", "heparin", "furosemide", "metoprolol", "ceftriaxone", "insulin", "lisinopril",
    "amiodarone", "piperacillin", "warfarin", "levetiracetam", "pantoprazole", "labetalol",
    "norepinephrine", "dexamethasone", "azithromycin", "enoxaparin", "diltiazem", "prednisone",
    "acyclovir",
];
const CONDITIONS: &[&str] = &[
    "pneumonia", "sepsis", "atrial fibrillation", "hypertension", "cellulitis", "pancreatitis",
    "delirium", "hyperkalemia", "urinary infection", "seizures", "heart failure", "kidney injury",
    "bacteremia", "gi bleeding", "hypoglycemia", "pulmonary embolism", "cholangitis",
    "copd exacerbation", "encephalopathy", "deep vein thrombosis",
];
const LABS: &[&str] = &[
    "creatinine", "lactate", "potassium", "troponin", "white count", "bilirubin", "sodium",
    "glucose", "lipase", "inr",
];
const ORGANISMS: &[&str] = &[
    "staph aureus", "klebsiella", "enterococcus", "pseudomonas", "streptococcus", "candida",
    "proteus", "serratia",
];

// Reserved for Not Addressed claims; never rendered into notes.
const DISTRACTOR_DRUGS: &[&str] = &["rifampin", "clozapine", "methotrexate", "ganciclovir"];
const DISTRACTOR_CONDITIONS: &[&str] = &["sarcoidosis", "myasthenia", "porphyria", "listeriosis"];
const DISTRACTOR_LABS: &[&str] = &["ferritin", "ammonia"];
const DISTRACTOR_ORGANISMS: &[&str] = &["nocardia", "histoplasma"];

/// (affirmed, contradicted) sentence templates.
const TEMPLATES: &[(&str, &str)] = &[
    ("{drug} was started for {cond} on day {d}.", "{drug} was stopped for {cond} on day {d}."),
    ("{cond} improved with {drug} by day {d}.", "{cond} worsened with {drug} by day {d}."),
    ("{lab} was elevated at {v} on day {d}.", "{lab} was low at {v} on day {d}."),
    ("{drug} was continued for {cond} through day {d}.", "{drug} was discontinued for {cond} through day {d}."),
    ("blood cultures were positive for {org} on day {d}.", "blood cultures were negative for {org} on day {d}."),
    ("{cond} resolved after {drug} by day {d}.", "{cond} persisted after {drug} by day {d}."),
    ("{drug} was given for {cond} on day {d}.", "{drug} was not given for {cond} on day {d}."),
    ("{lab} increased to {v} on day {d}.", "{lab} decreased to {v} on day {d}."),
    ("patient was intubated for {cond} on day {d}.", "patient was extubated for {cond} on day {d}."),
    ("{cond} remained stable on {drug} on day {d}.", "{cond} remained unstable on {drug} on day {d}."),
];

const FILLER: &[&str] = &[
    "Vitals reviewed at the bedside this morning.",
    "Family updated by phone regarding the plan.",
    "Plan discussed with the primary team.",
    "Tolerating diet without complaints overnight.",
    "Ambulating in the hallway with assistance.",
    "Lines and drains checked by nursing.",
];

const META_LINE: &str = "Summary: brief hospital course follows.";

pub const FACTS_PER_NOTE: usize = 8;
pub const MAX_DAY: u32 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub fact_id: String,
    pub template: usize,
    /// Sentence as rendered into a note, lowercase.
    pub affirmed: String,
    /// Antonym or negation substitution of `affirmed`.
    pub contradicted: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectWorld {
    pub subject_id: String,
    pub facts: Vec<Fact>,
    pub distractors: Vec<Fact>,
    pub notes: Vec<Note>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub seed: u64,
    pub subjects: Vec<SubjectWorld>,
}

struct Vocab<'a> {
    drugs: &'a [&'a str],
    conditions: &'a [&'a str],
    labs: &'a [&'a str],
    organisms: &'a [&'a str],
}

const FACT_VOCAB: Vocab<'static> = Vocab { drugs: DRUGS, conditions: CONDITIONS, labs: LABS, organisms: ORGANISMS };
const DISTRACTOR_VOCAB: Vocab<'static> = Vocab {
    drugs: DISTRACTOR_DRUGS,
    conditions: DISTRACTOR_CONDITIONS,
    labs: DISTRACTOR_LABS,
    organisms: DISTRACTOR_ORGANISMS,
};

fn render_pair<R: Rng>(rng: &mut R, vocab: &Vocab, template: usize) -> (String, String) {
    let drug = *vocab.drugs.choose(rng).expect("vocab");
    let cond = *vocab.conditions.choose(rng).expect("vocab");
    let lab = *vocab.labs.choose(rng).expect("vocab");
    let org = *vocab.organisms.choose(rng).expect("vocab");
    let value = format!("{:.1}", rng.gen_range(5..100) as f64 / 10.0);
    let day = rng.gen_range(1..=MAX_DAY).to_string();
    let fill = |t: &str| {
        t.replace("{drug}", drug)
            .replace("{cond}", cond)
            .replace("{lab}", lab)
            .replace("{org}", org)
            .replace("{v}", &value)
            .replace("{d}", &day)
    };
    let (a, c) = TEMPLATES[template];
    (fill(a), fill(c))
}

fn draw_facts<R: Rng>(
    rng: &mut R,
    vocab: &Vocab,
    count: usize,
    prefix: &str,
    taken: &mut BTreeSet<String>,
) -> Vec<Fact> {
    let mut facts = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while facts.len() < count && attempts < count * 200 {
        attempts += 1;
        let template = rng.gen_range(0..TEMPLATES.len());
        let (affirmed, contradicted) = render_pair(rng, vocab, template);
        if taken.contains(&affirmed) || taken.contains(&contradicted) {
            continue;
        }
        taken.insert(affirmed.clone());
        taken.insert(contradicted.clone());
        facts.push(Fact {
            fact_id: format!("{prefix}{}", facts.len()),
            template,
            affirmed,
            contradicted,
        });
    }
    facts
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Generate `n_subjects` subjects with `notes_per_subject` notes each.
///
/// Every note holds a header, [`FACTS_PER_NOTE`] fact lines and two filler
/// lines, so it segments into at least 11 evidence units.
pub fn gen_world(n_subjects: usize, notes_per_subject: usize, seed: u64) -> Result<SyntheticWorld> {
    if n_subjects == 0 || notes_per_subject == 0 {
        return Err(Error::InvalidParameter("gen_world needs at least one subject and one note".into()));
    }
    let mut subjects = Vec::with_capacity(n_subjects);
    for s in 0..n_subjects {
        let subject_id = format!("S{s:04}");
        let mut rng = rng_for(seed, &["synth-world", &subject_id]);
        let mut taken = BTreeSet::new();
        let facts = draw_facts(&mut rng, &FACT_VOCAB, notes_per_subject * FACTS_PER_NOTE, "f", &mut taken);
        if facts.len() < notes_per_subject * FACTS_PER_NOTE {
            return Err(Error::InvalidParameter(format!(
                "fact space exhausted for {subject_id}; lower notes_per_subject"
            )));
        }
        let distractors = draw_facts(&mut rng, &DISTRACTOR_VOCAB, 48, "d", &mut taken);

        let mut notes = Vec::with_capacity(notes_per_subject);
        for (i, chunk) in facts.chunks(FACTS_PER_NOTE).enumerate() {
            let mut lines = vec![format!("Progress note for hospital day {}.", i + 1), String::new()];
            let split = rng.gen_range(2..FACTS_PER_NOTE - 1);
            for (j, fact) in chunk.iter().enumerate() {
                if j == split {
                    lines.push(FILLER.choose(&mut rng).expect("filler").to_string());
                    lines.push(String::new());
                }
                lines.push(capitalize(&fact.affirmed));
            }
            lines.push(FILLER.choose(&mut rng).expect("filler").to_string());
            notes.push(Note {
                note_id: format!("{subject_id}-N{i:03}"),
                subject_id: subject_id.clone(),
                admission_id: Some(format!("{subject_id}-A1")),
                category: if i % 3 == 2 { "nursing" } else { "physician" }.to_owned(),
                chart_time: 1_600_000_000 + (i as i64) * 21_600,
                text: lines.join("\n"),
            });
        }
        subjects.push(SubjectWorld { subject_id, facts, distractors, notes });
    }
    Ok(SyntheticWorld { seed, subjects })
}

impl SyntheticWorld {
    pub fn subject(&self, subject_id: &str) -> Option<&SubjectWorld> {
        self.subjects.iter().find(|s| s.subject_id == subject_id)
    }

    pub fn notes(&self) -> impl Iterator<Item = &Note> {
        self.subjects.iter().flat_map(|s| s.notes.iter())
    }

    /// Notes in the line-delimited ingestion format.
    pub fn notes_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for note in self.notes() {
            out.push_str(&serde_json::to_string(note)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Ground-truth label for every claim text the world can produce.
    pub fn label_table(&self) -> HashMap<String, Verdict> {
        let mut table = HashMap::new();
        for s in &self.subjects {
            for f in &s.facts {
                table.insert(claim_key(&f.affirmed), Verdict::Supported);
                table.insert(claim_key(&f.contradicted), Verdict::NotSupported);
            }
            for d in &s.distractors {
                table.insert(claim_key(&d.affirmed), Verdict::NotAddressed);
                table.insert(claim_key(&d.contradicted), Verdict::NotAddressed);
            }
        }
        table
    }

    pub fn oracle(&self, noise_rate: f64, seed: u64) -> Result<OracleVerifier> {
        OracleVerifier::new(self.label_table(), noise_rate, seed)
    }
}

/// Lookup key for a claim: normalized text without trailing terminators.
pub fn claim_key(text: &str) -> String {
    normalize_text(text).trim_end_matches(['.', '!', '?']).trim_end().to_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionSpec {
    pub p_contradict: f64,
    pub p_unaddressed: f64,
    pub claims_per_candidate: usize,
    pub candidates_per_prompt: usize,
    /// Claim count varies uniformly in `claims_per_candidate ± length_spread`.
    pub length_spread: usize,
    /// Added to `p_contradict` per claim position, so long candidates
    /// accumulate errors toward their end.
    pub drift: f64,
    /// Per-claim probability of an immediate verbatim repeat.
    pub p_duplicate: f64,
    /// Probability that a candidate opens with a meta line.
    pub p_meta: f64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            p_contradict: 0.15,
            p_unaddressed: 0.10,
            claims_per_candidate: 12,
            candidates_per_prompt: 8,
            length_spread: 0,
            drift: 0.0,
            p_duplicate: 0.0,
            p_meta: 0.0,
        }
    }
}

impl CorruptionSpec {
    /// Fewer contradictions, a wide length spread and a little per-claim
    /// drift, so long candidates carry more errors.
    pub fn mining_demo() -> Self {
        Self { p_contradict: 0.10, length_spread: 6, drift: 0.02, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_contradict, self.p_unaddressed, self.drift, self.p_duplicate, self.p_meta];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("corruption probabilities must lie in [0, 1]".into()));
        }
        if self.p_contradict + self.p_unaddressed > 1.0 {
            return Err(Error::InvalidParameter("p_contradict + p_unaddressed must be <= 1".into()));
        }
        if self.claims_per_candidate == 0 || self.candidates_per_prompt == 0 {
            return Err(Error::InvalidParameter("claim and candidate counts must be >= 1".into()));
        }
        Ok(())
    }

    fn p_contradict_at(&self, position: usize) -> f64 {
        (self.p_contradict + self.drift * position as f64).min(1.0 - self.p_unaddressed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedClaim {
    /// Normalized claim text as segmentation will produce it.
    pub text: String,
    pub label: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCandidate {
    pub text: String,
    /// Distinct claims in text order.
    pub claims: Vec<PlantedClaim>,
    pub n_duplicates: usize,
    pub has_meta: bool,
}

impl SynthCandidate {
    pub fn count(&self, label: Verdict) -> usize {
        self.claims.iter().filter(|c| c.label == label).count()
    }
}

/// Sample `spec.candidates_per_prompt` candidates for one prompt window.
///
/// Supported and contradicted claims draw facts without replacement,
/// window facts first, then the subject's remaining facts.
pub fn gen_candidates(
    world: &SyntheticWorld,
    window: &PromptWindow,
    spec: &CorruptionSpec,
    seed: u64,
) -> Result<Vec<SynthCandidate>> {
    spec.validate()?;
    let subject = world
        .subject(&window.subject_id)
        .ok_or_else(|| Error::UnknownDocument(window.subject_id.clone()))?;
    let by_key: HashMap<String, usize> = subject
        .facts
        .iter()
        .enumerate()
        .map(|(i, f)| (claim_key(&f.affirmed), i))
        .collect();
    let mut in_window: Vec<usize> = Vec::new();
    for line in window.prompt_text.lines() {
        if let Some(&i) = by_key.get(&claim_key(line)) {
            if !in_window.contains(&i) {
                in_window.push(i);
            }
        }
    }
    let window_tag = window.window_index.to_string();

    let mut out = Vec::with_capacity(spec.candidates_per_prompt);
    for j in 0..spec.candidates_per_prompt {
        let mut rng = rng_for(seed, &["synth-candidate", &window.subject_id, &window_tag, &j.to_string()]);
        let mut pool = in_window.clone();
        pool.shuffle(&mut rng);
        let mut rest: Vec<usize> = (0..subject.facts.len()).filter(|i| !in_window.contains(i)).collect();
        rest.shuffle(&mut rng);
        pool.extend(rest);
        let mut pool = pool.into_iter();
        let mut distractors: Vec<usize> = (0..subject.distractors.len()).collect();
        distractors.shuffle(&mut rng);
        let mut distractors = distractors.into_iter();

        let spread = spec.length_spread as i64;
        let n = (spec.claims_per_candidate as i64 + rng.gen_range(-spread..=spread)).max(1) as usize;
        let mut claims = Vec::with_capacity(n);
        for pos in 0..n {
            let r: f64 = rng.gen();
            let pc = spec.p_contradict_at(pos);
            let planted = if r < pc {
                pool.next().map(|i| (subject.facts[i].contradicted.clone(), Verdict::NotSupported))
            } else if r < pc + spec.p_unaddressed {
                distractors.next().map(|i| (subject.distractors[i].affirmed.clone(), Verdict::NotAddressed))
            } else {
                pool.next().map(|i| (subject.facts[i].affirmed.clone(), Verdict::Supported))
            };
            match planted {
                Some((text, label)) => claims.push(PlantedClaim { text: normalize_text(&text), label }),
                None => break,
            }
        }

        let mut sentences = Vec::with_capacity(claims.len() * 2);
        let mut n_duplicates = 0;
        for c in &claims {
            sentences.push(capitalize(&c.text));
            if spec.p_duplicate > 0.0 && rng.gen::<f64>() < spec.p_duplicate {
                sentences.push(capitalize(&c.text));
                n_duplicates += 1;
            }
        }
        let has_meta = spec.p_meta > 0.0 && rng.gen::<f64>() < spec.p_meta;
        let mut paragraphs: Vec<String> = sentences.chunks(4).map(|p| p.join(" ")).collect();
        if has_meta {
            paragraphs.insert(0, META_LINE.to_owned());
        }
        out.push(SynthCandidate {
            text: paragraphs.join("\n\n"),
            claims,
            n_duplicates,
            has_meta,
        });
    }
    Ok(out)
}

/// Verifier that returns the planted label with a margin in `[1.2, 2.8)`.
///
/// With probability `noise_rate` (a pure function of seed and claim) the
/// label is flipped to one of the two wrong classes. Claims the world never
/// planted score as Not Addressed.
#[derive(Debug, Clone)]
pub struct OracleVerifier {
    labels: HashMap<String, Verdict>,
    noise_rate: f64,
    seed: u64,
}

impl OracleVerifier {
    pub fn new(labels: HashMap<String, Verdict>, noise_rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&noise_rate) {
            return Err(Error::InvalidParameter("oracle noise_rate must lie in [0, 0.5)".into()));
        }
        Ok(Self { labels, noise_rate, seed })
    }

    pub fn true_label(&self, claim: &str) -> Verdict {
        self.labels.get(&claim_key(claim)).copied().unwrap_or(Verdict::NotAddressed)
    }

    pub fn emitted_label(&self, claim: &str) -> Verdict {
        let key = claim_key(claim);
        let truth = self.labels.get(&key).copied().unwrap_or(Verdict::NotAddressed);
        if self.noise_rate > 0.0 && unit_interval(self.seed, &["oracle-noise", &key]) < self.noise_rate {
            let shift = if unit_interval(self.seed, &["oracle-flip", &key]) < 0.5 { 1 } else { 2 };
            Verdict::from_index((truth.index() + shift) % 3).expect("index < 3")
        } else {
            truth
        }
    }
}

impl VerifierClient for OracleVerifier {
    fn score(&self, claim: &str, _evidence: &[&str]) -> Result<VerifierLogits> {
        let label = self.emitted_label(claim);
        let margin = 1.2 + 1.6 * unit_interval(self.seed, &["oracle-margin", &claim_key(claim)]);
        let mut z = [0.0; 3];
        z[label.index()] = margin;
        Ok(z.into())
    }
}

/// [`GeneratorClient`] over a synthetic world. Temperature and top-p are
/// ignored; the candidate count comes from the generation parameters.
#[derive(Debug, Clone)]
pub struct SynthGenerator {
    pub world: SyntheticWorld,
    pub spec: CorruptionSpec,
}

impl GeneratorClient for SynthGenerator {
    fn generate(&self, window: &PromptWindow, params: &GenerationParams, seed: u64) -> Result<Vec<String>> {
        let spec = CorruptionSpec { candidates_per_prompt: params.candidates_per_prompt, ..self.spec };
        Ok(gen_candidates(&self.world, window, &spec, seed)?.into_iter().map(|c| c.text).collect())
    }
}

/// A labeled claim for verifier training or calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledClaim {
    pub subject_id: String,
    pub claim: String,
    pub label: Verdict,
}

/// Draw `per_subject` claims per subject with labels in roughly 5:3:2 A:B:C proportion.
pub fn sample_labeled_claims(world: &SyntheticWorld, per_subject: usize, seed: u64) -> Vec<SampledClaim> {
    let mut out = Vec::new();
    for s in &world.subjects {
        let mut rng = rng_for(seed, &["labeled-claims", &s.subject_id]);
        let mut facts: Vec<&Fact> = s.facts.iter().collect();
        facts.shuffle(&mut rng);
        let mut facts = facts.into_iter();
        let mut distractors: Vec<&Fact> = s.distractors.iter().collect();
        distractors.shuffle(&mut rng);
        let mut distractors = distractors.into_iter();
        for _ in 0..per_subject {
            let r: f64 = rng.gen();
            let item = if r < 0.5 {
                facts.next().map(|f| (f.affirmed.clone(), Verdict::Supported))
            } else if r < 0.8 {
                facts.next().map(|f| (f.contradicted.clone(), Verdict::NotSupported))
            } else {
                distractors.next().map(|f| (f.affirmed.clone(), Verdict::NotAddressed))
            };
            if let Some((claim, label)) = item {
                out.push(SampledClaim { subject_id: s.subject_id.clone(), claim, label });
            }
        }
    }
    out
}
