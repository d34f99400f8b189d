//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use claimpref::claims::ClaimFilterConfig;
use claimpref::corpus::{ingest_notes, segment_corpus, EvidenceUnit, Note, SegmentConfig};
use claimpref::dpo::{
    best_of_k, dloss_dscore, dpo_grad, dpo_loss, dpo_score, log_sigmoid, synthetic_toy_pairs, train_toy_dpo, DpoConfig,
    DpoTrainConfig, PairLogProbs, ToyPair, ToyPolicy,
};
use claimpref::eval::{
    aggregate_run, degeneration_gate, diagnostics_table, mining_diagnostics, pair_count_spread, stability_sweep,
    validity_check, RunAggregates, SelectionGate, ValidityConfig, NsRates, STABILITY_BIASES, STABILITY_DELTAS,
};
use claimpref::mining::{
    build_pools, build_windows, mine_split, satisfies_constraints, score_candidate, select_pairs, utility, MiningConfig,
    PoolBuild, SelectionSettings, Strategy, SummaryStats, UtilityWeights,
};
use claimpref::retrieval::{retrieve_two_stage, subject_corpora, RetrievalParams, SubjectCorpus};
use claimpref::synth::{gen_candidates, CorruptionSpec, SynthGenerator, SyntheticWorld};
use claimpref::verifier::{bias_grid, sweep_bias, Verdict, VerifierLogits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BM25_TOL: f64 = 1e-9;
const BM25_BUDGET: Duration = Duration::from_secs(10);
const MINING_BUDGET: Duration = Duration::from_secs(120);
const FEWER_B_MIN: f64 = 0.95;
const DELTA_B_MIN: f64 = 2.0;
const RANDOM_DELTA_B_MAX: f64 = 0.5;
const PAIR_COUNT_SPREAD_MAX: f64 = 0.10;
const LN2_TOL: f64 = 1e-12;
const FD_REL_TOL: f64 = 1e-6;
const FD_STEP: f64 = 1e-5;
const DPO_FRAC_MIN: f64 = 0.95;

const MINING_SUBJECTS: usize = 30;
const MINING_NOTES: usize = 24;
const MINING_SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() {
    let started = Instant::now();
    let mining = MiningFixture::build();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("BM25 oracle equivalence", Box::new(bm25_oracle)),
        ("utility arithmetic", Box::new(utility_arithmetic)),
        ("pair-constraint soundness", Box::new(|| constraint_soundness(&mining))),
        ("strategy ablation trends", Box::new(|| ablation_trends(&mining))),
        ("threshold stability", Box::new(|| threshold_stability(&mining))),
        ("calibration law", Box::new(calibration_law)),
        ("DPO numerics", Box::new(dpo_numerics)),
        ("DPO dynamics", Box::new(dpo_dynamics)),
        ("Best-of-8 rerank", Box::new(best_of_eight)),
        ("exact contradiction counts", Box::new(exact_counts)),
        ("validity gate fixtures", Box::new(gate_fixtures)),
        ("pipeline determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failures += usize::from(!o.pass);
        println!("[{}] {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {}/{} passed in {:.1}s", criteria.len() - failures, criteria.len(), started.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// 1

fn brute_bm25(docs: &[Vec<String>], query: &BTreeSet<String>, k1: f64, b: f64) -> Vec<f64> {
    let n = docs.len() as f64;
    let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    docs.iter()
        .map(|doc| {
            let len = doc.len() as f64;
            query
                .iter()
                .map(|q| {
                    let tf = doc.iter().filter(|w| *w == q).count() as f64;
                    if tf == 0.0 {
                        return 0.0;
                    }
                    let df = docs.iter().filter(|d| d.contains(q)).count() as f64;
                    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                    idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * len / avg))
                })
                .sum()
        })
        .collect()
}

fn ranked(scores: &[f64], ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&x, &y| scores[y].partial_cmp(&scores[x]).unwrap().then(ids[x].cmp(&ids[y])));
    order
}

fn brute_two_stage(notes: &[Note], units: &[EvidenceUnit], claim: &str, p: &RetrievalParams) -> Vec<(String, f64)> {
    let split = |t: &str| t.to_lowercase().split_whitespace().map(str::to_owned).collect::<Vec<_>>();
    let query: BTreeSet<String> = split(claim).into_iter().collect();
    let note_ids: Vec<String> = notes.iter().map(|n| n.note_id.clone()).collect();
    let note_scores = brute_bm25(&notes.iter().map(|n| split(&n.text)).collect::<Vec<_>>(), &query, p.k1, p.b);
    let top: BTreeSet<&String> = ranked(&note_scores, &note_ids).into_iter().take(p.top_n_notes).map(|i| &note_ids[i]).collect();

    let unit_ids: Vec<String> = units.iter().map(|u| u.unit_id.clone()).collect();
    let unit_scores = brute_bm25(&units.iter().map(|u| split(&u.text)).collect::<Vec<_>>(), &query, p.k1, p.b);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut per_note: HashMap<&str, usize> = HashMap::new();
    for i in ranked(&unit_scores, &unit_ids) {
        let u = &units[i];
        if !top.contains(&u.note_id) {
            continue;
        }
        if out.len() == p.top_k_units {
            break;
        }
        if p.dedup && !seen.insert(u.text.clone()) {
            continue;
        }
        let c = per_note.entry(&u.note_id).or_default();
        if *c == p.cap_per_note {
            continue;
        }
        *c += 1;
        out.push((u.unit_id.clone(), unit_scores[i]));
    }
    out
}

fn random_corpus(rng: &mut ChaCha8Rng) -> (Vec<Note>, Vec<EvidenceUnit>) {
    let vocab = rng.gen_range(2..=20);
    let n_units = rng.gen_range(1..=50);
    let n_notes = rng.gen_range(1..=n_units.min(10));
    let mut texts: Vec<String> = Vec::new();
    let mut units = Vec::new();
    for i in 0..n_units {
        let text = if !texts.is_empty() && rng.gen_bool(0.15) {
            texts[rng.gen_range(0..texts.len())].clone()
        } else {
            let len = rng.gen_range(1..=8);
            (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect::<Vec<_>>().join(" ")
        };
        texts.push(text.clone());
        let note = if i < n_notes { i } else { rng.gen_range(0..n_notes) };
        units.push(EvidenceUnit {
            unit_id: format!("u{i:02}"),
            note_id: format!("n{note:02}"),
            subject_id: "s".into(),
            span_index: i,
            char_len: text.len(),
            text,
            time: 0,
        });
    }
    let notes = (0..n_notes)
        .map(|k| Note {
            note_id: format!("n{k:02}"),
            subject_id: "s".into(),
            admission_id: None,
            category: String::new(),
            chart_time: 0,
            text: units.iter().filter(|u| u.note_id == format!("n{k:02}")).map(|u| u.text.as_str()).collect::<Vec<_>>().join("\n"),
        })
        .collect();
    (notes, units)
}

fn bm25_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut mismatches = 0;
    let mut queries = 0;
    for _ in 0..200 {
        let (notes, units) = random_corpus(&mut rng);
        let corpus = SubjectCorpus::build("s", &notes, units.clone()).expect("corpus");
        let params = RetrievalParams {
            top_n_notes: rng.gen_range(1..=notes.len()),
            top_k_units: rng.gen_range(1..=units.len()),
            cap_per_note: rng.gen_range(1..=6),
            dedup: rng.gen_bool(0.5),
            ..RetrievalParams::default()
        };
        for _ in 0..5 {
            queries += 1;
            let len = rng.gen_range(1..=6);
            let claim = (0..len).map(|_| format!("W{}", rng.gen_range(0..24))).collect::<Vec<_>>().join(" ");
            let got = retrieve_two_stage(&claim, &corpus, &params);
            let want = brute_two_stage(&notes, &units, &claim, &params);
            if got.len() != want.len() || got.iter().zip(&want).any(|(g, w)| g.unit_id != w.0) {
                mismatches += 1;
                continue;
            }
            for (g, w) in got.iter().zip(&want) {
                worst = worst.max((g.score - w.1).abs());
            }
        }
    }
    let elapsed = t.elapsed();
    outcome(
        mismatches == 0 && worst <= BM25_TOL && elapsed < BM25_BUDGET,
        format!("200 corpora, {queries} queries, {mismatches} ranking mismatches, max |dscore| {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------------------
// 2

fn closed_form(s: &SummaryStats, w: &UtilityWeights) -> f64 {
    let (na, nb, nc) = (s.n_a as f64, s.n_b as f64, s.n_c as f64);
    let covered = if s.n_used < w.n0 { s.n_used } else { w.n0 } as f64;
    w.lambda_a * na - w.lambda_b * nb - w.lambda_c * nc + w.lambda_cov * covered
        - w.lambda_dup * (s.dup_frac * s.n_used as f64)
        - w.lambda_meta * s.meta_hits as f64
}

fn utility_arithmetic() -> Outcome {
    let w = UtilityWeights::default();
    let hand = [
        (SummaryStats { n_a: 10, n_b: 1, n_c: 2, n_used: 13, ..Default::default() }, 9.0),
        (SummaryStats { n_a: 12, n_used: 12, dup_frac: 0.5, meta_hits: 1, ..Default::default() }, 1.0),
    ];
    let hand_ok = hand.iter().all(|(s, u)| utility(s, &w) == *u);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    for _ in 0..1000 {
        let (n_a, n_b, n_c) = (rng.gen_range(0..30), rng.gen_range(0..10), rng.gen_range(0..10));
        let s = SummaryStats {
            n_a,
            n_b,
            n_c,
            n_used: n_a + n_b + n_c,
            dup_frac: rng.gen(),
            meta_hits: rng.gen_range(0..4),
            ..Default::default()
        };
        bad += usize::from(utility(&s, &w).to_bits() != closed_form(&s, &w).to_bits());
    }
    outcome(hand_ok && bad == 0, format!("hand cases 9.0 and 1.0 {}, {bad}/1000 random mismatches", if hand_ok { "exact" } else { "WRONG" }))
}

// ---------------------------------------------------------------------------
// 3-5 share one pool built under the noise-free oracle.

struct MiningFixture {
    config: MiningConfig,
    build: PoolBuild,
    build_time: Duration,
}

impl MiningFixture {
    fn build() -> Self {
        let (world, corpora) = common::indexed_world(MINING_SUBJECTS, MINING_NOTES, MINING_SEED);
        let config = MiningConfig::default();
        let oracle = world.oracle(0.0, MINING_SEED).expect("oracle");
        let generator = SynthGenerator { world, spec: CorruptionSpec::mining_demo() };
        let filters = ClaimFilterConfig::default().compile().expect("filters");
        let t = Instant::now();
        let build = build_pools(&corpora, &generator, &oracle, &filters, &config, MINING_SEED).expect("pools");
        Self { config, build, build_time: t.elapsed() }
    }

    fn select(&self, strategy: Strategy) -> Vec<claimpref::mining::PreferencePair> {
        select_pairs(&self.build, &self.config, SelectionSettings::from_config(&self.config, strategy), MINING_SEED).0
    }
}

fn constraint_soundness(m: &MiningFixture) -> Outcome {
    let pairs = m.select(Strategy::Full);
    let c = &m.config.constraints;
    let violations = pairs
        .iter()
        .filter(|p| !satisfies_constraints(&p.chosen_stats, &p.rejected_stats, p.utility_gap, c) || p.chosen_index == p.rejected_index)
        .count();
    let fewer = pairs.iter().filter(|p| p.chosen_stats.n_b < p.rejected_stats.n_b).count() as f64 / pairs.len().max(1) as f64;
    let scale_ok = m.build.n_subjects >= 30
        && m.build.n_windows >= 900
        && m.build.pools.iter().all(|p| p.candidates.len() == 8);
    outcome(
        scale_ok && !pairs.is_empty() && violations == 0 && fewer >= FEWER_B_MIN && m.build_time < MINING_BUDGET,
        format!(
            "{} subjects, {} prompts x 8, {} pairs, {violations} violations, fewer-B fraction {fewer:.4}, pool build {:.1}s",
            m.build.n_subjects,
            m.build.n_windows,
            pairs.len(),
            m.build_time.as_secs_f64()
        ),
    )
}

fn ablation_trends(m: &MiningFixture) -> Outcome {
    let mut rows = Vec::new();
    for s in Strategy::ALL {
        match mining_diagnostics(&m.select(s)) {
            Ok(r) => rows.push((s.name().to_owned(), r)),
            Err(e) => return outcome(false, format!("{}: {e}", s.name())),
        }
    }
    let get = |name: &str| rows.iter().find(|(n, _)| n == name).map(|(_, r)| *r).expect("row");
    let (full, random, nohcns, nolc) = (get("full"), get("random"), get("no_hcns"), get("no_length_coverage"));
    let checks = [
        full.delta_b >= DELTA_B_MIN,
        random.delta_b.abs() <= RANDOM_DELTA_B_MAX,
        nolc.delta_chars < 0.0 && nolc.delta_b >= DELTA_B_MIN,
        nohcns.mean_b_chosen > full.mean_b_chosen,
    ];
    print!("{}", indent(&diagnostics_table(&rows)));
    outcome(
        checks.iter().all(|c| *c),
        format!(
            "dB full {:.3}, |dB| random {:.3}, no-length-coverage dchars {:.1} with dB {:.3}, #B chosen no-hcns {:.3} vs full {:.3}",
            full.delta_b,
            random.delta_b.abs(),
            nolc.delta_chars,
            nolc.delta_b,
            nohcns.mean_b_chosen,
            full.mean_b_chosen
        ),
    )
}

fn indent(table: &str) -> String {
    table.lines().map(|l| format!("       {l}\n")).collect()
}

fn threshold_stability(m: &MiningFixture) -> Outcome {
    let points = stability_sweep(&m.build, &m.config, &STABILITY_DELTAS, &STABILITY_BIASES, MINING_SEED);
    let spread = pair_count_spread(&points);
    let min_db = points.iter().map(|p| p.report.map_or(f64::NEG_INFINITY, |r| r.delta_b)).fold(f64::INFINITY, f64::min);
    let counts: Vec<usize> = points.iter().map(|p| p.n_pairs).collect();
    outcome(
        spread.is_some_and(|s| s <= PAIR_COUNT_SPREAD_MAX) && min_db >= DELTA_B_MIN,
        format!("9 grid points, pair counts {counts:?}, spread {:.3}, min dB {min_db:.3}", spread.unwrap_or(f64::NAN)),
    )
}

// ---------------------------------------------------------------------------
// 6

fn macro_f1(truth: &[Verdict], pred: &[Verdict]) -> f64 {
    let mut f = 0.0;
    for k in Verdict::ALL {
        let tp = truth.iter().zip(pred).filter(|(t, p)| **t == k && **p == k).count() as f64;
        let fp = truth.iter().zip(pred).filter(|(t, p)| **t != k && **p == k).count() as f64;
        let fn_ = truth.iter().zip(pred).filter(|(t, p)| **t == k && **p != k).count() as f64;
        if tp > 0.0 {
            f += 2.0 * tp / (2.0 * tp + fp + fn_);
        }
    }
    f / 3.0
}

fn argmax_decode(l: &VerifierLogits, bias: f64) -> Verdict {
    let z = [l.a, l.b + bias, l.c];
    let mut best = 0;
    for k in 1..3 {
        if z[k] > z[best] {
            best = k;
        }
    }
    Verdict::ALL[best]
}

fn calibration_law() -> Outcome {
    let grid = bias_grid(-0.8, 1.6, 0.05).expect("grid");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0;
    let mut lambda0_mismatch = 0;
    for _ in 0..500 {
        let n = rng.gen_range(5..60);
        let dev: Vec<(VerifierLogits, Verdict)> = (0..n)
            .map(|_| {
                let l = VerifierLogits::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                (l, Verdict::ALL[rng.gen_range(0..3)])
            })
            .collect();
        let sweep = sweep_bias(&dev, &grid, 0.0).expect("sweep");
        violations += sweep
            .curve
            .windows(2)
            .filter(|w| w[1].recall_ns < w[0].recall_ns || w[1].predicted_b < w[0].predicted_b)
            .count();
        let truth: Vec<Verdict> = dev.iter().map(|d| d.1).collect();
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for &b in &grid {
            let pred: Vec<Verdict> = dev.iter().map(|d| argmax_decode(&d.0, b)).collect();
            let f = macro_f1(&truth, &pred);
            if f > best.0 + 1e-12 {
                best = (f, b);
            }
        }
        lambda0_mismatch += usize::from(sweep.best_bias != best.1 || (sweep.best_objective - best.0).abs() > 1e-12);
    }
    outcome(
        violations == 0 && lambda0_mismatch == 0,
        format!("500 logit sets x {} biases, {violations} monotonicity violations, {lambda0_mismatch} lambda=0 argmax mismatches", grid.len()),
    )
}

// ---------------------------------------------------------------------------
// 7

fn dpo_numerics() -> Outcome {
    let cfg = DpoConfig::default();
    let zero = PairLogProbs { lp_pol_pos: -3.0, lp_pol_neg: -5.0, lp_ref_pos: -3.0, lp_ref_neg: -5.0 };
    let ln2_err = (dpo_loss(&[zero], &cfg).expect("loss") - std::f64::consts::LN_2).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_rel = 0.0f64;
    let mut worst_scalar = 0.0f64;
    let mut nonzero_s = 0;
    for k in 0..100 {
        let n_prompts = rng.gen_range(1..5);
        let vocab = rng.gen_range(2..7);
        let beta = rng.gen_range(0.05..2.0);
        let cfg = DpoConfig::new(beta).expect("beta");
        let pairs: Vec<ToyPair> = (0..rng.gen_range(1..12))
            .map(|_| {
                let prompt = rng.gen_range(0..n_prompts);
                let chosen = rng.gen_range(0..vocab);
                let rejected = (chosen + rng.gen_range(1..vocab)) % vocab;
                ToyPair { prompt, chosen, rejected }
            })
            .collect();
        let policy = ToyPolicy::random(n_prompts, vocab, 2.0, 1000 + k);
        let reference = ToyPolicy::random(n_prompts, vocab, 2.0, 2000 + k);
        let (_, grad) = dpo_grad(&pairs, &cfg, &policy, &reference).expect("grad");
        let mut fd = vec![0.0; grad.len()];
        for (i, slot) in fd.iter_mut().enumerate() {
            let mut hi = policy.clone();
            let mut lo = policy.clone();
            hi.params[i] += FD_STEP;
            lo.params[i] -= FD_STEP;
            let (lh, _) = dpo_grad(&pairs, &cfg, &hi, &reference).expect("loss");
            let (ll, _) = dpo_grad(&pairs, &cfg, &lo, &reference).expect("loss");
            *slot = (lh - ll) / (2.0 * FD_STEP);
        }
        let diff: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = grad.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|a| a * a).sum::<f64>().sqrt());
        worst_rel = worst_rel.max(diff / norm.max(f64::MIN_POSITIVE));

        let s: f64 = rng.gen_range(-8.0..8.0);
        let fd_s = (-log_sigmoid(s + FD_STEP) + log_sigmoid(s - FD_STEP)) / (2.0 * FD_STEP);
        worst_scalar = worst_scalar.max((dloss_dscore(s) - fd_s).abs() / fd_s.abs());

        let same = policy.clone();
        nonzero_s += pairs
            .iter()
            .filter(|p| dpo_score(&claimpref::dpo::pair_log_probs(&same, &policy, p), beta) != 0.0)
            .count();
    }
    outcome(
        ln2_err <= LN2_TOL && worst_rel < FD_REL_TOL && worst_scalar < FD_REL_TOL && nonzero_s == 0,
        format!(
            "|loss(0) - ln2| {ln2_err:.1e}, worst gradient rel. error {worst_rel:.2e} (params) / {worst_scalar:.2e} (score), {nonzero_s} non-zero s at policy = reference"
        ),
    )
}

// ---------------------------------------------------------------------------
// 8

fn dpo_dynamics() -> Outcome {
    let pairs = synthetic_toy_pairs(50, 10, 8, 8).expect("pairs");
    let cfg = DpoTrainConfig { seed: 8, ..DpoTrainConfig::default() };
    let a = train_toy_dpo(&pairs, 10, 8, &cfg).expect("train");
    let b = train_toy_dpo(&pairs, 10, 8, &cfg).expect("train");
    let same = a == b;
    outcome(
        cfg.steps <= 500 && a.mean_margin() > 0.0 && a.frac_positive() >= DPO_FRAC_MIN && same,
        format!(
            "{} steps, mean s {:.3}, s > 0 on {:.1}% of 50 pairs, reruns {}",
            cfg.steps,
            a.mean_margin(),
            100.0 * a.frac_positive(),
            if same { "identical" } else { "DIFFER" }
        ),
    )
}

// ---------------------------------------------------------------------------
// 9

fn best_of_eight() -> Outcome {
    let seed = 9;
    let (world, corpora) = common::indexed_world(12, MINING_NOTES, seed);
    let oracle = world.oracle(0.1, seed).expect("oracle");
    let spec = CorruptionSpec { p_duplicate: 0.08, p_meta: 0.15, ..CorruptionSpec::mining_demo() };
    let generator = SynthGenerator { world, spec };
    let config = MiningConfig::default();
    let filters = ClaimFilterConfig::default().compile().expect("filters");
    let build = build_pools(&corpora, &generator, &oracle, &filters, &config, seed).expect("pools");

    let mut base = Vec::new();
    let mut best = Vec::new();
    let mut true_ns = [(0usize, 0usize); 2];
    for pool in &build.pools {
        let stats: Vec<SummaryStats> = pool.candidates.iter().map(|c| c.stats).collect();
        let pick = best_of_k(&stats, &config.weights).expect("non-empty");
        for (slot, (out, idx)) in [(&mut base, 0), (&mut best, pick)].into_iter().enumerate() {
            out.push((pool.prompt_id(), stats[idx]));
            let claims = &pool.candidates[idx].claims;
            true_ns[slot].0 += claims.iter().filter(|c| oracle.true_label(&c.text) == Verdict::NotSupported).count();
            true_ns[slot].1 += claims.len();
        }
    }
    let validity = ValidityConfig::default();
    let base_run = aggregate_run("base", &base, &validity);
    let best_run = aggregate_run("best-of-8", &best, &validity);
    let rate = |r: &RunAggregates| r.ns_rate.micro.unwrap_or(f64::NAN);
    let truth = |i: usize| true_ns[i].0 as f64 / true_ns[i].1.max(1) as f64;
    let pass = rate(&best_run) <= rate(&base_run) && best_run.valid_frac >= base_run.valid_frac && truth(1) <= truth(0);
    outcome(
        pass,
        format!(
            "{} prompts; NS-rate {:.2}% -> {:.2}% (ground truth {:.2}% -> {:.2}%), valid {:.1}% -> {:.1}%",
            build.pools.len(),
            100.0 * rate(&base_run),
            100.0 * rate(&best_run),
            100.0 * truth(0),
            100.0 * truth(1),
            100.0 * base_run.valid_frac,
            100.0 * best_run.valid_frac
        ),
    )
}

// ---------------------------------------------------------------------------
// 10

fn exact_counts() -> Outcome {
    let seed = 10;
    let (world, corpora) = common::indexed_world(6, 16, seed);
    let oracle = world.oracle(0.0, seed).expect("oracle");
    let config = MiningConfig::default();
    let filters = ClaimFilterConfig::default().compile().expect("filters");
    let spec = CorruptionSpec { p_duplicate: 0.1, p_meta: 0.2, ..CorruptionSpec::mining_demo() };
    let mut total = 0;
    let mut exact = 0;
    let mut planted_b = 0;
    'outer: for corpus in &corpora {
        for window in build_windows(&corpus.units, &config.windows, seed) {
            let candidates = gen_candidates(&world, &window, &spec, seed).expect("candidates");
            for (i, c) in candidates.iter().enumerate() {
                let scored = score_candidate(i, &c.text, corpus, &oracle, &filters, &config.scoring);
                let want = c.count(Verdict::NotSupported);
                planted_b += want;
                exact += usize::from(scored.stats.n_b == want);
                total += 1;
                if total == 1000 {
                    break 'outer;
                }
            }
        }
    }
    outcome(
        total == 1000 && exact == total,
        format!("{exact}/{total} candidates with n_B equal to the planted count ({planted_b} planted contradictions)"),
    )
}

// ---------------------------------------------------------------------------
// 11

fn gate_fixtures() -> Outcome {
    let dup = SummaryStats { n_a: 10, n_used: 10, n_claims_segmented: 10, chars: 900, dup_frac: 0.30, ..Default::default() };
    let v = validity_check(&dup, &ValidityConfig::default());
    let dup_ok = !v.strict_valid && v.relaxed_valid;

    let run = |valid: f64, chars: f64, claims: f64| RunAggregates {
        name: String::new(),
        prompt_ids: vec!["p0".into(), "p1".into()],
        n_prompts: 2,
        valid_frac: valid,
        strict_valid_frac: valid,
        mean_chars: chars,
        mean_claims: claims,
        mean_n_a: 0.0,
        mean_n_b: 0.0,
        ns_rate: NsRates::default(),
    };
    let gate = SelectionGate::default();
    let base = run(0.77, 1800.0, 17.5);
    let verdicts: Vec<bool> = [run(0.90, 2000.0, 18.9), run(0.70, 2000.0, 18.9), run(0.90, 1700.0, 18.9)]
        .iter()
        .map(|m| degeneration_gate(m, &base, &gate).expect("same prompts").pass)
        .collect();
    let gate_ok = verdicts == [true, false, false];
    outcome(
        dup_ok && gate_ok,
        format!("dup 0.30 strict={} relaxed={}; gate verdicts {verdicts:?} (want [true, false, false])", v.strict_valid, v.relaxed_valid),
    )
}

// ---------------------------------------------------------------------------
// 12

fn pipeline_bytes(seed: u64) -> (Vec<u8>, Vec<u8>) {
    let world: SyntheticWorld = claimpref::synth::gen_world(6, 12, seed).expect("world");
    let jsonl = world.notes_jsonl().expect("jsonl");
    let notes = ingest_notes(jsonl.as_bytes()).expect("ingest").into_strict().expect("clean");
    let units = segment_corpus(&notes, &SegmentConfig::default());
    let corpora = subject_corpora(&notes, &units).expect("corpora");
    let oracle = world.oracle(0.05, seed).expect("oracle");
    let generator = SynthGenerator { world, spec: CorruptionSpec::mining_demo() };
    let config = MiningConfig::default();
    let filters = ClaimFilterConfig::default().compile().expect("filters");
    let (pairs, summary) = mine_split(&corpora, &generator, &oracle, &filters, &config, Strategy::Full, seed).expect("mine");
    let mut pair_bytes = Vec::new();
    for p in &pairs {
        serde_json::to_writer(&mut pair_bytes, p).expect("pair");
        pair_bytes.push(b'\n');
    }
    let report = mining_diagnostics(&pairs).ok();
    let mut report_bytes = serde_json::to_vec_pretty(&(summary, report)).expect("report");
    if let Some(r) = report {
        report_bytes.extend(diagnostics_table(&[("full".into(), r)]).bytes());
    }
    (pair_bytes, report_bytes)
}

fn determinism() -> Outcome {
    let first = pipeline_bytes(12);
    let second = pipeline_bytes(12);
    let n_pairs = first.0.iter().filter(|b| **b == b'\n').count();
    outcome(
        first == second && n_pairs > 0,
        format!("{n_pairs} pairs, pair file {} bytes, report {} bytes, reruns {}", first.0.len(), first.1.len(), if first == second { "byte-identical" } else { "DIFFER" }),
    )
}
