#![allow(dead_code)]

use claimpref::corpus::{segment_corpus, Note, SegmentConfig};
use claimpref::retrieval::{subject_corpora, SubjectCorpus};
use claimpref::synth::{gen_world, SyntheticWorld};

/// A synthetic world segmented and indexed per subject.
pub fn indexed_world(n_subjects: usize, notes_per_subject: usize, seed: u64) -> (SyntheticWorld, Vec<SubjectCorpus>) {
    let world = gen_world(n_subjects, notes_per_subject, seed).expect("world");
    let notes: Vec<Note> = world.notes().cloned().collect();
    let units = segment_corpus(&notes, &SegmentConfig::default());
    let corpora = subject_corpora(&notes, &units).expect("corpora");
    (world, corpora)
}
