#![allow(dead_code)]

//! Shared helpers for the integration and acceptance suites: synthetic
//! corpus preparation with ground-truth slice labels.

use std::collections::BTreeMap;

use sollu_core::beatmark::{DetectedBeats, MarkedBeat, MarkedBol};
use sollu_core::error::Result;
use sollu_core::features::FeatureSequence;
use sollu_core::gmm::GmmModel;
use sollu_core::pipeline::PipelineConfig;
use sollu_core::segment::{self, NonSilentSlice};
use sollu_core::signatures::{BolEvent, SignalSignature, SollukattuSignature};
use sollu_core::synth::{synthesize, SynthParams, SynthSpec};
use sollu_core::tempo::TempoEstimate;
use sollu_core::{frame_energy, BolClass};

/// One rendered recording, segmented and feature-extracted, with the audio
/// itself dropped to keep corpus memory flat.
pub struct PreparedFile {
    pub pattern: String,
    pub tempo: f64,
    pub annotation: Vec<MarkedBeat>,
    pub detected_beats: DetectedBeats,
    pub slices: Vec<NonSilentSlice>,
    pub energies: Vec<f64>,
    pub features: Vec<Option<FeatureSequence>>,
    /// Ground-truth class per slice from annotation overlap; None for
    /// slices without an annotated event (the hum anchors).
    pub labels: Vec<Option<u8>>,
    pub comb: Result<TempoEstimate>,
}

pub fn prepare_file(
    pattern: &SollukattuSignature,
    tempo: f64,
    bars: u32,
    jitter: f64,
    seed: u64,
    config: &PipelineConfig,
) -> PreparedFile {
    let out = synthesize(
        &SynthSpec {
            pattern: pattern.clone(),
            tempo,
            bars,
            jitter,
            params: SynthParams::default(),
        },
        seed,
    )
    .expect("synthesis succeeds");
    let sig = &out.signal;
    let slices = segment::segment_with(sig, &config.segment).expect("segmentation succeeds");

    let energies: Vec<f64> = slices.iter().map(|s| frame_energy(s.samples(sig))).collect();
    let features: Vec<Option<FeatureSequence>> = slices
        .iter()
        .map(|s| sollu_core::mfcc(s.samples(sig), sig.sample_rate(), &config.mfcc).ok())
        .collect();
    let labels: Vec<Option<u8>> = slices
        .iter()
        .map(|s| {
            out.annotation
                .iter()
                .find(|row| s.start < row.end && row.start < s.end)
                .map(|row| match row.bol {
                    MarkedBol::Bol(b) => b.code(),
                    MarkedBol::None | MarkedBol::Undefined => BolClass::STICK.code(),
                })
        })
        .collect();
    let comb = sollu_core::tempo::comb_tempo_with(sig, &config.tempo);

    PreparedFile {
        pattern: pattern.name.clone(),
        tempo,
        annotation: out.annotation,
        detected_beats: out.detected_beats,
        slices,
        energies,
        features,
        labels,
        comb,
    }
}

/// Pool labeled slices across files and split 80/20 (per class, by order).
pub fn split_corpus<'a>(
    files: &'a [PreparedFile],
) -> (
    BTreeMap<u8, Vec<Vec<f64>>>,
    Vec<(u8, &'a FeatureSequence)>,
) {
    let mut per_class: BTreeMap<u8, Vec<&FeatureSequence>> = BTreeMap::new();
    for file in files {
        for (label, features) in file.labels.iter().zip(&file.features) {
            if let (Some(code), Some(seq)) = (label, features) {
                per_class.entry(*code).or_default().push(seq);
            }
        }
    }
    let mut train: BTreeMap<u8, Vec<Vec<f64>>> = BTreeMap::new();
    let mut test: Vec<(u8, &FeatureSequence)> = Vec::new();
    for (code, seqs) in per_class {
        let cut = (seqs.len() * 8).div_ceil(10);
        for (i, seq) in seqs.into_iter().enumerate() {
            if i < cut {
                train
                    .entry(code)
                    .or_default()
                    .extend(seq.vectors.iter().map(|v| v.0.clone()));
            } else {
                test.push((code, seq));
            }
        }
    }
    // Balance the classes: grossly uneven training sizes make the large
    // classes systematically sharper densities and bias the argmax.
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(9);
    for vectors in train.values_mut() {
        if vectors.len() > 800 {
            vectors.shuffle(&mut rng);
            vectors.truncate(800);
        }
    }
    (train, test)
}

/// Classify a prepared file's slices into a signal signature.
pub fn classify_file(file: &PreparedFile, model: &GmmModel) -> SignalSignature {
    let events = file
        .slices
        .iter()
        .zip(&file.features)
        .zip(&file.energies)
        .map(|((slice, features), &energy)| {
            let bol = features
                .as_ref()
                .and_then(|seq| sollu_core::classify(model, seq).ok())
                .and_then(|(code, _)| BolClass::from_code(code as u32).ok());
            BolEvent::new(bol, slice.start, slice.end, energy)
        })
        .collect();
    SignalSignature::new(events)
}
