//! Signal signatures (recognized bol strings with timing), the Sollukattu
//! signature dictionary, signature extension, Levenshtein-based Sollukattu
//! recognition and longest-common-substring computation.

use serde::{Deserialize, Serialize};

use crate::audio::{self, AudioSignal};
use crate::bol::BolClass;
use crate::error::{Error, Result};
use crate::features::{self, MfccParams};
use crate::gmm::GmmModel;
use crate::segment::NonSilentSlice;

/// Energy class of a slice, filled in by beat marking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnergyClass {
    High,
    Low,
}

/// One recognized slice: a bol class (or unrecognized), its time interval
/// and its raw slice energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BolEvent {
    /// `None` marks an unrecognized slice; it stays in the event list but is
    /// excluded from the matching string view.
    pub bol: Option<BolClass>,
    pub start: f64,
    pub end: f64,
    pub raw_energy: f64,
    pub energy_class: Option<EnergyClass>,
}

impl BolEvent {
    pub fn new(bol: Option<BolClass>, start: f64, end: f64, raw_energy: f64) -> BolEvent {
        BolEvent {
            bol,
            start,
            end,
            raw_energy,
            energy_class: None,
        }
    }
}

/// The ordered sequence of recognized bol events of one recording.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SignalSignature {
    pub events: Vec<BolEvent>,
}

impl SignalSignature {
    pub fn new(events: Vec<BolEvent>) -> SignalSignature {
        SignalSignature { events }
    }

    /// The matching string view: bol codes in event order, with unrecognized
    /// and stick-class entries dropped.
    pub fn string_view(&self) -> Vec<BolClass> {
        self.string_events().into_iter().map(|(_, b)| b).collect()
    }

    /// String view paired with the index of the originating event, so
    /// matched string positions can be mapped back to timestamps.
    pub fn string_events(&self) -> Vec<(usize, BolClass)> {
        self.events
            .iter()
            .enumerate()
            .filter_map(|(i, e)| match e.bol {
                Some(b) if !b.is_stick() => Some((i, b)),
                _ => None,
            })
            .collect()
    }
}

/// Classify every slice of a signal into a bol event stream. Slices too
/// short for feature analysis become unrecognized events; they stay in the
/// event list but never reach the matching string view.
pub fn build_signal_signature(
    sig: &AudioSignal,
    slices: &[NonSilentSlice],
    model: &GmmModel,
    mfcc: &MfccParams,
) -> SignalSignature {
    let events = slices
        .iter()
        .map(|slice| {
            let samples = slice.samples(sig);
            let energy = audio::frame_energy(samples);
            let bol = features::mfcc(samples, sig.sample_rate(), mfcc)
                .ok()
                .and_then(|seq| crate::gmm::classify(model, &seq).ok())
                .and_then(|(code, _)| BolClass::from_code(code as u32).ok());
            BolEvent::new(bol, slice.start, slice.end, energy)
        })
        .collect();
    SignalSignature::new(events)
}

/// Beat type of one pattern position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeatType {
    Full,
    Half,
    Quarter,
    Stick,
}

impl BeatType {
    pub fn tag(&self) -> &'static str {
        match self {
            BeatType::Full => "B",
            BeatType::Half => "HB",
            BeatType::Quarter => "QB",
            BeatType::Stick => "S",
        }
    }

    pub fn from_tag(tag: &str) -> Option<BeatType> {
        match tag {
            "B" => Some(BeatType::Full),
            "HB" => Some(BeatType::Half),
            "QB" => Some(BeatType::Quarter),
            "S" => Some(BeatType::Stick),
            _ => None,
        }
    }
}

/// A dictionary entry: the canonical pattern of one Sollukattu. Positions
/// carry a bol (or none, for stick-beats) and a beat type; the pure bol
/// string used for matching skips the stick positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SollukattuSignature {
    pub name: String,
    /// Beats per bar; 6 or 8.
    pub lambda: u32,
    /// Recurrence class (equals lambda).
    pub recurrence: u32,
    /// Bars-per-pattern multiplier.
    pub bars_per_pattern: u32,
    /// Full pattern including stick positions.
    pub pattern: Vec<(Option<BolClass>, BeatType)>,
}

impl SollukattuSignature {
    /// Ordered bol codes with stick positions excluded.
    pub fn bols(&self) -> Vec<BolClass> {
        self.pattern.iter().filter_map(|(b, _)| *b).collect()
    }

    /// Beat types over the full pattern, including stick positions.
    pub fn beat_types(&self) -> Vec<BeatType> {
        self.pattern.iter().map(|(_, t)| *t).collect()
    }

    /// Beat types parallel to `bols()` (stick positions excluded).
    pub fn bol_beat_types(&self) -> Vec<BeatType> {
        self.pattern
            .iter()
            .filter(|(b, _)| b.is_some())
            .map(|(_, t)| *t)
            .collect()
    }

    /// Number of bols in one bar of the pattern.
    pub fn bol_count(&self) -> usize {
        self.bols().len()
    }

    /// Count of 1-beat positions (full beats and sticks).
    pub fn one_beat_count(&self) -> usize {
        self.pattern
            .iter()
            .filter(|(_, t)| matches!(t, BeatType::Full | BeatType::Stick))
            .count()
    }
}

/// Extend a signature's bol string to exactly `target_len` symbols by
/// repetition and end truncation.
pub fn extend_signature(sig: &SollukattuSignature, target_len: usize) -> Vec<BolClass> {
    let bols = sig.bols();
    if bols.is_empty() {
        return Vec::new();
    }
    bols.iter().copied().cycle().take(target_len).collect()
}

/// Unit-cost Levenshtein distance between two symbol strings.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let n = b.len();
    let mut prev: Vec<usize> = (0..=n).collect();
    let mut cur = vec![0usize; n + 1];
    for (i, ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, bj) in b.iter().enumerate() {
            let cost = if ai == bj { 0 } else { 1 };
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[n]
}

/// The per-entry distance table of one recognition, best first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recognition {
    pub best: String,
    pub distance: usize,
    /// All entries achieving the minimum distance (ties reported; the best
    /// is the lexicographically first of these).
    pub ties: Vec<String>,
    /// Complete (name, distance) table sorted by distance then name.
    pub table: Vec<(String, usize)>,
}

/// Recognize the Sollukattu of a signal signature by extending every
/// dictionary entry to the signature length and taking the Levenshtein
/// argmin.
pub fn recognize_sollukattu(
    sig: &SignalSignature,
    dict: &[SollukattuSignature],
) -> Result<Recognition> {
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let gamma = sig.string_view();
    if gamma.is_empty() {
        return Err(Error::NoRecognizedBols);
    }
    let mut table: Vec<(String, usize)> = dict
        .iter()
        .map(|entry| {
            let extended = extend_signature(entry, gamma.len());
            (entry.name.clone(), levenshtein(&gamma, &extended))
        })
        .collect();
    table.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let distance = table[0].1;
    let ties: Vec<String> = table
        .iter()
        .take_while(|(_, d)| *d == distance)
        .map(|(n, _)| n.clone())
        .collect();
    Ok(Recognition {
        best: table[0].0.clone(),
        distance,
        ties,
        table,
    })
}

/// Length of the longest common substring of `a` and `b`, together with the
/// start positions (in `a` and `b`) of every maximal match.
pub fn longest_common_substring<T: PartialEq>(a: &[T], b: &[T]) -> (usize, Vec<(usize, usize)>) {
    if a.is_empty() || b.is_empty() {
        return (0, Vec::new());
    }
    // LCS_Suff over all prefix pairs; row-rolling DP.
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0usize;
    let mut ends: Vec<(usize, usize)> = Vec::new();
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            if ai == bj {
                let len = prev[j] + 1;
                cur[j + 1] = len;
                if len > best {
                    best = len;
                    ends.clear();
                    ends.push((i, j));
                } else if len == best && best > 0 {
                    ends.push((i, j));
                }
            } else {
                cur[j + 1] = 0;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        cur.iter_mut().for_each(|v| *v = 0);
    }
    if best == 0 {
        return (0, Vec::new());
    }
    let starts = ends
        .into_iter()
        .map(|(i, j)| (i + 1 - best, j + 1 - best))
        .collect();
    (best, starts)
}

/// Parse the plain-text dictionary format: one record per non-comment line,
/// `name | lambda | recurrence | p | [bol:TYPE ...] [..] ...` where a bare
/// `-` token is a stick-beat position.
pub fn parse_dictionary(text: &str) -> Result<Vec<SollukattuSignature>> {
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        entries.push(parse_entry(line, lineno + 1)?);
    }
    if entries.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    Ok(entries)
}

fn parse_entry(line: &str, lineno: usize) -> Result<SollukattuSignature> {
    let err = |message: String| Error::DictionaryParse {
        line: lineno,
        message,
    };
    let fields: Vec<&str> = line.split('|').map(str::trim).collect();
    if fields.len() != 5 {
        return Err(err(format!("expected 5 |-separated fields, got {}", fields.len())));
    }
    let name = fields[0].to_string();
    let lambda: u32 = fields[1]
        .parse()
        .map_err(|_| err(format!("bad lambda `{}`", fields[1])))?;
    if lambda != 6 && lambda != 8 {
        return Err(err(format!("lambda must be 6 or 8, got {lambda}")));
    }
    let recurrence: u32 = fields[2]
        .parse()
        .map_err(|_| err(format!("bad recurrence `{}`", fields[2])))?;
    let p: u32 = fields[3]
        .parse()
        .map_err(|_| err(format!("bad bars-per-pattern `{}`", fields[3])))?;

    let mut pattern = Vec::new();
    let mut groups = 0u32;
    let body = fields[4];
    let mut rest = body;
    while let Some(open) = rest.find('[') {
        let close = rest[open..]
            .find(']')
            .ok_or_else(|| err("unbalanced bracket".into()))?
            + open;
        groups += 1;
        for token in rest[open + 1..close].split_whitespace() {
            if token == "-" {
                pattern.push((None, BeatType::Stick));
                continue;
            }
            let (label, tag) = token
                .split_once(':')
                .ok_or_else(|| err(format!("token `{token}` is not bol:TYPE")))?;
            let bol = BolClass::from_label(label)
                .map_err(|_| err(format!("unknown bol `{label}`")))?;
            let beat = BeatType::from_tag(tag)
                .ok_or_else(|| err(format!("unknown beat type `{tag}`")))?;
            pattern.push((Some(bol), beat));
        }
        rest = &rest[close + 1..];
    }
    if pattern.is_empty() {
        return Err(err("empty pattern".into()));
    }
    if groups != lambda * p {
        return Err(err(format!(
            "pattern has {groups} beat groups but lambda*p = {}",
            lambda * p
        )));
    }
    Ok(SollukattuSignature {
        name,
        lambda,
        recurrence,
        bars_per_pattern: p,
        pattern,
    })
}

/// Render an entry back to the dictionary text format (one bracket group per
/// 1-beat slot).
pub fn format_entry(sig: &SollukattuSignature) -> String {
    let mut groups: Vec<Vec<String>> = Vec::new();
    for (bol, beat) in &sig.pattern {
        let token = match bol {
            None => "-".to_string(),
            Some(b) => format!("{}:{}", b.label(), beat.tag()),
        };
        if matches!(beat, BeatType::Full | BeatType::Stick) || groups.is_empty() {
            groups.push(vec![token]);
        } else {
            groups.last_mut().unwrap().push(token);
        }
    }
    let body = groups
        .into_iter()
        .map(|g| format!("[{}]", g.join(" ")))
        .collect::<Vec<_>>()
        .join(" ");
    format!(
        "{} | {} | {} | {} | {}",
        sig.name, sig.lambda, sig.recurrence, sig.bars_per_pattern, body
    )
}

const BUILTIN_DICTIONARY: &str = include_str!("../data/sollukattu.dict");

/// The dictionary shipped with the crate.
pub fn builtin_dictionary() -> Vec<SollukattuSignature> {
    parse_dictionary(BUILTIN_DICTIONARY).expect("builtin dictionary parses")
}

/// Raw text of the shipped dictionary, for the CLI to install or display.
pub fn builtin_dictionary_text() -> &'static str {
    BUILTIN_DICTIONARY
}
