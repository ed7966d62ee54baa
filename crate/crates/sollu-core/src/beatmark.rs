//! Beat marking: fuse detected 1-beats, the energy-classed signal signature
//! and the tempo period into a time-stamped annotation, plus the evaluation
//! metrics against ground-truth annotations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bol::BolClass;
use crate::error::{Error, Result};
use crate::signatures::{BolEvent, EnergyClass};

/// Lower widening of the beat-to-beat gap window: wide(T) = [T-0.25, T+0.4].
pub const WIDE_LOW: f64 = 0.25;
/// Upper widening of the beat-to-beat gap window.
pub const WIDE_HIGH: f64 = 0.4;
/// A gap beyond long_gap(T) = 2T - 0.25 means a beat was missed.
pub const LONG_GAP_OFFSET: f64 = 0.25;
/// Duration assigned to a synthesized (forced) stick-beat.
pub const FORCED_STICK_LEN: f64 = 0.5;

/// Beat kind of a marked event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeatEvent {
    /// 1-beat with bol.
    FullBeat,
    /// 1/2-beat with bol.
    HalfBeat,
    /// 1-beat with beating only (no bol).
    StickBeat,
    /// Undefined: the event fit no structural rule.
    Undefined,
}

impl BeatEvent {
    pub fn tag(&self) -> &'static str {
        match self {
            BeatEvent::FullBeat => "B",
            BeatEvent::HalfBeat => "HB",
            BeatEvent::StickBeat => "STICK",
            BeatEvent::Undefined => "UNDEF",
        }
    }

    pub fn from_tag(tag: &str) -> Option<BeatEvent> {
        match tag {
            "B" => Some(BeatEvent::FullBeat),
            "HB" => Some(BeatEvent::HalfBeat),
            "STICK" => Some(BeatEvent::StickBeat),
            "UNDEF" => Some(BeatEvent::Undefined),
            _ => None,
        }
    }
}

/// Bol attached to a marked beat: a class, no bol, or undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkedBol {
    Bol(BolClass),
    None,
    Undefined,
}

impl MarkedBol {
    fn from_event(bol: Option<BolClass>) -> MarkedBol {
        match bol {
            Some(b) => MarkedBol::Bol(b),
            None => MarkedBol::Undefined,
        }
    }

    /// Bol equality for evaluation; a recognized stick class and "no bol"
    /// both mean the beat carries no utterance.
    pub fn matches(&self, other: &MarkedBol) -> bool {
        let norm = |b: &MarkedBol| match b {
            MarkedBol::Bol(c) if c.is_stick() => MarkedBol::None,
            other => *other,
        };
        norm(self) == norm(other)
    }

    pub fn label(&self) -> &'static str {
        match self {
            MarkedBol::Bol(b) => b.label(),
            MarkedBol::None => "-",
            MarkedBol::Undefined => "?",
        }
    }

    pub fn code(&self) -> i32 {
        match self {
            MarkedBol::Bol(b) => b.code() as i32,
            MarkedBol::None => 0,
            MarkedBol::Undefined => -1,
        }
    }
}

/// One output row of the beat marking: bol, interval and beat info.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedBeat {
    pub bol: MarkedBol,
    pub start: f64,
    pub end: f64,
    pub event: BeatEvent,
}

/// Time-stamps of externally detected 1-beats, strictly increasing.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DetectedBeats(Vec<f64>);

impl DetectedBeats {
    pub fn new(timestamps: Vec<f64>) -> Result<DetectedBeats> {
        for (i, pair) in timestamps.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::UnorderedBeats(i + 1));
            }
        }
        Ok(DetectedBeats(timestamps))
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.0
    }

    /// Parse a timestamps file: one value in seconds per line, `#` comments.
    pub fn load(path: impl AsRef<Path>) -> Result<DetectedBeats> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut ts = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::AnnotationParse {
                line: lineno + 1,
                message: format!("bad timestamp `{line}`"),
            })?;
            ts.push(v);
        }
        DetectedBeats::new(ts)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body: String = self
            .0
            .iter()
            .map(|t| format!("{t}\n"))
            .collect();
        std::fs::write(path, body).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Fill the energy class of every event by 1-D k-means (k = 2) over the raw
/// slice energies; the cluster with the larger centroid is High. With all
/// energies equal the split is degenerate and everything is High.
pub fn energy_classes(events: &mut [BolEvent]) {
    if events.is_empty() {
        return;
    }
    let energies: Vec<f64> = events.iter().map(|e| e.raw_energy).collect();
    let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        for e in events.iter_mut() {
            e.energy_class = Some(EnergyClass::High);
        }
        return;
    }

    // Deterministic init: centroids at the extremes.
    let mut lo = min;
    let mut hi = max;
    let mut assign = vec![false; energies.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, &e) in energies.iter().enumerate() {
            let to_hi = (e - hi).abs() < (e - lo).abs();
            if assign[i] != to_hi {
                assign[i] = to_hi;
                changed = true;
            }
        }
        let (mut s_lo, mut n_lo, mut s_hi, mut n_hi) = (0.0, 0usize, 0.0, 0usize);
        for (i, &e) in energies.iter().enumerate() {
            if assign[i] {
                s_hi += e;
                n_hi += 1;
            } else {
                s_lo += e;
                n_lo += 1;
            }
        }
        if n_lo > 0 {
            lo = s_lo / n_lo as f64;
        }
        if n_hi > 0 {
            hi = s_hi / n_hi as f64;
        }
        if !changed {
            break;
        }
    }
    for (e, &is_hi) in events.iter_mut().zip(&assign) {
        e.energy_class = Some(if is_hi { EnergyClass::High } else { EnergyClass::Low });
    }
}

/// Per-event overlap flags: OB(q) is true iff some detected beat falls
/// inside [start, end] of event q. Two-pointer merge over both sorted
/// sequences.
pub fn overlap_beats(db: &DetectedBeats, events: &[BolEvent]) -> Vec<bool> {
    let beats = db.timestamps();
    let mut ob = vec![false; events.len()];
    let mut p = 0usize;
    for (q, ev) in events.iter().enumerate() {
        while p < beats.len() && beats[p] < ev.start {
            p += 1;
        }
        if p < beats.len() && beats[p] <= ev.end {
            ob[q] = true;
        }
    }
    ob
}

/// Offsets of the structural windows used by beat marking.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarkParams {
    pub wide_low: f64,
    pub wide_high: f64,
    pub long_gap_offset: f64,
    pub forced_stick_len: f64,
}

impl Default for MarkParams {
    fn default() -> Self {
        MarkParams {
            wide_low: WIDE_LOW,
            wide_high: WIDE_HIGH,
            long_gap_offset: LONG_GAP_OFFSET,
            forced_stick_len: FORCED_STICK_LEN,
        }
    }
}

/// Mark the beats of an energy-classed signal signature against the tempo
/// period. The first event is the downbeat; later events are classified by
/// their start-time gap from the last marked 1-beat:
/// in [T-0.25, T+0.4] as a 1-beat (high energy), a stick-beat (low energy
/// overlapping a detected beat) or undefined; below T-0.25 as a 1/2-beat;
/// above 2T-0.25 a missed stick-beat is synthesized on the tempo grid. Gaps
/// between T+0.4 and 2T-0.25 mark the event undefined.
pub fn mark_beats(db: &DetectedBeats, events: &[BolEvent], period: f64) -> Result<Vec<MarkedBeat>> {
    mark_beats_with(db, events, period, &MarkParams::default())
}

pub fn mark_beats_with(
    db: &DetectedBeats,
    events: &[BolEvent],
    period: f64,
    params: &MarkParams,
) -> Result<Vec<MarkedBeat>> {
    if events.is_empty() {
        return Err(Error::EmptySignature);
    }
    if period <= params.wide_low + params.wide_high {
        return Err(Error::TempoTooSmall(period));
    }
    let ob = overlap_beats(db, events);
    let wide_lo = period - params.wide_low;
    let wide_hi = period + params.wide_high;
    let long_gap = 2.0 * period - params.long_gap_offset;

    let mut marked = Vec::with_capacity(events.len());
    marked.push(MarkedBeat {
        bol: MarkedBol::from_event(events[0].bol),
        start: events[0].start,
        end: events[0].end,
        event: BeatEvent::FullBeat,
    });
    let mut last_beat = events[0].start;

    let mut i = 1usize;
    while i < events.len() {
        let ev = &events[i];
        let gap = ev.start - last_beat;
        if gap >= wide_lo && gap <= wide_hi {
            let (bol, kind) = match ev.energy_class {
                Some(EnergyClass::High) => (MarkedBol::from_event(ev.bol), BeatEvent::FullBeat),
                Some(EnergyClass::Low) if ob[i] => (MarkedBol::None, BeatEvent::StickBeat),
                _ => (MarkedBol::from_event(ev.bol), BeatEvent::Undefined),
            };
            marked.push(MarkedBeat {
                bol,
                start: ev.start,
                end: ev.end,
                event: kind,
            });
            last_beat = ev.start;
            i += 1;
        } else if gap < wide_lo {
            // 1/2-beat; the 1-beat reference does not move.
            marked.push(MarkedBeat {
                bol: MarkedBol::from_event(ev.bol),
                start: ev.start,
                end: ev.end,
                event: BeatEvent::HalfBeat,
            });
            i += 1;
        } else if gap > long_gap {
            // A beat was missed in the long gap: force a stick-beat on the
            // tempo grid without consuming the event.
            marked.push(MarkedBeat {
                bol: MarkedBol::None,
                start: last_beat + period,
                end: last_beat + period + params.forced_stick_len,
                event: BeatEvent::StickBeat,
            });
            last_beat += period;
        } else {
            // Gap between wide(T) and long_gap(T): no structural rule fits.
            marked.push(MarkedBeat {
                bol: MarkedBol::from_event(ev.bol),
                start: ev.start,
                end: ev.end,
                event: BeatEvent::Undefined,
            });
            last_beat = ev.start;
            i += 1;
        }
    }
    Ok(marked)
}

/// Percentage matches of a marking against a ground-truth annotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScores {
    pub time_pct: f64,
    pub bol_pct: f64,
    pub event_pct: f64,
}

/// Compare marked beats against annotation rows: a marked beat matches an
/// annotation row when their intervals overlap; bol and event matches are
/// conditioned on the time match. Every annotation row is matched at most
/// once, greedily in time order.
pub fn evaluate(marked: &[MarkedBeat], annotation: &[MarkedBeat]) -> MatchScores {
    if annotation.is_empty() {
        return MatchScores {
            time_pct: 0.0,
            bol_pct: 0.0,
            event_pct: 0.0,
        };
    }
    let mut ann: Vec<&MarkedBeat> = annotation.iter().collect();
    ann.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
    let mut mb: Vec<&MarkedBeat> = marked.iter().collect();
    mb.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());

    let mut used = vec![false; mb.len()];
    let (mut time, mut bol, mut event) = (0usize, 0usize, 0usize);
    for a in &ann {
        let hit = mb
            .iter()
            .enumerate()
            .find(|(i, b)| !used[*i] && b.start <= a.end && a.start <= b.end);
        if let Some((i, b)) = hit {
            used[i] = true;
            time += 1;
            if b.bol.matches(&a.bol) {
                bol += 1;
            }
            if b.event == a.event {
                event += 1;
            }
        }
    }
    let n = annotation.len() as f64;
    MatchScores {
        time_pct: time as f64 / n * 100.0,
        bol_pct: bol as f64 / n * 100.0,
        event_pct: event as f64 / n * 100.0,
    }
}

/// Write annotation rows: `event_id, bol_label, bol_code, tau_s, tau_e,
/// beat_type` with times to three decimals.
pub fn write_annotation_csv(rows: &[MarkedBeat]) -> String {
    let mut out = String::from("event_id,bol_label,bol_code,tau_s,tau_e,beat_type\n");
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{:.3},{:.3},{}\n",
            i + 1,
            r.bol.label(),
            r.bol.code(),
            r.start,
            r.end,
            r.event.tag()
        ));
    }
    out
}

/// Parse the annotation CSV format written by `write_annotation_csv`.
pub fn parse_annotation_csv(text: &str) -> Result<Vec<MarkedBeat>> {
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || lineno == 0 && line.starts_with("event_id") {
            continue;
        }
        let err = |message: String| Error::AnnotationParse {
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 columns, got {}", fields.len())));
        }
        let code: i32 = fields[2]
            .parse()
            .map_err(|_| err(format!("bad bol code `{}`", fields[2])))?;
        let bol = match code {
            0 => MarkedBol::None,
            -1 => MarkedBol::Undefined,
            c if c > 0 => MarkedBol::Bol(
                BolClass::from_code(c as u32).map_err(|e| err(e.to_string()))?,
            ),
            _ => return Err(err(format!("bad bol code `{code}`"))),
        };
        let start: f64 = fields[3]
            .parse()
            .map_err(|_| err(format!("bad start `{}`", fields[3])))?;
        let end: f64 = fields[4]
            .parse()
            .map_err(|_| err(format!("bad end `{}`", fields[4])))?;
        let event = BeatEvent::from_tag(fields[5])
            .ok_or_else(|| err(format!("bad beat type `{}`", fields[5])))?;
        rows.push(MarkedBeat {
            bol,
            start,
            end,
            event,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(bol: Option<&str>, start: f64, end: f64, energy: f64) -> BolEvent {
        BolEvent::new(
            bol.map(|l| BolClass::from_label(l).unwrap()),
            start,
            end,
            energy,
        )
    }

    fn classed(mut events: Vec<BolEvent>) -> Vec<BolEvent> {
        energy_classes(&mut events);
        events
    }

    /// Exhaustive-threshold oracle for 1-D 2-means: the optimal split of a
    /// sorted sequence is between two consecutive points.
    fn two_means_oracle(values: &[f64]) -> Vec<bool> {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cost = |vals: &[f64]| -> f64 {
            if vals.is_empty() {
                return 0.0;
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - mean) * (v - mean)).sum()
        };
        let mut best_cut = 1;
        let mut best_cost = f64::INFINITY;
        for cut in 1..sorted.len() {
            let c = cost(&sorted[..cut]) + cost(&sorted[cut..]);
            if c < best_cost {
                best_cost = c;
                best_cut = cut;
            }
        }
        let threshold = sorted[best_cut - 1];
        values.iter().map(|&v| v > threshold).collect()
    }

    #[test]
    fn energy_classes_match_exhaustive_oracle() {
        let energies = [1.0, 1.1, 0.1, 0.12];
        let mut events: Vec<BolEvent> = energies
            .iter()
            .enumerate()
            .map(|(i, &e)| ev(Some("tei"), i as f64, i as f64 + 0.3, e))
            .collect();
        energy_classes(&mut events);
        let oracle = two_means_oracle(&energies);
        for (e, is_hi) in events.iter().zip(oracle) {
            let got = e.energy_class == Some(EnergyClass::High);
            assert_eq!(got, is_hi, "energy {}", e.raw_energy);
        }
        assert_eq!(events[0].energy_class, Some(EnergyClass::High));
        assert_eq!(events[1].energy_class, Some(EnergyClass::High));
        assert_eq!(events[2].energy_class, Some(EnergyClass::Low));
        assert_eq!(events[3].energy_class, Some(EnergyClass::Low));
    }

    #[test]
    fn two_events_split_into_their_own_clusters() {
        let mut events = vec![ev(Some("tei"), 0.0, 0.3, 0.9), ev(Some("ya"), 1.0, 1.3, 0.2)];
        energy_classes(&mut events);
        assert_eq!(events[0].energy_class, Some(EnergyClass::High));
        assert_eq!(events[1].energy_class, Some(EnergyClass::Low));
    }

    #[test]
    fn identical_energies_are_all_high() {
        let mut events: Vec<BolEvent> = (0..4)
            .map(|i| ev(Some("tei"), i as f64, i as f64 + 0.2, 0.5))
            .collect();
        energy_classes(&mut events);
        assert!(events
            .iter()
            .all(|e| e.energy_class == Some(EnergyClass::High)));
    }

    #[test]
    fn random_energy_sets_match_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(6);
        for _ in 0..50 {
            let n = rng.gen_range(2..20);
            // Bimodal-ish draws so the optimum is unambiguous.
            let energies: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        rng.gen_range(0.05..0.15)
                    } else {
                        rng.gen_range(0.7..1.0)
                    }
                })
                .collect();
            if energies.iter().all(|&e| e < 0.2) || energies.iter().all(|&e| e > 0.5) {
                continue;
            }
            let mut events: Vec<BolEvent> = energies
                .iter()
                .enumerate()
                .map(|(i, &e)| ev(Some("ta"), i as f64, i as f64 + 0.2, e))
                .collect();
            energy_classes(&mut events);
            let oracle = two_means_oracle(&energies);
            for (e, is_hi) in events.iter().zip(oracle) {
                assert_eq!(
                    e.energy_class == Some(EnergyClass::High),
                    is_hi,
                    "energies {energies:?}"
                );
            }
        }
    }

    #[test]
    fn beat_inside_event_interval_overlaps() {
        let db = DetectedBeats::new(vec![1.1]).unwrap();
        let events = vec![ev(Some("ta"), 1.0, 1.3, 1.0)];
        assert_eq!(overlap_beats(&db, &events), vec![true]);
    }

    #[test]
    fn empty_detected_beats_overlap_nothing() {
        let db = DetectedBeats::default();
        let events = vec![ev(Some("ta"), 1.0, 1.3, 1.0), ev(Some("ta"), 2.0, 2.2, 1.0)];
        assert_eq!(overlap_beats(&db, &events), vec![false, false]);
    }

    #[test]
    fn overlap_two_pointer_matches_quadratic_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(8);
        for _ in 0..100 {
            let n_beats = rng.gen_range(0..50);
            let mut beats: Vec<f64> = (0..n_beats).map(|_| rng.gen_range(0.0..30.0)).collect();
            beats.sort_by(|a, b| a.partial_cmp(b).unwrap());
            beats.dedup();
            let db = DetectedBeats::new(beats.clone()).unwrap();

            let n_events = rng.gen_range(1..50);
            let mut starts: Vec<f64> = (0..n_events).map(|_| rng.gen_range(0.0..30.0)).collect();
            starts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut events = Vec::new();
            for (i, &s) in starts.iter().enumerate() {
                let max_end = if i + 1 < starts.len() {
                    (starts[i + 1] - 1e-4).max(s + 1e-5)
                } else {
                    s + 0.5
                };
                let end = s + (max_end - s).min(rng.gen_range(0.01..0.5));
                events.push(ev(Some("ta"), s, end.max(s + 1e-6), 1.0));
            }

            let got = overlap_beats(&db, &events);
            let want: Vec<bool> = events
                .iter()
                .map(|e| beats.iter().any(|&b| b >= e.start && b <= e.end))
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn empty_signature_cannot_be_marked() {
        let db = DetectedBeats::default();
        assert!(matches!(
            mark_beats(&db, &[], 1.2),
            Err(Error::EmptySignature)
        ));
    }

    #[test]
    fn long_gap_of_twice_the_period_forces_one_stick() {
        // Gap of exactly 2T with T = 1.2: 2T > 2T - 0.25 triggers the
        // long-gap branch once, then the event lands inside wide(T).
        let t = 1.2;
        let events = classed(vec![
            ev(Some("ta"), 0.0, 0.4, 1.0),
            ev(Some("ta"), 2.0 * t, 2.0 * t + 0.4, 1.0),
        ]);
        let db = DetectedBeats::new(vec![0.1]).unwrap();
        let marked = mark_beats(&db, &events, t).unwrap();
        assert_eq!(marked.len(), 3);
        assert_eq!(marked[1].event, BeatEvent::StickBeat);
        assert_eq!(marked[1].bol, MarkedBol::None);
        assert!((marked[1].start - t).abs() < 1e-9);
        assert!((marked[1].end - (t + FORCED_STICK_LEN)).abs() < 1e-9);
        assert_eq!(marked[2].event, BeatEvent::FullBeat);
    }

    #[test]
    fn wide_window_boundaries_are_closed() {
        let t = 1.25;
        // Gap exactly T - 0.25.
        let events = classed(vec![
            ev(Some("ta"), 0.0, 0.3, 1.0),
            ev(Some("tei"), t - 0.25, t - 0.25 + 0.3, 1.0),
        ]);
        let marked = mark_beats(&DetectedBeats::default(), &events, t).unwrap();
        assert_eq!(marked[1].event, BeatEvent::FullBeat);

        // Gap exactly T + 0.4.
        let events = classed(vec![
            ev(Some("ta"), 0.0, 0.3, 1.0),
            ev(Some("tei"), t + 0.4, t + 0.4 + 0.3, 1.0),
        ]);
        let marked = mark_beats(&DetectedBeats::default(), &events, t).unwrap();
        assert_eq!(marked[1].event, BeatEvent::FullBeat);
    }

    #[test]
    fn long_gap_boundary_is_strict() {
        let t = 1.25;
        // Gap exactly 2T - 0.25 does not trigger the forced stick; it falls
        // in the structural dead zone and is marked undefined.
        let events = classed(vec![
            ev(Some("ta"), 0.0, 0.3, 1.0),
            ev(Some("tei"), 2.0 * t - 0.25, 2.0 * t, 1.0),
        ]);
        let marked = mark_beats(&DetectedBeats::default(), &events, t).unwrap();
        assert_eq!(marked.len(), 2);
        assert_eq!(marked[1].event, BeatEvent::Undefined);

        // A hair beyond the boundary forces the stick.
        let gap = 2.0 * t - 0.25 + 1e-6;
        let events = classed(vec![
            ev(Some("ta"), 0.0, 0.3, 1.0),
            ev(Some("tei"), gap, gap + 0.3, 1.0),
        ]);
        let marked = mark_beats(&DetectedBeats::default(), &events, t).unwrap();
        assert_eq!(marked.len(), 3);
        assert_eq!(marked[1].event, BeatEvent::StickBeat);
        assert_eq!(marked[2].event, BeatEvent::FullBeat);
    }

    #[test]
    fn half_beats_do_not_advance_the_reference() {
        let t = 1.5;
        let events = classed(vec![
            ev(Some("tei"), 1.0, 1.3, 1.0),
            ev(Some("ya"), 1.0 + 0.5 * t, 1.0 + 0.5 * t + 0.3, 1.0),
            ev(Some("tei"), 1.0 + t, 1.0 + t + 0.3, 1.0),
        ]);
        let marked = mark_beats(&DetectedBeats::default(), &events, t).unwrap();
        assert_eq!(marked[0].event, BeatEvent::FullBeat);
        assert_eq!(marked[1].event, BeatEvent::HalfBeat);
        assert_eq!(marked[2].event, BeatEvent::FullBeat);
    }

    #[test]
    fn low_energy_event_overlapping_a_beat_is_a_stick() {
        let t = 1.2;
        let mut events = vec![
            ev(Some("ta"), 0.0, 0.3, 1.0),
            ev(Some("tat"), t, t + 0.2, 0.05),
            ev(Some("ta"), 2.0 * t, 2.0 * t + 0.3, 1.0),
        ];
        energy_classes(&mut events);
        let db = DetectedBeats::new(vec![t + 0.05]).unwrap();
        let marked = mark_beats(&db, &events, t).unwrap();
        assert_eq!(marked[1].event, BeatEvent::StickBeat);
        assert_eq!(marked[1].bol, MarkedBol::None);
        // Without an overlapping beat the same event is undefined.
        let marked = mark_beats(&DetectedBeats::default(), &events, t).unwrap();
        assert_eq!(marked[1].event, BeatEvent::Undefined);
    }

    #[test]
    fn output_is_ordered_and_full_beats_respect_min_spacing() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(12);
        for _ in 0..30 {
            let t = rng.gen_range(0.9..1.6);
            let mut events = Vec::new();
            let mut clock = rng.gen_range(0.2..1.0);
            for _ in 0..rng.gen_range(2..25) {
                let dur = rng.gen_range(0.1..0.3);
                events.push(ev(Some("ta"), clock, clock + dur, rng.gen_range(0.1..1.0)));
                clock += rng.gen_range(0.3..2.4);
            }
            energy_classes(&mut events);
            let marked = mark_beats(&DetectedBeats::default(), &events, t).unwrap();
            for pair in marked.windows(2) {
                assert!(pair[0].start <= pair[1].start + 1e-9);
            }
            let fulls: Vec<f64> = marked
                .iter()
                .filter(|m| m.event == BeatEvent::FullBeat)
                .map(|m| m.start)
                .collect();
            for pair in fulls.windows(2) {
                assert!(
                    pair[1] - pair[0] >= t - WIDE_LOW - 1e-9,
                    "1-beats too close: {pair:?} at T={t}"
                );
            }
        }
    }

    #[test]
    fn forced_sticks_only_appear_in_long_gaps() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(13);
        for _ in 0..30 {
            let t = rng.gen_range(0.9..1.6);
            let mut events = Vec::new();
            let mut clock = 0.5;
            for _ in 0..rng.gen_range(2..20) {
                events.push(ev(Some("tei"), clock, clock + 0.2, 1.0));
                clock += rng.gen_range(0.4..3.0);
            }
            energy_classes(&mut events);
            let marked = mark_beats(&DetectedBeats::default(), &events, t).unwrap();
            for m in marked.iter().filter(|m| m.bol == MarkedBol::None) {
                // A forced stick lies strictly between two consecutive
                // events, and the event that triggered it is still more
                // than T - 0.25 away (it re-enters the wide window after
                // the grid advances).
                let inside = events.windows(2).any(|w| {
                    m.start > w[0].start
                        && m.start < w[1].start
                        && w[1].start - m.start > t - WIDE_LOW - 1e-9
                });
                assert!(inside, "forced stick at {} not inside a long gap", m.start);
            }
        }
    }

    #[test]
    fn evaluate_identical_rows_scores_100() {
        let rows = vec![
            MarkedBeat {
                bol: MarkedBol::Bol(BolClass::from_label("tei").unwrap()),
                start: 1.0,
                end: 1.4,
                event: BeatEvent::FullBeat,
            },
            MarkedBeat {
                bol: MarkedBol::None,
                start: 2.2,
                end: 2.5,
                event: BeatEvent::StickBeat,
            },
        ];
        let scores = evaluate(&rows, &rows);
        assert_eq!(scores.time_pct, 100.0);
        assert_eq!(scores.bol_pct, 100.0);
        assert_eq!(scores.event_pct, 100.0);
    }

    #[test]
    fn evaluate_shifted_rows_scores_zero() {
        let rows = vec![MarkedBeat {
            bol: MarkedBol::Bol(BolClass::from_label("tei").unwrap()),
            start: 1.0,
            end: 1.4,
            event: BeatEvent::FullBeat,
        }];
        let shifted: Vec<MarkedBeat> = rows
            .iter()
            .map(|r| MarkedBeat {
                start: r.start + 10.0,
                end: r.end + 10.0,
                ..r.clone()
            })
            .collect();
        let scores = evaluate(&shifted, &rows);
        assert_eq!(scores.time_pct, 0.0);
        assert_eq!(scores.bol_pct, 0.0);
        assert_eq!(scores.event_pct, 0.0);
    }

    #[test]
    fn evaluate_is_invariant_under_row_permutation() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(21);
        let mk = |start: f64, label: &str, event: BeatEvent| MarkedBeat {
            bol: MarkedBol::Bol(BolClass::from_label(label).unwrap()),
            start,
            end: start + 0.3,
            event,
        };
        let ann = vec![
            mk(1.0, "tei", BeatEvent::FullBeat),
            mk(2.0, "ya", BeatEvent::HalfBeat),
            mk(3.0, "tei", BeatEvent::FullBeat),
            mk(4.1, "ta", BeatEvent::FullBeat),
        ];
        let marked = vec![
            mk(0.9, "tei", BeatEvent::FullBeat),
            mk(2.1, "ya", BeatEvent::FullBeat),
            mk(3.05, "tat", BeatEvent::FullBeat),
        ];
        let base = evaluate(&marked, &ann);
        for _ in 0..10 {
            let mut m = marked.clone();
            let mut a = ann.clone();
            m.shuffle(&mut rng);
            a.shuffle(&mut rng);
            assert_eq!(evaluate(&m, &a), base);
        }
    }

    #[test]
    fn evaluate_ratio_matches_hand_count() {
        // 32 annotated beats of which 23 are fully matched: 71.875%.
        let mk = |start: f64, label: &str, event: BeatEvent| MarkedBeat {
            bol: MarkedBol::Bol(BolClass::from_label(label).unwrap()),
            start,
            end: start + 0.4,
            event,
        };
        let ann: Vec<MarkedBeat> = (0..32)
            .map(|i| mk(i as f64, "tei", BeatEvent::FullBeat))
            .collect();
        // 23 matching rows; 3 time-overlapping rows disagreeing in bol and
        // event; the remaining 6 annotation rows unmatched.
        let mut marked: Vec<MarkedBeat> = (0..23)
            .map(|i| mk(i as f64 + 0.1, "tei", BeatEvent::FullBeat))
            .collect();
        for i in 23..26 {
            marked.push(mk(i as f64 + 0.1, "tat", BeatEvent::HalfBeat));
        }
        let scores = evaluate(&marked, &ann);
        assert!((scores.time_pct - 26.0 / 32.0 * 100.0).abs() < 1e-9);
        assert!((scores.bol_pct - 71.875).abs() < 1e-9);
        assert!((scores.event_pct - 71.875).abs() < 1e-9);
    }

    #[test]
    fn annotation_csv_round_trips() {
        let rows = vec![
            MarkedBeat {
                bol: MarkedBol::Bol(BolClass::from_label("dhit").unwrap()),
                start: 1.04,
                end: 1.39,
                event: BeatEvent::FullBeat,
            },
            MarkedBeat {
                bol: MarkedBol::None,
                start: 2.0,
                end: 2.5,
                event: BeatEvent::StickBeat,
            },
            MarkedBeat {
                bol: MarkedBol::Undefined,
                start: 3.0,
                end: 3.25,
                event: BeatEvent::Undefined,
            },
        ];
        let text = write_annotation_csv(&rows);
        let parsed = parse_annotation_csv(&text).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn detected_beats_must_increase() {
        assert!(DetectedBeats::new(vec![1.0, 2.0, 2.0]).is_err());
        assert!(DetectedBeats::new(vec![1.0, 0.5]).is_err());
        assert!(DetectedBeats::new(vec![0.1, 0.9, 3.0]).is_ok());
    }
}
