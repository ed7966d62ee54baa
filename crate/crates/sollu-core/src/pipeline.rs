//! End-to-end orchestration: segment, classify, recognize, estimate tempo
//! and mark beats, producing one report per recording.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::AudioSignal;
use crate::beatmark::{self, DetectedBeats, MarkParams, MarkedBeat};
use crate::error::{Error, Result};
use crate::features::{self, MfccParams};
use crate::gmm::GmmModel;
use crate::segment::{self, NonSilentSlice, SegmentParams};
use crate::signatures::{
    build_signal_signature, recognize_sollukattu, Recognition, SignalSignature,
    SollukattuSignature,
};
use crate::tempo::{self, TempoEstimate, TempoParams};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GmmConfig {
    /// Gaussian components per class mixture.
    pub components: usize,
    /// Seed for mixture initialization.
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: crate::gmm::DEFAULT_COMPONENTS,
            seed: 1,
        }
    }
}

/// Every tunable of the pipeline in one serializable bundle. Defaults are
/// the standard operating constants for 44.1 kHz recordings.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub segment: SegmentParams,
    pub mfcc: MfccParams,
    pub gmm: GmmConfig,
    pub tempo: TempoParams,
    pub beatmark: MarkParams,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.segment.step > 0.0 && self.segment.step <= self.segment.win) {
            return bad("segment: need 0 < step <= win".into());
        }
        if self.segment.weight < 0.0 {
            return bad("segment: weight must be non-negative".into());
        }
        if !(self.mfcc.hop > 0.0 && self.mfcc.hop <= self.mfcc.frame_len) {
            return bad("mfcc: need 0 < hop <= frame_len".into());
        }
        if self.mfcc.n_filters < features::N_STATIC {
            return bad(format!("mfcc: need at least {} filters", features::N_STATIC));
        }
        if self.gmm.components == 0 {
            return bad("gmm: need at least one component".into());
        }
        if !(self.tempo.bpm_min >= 1 && self.tempo.bpm_min <= self.tempo.bpm_max) {
            return bad("tempo: need 1 <= bpm_min <= bpm_max".into());
        }
        if self.tempo.band_split[0] >= self.tempo.band_split[1] {
            return bad("tempo: band split points must increase".into());
        }
        if self.beatmark.wide_low <= 0.0 || self.beatmark.wide_high <= 0.0 {
            return bad("beatmark: window offsets must be positive".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hash of the canonical JSON encoding; embedded in every report.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Full per-recording analysis report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config_hash: String,
    pub sample_rate: u32,
    pub duration: f64,
    pub slices: Vec<NonSilentSlice>,
    pub signature: SignalSignature,
    pub recognition: Recognition,
    pub comb: Option<TempoEstimate>,
    pub comb_error: Option<String>,
    pub lcs: Option<TempoEstimate>,
    pub lcs_error: Option<String>,
    pub tempo_warning: Option<String>,
    pub selected_period: f64,
    pub marked: Vec<MarkedBeat>,
    pub onset_fallback_used: bool,
}

/// Run the whole pipeline on a loaded signal. `db` carries externally
/// detected 1-beats; without it an onset-envelope fallback detector runs
/// and the report flags it.
pub fn run_pipeline(
    sig: &AudioSignal,
    dict: &[SollukattuSignature],
    model: &GmmModel,
    db: Option<&DetectedBeats>,
    config: &PipelineConfig,
) -> Result<PipelineReport> {
    let slices =
        segment::segment_with(sig, &config.segment).map_err(|e| e.in_stage("segment"))?;

    let mut signature = build_signal_signature(sig, &slices, model, &config.mfcc);

    let recognition =
        recognize_sollukattu(&signature, dict).map_err(|e| e.in_stage("recognize"))?;
    let entry = dict
        .iter()
        .find(|e| e.name == recognition.best)
        .expect("recognized name comes from the dictionary");

    let comb = tempo::comb_tempo_with(sig, &config.tempo);
    let lcs = tempo::lcs_tempo(&signature, entry);
    let (selection, comb_est, comb_err, lcs_est, lcs_err) = match (comb, lcs) {
        (Ok(c), lcs) => {
            let (lcs_est, lcs_err) = split(&lcs);
            let sel = tempo::select_tempo(c.clone(), lcs);
            (sel, Some(c), None, lcs_est, lcs_err)
        }
        (Err(ce), Ok(l)) => (
            tempo::TempoSelection {
                chosen: l.clone(),
                warning: None,
            },
            None,
            Some(ce.to_string()),
            Some(l),
            None,
        ),
        (Err(ce), Err(_)) => return Err(ce.in_stage("tempo")),
    };

    let fallback;
    let marked = {
        beatmark::energy_classes(&mut signature.events);
        let owned_db;
        let db = match db {
            Some(db) => {
                fallback = false;
                db
            }
            None => {
                fallback = true;
                log::warn!("no detected-beats input; using the onset fallback detector");
                owned_db = tempo::detect_onsets(sig).map_err(|e| e.in_stage("mark-beats"))?;
                &owned_db
            }
        };
        beatmark::mark_beats_with(db, &signature.events, selection.chosen.period, &config.beatmark)
            .map_err(|e| e.in_stage("mark-beats"))?
    };

    Ok(PipelineReport {
        config_hash: config.hash(),
        sample_rate: sig.sample_rate(),
        duration: sig.duration(),
        slices,
        signature,
        recognition,
        comb: comb_est,
        comb_error: comb_err,
        lcs: lcs_est,
        lcs_error: lcs_err,
        tempo_warning: selection.warning,
        selected_period: selection.chosen.period,
        marked,
        onset_fallback_used: fallback,
    })
}

fn split(r: &Result<TempoEstimate>) -> (Option<TempoEstimate>, Option<String>) {
    match r {
        Ok(e) => (Some(e.clone()), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let config = PipelineConfig::default();
        let text = config.to_toml();
        let parsed: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed.hash(), config.hash());
        assert_eq!(config.segment.win, 0.090);
        assert_eq!(config.segment.step, 0.010);
        assert_eq!(config.segment.weight, 0.0);
        assert_eq!(config.gmm.components, 15);
        assert_eq!(config.tempo.bpm_min, 33);
        assert_eq!(config.tempo.bpm_max, 75);
        assert_eq!(config.beatmark.wide_low, 0.25);
        assert_eq!(config.beatmark.wide_high, 0.4);
        assert_eq!(config.beatmark.long_gap_offset, 0.25);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(PipelineConfig::default().validate().is_ok());
        let mut c = PipelineConfig::default();
        c.segment.step = c.segment.win * 2.0;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.tempo.bpm_min = 80;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.gmm.components = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = PipelineConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.gmm.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
