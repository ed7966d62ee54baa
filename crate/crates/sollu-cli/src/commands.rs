use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use sollu_core::beatmark::{parse_annotation_csv, write_annotation_csv};
use sollu_core::error::Error;
use sollu_core::features::N_FEATURES;
use sollu_core::gmm::GmmModel;
use sollu_core::pipeline::PipelineConfig;
use sollu_core::signatures::{self, SollukattuSignature};
use sollu_core::synth::{SynthParams, SynthSpec};
use sollu_core::{DetectedBeats, FeatureSequence, FeatureVector};

#[derive(Parser)]
#[command(
    name = "sollu",
    about = "Structural analysis of Sollukattu recordings",
    version
)]
struct Cli {
    /// Pipeline configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Sollukattu signature dictionary; the built-in dictionary applies
    /// when omitted.
    #[arg(long, global = true)]
    dict: Option<PathBuf>,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = "sollu-out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic recording with exact ground truth.
    Synth {
        /// Pattern name from the dictionary.
        #[arg(long)]
        pattern: String,
        /// Tempo period in seconds.
        #[arg(long)]
        tempo: f64,
        /// Pattern repetitions.
        #[arg(long, default_value_t = 2)]
        bars: u32,
        /// Fractional timing noise, below 0.1.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Detect non-silent slices and emit the slice table.
    Segment { wavs: Vec<PathBuf> },
    /// Dump per-slice MFCC feature matrices (rows = frames, 39 columns).
    Features { wav: PathBuf },
    /// Train per-class mixtures from a directory of feature CSVs
    /// (layout: <data>/<class_code>/*.csv).
    TrainGmm {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        components: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classify feature CSV files against a trained model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        features: Vec<PathBuf>,
    },
    /// Recognize the Sollukattu of recordings; prints the distance table.
    Recognize {
        #[arg(long)]
        model: PathBuf,
        /// Print the built-in dictionary text and exit.
        #[arg(long)]
        print_dict: bool,
        wavs: Vec<PathBuf>,
    },
    /// Estimate the tempo period; both methods when a model is given.
    Tempo {
        #[arg(long)]
        model: Option<PathBuf>,
        wav: PathBuf,
    },
    /// Mark beats and write the annotation CSV.
    MarkBeats {
        #[arg(long)]
        model: PathBuf,
        /// Detected 1-beat timestamps file; onset fallback when omitted.
        #[arg(long)]
        db: Option<PathBuf>,
        /// Tempo period override in seconds; estimated when omitted.
        #[arg(long)]
        tempo: Option<f64>,
        wav: PathBuf,
    },
    /// Compare a marking against a ground-truth annotation.
    Evaluate {
        #[arg(long)]
        marked: PathBuf,
        #[arg(long)]
        annotation: PathBuf,
    },
    /// Full pipeline: segment, classify, recognize, tempo, mark beats.
    Run {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        db: Option<PathBuf>,
        wavs: Vec<PathBuf>,
    },
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            log::error!("{err:#}");
            exit_code(&err)
        }
    }
}

/// Stage-specific exit codes: 2 input/config, 3 segment, 4 features,
/// 5 model, 6 recognize, 7 tempo, 8 mark-beats, 9 evaluate, 10 synth.
fn exit_code(err: &anyhow::Error) -> i32 {
    let Some(core) = err.downcast_ref::<Error>() else {
        return 1;
    };
    match core {
        Error::Stage { stage, .. } => match *stage {
            "segment" => 3,
            "features" => 4,
            "classify" => 5,
            "recognize" => 6,
            "tempo" => 7,
            "mark-beats" => 8,
            "evaluate" => 9,
            _ => 1,
        },
        Error::Io { .. }
        | Error::Wav { .. }
        | Error::UnsupportedWav(_)
        | Error::ZeroLengthAudio
        | Error::Config(_) => 2,
        Error::InvalidFraming(_) => 3,
        Error::SliceTooShort(_) => 4,
        Error::EmptyClass(_) => 5,
        Error::UnknownBolCode(_) | Error::UnknownBolLabel(_) => 5,
        Error::DictionaryParse { .. } | Error::NoRecognizedBols | Error::EmptyDictionary => 6,
        Error::SignalTooShort { .. } | Error::NoPeriodicity | Error::LcsTooShort(_) => 7,
        Error::EmptySignature | Error::TempoTooSmall(_) | Error::UnorderedBeats(_) => 8,
        Error::AnnotationParse { .. } => 9,
        Error::Synth(_) => 10,
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let dict = match &cli.dict {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            signatures::parse_dictionary(&text)?
        }
        None => signatures::builtin_dictionary(),
    };

    match cli.command {
        Command::Synth {
            pattern,
            tempo,
            bars,
            jitter,
            seed,
        } => cmd_synth(&cli.out_dir, &dict, &pattern, tempo, bars, jitter, seed),
        Command::Segment { wavs } => cmd_segment(&cli.out_dir, &config, &wavs),
        Command::Features { wav } => cmd_features(&cli.out_dir, &config, &wav),
        Command::TrainGmm {
            data,
            out,
            components,
            seed,
        } => cmd_train(&config, &data, &out, components, seed),
        Command::Classify { model, features } => cmd_classify(&model, &features),
        Command::Recognize {
            model,
            print_dict,
            wavs,
        } => {
            if print_dict {
                print!("{}", signatures::builtin_dictionary_text());
                return Ok(());
            }
            cmd_recognize(&cli.out_dir, &config, &dict, &model, &wavs)
        }
        Command::Tempo { model, wav } => cmd_tempo(&cli.out_dir, &config, &dict, model, &wav),
        Command::MarkBeats {
            model,
            db,
            tempo,
            wav,
        } => cmd_mark_beats(&cli.out_dir, &config, &dict, &model, db, tempo, &wav),
        Command::Evaluate { marked, annotation } => cmd_evaluate(&marked, &annotation),
        Command::Run { model, db, wavs } => cmd_run(&cli.out_dir, &config, &dict, &model, db, &wavs),
    }
}

fn write_atomic(path: &Path, content: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_file_name(format!(
        "{}.tmp",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}


fn artifact(out_dir: &Path, stem: &str, suffix: &str) -> PathBuf {
    out_dir.join(format!("{stem}.{suffix}"))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into())
}

fn load_model(path: &Path) -> anyhow::Result<GmmModel> {
    let text = fs::read_to_string(path)?;
    Ok(GmmModel::from_json(&text)?)
}

fn slices_csv(slices: &[sollu_core::NonSilentSlice]) -> String {
    let mut out = String::from("index,tau_s,tau_e\n");
    for (i, s) in slices.iter().enumerate() {
        out.push_str(&format!("{},{:.3},{:.3}\n", i, s.start, s.end));
    }
    out
}

fn features_csv(seq: &FeatureSequence) -> String {
    let mut out = String::new();
    for v in &seq.vectors {
        let row: Vec<String> = v.as_slice().iter().map(|x| format!("{x}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_features_csv(text: &str) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| anyhow::anyhow!("line {}: {e}", lineno + 1))?;
        if row.len() != N_FEATURES {
            anyhow::bail!("line {}: expected {N_FEATURES} columns, got {}", lineno + 1, row.len());
        }
        rows.push(row);
    }
    Ok(rows)
}

fn cmd_synth(
    out_dir: &Path,
    dict: &[SollukattuSignature],
    pattern: &str,
    tempo: f64,
    bars: u32,
    jitter: f64,
    seed: u64,
) -> anyhow::Result<()> {
    let entry = dict
        .iter()
        .find(|e| e.name == pattern)
        .ok_or_else(|| anyhow::anyhow!("pattern `{pattern}` not in dictionary"))?;
    let spec = SynthSpec {
        pattern: entry.clone(),
        tempo,
        bars,
        jitter,
        params: SynthParams::default(),
    };
    let out = sollu_core::synthesize(&spec, seed)?;
    let slug: String = pattern
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    let name = format!("{slug}_t{tempo}_s{seed}");
    fs::create_dir_all(out_dir)?;
    sollu_core::write_wav(artifact(out_dir, &name, "wav"), &out.signal)?;
    write_atomic(
        &artifact(out_dir, &name, "annotation.csv"),
        &write_annotation_csv(&out.annotation),
    )?;
    out.detected_beats.save(artifact(out_dir, &name, "db.txt"))?;
    println!(
        "wrote {} ({} events, {} 1-beats, {:.2} s)",
        artifact(out_dir, &name, "wav").display(),
        out.annotation.len(),
        out.detected_beats.timestamps().len(),
        out.signal.duration()
    );
    Ok(())
}

fn cmd_segment(out_dir: &Path, config: &PipelineConfig, wavs: &[PathBuf]) -> anyhow::Result<()> {
    anyhow::ensure!(!wavs.is_empty(), "no input files");
    let results: Vec<anyhow::Result<String>> = wavs
        .par_iter()
        .map(|wav| -> anyhow::Result<String> {
            let sig = sollu_core::load_wav(wav)?;
            let slices = sollu_core::segment::segment_with(&sig, &config.segment)
                .map_err(|e| e.in_stage("segment"))?;
            let name = stem(wav);
            write_atomic(&artifact(out_dir, &name, "segments.csv"), &slices_csv(&slices))?;
            write_atomic(
                &artifact(out_dir, &name, "segments.json"),
                &serde_json::to_string_pretty(&slices)?,
            )?;
            Ok(format!("{}: {} slices", wav.display(), slices.len()))
        })
        .collect();
    for r in results {
        println!("{}", r?);
    }
    Ok(())
}

fn cmd_features(out_dir: &Path, config: &PipelineConfig, wav: &Path) -> anyhow::Result<()> {
    let sig = sollu_core::load_wav(wav)?;
    let slices = sollu_core::segment::segment_with(&sig, &config.segment)
        .map_err(|e| e.in_stage("segment"))?;
    let dir = out_dir.join(stem(wav));
    fs::create_dir_all(&dir)?;
    write_atomic(&dir.join("segments.json"), &serde_json::to_string_pretty(&slices)?)?;
    let mut kept = 0usize;
    for (i, slice) in slices.iter().enumerate() {
        match sollu_core::mfcc(slice.samples(&sig), sig.sample_rate(), &config.mfcc) {
            Ok(seq) => {
                write_atomic(&dir.join(format!("slice_{i:03}.csv")), &features_csv(&seq))?;
                kept += 1;
            }
            Err(Error::SliceTooShort(_)) => {
                log::warn!("slice {i} too short for features; skipped");
            }
            Err(e) => return Err(e.in_stage("features").into()),
        }
    }
    println!("{}: {kept} feature matrices in {}", wav.display(), dir.display());
    Ok(())
}

fn cmd_train(
    config: &PipelineConfig,
    data: &Path,
    out: &Path,
    components: Option<usize>,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let mut by_class: BTreeMap<u8, Vec<Vec<f64>>> = BTreeMap::new();
    for entry in fs::read_dir(data)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        let digits: String = name.chars().take_while(|c| c.is_ascii_digit()).collect();
        let Ok(code) = digits.parse::<u32>() else {
            log::warn!("skipping directory `{name}`: no leading class code");
            continue;
        };
        let code = sollu_core::BolClass::from_code(code)?.code();
        let bucket = by_class.entry(code).or_default();
        for file in fs::read_dir(entry.path())? {
            let file = file?.path();
            if file.extension().is_some_and(|e| e == "csv") {
                bucket.extend(parse_features_csv(&fs::read_to_string(&file)?)?);
            }
        }
    }
    anyhow::ensure!(!by_class.is_empty(), "no class directories under {}", data.display());
    let components = components.unwrap_or(config.gmm.components);
    let seed = seed.unwrap_or(config.gmm.seed);
    let outcome = sollu_core::em_train(&by_class, components, seed)?;
    write_atomic(out, &outcome.model.to_json())?;
    println!(
        "trained {} classes (M = {components}, seed = {seed}) -> {}",
        outcome.model.classes.len(),
        out.display()
    );
    for w in &outcome.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

fn cmd_classify(model: &Path, features: &[PathBuf]) -> anyhow::Result<()> {
    anyhow::ensure!(!features.is_empty(), "no feature files");
    let model = load_model(model)?;
    for path in features {
        let rows = parse_features_csv(&fs::read_to_string(path)?)?;
        let seq = FeatureSequence {
            vectors: rows.into_iter().map(FeatureVector).collect(),
            slice: None,
        };
        let (code, score) = sollu_core::classify(&model, &seq)?;
        let label = sollu_core::BolClass::from_code(code as u32)?.label();
        println!("{}: {label} ({code}) log-likelihood {score:.3}", path.display());
    }
    Ok(())
}

fn recognition_csv(rec: &sollu_core::Recognition) -> String {
    let mut out = String::from("rank,name,distance\n");
    for (i, (name, d)) in rec.table.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, name, d));
    }
    out
}

fn cmd_recognize(
    out_dir: &Path,
    config: &PipelineConfig,
    dict: &[SollukattuSignature],
    model: &Path,
    wavs: &[PathBuf],
) -> anyhow::Result<()> {
    anyhow::ensure!(!wavs.is_empty(), "no input files");
    let model = load_model(model)?;
    for wav in wavs {
        let sig = sollu_core::load_wav(wav)?;
        let slices = sollu_core::segment::segment_with(&sig, &config.segment)
            .map_err(|e| e.in_stage("segment"))?;
        let signature = sollu_core::build_signal_signature(&sig, &slices, &model, &config.mfcc);
        let rec = sollu_core::recognize_sollukattu(&signature, dict)
            .map_err(|e| e.in_stage("recognize"))?;
        let table = recognition_csv(&rec);
        write_atomic(&artifact(out_dir, &stem(wav), "recognition.csv"), &table)?;
        let tie_note = if rec.ties.len() > 1 {
            format!(" (tied: {})", rec.ties.join(", "))
        } else {
            String::new()
        };
        println!("{}: {} at distance {}{tie_note}", wav.display(), rec.best, rec.distance);
        print!("{table}");
    }
    Ok(())
}

fn cmd_tempo(
    out_dir: &Path,
    config: &PipelineConfig,
    dict: &[SollukattuSignature],
    model: Option<PathBuf>,
    wav: &Path,
) -> anyhow::Result<()> {
    let sig = sollu_core::load_wav(wav)?;
    let comb = sollu_core::tempo::comb_tempo_with(&sig, &config.tempo)
        .map_err(|e| e.in_stage("tempo"))?;
    let mut energies = String::from("bpm,energy\n");
    for (bpm, e) in &comb.band_energies {
        energies.push_str(&format!("{bpm},{e}\n"));
    }
    write_atomic(
        &artifact(out_dir, &stem(wav), "tempo_energies.csv"),
        &energies,
    )?;
    println!(
        "comb: {} bpm, period {:.3} s",
        comb.bpm.unwrap_or_default(),
        comb.period
    );

    if let Some(model) = model {
        let model = load_model(&model)?;
        let slices = sollu_core::segment::segment_with(&sig, &config.segment)
            .map_err(|e| e.in_stage("segment"))?;
        let signature = sollu_core::build_signal_signature(&sig, &slices, &model, &config.mfcc);
        let rec = sollu_core::recognize_sollukattu(&signature, dict)
            .map_err(|e| e.in_stage("recognize"))?;
        let entry = dict.iter().find(|e| e.name == rec.best).unwrap();
        let lcs = sollu_core::lcs_tempo(&signature, entry);
        match &lcs {
            Ok(est) => println!(
                "lcs ({}): period {:.3} s from gaps {:?}",
                rec.best, est.period, est.per_gap_estimates
            ),
            Err(e) => println!("lcs ({}): failed: {e}", rec.best),
        }
        let sel = sollu_core::select_tempo(comb, lcs);
        if let Some(w) = &sel.warning {
            println!("warning: {w}");
        }
        println!("selected: {:.3} s", sel.chosen.period);
    } else {
        println!("selected: {:.3} s (comb only; pass --model for the LCS method)", comb.period);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_mark_beats(
    out_dir: &Path,
    config: &PipelineConfig,
    dict: &[SollukattuSignature],
    model: &Path,
    db: Option<PathBuf>,
    tempo_override: Option<f64>,
    wav: &Path,
) -> anyhow::Result<()> {
    let sig = sollu_core::load_wav(wav)?;
    let model = load_model(model)?;
    let db = match db {
        Some(path) => Some(DetectedBeats::load(path)?),
        None => None,
    };

    let marked = if let Some(period) = tempo_override {
        let slices = sollu_core::segment::segment_with(&sig, &config.segment)
            .map_err(|e| e.in_stage("segment"))?;
        let mut signature = sollu_core::build_signal_signature(&sig, &slices, &model, &config.mfcc);
        sollu_core::energy_classes(&mut signature.events);
        let owned;
        let db = match &db {
            Some(db) => db,
            None => {
                log::warn!("no detected-beats input; using the onset fallback detector");
                owned = sollu_core::detect_onsets(&sig).map_err(|e| e.in_stage("mark-beats"))?;
                &owned
            }
        };
        sollu_core::beatmark::mark_beats_with(db, &signature.events, period, &config.beatmark)
            .map_err(|e| e.in_stage("mark-beats"))?
    } else {
        sollu_core::run_pipeline(&sig, dict, &model, db.as_ref(), config)?.marked
    };

    let path = artifact(out_dir, &stem(wav), "marked.csv");
    write_atomic(&path, &write_annotation_csv(&marked))?;
    println!("{}: {} marked beats -> {}", wav.display(), marked.len(), path.display());
    Ok(())
}

fn cmd_evaluate(marked: &Path, annotation: &Path) -> anyhow::Result<()> {
    let mb = parse_annotation_csv(&fs::read_to_string(marked)?)?;
    let ab = parse_annotation_csv(&fs::read_to_string(annotation)?)?;
    let scores = sollu_core::evaluate(&mb, &ab);
    println!(
        "time {:.2}% | bol {:.2}% | event {:.2}%",
        scores.time_pct, scores.bol_pct, scores.event_pct
    );
    Ok(())
}

fn cmd_run(
    out_dir: &Path,
    config: &PipelineConfig,
    dict: &[SollukattuSignature],
    model: &Path,
    db: Option<PathBuf>,
    wavs: &[PathBuf],
) -> anyhow::Result<()> {
    anyhow::ensure!(!wavs.is_empty(), "no input files");
    let model = load_model(model)?;
    let db = match db {
        Some(path) => Some(DetectedBeats::load(path)?),
        None => None,
    };
    let results: Vec<anyhow::Result<String>> = wavs
        .par_iter()
        .map(|wav| -> anyhow::Result<String> {
            let sig = sollu_core::load_wav(wav)?;
            let report = sollu_core::run_pipeline(&sig, dict, &model, db.as_ref(), config)?;
            let name = stem(wav);
            write_atomic(&artifact(out_dir, &name, "report.json"), &serde_json::to_string_pretty(&report)?)?;
            write_atomic(&artifact(out_dir, &name, "segments.csv"), &slices_csv(&report.slices))?;
            write_atomic(&artifact(out_dir, &name, "marked.csv"), &write_annotation_csv(&report.marked))?;
            if let Some(comb) = &report.comb {
                let mut energies = String::from("bpm,energy\n");
                for (bpm, e) in &comb.band_energies {
                    energies.push_str(&format!("{bpm},{e}\n"));
                }
                write_atomic(&artifact(out_dir, &name, "tempo_energies.csv"), &energies)?;
            }
            Ok(format!(
                "{}: {} (distance {}), period {:.3} s, {} marked beats{}",
                wav.display(),
                report.recognition.best,
                report.recognition.distance,
                report.selected_period,
                report.marked.len(),
                if report.onset_fallback_used {
                    " [onset fallback]"
                } else {
                    ""
                }
            ))
        })
        .collect();
    for r in results {
        println!("{}", r?);
    }
    Ok(())
}
