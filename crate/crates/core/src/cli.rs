//! The `llp` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::decoder::{posthoc_reanalyze, select_symbol, train_llp, train_llp_batch, LinearClassifier, OnlineLlpState};
use crate::error::{LlpError, Result};
use crate::eval::{
    auc, bootstrap_homogeneity, bootstrap_homogeneity_epochs, character_accuracy, peak_features, signed_r2,
    supervised_cv, HomogeneityEntry, HomogeneityReport, PeakFeatures,
};
use crate::mixing::{noise_amplification, pseudoinverse, MixingMatrix};
use crate::sequence::{assemble_trial, validate_trial, Trial, TrialViolation};
use crate::signal::io::{read_features, read_markers, read_recording, write_features, FeatureRow};
use crate::signal::{ContinuousRecording, Epoch};
use crate::simgen::{
    assemble_artificial, calibrate_snr, reconstruction_rmse, session_like_data, simulate_sessions, LabeledPool,
    SessionConfig, SessionResult, SyntheticModel,
};
use crate::types::{FeatureVector, Label};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LLP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "llp", version, about = "Label-proportion decoding for ERP spellers")]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of seeds (sessions or sweep repetitions).
    #[arg(long, global = true)]
    pub seeds: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    /// Mixing matrix as JSON, inline or as a file path.
    #[arg(long, global = true)]
    pub matrix: Option<String>,
    /// Print nothing on success.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noise amplification factor and reconstruction coefficients.
    Naf,
    /// Generate and validate stimulus trials.
    GenSequences {
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Simulate online spelling sessions.
    Simulate {
        /// Also write the first session as feature CSV, trial JSON and decision log.
        #[arg(long)]
        export: bool,
    },
    /// Evaluate recorded or exported data.
    Evaluate {
        /// Feature table (`trial,group,label,symbol,f0,...`).
        #[arg(long, conflicts_with_all = ["recording", "markers"])]
        features: Option<PathBuf>,
        /// Continuous recording (`time_ms,<channels>`).
        #[arg(long, requires = "markers")]
        recording: Option<PathBuf>,
        #[arg(long, requires = "recording")]
        markers: Option<PathBuf>,
        /// Trials JSON; enables the online LLP replay.
        #[arg(long)]
        trials: Option<PathBuf>,
    },
    /// Reconstruction error and AUC over candidate mixing matrices.
    NafSweep,
}

/// Exit status for an error: 3 for generation or convergence failures, 2 otherwise.
pub fn exit_code(e: &LlpError) -> i32 {
    match e {
        LlpError::GenerationFailed(_) | LlpError::NoConvergence(_) => 3,
        _ => 2,
    }
}

struct Ctx<'a> {
    cfg: ExperimentConfig,
    out: PathBuf,
    quiet: bool,
    stdout: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn say(&mut self, line: impl AsRef<str>) -> Result<()> {
        if !self.quiet {
            writeln!(self.stdout, "{}", line.as_ref())?;
        }
        Ok(())
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).map_err(|e| LlpError::Io(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| LlpError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Runs a parsed command line, printing to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let out = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut ctx = Ctx { cfg, out, quiet: cli.quiet, stdout };
    match cli.command {
        Command::Naf => cmd_naf(&mut ctx, cli.matrix.as_deref()),
        Command::GenSequences { count } => cmd_gen_sequences(&mut ctx, cli.seed, count),
        Command::Simulate { export } => cmd_simulate(&mut ctx, cli.seed, cli.seeds, export),
        Command::Evaluate { features, recording, markers, trials } => {
            let input = match (features, recording, markers) {
                (Some(f), None, None) => Input::Features(f),
                (None, Some(r), Some(m)) => Input::Recording(r, m),
                _ => return Err(LlpError::InvalidArgument("give --features or --recording with --markers".into())),
            };
            cmd_evaluate(&mut ctx, input, trials.as_deref())
        }
        Command::NafSweep => cmd_naf_sweep(&mut ctx, cli.matrix.as_deref(), cli.seed, cli.seeds),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| LlpError::Io(format!("{}: {e}", path.display())))
}

/// Inline JSON, or the contents of a file when `arg` names one.
fn json_arg(arg: &str) -> Result<String> {
    let p = Path::new(arg);
    if !arg.trim_start().starts_with(['{', '[']) && p.exists() {
        read_text(p)
    } else {
        Ok(arg.to_string())
    }
}

/// Accepts `{"rows": [[..], ..]}` or a bare `[[..], ..]`.
pub fn parse_matrix(text: &str) -> Result<MixingMatrix> {
    let rows: Vec<[f64; 2]> = match serde_json::from_str::<MixingMatrix>(text) {
        Ok(m) => m.rows().to_vec(),
        Err(_) => serde_json::from_str(text).map_err(|e| LlpError::InvalidMixing(format!("matrix JSON: {e}")))?,
    };
    MixingMatrix::try_new(rows)
}

fn parse_matrix_list(text: &str) -> Result<Vec<MixingMatrix>> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| LlpError::InvalidMixing(format!("matrix JSON: {e}")))?;
    let items = match &value {
        serde_json::Value::Array(a) if a.first().is_some_and(|v| v.is_array() && v[0].is_array()) => a.clone(),
        serde_json::Value::Array(a) if a.iter().all(|v| v.is_object()) => a.clone(),
        other => vec![other.clone()],
    };
    items.iter().map(|v| parse_matrix(&v.to_string())).collect()
}

fn fmt_row(r: &[f64]) -> String {
    r.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(", ")
}

fn cmd_naf(ctx: &mut Ctx, matrix: Option<&str>) -> Result<()> {
    let m = match matrix {
        Some(s) => parse_matrix(&json_arg(s)?)?,
        None => MixingMatrix::try_new(ctx.cfg.mixing()?.rows().to_vec())?,
    };
    let nu = pseudoinverse(&m)?;
    let naf = noise_amplification(&m)?;
    ctx.say(format!("groups: {}", m.groups()))?;
    ctx.say(format!("NAF: {naf:.2}"))?;
    ctx.say(format!("coefficients: [{}; {}]", fmt_row(&nu.plus), fmt_row(&nu.minus)))?;
    Ok(())
}

#[derive(Serialize)]
struct ValidationSummary {
    trials: usize,
    seed: u64,
    valid: usize,
    violations: Vec<IndexedViolation>,
}

#[derive(Serialize)]
struct IndexedViolation {
    trial: usize,
    violation: TrialViolation,
}

fn cmd_gen_sequences(ctx: &mut Ctx, seed: Option<u64>, count: usize) -> Result<()> {
    let grid = ctx.cfg.grid();
    let design = ctx.cfg.design()?;
    let seed = seed.unwrap_or(ctx.cfg.session.seed);
    let trials = (0..count)
        .map(|i| assemble_trial(&grid, &design, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<Trial>>>()?;
    let mut violations = Vec::new();
    let mut valid = 0;
    for (i, t) in trials.iter().enumerate() {
        let report = validate_trial(t, &grid, &design);
        if report.is_ok() {
            valid += 1;
        }
        violations.extend(report.violations.into_iter().map(|violation| IndexedViolation { trial: i, violation }));
    }
    let n_violations = violations.len();
    ctx.write("trials.json", &Trial::list_to_json(&trials))?;
    let summary = ValidationSummary { trials: count, seed, valid, violations };
    ctx.write("validation.json", &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    ctx.say(format!("trials: {count}, valid: {valid}, violations: {n_violations}"))?;
    if n_violations > 0 {
        return Err(LlpError::GenerationFailed(format!("{n_violations} violations in generated trials")));
    }
    Ok(())
}

/// Builds the configured model and calibrates it.
fn calibrated_model(cfg: &ExperimentConfig, target: f64) -> Result<SyntheticModel> {
    let (dim, rank, model_seed) = cfg.model.as_ref().map_or((174, 5, 0), |m| (m.dim, m.rank, m.model_seed));
    let model = SyntheticModel::new(dim, rank, model_seed)?;
    let snr = calibrate_snr(&model, target, &mut ChaCha8Rng::seed_from_u64(model_seed))?;
    Ok(model.with_snr(snr))
}

fn decision_log(online: &[Option<usize>], posthoc: &[usize], truth: &[Option<usize>]) -> String {
    let na = |v: Option<usize>| v.map_or_else(|| "NA".to_string(), |s| s.to_string());
    let mut s = String::from("trial_index,online_symbol,posthoc_symbol,true_symbol\n");
    for (i, ((o, p), t)) in online.iter().zip(posthoc).zip(truth).enumerate() {
        s.push_str(&format!("{i},{},{p},{}\n", na(*o), na(*t)));
    }
    s
}

fn cmd_simulate(ctx: &mut Ctx, seed: Option<u64>, seeds: Option<usize>, export: bool) -> Result<()> {
    let target = ctx.cfg.require_model()?.snr_target;
    let model = calibrated_model(&ctx.cfg, target)?;
    let n = seeds.unwrap_or(ctx.cfg.session.seeds);
    if n == 0 {
        return Err(LlpError::InvalidArgument("at least one seed is needed".into()));
    }
    let first = seed.unwrap_or(ctx.cfg.session.seed);
    let base = SessionConfig {
        sentence: ctx.cfg.session.sentence.clone(),
        seed: first,
        grid: ctx.cfg.grid(),
        design: ctx.cfg.design()?,
    };
    let seed_list: Vec<u64> = (0..n as u64).map(|i| first.wrapping_add(i)).collect();
    let results = simulate_sessions(&model, &base, &seed_list)?;
    let model_seed = ctx.cfg.model.as_ref().map_or(0, |m| m.model_seed);
    let (xs, ys) = session_like_data(&model, &mut ChaCha8Rng::seed_from_u64(model_seed.wrapping_add(1)));
    let check_auc = supervised_cv(&xs, &ys, ctx.cfg.evaluate.folds)?;

    ctx.write("model.json", &model.to_json())?;
    ctx.write("sessions.json", &serde_json::to_string(&results).expect("results serialize"))?;
    ctx.write("sessions.csv", &per_character_csv(&results))?;
    ctx.write("ramp_up.csv", &ramp_up_csv(&results))?;

    let nf = n as f64;
    let online = results.iter().map(|r| r.online_accuracy).sum::<f64>() / nf;
    let post_ramp: Vec<f64> = results.iter().filter_map(|r| r.online_post_ramp).collect();
    let post_ramp = (!post_ramp.is_empty()).then(|| post_ramp.iter().sum::<f64>() / post_ramp.len() as f64);
    let posthoc = results.iter().map(|r| r.posthoc_accuracy).sum::<f64>() / nf;
    let not_worse = results.iter().filter(|r| r.posthoc_accuracy >= r.online_accuracy).count() as f64 / nf;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
    let summary = format!(
        "seeds,snr_target,snr_scale,check_auc,online_accuracy,online_post_ramp,posthoc_accuracy,posthoc_not_worse\n\
         {n},{target:.6},{:.6},{check_auc:.6},{online:.6},{},{posthoc:.6},{not_worse:.6}\n",
        model.snr_scale,
        opt(post_ramp)
    );
    ctx.write("summary.csv", &summary)?;

    if export {
        let r = &results[0];
        let mut rows = Vec::new();
        for (t, rec) in r.history.iter().enumerate() {
            for ((x, st), l) in rec.epochs.iter().zip(&rec.trial.stimuli).zip(&rec.labels) {
                rows.push(FeatureRow {
                    trial: t,
                    group: st.group,
                    label: Some(*l),
                    symbol: Some(r.truth[t]),
                    features: x.clone(),
                });
            }
        }
        let mut buf = Vec::new();
        write_features(&mut buf, &rows)?;
        ctx.write("export_features.csv", &String::from_utf8(buf).expect("csv is utf-8"))?;
        let trials: Vec<Trial> = r.history.iter().map(|h| h.trial.clone()).collect();
        ctx.write("export_trials.json", &Trial::list_to_json(&trials))?;
        let online: Vec<Option<usize>> = r.online.iter().map(|&s| Some(s)).collect();
        let truth: Vec<Option<usize>> = r.truth.iter().map(|&s| Some(s)).collect();
        ctx.write("export_decisions.csv", &decision_log(&online, &r.posthoc, &truth))?;
    }

    ctx.say(format!("snr_scale: {:.4} (check AUC {check_auc:.4})", model.snr_scale))?;
    ctx.say(format!("online accuracy: {online:.4}"))?;
    ctx.say(format!("post-ramp accuracy: {}", opt(post_ramp)))?;
    ctx.say(format!("post-hoc accuracy: {posthoc:.4}"))?;
    Ok(())
}

fn per_character_csv(results: &[SessionResult]) -> String {
    let mut s = String::from("seed,character,true_symbol,online_symbol,posthoc_symbol,auc\n");
    for r in results {
        for i in 0..r.truth.len() {
            let a = r.auc_trajectory[i].map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
            s.push_str(&format!("{},{i},{},{},{},{a}\n", r.seed, r.truth[i], r.online[i], r.posthoc[i]));
        }
    }
    s
}

fn ramp_up_csv(results: &[SessionResult]) -> String {
    let mut s = String::from("character,online_accuracy,posthoc_accuracy,mean_auc\n");
    let len = results[0].truth.len();
    let n = results.len() as f64;
    for i in 0..len {
        let on = results.iter().filter(|r| r.online[i] == r.truth[i]).count() as f64 / n;
        let post = results.iter().filter(|r| r.posthoc[i] == r.truth[i]).count() as f64 / n;
        let aucs: Vec<f64> = results.iter().filter_map(|r| r.auc_trajectory[i]).collect();
        let a = if aucs.is_empty() {
            "NA".to_string()
        } else {
            format!("{:.6}", aucs.iter().sum::<f64>() / aucs.len() as f64)
        };
        s.push_str(&format!("{i},{on:.6},{post:.6},{a}\n"));
    }
    s
}

enum Input {
    Features(PathBuf),
    Recording(PathBuf, PathBuf),
}

/// Epoch-level data shared by both input kinds.
struct Dataset {
    features: Vec<FeatureVector>,
    groups: Vec<usize>,
    labels: Vec<Option<Label>>,
    symbols: Vec<Option<usize>>,
    trials: Vec<usize>,
    epochs: Option<Vec<Epoch>>,
}

fn load_dataset(ctx: &Ctx, input: &Input) -> Result<Dataset> {
    match input {
        Input::Features(p) => {
            let rows = read_features(read_text(p)?.as_bytes())?;
            if rows.is_empty() {
                return Err(LlpError::InsufficientData("feature table is empty".into()));
            }
            Ok(Dataset {
                groups: rows.iter().map(|r| r.group).collect(),
                labels: rows.iter().map(|r| r.label).collect(),
                symbols: rows.iter().map(|r| r.symbol).collect(),
                trials: rows.iter().map(|r| r.trial).collect(),
                features: rows.into_iter().map(|r| r.features).collect(),
                epochs: None,
            })
        }
        Input::Recording(rp, mp) => {
            let (samples, rate, names) = read_recording(read_text(rp)?.as_bytes())?;
            let markers = read_markers(read_text(mp)?.as_bytes())?;
            let rec = ContinuousRecording::new(samples, rate, names, markers)?;
            let pre = ctx.cfg.preprocessing.run(&rec)?;
            if !pre.skipped.is_empty() {
                log::warn!("{} markers too close to the recording edge were skipped", pre.skipped.len());
            }
            let per_trial = ctx.cfg.design()?.stimuli();
            let mut positions: Vec<usize> = (0..rec.markers.len()).collect();
            positions.retain(|p| !pre.skipped.contains(p));
            Ok(Dataset {
                groups: pre.epochs.iter().map(|e| e.meta.group).collect(),
                labels: pre.epochs.iter().map(|e| e.meta.label).collect(),
                symbols: pre.epochs.iter().map(|e| e.meta.symbol).collect(),
                trials: positions.iter().map(|p| p / per_trial).collect(),
                features: pre.features,
                epochs: Some(pre.epochs),
            })
        }
    }
}

#[derive(Serialize)]
struct ReplayReport {
    online: Vec<Option<usize>>,
    posthoc: Vec<usize>,
    truth: Vec<Option<usize>>,
    online_accuracy: Option<f64>,
    posthoc_accuracy: Option<f64>,
}

#[derive(Serialize)]
struct Evaluation {
    epochs: usize,
    dim: usize,
    labelled: bool,
    supervised_cv_auc: Option<f64>,
    homogeneity: Option<HomogeneityReport>,
    signed_r2: Option<Vec<f64>>,
    peaks: Option<Vec<(String, PeakFeatures)>>,
    replay: Option<ReplayReport>,
}

/// Feeds the trials through the online decoder in order.
fn replay(ctx: &Ctx, data: &Dataset, trials: &[Trial]) -> Result<ReplayReport> {
    let grid = ctx.cfg.grid();
    let mixing = ctx.cfg.mixing()?;
    let d = data.features[0].dim();
    let mut by_trial: Vec<Vec<usize>> = vec![Vec::new(); trials.len()];
    for (i, &t) in data.trials.iter().enumerate() {
        by_trial
            .get_mut(t)
            .ok_or_else(|| {
                LlpError::InvalidArgument(format!("epoch {i} refers to trial {t}, only {} given", trials.len()))
            })?
            .push(i);
    }
    let mut state = OnlineLlpState::new(d, mixing.groups());
    let mut classifier: Option<LinearClassifier> = None;
    let mut online = Vec::new();
    let mut history = Vec::new();
    let mut truth = Vec::new();
    for (t, trial) in trials.iter().enumerate() {
        let idx = &by_trial[t];
        if idx.len() != trial.len() {
            return Err(LlpError::DimensionMismatch { expected: trial.len(), got: idx.len() });
        }
        let epochs: Vec<FeatureVector> = idx.iter().map(|&i| data.features[i].clone()).collect();
        online.push(classifier.as_ref().map(|c| select_symbol(c, trial, &grid, &epochs)).transpose()?);
        for (&i, st) in idx.iter().zip(&trial.stimuli) {
            if data.groups[i] != st.group {
                return Err(LlpError::InvalidArgument(format!("epoch {i}: group differs from trial {t}")));
            }
            state.update(&data.features[i], st.group)?;
        }
        classifier = Some(train_llp(&state, &mixing)?);
        truth.push(idx.first().and_then(|&i| data.symbols[i]));
        history.push((trial.clone(), epochs));
    }
    let last = classifier.ok_or_else(|| LlpError::InsufficientData("no trials to replay".into()))?;
    let posthoc = posthoc_reanalyze(&last, &grid, &history)?;
    let (mut online_accuracy, mut posthoc_accuracy) = (None, None);
    if let Some(truth) = truth.iter().copied().collect::<Option<Vec<usize>>>() {
        let decided: Vec<(usize, usize)> = online.iter().zip(&truth).filter_map(|(o, t)| o.map(|o| (o, *t))).collect();
        if !decided.is_empty() {
            let (o, t): (Vec<usize>, Vec<usize>) = decided.into_iter().unzip();
            online_accuracy = Some(character_accuracy(&o, &t)?.overall);
        }
        posthoc_accuracy = Some(character_accuracy(&posthoc, &truth)?.overall);
    }
    Ok(ReplayReport { online, posthoc, truth, online_accuracy, posthoc_accuracy })
}

fn homogeneity(ctx: &Ctx, data: &Dataset, labels: &[Label]) -> Result<HomogeneityReport> {
    let s = &ctx.cfg.evaluate;
    let mut entries: Vec<HomogeneityEntry> = Vec::new();
    for class in [Label::Target, Label::NonTarget] {
        let name = if class.is_target() { "target" } else { "non-target" };
        let pick = |g: usize| -> Vec<usize> {
            (0..labels.len()).filter(|&i| labels[i] == class && data.groups[i] == g).collect()
        };
        let (a, b) = (pick(0), pick(1));
        let entry = match &data.epochs {
            Some(ep) => {
                let ea: Vec<Epoch> = a.iter().map(|&i| ep[i].clone()).collect();
                let eb: Vec<Epoch> = b.iter().map(|&i| ep[i].clone()).collect();
                bootstrap_homogeneity_epochs(name, &ea, &eb, s.homogeneity_window, s.symmetric)
            }
            None => {
                let fa: Vec<&[f64]> = a.iter().map(|&i| &data.features[i][..]).collect();
                let fb: Vec<&[f64]> = b.iter().map(|&i| &data.features[i][..]).collect();
                bootstrap_homogeneity(name, &fa, &fb, s.symmetric)
            }
        };
        match entry {
            Ok(e) => entries.push(e),
            Err(LlpError::InsufficientData(msg)) => log::warn!("homogeneity test for {name} skipped: {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(HomogeneityReport::new(s.alpha, entries))
}

/// Class-average epochs and their peaks, when O1 and Cz are recorded.
fn class_peaks(epochs: &[Epoch], labels: &[Label]) -> Option<Vec<(String, PeakFeatures)>> {
    let mut out = Vec::new();
    for class in [Label::Target, Label::NonTarget] {
        let members: Vec<&Epoch> = epochs.iter().zip(labels).filter(|(_, l)| **l == class).map(|(e, _)| e).collect();
        let first = members.first()?;
        let n = members.len() as f64;
        let mut avg = (*first).clone();
        for (c, ch) in avg.samples.iter_mut().enumerate() {
            for (j, v) in ch.iter_mut().enumerate() {
                *v = members.iter().map(|e| e.samples[c][j]).sum::<f64>() / n;
            }
        }
        match peak_features(&avg) {
            Ok(p) => out.push((if class.is_target() { "target" } else { "non-target" }.to_string(), p)),
            Err(e) => {
                log::warn!("peak features skipped: {e}");
                return None;
            }
        }
    }
    Some(out)
}

fn cmd_evaluate(ctx: &mut Ctx, input: Input, trials: Option<&Path>) -> Result<()> {
    let data = load_dataset(ctx, &input)?;
    let labels: Option<Vec<Label>> = data.labels.iter().copied().collect();
    let mut eval = Evaluation {
        epochs: data.features.len(),
        dim: data.features.first().map_or(0, |f| f.dim()),
        labelled: labels.is_some(),
        supervised_cv_auc: None,
        homogeneity: None,
        signed_r2: None,
        peaks: None,
        replay: None,
    };
    if let Some(labels) = &labels {
        eval.supervised_cv_auc = Some(supervised_cv(&data.features, labels, ctx.cfg.evaluate.folds)?);
        eval.homogeneity = Some(homogeneity(ctx, &data, labels)?);
        eval.signed_r2 = Some(signed_r2(&data.features, labels)?);
        eval.peaks = data.epochs.as_ref().and_then(|e| class_peaks(e, labels));
    } else {
        log::info!("labels withheld; supervised metrics skipped");
    }
    if let Some(p) = trials {
        let trials = Trial::list_from_json(&read_text(p)?)?;
        let r = replay(ctx, &data, &trials)?;
        ctx.write("replay.csv", &decision_log(&r.online, &r.posthoc, &r.truth))?;
        eval.replay = Some(r);
    }
    ctx.write("evaluation.json", &serde_json::to_string_pretty(&eval).expect("evaluation serializes"))?;

    ctx.say(format!("epochs: {}, features: {}", eval.epochs, eval.dim))?;
    match eval.supervised_cv_auc {
        Some(a) => ctx.say(format!("supervised CV AUC: {a:.4}"))?,
        None => ctx.say("supervised CV AUC: skipped (no labels)")?,
    }
    if let Some(h) = &eval.homogeneity {
        for e in &h.entries {
            let flag = if e.p < h.threshold { " *" } else { "" };
            ctx.say(format!("homogeneity {}: t = {:.3}, p = {:.4}{flag}", e.name, e.t, e.p))?;
        }
    }
    if let Some(r) = &eval.replay {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
        ctx.say(format!("LLP replay: online {}, post-hoc {}", opt(r.online_accuracy), opt(r.posthoc_accuracy)))?;
    }
    Ok(())
}

/// Mixing matrices with distinct noise amplification used when none are given.
pub fn default_candidates() -> Vec<MixingMatrix> {
    vec![
        MixingMatrix::new(vec![[0.9, 0.1], [0.1, 0.9]]),
        MixingMatrix::new(vec![[0.5, 0.5], [0.1, 0.9]]),
        MixingMatrix::new(vec![[0.5, 0.5], [0.2, 0.8], [0.1, 0.9]]),
        MixingMatrix::speller(),
    ]
}

/// Per-matrix results of a sweep, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub matrix: MixingMatrix,
    pub naf: f64,
    pub rmse: f64,
    pub auc: f64,
}

/// Reconstruction RMSE and held-out AUC of the LLP classifier per matrix.
///
/// Every seed draws one pool and one test set shared by all matrices.
pub fn naf_sweep(
    model: &SyntheticModel,
    matrices: &[MixingMatrix],
    epochs: usize,
    test_epochs: usize,
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if matrices.is_empty() {
        return Err(LlpError::InvalidArgument("no candidate matrices".into()));
    }
    if seeds.is_empty() {
        return Err(LlpError::InvalidArgument("at least one seed is needed".into()));
    }
    let truth = model.class_means();
    let per_seed = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<(f64, f64)>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pool = LabeledPool::sample(model, epochs, epochs, &mut rng)?;
            let test = LabeledPool::sample(model, test_epochs / 4, test_epochs - test_epochs / 4, &mut rng)?;
            matrices
                .iter()
                .map(|m| {
                    let set = assemble_artificial(&pool, m, epochs, &mut rng)?;
                    let rmse = reconstruction_rmse(&set, m, &truth)?;
                    let c = train_llp_batch(&set.features, &set.groups, m)?;
                    let scores = test.features.iter().map(|x| c.score(x)).collect::<Result<Vec<_>>>()?;
                    Ok((rmse, auc(&scores, &test.labels)?))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = seeds.len() as f64;
    matrices
        .iter()
        .enumerate()
        .map(|(k, m)| {
            Ok(SweepRow {
                matrix: m.clone(),
                naf: noise_amplification(m)?,
                rmse: per_seed.iter().map(|r| r[k].0).sum::<f64>() / n,
                auc: per_seed.iter().map(|r| r[k].1).sum::<f64>() / n,
            })
        })
        .collect()
}

fn cmd_naf_sweep(ctx: &mut Ctx, matrix: Option<&str>, seed: Option<u64>, seeds: Option<usize>) -> Result<()> {
    let matrices = match matrix {
        Some(s) => parse_matrix_list(&json_arg(s)?)?,
        None if !ctx.cfg.sweep.matrices.is_empty() => {
            ctx.cfg.sweep.matrices.iter().map(|m| MixingMatrix::try_new(m.rows().to_vec())).collect::<Result<_>>()?
        }
        None => default_candidates(),
    };
    if matrices.is_empty() {
        return Err(LlpError::InvalidArgument("candidate matrix list is empty".into()));
    }
    let target = ctx.cfg.model.as_ref().map_or(0.97, |m| m.snr_target);
    let model = calibrated_model(&ctx.cfg, target)?;
    let first = seed.unwrap_or(ctx.cfg.session.seed);
    let n = seeds.unwrap_or(ctx.cfg.sweep.seeds);
    let seed_list: Vec<u64> = (0..n as u64).map(|i| first.wrapping_add(i)).collect();
    let rows = naf_sweep(&model, &matrices, ctx.cfg.sweep.epochs, ctx.cfg.sweep.test_epochs, &seed_list)?;
    let mut csv = String::from("matrix,groups,naf,rmse,auc\n");
    for r in &rows {
        let rows_json = serde_json::to_string(r.matrix.rows()).expect("rows serialize");
        csv.push_str(&format!("\"{rows_json}\",{},{:.6},{:.6},{:.6}\n", r.matrix.groups(), r.naf, r.rmse, r.auc));
    }
    ctx.write("naf_sweep.csv", &csv)?;
    for r in &rows {
        ctx.say(format!("NAF {:>7.2}  RMSE {:.4}  AUC {:.4}", r.naf, r.rmse, r.auc))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_arguments() {
        assert_eq!(parse_matrix("[[1,0],[0,1]]").unwrap(), MixingMatrix::identity());
        assert_eq!(parse_matrix(r#"{"rows":[[1,0],[0,1]]}"#).unwrap(), MixingMatrix::identity());
        assert!(matches!(parse_matrix("[[0.5,0.5],[0.5,0.5]]"), Err(LlpError::Singular(_))));
        assert!(parse_matrix("nope").is_err());
        assert_eq!(parse_matrix_list("[[1,0],[0,1]]").unwrap().len(), 1);
        assert_eq!(parse_matrix_list("[[[1,0],[0,1]],[[0.9,0.1],[0.1,0.9]]]").unwrap().len(), 2);
        assert!(parse_matrix_list("[]").unwrap().is_empty());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&LlpError::GenerationFailed(String::new())), 3);
        assert_eq!(exit_code(&LlpError::Singular(String::new())), 2);
        assert_eq!(exit_code(&LlpError::Parse { line: 3, message: String::new() }), 2);
    }

    #[test]
    fn candidates_have_distinct_naf() {
        let mut nafs: Vec<f64> = default_candidates().iter().map(|m| noise_amplification(m).unwrap()).collect();
        nafs.dedup();
        assert_eq!(nafs.len(), 4);
    }
}
