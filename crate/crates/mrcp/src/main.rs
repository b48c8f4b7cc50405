use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use mrcp::config::{hash_json, hex, PipelineConfig, SubjectEntry};
use mrcp::error::{CliError, Result};
use mrcp::manifest::Manifest;
use mrcp::{io, pipeline};
use mrcp_core::eval::{evaluate_predictions, EvaluationReport, Regime};
use mrcp_core::learn::{fit_detectors, transfer_evaluate, NoAudit};
use mrcp_core::synth::{derive_seed, generate_session, inject_protocol_violations, render_session, SynthConfig};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "mrcp", version, about = "Gait-intention detection from MRCP phase and amplitude")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic sessions and a pipeline config that lists them.
    Synth(SynthArgs),
    /// Filter, detect onsets and reject trials; writes per-session onset tables.
    Preprocess,
    /// Preprocess and write amplitude and phase feature tables.
    Features,
    /// Train one detector per session and model kind on all of its trials.
    Train,
    /// Apply saved detectors to the configured sessions.
    Evaluate {
        /// Model documents written by `train` or `pipeline`.
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
    /// Run every stage and every configured evaluation regime.
    Pipeline,
    /// Aggregate report documents into ROC, trial-accuracy and latency tables.
    Report { reports: Vec<PathBuf> },
}

#[derive(Args, Default)]
struct SynthArgs {
    /// Base generator settings (TOML); flags override it.
    #[arg(long)]
    synth_config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    subjects: usize,
    #[arg(long, default_value_t = 1)]
    sessions: usize,
    /// Fraction of trials whose onset is moved before the cue.
    #[arg(long, default_value_t = 0.0)]
    violation_fraction: f64,
    /// Give each session its own gain drift instead of sharing the subject's.
    #[arg(long)]
    drift_per_session: bool,
    #[arg(long)]
    n_trials: Option<usize>,
    #[arg(long)]
    fs: Option<f64>,
    /// Comma-separated EEG channel names.
    #[arg(long, value_delimiter = ',')]
    channels: Option<Vec<String>>,
    #[arg(long)]
    emg_channel: Option<String>,
    /// Channel gains as `name=gain`, comma-separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_gain)]
    topography: Option<Vec<(String, f64)>>,
    #[arg(long, allow_hyphen_values = true)]
    mrcp_amplitude_uv: Option<f64>,
    #[arg(long)]
    mrcp_onset_lead_s: Option<f64>,
    #[arg(long)]
    mrcp_recovery_s: Option<f64>,
    #[arg(long)]
    carrier_amplitude_uv: Option<f64>,
    /// `low,high`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    carrier_freq_hz: Option<Vec<f64>>,
    #[arg(long)]
    phase_reset_lead_s: Option<f64>,
    #[arg(long)]
    phase_ramp_s: Option<f64>,
    #[arg(long)]
    reset_target_phase_rad: Option<f64>,
    #[arg(long)]
    amplitude_jitter: Option<f64>,
    #[arg(long)]
    channel_gain_jitter: Option<f64>,
    #[arg(long)]
    session_gain_drift: Option<f64>,
    #[arg(long)]
    drift_seed: Option<u64>,
    #[arg(long)]
    noise_exponent: Option<f64>,
    #[arg(long)]
    noise_rms_uv: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    noise_white_floor_db: Option<f64>,
    #[arg(long)]
    emg_rise_ms: Option<f64>,
    #[arg(long)]
    emg_amplitude_mv: Option<f64>,
    #[arg(long)]
    emg_baseline_mv: Option<f64>,
    #[arg(long)]
    relax_s: Option<f64>,
    /// `low,high`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    wait_s: Option<Vec<f64>>,
    #[arg(long)]
    walk_s: Option<f64>,
    #[arg(long)]
    rest_s: Option<f64>,
    #[arg(long)]
    trials_per_block: Option<usize>,
    #[arg(long)]
    block_break_s: Option<f64>,
    #[arg(long)]
    lead_in_s: Option<f64>,
    #[arg(long)]
    tail_s: Option<f64>,
}

fn parse_gain(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, gain) = s.split_once('=').ok_or_else(|| format!("expected name=gain, got {s:?}"))?;
    Ok((name.trim().to_owned(), gain.trim().parse().map_err(|_| format!("bad gain in {s:?}"))?))
}

macro_rules! set {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value {
            $target = v;
        }
    };
}

impl SynthArgs {
    fn base(&self) -> Result<SynthConfig> {
        let mut c = match &self.synth_config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                toml::from_str(&text).map_err(|e| CliError::Config { path: p.clone(), message: e.to_string() })?
            }
            None => SynthConfig::default(),
        };
        set!(c.n_trials, self.n_trials);
        set!(c.fs, self.fs);
        set!(c.channels, self.channels.clone());
        set!(c.emg_channel, self.emg_channel.clone());
        if let Some(t) = &self.topography {
            c.topography = t.iter().cloned().collect();
        } else if self.channels.is_some() {
            let channels = c.channels.clone();
            c.topography.retain(|name, _| channels.contains(name));
        }
        set!(c.mrcp_amplitude_uv, self.mrcp_amplitude_uv);
        set!(c.mrcp_onset_lead_s, self.mrcp_onset_lead_s);
        set!(c.mrcp_recovery_s, self.mrcp_recovery_s);
        set!(c.carrier_amplitude_uv, self.carrier_amplitude_uv);
        set!(c.carrier_freq_hz, self.carrier_freq_hz.as_ref().map(|v| (v[0], v[1])));
        set!(c.phase_reset_lead_s, self.phase_reset_lead_s);
        set!(c.phase_ramp_s, self.phase_ramp_s);
        set!(c.reset_target_phase_rad, self.reset_target_phase_rad);
        set!(c.amplitude_jitter, self.amplitude_jitter);
        set!(c.channel_gain_jitter, self.channel_gain_jitter);
        set!(c.session_gain_drift, self.session_gain_drift);
        set!(c.drift_seed, self.drift_seed);
        set!(c.noise.exponent, self.noise_exponent);
        set!(c.noise.rms_uv, self.noise_rms_uv);
        set!(c.noise.white_floor_db, self.noise_white_floor_db);
        set!(c.emg_burst.rise_ms, self.emg_rise_ms);
        set!(c.emg_burst.amplitude_mv, self.emg_amplitude_mv);
        set!(c.emg_burst.baseline_mv, self.emg_baseline_mv);
        let p = &mut c.protocol;
        set!(p.relax_s, self.relax_s);
        set!(p.wait_s, self.wait_s.as_ref().map(|v| (v[0], v[1])));
        set!(p.walk_s, self.walk_s);
        set!(p.rest_s, self.rest_s);
        set!(p.trials_per_block, self.trials_per_block);
        set!(p.block_break_s, self.block_break_s);
        set!(p.lead_in_s, self.lead_in_s);
        set!(p.tail_s, self.tail_s);
        Ok(c)
    }
}

struct Ctx {
    cli_seed: Option<u64>,
    out: Option<PathBuf>,
    config: Option<PathBuf>,
}

impl Ctx {
    fn load(&self) -> Result<(PipelineConfig, String)> {
        let path = self.config.as_ref().ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
        let (mut cfg, text) = PipelineConfig::load(path)?;
        if let Some(s) = self.cli_seed {
            cfg.run.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.run.output_dir = o.clone();
        }
        let hash = hex(&Sha256::digest(text.as_bytes()));
        Ok((cfg, hash))
    }

    fn out_dir(&self, fallback: &Path) -> PathBuf {
        self.out.clone().unwrap_or_else(|| fallback.to_owned())
    }
}

fn finish_manifest(mut m: Manifest, dir: &Path, outputs: Vec<PathBuf>) -> Result<()> {
    m.outputs = outputs.iter().map(|p| p.strip_prefix(dir).unwrap_or(p).to_owned()).collect();
    m.write(dir)?;
    Ok(())
}

/// TOML integers are signed 64-bit; derived seeds keep 63 bits so the
/// per-session settings files can record them.
fn toml_safe(seed: u64) -> u64 {
    seed >> 1
}

fn cmd_synth(ctx: &Ctx, args: &SynthArgs) -> Result<()> {
    let base = args.base()?;
    let seed = ctx.cli_seed.unwrap_or(base.seed);
    let dir = ctx.out_dir(Path::new("synthetic"));
    if args.subjects == 0 || args.sessions == 0 {
        return Err(CliError::Usage("--subjects and --sessions must be positive".into()));
    }
    if !(0.0..=1.0).contains(&args.violation_fraction) {
        return Err(CliError::Usage("--violation-fraction must lie in [0, 1]".into()));
    }
    let mut manifest = Manifest::new("synth", seed);
    let mut outputs = Vec::new();
    let mut subjects = Vec::new();
    for s in 0..args.subjects {
        let id = format!("S{:02}", s + 1);
        let mut sessions = Vec::new();
        for k in 0..args.sessions {
            let mut cfg = base.clone();
            cfg.session_id = format!("{id}_session{}", k + 1);
            cfg.seed = toml_safe(derive_seed(seed, s as u64, k as u64));
            cfg.drift_seed = if args.drift_per_session {
                toml_safe(derive_seed(base.drift_seed, s as u64, k as u64))
            } else {
                toml_safe(derive_seed(base.drift_seed, s as u64, 0))
            };
            let context = format!("session {}", cfg.session_id);
            let (rec, gt) = if args.violation_fraction > 0.0 {
                let gt = mrcp_core::synth::plan_session(&cfg).map_err(CliError::stage("synth", &context))?;
                let gt = inject_protocol_violations(&gt, args.violation_fraction, cfg.seed)
                    .map_err(CliError::stage("synth", &context))?;
                (render_session(&cfg, &gt).map_err(CliError::stage("synth", &context))?, gt)
            } else {
                generate_session(&cfg).map_err(CliError::stage("synth", &context))?
            };
            let prefix = dir.join(&cfg.session_id);
            io::write_recording(&rec, &prefix)?;
            let truth = dir.join(format!("{}.truth.json", cfg.session_id));
            io::write_json(&gt, &truth)?;
            let used = dir.join(format!("{}.synth.toml", cfg.session_id));
            let text = toml::to_string(&cfg).map_err(|e| CliError::Internal(e.to_string()))?;
            std::fs::write(&used, text).map_err(|e| CliError::io(&used, e))?;
            info!("wrote {} ({} trials)", prefix.display(), gt.trials.len());
            outputs.extend([io::header_path(&prefix), io::data_path(&prefix), io::events_path(&prefix), truth, used]);
            sessions.push(PathBuf::from(&cfg.session_id));
        }
        subjects.push(SubjectEntry { id, sessions });
    }
    let mut pc = PipelineConfig { subjects, ..Default::default() };
    pc.run.seed = seed;
    pc.run.output_dir = PathBuf::from("out");
    pc.features.channels.retain(|c| base.channels.contains(c));
    let cfg_path = dir.join("pipeline.toml");
    let text = toml::to_string(&pc).map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(&cfg_path, text).map_err(|e| CliError::io(&cfg_path, e))?;
    outputs.push(cfg_path);
    manifest.config_hash = Some(hash_json(&base));
    finish_manifest(manifest, &dir, outputs)
}

fn cmd_prepare(ctx: &Ctx, write_features: bool) -> Result<()> {
    let (cfg, hash) = ctx.load()?;
    let dir = cfg.run.output_dir.clone();
    let mut manifest = Manifest::new(if write_features { "features" } else { "preprocess" }, cfg.run.seed);
    manifest.config_path = ctx.config.clone();
    manifest.config_hash = Some(hash);
    let subjects = pipeline::load_subjects(&cfg)?;
    let mut outputs = Vec::new();
    let mut summaries = Vec::new();
    for s in &subjects {
        for sess in &s.sessions {
            let stem = pipeline::sanitize(&format!("{}_{}", s.id, sess.session_id));
            let p = dir.join("preprocess").join(format!("{stem}.onsets.csv"));
            write_onsets(&sess.onsets, &p)?;
            outputs.push(p);
            summaries.push(sess.summary(&s.id));
            if write_features {
                for (ds, name) in [(&sess.amplitude, "amplitude"), (&sess.phase, "phase")] {
                    let p = dir.join("features").join(format!("{stem}.{name}.csv"));
                    io::write_dataset_csv(ds, &p)?;
                    outputs.push(p);
                }
            }
        }
    }
    let p = dir.join("preprocess").join("summary.json");
    io::write_json(&summaries, &p)?;
    outputs.push(p);
    finish_manifest(manifest, &dir, outputs)
}

fn write_onsets(onsets: &[mrcp_core::preprocess::OnsetResult], path: &Path) -> Result<()> {
    let mut text = String::from("trial_index,onset_time_s,method,rejected,reason\n");
    for o in onsets {
        let method = match o.method {
            mrcp_core::preprocess::OnsetMethod::Emg => "emg",
            mrcp_core::preprocess::OnsetMethod::Footswitch => "footswitch",
        };
        let t = if o.onset_time_s.is_finite() { o.onset_time_s.to_string() } else { String::new() };
        text.push_str(&format!(
            "{},{t},{method},{},{}\n",
            o.trial_index,
            o.rejected,
            o.reject_reason.as_deref().unwrap_or("")
        ));
    }
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn cmd_train(ctx: &Ctx) -> Result<()> {
    let (cfg, hash) = ctx.load()?;
    let dir = cfg.run.output_dir.clone();
    let mut manifest = Manifest::new("train", cfg.run.seed);
    manifest.config_path = ctx.config.clone();
    manifest.config_hash = Some(hash);
    let subjects = pipeline::load_subjects(&cfg)?;
    let mut outputs = Vec::new();
    for s in &subjects {
        for sess in &s.sessions {
            let context = format!("subject {} session {}", s.id, sess.session_id);
            let fitted = fit_detectors(&cfg.model.kinds, &sess.views(), &cfg.model.train_config(), &NoAudit)
                .map_err(CliError::stage("train", &context))?;
            for (model, selection) in fitted {
                let name = pipeline::sanitize(&format!("{}_{}_{}.json", s.id, sess.session_id, model.kind.as_str()));
                let p = dir.join("models").join(name);
                let doc = io::ModelDocument::new(&cfg.features, &s.id, vec![sess.session_id.clone()], model, selection);
                io::write_json(&doc, &p)?;
                info!("wrote {}", p.display());
                outputs.push(p);
            }
        }
    }
    finish_manifest(manifest, &dir, outputs)
}

fn cmd_evaluate(ctx: &Ctx, models: &[PathBuf]) -> Result<()> {
    let (cfg, hash) = ctx.load()?;
    let dir = cfg.run.output_dir.clone();
    let mut manifest = Manifest::new("evaluate", cfg.run.seed);
    manifest.config_path = ctx.config.clone();
    manifest.config_hash = Some(hash.clone());
    let docs = models.iter().map(|p| io::read_model(p).map(|d| (p, d))).collect::<Result<Vec<_>>>()?;
    let feature_hash = cfg.feature_config_hash();
    for (p, d) in &docs {
        if d.feature_config_hash != feature_hash {
            return Err(CliError::Config {
                path: (*p).clone(),
                message: "model was trained with different feature settings than the config".into(),
            });
        }
    }
    let subjects = pipeline::load_subjects(&cfg)?;
    let mut reports = Vec::new();
    let mut sessions = Vec::new();
    for s in &subjects {
        for sess in &s.sessions {
            sessions.push(sess.summary(&s.id));
            for (p, d) in &docs {
                let regime = if d.subject_id != s.id {
                    Regime::Intersubject
                } else if d.train_sessions.contains(&sess.session_id) {
                    info!("skipping {} on its own training session {}", p.display(), sess.session_id);
                    continue;
                } else {
                    Regime::Intersession
                };
                let context = format!("model {} on subject {} session {}", p.display(), s.id, sess.session_id);
                let preds = transfer_evaluate(&d.model, &sess.views(), &NoAudit).map_err(CliError::stage("predict", &context))?;
                let chance = cfg.evaluation.chance_config(derive_seed(cfg.run.seed, 12, reports.len() as u64));
                let evaluation = evaluate_predictions(&preds, &cfg.features.spec, &chance)
                    .map_err(CliError::stage("evaluate", &context))?;
                reports.push(EvaluationReport {
                    regime,
                    model_kind: d.model.kind.as_str().to_owned(),
                    subject_id: s.id.clone(),
                    test_session: sess.session_id.clone(),
                    train_sessions: d.train_sessions.iter().map(|t| format!("{}/{t}", d.subject_id)).collect(),
                    evaluation,
                });
            }
        }
    }
    let doc = io::ReportDocument { schema_version: io::REPORT_SCHEMA_VERSION, seed: cfg.run.seed, config_hash: hash, sessions, reports };
    let (j, c) = (dir.join("report.json"), dir.join("report.csv"));
    io::write_json(&doc, &j)?;
    io::write_report_csv(&doc.reports, &c)?;
    finish_manifest(manifest, &dir, vec![j, c])
}

fn cmd_pipeline(ctx: &Ctx) -> Result<()> {
    let (cfg, hash) = ctx.load()?;
    let dir = cfg.run.output_dir.clone();
    let mut manifest = Manifest::new("pipeline", cfg.run.seed);
    manifest.config_path = ctx.config.clone();
    manifest.config_hash = Some(hash.clone());
    let log = pipeline::AccessLog::default();
    let (doc, out) = pipeline::run_pipeline(&cfg, &hash, &log)?;
    let written = pipeline::write_outputs(&doc, &out, &cfg, &dir)?;
    info!("{} reports written to {}", doc.reports.len(), dir.display());
    finish_manifest(manifest, &dir, written)
}

fn cmd_report(ctx: &Ctx, paths: &[PathBuf]) -> Result<()> {
    if paths.is_empty() {
        return Err(CliError::Usage("report needs at least one report file".into()));
    }
    let mut reports = Vec::new();
    for p in paths {
        reports.extend(io::read_report(p)?.reports);
    }
    let dir = ctx.out_dir(Path::new("tables"));
    let written = io::write_report_tables(&reports, &dir)?;
    finish_manifest(Manifest::new("report", ctx.cli_seed.unwrap_or(0)), &dir, written)
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx { cli_seed: cli.seed, out: cli.out.clone(), config: cli.config.clone() };
    let mut jobs = cli.jobs;
    if jobs.is_none() {
        if let Some(path) = &cli.config {
            if !matches!(cli.command, Command::Synth(_) | Command::Report { .. }) {
                jobs = Some(PipelineConfig::load(path)?.0.run.jobs);
            }
        }
    }
    if let Some(n) = jobs.filter(|&n| n > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match &cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Preprocess => cmd_prepare(&ctx, false),
        Command::Features => cmd_prepare(&ctx, true),
        Command::Train => cmd_train(&ctx),
        Command::Evaluate { models } => cmd_evaluate(&ctx, models),
        Command::Pipeline => cmd_pipeline(&ctx),
        Command::Report { reports } => cmd_report(&ctx, reports),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log_level).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
