use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use padmix::audio_io::{read_wav, write_wav};
use padmix::loudness::integrated_loudness;
use padmix::pipeline::{decompose_ce, decompose_pad, LoudnessTarget, Upmixer};
use padmix::service::{self, AppState, ServiceConfig};
use padmix::upmix::rfr;
use padmix::{AudioBuffer, ChannelLabel, DialSetting, Error, Mode, PipelineConfig, SampleFormat};

#[derive(Parser)]
#[command(name = "padmix", version, about = "Primary-ambient decomposition and stereo-to-quad up-mixing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a stereo file into primary/ambient or left/right/center stems.
    Decompose {
        input: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        /// Output directory (default: next to the input).
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Render one dial position as a loudness-normalized quad or 5.1 file.
    Upmix {
        input: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=30))]
        dial: u8,
        #[arg(long, value_enum, default_value_t = Layout::Quad)]
        layout: Layout,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        /// LUFS value or "match-input".
        #[arg(long, value_parser = parse_target, allow_negative_numbers = true)]
        target_lufs: Option<LoudnessTarget>,
        #[command(flatten)]
        common: Common,
    },
    /// Rear-to-front ratio of a quad (FL FR SL SR) or 5.1 file.
    Rfr {
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Integrated loudness of a file.
    Loudness {
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Start the local audition service.
    Serve {
        #[arg(long)]
        items: PathBuf,
        #[arg(long, env = service::PORT_ENV, default_value_t = service::DEFAULT_PORT)]
        port: u16,
        /// Session log (default: <items>/sessions.jsonl).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Render cache budget in MiB.
        #[arg(long, default_value_t = 512)]
        cache_mb: usize,
        #[arg(long, value_parser = parse_target, allow_negative_numbers = true)]
        target_lufs: Option<LoudnessTarget>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON pipeline configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    frame: Option<usize>,
    #[arg(long)]
    hop: Option<usize>,
    #[arg(long)]
    cov_smooth: Option<usize>,
    #[arg(long)]
    unmix_smooth: Option<usize>,
    /// Sample format of written files.
    #[arg(long, value_parser = parse_format, default_value = "float32")]
    format: SampleFormat,
    /// Print metrics as one JSON record.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    Quad,
    #[value(name = "5.1")]
    FivePointOne,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_target(s: &str) -> Result<LoudnessTarget, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> Result<SampleFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn pipeline(&self) -> padmix::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(frame) = self.frame {
            cfg.stft.frame_len = frame;
            if self.hop.is_none() {
                cfg.stft.hop = frame / 2;
            }
        }
        if let Some(hop) = self.hop {
            cfg.stft.hop = hop;
        }
        if let Some(n) = self.cov_smooth {
            cfg.cov_smooth_frames = n;
        }
        if let Some(n) = self.unmix_smooth {
            cfg.unmix_smooth_frames = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// JSON has no infinities; they are written as the strings "-inf" and "inf".
fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        Value::Null
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn db(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.2}")
    } else {
        format!("{v}")
    }
}

fn stem_path(dir: &Path, input: &Path, suffix: &str) -> padmix::Result<PathBuf> {
    let name = input
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Config(format!("bad input name {}", input.display())))?;
    Ok(dir.join(format!("{name}.{suffix}.wav")))
}

fn output_dir(output: Option<PathBuf>, input: &Path) -> padmix::Result<PathBuf> {
    let dir = output.unwrap_or_else(|| {
        input
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn energy_db(samples: &[f64]) -> f64 {
    10.0 * samples.iter().map(|s| s * s).sum::<f64>().log10()
}

fn decompose(
    input: PathBuf,
    mode: Option<Mode>,
    output: Option<PathBuf>,
    common: Common,
) -> padmix::Result<()> {
    let mut cfg = common.pipeline()?;
    if let Some(mode) = mode {
        cfg.mode = mode;
    }
    let x = read_wav(&input)?;
    x.require_stereo()?;
    let dir = output_dir(output, &input)?;
    let rate = x.sample_rate();

    let mut stems: Vec<(&str, AudioBuffer)> = Vec::new();
    match cfg.mode {
        Mode::Pad => {
            let pad = decompose_pad(&x, &cfg)?;
            stems.push(("primary", pad.primary));
            stems.push(("ambient", pad.ambient));
        }
        Mode::Ce => {
            let ce = decompose_ce(&x, &cfg)?;
            let silent = vec![0.0; x.len()];
            stems.push(("left", AudioBuffer::stereo(rate, ce.left, silent.clone())?));
            stems.push(("right", AudioBuffer::stereo(rate, silent, ce.right)?));
            stems.push(("center", AudioBuffer::new(rate, vec![ce.center])?));
        }
    }

    let input_energy = x.energy();
    let mut records = Vec::new();
    for (name, buf) in &stems {
        let path = stem_path(&dir, &input, name)?;
        write_wav(&path, buf, common.format)?;
        let e = buf.energy();
        let rel = 10.0 * (e / input_energy).log10();
        let total: Vec<f64> = buf.channels().concat();
        if common.json {
            records.push(json!({
                "stem": name,
                "path": path.display().to_string(),
                "energy_db": number(energy_db(&total)),
                "relative_db": number(rel),
            }));
        } else {
            println!("{name}\t{}\tenergy {} dB\trelative {} dB", path.display(), db(energy_db(&total)), db(rel));
        }
    }
    if common.json {
        println!("{}", json!({ "mode": cfg.mode, "stems": records }));
    }
    Ok(())
}

fn metrics(rfr_db: f64, loudness: Option<f64>, gain: f64, dial: usize) -> Value {
    json!({
        "rfr_db": number(rfr_db),
        "loudness_lufs": loudness.map_or(Value::Null, number),
        "norm_gain_db": number(gain),
        "dial_index": dial,
    })
}

fn upmix(
    input: PathBuf,
    dial: u8,
    layout: Layout,
    output: PathBuf,
    target: Option<LoudnessTarget>,
    common: Common,
) -> padmix::Result<()> {
    let mut cfg = common.pipeline()?;
    if let Some(t) = target {
        cfg.loudness_target = t;
    }
    let dial = DialSetting::new(dial as usize)?;
    let x = read_wav(&input)?;
    x.require_stereo()?;
    let upmixer = Upmixer::new(x, &cfg)?;
    let quad = upmixer.render(dial, cfg.loudness_target)?;
    let audio = match layout {
        Layout::Quad => quad.audio.clone(),
        Layout::FivePointOne => quad.to_5_1(),
    };
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_wav(&output, &audio, common.format)?;

    if common.json {
        println!("{}", metrics(quad.rfr_db, quad.loudness_lufs, quad.norm_gain_db, dial.index));
    } else {
        println!("dial_index\t{}", dial.index);
        println!("rfr_db\t{}", db(quad.rfr_db));
        println!("loudness_lufs\t{}", quad.loudness_lufs.map_or("n/a".into(), db));
        println!("norm_gain_db\t{}", db(quad.norm_gain_db));
    }
    Ok(())
}

/// Select FL, FR, SL, SR from a quad or 5.1 file.
fn quad_of(buf: AudioBuffer) -> padmix::Result<AudioBuffer> {
    use ChannelLabel::*;
    let pick = |labels: [ChannelLabel; 4]| -> Option<Vec<Vec<f64>>> {
        labels
            .iter()
            .map(|l| {
                buf.layout()
                    .iter()
                    .position(|x| x == l)
                    .map(|i| buf.channel(i).to_vec())
            })
            .collect()
    };
    match buf.num_channels() {
        4 | 6 => {
            let channels = pick([FL, FR, SL, SR])
                .ok_or_else(|| Error::InvalidBuffer("missing surround channels".into()))?;
            AudioBuffer::new(buf.sample_rate(), channels)
        }
        n => Err(Error::InvalidBuffer(format!(
            "RFR needs a 4- or 6-channel file, got {n} channels"
        ))),
    }
}

fn measure_rfr(input: PathBuf, as_json: bool) -> padmix::Result<()> {
    let value = rfr(&quad_of(read_wav(&input)?)?)?;
    if as_json {
        println!("{}", json!({ "rfr_db": number(value) }));
    } else {
        println!("rfr_db\t{}", db(value));
    }
    Ok(())
}

fn measure_loudness(input: PathBuf, as_json: bool) -> padmix::Result<()> {
    let value = integrated_loudness(&read_wav(&input)?)?;
    if as_json {
        println!("{}", json!({ "loudness_lufs": number(value) }));
    } else {
        println!("loudness_lufs\t{}", db(value));
    }
    Ok(())
}

fn serve(
    items: PathBuf,
    port: u16,
    log: Option<PathBuf>,
    cache_mb: usize,
    target: Option<LoudnessTarget>,
    common: Common,
) -> padmix::Result<()> {
    let mut pipeline = common.pipeline()?;
    if let Some(t) = target {
        pipeline.loudness_target = t;
    }
    let config = ServiceConfig {
        items_dir: items,
        log_path: log,
        pipeline,
        cache_budget_bytes: cache_mb << 20,
    };
    let state = Arc::new(AppState::new(&config)?);
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(service::run(state, addr))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decompose { input, mode, output, common } => decompose(input, mode, output, common),
        Command::Upmix { input, dial, layout, output, target_lufs, common } => {
            upmix(input, dial, layout, output, target_lufs, common)
        }
        Command::Rfr { input, json } => measure_rfr(input, json),
        Command::Loudness { input, json } => measure_loudness(input, json),
        Command::Serve { items, port, log, cache_mb, target_lufs, common } => {
            serve(items, port, log, cache_mb, target_lufs, common)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
