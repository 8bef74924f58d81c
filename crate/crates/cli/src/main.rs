use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::Ordering;

use clap::{Args, Parser, Subcommand, ValueEnum};
use somaphone::breath::{read_track, write_track};
use somaphone::dsp::WavFormat;
use somaphone::osc::GatewayConfig;
use somaphone::runtime::{
    calibrate_from_track, export_notation, load_for_notation, offline_render, perform, render_session, scene_calibration,
    simulate_track, LiveOptions, LiveSource, RenderInput, RuntimeError, SceneConfig, SessionLog,
};

/// Breath-pillow performance system: live performance, offline rendering,
/// breath simulation, notation and calibration.
#[derive(Debug, Parser)]
#[command(name = "somaphone", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a live performance with the console bridge and optional OSC.
    Perform(PerformArgs),
    /// Render a breath track or a recorded session to WAV.
    Render(RenderArgs),
    /// Generate a breath track from the simulator.
    Simulate(SimulateArgs),
    /// Draw a session (or breath CSV) as SVG notation.
    Notate(NotateArgs),
    /// Print the calibration map a scene would use, as JSON.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
struct SceneArg {
    /// Scene file (JSON). Built-in defaults when omitted.
    #[arg(env = "SOMAPHONE_SCENE")]
    scene: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Source {
    Sim,
    Osc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    F32,
    I16,
}

#[derive(Debug, Args)]
struct PerformArgs {
    #[command(flatten)]
    scene: SceneArg,
    /// UDP port for inbound OSC.
    #[arg(long, value_name = "PORT")]
    osc_in: Option<u16>,
    /// Destination for outbound OSC telemetry.
    #[arg(long, value_name = "HOST:PORT")]
    osc_out: Option<SocketAddr>,
    /// Disable OSC in both directions.
    #[arg(long, conflicts_with_all = ["osc_in", "osc_out"])]
    no_osc: bool,
    /// WebSocket port for the performer console.
    #[arg(long, value_name = "PORT")]
    ws: Option<u16>,
    /// Disable the console bridge.
    #[arg(long, conflicts_with = "ws")]
    no_ws: bool,
    /// Where pressure comes from.
    #[arg(long, value_enum, default_value = "sim")]
    source: Source,
    /// Session log directory.
    #[arg(long, value_name = "DIR")]
    session: Option<PathBuf>,
    /// Also write the performance audio to this WAV.
    #[arg(long, value_name = "FILE")]
    wav: Option<PathBuf>,
    /// Seed for the first session; the scene seed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Stop after this many seconds.
    #[arg(long, value_name = "SECONDS")]
    duration: Option<f64>,
    /// Wait for a transport start command instead of starting at once.
    #[arg(long)]
    wait: bool,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    scene: SceneArg,
    /// Breath track (CSV `t,p1,p2,p3,p4`).
    #[arg(long, value_name = "CSV", required_unless_present = "session", conflicts_with = "session")]
    breath: Option<PathBuf>,
    /// Replay a recorded session directory.
    #[arg(long, value_name = "DIR")]
    session: Option<PathBuf>,
    /// Seed; the scene seed when omitted. Sessions use their recorded seed.
    #[arg(long, conflicts_with = "session")]
    seed: Option<u64>,
    /// Output WAV.
    #[arg(short, long, value_name = "FILE")]
    out: PathBuf,
    /// Session log directory; `<out>.session` when omitted.
    #[arg(long, value_name = "DIR")]
    log: Option<PathBuf>,
    /// Sample format; the scene's when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// 1 or 2; mono is duplicated to both channels.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..=2))]
    channels: Option<u16>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scene: SceneArg,
    /// Seconds to simulate; the scene length when omitted.
    #[arg(long, value_name = "SECONDS")]
    duration: Option<f64>,
    /// Output CSV; stdout when omitted.
    #[arg(short, long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct NotateArgs {
    /// Session directory or breath CSV.
    session: PathBuf,
    /// Output SVG.
    #[arg(short, long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    scene: SceneArg,
    /// Calibrate from this breath track instead of a simulated sweep.
    #[arg(long, value_name = "CSV")]
    breath: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(RuntimeError),
}

impl From<RuntimeError> for Failure {
    fn from(e: RuntimeError) -> Self {
        Self::Runtime(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Perform(a) => cmd_perform(a),
        Command::Render(a) => cmd_render(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Notate(a) => cmd_notate(a),
        Command::Calibrate(a) => cmd_calibrate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_scene(arg: &SceneArg) -> Result<SceneConfig, RuntimeError> {
    match &arg.scene {
        Some(path) => Ok(SceneConfig::load(path)?),
        None => {
            let scene = SceneConfig::default();
            scene.validate()?;
            Ok(scene)
        }
    }
}

fn read_csv(path: &Path) -> Result<Vec<somaphone::PressureFrame>, RuntimeError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(read_track(std::io::BufReader::new(file))?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RuntimeError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> RuntimeError {
    RuntimeError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn cmd_perform(a: PerformArgs) -> Result<(), Failure> {
    if a.no_osc && matches!(a.source, Source::Osc) {
        return Err(Failure::Usage("--source osc needs OSC; drop --no-osc".into()));
    }
    let scene = load_scene(&a.scene)?;
    let mut opts = LiveOptions::new(a.seed.unwrap_or(scene.seed));
    opts.source = match a.source {
        Source::Sim => LiveSource::Sim,
        Source::Osc => LiveSource::Osc,
    };
    if !a.no_osc && (scene.io.osc_enabled || a.osc_in.is_some() || a.osc_out.is_some()) {
        opts.osc = Some(GatewayConfig {
            listen: Some(SocketAddr::from(([0, 0, 0, 0], a.osc_in.unwrap_or(scene.io.osc_in_port)))),
            send_to: Some(a.osc_out.unwrap_or(scene.io.osc_out)),
            control_rate_hz: scene.sim.control_rate_hz,
        });
    }
    if !a.no_ws {
        opts.websocket = Some(SocketAddr::from(([0, 0, 0, 0], a.ws.unwrap_or(scene.io.websocket_port))));
    }
    let stamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    opts.session_dir = Some(a.session.unwrap_or_else(|| PathBuf::from(format!("session-{stamp}"))));
    opts.wav_out = a.wav;
    opts.max_duration_s = a.duration;
    opts.autostart = !a.wait;
    opts.exit_on_end = !a.wait;

    let performance = perform(&scene, opts)?;
    if let Some(addr) = performance.websocket_addr() {
        log::info!("console bridge on ws://{addr}");
    }
    if let Some(addr) = performance.osc_addr() {
        log::info!("listening for OSC on udp://{addr}");
    }
    let stop = performance.stop_flag();
    if let Err(e) = ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst)) {
        log::warn!("cannot install Ctrl-C handler: {e}");
    }
    let report = performance.wait()?;
    for (i, s) in report.sessions.iter().enumerate() {
        println!(
            "session {}: {:.2} s, {} frames, {} events, {} overruns, {} late blocks",
            i + 1,
            s.log.meta.duration_s(),
            s.log.frames.len(),
            s.log.events.len(),
            s.overruns,
            s.log.meta.late_frames
        );
    }
    if report.osc_dropped > 0 {
        println!("{} malformed OSC packets dropped", report.osc_dropped);
    }
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<(), Failure> {
    let mut scene = load_scene(&a.scene)?;
    if let Some(f) = a.format {
        scene.audio.wav_format = match f {
            Format::F32 => WavFormat::F32,
            Format::I16 => WavFormat::I16,
        };
    }
    if let Some(c) = a.channels {
        scene.audio.channels = c;
    }
    let output = match (&a.breath, &a.session) {
        (_, Some(dir)) => render_session(&scene, &SessionLog::read_dir(dir)?)?,
        (Some(csv), None) => {
            let frames = read_csv(csv)?;
            offline_render(&scene, RenderInput::new(&frames, a.seed.unwrap_or(scene.seed)))?
        }
        (None, None) => return Err(Failure::Usage("one of --breath or --session is required".into())),
    };
    write_file(&a.out, &output.wav)?;
    let log_dir = a.log.unwrap_or_else(|| a.out.with_extension("session"));
    output.log.write_dir(&log_dir)?;
    println!(
        "wrote {} ({} samples, {:.2} s) and {}",
        a.out.display(),
        output.audio.len(),
        output.audio.len() as f64 / scene.audio.sample_rate as f64,
        log_dir.display()
    );
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let scene = load_scene(&a.scene)?;
    let duration = a.duration.unwrap_or_else(|| scene.total_duration_s());
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Failure::Usage(format!("--duration must be a positive number of seconds, got {duration}")));
    }
    let frames = simulate_track(&scene, a.seed.unwrap_or(scene.seed), duration)?;
    let mut csv = Vec::with_capacity(frames.len() * 64);
    write_track(&mut csv, &frames).map_err(RuntimeError::from)?;
    match &a.out {
        Some(path) => write_file(path, &csv)?,
        None => std::io::stdout().write_all(&csv).map_err(|e| io_err(Path::new("<stdout>"), e))?,
    }
    Ok(())
}

fn cmd_notate(a: NotateArgs) -> Result<(), Failure> {
    let log = load_for_notation(&a.session)?;
    let svg = export_notation(&log)?;
    write_file(&a.out, svg.as_bytes())?;
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<(), Failure> {
    let scene = load_scene(&a.scene)?;
    let map = match &a.breath {
        Some(csv) => calibrate_from_track(&scene, &read_csv(csv)?)?,
        None => scene_calibration(&scene)?,
    };
    let json = serde_json::to_string_pretty(&map).map_err(|e| RuntimeError::Session(e.to_string()))?;
    println!("{json}");
    Ok(())
}
