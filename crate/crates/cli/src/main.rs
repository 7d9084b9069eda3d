use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use emotemesh::metrics::format_report;
use emotemesh::sample::{sample_face, sample_mesh, SAMPLE_MESH_ID};
use emotemesh::table::ExpressionKind;
use emotemesh::{
    analyze, bake_morph_targets, sample_timeline, ExpressionTable, IdleConfig, Mesh, RatingMatrix, RatingScale, Rig,
    Script, TimelineOptions,
};
use emotemesh_service::{serve, Assets, Payload, ServeConfig, SessionConfig};

/// Stands in for a rig path wherever one is accepted.
const SAMPLE_RIG: &str = "sample";

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) | CliError::Io { .. } => 2,
        }
    }
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

#[derive(Parser)]
#[command(name = "emotemesh", version, about = "Affective facial animation from feature displacement tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a rig against its mesh.
    Validate {
        /// Rig document, or `sample` for the bundled face.
        #[arg(long, default_value = SAMPLE_RIG)]
        rig: String,
        /// OBJ mesh; defaults to the rig's mesh reference.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Print or audit the expression table.
    Table {
        #[arg(value_enum)]
        action: TableAction,
        #[arg(long, env = "EMOTEMESH_TABLE")]
        table: Option<PathBuf>,
        /// Dump the table document instead of the text listing.
        #[arg(long)]
        json: bool,
    },
    /// Sample an event script into frames.
    Animate {
        script: PathBuf,
        #[arg(long, env = "EMOTEMESH_TABLE")]
        table: Option<PathBuf>,
        /// Rig document, or `sample`; required for obj output.
        #[arg(long)]
        rig: Option<String>,
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Overrides the script's frame rate.
        #[arg(long)]
        fps: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Jsonl)]
        format: Format,
        /// Seed for the idle layer.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scales every trigger intensity.
        #[arg(long, default_value_t = 1.0)]
        intensity_mult: f64,
        /// Overrides the script's mood time constant (seconds).
        #[arg(long)]
        tau: Option<f64>,
        /// Adds idle blinking.
        #[arg(long)]
        idle: bool,
        /// Output file (jsonl, csv) or directory (obj). Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bake per-label morph targets for a rig.
    Bake {
        #[arg(long, default_value = SAMPLE_RIG)]
        rig: String,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, env = "EMOTEMESH_TABLE")]
        table: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recognition quality from a ratings CSV (subject,shown,rated,rating).
    Quality {
        ratings: PathBuf,
        /// Ratings are on a 0..4 Likert scale.
        #[arg(long)]
        likert: bool,
        #[arg(long)]
        json: bool,
    },
    /// Write the bundled sample mesh and rig.
    Sample {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the live session server.
    Serve {
        #[arg(long, default_value = SAMPLE_RIG)]
        rig: String,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, env = "EMOTEMESH_TABLE")]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        /// Newline-delimited JSON over plain TCP.
        #[arg(long)]
        tcp_port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long)]
        tau: Option<f64>,
        /// One command log per session is written here.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TableAction {
    Dump,
    Audit,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
    Obj,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load_table(path: Option<&Path>) -> Result<ExpressionTable, CliError> {
    match path {
        Some(p) => ExpressionTable::from_json(&read(p)?).map_err(|e| CliError::Domain(format!("{}: {e}", p.display()))),
        None => Ok(ExpressionTable::builtin()),
    }
}

/// Loads a rig and the mesh it deforms.
fn load_rig(rig: &str, mesh: Option<&Path>) -> Result<(Mesh, Rig), CliError> {
    if rig == SAMPLE_RIG {
        let (sample_mesh, rig) = sample_face();
        let mesh = match mesh {
            Some(p) => load_mesh(p)?,
            None => sample_mesh,
        };
        return Ok((mesh, rig));
    }
    let path = Path::new(rig);
    let rig = Rig::from_json(&read(path)?).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
    let mesh = match mesh {
        Some(p) => load_mesh(p)?,
        None if rig.mesh_ref == SAMPLE_MESH_ID => sample_mesh(),
        None => {
            let beside = path.parent().unwrap_or(Path::new(".")).join(&rig.mesh_ref);
            if !beside.is_file() {
                return Err(CliError::Usage(format!(
                    "rig refers to mesh `{}`; pass --mesh",
                    rig.mesh_ref
                )));
            }
            load_mesh(&beside)?
        }
    };
    Ok((mesh, rig))
}

fn load_mesh(path: &Path) -> Result<Mesh, CliError> {
    Mesh::from_obj(&read(path)?).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn validate(rig: &str, mesh: Option<&Path>) -> Result<String, CliError> {
    let (mesh, rig) = load_rig(rig, mesh)?;
    rig.check_mesh(&mesh).map_err(domain)?;
    Ok(format!("OK: {} anchors, {} weighted vertices\n", rig.anchors().len(), rig.weighted_vertex_count()))
}

fn fmt_vec(v: emotemesh::Zxy) -> String {
    format!("[{}, {}, {}]", v.z, v.x, v.y)
}

fn table(action: TableAction, path: Option<&Path>, json: bool) -> Result<String, CliError> {
    let table = load_table(path)?;
    let mut out = String::new();
    match action {
        TableAction::Dump if json => {
            out = table.to_json();
            out.push('\n');
        }
        TableAction::Dump => {
            for label in table.labels() {
                let set = table.get(label).expect("listed label");
                match &set.kind {
                    ExpressionKind::Basic => out.push_str(&format!("{label} (basic)\n")),
                    ExpressionKind::Blend(parts) => {
                        let parts: Vec<String> = parts.iter().map(|(l, w)| format!("{w} {l}")).collect();
                        out.push_str(&format!("{label} (blend: {})\n", parts.join(" + ")));
                    }
                }
                for (feature, v) in set.vectors.iter() {
                    out.push_str(&format!("  {:<15} {}\n", feature.to_string(), fmt_vec(v)));
                }
            }
        }
        TableAction::Audit => {
            let asym = table.symmetry_audit();
            for a in &asym {
                out.push_str(&format!(
                    "asymmetric: {} {}/{} {} vs {}\n",
                    a.expression,
                    a.left,
                    a.right,
                    fmt_vec(a.left_value),
                    fmt_vec(a.right_value)
                ));
            }
            let warnings = table.magnitude_warnings();
            for w in &warnings {
                out.push_str(&format!("large: {} {} {} m\n", w.label, w.feature, w.value));
            }
            out.push_str(&format!("{} asymmetric pairs, {} magnitude warnings\n", asym.len(), warnings.len()));
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn animate(
    script: &Path,
    table: Option<&Path>,
    rig: Option<&str>,
    mesh: Option<&Path>,
    fps: Option<f64>,
    format: Format,
    seed: u64,
    intensity_mult: f64,
    tau: Option<f64>,
    idle: bool,
    out: Option<&Path>,
) -> Result<String, CliError> {
    if format == Format::Obj && rig.is_none() {
        return Err(CliError::Usage("--format obj needs --rig".into()));
    }
    if format == Format::Obj && out.is_none() {
        return Err(CliError::Usage("--format obj needs --out <dir>".into()));
    }
    let mut script = Script::from_json(&read(script)?).map_err(domain)?;
    if let Some(tau) = tau {
        script.tau_s = tau;
    }
    let table = Arc::new(load_table(table)?);
    let options = TimelineOptions {
        fps,
        intensity_mult,
        seed,
        idle: if idle { IdleConfig::enabled() } else { IdleConfig::default() },
        ..TimelineOptions::default()
    };
    let frames = sample_timeline(&script, table, &options).map_err(domain)?;
    let text = match format {
        Format::Jsonl => frames.to_jsonl(),
        Format::Csv => frames.to_csv(),
        Format::Obj => {
            let (mesh, rig) = load_rig(rig.expect("checked above"), mesh)?;
            let meshes = frames.to_meshes(&mesh, &rig).map_err(domain)?;
            let dir = out.expect("checked above");
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
            for (i, m) in meshes.iter().enumerate() {
                write(&dir.join(format!("frame_{i:05}.obj")), &m.to_obj())?;
            }
            return Ok(format!("wrote {} frames to {}\n", meshes.len(), dir.display()));
        }
    };
    match out {
        Some(p) => {
            write(p, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn bake(rig: &str, mesh: Option<&Path>, table: Option<&Path>, out: &Path) -> Result<String, CliError> {
    let (mesh, rig) = load_rig(rig, mesh)?;
    let table = load_table(table)?;
    let set = bake_morph_targets(&rig, &mesh, &table).map_err(domain)?;
    write(out, &set.to_json())?;
    Ok(format!("baked {} targets to {}\n", set.targets.len(), out.display()))
}

fn quality(ratings: &Path, likert: bool, json: bool) -> Result<String, CliError> {
    let scale = if likert { RatingScale::Likert } else { RatingScale::Normalized };
    let matrix = RatingMatrix::from_csv(&read(ratings)?, scale).map_err(domain)?;
    let profiles = analyze(&matrix).map_err(domain)?;
    if json {
        let rows: Vec<_> = profiles.values().collect();
        Ok(serde_json::to_string_pretty(&rows).expect("profiles serialize") + "\n")
    } else {
        Ok(format_report(&profiles))
    }
}

fn sample(out: &Path) -> Result<String, CliError> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    let (mesh, rig) = sample_face();
    let mut rig = rig;
    rig.mesh_ref = "sample-face.obj".into();
    write(&out.join("sample-face.obj"), &mesh.to_obj())?;
    write(&out.join("sample-face.rig.json"), &rig.to_json())?;
    Ok(format!("wrote sample-face.obj and sample-face.rig.json to {}\n", out.display()))
}

#[allow(clippy::too_many_arguments)]
fn serve_cmd(
    rig: &str,
    mesh: Option<&Path>,
    table: Option<&Path>,
    host: &str,
    port: u16,
    tcp_port: Option<u16>,
    fps: f64,
    tau: Option<f64>,
    log_dir: Option<PathBuf>,
) -> Result<String, CliError> {
    let table = Arc::new(load_table(table)?);
    let (mesh, rig) = load_rig(rig, mesh)?;
    let assets = Assets::new(mesh, rig, &table).map_err(domain)?;
    let mut session = SessionConfig::new(table);
    session.fps = fps;
    session.assets = Some(Arc::new(assets));
    session.payload = Payload::Intensities;
    if let Some(tau) = tau {
        session.tau_s = tau;
    }
    let addr = |p: u16| {
        format!("{host}:{p}").parse().map_err(|e| CliError::Usage(format!("bad address {host}:{p}: {e}")))
    };
    let config = ServeConfig { session, ws_addr: addr(port)?, tcp_addr: tcp_port.map(addr).transpose()?, log_dir };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Domain(e.to_string()))?;
    runtime
        .block_on(serve(
            config,
            |b| {
                println!("listening ws://{}", b.ws);
                if let Some(t) = b.tcp {
                    println!("listening tcp://{t}");
                }
            },
            async {
                let _ = tokio::signal::ctrl_c().await;
            },
        ))
        .map_err(|e| match e {
            emotemesh_service::SessionError::Io(source) => CliError::Io { path: PathBuf::from(host), source },
            other => domain(other),
        })?;
    Ok(String::new())
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Validate { rig, mesh } => validate(&rig, mesh.as_deref()),
        Command::Table { action, table: path, json } => table(action, path.as_deref(), json),
        Command::Animate { script, table, rig, mesh, fps, format, seed, intensity_mult, tau, idle, out } => animate(
            &script,
            table.as_deref(),
            rig.as_deref(),
            mesh.as_deref(),
            fps,
            format,
            seed,
            intensity_mult,
            tau,
            idle,
            out.as_deref(),
        ),
        Command::Bake { rig, mesh, table, out } => bake(&rig, mesh.as_deref(), table.as_deref(), &out),
        Command::Quality { ratings, likert, json } => quality(&ratings, likert, json),
        Command::Sample { out } => sample(&out),
        Command::Serve { rig, mesh, table, port, tcp_port, host, fps, tau, log_dir } => serve_cmd(
            &rig,
            mesh.as_deref(),
            table.as_deref(),
            &host,
            port,
            tcp_port,
            fps,
            tau,
            log_dir,
        ),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
