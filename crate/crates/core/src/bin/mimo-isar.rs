use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mimo_isar::config::{parse_config, FrameSpec, ScenarioConfig};
use mimo_isar::metrics::Algorithm;
use mimo_isar::pipeline::{compensate_cube, image_cube, run_pipeline};
use mimo_isar::synth::synthesize_sequence;
use mimo_isar::{cubefile, export, Error, Result};

#[derive(Parser)]
#[command(
    name = "mimo-isar",
    version,
    about = "TDM-MIMO FMCW ISAR simulation and motion compensation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file; the shipped U-turn scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fine motion compensation (none, em, ccr, pga, or a comma list).
    #[arg(long)]
    algo: Option<String>,
    /// Frames as indices or times, e.g. `81,84` or `8.1s,8.4s`.
    #[arg(long)]
    frames: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize target frames and write them as cube files.
    Simulate(Common),
    /// Motion-compensate every channel of a cube file.
    Mocomp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Range-Doppler images (SISO and integrated) of a cube file.
    Image {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the comparison and print the metrics report.
    Metrics(Common),
    /// Full pipeline with all artifacts written to `--out`.
    Run(Common),
    /// Print the binary and text file layouts.
    Formats,
}

fn config_error(key: &str, reason: String) -> Error {
    Error::Config(mimo_isar::config::ConfigError {
        line: None,
        key: key.into(),
        kind: mimo_isar::config::ConfigErrorKind::Invalid(reason),
    })
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            parse_config(&text)?
        }
        None => ScenarioConfig::default_uturn(),
    };
    if let Some(a) = &common.algo {
        let algos: Option<Vec<Algorithm>> = a.split(',').map(|s| Algorithm::parse(s.trim())).collect();
        let algos = algos
            .filter(|v| v.iter().all(|a| *a != Algorithm::Coarse))
            .ok_or_else(|| config_error("--algo", format!("expected none, em, ccr or pga, got `{a}`")))?;
        cfg.pipeline.algorithms = algos.into_iter().filter(|a| *a != Algorithm::None).collect();
    }
    if let Some(f) = &common.frames {
        cfg.pipeline.frames =
            FrameSpec::parse_list(f).ok_or_else(|| config_error("--frames", format!("cannot parse `{f}`")))?;
    }
    if let Some(s) = common.seed {
        cfg.pipeline.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

/// The single algorithm for commands that apply one.
fn single_algorithm(common: &Common, cfg: &ScenarioConfig) -> Result<Algorithm> {
    match &common.algo {
        Some(a) => Algorithm::parse(a.trim())
            .filter(|a| *a != Algorithm::Coarse)
            .ok_or_else(|| config_error("--algo", format!("expected one of none, em, ccr, pga, got `{a}`"))),
        None => Ok(cfg.pipeline.algorithms.first().copied().unwrap_or(Algorithm::None)),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "cube".into())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Formats => {
            print!("{}", cubefile::describe_formats());
            Ok(())
        }
        Command::Simulate(common) => {
            let cfg = load(&common)?;
            let scene = cfg.build_scene()?;
            let cubes = synthesize_sequence(&scene, &cfg.radar, &cfg.frame_indices(), &cfg.pipeline.synth)?;
            create_dir(&cfg.output.dir)?;
            for c in &cubes {
                let path = cfg.output.dir.join(format!("target_f{:04}.cube", c.frame_index));
                cubefile::write_cube(&path, c)?;
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Mocomp { common, input } => {
            let cfg = load(&common)?;
            let algorithm = single_algorithm(&common, &cfg)?;
            let cube = cubefile::read_cube(&input, &cfg.radar)?;
            let (out, log) = compensate_cube(&cube, algorithm, &cfg)?;
            create_dir(&cfg.output.dir)?;
            let path = cfg
                .output
                .dir
                .join(format!("{}_{}.cube", stem_of(&input), algorithm.id()));
            cubefile::write_cube(&path, &out)?;
            print!("{log}");
            println!("{}", path.display());
            Ok(())
        }
        Command::Image { common, input } => {
            let cfg = load(&common)?;
            let cube = cubefile::read_cube(&input, &cfg.radar)?;
            let (siso, mimo) = image_cube(&cube, cfg.pipeline.window)?;
            create_dir(&cfg.output.dir)?;
            let stem = stem_of(&input);
            for (tag, img) in [("siso", &siso), ("mimo", &mimo)] {
                let files = export::write_image(
                    &cfg.output.dir,
                    &format!("{stem}_{tag}"),
                    img,
                    &cfg.output.formats,
                    cfg.output.db_floor,
                )?;
                for f in files {
                    println!("{}", f.display());
                }
            }
            Ok(())
        }
        Command::Metrics(common) => {
            let cfg = load(&common)?;
            let out = run_pipeline(&cfg, None)?;
            print!("{}", out.report.render_text());
            if let Some(dir) = &common.out {
                create_dir(dir)?;
                for (name, text) in [
                    ("report.txt", out.report.render_text()),
                    ("report.csv", out.report.render_csv()),
                ] {
                    let path = dir.join(name);
                    std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
                }
            }
            Ok(())
        }
        Command::Run(common) => {
            let cfg = load(&common)?;
            let out = run_pipeline(&cfg, Some(&cfg.output.dir))?;
            print!("{}", out.report.render_text());
            eprintln!("wrote {} files under {}", out.files.len(), cfg.output.dir.display());
            Ok(())
        }
    }
}

fn threads_of(command: &Command) -> usize {
    match command {
        Command::Simulate(c) | Command::Metrics(c) | Command::Run(c) => c.threads,
        Command::Mocomp { common, .. } | Command::Image { common, .. } => common.threads,
        Command::Formats => 0,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = threads_of(&cli.command);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(4);
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
