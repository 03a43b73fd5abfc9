use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sshhub::analysis::{dominant_configurations, parse_state_list, u_grid};
use sshhub::basis::FockBasis;
use sshhub::config::RunConfig;
use sshhub::pipeline::{self, Source};
use sshhub::spectrum::write_trajectory_csv;
use sshhub::{Error, Result};

/// High-harmonic generation in half-filled SSH-Hubbard chains by exact
/// diagonalization.
#[derive(Parser)]
#[command(name = "sshhub", version)]
struct Cli {
    /// Configuration file with [chain] [pulse] [solver] [propagation] [output] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for matrix-vector products; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(flatten)]
    keys: KeyOverrides,

    #[command(subcommand)]
    command: Command,
}

/// One flag per configuration key; each overrides the file.
#[derive(Args)]
struct KeyOverrides {
    #[arg(long = "N", global = true, value_name = "SITES")]
    n: Option<String>,
    #[arg(long, global = true, value_name = "topological|trivial")]
    phase: Option<String>,
    #[arg(long, global = true)]
    v: Option<String>,
    #[arg(long, global = true)]
    w: Option<String>,
    #[arg(long = "U", global = true)]
    u: Option<String>,
    #[arg(long, global = true)]
    omega: Option<String>,
    #[arg(long = "E0_over_omega", global = true)]
    e0_over_omega: Option<String>,
    #[arg(long = "n_cyc", global = true)]
    n_cyc: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long = "M", global = true, value_name = "SAMPLES")]
    m: Option<String>,
    #[arg(long = "ode_tol", global = true)]
    ode_tol: Option<String>,
    #[arg(long, global = true)]
    directory: Option<String>,
    #[arg(long, global = true)]
    formats: Option<String>,
}

impl KeyOverrides {
    fn pairs(&self) -> Vec<(String, String)> {
        [
            ("N", &self.n),
            ("phase", &self.phase),
            ("v", &self.v),
            ("w", &self.w),
            ("U", &self.u),
            ("omega", &self.omega),
            ("E0_over_omega", &self.e0_over_omega),
            ("n_cyc", &self.n_cyc),
            ("k", &self.k),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("M", &self.m),
            ("ode_tol", &self.ode_tol),
            ("directory", &self.directory),
            ("formats", &self.formats),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the sector and composite dimensions as JSON.
    BasisInfo,
    /// Diagonalize and write the checkpoint with its JSON sidecar.
    Diagonalize {
        /// Checkpoint location; defaults to the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Propagate over the pulse and write the harmonic spectrum CSV.
    Spectrum {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        selection: Selection,
        /// Also write the trajectory x(t).
        #[arg(long)]
        trajectory: bool,
        /// Output CSV; defaults to the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the level scheme (states and allowed transitions) as JSON.
    Levels {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        selection: Selection,
    },
    /// Few-level model: level scheme and spectrum of the kept states.
    Reduce {
        #[command(flatten)]
        input: Input,
        /// Kept state ids, comma separated; must include 0.
        #[arg(long)]
        keep: String,
    },
    /// Dominant configurations of one eigenstate as a text table.
    Configs {
        #[command(flatten)]
        input: Input,
        /// Eigenstate index.
        #[arg(long, default_value_t = 0)]
        state: usize,
        /// Number of configurations to list; inversion partners share a row.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Spectra and level overlays over a grid of U values.
    Uscan {
        #[arg(long = "from", default_value_t = 0.0)]
        from: f64,
        #[arg(long = "to", default_value_t = 0.1)]
        to: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Explicit comma-separated U values instead of the range.
        #[arg(long)]
        values: Option<String>,
    },
}

#[derive(Args)]
struct Input {
    /// Existing checkpoint; it must match the configuration.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct Selection {
    /// Use only the lowest STATES eigenstates.
    #[arg(long)]
    states: Option<usize>,
    /// Then keep only these state ids (comma separated, must include 0).
    #[arg(long)]
    keep: Option<String>,
}

impl Selection {
    fn keep(&self) -> Result<Option<Vec<usize>>> {
        self.keep.as_deref().map(parse_state_list).transpose()
    }

    fn tag(&self) -> String {
        let mut tag = String::new();
        if let Some(k) = self.states {
            tag.push_str(&format!("_states{k}"));
        }
        if let Some(keep) = &self.keep {
            tag.push_str(&format!("_keep{}", keep.replace(',', "-").replace(' ', "")));
        }
        tag
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn run_tag(cfg: &RunConfig) -> Result<String> {
    let chain = cfg.chain()?;
    Ok(format!(
        "N{}_v{}_w{}_U{}",
        chain.sites, chain.v, chain.w, chain.u
    ))
}

fn load(cfg: &RunConfig, input: &Input) -> Result<sshhub::eigen::EigenSolution> {
    let (sol, path, source) = pipeline::load_or_diagonalize(cfg, input.checkpoint.as_deref())?;
    if source == Source::Computed {
        eprintln!("diagonalized and cached {}", path.display());
    }
    Ok(sol)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Parameter("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Resource(e.to_string()))?;
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.keys.pairs())?;
    let out = std::io::stdout();
    let mut out = out.lock();
    match &cli.command {
        Command::BasisInfo => {
            let basis = FockBasis::half_filling(cfg.chain()?.sites)?;
            let info = json!({"N": basis.sites(), "D": basis.up.dim(), "n": basis.dim()});
            writeln!(out, "{info}")?;
        }
        Command::Diagonalize { checkpoint } => {
            let path = match checkpoint {
                Some(p) => p.clone(),
                None => cfg.checkpoint_path()?,
            };
            let sol = pipeline::diagonalize_to(&cfg, &path)?;
            let summary = json!({
                "checkpoint": path.display().to_string(),
                "k": sol.len(),
                "energies": sol.energies,
                "max_residual": sol.residuals.iter().fold(0.0f64, |a, &b| a.max(b)),
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
        }
        Command::Spectrum {
            input,
            selection,
            trajectory,
            output,
        } => {
            let sol = load(&cfg, input)?;
            let tm = pipeline::transitions(&cfg.chain()?, &sol)?;
            let tm = pipeline::select_states(&tm, selection.states, selection.keep()?.as_deref())?;
            let run = pipeline::run_spectrum(&cfg, &tm)?;
            let tag = format!("{}{}", run_tag(&cfg)?, selection.tag());
            let path = output
                .clone()
                .unwrap_or_else(|| cfg.directory.join(format!("spectrum_{tag}.csv")));
            run.spectrum.write_csv(create(&path)?)?;
            writeln!(out, "{}", path.display())?;
            if *trajectory {
                let tpath = path.with_file_name(format!("trajectory_{tag}.csv"));
                write_trajectory_csv(
                    &run.trajectory.times,
                    &run.trajectory.position,
                    create(&tpath)?,
                )?;
                writeln!(out, "{}", tpath.display())?;
            }
        }
        Command::Levels { input, selection } => {
            let sol = load(&cfg, input)?;
            let tm = pipeline::transitions(&cfg.chain()?, &sol)?;
            let tm = pipeline::select_states(&tm, selection.states, None)?;
            let mut scheme = pipeline::level_scheme(&cfg, &sol, &tm)?;
            if let Some(keep) = selection.keep()? {
                scheme = scheme.restrict(&keep);
            }
            let path =
                cfg.directory
                    .join(format!("levels_{}{}.json", run_tag(&cfg)?, selection.tag()));
            let mut file = create(&path)?;
            scheme.write_json(&mut file)?;
            writeln!(file)?;
            writeln!(out, "{}", path.display())?;
        }
        Command::Reduce { input, keep } => {
            let keep = parse_state_list(keep)?;
            let sol = load(&cfg, input)?;
            let full = pipeline::transitions(&cfg.chain()?, &sol)?;
            let reduced = sshhub::analysis::reduce_levels(&full, &keep)?;
            let scheme = pipeline::level_scheme(&cfg, &sol, &full)?.restrict(&keep);
            let run = pipeline::run_spectrum(&cfg, &reduced)?;
            let tag = format!(
                "{}_keep{}",
                run_tag(&cfg)?,
                keep.iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join("-")
            );
            let levels = cfg.directory.join(format!("levels_{tag}.json"));
            let mut file = create(&levels)?;
            scheme.write_json(&mut file)?;
            writeln!(file)?;
            let spectrum = cfg.directory.join(format!("spectrum_{tag}.csv"));
            run.spectrum
                .with_metadata(
                    "keep",
                    keep.iter()
                        .map(|k| k.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                )
                .write_csv(create(&spectrum)?)?;
            writeln!(out, "{}\n{}", levels.display(), spectrum.display())?;
        }
        Command::Configs { input, state, top } => {
            let sol = load(&cfg, input)?;
            let v = sol.vectors.get(*state).ok_or_else(|| {
                Error::Parameter(format!(
                    "state {state} is not available ({} states)",
                    sol.len()
                ))
            })?;
            let basis = FockBasis::half_filling(cfg.chain()?.sites)?;
            let report = dominant_configurations(&basis, *state, v, *top)?;
            let table = report.to_table();
            let path = cfg
                .directory
                .join(format!("configs_{}_state{state}.txt", run_tag(&cfg)?));
            create(&path)?.write_all(table.as_bytes())?;
            write!(out, "{table}")?;
        }
        Command::Uscan {
            from,
            to,
            step,
            values,
        } => {
            let grid = match values {
                Some(list) => list
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Parameter(format!("bad U list {list:?}")))?,
                None => u_grid(*from, *to, *step)?,
            };
            let scan = pipeline::run_u_scan(&cfg, &grid)?;
            let chain = cfg.chain()?;
            let tag = format!("N{}_v{}_w{}", chain.sites, chain.v, chain.w);
            let csv = cfg.directory.join(format!("uscan_{tag}.csv"));
            scan.write_csv(create(&csv)?)?;
            let overlay = cfg.directory.join(format!("uscan_{tag}_overlay.json"));
            let mut file = create(&overlay)?;
            scan.write_overlay_json(&mut file)?;
            writeln!(file)?;
            writeln!(out, "{}\n{}", csv.display(), overlay.display())?;
            if !scan.missing.is_empty() {
                for (u, reason) in &scan.missing {
                    eprintln!("U = {u}: {reason}");
                }
                return Err(Error::Resource(format!(
                    "{} of {} scan points failed",
                    scan.missing.len(),
                    grid.len()
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
