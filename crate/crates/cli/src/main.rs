use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use holonomy_core::braid::{invariance_test, BraidWord, SlotLaw};
use holonomy_core::freegroup::{semidirect_decomposition, Word};
use holonomy_core::geometry::{close_loop, PolyPath, PunctureSet};
use holonomy_core::harness::{
    read_points, windings_table, write_column_csv, write_holonomy_csv, write_json,
    write_windings_csv,
};
use holonomy_core::homotopy::word_of_loop;
use holonomy_core::liegroup::{class_coordinate, GroupKind};
use holonomy_core::model::{
    diffeo_check, quenched_path, run_experiment, stream_rng, ModelConfig, PlaneMap,
};
use holonomy_core::stable::{nu_star_sample, sigma_for_group, StableParams};
use holonomy_core::suite::{run_criterion, Scale, CRITERIA};

#[derive(Parser)]
#[command(
    name = "holonomy",
    version,
    about = "Holonomy of random loops in punctured planes"
)]
struct Cli {
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON model configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PathInput {
    /// JSON point list of the path.
    #[arg(long)]
    path: PathBuf,
    /// JSON point list of the punctures.
    #[arg(long)]
    punctures: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Winding and half-turn table of an open path.
    Windings {
        #[command(flatten)]
        input: PathInput,
        #[arg(long = "k")]
        k: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Word of a loop; open paths are closed by a straight segment.
    Word {
        #[command(flatten)]
        input: PathInput,
    },
    /// Semidirect components of a word such as "x3 x2 x1^-1".
    Decompose { word: String },
    /// Runs the configured experiment.
    Holonomy {
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Samples of nu^sigma in the Lie algebra, or of the limit law in the group.
    StableSample {
        #[arg(long)]
        group: Option<GroupKind>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        sigma: Option<f64>,
        /// Sample the group-valued limit law instead.
        #[arg(long)]
        limit: bool,
        /// Number of factors for `--limit`.
        #[arg(long, default_value_t = 4096)]
        n: usize,
    },
    /// Tests invariance of a tuple law under a braid.
    BraidTest {
        #[arg(long)]
        group: Option<GroupKind>,
        /// Braid word as a JSON list of signed generator indices.
        #[arg(long)]
        braid: String,
        #[arg(long)]
        strands: usize,
        /// Slot law as JSON, one for all slots or a list with one per slot.
        #[arg(long)]
        law: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
    },
    /// Compares the holonomy law of a loop and of its image under a planar map.
    DiffeoTest {
        /// JSON point list of the loop; defaults to the configured Brownian loop.
        #[arg(long = "loop")]
        loop_: Option<PathBuf>,
        #[arg(long, conflicts_with = "scale")]
        shear: Option<f64>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
    },
    /// Runs the acceptance criteria.
    Verify {
        /// Reduced sample sizes.
        #[arg(long)]
        quick: bool,
        /// Comma-separated criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn base_config(cli: &Cli) -> Result<ModelConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ModelConfig::from_json(&text)?
        }
        None => ModelConfig::new(GroupKind::Torus(1), 100.0, 10_000, 1, 0),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_file(cli: &Cli, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    Ok(cli.out.join(name))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn load(input: &PathInput) -> Result<(Vec<holonomy_core::geometry::Point2>, PunctureSet)> {
    let pts = read_points(&input.path)?;
    let ps = PunctureSet::new(read_points(&input.punctures)?)?;
    Ok((pts, ps))
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Windings { input, k, epsilon } => {
            let cfg = base_config(&cli)?;
            let (pts, ps) = load(input)?;
            let path = PolyPath::open(pts)?;
            let rows = windings_table(
                &path,
                &ps,
                k.unwrap_or(cfg.k),
                epsilon.unwrap_or(cfg.epsilon),
            )?;
            let dest = out_file(&cli, "windings.csv")?;
            write_windings_csv(create(&dest)?, &rows)?;
            println!("{} rows -> {}", rows.len(), dest.display());
        }
        Command::Word { input } => {
            let (pts, ps) = load(input)?;
            let loop_ = if pts.len() > 2 && pts.first() == pts.last() {
                PolyPath::polygon(pts)?
            } else {
                close_loop(&PolyPath::open(pts)?)?
            };
            let word = word_of_loop(&loop_, &ps)?;
            let dest = out_file(&cli, "word.txt")?;
            fs::write(&dest, format!("{word}\n"))?;
            println!("{word}");
        }
        Command::Decompose { word } => {
            let g: Word = word.parse()?;
            let parts = semidirect_decomposition(&g);
            let mut doc = serde_json::Map::new();
            doc.insert("word".into(), g.to_string().into());
            let comps: Vec<serde_json::Value> = parts
                .iter()
                .map(|(x, c)| serde_json::json!({ "generator": x, "component": c.to_string() }))
                .collect();
            doc.insert("components".into(), comps.into());
            for (x, c) in &parts {
                println!("x{x}: {c}");
            }
            write_json(&out_file(&cli, "decompose.json")?, &doc)?;
        }
        Command::Holonomy { replicas } => {
            if cli.config.is_none() {
                bail!("holonomy needs --config");
            }
            let mut cfg = base_config(&cli)?;
            if let Some(r) = replicas {
                cfg.replicas = *r;
            }
            let report = run_experiment(&cfg)?;
            write_json(&out_file(&cli, "report.json")?, &report)?;
            write_holonomy_csv(create(&out_file(&cli, "holonomy.csv")?)?, &report)?;
            if let Some(stats) = report.replicas.first().and_then(|r| r.statistics.as_ref()) {
                write_windings_csv(create(&out_file(&cli, "windings.csv")?)?, &stats.rows)?;
            }
            let s = &report.summary;
            println!(
                "{} replicas, mean punctures {:.1}, E_R {:.3}, F_R {:.3}, retries {}",
                report.replicas.len(),
                s.mean_punctures,
                s.e_r_frequency,
                s.f_r_frequency,
                s.total_retries
            );
        }
        Command::StableSample {
            group,
            samples,
            sigma,
            limit,
            n,
        } => {
            let cfg = base_config(&cli)?;
            let kind = group.unwrap_or(cfg.group);
            let mut rng = stream_rng(cfg.seed, 0);
            let (header, rows): (Vec<String>, Vec<Vec<f64>>) = if *limit {
                let h = (0..kind.class_dim())
                    .map(|j| format!("class_coord_{j}"))
                    .collect();
                let rows = (0..*samples)
                    .map(|_| class_coordinate(&nu_star_sample(kind, *n, &mut rng)))
                    .collect();
                (h, rows)
            } else {
                let d = kind.dim();
                let params = StableParams::new(d, sigma.unwrap_or_else(|| sigma_for_group(d)));
                let h = (0..d).map(|j| format!("z_{j}")).collect();
                let rows = (0..*samples).map(|_| params.sample(&mut rng).0).collect();
                (h, rows)
            };
            let dest = out_file(&cli, "stable.csv")?;
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            write_column_csv(create(&dest)?, &h, &rows)?;
            println!("{samples} samples -> {}", dest.display());
        }
        Command::BraidTest {
            group,
            braid,
            strands,
            law,
            samples,
            alpha,
        } => {
            let cfg = base_config(&cli)?;
            let kind = group.unwrap_or(cfg.group);
            let b = BraidWord::from_json(*strands, braid).map_err(|e| anyhow::anyhow!(e))?;
            let laws = match law {
                None => vec![SlotLaw::Sphere { radius: 0.8 }; *strands],
                Some(text) => match serde_json::from_str::<Vec<SlotLaw>>(text) {
                    Ok(l) => l,
                    Err(_) => vec![serde_json::from_str::<SlotLaw>(text)?; *strands],
                },
            };
            let mut rng = stream_rng(cfg.seed, 0);
            let report = invariance_test(kind, &laws, &b, *samples, &mut rng)?;
            write_json(&out_file(&cli, "braid_test.json")?, &report)?;
            let ok = !report.rejected(*alpha);
            println!(
                "{} corrected p={:.4} over {} observables",
                if ok { "not rejected" } else { "rejected" },
                report.corrected_p_value,
                report.statistics.len()
            );
            return Ok(ok);
        }
        Command::DiffeoTest {
            loop_,
            shear,
            scale,
            draws,
            alpha,
        } => {
            let cfg = base_config(&cli)?;
            let lp = match loop_ {
                Some(p) => {
                    let pts = read_points(p)?;
                    if pts.len() > 2 && pts.first() == pts.last() {
                        PolyPath::polygon(pts)?
                    } else {
                        close_loop(&PolyPath::open(pts)?)?
                    }
                }
                None => close_loop(&quenched_path(&cfg))?,
            };
            let map = match scale {
                Some(s) => PlaneMap::Scale { s: *s },
                None => PlaneMap::Shear {
                    c: shear.unwrap_or(0.7),
                },
            };
            let report = diffeo_check(&cfg, map, &lp, *draws)?;
            write_json(&out_file(&cli, "diffeo_test.json")?, &report)?;
            let ok = !report.rejected(*alpha);
            println!(
                "{} corrected p={:.4}",
                if ok { "not rejected" } else { "rejected" },
                report.corrected_p_value
            );
            return Ok(ok);
        }
        Command::Verify { quick, only } => {
            let seed = cli.seed.unwrap_or(1);
            let scale = if *quick { Scale::Quick } else { Scale::Full };
            let ids: Vec<u8> = if only.is_empty() {
                CRITERIA.iter().map(|c| c.0).collect()
            } else {
                only.clone()
            };
            let mut results = Vec::with_capacity(ids.len());
            let mut stdout = std::io::stdout();
            for id in ids {
                let c = run_criterion(id, seed, scale)?;
                writeln!(stdout, "{}", c.line())?;
                results.push(c);
            }
            write_json(&out_file(&cli, "verify.json")?, &results)?;
            return Ok(results.iter().all(|c| c.pass));
        }
    }
    Ok(true)
}
