#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use affpipe::io::{read_json, write_json};
use affpipe::pipeline::annotation::{convert_annotation, instance_names, latest_per_annotator, read_jsonl};
use affpipe::pipeline::batch::SUMMARY_FILE;
use affpipe::pipeline::evaluate::{evaluate_dirs, EvalOptions};
use affpipe::pipeline::manifest::{read_manifest_list, ManifestEntry};
use affpipe::pipeline::{classify, run_batch, write_tuple, PipelineConfig};
use affpipe::server::{read_tasks, serve, AnnotatorState};

#[derive(Parser, Debug)]
#[command(name = "affpipe", version, about = "Affordance pseudo-label pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify an interaction as hand-object or tool-object.
    Classify(ClassifyArgs),
    /// Build dataset tuples from clip manifests.
    Build(BuildArgs),
    /// Convert manual annotations (JSONL) into dataset tuples.
    ConvertAnnotations(ConvertArgs),
    /// Score predicted tuples against ground-truth tuples.
    Eval(EvalArgs),
    /// Serve the annotation UI and collect its exports.
    ServeAnnotator(ServeArgs),
}

#[derive(Args, Debug)]
struct SeedArg {
    /// Base seed; falls back to $AFFPIPE_SEED, then 0.
    #[arg(long, env = "AFFPIPE_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// JSON file with pipeline settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gmm_k: Option<usize>,
    #[arg(long)]
    gmm_max_iters: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    ransac_thresh: Option<f64>,
    #[arg(long)]
    ransac_iters: Option<usize>,
    /// Also write an 8-bit PNG preview of every heatmap.
    #[arg(long)]
    png: bool,
    /// Newline-separated tool lexicon replacing the built-in one.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut c: PipelineConfig = match &self.config {
            Some(p) => read_json(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { c.$f = v; } )*};
        }
        set!(gmm_k, gmm_max_iters, samples, sigma, ransac_thresh, ransac_iters);
        c.png_preview |= self.png;
        if let Some(p) = &self.lexicon {
            c.lexicon = Some(read_lexicon(p)?);
        }
        if c.gmm_k == 0 || c.samples == 0 || !(c.sigma > 0.0) || !(c.ransac_thresh > 0.0) {
            bail!("gmm_k and samples must be positive, sigma and ransac_thresh must be > 0");
        }
        Ok(c)
    }
}

fn read_lexicon(p: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_string).collect())
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    /// Action description to classify.
    #[arg(long, conflicts_with = "manifest")]
    description: Option<String>,
    /// Preceding action descriptions (up to two).
    #[arg(long)]
    prev: Vec<String>,
    /// Classify every clip in a manifest file instead.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    /// Annotation records, one JSON object per line.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    gt_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Divide DTW by the warping path length.
    #[arg(long)]
    normalize_dtw: bool,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// JSONL file that receives posted annotations.
    #[arg(long, default_value = "annotations.jsonl")]
    out: PathBuf,
    /// Directory holding the built annotation UI.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
    /// Directory served under /images.
    #[arg(long)]
    image_root: Option<PathBuf>,
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Classify(a) => {
            let lexicon = match &a.lexicon {
                Some(p) => read_lexicon(p)?,
                None => classify::DEFAULT_LEXICON.iter().map(|s| s.to_string()).collect(),
            };
            if let Some(m) = &a.manifest {
                let mut out = Vec::new();
                for e in read_manifest_list(m)? {
                    match e {
                        ManifestEntry::Parsed(m) => {
                            let label = classify::resolve_interaction(
                                m.interaction.as_ref(),
                                &m.description,
                                &m.prev_descriptions,
                                &lexicon,
                            );
                            out.push(match label {
                                Ok(l) => serde_json::json!({ "clip_id": m.clip_id, "interaction": l }),
                                Err(e) => serde_json::json!({ "clip_id": m.clip_id, "error": e }),
                            });
                        }
                        ManifestEntry::Invalid { clip_id, reason } => {
                            out.push(serde_json::json!({ "clip_id": clip_id, "error": reason }))
                        }
                    }
                }
                print_json(&out)
            } else {
                let Some(d) = a.description.filter(|d| !d.trim().is_empty()) else {
                    bail!("--description or --manifest is required");
                };
                print_json(&classify::classify_interaction(&d, &a.prev, &lexicon))
            }
        }
        Command::Build(a) => {
            let config = a.config.load()?;
            let entries = read_manifest_list(&a.manifest)?;
            if entries.is_empty() {
                bail!("manifest list is empty");
            }
            std::fs::create_dir_all(&a.out)?;
            let summary = run_batch(&entries, &config, a.seed.seed, a.workers, &a.out);
            write_json(&a.out.join(SUMMARY_FILE), &summary)?;
            eprintln!("built {} of {} clips", summary.built, summary.total);
            for (reason, n) in &summary.skipped {
                eprintln!("  skipped ({reason}): {n}");
            }
            Ok(())
        }
        Command::ConvertAnnotations(a) => {
            let config = a.config.load()?;
            let records = latest_per_annotator(read_jsonl(&a.input)?);
            let names = instance_names(&records);
            let mut failed = 0;
            for (r, name) in records.iter().zip(&names) {
                match convert_annotation(r, &config, a.seed.seed) {
                    Ok(clip) => write_tuple(&a.out.join(name), &clip)?,
                    Err(e) => {
                        failed += 1;
                        eprintln!("{name}: {e}");
                    }
                }
            }
            eprintln!("converted {} of {} annotations", records.len() - failed, records.len());
            Ok(())
        }
        Command::Eval(a) => {
            let report = evaluate_dirs(&a.pred_dir, &a.gt_dir, EvalOptions { normalize_dtw: a.normalize_dtw })?;
            write_json(&a.out, &report)?;
            print_json(&report.aggregate)
        }
        Command::ServeAnnotator(a) => {
            let tasks = read_tasks(&a.tasks).map_err(anyhow::Error::msg)?;
            let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().context("bad host/port")?;
            let state = Arc::new(AnnotatorState::new(tasks, a.out));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(addr, state, a.ui_dir, a.image_root))?;
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
