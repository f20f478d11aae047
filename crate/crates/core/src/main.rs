use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use skymark_core::pipeline::{
    evaluate, label_manifest, read_labels, read_results, run_adaptive, run_all, run_technique, stitch_cube,
    write_labels, write_results, write_routing, CubeTiles, Manifest, ManifestEntry, RunOptions, Split,
};
use skymark_core::selector::{SelectorModel, TrainParams};
use skymark_core::synth::{make_corpus_specs, render, write_scene, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use skymark_core::{Error, MaskConvention, Result, Technique};

#[derive(Parser)]
#[command(name = "skymark", version, about = "Mark sky pixels in outdoor images")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// Seed for every randomized step
    #[arg(long, global = true, default_value_t = 17)]
    seed: u64,
    /// Worker threads for per-image work
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Override the mask convention recorded in the manifest
    #[arg(long, global = true, value_parser = parse_convention)]
    mask_convention: Option<MaskConvention>,
    /// Record per-image runtime in the `ms` column (otherwise 0, keeping reruns byte-identical)
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus and its manifest
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Scenes per class (clear, patchy, overcast, trees, skyline)
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long, default_value_t = DEFAULT_WIDTH)]
        width: usize,
        #[arg(long, default_value_t = DEFAULT_HEIGHT)]
        height: usize,
    },
    /// Stitch six cube tiles (front/right/back/left/up/down .png or .jpg) into a 1280x960 panorama
    Stitch {
        #[arg(long)]
        tiles: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply one technique, or all fourteen, to every manifest entry
    Run {
        #[command(flatten)]
        data: Data,
        #[arg(long, value_parser = parse_technique, required_unless_present = "all", conflicts_with = "all")]
        technique: Option<Technique>,
        #[arg(long)]
        all: bool,
    },
    /// Score all thirteen variants per image and write selector training labels
    Label {
        #[command(flatten)]
        data: Data,
    },
    /// Train the technique selector on a labels file
    Train {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        l2: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Route each image to the technique the selector ranks first
    Adaptive {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        model: PathBuf,
    },
    /// Metrics per technique and source from a results file; writes eval.csv and eval.txt
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the metric tables for one or more results files
    Report {
        #[arg(long, required = true, num_args = 1..)]
        results: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Data {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Only entries of this split
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
}

impl Data {
    fn load(&self) -> Result<Manifest> {
        std::fs::create_dir_all(&self.out)?;
        Ok(Manifest::load(&self.manifest)?.filter_split(self.split))
    }
}

fn parse_technique(s: &str) -> std::result::Result<Technique, String> {
    s.parse::<Technique>().map_err(|e| e.to_string())
}

fn parse_convention(s: &str) -> std::result::Result<MaskConvention, String> {
    s.parse::<MaskConvention>().map_err(|e| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse::<Split>().map_err(|e| e.to_string())
}

fn synth(out: &Path, per_class: usize, width: usize, height: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let specs = make_corpus_specs([per_class; 5], seed, width, height);
    let mut counters = [0usize; 5];
    let mut entries = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let class = spec.class;
        let k = class as usize;
        let stem = format!("{}_{:04}", class.name(), counters[k]);
        counters[k] += 1;
        let scene = render(spec)?;
        let w = write_scene(&scene, out, &stem, MaskConvention::BlueMarked)?;
        let rel = |p: &Path| PathBuf::from(p.file_name().expect("written file has a name"));
        entries.push(ManifestEntry {
            image_path: rel(&w.image_path),
            mask_path: rel(&w.mask_path),
            mask_convention: MaskConvention::BlueMarked,
            split: if i % 4 == 3 { Split::Validation } else { Split::Train },
            source_tag: "synth".into(),
        });
    }
    Manifest::new(entries)?.save(&out.join("manifest.jsonl"))?;
    println!("wrote {} scenes to {}", specs.len(), out.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let opts = RunOptions {
        seed: c.seed,
        workers: c.workers,
        timing: c.timing,
        mask_convention: c.mask_convention,
    };
    match cli.cmd {
        Command::Synth { out, per_class, width, height } => synth(&out, per_class, width, height, c.seed),
        Command::Stitch { tiles, out } => {
            let pano = stitch_cube(&CubeTiles::load_dir(&tiles)?)?;
            pano.save(&out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Run { data, technique, all } => {
            let manifest = data.load()?;
            let (rows, name) = match technique {
                Some(t) if !all => (run_technique(&manifest, t, &opts)?, t.name().to_string()),
                _ => (run_all(&manifest, &opts)?, "all".to_string()),
            };
            let path = data.out.join(format!("results_{name}.csv"));
            write_results(&path, &rows)?;
            let errors = rows.iter().filter(|r| r.is_error()).count();
            println!("wrote {} rows ({errors} errors) to {}", rows.len(), path.display());
            Ok(())
        }
        Command::Label { data } => {
            let manifest = data.load()?;
            let records = label_manifest(&manifest, &opts)?;
            let path = data.out.join("labels.jsonl");
            write_labels(&path, &records)?;
            println!("wrote {} labels to {}", records.len(), path.display());
            Ok(())
        }
        Command::Train { labels, out, epochs, learning_rate, l2, batch_size } => {
            let records = read_labels(&labels)?;
            let labeled: Vec<_> = records.into_iter().map(|r| (r.features, r.label)).collect();
            let d = TrainParams::default();
            let params = TrainParams {
                learning_rate: learning_rate.unwrap_or(d.learning_rate),
                epochs: epochs.unwrap_or(d.epochs),
                l2: l2.unwrap_or(d.l2),
                batch_size: batch_size.unwrap_or(d.batch_size),
                seed: c.seed,
                ..d
            };
            let (model, report) = SelectorModel::train_with_report(&labeled, &params)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join("model.json");
            model.save(&path)?;
            println!(
                "trained on {} images; holdout {} top-1 {:.3} (epoch {}); wrote {}",
                labeled.len(),
                report.holdout_size,
                report.best_holdout_top1,
                report.best_epoch,
                path.display()
            );
            Ok(())
        }
        Command::Adaptive { data, model } => {
            let model = SelectorModel::load(&model)?;
            let manifest = data.load()?;
            let (rows, routing) = run_adaptive(&manifest, &model, &opts)?;
            write_results(&data.out.join("results_adaptive.csv"), &rows)?;
            write_routing(&data.out.join("routing.csv"), &routing)?;
            println!("wrote {} adaptive rows to {}", rows.len(), data.out.display());
            Ok(())
        }
        Command::Eval { results, out } => {
            let report = evaluate(&read_results(&results)?);
            std::fs::create_dir_all(&out)?;
            report.write_csv(&out.join("eval.csv"))?;
            let text = report.to_text();
            std::fs::write(out.join("eval.txt"), &text)?;
            print!("{text}");
            Ok(())
        }
        Command::Report { results } => {
            let mut rows = Vec::new();
            for p in &results {
                rows.extend(read_results(p)?);
            }
            print!("{}", evaluate(&rows).to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::UnknownTechnique { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
