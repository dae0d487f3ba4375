//! Command implementations behind the `n2rpp` binary.
//!
//! Every command reads its inputs from manifests, writes into `--out`, and
//! records the resolved configuration in `config.resolved` there.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::autoencoder::{train_autoencoder, AutoencoderModel};
use crate::checks::{run_suite, TOLERANCE};
use crate::classifier::{evaluate, pass_rate, split_dataset, train_classifier, ClassifierModel, THRESHOLD};
use crate::error::{Error, Result};
use crate::formats::{
    load_model, read_image, read_sequence, save_model, write_grid_csv, write_image, write_pgm, write_sequence,
    write_text, Config, Manifest, ManifestKind, ManifestRecord, NetName,
};
use crate::gan::{rebuild, train_n2rpp_with, DiscriminatorModel, GeneratorModel};
use crate::nn::{Network, NetworkParams};
use crate::preprocess::{preprocess_sequence, Aggregation, FootSide, Label, PressureImage};
use crate::saliency::{diff_heatmap, guided_backprop, region_stats};
use crate::synth::generate_cohort;
use crate::{IMAGE_COLS, IMAGE_ROWS};

#[derive(Debug, Parser)]
#[command(
    name = "n2rpp",
    version,
    about = "Rebuild plantar-pressure images toward the healthy distribution"
)]
pub struct Cli {
    /// Configuration file of `key=value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides a configuration key, e.g. `--set gan_iterations=2000`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Only errors on stderr, no summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort of raw sequences.
    Synth,
    /// Aggregate, crop, resample and normalize raw sequences.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "max")]
        aggregation: AggregationArg,
    },
    /// Train the feature autoencoder.
    TrainAe {
        #[command(flatten)]
        input: ImageInput,
    },
    /// Train generator and discriminator; healthy records are real, ACLD records are patients.
    TrainGan {
        #[command(flatten)]
        input: ImageInput,
        /// Trained autoencoder model file.
        #[arg(long)]
        ae: PathBuf,
    },
    /// Split the images and train the classifier.
    TrainClf {
        #[command(flatten)]
        input: ImageInput,
    },
    /// Score labeled images and/or rebuilt patient images.
    Eval {
        /// Trained classifier model file.
        #[arg(long)]
        clf: PathBuf,
        /// Manifest of labeled images.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Manifest of rebuilt images.
        #[arg(long)]
        rebuilt: Option<PathBuf>,
        #[command(flatten)]
        filter: Filter,
    },
    /// Rebuild images through the autoencoder and generator.
    Rebuild {
        #[command(flatten)]
        input: ImageInput,
        /// Trained autoencoder model file.
        #[arg(long)]
        ae: PathBuf,
        /// Trained generator model file.
        #[arg(long)]
        gen: PathBuf,
    },
    /// Render original, rebuild, difference and saliency for each image.
    Visualize {
        #[command(flatten)]
        input: ImageInput,
        /// Trained autoencoder model file.
        #[arg(long)]
        ae: PathBuf,
        /// Trained generator model file.
        #[arg(long)]
        gen: PathBuf,
        /// Trained classifier model file.
        #[arg(long)]
        clf: PathBuf,
        /// Process at most this many images.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Finite-difference gradient checks of every layer kind and reduced model.
    Gradcheck {
        /// Seeds 0..N per case.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AggregationArg {
    Max,
    Sum,
    Avg,
    All,
}

impl AggregationArg {
    fn kinds(self) -> Vec<Aggregation> {
        match self {
            AggregationArg::Max => vec![Aggregation::Max],
            AggregationArg::Sum => vec![Aggregation::Sum],
            AggregationArg::Avg => vec![Aggregation::Avg],
            AggregationArg::All => Aggregation::ALL.to_vec(),
        }
    }
}

/// Record filters applied to image manifests.
#[derive(Clone, Debug, Default, Args)]
pub struct Filter {
    /// Keep only this foot side (L or R).
    #[arg(long)]
    pub side: Option<FootSide>,
    /// Keep only images of this aggregation.
    #[arg(long = "only-aggregation")]
    pub aggregation: Option<Aggregation>,
    /// Keep only this label (healthy or acld).
    #[arg(long)]
    pub label: Option<Label>,
}

impl Filter {
    fn keeps(&self, r: &ManifestRecord) -> bool {
        self.side.is_none_or(|s| s == r.foot_side)
            && self.label.is_none_or(|l| l == r.label)
            && self.aggregation.is_none_or(|a| r.kind == ManifestKind::Image(a))
    }
}

#[derive(Clone, Debug, Args)]
pub struct ImageInput {
    /// Manifest of preprocessed images.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub filter: Filter,
}

struct Ctx {
    config: Config,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }

    fn progress(&self, line: &str) {
        if !self.quiet {
            eprintln!("{line}");
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Resolves the configuration and runs one command.
pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("`--set {kv}` is not KEY=VALUE")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let resolved = config.to_text();
    write_text(&cli.out.join("config.resolved"), &resolved)?;
    if !cli.quiet {
        eprint!("{resolved}");
    }
    let ctx = Ctx {
        config,
        out: cli.out,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Synth => cmd_synth(&ctx),
        Command::Preprocess { manifest, aggregation } => cmd_preprocess(&ctx, &manifest, aggregation),
        Command::TrainAe { input } => cmd_train_ae(&ctx, &input),
        Command::TrainGan { input, ae } => cmd_train_gan(&ctx, &input, &ae),
        Command::TrainClf { input } => cmd_train_clf(&ctx, &input),
        Command::Eval {
            clf,
            manifest,
            rebuilt,
            filter,
        } => cmd_eval(&ctx, &clf, manifest.as_deref(), rebuilt.as_deref(), &filter),
        Command::Rebuild { input, ae, gen } => cmd_rebuild(&ctx, &input, &ae, &gen),
        Command::Visualize {
            input,
            ae,
            gen,
            clf,
            limit,
        } => cmd_visualize(&ctx, &input, &ae, &gen, &clf, limit),
        Command::Gradcheck { seeds } => cmd_gradcheck(&ctx, seeds),
    }
}

fn cmd_synth(ctx: &Ctx) -> Result<()> {
    let spec = ctx.config.cohort()?;
    let cohort = generate_cohort(&spec)?;
    let mut manifest = Manifest::new(&ctx.out);
    for seq in &cohort {
        let name = format!("{}.pfs", seq.case_id);
        write_sequence(&ctx.path(&name), seq)?;
        manifest.records.push(ManifestRecord {
            path: name.into(),
            foot_side: seq.foot_side,
            label: seq.label,
            case_id: seq.case_id.clone(),
            kind: ManifestKind::Raw,
        });
    }
    manifest.save(&ctx.path("manifest.tsv"))?;
    ctx.say(&format!(
        "synth: {} healthy, {} acld sequences in {}",
        spec.n_healthy,
        spec.n_acld,
        ctx.out.display()
    ));
    Ok(())
}

fn cmd_preprocess(ctx: &Ctx, manifest_path: &Path, aggregation: AggregationArg) -> Result<()> {
    let manifest = Manifest::load(manifest_path)?;
    let mut out = Manifest::new(&ctx.out);
    let mut rejects = String::from("path\tcase_id\taggregation\treason\n");
    let mut rejected = 0;
    for r in &manifest.records {
        if r.kind != ManifestKind::Raw {
            return Err(Error::InvalidInput(format!(
                "{}: preprocess expects raw sequences, found `{}`",
                r.path.display(),
                r.kind
            )));
        }
        let seq = match read_sequence(&manifest.resolve(r), r.foot_side, r.label, &r.case_id) {
            Ok(seq) => seq,
            Err(Error::InvalidInput(reason)) => {
                eprintln!("warning: skipping {}: {reason}", r.case_id);
                for kind in aggregation.kinds() {
                    let _ = writeln!(rejects, "{}\t{}\t{kind}\t{reason}", r.path.display(), r.case_id);
                    rejected += 1;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        for kind in aggregation.kinds() {
            match preprocess_sequence(&seq, kind) {
                Ok(img) => {
                    let name = format!("{}_{}_{}.pimg", r.case_id, r.foot_side, kind);
                    write_image(&ctx.path(&name), &img)?;
                    out.records.push(ManifestRecord {
                        path: name.into(),
                        kind: ManifestKind::Image(kind),
                        ..r.clone()
                    });
                }
                Err(Error::InvalidInput(reason)) => {
                    eprintln!("warning: skipping {} ({kind}): {reason}", r.case_id);
                    let _ = writeln!(rejects, "{}\t{}\t{kind}\t{reason}", r.path.display(), r.case_id);
                    rejected += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    out.save(&ctx.path("manifest.tsv"))?;
    write_text(&ctx.path("rejects.tsv"), &rejects)?;
    ctx.say(&format!(
        "preprocess: {} images written, {rejected} rejected",
        out.records.len()
    ));
    Ok(())
}

/// Images of a manifest that pass `filter`, with the manifest's records.
fn load_images(path: &Path, filter: &Filter) -> Result<(Manifest, Vec<PressureImage>)> {
    let mut manifest = Manifest::load(path)?;
    manifest.records.retain(|r| filter.keeps(r));
    let mut images = Vec::with_capacity(manifest.records.len());
    for r in &manifest.records {
        let ManifestKind::Image(kind) = r.kind else {
            return Err(Error::InvalidInput(format!(
                "{}: expected an image, found a raw sequence",
                r.path.display()
            )));
        };
        let file = manifest.resolve(r);
        let img = read_image(&file, &r.case_id)?;
        if img.meta.foot_side != r.foot_side || img.meta.label != r.label || img.meta.aggregation != kind {
            return Err(Error::InvalidInput(format!(
                "{}: header disagrees with its manifest record",
                file.display()
            )));
        }
        images.push(img);
    }
    if images.is_empty() {
        return Err(Error::EmptyDataset("no manifest records match the filters"));
    }
    Ok((manifest, images))
}

fn load_net(path: &Path, expected: NetName) -> Result<NetworkParams> {
    let (name, params) = load_model(path)?;
    if name != expected {
        return Err(Error::InvalidInput(format!(
            "{}: holds a `{name}` model, expected `{expected}`",
            path.display()
        )));
    }
    Ok(params)
}

pub fn load_autoencoder(path: &Path) -> Result<AutoencoderModel> {
    let params = load_net(path, NetName::Ae)?;
    AutoencoderModel::from_network(Network::with_params(
        crate::autoencoder::layers(),
        &[crate::IMAGE_LEN],
        params,
    )?)
}

pub fn load_generator(path: &Path) -> Result<GeneratorModel> {
    let params = load_net(path, NetName::Gen)?;
    GeneratorModel::from_network(Network::with_params(
        crate::gan::generator_layers(),
        &[crate::FEATURE_DIM],
        params,
    )?)
}

pub fn load_discriminator(path: &Path) -> Result<DiscriminatorModel> {
    let params = load_net(path, NetName::Disc)?;
    DiscriminatorModel::from_network(Network::with_params(
        crate::gan::discriminator_layers(),
        &[1, IMAGE_ROWS, IMAGE_COLS],
        params,
    )?)
}

pub fn load_classifier(path: &Path) -> Result<ClassifierModel> {
    let params = load_net(path, NetName::Clf)?;
    ClassifierModel::from_network(Network::with_params(
        crate::classifier::classifier_layers(),
        &[1, IMAGE_ROWS, IMAGE_COLS],
        params,
    )?)
}

fn cmd_train_ae(ctx: &Ctx, input: &ImageInput) -> Result<()> {
    let (_, images) = load_images(&input.manifest, &input.filter)?;
    let trained = train_autoencoder(&images, &ctx.config.autoencoder())?;
    save_model(&ctx.path("ae.model"), NetName::Ae, &trained.model.network().params)?;
    let mut csv = String::from("epoch,mse\n");
    for (i, l) in trained.loss_history.iter().enumerate() {
        let _ = writeln!(csv, "{i},{l}");
    }
    write_text(&ctx.path("ae_loss.csv"), &csv)?;
    ctx.say(&format!(
        "train-ae: {} images, {} epochs, final mse {:.6}",
        images.len(),
        trained.loss_history.len(),
        trained.loss_history.last().copied().unwrap_or(f64::NAN)
    ));
    Ok(())
}

fn cmd_train_gan(ctx: &Ctx, input: &ImageInput, ae_path: &Path) -> Result<()> {
    let ae = load_autoencoder(ae_path)?;
    let (_, images) = load_images(&input.manifest, &input.filter)?;
    let (healthy, patients): (Vec<_>, Vec<_>) = images.into_iter().partition(|i| i.meta.label == Label::Healthy);
    let cfg = ctx.config.gan();
    let every = (cfg.iterations / 20).max(1);
    let trained = train_n2rpp_with(&patients, &healthy, &ae, &cfg, |row, _, _| {
        if (row.iteration + 1) % every == 0 {
            ctx.progress(&format!(
                "iteration {:>6}  l_G {:.4}  l_D {:.4}  d_acc {:.3}",
                row.iteration + 1,
                row.g_loss,
                row.d_loss,
                row.d_accuracy
            ));
        }
    })?;
    save_model(
        &ctx.path("gen.model"),
        NetName::Gen,
        &trained.generator.network().params,
    )?;
    save_model(
        &ctx.path("disc.model"),
        NetName::Disc,
        &trained.discriminator.network().params,
    )?;
    let mut csv = String::from("iteration,l_G,l_D,d_accuracy\n");
    for r in &trained.trace {
        let _ = writeln!(csv, "{},{},{},{}", r.iteration, r.g_loss, r.d_loss, r.d_accuracy);
    }
    write_text(&ctx.path("gan_trace.csv"), &csv)?;
    let last = trained.trace.last().expect("at least one iteration");
    ctx.say(&format!(
        "train-gan: {} patients, {} healthy, {} iterations, final l_G {:.4} l_D {:.4}",
        patients.len(),
        healthy.len(),
        trained.trace.len(),
        last.g_loss,
        last.d_loss
    ));
    Ok(())
}

fn absolute_manifest(manifest: &Manifest, indices: &[usize]) -> Result<Manifest> {
    let mut m = Manifest::new("");
    for &i in indices {
        let r = &manifest.records[i];
        let resolved = manifest.resolve(r);
        let path = std::path::absolute(&resolved).map_err(|e| Error::io(&resolved, e))?;
        m.records.push(ManifestRecord { path, ..r.clone() });
    }
    Ok(m)
}

fn cmd_train_clf(ctx: &Ctx, input: &ImageInput) -> Result<()> {
    let (manifest, images) = load_images(&input.manifest, &input.filter)?;
    let labels: Vec<Label> = images.iter().map(|i| i.meta.label).collect();
    let split = split_dataset(&labels, &ctx.config.split())?;
    for (name, idx) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        absolute_manifest(&manifest, idx)?.save(&ctx.path(&format!("split_{name}.tsv")))?;
    }
    let pick = |idx: &[usize]| idx.iter().map(|&i| images[i].clone()).collect::<Vec<_>>();
    let trained = train_classifier(&pick(&split.train), &pick(&split.val), &ctx.config.classifier())?;
    save_model(&ctx.path("clf.model"), NetName::Clf, &trained.model.network().params)?;
    let mut csv = String::from("epoch,train_loss,train_accuracy,val_accuracy\n");
    for e in &trained.history {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            e.epoch, e.train_loss, e.train_accuracy, e.val_accuracy
        );
    }
    write_text(&ctx.path("clf_history.csv"), &csv)?;
    let best = &trained.history[trained.best_epoch];
    ctx.say(&format!(
        "train-clf: {}/{}/{} train/val/test, best epoch {} with val accuracy {:.4}",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        trained.best_epoch,
        best.val_accuracy
    ));
    Ok(())
}

/// `eval_samples.csv` columns.
pub const EVAL_SAMPLE_COLUMNS: &str = "set,case_id,label,score,predicted";
/// `eval_summary.csv` columns; fields that do not apply are left empty.
pub const EVAL_SUMMARY_COLUMNS: &str = "n_labeled,accuracy,auc,n_rebuilt,rebuild_pass_rate,threshold";

fn predicted(score: f64) -> Label {
    if score >= THRESHOLD {
        Label::Healthy
    } else {
        Label::Acld
    }
}

fn cmd_eval(
    ctx: &Ctx,
    clf_path: &Path,
    manifest: Option<&Path>,
    rebuilt: Option<&Path>,
    filter: &Filter,
) -> Result<()> {
    if manifest.is_none() && rebuilt.is_none() {
        return Err(Error::InvalidInput("eval needs --manifest and/or --rebuilt".into()));
    }
    let model = load_classifier(clf_path)?;
    let mut samples = format!("{EVAL_SAMPLE_COLUMNS}\n");
    let mut summary_fields = [
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
    ];
    let mut line = Vec::new();
    if let Some(path) = manifest {
        let (_, images) = load_images(path, filter)?;
        let report = evaluate(&model, &images)?;
        for s in &report.samples {
            let _ = writeln!(
                samples,
                "labeled,{},{},{},{}",
                s.case_id,
                s.label,
                s.score,
                predicted(s.score)
            );
        }
        summary_fields[0] = images.len().to_string();
        summary_fields[1] = report.accuracy.to_string();
        summary_fields[2] = report.auc.to_string();
        line.push(format!(
            "accuracy {:.4} auc {:.4} on {}",
            report.accuracy,
            report.auc,
            images.len()
        ));
    }
    if let Some(path) = rebuilt {
        let (_, images) = load_images(path, filter)?;
        let scores = model.predict_batch(&images.iter().collect::<Vec<_>>())?;
        for (img, &s) in images.iter().zip(&scores) {
            let _ = writeln!(
                samples,
                "rebuilt,{},{},{},{}",
                img.meta.case_id,
                img.meta.label,
                s,
                predicted(s)
            );
        }
        let rate = pass_rate(&scores);
        summary_fields[3] = images.len().to_string();
        summary_fields[4] = rate.to_string();
        line.push(format!("rebuild pass rate {rate:.4} on {}", images.len()));
    }
    write_text(&ctx.path("eval_samples.csv"), &samples)?;
    write_text(
        &ctx.path("eval_summary.csv"),
        &format!("{EVAL_SUMMARY_COLUMNS}\n{},{THRESHOLD}\n", summary_fields.join(",")),
    )?;
    ctx.say(&format!("eval: {}", line.join(", ")));
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn cmd_rebuild(ctx: &Ctx, input: &ImageInput, ae_path: &Path, gen_path: &Path) -> Result<()> {
    let ae = load_autoencoder(ae_path)?;
    let g = load_generator(gen_path)?;
    let (manifest, images) = load_images(&input.manifest, &input.filter)?;
    let mut out = Manifest::new(&ctx.out);
    for (r, img) in manifest.records.iter().zip(&images) {
        let rebuilt = rebuild(img, &ae, &g)?;
        let name = format!("{}_rebuilt.pimg", stem(&r.path));
        write_image(&ctx.path(&name), &rebuilt)?;
        out.records.push(ManifestRecord {
            path: name.into(),
            ..r.clone()
        });
    }
    out.save(&ctx.path("manifest.tsv"))?;
    ctx.say(&format!("rebuild: {} images", images.len()));
    Ok(())
}

/// Splits a signed grid into positive and negative parts on a shared scale.
fn signed_parts(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    (
        values.iter().map(|v| v.max(0.0) / scale).collect(),
        values.iter().map(|v| (-v).max(0.0) / scale).collect(),
    )
}

fn cmd_visualize(
    ctx: &Ctx,
    input: &ImageInput,
    ae_path: &Path,
    gen_path: &Path,
    clf_path: &Path,
    limit: Option<usize>,
) -> Result<()> {
    let ae = load_autoencoder(ae_path)?;
    let g = load_generator(gen_path)?;
    let clf = load_classifier(clf_path)?;
    let (manifest, images) = load_images(&input.manifest, &input.filter)?;
    let n = limit.unwrap_or(images.len()).min(images.len());
    let mut regions = String::from("case_id,toes,forefoot,midfoot,heel\n");
    for (r, img) in manifest.records.iter().zip(&images).take(n) {
        let s = stem(&r.path);
        let rebuilt = rebuild(img, &ae, &g)?;
        let diff = diff_heatmap(img, &rebuilt)?;
        let saliency = guided_backprop(&clf, &rebuilt)?;
        write_pgm(
            &ctx.path(&format!("{s}_original.pgm")),
            img.grid(),
            IMAGE_ROWS,
            IMAGE_COLS,
        )?;
        write_pgm(
            &ctx.path(&format!("{s}_rebuilt.pgm")),
            rebuilt.grid(),
            IMAGE_ROWS,
            IMAGE_COLS,
        )?;
        write_grid_csv(&ctx.path(&format!("{s}_diff.csv")), &diff.grid, IMAGE_COLS)?;
        let (pos, neg) = signed_parts(&diff.grid);
        write_pgm(&ctx.path(&format!("{s}_diff_pos.pgm")), &pos, IMAGE_ROWS, IMAGE_COLS)?;
        write_pgm(&ctx.path(&format!("{s}_diff_neg.pgm")), &neg, IMAGE_ROWS, IMAGE_COLS)?;
        write_grid_csv(&ctx.path(&format!("{s}_saliency.csv")), &saliency.grid, IMAGE_COLS)?;
        let (sal_pos, _) = signed_parts(&saliency.grid);
        write_pgm(
            &ctx.path(&format!("{s}_saliency.pgm")),
            &sal_pos,
            IMAGE_ROWS,
            IMAGE_COLS,
        )?;
        let st = region_stats(&diff);
        let _ = writeln!(
            regions,
            "{},{},{},{},{}",
            r.case_id, st.toes, st.forefoot, st.midfoot, st.heel
        );
    }
    write_text(&ctx.path("regions.csv"), &regions)?;
    ctx.say(&format!("visualize: {n} images"));
    Ok(())
}

fn cmd_gradcheck(ctx: &Ctx, seeds: u64) -> Result<()> {
    let results = run_suite(0..seeds)?;
    let mut csv = String::from("case,seed,max_param_error,max_input_error,passed\n");
    let mut failed = Vec::new();
    for r in &results {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.name,
            r.seed,
            r.report.max_param_error,
            r.report.max_input_error,
            r.passed()
        );
        if !r.passed() {
            failed.push(format!("{} seed {}", r.name, r.seed));
        }
    }
    write_text(&ctx.path("gradcheck.csv"), &csv)?;
    let worst = results.iter().map(|r| r.report.max_error()).fold(0.0, f64::max);
    ctx.say(&format!(
        "gradcheck: {} checks, worst relative error {worst:.3e} (tolerance {TOLERANCE:e})",
        results.len()
    ));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::CheckFailed(failed.join(", ")))
    }
}
