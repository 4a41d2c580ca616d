use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use gesture_sig::data::{
    load_jsonl, save_jsonl, synth_generate, AugmentConfig, DatasetManifest, SkeletonSequence,
    SynthConfig,
};
use gesture_sig::features::ps_multadds;
use gesture_sig::net::{
    count_multadds, evaluate, featurize_sequences, first_layer_matrix, gradcheck, load_checkpoint,
    prepare_samples, save_checkpoint, train, write_matrix_csv, write_metrics_csv, Architecture,
    InputPipeline, MultiStreamNet, Variant,
};
use gesture_sig::signature::SigDepthConfig;
use gesture_sig::transforms::DyadicConfig;
use gesture_sig::{FeatureBundle, FeatureConfig, FeatureKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{content_hash, RunConfig};
use crate::{
    Cli, CliError, Command, ConfigArgs, CountOpsArgs, DumpWeightsArgs, EvalArgs, FeaturizeArgs,
    GradcheckArgs, Switch, SynthArgs, TrainArgs,
};

pub const SEQUENCES_FILE: &str = "sequences.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.toml";

type CmdResult = Result<(), CliError>;

/// Runs one subcommand, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CmdResult {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Featurize(a) => cmd_featurize(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
        Command::CountOps(a) => cmd_count_ops(&a, out),
        Command::DumpWeights(a) => cmd_dump_weights(&a, out),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_kind(s: &str) -> Result<FeatureKind, CliError> {
    FeatureKind::ALL
        .into_iter()
        .find(|k| k.name() == s.trim())
        .ok_or_else(|| usage(format!("unknown feature family {s:?}, expected rc, s_ps, t_ps or t_s_ps")))
}

/// Config file, then flags; validated before any work starts.
pub fn resolve(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut cfg =
        RunConfig::load_or_default(args.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(a) = &args.arch {
        cfg.arch = a.parse::<Variant>().map_err(|e| usage(e.to_string()))?;
    }
    if let Some(t) = args.ttm {
        cfg.ttm = t == Switch::On;
    }
    if let Some(h) = args.hidden {
        cfg.hidden = h;
    }
    if let Some(list) = &args.inputs {
        cfg.inputs = list.iter().map(|s| parse_kind(s)).collect::<Result<_, _>>()?;
    }
    let f = &mut cfg.features;
    if let Some(v) = args.frames {
        f.frames = v;
    }
    if let Some(v) = args.m_s {
        f.depths.spatial = v;
    }
    if let Some(v) = args.m_t {
        f.depths.temporal = v;
    }
    if let Some(v) = args.m_ts {
        f.depths.temporal_spatial = v;
    }
    if let Some(v) = args.l_t {
        f.dyadic.temporal = v;
    }
    if let Some(v) = args.l_ts {
        f.dyadic.temporal_spatial = v;
    }
    let t = &mut cfg.train;
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.batch {
        t.batch = v;
    }
    if let Some(v) = args.seed {
        t.seed = v;
    }
    if let Some(v) = args.dropout {
        t.dropout = v;
    }
    if let Some(v) = args.momentum {
        t.momentum = v;
    }
    if let Some(v) = args.alpha0 {
        t.alpha0 = v;
    }
    if let Some(v) = args.lambda {
        t.lambda = v;
    }
    if let Some(list) = &args.aug {
        let mut aug = AugmentConfig::none();
        for item in list {
            match item.trim() {
                "all" => aug = AugmentConfig::default(),
                "none" => aug = AugmentConfig::none(),
                "temporal" => aug.temporal = true,
                "rotation" => aug.rotation = true,
                "noise" => aug.noise = true,
                other => {
                    return Err(usage(format!(
                        "unknown augmentation {other:?}, expected all, none, temporal, rotation or noise"
                    )))
                }
            }
        }
        cfg.augment = aug;
    }
    cfg.validate().map_err(|e| usage(format!("{e:#}")))?;
    Ok(cfg)
}

/// `{"config": ..., "hash": ...}` as embedded in artifacts.
fn provenance(cfg: &RunConfig) -> serde_json::Value {
    serde_json::json!({ "config": cfg.to_json(), "hash": cfg.hash() })
}

fn comment_header(w: &mut dyn Write, cfg: &RunConfig) -> std::io::Result<()> {
    writeln!(w, "# run_config {}", cfg.to_json())?;
    writeln!(w, "# config_hash {}", cfg.hash())
}

fn data_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.data
        .as_deref()
        .ok_or_else(|| usage("no dataset given (use --data or `data` in the config)"))
}

fn load_dataset(dir: &Path) -> anyhow::Result<(Vec<SkeletonSequence>, DatasetManifest)> {
    let seqs = load_jsonl(dir.join(SEQUENCES_FILE))
        .with_context(|| format!("loading {}", dir.join(SEQUENCES_FILE).display()))?;
    let manifest = DatasetManifest::load(dir.join(MANIFEST_FILE))
        .with_context(|| format!("loading {}", dir.join(MANIFEST_FILE).display()))?;
    manifest.validate(&seqs)?;
    Ok((seqs, manifest))
}

fn split_ids<'m>(manifest: &'m DatasetManifest, split: &str) -> Result<&'m [String], CliError> {
    match split {
        "train" => Ok(&manifest.splits.train),
        "val" => Ok(&manifest.splits.val),
        "test" => Ok(&manifest.splits.test),
        other => Err(usage(format!("unknown split {other:?}, expected train, val or test"))),
    }
}

pub fn build_architecture(cfg: &RunConfig, classes: usize) -> gesture_sig::Result<Architecture> {
    Architecture::new(
        cfg.arch,
        &cfg.inputs,
        cfg.features.dims()?,
        cfg.frame_width(),
        classes,
        cfg.hidden,
        cfg.train.dropout,
        cfg.ttm,
    )
}

fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = SynthConfig {
        classes: a.classes,
        per_class: a.per_class,
        val_per_class: a.val_per_class,
        test_per_class: a.test_per_class,
        seed: a.seed,
        frames: a.frames,
        jitter: a.jitter,
        noise: a.noise,
        ..SynthConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let (seqs, mut manifest) = synth_generate(&cfg)?;
    let json = serde_json::to_value(&cfg).map_err(|e| anyhow!(e))?;
    manifest.run_config = Some(serde_json::json!({
        "synth": json,
        "hash": content_hash(&json),
    }));
    fs::create_dir_all(&a.out)?;
    save_jsonl(a.out.join(SEQUENCES_FILE), &seqs)?;
    manifest.save(a.out.join(MANIFEST_FILE))?;
    writeln!(
        out,
        "wrote {} sequences ({} classes) to {}",
        seqs.len(),
        manifest.classes.len(),
        a.out.display()
    )?;
    Ok(())
}

fn cmd_featurize(a: &FeaturizeArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(&a.cfg)?;
    let dims = cfg.features.dims()?;
    if a.report_dims {
        let f = &cfg.features;
        writeln!(out, "feature hash {}", f.hash())?;
        writeln!(
            out,
            "rc      {:>8}  ({} coords x {} joints x {} frames)",
            dims.rc,
            f.aoh.dim,
            f.aoh.single_joints.len(),
            f.frames
        )?;
        writeln!(
            out,
            "s_ps    {:>8}  ({} pairs, depth {}, {} frames)",
            dims.s_ps,
            f.aoh.pair_count(),
            f.depths.spatial,
            f.frames
        )?;
        writeln!(
            out,
            "t_ps    {:>8}  ({} joints, {} dyadic pieces, depth {})",
            dims.t_ps,
            f.aoh.single_joints.len(),
            gesture_sig::transforms::dyadic_count(f.dyadic.temporal),
            f.depths.temporal
        )?;
        writeln!(
            out,
            "t_s_ps  {:>8}  ({} pairs, {} dyadic pieces, depth {})",
            dims.t_s_ps,
            f.aoh.pair_count(),
            gesture_sig::transforms::dyadic_count(f.dyadic.temporal_spatial),
            f.depths.temporal_spatial
        )?;
        writeln!(out, "total   {:>8}", dims.total())?;
        return Ok(());
    }
    let dir = data_dir(&cfg)?.to_path_buf();
    let (seqs, _) = load_dataset(&dir)?;
    let bundles = featurize_sequences(&seqs, &cfg.features)?;
    let path = a.out.clone().unwrap_or_else(|| dir.join("features.jsonl"));
    let mut w = BufWriter::new(fs::File::create(&path)?);
    let hash = cfg.features.hash();
    serde_json::to_writer(
        &mut w,
        &serde_json::json!({
            "run_config": cfg.to_json(),
            "config_hash": cfg.hash(),
            "feature_hash": hash,
            "dims": dims,
        }),
    )
    .map_err(|e| anyhow!(e))?;
    writeln!(w)?;
    for (s, b) in seqs.iter().zip(&bundles) {
        serde_json::to_writer(
            &mut w,
            &serde_json::json!({
                "id": s.id,
                "label": s.label,
                "feature_hash": hash,
                "rc": b.rc,
                "s_ps": b.s_ps,
                "t_ps": b.t_ps,
                "t_s_ps": b.t_s_ps,
            }),
        )
        .map_err(|e| anyhow!(e))?;
        writeln!(w)?;
    }
    w.flush()?;
    writeln!(out, "wrote {} feature records to {}", bundles.len(), path.display())?;
    Ok(())
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(&a.cfg)?;
    let (seqs, manifest) = load_dataset(data_dir(&cfg)?)?;
    let arch = build_architecture(&cfg, manifest.classes.len())?;
    let mut net = MultiStreamNet::new(arch, &mut ChaCha8Rng::seed_from_u64(cfg.train.seed))?;
    let kinds = net.arch.feature_kinds();
    let train_set = prepare_samples(
        &manifest.select(&seqs, &manifest.splits.train)?,
        &cfg.features,
        &kinds,
    )?;
    let val_set = prepare_samples(
        &manifest.select(&seqs, &manifest.splits.val)?,
        &cfg.features,
        &kinds,
    )?;
    let pipeline = InputPipeline::new(&cfg.features, &net, cfg.augment.clone(), cfg.train.seed);
    let metrics = train(&mut net, &train_set, &val_set, &pipeline, &cfg.train, |_| {})?;

    fs::create_dir_all(&a.out)?;
    save_checkpoint(a.out.join(CHECKPOINT_FILE), &net, &cfg.features, &provenance(&cfg))?;
    let mut w = BufWriter::new(fs::File::create(a.out.join(METRICS_FILE))?);
    comment_header(&mut w, &cfg)?;
    write_metrics_csv(&mut w, &metrics)?;
    w.flush()?;
    fs::write(
        a.out.join(CONFIG_FILE),
        format!(
            "# config_hash {}\n{}",
            cfg.hash(),
            toml::to_string(&cfg).map_err(|e| anyhow!(e))?
        ),
    )?;
    let last = metrics.last().expect("at least one epoch");
    writeln!(
        out,
        "trained {} for {} epochs: loss {:.4}, train accuracy {:.2}; wrote {}",
        net.arch.variant,
        last.epoch,
        last.loss,
        last.train_acc,
        a.out.display()
    )?;
    Ok(())
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(&a.cfg)?;
    let (net, meta) = load_checkpoint(&a.checkpoint)
        .with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let hash = cfg.features.hash();
    if hash != meta.feature_hash {
        return Err(anyhow!(
            "feature config hash {hash} does not match checkpoint hash {}; \
             pass the feature settings used for training",
            meta.feature_hash
        )
        .into());
    }
    let (seqs, manifest) = load_dataset(data_dir(&cfg)?)?;
    if manifest.classes.len() != net.arch.classes {
        return Err(anyhow!(
            "dataset has {} classes, checkpoint expects {}",
            manifest.classes.len(),
            net.arch.classes
        )
        .into());
    }
    let ids = split_ids(&manifest, &a.split)?;
    let samples = prepare_samples(&manifest.select(&seqs, ids)?, &cfg.features, &net.arch.feature_kinds())?;
    let pipeline = InputPipeline::new(&cfg.features, &net, AugmentConfig::none(), 0);
    let report = evaluate(&net, &samples, &pipeline)?;
    writeln!(out, "split {} ({} sequences)", a.split, samples.len())?;
    writeln!(out, "accuracy {:.2}", report.accuracy)?;
    writeln!(out, "confusion (rows true, columns predicted):")?;
    let width = manifest.classes.iter().map(String::len).max().unwrap_or(0);
    for (name, row) in manifest.classes.iter().zip(&report.confusion) {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>4}")).collect();
        writeln!(out, "  {name:<width$} {}", cells.join(""))?;
    }
    writeln!(out, "mean |delta| {:.4}", report.mean_abs_delta)?;
    Ok(())
}

/// Small feature layout that keeps finite differences cheap.
pub fn toy_feature_config() -> FeatureConfig {
    FeatureConfig {
        depths: SigDepthConfig {
            spatial: 2,
            temporal: 2,
            temporal_spatial: 2,
        },
        dyadic: DyadicConfig {
            temporal: 1,
            temporal_spatial: 1,
        },
        frames: 8,
        ..FeatureConfig::default()
    }
}

/// Toy network and batch for gradient checks. The localization network's
/// output layer is randomized so `Δ` is non-zero and off the integer grid.
pub fn toy_problem(
    variant: Variant,
    ttm: bool,
    hidden: usize,
    classes: usize,
    samples: usize,
    seed: u64,
) -> anyhow::Result<(MultiStreamNet, Vec<FeatureBundle>, Vec<usize>)> {
    let features = toy_feature_config();
    let per_class = samples.div_ceil(classes).max(1);
    let (seqs, _) = synth_generate(&SynthConfig::new(classes, per_class, seed))?;
    // Interleave classes so a small batch sees more than one label.
    let mut picked: Vec<SkeletonSequence> = Vec::new();
    for i in 0..per_class {
        for c in 0..classes {
            picked.push(seqs[c * per_class + i].clone());
        }
    }
    picked.truncate(samples);
    let bundles = featurize_sequences(&picked, &features)?;
    let labels = picked.iter().map(|s| s.label.expect("synthetic labels")).collect();
    let arch = Architecture::new(
        variant,
        &FeatureKind::ALL,
        features.dims()?,
        features.aoh.dim * features.aoh.single_joints.len(),
        classes,
        hidden,
        0.0,
        ttm,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = MultiStreamNet::new(arch, &mut rng)?;
    if let Some(ln) = &mut net.params.ttm {
        for w in &mut ln.w2 {
            *w = rng.random_range(-0.05..0.05);
        }
        ln.b2 = 0.37;
    }
    Ok((net, bundles, labels))
}

fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> CmdResult {
    let variant = a.arch.parse::<Variant>().map_err(|e| usage(e.to_string()))?;
    if a.samples == 0 || a.hidden == 0 || !(a.step > 0.0) {
        return Err(usage("samples, hidden and step must be positive"));
    }
    if !(2..=8).contains(&a.classes) {
        return Err(usage("gradcheck supports 2..=8 classes"));
    }
    let (net, bundles, labels) =
        toy_problem(variant, a.ttm == Switch::On, a.hidden, a.classes, a.samples, a.seed)?;
    let checks = gradcheck(&net, &bundles, &labels, a.step)?;
    let mut worst = 0.0f64;
    for c in &checks {
        writeln!(
            out,
            "{:<16} {:>7} params  rel error {:.3e}  max abs error {:.3e}",
            c.name, c.len, c.rel_error, c.max_abs_error
        )?;
        worst = worst.max(c.rel_error);
    }
    writeln!(out, "max relative error {worst:.3e}")?;
    if !(worst <= a.tolerance) {
        return Err(anyhow!("gradient check failed: {worst:.3e} > {:.1e}", a.tolerance).into());
    }
    Ok(())
}

fn cmd_count_ops(a: &CountOpsArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = resolve(&a.cfg)?;
    if a.classes < 2 {
        return Err(usage("need at least two classes"));
    }
    let arch = build_architecture(&cfg, a.classes)?;
    let ops = count_multadds(&arch);
    writeln!(out, "network ({} {} classes, hidden {})", arch.variant, arch.classes, arch.hidden)?;
    for l in &ops.layers {
        writeln!(out, "  {:<14} {:>7} x {:<4} {:>12}", l.name, l.input, l.output, l.multadds)?;
    }
    writeln!(out, "  {:<27} {:>12}", "total", ops.total())?;
    writeln!(out, "  {:<27} {:>12}", "of which ttm", ops.ttm())?;
    let ps = ps_multadds(&cfg.features)?;
    writeln!(out, "signature extraction (per clip)")?;
    writeln!(out, "  {:<27} {:>12}", "s_ps", ps.s_ps)?;
    writeln!(out, "  {:<27} {:>12}", "t_ps", ps.t_ps)?;
    writeln!(out, "  {:<27} {:>12}", "t_s_ps", ps.t_s_ps)?;
    writeln!(out, "  {:<27} {:>12}", "total", ps.total())?;
    writeln!(
        out,
        "network {:.2}M + extraction {:.2}M mult-adds",
        ops.total() as f64 / 1e6,
        ps.total() as f64 / 1e6
    )?;
    Ok(())
}

fn cmd_dump_weights(a: &DumpWeightsArgs, out: &mut dyn Write) -> CmdResult {
    let (net, meta) = load_checkpoint(&a.checkpoint)
        .with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let rows = first_layer_matrix(&net, a.stream).map_err(|e| usage(e.to_string()))?;
    let mut w = BufWriter::new(fs::File::create(&a.out)?);
    writeln!(w, "# run_config {}", meta.run_config)?;
    writeln!(w, "# stream {} fc1, {} neurons x {} inputs", a.stream, rows.len(), rows[0].len())?;
    write_matrix_csv(&mut w, &rows)?;
    writeln!(
        out,
        "wrote {}x{} weights to {}",
        rows.len(),
        rows[0].len(),
        PathBuf::from(&a.out).display()
    )?;
    Ok(())
}
