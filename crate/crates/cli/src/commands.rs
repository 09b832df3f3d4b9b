use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use shear_core::data::{split_train_test, CsvOptions, Dataset, FeatureSchema, Target};
use shear_core::explain::{
    waterfall, BackgroundSet, ExplainMethod, KernelSamples, Method, DEFAULT_KERNEL_SAMPLES,
};
use shear_core::model::{file_checksum_hex, ModelBundle};
use shear_core::numeric::Rng;
use shear_core::synth::{generate, GeneratorSpec};
use shear_core::train::{
    cross_validate, evaluate, grid_search, parse_prediction_csv, run_ablation, train, AblationPlan, AblationVariant,
    CvReport, ExternalPredictions, HyperGrid, Metrics, Protocol,
};
use shear_service::{router, AppState, LoadedModel, ServiceConfig};

use crate::args::*;
use crate::config::{FileConfig, ResolvedMethod};
use crate::CliError;

/// Exact enumeration limit for the CLI: wide enough for the seventeen MSW
/// features. Cost grows with `2^M` times the background size.
const CLI_EXACT_LIMIT: usize = 17;
const DEFAULT_K: usize = 10;
const DEFAULT_TEST_FRACTION: f64 = 0.1;
const DEFAULT_ADDR: &str = "127.0.0.1:8080";
const ACCURACY_TOL: f64 = 1e-6;

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::GenData(a) => gen_data(&cfg, a),
        Command::Train(a) => train_cmd(&cfg, a),
        Command::Evaluate(a) => evaluate_cmd(&cfg, a),
        Command::Cv(a) => cv_cmd(&cfg, a),
        Command::GridSearch(a) => grid_cmd(&cfg, a),
        Command::Ablate(a) => ablate_cmd(&cfg, a),
        Command::Explain(a) => explain_cmd(&cfg, a),
        Command::Summary(a) => summary_cmd(&cfg, a),
        Command::Serve(a) => serve_cmd(&cfg, a),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn load_schema(cfg: &FileConfig, flag: Option<&Path>) -> Result<FeatureSchema, CliError> {
    match flag.or(cfg.data.schema.as_deref()) {
        Some(p) => Ok(FeatureSchema::from_toml_str(&read_text(p)?)?),
        None => Ok(FeatureSchema::default_msw()),
    }
}

fn load_csv(path: &Path, schema: &FeatureSchema, ignore_extra: bool) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let options = CsvOptions {
        ignore_extra_columns: ignore_extra,
    };
    Dataset::load_csv(std::io::BufReader::new(file), schema, options)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn load_data(cfg: &FileConfig, a: &DataArgs, target: Target) -> Result<Dataset, CliError> {
    let schema = load_schema(cfg, a.schema.as_deref())?;
    let ignore = a.ignore_extra_columns || cfg.data.ignore_extra_columns.unwrap_or(false);
    Ok(load_csv(&a.data, &schema, ignore)?.with_target(target))
}

fn target(cfg: &FileConfig, flag: Option<TargetArg>) -> Target {
    flag.map(Target::from).or(cfg.data.target).unwrap_or(Target::Friction)
}

fn load_model(path: &Path) -> Result<(ModelBundle, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let bundle = ModelBundle::from_bytes(&bytes).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let checksum = file_checksum_hex(&bytes).expect("decoded model has a trailer");
    Ok((bundle, checksum))
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.digits$}"))
}

fn metrics_line(m: &Metrics, unit: &str) -> String {
    format!(
        "n={} MAE={:.4} {unit} MAPE={}% R2={}",
        m.n,
        m.mae,
        fmt_opt(m.mape, 2),
        fmt_opt(m.r2, 4)
    )
}

fn gen_data(cfg: &FileConfig, a: GenDataArgs) -> Result<(), CliError> {
    let schema = load_schema(cfg, a.schema.as_deref())?;
    let spec = match a.spec.as_deref().or(cfg.gen_data.spec.as_deref()) {
        Some(p) => GeneratorSpec::from_toml_str(&read_text(p)?)?,
        None => GeneratorSpec::default(),
    };
    let seed = a.seed.or(cfg.gen_data.seed).unwrap_or(0);
    let synth = generate(&spec, &schema, a.n, &mut Rng::new(seed))?;
    synth.dataset.write_csv(create(&a.out)?)?;
    if let Some(path) = &a.truth {
        let mut w = create(path)?;
        let io = |e| CliError::io(path, e);
        writeln!(w, "sample_id,friction_angle_deg,cohesion_kpa").map_err(io)?;
        for (i, (f, c)) in synth.truth.iter().enumerate() {
            writeln!(w, "{i},{f},{c}").map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    if let Some(path) = &a.write_spec {
        std::fs::write(path, spec.to_toml_string()).map_err(|e| CliError::io(path, e))?;
    }
    println!("wrote {} samples to {} (seed {seed})", a.n, a.out.display());
    Ok(())
}

fn default_loss_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".loss.csv");
    PathBuf::from(s)
}

fn train_cmd(cfg: &FileConfig, a: TrainArgs) -> Result<(), CliError> {
    let target = target(cfg, a.target);
    let data = load_data(cfg, &a.data, target)?;
    let (mlp, config) = cfg.hyper(&a.hyper, data.schema.len())?;
    let fraction = a.test_fraction.or(cfg.train.test_fraction).unwrap_or(DEFAULT_TEST_FRACTION);
    let (train_set, test_set) = split_train_test(&data, fraction, &mut Rng::new(config.seed))?;
    let (bundle, curve) = train(&train_set, &test_set, &mlp, &config)?;
    bundle.save(&a.out)?;
    let loss_path = a.loss_curve.unwrap_or_else(|| default_loss_path(&a.out));
    curve.write_csv(create(&loss_path)?)?;

    let unit = target.unit();
    println!(
        "trained {target} model {:?} for {} epochs (seed {})",
        mlp.hidden_sizes, config.epochs, config.seed
    );
    if let Some(last) = curve.last() {
        println!(
            "final scaled MSE: train {:.6}, test {:.6}",
            last.train_mse_scaled, last.test_mse_scaled
        );
    }
    println!("train: {}", metrics_line(&evaluate(&bundle, &train_set)?, unit));
    println!("test:  {}", metrics_line(&evaluate(&bundle, &test_set)?, unit));
    println!("model: {} (sha256 {})", a.out.display(), bundle.checksum_hex()?);
    println!("loss curve: {}", loss_path.display());
    Ok(())
}

fn evaluate_cmd(cfg: &FileConfig, a: EvaluateArgs) -> Result<(), CliError> {
    let (model, checksum) = load_model(&a.model)?;
    let ignore = a.data.ignore_extra_columns || cfg.data.ignore_extra_columns.unwrap_or(false);
    let data = load_csv(&a.data.data, &model.schema, ignore)?.with_target(model.target);
    let metrics = evaluate(&model, &data)?;
    println!("{}: {}", model.target, metrics_line(&metrics, model.target.unit()));
    if let Some(path) = &a.out {
        #[derive(Serialize)]
        struct Report<'a> {
            target: Target,
            model_checksum: &'a str,
            metrics: &'a Metrics,
        }
        write_json(
            path,
            &Report {
                target: model.target,
                model_checksum: &checksum,
                metrics: &metrics,
            },
        )?;
    }
    if let Some(path) = &a.predictions {
        let preds = model.predict_dataset(&data)?;
        let mut w = create(path)?;
        let io = |e| CliError::io(path, e);
        writeln!(w, "sample_id,prediction").map_err(io)?;
        for (i, p) in preds.iter().enumerate() {
            writeln!(w, "{i},{p}").map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

fn cv_lines(report: &CvReport, unit: &str) -> String {
    let mut out = String::new();
    for f in &report.folds {
        let _ = writeln!(out, "fold {:>2}: {}", f.fold + 1, metrics_line(&f.metrics, unit));
    }
    let _ = writeln!(out, "MAE:  {:.4} ± {:.4} {unit}", report.mae.mean, report.mae.std);
    match &report.mape {
        Some(s) => {
            let _ = writeln!(out, "MAPE: {:.2} ± {:.2} %", s.mean, s.std);
        }
        None => out.push_str("MAPE: n/a\n"),
    }
    match &report.r2 {
        Some(s) => {
            let _ = writeln!(out, "R2:   {:.4} ± {:.4}", s.mean, s.std);
        }
        None => out.push_str("R2:   n/a\n"),
    }
    out
}

fn cv_cmd(cfg: &FileConfig, a: CvArgs) -> Result<(), CliError> {
    let target = target(cfg, a.target);
    let data = load_data(cfg, &a.data, target)?;
    let (mlp, config) = cfg.hyper(&a.hyper, data.schema.len())?;
    let k = a.k.or(cfg.cv.k).unwrap_or(DEFAULT_K);
    let report = cross_validate(&data, &mlp, &config, k)?;
    println!("{k}-fold cross-validation, {target}, seed {}", config.seed);
    print!("{}", cv_lines(&report, target.unit()));
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    Ok(())
}

fn grid_cmd(cfg: &FileConfig, a: GridArgs) -> Result<(), CliError> {
    let target = target(cfg, a.target);
    let data = load_data(cfg, &a.data, target)?;
    let (mlp, config) = cfg.hyper(&a.hyper, data.schema.len())?;
    let grid = HyperGrid::from_toml_str(&read_text(&a.grid)?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", a.grid.display())))?;
    let k = a.k.or(cfg.cv.k).unwrap_or(DEFAULT_K);
    let results = grid_search(&data, &mlp, &config, &grid, k)?;
    println!("{} configurations, {k}-fold, {target}; best first", results.len());
    for (rank, r) in results.iter().enumerate() {
        let settings: Vec<String> = r
            .settings
            .iter()
            .map(|s| serde_json::to_value(s).map(|v| format!("{}={}", v["param"].as_str().unwrap_or("?"), v["value"])))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        println!(
            "{:>3}. MAE {:.4} ± {:.4}  {}",
            rank + 1,
            r.cv.mae.mean,
            r.cv.mae.std,
            settings.join(" ")
        );
    }
    if let Some(path) = &a.out {
        write_json(path, &results)?;
    }
    Ok(())
}

fn parse_layers(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Invalid(format!("variant {text:?} is not a comma-separated list of widths")))
}

fn parse_external(spec: &str) -> Result<ExternalPredictions, CliError> {
    let mut parts = spec.splitn(3, ':');
    let (Some(name), Some(target), Some(path)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(CliError::Invalid(format!("external {spec:?} is not NAME:TARGET:PATH")));
    };
    if name.is_empty() {
        return Err(CliError::Invalid(format!("external {spec:?} has an empty name")));
    }
    let target: Target = target.parse()?;
    let path = Path::new(path);
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let predictions =
        parse_prediction_csv(file).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    Ok(ExternalPredictions {
        name: name.to_owned(),
        target,
        predictions,
    })
}

fn ablate_cmd(cfg: &FileConfig, a: AblateArgs) -> Result<(), CliError> {
    let schema = load_schema(cfg, a.data.schema.as_deref())?;
    let ignore = a.data.ignore_extra_columns || cfg.data.ignore_extra_columns.unwrap_or(false);
    let data = load_csv(&a.data.data, &schema, ignore)?;
    let (mlp, config) = cfg.hyper(&a.hyper, schema.len())?;
    let variants = if a.variants.is_empty() {
        AblationVariant::standard()
    } else {
        a.variants
            .iter()
            .map(|v| parse_layers(v).map(|l| AblationVariant::new(&l)))
            .collect::<Result<_, _>>()?
    };
    let protocol = match a.protocol {
        ProtocolArg::Holdout => Protocol::Holdout {
            test_fraction: a.test_fraction.or(cfg.train.test_fraction).unwrap_or(DEFAULT_TEST_FRACTION),
        },
        ProtocolArg::Kfold => Protocol::KFold {
            k: a.k.or(cfg.cv.k).unwrap_or(DEFAULT_K),
        },
    };
    let plan = AblationPlan {
        variants,
        dropout_p: mlp.dropout_p,
        protocol,
        targets: match a.target {
            Some(t) => vec![t.into()],
            None => Target::ALL.to_vec(),
        },
        external: a.external.iter().map(|s| parse_external(s)).collect::<Result<_, _>>()?,
    };
    let table = run_ablation(&data, &plan, &config)?;
    print!("{}", table.to_text());
    if let Some(path) = &a.out {
        write_json(path, &table)?;
    }
    Ok(())
}

fn explain_method(m: &ResolvedMethod) -> ExplainMethod {
    match m.method {
        MethodArg::Exact => ExplainMethod::Exact {
            limit: m.exact_limit.unwrap_or(CLI_EXACT_LIMIT),
        },
        MethodArg::Kernel => ExplainMethod::Kernel {
            samples: KernelSamples::Sampled(m.n_samples.unwrap_or(DEFAULT_KERNEL_SAMPLES)),
            seed: m.seed,
        },
    }
}

fn background(model: &ModelBundle, m: &ResolvedMethod) -> Result<BackgroundSet, CliError> {
    match m.background {
        Some(size) => {
            let mut bg = BackgroundSet::sample(&model.background.rows, size, &mut Rng::new(m.seed))?;
            bg.source_size = model.background.source_size;
            Ok(bg)
        }
        None => Ok(model.background.clone()),
    }
}

#[derive(Serialize)]
struct StepReport<'a> {
    feature: Option<&'a str>,
    phi: f64,
    cumulative: f64,
}

#[derive(Serialize)]
struct InstanceReport<'a> {
    prediction: f64,
    base_value: f64,
    phi: Vec<f64>,
    feature_values: Vec<f64>,
    local_accuracy_error: f64,
    waterfall: Vec<StepReport<'a>>,
}

#[derive(Serialize)]
struct BackgroundReport {
    rows: usize,
    seed: u64,
    source_size: usize,
}

#[derive(Serialize)]
struct ExplainReport<'a> {
    target: Target,
    unit: &'a str,
    model_checksum: &'a str,
    features: Vec<&'a str>,
    method: Method,
    background: BackgroundReport,
    instances: Vec<InstanceReport<'a>>,
}

fn explain_cmd(cfg: &FileConfig, a: ExplainArgs) -> Result<(), CliError> {
    let (model, checksum) = load_model(&a.model)?;
    let ignore = a.ignore_extra_columns || cfg.data.ignore_extra_columns.unwrap_or(false);
    let input = load_csv(&a.input, &model.schema, ignore)?;
    if input.is_empty() {
        return Err(CliError::Invalid(format!("{}: no instances", a.input.display())));
    }
    let resolved = cfg.method(&a.method);
    let method = explain_method(&resolved);
    let bg = background(&model, &resolved)?;
    let names: Vec<&str> = model.schema.names().collect();
    let unit = model.target.unit();

    let mut instances = Vec::with_capacity(input.len());
    let mut used = None;
    for (i, s) in input.samples.iter().enumerate() {
        let e = model.explain_with_background(&s.features, &bg, &method)?;
        e.check_local_accuracy(ACCURACY_TOL)
            .map_err(|err| CliError::Invalid(format!("instance {i}: {err}")))?;
        used = Some(e.method);
        println!(
            "instance {i}: {} = {:.4} {unit} (base {:.4}, sum of attributions {:+.4})",
            model.target,
            e.prediction,
            e.base_value,
            e.phi.iter().sum::<f64>()
        );
        let steps = waterfall(&e);
        for st in steps.iter().skip(1).take(5) {
            let j = st.feature.expect("only the first step is the base");
            println!("  {:<18} {:>12} {:+.4}", names[j], s.features[j], st.phi);
        }
        instances.push(InstanceReport {
            prediction: e.prediction,
            base_value: e.base_value,
            local_accuracy_error: e.local_accuracy_error(),
            waterfall: steps
                .iter()
                .map(|st| StepReport {
                    feature: st.feature.map(|j| names[j]),
                    phi: st.phi,
                    cumulative: st.cumulative,
                })
                .collect(),
            phi: e.phi,
            feature_values: e.feature_values,
        });
    }

    if let Some(path) = &a.waterfall {
        let mut w = create(path)?;
        let io = |e| CliError::io(path, e);
        writeln!(w, "instance,step,feature,phi,cumulative").map_err(io)?;
        for (i, inst) in instances.iter().enumerate() {
            for (k, st) in inst.waterfall.iter().enumerate() {
                writeln!(w, "{i},{k},{},{},{}", st.feature.unwrap_or("base"), st.phi, st.cumulative).map_err(io)?;
            }
        }
        w.flush().map_err(io)?;
    }
    if let Some(path) = &a.out {
        let report = ExplainReport {
            target: model.target,
            unit,
            model_checksum: &checksum,
            features: names.clone(),
            method: used.expect("at least one instance"),
            background: BackgroundReport {
                rows: bg.len(),
                seed: bg.seed,
                source_size: bg.source_size,
            },
            instances,
        };
        write_json(path, &report)?;
    }
    Ok(())
}

fn summary_cmd(cfg: &FileConfig, a: SummaryArgs) -> Result<(), CliError> {
    let (mut model, checksum) = load_model(&a.model)?;
    let ignore = a.ignore_extra_columns || cfg.data.ignore_extra_columns.unwrap_or(false);
    let data = load_csv(&a.data, &model.schema, ignore)?;
    let resolved = cfg.method(&a.method);
    let method = explain_method(&resolved);
    model.background = background(&model, &resolved)?;
    let mut report = model.summary_report(&data, &method)?;
    report.model_checksum = checksum;
    let s = &report.summary;
    println!(
        "{} summary over {} instances ({} background rows)",
        model.target,
        data.len(),
        model.background.len()
    );
    println!("rank  {:<18} {:>12} {:>12} {:>10}", "feature", "mean|phi|", "mean phi", "direction");
    for (rank, &j) in s.ranking.iter().enumerate() {
        println!(
            "{:>4}  {:<18} {:>12.4} {:>12.4} {:>10}",
            rank + 1,
            report.features[j],
            s.mean_abs_phi[j],
            s.mean_phi[j],
            fmt_opt(s.direction[j], 3)
        );
    }
    if let Some(path) = &a.scatter {
        let mut w = create(path)?;
        let io = |e| CliError::io(path, e);
        writeln!(w, "feature,value,phi").map_err(io)?;
        for (j, name) in report.features.iter().enumerate() {
            for (v, p) in s.scatter(j) {
                writeln!(w, "{name},{v},{p}").map_err(io)?;
            }
        }
        w.flush().map_err(io)?;
    }
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    Ok(())
}

fn serve_cmd(cfg: &FileConfig, a: ServeArgs) -> Result<(), CliError> {
    let s = &cfg.serve;
    let mut models = Vec::new();
    for path in [
        a.friction_model.as_ref().or(s.friction_model.as_ref()),
        a.cohesion_model.as_ref().or(s.cohesion_model.as_ref()),
    ]
    .into_iter()
    .flatten()
    {
        models.push(LoadedModel::load(path)?);
    }
    let defaults = ServiceConfig::default();
    let config = ServiceConfig {
        max_batch: a.max_batch.or(s.max_batch).unwrap_or(defaults.max_batch),
        exact_limit: a.exact_limit.or(s.exact_limit).unwrap_or(defaults.exact_limit),
        ..defaults
    };
    let mut state = AppState::new(models, config)?;
    for path in [
        a.friction_summary.as_ref().or(s.friction_summary.as_ref()),
        a.cohesion_summary.as_ref().or(s.cohesion_summary.as_ref()),
    ]
    .into_iter()
    .flatten()
    {
        state.load_summary(path)?;
    }
    let addr = a.addr.or_else(|| s.addr.clone()).unwrap_or_else(|| DEFAULT_ADDR.to_owned());
    let ui_dir = a.ui_dir.or_else(|| s.ui_dir.clone());

    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Invalid(format!("runtime: {e}")))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Invalid(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Invalid(e.to_string()))?;
        println!("listening on http://{local}");
        let targets: Vec<String> = state.models.keys().map(|t| t.to_string()).collect();
        tracing::info!(models = ?targets, "service ready");
        let app = router(Arc::new(state), ui_dir);
        shear_service::serve(listener, app)
            .await
            .map_err(|e| CliError::Invalid(format!("server: {e}")))
    })
}
