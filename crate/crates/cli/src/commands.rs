//! The four subcommands. Each resolves its settings up front, loads data,
//! delegates to the core library, and owns its output files; a failure after
//! files were created removes them so reruns never see partial output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bciqt::dataset::parse_idx_images;
use bciqt::evaluation::{train_models, ExperimentModels, MaskMode, ModelKind};
use bciqt::feature_selection::{select_top_k, select_top_k_for_category};
use bciqt::quantum::QuantumError;
use bciqt::{EvaluationReport, TrainedDetector};

use crate::data;
use crate::opts::{
    self, runtime, usage, CliError, ConfigFile, EvaluateArgs, OutputFormat, PredictArgs,
    SelectFeaturesArgs, TrainArgs,
};

pub fn evaluate(args: &EvaluateArgs, file: &ConfigFile) -> Result<(), CliError> {
    let train_source = data::train_source(&args.train_data, file)?;
    let test_source = data::test_source(&args.test_data, &args.train_data, file)?;
    let config = opts::resolve_experiment_config(
        &args.experiment,
        args.binarize,
        args.folds,
        args.knn_k,
        args.per_fold_selection,
        file,
    )?;
    let format = match args.format {
        Some(value) => value,
        None => file.get("format")?.unwrap_or(OutputFormat::Table),
    };
    let output = args.output.clone().or_else(|| file.get_path("output"));

    let train = data::load(&train_source)?;
    let test = data::load(&test_source)?;
    let report = bciqt::run_experiment(&train, &test, &config).map_err(runtime)?;

    match output {
        Some(path) => {
            write_report(&report, format, &path)?;
            print!("{}", report.render_table());
        }
        None => match format {
            OutputFormat::Table => print!("{}", report.render_table()),
            OutputFormat::Csv => print!("{}", report.to_csv_string()),
            OutputFormat::Json => println!("{}", report.to_json_string().map_err(runtime)?),
        },
    }
    Ok(())
}

fn write_report(
    report: &EvaluationReport,
    format: OutputFormat,
    path: &Path,
) -> Result<(), CliError> {
    let result = match format {
        OutputFormat::Table => fs::write(path, report.render_table()),
        OutputFormat::Csv => report.write_csv(path),
        OutputFormat::Json => report.write_json(path),
    };
    result.map_err(|error| {
        let _ = fs::remove_file(path);
        runtime(format!("writing {}: {error}", path.display()))
    })
}

pub fn train(args: &TrainArgs, file: &ConfigFile) -> Result<(), CliError> {
    let source = data::train_source(&args.train_data, file)?;
    let output_dir = args
        .output_dir
        .clone()
        .or_else(|| file.get_path("output_dir"))
        .ok_or_else(|| usage("--output-dir is required"))?;
    let mut config =
        opts::resolve_experiment_config(&args.experiment, None, None, None, None, file)?;
    if args.experiment.models.is_none() && !file.contains("models") {
        config.models = vec![ModelKind::Bciqt, ModelKind::Nb];
    }
    if config.models.contains(&ModelKind::Knn) {
        return Err(usage(
            "knn has no serialized model form; `evaluate` scores it directly from training data",
        ));
    }

    let train_set = data::load(&source)?;
    let models = train_models(&train_set, &config).map_err(runtime)?;
    fs::create_dir_all(&output_dir)
        .map_err(|error| runtime(format!("creating {}: {error}", output_dir.display())))?;

    let mut written = Vec::new();
    if let Err(error) = write_model_files(&models, &output_dir, &mut written) {
        for path in &written {
            let _ = fs::remove_file(path);
        }
        return Err(error);
    }
    println!("wrote {} files to {}", written.len(), output_dir.display());
    Ok(())
}

fn write_model_files(
    models: &ExperimentModels<f64>,
    dir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let save_mask = |category, path: PathBuf, written: &mut Vec<PathBuf>| {
        let mask = models.mask(category).expect("trained categories have masks");
        mask.save(&path).map_err(runtime)?;
        written.push(path);
        Ok::<(), CliError>(())
    };
    match models.mask_mode() {
        MaskMode::SharedMax => {
            save_mask(models.categories()[0], dir.join("mask.json"), written)?;
        }
        MaskMode::PerCategory => {
            for &category in models.categories() {
                save_mask(category, dir.join(format!("mask-{category}.json")), written)?;
            }
        }
    }
    for &category in models.categories() {
        if let Some(detector) = models.detector(category) {
            let path = dir.join(format!("bciqt-{category}.json"));
            detector.save(&path).map_err(runtime)?;
            written.push(path);
        }
        if let Some(model) = models.nb_model(category) {
            let path = dir.join(format!("nb-{category}.json"));
            let mask = models.mask(category).expect("trained categories have masks");
            model.save(&path, category, mask.indices()).map_err(runtime)?;
            written.push(path);
        }
    }
    Ok(())
}

pub fn predict(args: &PredictArgs, file: &ConfigFile) -> Result<(), CliError> {
    let model_dir = args
        .model_dir
        .clone()
        .or_else(|| file.get_path("model_dir"))
        .ok_or_else(|| usage("--model-dir is required"))?;
    let categories = match &args.categories {
        Some(list) => Some(list.clone()),
        None => file.get_list("categories")?,
    };
    let binarize = match args.binarize {
        Some(value) => value,
        None => file.get("binarize")?.unwrap_or(true),
    };
    let detectors = load_detectors(&model_dir, categories.as_deref())?;
    let samples = load_prediction_features(args, file)?;

    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let broken_pipe = |error: std::io::Error| runtime(format!("writing predictions: {error}"));
    write!(out, "# sample").map_err(broken_pipe)?;
    for detector in &detectors {
        let category = detector.category();
        write!(out, "\tscore[{category}]\tdecision[{category}]").map_err(broken_pipe)?;
    }
    writeln!(out).map_err(broken_pipe)?;

    for (index, features) in samples.iter().enumerate() {
        write!(out, "{index}").map_err(broken_pipe)?;
        for detector in &detectors {
            let mut masked = detector.restrict(features).map_err(|error| {
                runtime(format!("sample {index}: {error}"))
            })?;
            if binarize {
                for value in &mut masked {
                    *value = if *value > 0.0 { 1.0 } else { 0.0 };
                }
            }
            let (score, decision) = match detector.score(&masked) {
                Ok(value) => (value, u32::from(value >= detector.threshold())),
                Err(QuantumError::ZeroTestVector) => {
                    eprintln!(
                        "warning: sample {index} is zero under the category {} mask; classified 0",
                        detector.category()
                    );
                    (0.0, 0)
                }
                Err(error) => return Err(runtime(format!("sample {index}: {error}"))),
            };
            write!(out, "\t{score:.6}\t{decision}").map_err(broken_pipe)?;
        }
        writeln!(out).map_err(broken_pipe)?;
    }
    out.flush().map_err(broken_pipe)
}

fn load_detectors(
    dir: &Path,
    categories: Option<&[bciqt::Label]>,
) -> Result<Vec<TrainedDetector<f64>>, CliError> {
    let entries = fs::read_dir(dir)
        .map_err(|error| runtime(format!("reading {}: {error}", dir.display())))?;
    let mut detectors = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|error| runtime(format!("reading {}: {error}", dir.display())))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if !(name.starts_with("bciqt-") && name.ends_with(".json")) {
            continue;
        }
        let path = entry.path();
        let detector = TrainedDetector::<f64>::load(&path)
            .map_err(|error| runtime(format!("loading {}: {error}", path.display())))?;
        if categories.map_or(true, |wanted| wanted.contains(&detector.category())) {
            detectors.push(detector);
        }
    }
    if detectors.is_empty() {
        return Err(runtime(format!(
            "no matching bciqt-<category>.json models in {}",
            dir.display()
        )));
    }
    detectors.sort_by_key(TrainedDetector::category);
    Ok(detectors)
}

fn load_prediction_features(
    args: &PredictArgs,
    file: &ConfigFile,
) -> Result<Vec<Vec<f64>>, CliError> {
    let images = args.images.clone().or_else(|| file.get_path("images"));
    let csv = args.csv.clone().or_else(|| file.get_path("csv"));
    match (images, csv) {
        (Some(path), _) => {
            let bytes = fs::read(&path)
                .map_err(|error| runtime(format!("reading {}: {error}", path.display())))?;
            parse_idx_images(&bytes)
                .map_err(|error| runtime(format!("{}: {error}", path.display())))
        }
        (None, Some(path)) => {
            let column = match &args.label_column {
                Some(value) => value.clone(),
                None => file.get("label_column")?.unwrap_or_else(|| "label".to_string()),
            };
            let column = column.parse().expect("LabelColumn parsing is infallible");
            let dataset = bciqt::dataset::load_csv_path::<f64>(&path, &column)
                .map_err(|error| runtime(format!("{}: {error}", path.display())))?;
            Ok(dataset.samples().iter().map(|sample| sample.features.clone()).collect())
        }
        (None, None) => Err(usage("no input: pass --images or --csv")),
    }
}

pub fn select_features(args: &SelectFeaturesArgs, file: &ConfigFile) -> Result<(), CliError> {
    let source = data::train_source(&args.train_data, file)?;
    let top_k = match args.top_k {
        Some(value) => value,
        None => file.get("top_k")?.unwrap_or(100),
    };
    if top_k == 0 {
        return Err(usage("top_k must be at least 1"));
    }
    let category = match args.category {
        Some(value) => Some(value),
        None => file.get("category")?,
    };
    let output = args
        .output
        .clone()
        .or_else(|| file.get_path("output"))
        .unwrap_or_else(|| PathBuf::from("mask.json"));

    let dataset = data::load(&source)?;
    let mask = match category {
        Some(category) => select_top_k_for_category(&dataset, top_k, category),
        None => select_top_k(&dataset, top_k),
    }
    .map_err(runtime)?;
    if let Err(error) = mask.save(&output) {
        let _ = fs::remove_file(&output);
        return Err(runtime(format!("writing {}: {error}", output.display())));
    }
    println!("selected {} features -> {}", mask.len(), output.display());
    Ok(())
}
