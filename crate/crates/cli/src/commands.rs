use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use echoloc::audio::{read_wav, synthetic_dry, StftConfig, Window};
use echoloc::dataset::{
    assign_folds, coordinate_grid, offset_test_grid, region_grid, render_dataset, sha256_hex, DatasetManifest,
    Progress, RenderConfig, Split, MANIFEST_FILE,
};
use echoloc::eval::{
    self, confusion_csv, cv_summary, folds_csv, leniency_csv, leniency_svg, per_class_csv, summarize, ClassMetrics,
    RegressionError, SvgOptions,
};
use echoloc::localize::{
    self, FeatureSet, LocalizeError, Model, ModelConfig, Output, Prediction, Task, TrainReport, ValidationMetrics,
};
use echoloc::propagation::{image_source_rir, write_rir, RirSidecar, RIR_SIDECAR_FORMAT};
use echoloc::scene::Aabb;
use echoloc::{load_scene, simulate_rir, PropagationConfig, PropagationError, Scene, Vec3};
use serde::{Deserialize, Serialize};

use crate::{
    CliError, DatasetArgs, EvalArgs, Mode, Oracle, Preset, PropagationArgs, ReportArgs, RirArgs, SceneCommand,
    SplitArg, TaskArg, TrainArgs,
};

type Result<T> = std::result::Result<T, CliError>;

/// Reference values printed next to our own results.
const REFERENCE_CNN_F1: (f64, f64) = (0.594, 0.019);
const REFERENCE_AST_F1: (f64, f64) = (0.786, 0.014);
const REFERENCE_HALF_RADIUS: f64 = 3.4;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn propagation_config(p: &PropagationArgs, seed: u64) -> PropagationConfig {
    PropagationConfig {
        sample_rate: p.sample_rate,
        speed_of_sound: p.speed_of_sound,
        rays_per_endpoint: p.rays,
        max_bounces: p.max_bounces,
        rir_duration: p.duration,
        seed,
        capture_radius: p.capture_radius,
        ..PropagationConfig::default()
    }
}

fn propagation_error(e: PropagationError) -> CliError {
    match e {
        PropagationError::Io { .. } => CliError::internal(e),
        _ => CliError::user(e),
    }
}

fn localize_error(e: LocalizeError) -> CliError {
    match e {
        LocalizeError::Diverged { .. } | LocalizeError::Io { .. } => CliError::internal(e),
        _ => CliError::user(e),
    }
}

pub fn scene(cmd: SceneCommand) -> Result<()> {
    match cmd {
        SceneCommand::Build { preset: Preset::House10, output } => {
            let scene = Scene::house10();
            scene.save(&output).map_err(CliError::internal)?;
            println!("wrote {} ({} regions, {} triangles)", output.display(), scene.regions().len(), scene.triangle_count());
        }
        SceneCommand::Validate { path } => {
            let scene = load_scene(&path).map_err(CliError::user)?;
            let names: Vec<&str> = scene.regions().iter().map(|r| r.name.as_str()).collect();
            println!(
                "ok: {} triangles, {} materials, {} regions ({})",
                scene.triangle_count(),
                scene.materials().len(),
                names.len(),
                names.join(", ")
            );
        }
    }
    Ok(())
}

pub fn rir(a: RirArgs) -> Result<()> {
    let config = propagation_config(&a.propagation, a.seed);
    let source = v3(a.source);
    let (ir, receiver, scene_sha256, method) = if a.oracle == Some(Oracle::ImageSource) {
        let receiver = v3(a.receiver);
        let ir = image_source_rir(v3(a.room), source, receiver, a.absorption, a.max_order, &config)
            .map_err(propagation_error)?;
        (ir, receiver, String::new(), "image-source")
    } else {
        let scene = if a.free_field {
            let r = v3(a.receiver);
            let reach = Vec3::new(1e3, 1e3, 1e3);
            Scene::free_field(r, Aabb::new(r - reach, r + reach)).map_err(CliError::user)?
        } else {
            let path = a.scene.as_ref().expect("clap requires a scene");
            load_scene(path).map_err(CliError::user)?
        };
        let ir = simulate_rir(&scene, source, &config).map_err(propagation_error)?;
        (ir, scene.receiver().position, sha256_hex(scene.to_json().as_bytes()), "path-tracing")
    };
    let sidecar = RirSidecar {
        format: RIR_SIDECAR_FORMAT.to_string(),
        source: a.source,
        receiver: receiver.to_array(),
        scene_sha256,
        samples: ir.len(),
        sample_rate: ir.sample_rate,
        config,
        method: method.to_string(),
    };
    write_rir(&a.output, &ir, &sidecar).map_err(propagation_error)?;
    let (i, peak) = ir.peak();
    println!("wrote {}: {} samples, peak {peak:.6e} at sample {i}", a.output.display(), ir.len());
    Ok(())
}

pub fn dataset(a: DatasetArgs) -> Result<()> {
    let scene = match &a.scene {
        Some(p) => load_scene(p).map_err(CliError::user)?,
        None => Scene::house10(),
    };
    let mut train = match a.mode {
        Mode::Regions => region_grid(&scene, a.grid[0], a.grid[1], a.height, a.shrink),
        Mode::Coords => coordinate_grid(&scene, a.spacing, a.height),
    }
    .map_err(CliError::user)?;
    let test_count = a.test_count.unwrap_or(match a.mode {
        Mode::Regions => 250,
        Mode::Coords => 100,
    });
    let test = offset_test_grid(&scene, &train, test_count, a.seed).map_err(CliError::user)?;
    let (n_train, n_test) = (train.len(), test.len());
    train.extend(test);

    let config = RenderConfig {
        propagation: propagation_config(&a.propagation, a.seed),
        stft: StftConfig { window_length: a.window_length, hop: a.hop, window: Window::Hann },
        ..RenderConfig::default()
    };
    let dry = match &a.dry {
        Some(p) => read_wav(p).map_err(CliError::user)?,
        None => synthetic_dry(config.propagation.sample_rate),
    };
    create_dir(&a.output)?;
    let done = AtomicUsize::new(0);
    let total = train.len();
    let progress = |p: Progress| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        if k % 10 == 0 || k == total {
            let what = if matches!(p, Progress::Skipped(_)) { "checked" } else { "rendered" };
            eprintln!("{k}/{total} ({what} placement {})", match p {
                Progress::Rendered(i) | Progress::Skipped(i) => i,
            });
        }
    };
    let manifest = render_dataset(&scene, &train, &dry, &config, &a.output, &progress).map_err(|e| match e {
        echoloc::dataset::DatasetError::Io { .. } => CliError::internal(e),
        e => CliError::user(e),
    })?;
    let manifest = assign_folds(&manifest, a.folds, a.seed).map_err(CliError::user)?;
    manifest.save(&a.output.join(MANIFEST_FILE)).map_err(CliError::internal)?;
    let mut sizes = vec![0; a.folds];
    manifest.entries.iter().filter_map(|e| e.fold).for_each(|f| sizes[f] += 1);
    println!(
        "wrote {}: {n_train} train + {n_test} test placements, fold sizes {sizes:?}",
        a.output.join(MANIFEST_FILE).display()
    );
    Ok(())
}

fn task_of(t: TaskArg) -> Task {
    match t {
        TaskArg::Regions => Task::Regions,
        TaskArg::Coords => Task::Coords,
    }
}

fn load_features(manifest_path: &Path, input: [usize; 2]) -> Result<(DatasetManifest, FeatureSet)> {
    let manifest = DatasetManifest::load(manifest_path).map_err(CliError::user)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let set = FeatureSet::load(&manifest, dir, input).map_err(localize_error)?;
    Ok((manifest, set))
}

#[derive(Serialize, Deserialize)]
struct CvFile {
    task: Task,
    classes: Vec<String>,
    config: ModelConfig,
    folds: Vec<FoldResult>,
}

#[derive(Serialize, Deserialize)]
struct FoldResult {
    fold: usize,
    train_samples: usize,
    final_loss: Option<f64>,
    model_sha256: String,
    metrics: ValidationMetrics,
}

fn regression_folds_csv(folds: &[&RegressionError]) -> String {
    let mut out = String::from("fold,mse,mean_distance\n");
    for (i, r) in folds.iter().enumerate() {
        writeln!(out, "{i},{:.6},{:.6}", r.mse, r.mean_distance()).unwrap();
    }
    let mse: Vec<f64> = folds.iter().map(|r| r.mse).collect();
    let dist: Vec<f64> = folds.iter().map(|r| r.mean_distance()).collect();
    if let (Ok(a), Ok(b)) = (summarize(&mse), summarize(&dist)) {
        writeln!(out, "mean,{:.6},{:.6}\nstd,{:.6},{:.6}", a.mean, b.mean, a.std, b.std).unwrap();
    }
    out
}

fn loss_csv(reports: &[(String, &TrainReport)]) -> String {
    let mut out = String::from("epoch");
    reports.iter().for_each(|(name, _)| write!(out, ",{name}").unwrap());
    out.push('\n');
    let epochs = reports.iter().map(|(_, r)| r.epoch_loss.len()).max().unwrap_or(0);
    for e in 0..epochs {
        write!(out, "{e}").unwrap();
        for (_, r) in reports {
            match r.epoch_loss.get(e) {
                Some(l) => write!(out, ",{l:.8}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn train(a: TrainArgs) -> Result<()> {
    let task = task_of(a.task);
    let mut config: ModelConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ModelConfig::for_task(task),
    };
    config.task = task;
    config.seed = a.seed;
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    if let Some(l) = a.learning_rate {
        config.learning_rate = l;
    }
    if let Some(b) = a.batch_size {
        config.batch_size = b;
    }
    config.validate().map_err(CliError::user)?;
    let (manifest, set) = load_features(&a.manifest, config.input)?;
    create_dir(&a.output)?;

    let run = |fold: Option<usize>, name: &str| -> Result<(Model, TrainReport)> {
        eprintln!("training {name}");
        let (model, report) = localize::train(&config, &set, fold).map_err(localize_error)?;
        model.save(&a.output.join(format!("{name}.elmdl"))).map_err(localize_error)?;
        write(&a.output.join(format!("{name}.json")), to_json(&report))?;
        Ok((model, report))
    };

    if a.all_folds {
        let k = manifest.folds.ok_or_else(|| CliError::user("manifest has no fold assignment"))?;
        let mut results = Vec::new();
        let mut reports = Vec::new();
        for f in 0..k {
            let (model, report) = run(Some(f), &format!("fold{f}"))?;
            let metrics = report.metrics.clone().ok_or_else(|| CliError::user(format!("fold {f} is empty")))?;
            results.push(FoldResult {
                fold: f,
                train_samples: report.train_samples,
                final_loss: report.epoch_loss.last().copied(),
                model_sha256: model.checksum(),
                metrics,
            });
            reports.push((format!("fold{f}"), report));
        }
        let (_, final_report) = run(None, "final")?;
        reports.push(("final".to_string(), final_report));

        let csv = match config.task {
            Task::Regions => folds_csv(
                &results
                    .iter()
                    .filter_map(|r| match &r.metrics {
                        ValidationMetrics::Regions(m) => Some(m.clone()),
                        _ => None,
                    })
                    .collect::<Vec<_>>(),
            ),
            Task::Coords => regression_folds_csv(
                &results
                    .iter()
                    .filter_map(|r| match &r.metrics {
                        ValidationMetrics::Coords(m) => Some(m),
                        _ => None,
                    })
                    .collect::<Vec<_>>(),
            ),
        };
        write(&a.output.join("folds.csv"), &csv)?;
        let named: Vec<(String, &TrainReport)> = reports.iter().map(|(n, r)| (n.clone(), r)).collect();
        write(&a.output.join("loss.csv"), loss_csv(&named))?;
        let cv = CvFile { task: config.task, classes: set.classes.clone(), config: config.clone(), folds: results };
        write(&a.output.join("cv.json"), to_json(&cv))?;
        print!("{csv}");
    } else {
        let name = a.fold.map_or("final".to_string(), |f| format!("fold{f}"));
        let (model, report) = run(a.fold, &name)?;
        println!(
            "wrote {}: final loss {:.6}, sha256 {}",
            a.output.join(format!("{name}.elmdl")).display(),
            report.epoch_loss.last().copied().unwrap_or(f64::NAN),
            model.checksum()
        );
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn read_rows(path: &Path) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    reader
        .records()
        .enumerate()
        .map(|(i, r)| r.map(|r| (i + 2, r)).map_err(|e| CliError::user(format!("{}: {e}", path.display()))))
        .collect()
}

/// Predictions file: `index,true,predicted` for regions or
/// `index,true_x,true_z,pred_x,pred_z` for coordinates.
fn read_predictions(path: &Path, task: Task) -> Result<(Vec<String>, Vec<Prediction>)> {
    let rows = read_rows(path)?;
    let bad = |line: usize, m: &str| CliError::user(format!("{}:{line}: {m}", path.display()));
    let index = |line: usize, r: &csv::StringRecord| r[0].parse::<usize>().map_err(|_| bad(line, "bad index"));
    match task {
        Task::Regions => {
            let mut names = BTreeSet::new();
            for (line, r) in &rows {
                if r.len() != 3 {
                    return Err(bad(*line, "expected index,true,predicted"));
                }
                names.insert(r[1].to_string());
                names.insert(r[2].to_string());
            }
            let classes: Vec<String> = names.into_iter().collect();
            let id = |s: &str| classes.iter().position(|c| c == s).expect("collected above");
            let preds = rows
                .iter()
                .map(|(line, r)| {
                    Ok(Prediction {
                        index: index(*line, r)?,
                        truth: Output::Region(id(&r[1])),
                        predicted: Output::Region(id(&r[2])),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((classes, preds))
        }
        Task::Coords => {
            let preds = rows
                .iter()
                .map(|(line, r)| {
                    if r.len() != 5 {
                        return Err(bad(*line, "expected index,true_x,true_z,pred_x,pred_z"));
                    }
                    let f = |k: usize| r[k].parse::<f64>().map_err(|_| bad(*line, "bad number"));
                    Ok(Prediction {
                        index: index(*line, r)?,
                        truth: Output::Coords([f(1)?, f(2)?]),
                        predicted: Output::Coords([f(3)?, f(4)?]),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((Vec::new(), preds))
        }
    }
}

fn predictions_csv(task: Task, classes: &[String], preds: &[Prediction]) -> String {
    let mut out = String::from(match task {
        Task::Regions => "index,true,predicted\n",
        Task::Coords => "index,true_x,true_z,pred_x,pred_z\n",
    });
    for p in preds {
        match (p.truth, p.predicted) {
            (Output::Region(t), Output::Region(q)) => {
                writeln!(out, "{},{},{}", p.index, csv_field(&classes[t]), csv_field(&classes[q])).unwrap()
            }
            (Output::Coords(t), Output::Coords(q)) => {
                writeln!(out, "{},{:.6},{:.6},{:.6},{:.6}", p.index, t[0], t[1], q[0], q[1]).unwrap()
            }
            _ => {}
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct EvalSummary {
    task: Task,
    split: Split,
    samples: usize,
    classes: Vec<String>,
    class_metrics: Option<ClassMetrics>,
    mse: Option<f64>,
    mean_distance: Option<f64>,
    half_radius: Option<f64>,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let (task, classes, preds) = if let Some(p) = &a.predictions {
        let task = task_of(a.task.expect("clap requires a task"));
        let (classes, preds) = read_predictions(p, task)?;
        (task, classes, preds)
    } else {
        let model_path = a.model.as_ref().expect("clap requires a model");
        let model = Model::load(model_path).map_err(|e| match e {
            LocalizeError::Io { .. } => CliError::user(e),
            e => localize_error(e),
        })?;
        if let Some(t) = a.task {
            if task_of(t) != model.config.task {
                return Err(CliError::user(LocalizeError::Task(model.config.task, task_of(t))));
            }
        }
        let (_, set) = load_features(a.manifest.as_ref().expect("clap requires a manifest"), model.config.input)?;
        let mut samples: Vec<_> = set.samples.iter().filter(|s| s.split == split).collect();
        samples.sort_by_key(|s| s.index);
        let preds = localize::predict(&model, &samples).map_err(localize_error)?;
        let classes = if model.config.task == Task::Regions { model.classes.clone() } else { Vec::new() };
        (model.config.task, classes, preds)
    };
    if preds.is_empty() {
        return Err(CliError::user("no samples to evaluate"));
    }
    create_dir(&a.output)?;
    write(&a.output.join("predictions.csv"), predictions_csv(task, &classes, &preds))?;
    let mut summary = EvalSummary {
        task,
        split,
        samples: preds.len(),
        classes: classes.clone(),
        class_metrics: None,
        mse: None,
        mean_distance: None,
        half_radius: None,
    };
    match localize::score(task, classes.len(), &preds).map_err(CliError::user)? {
        ValidationMetrics::Regions(m) => {
            let p: Vec<usize> = preds.iter().filter_map(|p| match p.predicted { Output::Region(c) => Some(c), _ => None }).collect();
            let t: Vec<usize> = preds.iter().filter_map(|p| match p.truth { Output::Region(c) => Some(c), _ => None }).collect();
            let cm = eval::confusion(&p, &t, classes.len()).map_err(CliError::user)?;
            write(&a.output.join("confusion.csv"), confusion_csv(&cm, &classes))?;
            write(&a.output.join("per_class.csv"), per_class_csv(&m, &classes))?;
            println!("macro F1 {:.4}, accuracy {:.4} on {} samples", m.macro_f1, m.accuracy, preds.len());
            summary.class_metrics = Some(m);
        }
        ValidationMetrics::Coords(r) => {
            let radii = eval::radii_covering(&r.distances, a.radius_step);
            let curve = eval::leniency_curve(&r.distances, &radii).map_err(CliError::user)?;
            let half = eval::radius_at_accuracy(&r.distances, 0.5).map_err(CliError::user)?;
            write(&a.output.join("leniency.csv"), leniency_csv(&curve))?;
            write(
                &a.output.join("errors.csv"),
                format!("mse,mean_distance,radius_50\n{:.6},{:.6},{:.6}\n", r.mse, r.mean_distance(), half),
            )?;
            println!("MSE {:.4} m^2, mean error {:.3} m, 50% radius {half:.3} m", r.mse, r.mean_distance());
            summary.mse = Some(r.mse);
            summary.mean_distance = Some(r.mean_distance());
            summary.half_radius = Some(half);
        }
    }
    write(&a.output.join("metrics.json"), to_json(&summary))?;
    Ok(())
}

fn read_leniency(path: &Path) -> Result<eval::LeniencyCurve> {
    let mut curve = eval::LeniencyCurve { radii: Vec::new(), accuracy: Vec::new() };
    for (line, r) in read_rows(path)? {
        match (r.get(0).map(str::parse::<f64>), r.get(1).map(str::parse::<f64>)) {
            (Some(Ok(radius)), Some(Ok(a))) => {
                curve.radii.push(radius);
                curve.accuracy.push(a);
            }
            _ => return Err(CliError::user(format!("{}:{line}: expected radius_m,accuracy", path.display()))),
        }
    }
    Ok(curve)
}

pub fn report(a: ReportArgs) -> Result<()> {
    let cv: CvFile = read_json(&a.train.join("cv.json"))?;
    create_dir(&a.output)?;
    let mut text = String::new();
    let mut csv = String::from("metric,mean,std,folds\n");
    match cv.task {
        Task::Regions => {
            let folds: Vec<ClassMetrics> = cv
                .folds
                .iter()
                .filter_map(|f| match &f.metrics {
                    ValidationMetrics::Regions(m) => Some(m.clone()),
                    _ => None,
                })
                .collect();
            let s = cv_summary(&folds).map_err(CliError::user)?;
            for (name, v) in [("macro_precision", s.precision), ("macro_recall", s.recall), ("macro_f1", s.f1), ("accuracy", s.accuracy)] {
                writeln!(csv, "{name},{:.6},{:.6},{}", v.mean, v.std, v.n).unwrap();
            }
            writeln!(text, "region classification, {}-fold cross-validation (mean ± sample std)", s.f1.n).unwrap();
            writeln!(text, "  macro precision {:.3} ± {:.3}", s.precision.mean, s.precision.std).unwrap();
            writeln!(text, "  macro recall    {:.3} ± {:.3}", s.recall.mean, s.recall.std).unwrap();
            writeln!(text, "  macro F1        {:.3} ± {:.3}", s.f1.mean, s.f1.std).unwrap();
            writeln!(text, "  accuracy        {:.3} ± {:.3}", s.accuracy.mean, s.accuracy.std).unwrap();
            writeln!(text, "  chance level    {:.3}", 1.0 / cv.classes.len().max(1) as f64).unwrap();
            writeln!(text, "reference macro F1 (not comparable scenes or audio):").unwrap();
            writeln!(text, "  CNN {:.3} ± {:.3}", REFERENCE_CNN_F1.0, REFERENCE_CNN_F1.1).unwrap();
            writeln!(text, "  AST {:.3} ± {:.3}", REFERENCE_AST_F1.0, REFERENCE_AST_F1.1).unwrap();
        }
        Task::Coords => {
            let mse: Vec<f64> = cv.folds.iter().filter_map(|f| match &f.metrics { ValidationMetrics::Coords(r) => Some(r.mse), _ => None }).collect();
            let dist: Vec<f64> = cv.folds.iter().filter_map(|f| match &f.metrics { ValidationMetrics::Coords(r) => Some(r.mean_distance()), _ => None }).collect();
            let (m, d) = (summarize(&mse).map_err(CliError::user)?, summarize(&dist).map_err(CliError::user)?);
            writeln!(csv, "mse,{:.6},{:.6},{}", m.mean, m.std, m.n).unwrap();
            writeln!(csv, "mean_distance,{:.6},{:.6},{}", d.mean, d.std, d.n).unwrap();
            writeln!(text, "coordinate regression, {}-fold cross-validation (mean ± sample std)", m.n).unwrap();
            writeln!(text, "  MSE           {:.3} ± {:.3} m^2", m.mean, m.std).unwrap();
            writeln!(text, "  mean error    {:.3} ± {:.3} m", d.mean, d.std).unwrap();
        }
    }
    if let Some(dir) = &a.eval {
        let ev: EvalSummary = read_json(&dir.join("metrics.json"))?;
        if let Some(m) = &ev.class_metrics {
            writeln!(text, "held-out {:?} split ({} samples): macro F1 {:.3}, accuracy {:.3}", ev.split, ev.samples, m.macro_f1, m.accuracy).unwrap();
            let flagged = m.flagged();
            if !flagged.is_empty() {
                let names: Vec<&str> = flagged.iter().map(|&c| ev.classes[c].as_str()).collect();
                writeln!(text, "  zero-denominator precision or recall scored 0 for: {}", names.join(", ")).unwrap();
            }
        }
        if let (Some(mse), Some(half)) = (ev.mse, ev.half_radius) {
            writeln!(text, "held-out {:?} split ({} samples): MSE {mse:.3} m^2, 50% accuracy radius {half:.2} m", ev.split, ev.samples).unwrap();
            writeln!(text, "reference 50% accuracy radius: {REFERENCE_HALF_RADIUS:.1} m").unwrap();
            let curve = read_leniency(&dir.join("leniency.csv"))?;
            let svg = leniency_svg(
                &curve,
                &SvgOptions {
                    title: "Accuracy within leniency radius".into(),
                    half_radius: Some(half),
                    reference: Some((REFERENCE_HALF_RADIUS, "reference".into())),
                },
            );
            write(&a.output.join("leniency.svg"), svg)?;
        }
    }
    write(&a.output.join("summary.csv"), &csv)?;
    write(&a.output.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}
