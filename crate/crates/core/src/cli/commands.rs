use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use log::info;

use super::checkpoint::ModelCheckpoint;
use super::config::RunConfig;
use crate::dataio::{
    self, fit_scaler, generate_synthetic, split_indices, Dataset, CONTEXT_NAMES, SERIES_NAMES,
};
use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::fsutil;
use crate::sampling::smote_oversample;
use crate::training::{predict, train, TrainedModel};

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn cmd_generate(cfg: &RunConfig, output: &Path, out: &mut dyn Write) -> Result<Dataset> {
    let ds = generate_synthetic(&cfg.generator).map_err(|e| e.in_stage("generate"))?;
    dataio::save_csv(&ds, output).map_err(|e| e.in_stage("write"))?;
    let (acc, non) = ds.class_counts();
    writeln!(
        out,
        "wrote {} windows ({acc} accident, {non} non-accident) to {}",
        ds.len(),
        output.display()
    )
    .map_err(out_err)?;
    let names = SERIES_NAMES.iter().chain(CONTEXT_NAMES.iter());
    for (name, mean) in names.zip(ds.feature_means()) {
        writeln!(out, "  mean {name:<10} {mean:.2}").map_err(out_err)?;
    }
    Ok(ds)
}

/// Text form of a test-partition index list: one integer per line.
pub fn format_index(indices: &[usize]) -> String {
    indices.iter().fold(String::new(), |mut s, i| {
        let _ = writeln!(s, "{i}");
        s
    })
}

pub fn parse_index(text: &str, n_rows: usize) -> Result<Vec<usize>> {
    let mut seen = vec![false; n_rows];
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let idx: usize = line.parse().map_err(|_| {
            Error::invalid(format!(
                "test index line {}: '{line}' is not an index",
                i + 1
            ))
        })?;
        if idx >= n_rows {
            return Err(Error::invalid(format!(
                "test index line {}: row {idx} does not exist (data has {n_rows} rows)",
                i + 1
            )));
        }
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::invalid(format!(
                "test index line {}: row {idx} repeated",
                i + 1
            )));
        }
        out.push(idx);
    }
    if out.is_empty() {
        return Err(Error::invalid("test index is empty"));
    }
    Ok(out)
}

pub struct TrainPaths<'a> {
    pub data: &'a Path,
    pub model: &'a Path,
    pub test_index: &'a Path,
    pub loss_log: &'a Path,
}

/// split → fit scaler → scale → SMOTE → train → write checkpoint, test
/// index and per-epoch loss log.
pub fn cmd_train(
    cfg: &RunConfig,
    paths: &TrainPaths<'_>,
    out: &mut dyn Write,
) -> Result<TrainedModel> {
    let ds = dataio::load_csv(paths.data).map_err(|e| e.in_stage("load"))?;
    let (train_idx, test_idx) = split_indices(ds.len(), cfg.train_fraction, cfg.split_seed)
        .map_err(|e| e.in_stage("split"))?;
    let train_set = ds.subset(&train_idx).map_err(|e| e.in_stage("split"))?;
    let scaler = fit_scaler(&train_set).map_err(|e| e.in_stage("scale"))?;
    let scaled = scaler
        .scale_dataset(&train_set)
        .map_err(|e| e.in_stage("scale"))?;
    let balanced = smote_oversample(&scaled, &cfg.smote).map_err(|e| e.in_stage("smote"))?;
    let (acc, non) = balanced.class_counts();
    info!(
        "training on {} samples after SMOTE ({acc} accident, {non} non-accident)",
        balanced.len()
    );

    let spec = cfg.network_spec()?;
    let model = train(&balanced, &spec, &cfg.train, scaler).map_err(|e| e.in_stage("train"))?;

    let write = |e: Error| e.in_stage("write");
    ModelCheckpoint::from_model(&model, cfg.train.seed)
        .save(paths.model)
        .map_err(write)?;
    fsutil::write_atomic(paths.test_index, format_index(&test_idx).as_bytes()).map_err(write)?;
    let mut log = String::from("epoch,loss\n");
    for (e, l) in model.training_log.iter().enumerate() {
        let _ = writeln!(log, "{},{l}", e + 1);
    }
    fsutil::write_atomic(paths.loss_log, log.as_bytes()).map_err(write)?;

    let first = model.training_log.first().copied().unwrap_or(f64::NAN);
    let last = model.training_log.last().copied().unwrap_or(f64::NAN);
    writeln!(
        out,
        "trained {} ({} epochs, {} train / {} test rows, {} samples after SMOTE)\n\
         loss {first:.6} -> {last:.6}, threshold {}\nmodel: {}\ntest index: {}",
        spec.cell_kind,
        model.training_log.len(),
        train_idx.len(),
        test_idx.len(),
        balanced.len(),
        model.threshold,
        paths.model.display(),
        paths.test_index.display(),
    )
    .map_err(out_err)?;
    Ok(model)
}

fn write_report(report: &EvalReport, report_dir: &Path, out: &mut dyn Write) -> Result<()> {
    std::fs::create_dir_all(report_dir).map_err(|e| Error::io(report_dir, e))?;
    fsutil::write_atomic(
        report_dir.join("metrics.csv"),
        report.metrics_csv().as_bytes(),
    )?;
    fsutil::write_atomic(report_dir.join("roc.csv"), report.roc_csv().as_bytes())?;
    writeln!(out, "{}", report.summary()).map_err(out_err)
}

pub fn cmd_evaluate(
    model_path: &Path,
    data: &Path,
    test_index: &Path,
    report_dir: &Path,
    out: &mut dyn Write,
) -> Result<EvalReport> {
    let model = ModelCheckpoint::load(model_path)
        .map_err(|e| e.in_stage("load model"))?
        .into_model();
    let ds = dataio::load_csv(data).map_err(|e| e.in_stage("load data"))?;
    let idx = parse_index(&fsutil::read_to_string(test_index)?, ds.len())
        .map_err(|e| e.in_stage("test index"))?;
    let mut scores = Vec::with_capacity(idx.len());
    let mut labels = Vec::with_capacity(idx.len());
    for &i in &idx {
        let w = &ds.windows[i];
        scores.push(predict(&model, w).map_err(|e| e.in_stage("score"))?);
        labels.push(w.label);
    }
    let report = EvalReport::from_scores(&scores, &labels, model.threshold)
        .map_err(|e| e.in_stage("evaluate"))?;
    write_report(&report, report_dir, out)?;
    Ok(report)
}

/// Score a `probability,label` CSV directly, without a model.
pub fn cmd_evaluate_predictions(
    predictions: &Path,
    threshold: f64,
    report_dir: &Path,
    out: &mut dyn Write,
) -> Result<EvalReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!(
            "threshold must lie in (0,1), got {threshold}"
        )));
    }
    let f = std::fs::File::open(predictions).map_err(|e| Error::io(predictions, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(f);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["probability", "label"] {
        return Err(Error::Header {
            detail: "predictions CSV".into(),
            expected: "probability,label".into(),
            found: header.join(","),
        });
    }
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let p: f64 = rec[0]
            .parse()
            .ok()
            .filter(|p: &f64| (0.0..=1.0).contains(p))
            .ok_or_else(|| Error::Row {
                row,
                column: "probability".into(),
                message: format!("'{}' is not a probability", &rec[0]),
            })?;
        let l: u8 = rec[1]
            .parse()
            .ok()
            .filter(|l| *l <= 1)
            .ok_or_else(|| Error::Row {
                row,
                column: "label".into(),
                message: format!("'{}' is not 0 or 1", &rec[1]),
            })?;
        scores.push(p);
        labels.push(l);
    }
    let report =
        EvalReport::from_scores(&scores, &labels, threshold).map_err(|e| e.in_stage("evaluate"))?;
    write_report(&report, report_dir, out)?;
    Ok(report)
}

/// Print `row_index,probability,decision` for every window.
pub fn cmd_detect(model_path: &Path, data: &Path, out: &mut dyn Write) -> Result<()> {
    let model = ModelCheckpoint::load(model_path)
        .map_err(|e| e.in_stage("load model"))?
        .into_model();
    let (ds, _) = dataio::load_windows(data, true).map_err(|e| e.in_stage("load data"))?;
    for (i, w) in ds.windows.iter().enumerate() {
        let p = predict(&model, w).map_err(|e| e.in_stage("score"))?;
        writeln!(out, "{i},{p},{}", u8::from(p >= model.threshold)).map_err(out_err)?;
    }
    Ok(())
}
