//! Subcommand implementations.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::Serialize;

use sigrep::chorale::{self, ChoraleError, CorpusConfig, NhtKind};
use sigrep::dataset::{self, DatasetError, PipelineConfig, Representation};
use sigrep::metrics::{self, MetricsError};
use sigrep::midi::parse_midi;
use sigrep::model::{slice_into_bars, Bar, PianoRoll};
use sigrep::signal::{
    export_wav as wav_bytes, PrimeMap, SignalCodec, SpectralConfig, DEFAULT_SAMPLE_RATE,
};
use sigrep::tensor::{Tensor, TensorData, TensorError};

use crate::Common;

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Io(m) | CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } | DatasetError::Tensor(TensorError::Io { .. }) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ChoraleError> for CliError {
    fn from(e: ChoraleError) -> Self {
        match e {
            ChoraleError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn validation(e: impl fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_error(path))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_error(path))
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    let dir = common
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out <dir> is required".into()))?;
    fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    Ok(dir)
}

fn load_config<T: DeserializeOwned + Default>(common: &Common) -> Result<T> {
    match &common.config {
        None => Ok(T::default()),
        Some(path) => {
            let bytes = read(path)?;
            serde_json::from_slice(&bytes)
                .map_err(|e| validation(format!("{}: {e}", path.display())))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialises") + "\n"
}

fn parse_rep(name: &str) -> Result<Representation> {
    name.parse().map_err(CliError::Usage)
}

fn load_bars(input: &Path, steps: usize) -> Result<Vec<Bar>> {
    let (score, diag) =
        parse_midi(&read(input)?).map_err(|e| validation(format!("{}: {e}", input.display())))?;
    for (offset, w) in diag.warnings {
        warn!("{}: byte {offset}: {w}", input.display());
    }
    slice_into_bars(&score, steps).map_err(|e| validation(format!("{}: {e}", input.display())))
}

pub fn convert(input: &Path, rep: &str, common: &Common) -> Result<()> {
    let rep = parse_rep(rep)?;
    let mut cfg: PipelineConfig = load_config(common)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.representations = vec![rep];
    cfg.validate()?;
    let out = out_dir(common)?;
    let bars = load_bars(input, cfg.steps_per_bar)?;
    let codec = SignalCodec::new(cfg.spectral, PrimeMap::default()).map_err(validation)?;
    let (mut written, mut skipped) = (0, 0);
    for bar in &bars {
        let stem = format!("bar_{:04}", bar.index);
        let tensor = match dataset::encode_bars(std::slice::from_ref(bar), rep, &cfg) {
            Ok(t) => t,
            Err(e) => {
                warn!("bar {}: {e}", bar.index);
                skipped += 1;
                continue;
            }
        };
        write(&out.join(format!("{stem}.ptns")), &tensor.to_bytes())?;
        if rep == Representation::Signallike {
            let signal = codec
                .encode(&PianoRoll::from_bar(bar))
                .map_err(validation)?;
            write(
                &out.join(format!("{stem}.wav")),
                &wav_bytes(&signal.samples, DEFAULT_SAMPLE_RATE),
            )?;
        }
        written += 1;
    }
    println!(
        "{}: {written} bars written as {rep}, {skipped} skipped",
        input.display()
    );
    if written == 0 {
        return Err(validation("no bar could be encoded"));
    }
    Ok(())
}

pub fn build_dataset(
    corpus: &Path,
    reps: Option<Vec<String>>,
    augment: bool,
    split_ratio: Option<f64>,
    common: &Common,
) -> Result<()> {
    let mut cfg: PipelineConfig = load_config(common)?;
    if let Some(reps) = reps {
        cfg.representations = reps.iter().map(|r| parse_rep(r)).collect::<Result<_>>()?;
    }
    cfg.augment |= augment;
    if let Some(r) = split_ratio {
        cfg.split_ratio = r;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = out_dir(common)?;
    let m = dataset::build_dataset(corpus, &out, &cfg)?;
    println!(
        "files {}/{} parsed, bars kept {}/{} ({:.2}%), event filter retention {:.2}%",
        m.files_parsed,
        m.files_found,
        m.bars_kept,
        m.bars_in,
        100.0 * m.retention_rate,
        100.0 * m.event_filter_retention
    );
    for (reason, n) in &m.dropped {
        println!(
            "dropped {}: {n}",
            serde_json::to_string(reason)
                .expect("reason serialises")
                .trim_matches('"')
        );
    }
    for (name, split) in &m.splits {
        println!(
            "{name}: {} chorales, {} bars",
            split.chorales.len(),
            split.bars
        );
    }
    Ok(())
}

pub fn roundtrip(dataset_dir: &Path, strict: bool, common: &Common) -> Result<()> {
    let report = dataset::roundtrip_check(dataset_dir)?;
    for r in &report.representations {
        println!(
            "{}: {}/{} exact ({:.2}%)",
            r.representation,
            r.exact,
            r.rows,
            100.0 * r.rate
        );
        for m in r.mismatches.iter().take(20) {
            println!(
                "  {} row {} ({} bar {} shift {}): {}: {}",
                m.split, m.row, m.source, m.bar_index, m.shift, m.category, m.detail
            );
        }
        if r.mismatches.len() > 20 {
            println!("  ... {} more", r.mismatches.len() - 20);
        }
    }
    if common.out.is_some() {
        let out = out_dir(common)?;
        write(&out.join("roundtrip.json"), to_json(&report).as_bytes())?;
    }
    if strict && !report.all_exact() {
        return Err(validation(
            "round trip is not exact for every representation",
        ));
    }
    Ok(())
}

pub struct GenArgs {
    pub skeletons: Option<usize>,
    pub per: Option<usize>,
    pub nht: Option<String>,
    pub chords: Option<usize>,
    pub kinds: Option<Vec<String>>,
    pub embed: bool,
}

/// `a..b`, `a..=b` (both inclusive) or a single count.
fn parse_range(text: &str) -> Result<(usize, usize)> {
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("bad NHT range `{text}`")))
    };
    match text.split_once("..") {
        Some((a, b)) => Ok((num(a)?, num(b.trim_start_matches('='))?)),
        None => num(text).map(|n| (n, n)),
    }
}

pub fn gen_chorales(args: GenArgs, common: &Common) -> Result<()> {
    let mut cfg: CorpusConfig = load_config(common)?;
    if let Some(n) = args.skeletons {
        cfg.n_skeletons = n;
    }
    if let Some(n) = args.per {
        cfg.realisations_per_skeleton = n;
    }
    if let Some(range) = &args.nht {
        (cfg.nht_min, cfg.nht_max) = parse_range(range)?;
    }
    if let Some(n) = args.chords {
        cfg.n_chords = n;
    }
    if let Some(kinds) = &args.kinds {
        cfg.kinds = kinds
            .iter()
            .map(|k| {
                NhtKind::parse(k).ok_or_else(|| CliError::Usage(format!("unknown NHT kind `{k}`")))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = out_dir(common)?;
    let entries = chorale::generate_corpus(&cfg)?;
    let mut failures = 0;
    for e in &entries {
        for r in &e.realisations {
            let report = chorale::verify_realisation(r, &e.skeleton);
            if !report.is_ok() {
                warn!("{} fails verification: {:?}", r.id, report.issues);
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(validation(format!(
            "{failures} realisations failed verification"
        )));
    }
    chorale::write_corpus(&out, &entries)?;
    let realisations: usize = entries.iter().map(|e| e.realisations.len()).sum();
    if args.embed {
        let codec =
            SignalCodec::new(SpectralConfig::default(), PrimeMap::default()).map_err(validation)?;
        let bars: Vec<Bar> = entries
            .iter()
            .flat_map(|e| {
                std::iter::once(e.skeleton.render())
                    .chain(e.realisations.iter().map(|r| r.bar.clone()))
            })
            .collect();
        let mut data = Vec::new();
        for bar in &bars {
            data.extend(
                codec
                    .encode(&PianoRoll::from_bar(bar))
                    .map_err(validation)?
                    .to_f32(),
            );
        }
        let width = data.len() / bars.len().max(1);
        Tensor::new(vec![bars.len(), width], TensorData::F32(data))?
            .write(&out.join("embeddings.ptns"))?;
        info!("wrote {} signal-like embeddings", bars.len());
    }
    println!(
        "{} skeletons, {realisations} realisations written to {}",
        entries.len(),
        out.display()
    );
    Ok(())
}

fn rows_f64(tensor: Tensor) -> Result<Vec<Vec<f64>>> {
    if tensor.dims().len() != 2 {
        return Err(validation(format!(
            "embedding tensor must be 2-D, got dims {:?}",
            tensor.dims()
        )));
    }
    let width = tensor.row_len();
    let values: Vec<f64> = match tensor.into_data() {
        TensorData::F32(v) => v.into_iter().map(f64::from).collect(),
        TensorData::I32(v) => v.into_iter().map(f64::from).collect(),
    };
    Ok(values.chunks(width.max(1)).map(<[f64]>::to_vec).collect())
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(validation)?;
    for r in rows {
        w.write_record(&r).map_err(validation)?;
    }
    let bytes = w.into_inner().map_err(validation)?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn eval(embeddings: &Path, meta: &Path, common: &Common) -> Result<()> {
    let rows = rows_f64(Tensor::read(embeddings)?)?;
    let meta = chorale::read_meta(meta)?;
    if rows.len() != meta.len() {
        return Err(validation(format!(
            "{} embedding rows for {} metadata lines",
            rows.len(),
            meta.len()
        )));
    }
    let table = metrics::join_embeddings(rows, &meta);
    let profile = metrics::distance_profile(&table)?;
    let linearity = match metrics::linearity_score(&profile) {
        Ok(l) => Some(l),
        Err(e) => {
            warn!("linearity not computed: {e}");
            None
        }
    };
    let silhouette = match metrics::tonality_silhouette(&table) {
        Ok(s) => Some(s),
        Err(e) => {
            warn!("silhouette not computed: {e}");
            None
        }
    };
    let kinds = metrics::kindwise_profile(&table)?;

    let profile_csv = csv_string(
        &["nht_count", "count", "mean", "std", "normalized"],
        profile
            .buckets
            .iter()
            .map(|b| {
                vec![
                    b.nht_count.to_string(),
                    b.count.to_string(),
                    b.mean.to_string(),
                    b.std.to_string(),
                    b.normalized.to_string(),
                ]
            })
            .collect(),
    )?;
    let kinds_csv = csv_string(
        &["kind", "count", "mean", "std"],
        kinds
            .iter()
            .map(|k| {
                vec![
                    k.kind.to_string(),
                    k.count.to_string(),
                    k.mean.to_string(),
                    k.std.to_string(),
                ]
            })
            .collect(),
    )?;
    let mut summary = Vec::new();
    if let Some(l) = &linearity {
        summary.push(vec!["pearson_r".into(), l.pearson.to_string()]);
        summary.push(vec!["spearman_rho".into(), l.spearman.to_string()]);
        summary.push(vec![
            "linearity_degenerate".into(),
            l.degenerate.to_string(),
        ]);
    }
    if let Some(s) = &silhouette {
        summary.push(vec!["tonality_silhouette".into(), s.score.to_string()]);
        summary.push(vec!["silhouette_items".into(), s.items.to_string()]);
    }
    let summary_csv = csv_string(&["metric", "value"], summary)?;
    print!("{profile_csv}\n{summary_csv}");

    if common.out.is_some() {
        let out = out_dir(common)?;
        write(&out.join("distance_profile.csv"), profile_csv.as_bytes())?;
        write(&out.join("kindwise_profile.csv"), kinds_csv.as_bytes())?;
        write(&out.join("summary.csv"), summary_csv.as_bytes())?;
        let json = serde_json::json!({
            "distance_profile": profile,
            "linearity": linearity,
            "tonality_silhouette": silhouette,
            "kindwise_profile": kinds,
        });
        write(&out.join("report.json"), to_json(&json).as_bytes())?;
    }
    Ok(())
}

pub fn export_wav(input: &Path, sample_rate: Option<u32>, common: &Common) -> Result<()> {
    let rate = sample_rate.unwrap_or(DEFAULT_SAMPLE_RATE);
    if rate == 0 {
        return Err(CliError::Usage("sample rate must be positive".into()));
    }
    let out = out_dir(common)?;
    let is_tensor = input
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("ptns"));
    let signals: Vec<Vec<f64>> = if is_tensor {
        let tensor = Tensor::from_bytes(&read(input)?)?;
        if !matches!(tensor.data(), TensorData::F32(_)) {
            return Err(validation("signal tensors are f32"));
        }
        rows_f64(tensor)?
    } else {
        let spectral: SpectralConfig = load_config(common)?;
        let codec = SignalCodec::new(spectral, PrimeMap::default()).map_err(validation)?;
        load_bars(input, sigrep::model::DEFAULT_STEPS)?
            .iter()
            .map(|b| {
                codec
                    .encode(&PianoRoll::from_bar(b))
                    .map(|s| s.samples)
                    .map_err(validation)
            })
            .collect::<Result<_>>()?
    };
    for (i, s) in signals.iter().enumerate() {
        write(&out.join(format!("bar_{i:04}.wav")), &wav_bytes(s, rate))?;
    }
    println!("{} wav files written to {}", signals.len(), out.display());
    Ok(())
}
