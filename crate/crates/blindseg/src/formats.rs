//! On-disk formats for artifacts. Text formats write floats in Rust's
//! shortest round-trip form so that reloading is exact and reruns are
//! byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use blindseg_core::nn::{EpochStats, LstmNetwork, NetworkConfig, Normalizer, TrainingReport};
use blindseg_core::{
    BoundaryKind, BoundarySet, CategoricalSequence, Codebook, ErrorSignal, EvaluationReport, FrameBoundaries,
    FrameSequence, MarkovModel, MatchResult, Matrix, SweepPoint,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

const CODEBOOK_MAGIC: &str = "blindseg-codebook 1";
const MARKOV_MAGIC: &str = "blindseg-markov 1";
const NETWORK_FORMAT: u32 = 1;

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn join_floats(values: &[f64], sep: &str) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        write!(out, "{v}").unwrap();
    }
    out
}

fn parse_floats(line: &str, sep: char, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    line.split(sep)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::parse(path, lineno, format!("bad number {s:?}"))))
        .collect()
}

/// `key value` header line.
fn header_value<T: std::str::FromStr>(line: Option<(usize, &str)>, key: &str, path: &Path) -> Result<T> {
    let (i, line) = line.ok_or_else(|| CliError::format(path, format!("missing `{key}` line")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(CliError::parse(path, i + 1, format!("expected `{key}`")));
    }
    parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::parse(path, i + 1, format!("bad value for `{key}`")))
}

fn expect_magic(line: Option<(usize, &str)>, magic: &str, path: &Path) -> Result<()> {
    match line {
        Some((_, l)) if l.trim() == magic => Ok(()),
        _ => Err(CliError::format(path, format!("not a `{magic}` file"))),
    }
}

// codebook

pub fn format_codebook(codebook: &Codebook) -> String {
    let mut out = format!(
        "{CODEBOOK_MAGIC}\nk {}\ndim {}\nseed {}\ninertia {}\n",
        codebook.k(),
        codebook.dim(),
        codebook.seed(),
        codebook.inertia()
    );
    for row in codebook.centroids().iter_rows() {
        out.push_str(&join_floats(row, " "));
        out.push('\n');
    }
    out
}

pub fn parse_codebook(text: &str, path: &Path) -> Result<Codebook> {
    let mut lines = text.lines().enumerate();
    expect_magic(lines.next(), CODEBOOK_MAGIC, path)?;
    let k: usize = header_value(lines.next(), "k", path)?;
    let dim: usize = header_value(lines.next(), "dim", path)?;
    let seed: u64 = header_value(lines.next(), "seed", path)?;
    let inertia: f64 = header_value(lines.next(), "inertia", path)?;
    let mut rows = Vec::with_capacity(k);
    for (i, line) in lines.take(k) {
        let row = parse_floats(line, ' ', path, i + 1)?;
        if row.len() != dim {
            return Err(CliError::parse(path, i + 1, format!("expected {dim} values, found {}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() != k {
        return Err(CliError::format(path, format!("expected {k} centroids, found {}", rows.len())));
    }
    let centroids = Matrix::from_rows(dim, &rows)?;
    Ok(Codebook::from_centroids(centroids, inertia, seed)?)
}

// Markov model

pub fn format_markov(model: &MarkovModel) -> String {
    let n = model.n_symbols();
    let mut out =
        format!("{MARKOV_MAGIC}\norder {}\nalpha {}\nsymbols {}\n", model.order(), model.alpha(), n);
    for lag in 1..=model.order() {
        writeln!(out, "lag {lag}").unwrap();
        for row in model.table(lag).chunks(n) {
            out.push_str(&join_floats(row, " "));
            out.push('\n');
        }
    }
    out
}

pub fn parse_markov(text: &str, path: &Path) -> Result<MarkovModel> {
    let mut lines = text.lines().enumerate();
    expect_magic(lines.next(), MARKOV_MAGIC, path)?;
    let order: usize = header_value(lines.next(), "order", path)?;
    let alpha: f64 = header_value(lines.next(), "alpha", path)?;
    let n: usize = header_value(lines.next(), "symbols", path)?;
    let mut tables = Vec::with_capacity(order * n * n);
    for lag in 1..=order {
        let found: usize = header_value(lines.next(), "lag", path)?;
        if found != lag {
            return Err(CliError::format(path, format!("expected table for lag {lag}, found {found}")));
        }
        for _ in 0..n {
            let (i, line) = lines.next().ok_or_else(|| CliError::format(path, "truncated table"))?;
            let row = parse_floats(line, ' ', path, i + 1)?;
            if row.len() != n {
                return Err(CliError::parse(path, i + 1, format!("expected {n} probabilities")));
            }
            tables.extend(row);
        }
    }
    Ok(MarkovModel::from_tables(order, alpha, n, tables)?)
}

// LSTM checkpoint

#[derive(Serialize, Deserialize)]
struct NetworkCheckpoint {
    format: u32,
    // TOML integers are signed, so the seed is kept as text
    seed: String,
    config: NetworkConfig,
    normalizer: Option<Normalizer>,
    params: Vec<f64>,
}

pub fn format_network(network: &LstmNetwork) -> String {
    let mut config = network.config().clone();
    let seed = core::mem::take(&mut config.seed).to_string();
    let ckpt = NetworkCheckpoint {
        format: NETWORK_FORMAT,
        seed,
        config,
        normalizer: network.normalizer().cloned(),
        params: network.params().to_vec(),
    };
    toml::to_string(&ckpt).expect("checkpoint fields are all representable in TOML")
}

pub fn parse_network(text: &str, path: &Path) -> Result<LstmNetwork> {
    let mut ckpt: NetworkCheckpoint = toml::from_str(text).map_err(|e| CliError::format(path, e.to_string()))?;
    if ckpt.format != NETWORK_FORMAT {
        return Err(CliError::format(path, format!("unsupported checkpoint format {}", ckpt.format)));
    }
    ckpt.config.seed = ckpt.seed.parse().map_err(|_| CliError::format(path, format!("bad seed {:?}", ckpt.seed)))?;
    Ok(LstmNetwork::from_parts(ckpt.config, ckpt.params, ckpt.normalizer)?)
}

// frame and symbol dumps

pub fn format_frames(frames: &Matrix) -> String {
    let mut out = String::new();
    for row in frames.iter_rows() {
        out.push_str(&join_floats(row, ","));
        out.push('\n');
    }
    out
}

pub fn parse_frames(text: &str, path: &Path) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_floats(line, ',', path, i + 1)?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::parse(path, i + 1, format!("expected {} columns", first.len())));
            }
        }
        rows.push(row);
    }
    let dim = rows.first().map_or(0, Vec::len);
    Ok(Matrix::from_rows(dim, &rows)?)
}

pub fn read_frames(path: &Path, id: &str, hop_ms: f64) -> Result<FrameSequence> {
    let frames = parse_frames(&read_text(path)?, path)?;
    Ok(FrameSequence::new(id, frames, hop_ms)?)
}

pub fn format_symbols(seq: &CategoricalSequence) -> String {
    seq.symbols().iter().map(|s| format!("{s}\n")).collect()
}

pub fn read_symbols(path: &Path, id: &str, n_symbols: usize, hop_ms: f64) -> Result<CategoricalSequence> {
    let text = read_text(path)?;
    let mut symbols = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let s: usize = line.parse().map_err(|_| CliError::parse(path, i + 1, format!("bad symbol {line:?}")))?;
        if s >= n_symbols {
            return Err(CliError::parse(path, i + 1, format!("symbol {s} outside alphabet of {n_symbols}")));
        }
        symbols.push(s);
    }
    Ok(CategoricalSequence::new(id, symbols, n_symbols, hop_ms)?)
}

// boundaries and error signals

/// One boundary per line: seconds with 6 decimals and the frame index.
pub fn format_boundaries(b: &FrameBoundaries) -> String {
    b.frames.iter().map(|&f| format!("{:.6} {f}\n", f as f64 * b.hop_ms / 1000.0)).collect()
}

/// Reads the seconds column; a second column, if any, is ignored.
pub fn parse_boundaries(text: &str, kind: BoundaryKind, path: &Path) -> Result<BoundarySet> {
    let mut times = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some(first) = line.split_whitespace().next() else { continue };
        let t: f64 = first.parse().map_err(|_| CliError::parse(path, i + 1, format!("bad time {first:?}")))?;
        times.push(t);
    }
    BoundarySet::new(times, kind).map_err(|e| CliError::format(path, e.to_string()))
}

pub fn read_boundaries(path: &Path, kind: BoundaryKind) -> Result<BoundarySet> {
    parse_boundaries(&read_text(path)?, kind, path)
}

pub fn format_error_signal(e: &ErrorSignal) -> String {
    let mut out = String::from("frame,time,error\n");
    for (t, v) in e.values().iter().enumerate() {
        writeln!(out, "{t},{:.6},{v}", t as f64 * e.hop_ms() / 1000.0).unwrap();
    }
    out
}

// reports

pub const REPORT_HEADER: &str = "system,mode,tolerance_ms,n_gold,n_hyp,n_hit,precision,recall,f_score,over_segmentation,r_value";
pub const SWEEP_HEADER: &str = "delta,mode,n_gold,n_hyp,n_hit,precision,recall,f_score,over_segmentation,r_value";

fn pct(x: f64) -> String {
    format!("{:.3}", 100.0 * x)
}

fn metric_fields(r: &EvaluationReport) -> String {
    [r.precision, r.recall, r.f_score, r.over_segmentation, r.r_value].map(pct).join(",")
}

pub fn report_row(system: &str, m: &MatchResult, r: &EvaluationReport) -> String {
    format!(
        "{system},{},{},{},{},{},{}",
        mode_name(m),
        m.tolerance_ms,
        m.n_gold,
        m.n_hyp,
        m.n_hit,
        metric_fields(r)
    )
}

fn mode_name(m: &MatchResult) -> &'static str {
    match m.mode {
        blindseg_core::MatchMode::Cropped => "cropped",
        blindseg_core::MatchMode::Overlapping => "overlapping",
    }
}

pub fn format_report_csv(rows: &[(String, MatchResult, EvaluationReport)]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for (system, m, r) in rows {
        out.push_str(&report_row(system, m, r));
        out.push('\n');
    }
    out
}

/// Percentages with one decimal.
pub fn format_report_table(rows: &[(String, MatchResult, EvaluationReport)]) -> String {
    let mut out = format!("{:<24} {:<12} {:>6} {:>6} {:>6} {:>7} {:>6}\n", "system", "mode", "P", "R", "F", "OS", "R-val");
    for (system, m, r) in rows {
        writeln!(
            out,
            "{:<24} {:<12} {:>6.1} {:>6.1} {:>6.1} {:>7.1} {:>6.1}",
            system,
            mode_name(m),
            100.0 * r.precision,
            100.0 * r.recall,
            100.0 * r.f_score,
            100.0 * r.over_segmentation,
            100.0 * r.r_value
        )
        .unwrap();
    }
    out
}

pub fn format_sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for p in points {
        let m = &p.matched;
        writeln!(out, "{},{},{},{},{},{}", p.delta, mode_name(m), m.n_gold, m.n_hyp, m.n_hit, metric_fields(&p.report))
            .unwrap();
    }
    out
}

/// Row 0 holds the losses before any update.
pub fn format_training_report(report: &TrainingReport) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,backprop_fraction\n");
    writeln!(out, "0,{},{},", report.initial_train_loss, report.initial_val_loss).unwrap();
    for EpochStats { epoch, train_loss, val_loss, backprop_fraction } in &report.epochs {
        writeln!(out, "{epoch},{train_loss},{val_loss},{backprop_fraction}").unwrap();
    }
    writeln!(out, "# best_epoch={} best_val_loss={}", report.best_epoch, report.best_val_loss).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use blindseg_core::nn::init_network;
    use blindseg_core::{compute_metrics, fit_markov, MatchMode};

    fn p() -> &'static Path {
        Path::new("t")
    }

    #[test]
    fn codebook_round_trip() {
        let c = Matrix::from_vec(2, 3, vec![0.1, -2.5, 1e-17, 3.0, 4.25, -0.0]).unwrap();
        let cb = Codebook::from_centroids(c, 1.5, 42).unwrap();
        let text = format_codebook(&cb);
        assert_eq!(parse_codebook(&text, p()).unwrap(), cb);
        assert!(parse_codebook("nope", p()).is_err());
    }

    #[test]
    fn markov_round_trip() {
        let seq = CategoricalSequence::new("a", vec![0, 1, 2, 1, 0, 2, 2, 1], 3, 10.0).unwrap();
        let m = fit_markov(std::slice::from_ref(&seq), 2, 1.0).unwrap();
        let back = parse_markov(&format_markov(&m), p()).unwrap();
        assert_eq!(back.error_signal(&seq).unwrap(), m.error_signal(&seq).unwrap());
        let truncated: String = format_markov(&m).lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(parse_markov(&truncated, p()).is_err());
    }

    #[test]
    fn network_round_trip() {
        let mut cfg = NetworkConfig::continuous(3);
        cfg.hidden_dim = 4;
        cfg.seed = u64::MAX - 3;
        let mut net = init_network(&cfg, 9).unwrap();
        net.set_normalizer(Some(Normalizer { mean: vec![0.5, -1.0, 0.1], scale: vec![2.0, 1.0, 0.3] }));
        let text = format_network(&net);
        let back = parse_network(&text, p()).unwrap();
        assert_eq!(back.params(), net.params());
        assert_eq!(back.config(), net.config());
        assert_eq!(back.normalizer(), net.normalizer());
        assert!(parse_network(&text.replace("format = 1", "format = 7"), p()).is_err());
    }

    #[test]
    fn frames_round_trip() {
        let m = Matrix::from_vec(2, 2, vec![1.0 / 3.0, -7.5, 2e-300, 0.0]).unwrap();
        assert_eq!(parse_frames(&format_frames(&m), p()).unwrap(), m);
        assert!(matches!(parse_frames("1,2\n3\n", p()), Err(CliError::Parse { line: 2, .. })));
    }

    #[test]
    fn boundary_files() {
        let b = FrameBoundaries { frames: vec![3, 12, 40], hop_ms: 10.0 };
        let text = format_boundaries(&b);
        assert_eq!(text, "0.030000 3\n0.120000 12\n0.400000 40\n");
        let set = parse_boundaries(&text, BoundaryKind::Hypothesis, p()).unwrap();
        assert_eq!(set.times(), &[0.03, 0.12, 0.4]);
        assert!(parse_boundaries("0.2\n0.1\n", BoundaryKind::Gold, p()).is_err());
    }

    #[test]
    fn report_tables() {
        let m = MatchResult { n_gold: 4, n_hyp: 4, n_hit: 4, mode: MatchMode::Cropped, tolerance_ms: 20.0 };
        let r = compute_metrics(&m).unwrap();
        let rows = vec![("markov".to_string(), m, r)];
        let csv = format_report_csv(&rows);
        assert_eq!(csv.lines().nth(1).unwrap(), "markov,cropped,20,4,4,4,100.000,100.000,100.000,0.000,100.000");
        assert!(format_report_table(&rows).contains("100.0"));
    }

    #[test]
    fn error_signal_csv() {
        let e = ErrorSignal::new("u", vec![0.0, 1.5], 10.0).unwrap();
        assert_eq!(format_error_signal(&e), "frame,time,error\n0,0.000000,0\n1,0.010000,1.5\n");
    }
}
