//! The `generate`, `train`, `benchmark`, `sweep` and `selftest` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, PolicyKind};
use crate::circuit::build_memory_circuit;
use crate::dataset::{ShotFile, ShotFileHeader};
use crate::decoder::{build_decoding_graph, Decoder};
use crate::error::{Error, Result};
use crate::frame::sample_batch;
use crate::layout::build_layout;
use crate::oracle;
use crate::policy::{argmax, count_peaks, efficiency, efficiency_row, median3, CostModel, ReplaySet, Status, EFFICIENCY_HEADER};
use crate::predictor::{
    auc_standard_error, make_osla_dataset, make_prefix_dataset, train, Architecture, OslaOptions, Predictor, TrainReport,
};
use crate::rng::{derive, mix64};

/// Runs `f` on a pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// SHA-256 over `blob <len>\0` followed by the content, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `path` and its `.meta` sidecar (config echo, config hash and
/// content hash, plus any extra lines).
fn write_with_meta(path: &Path, bytes: &[u8], cfg: &ExperimentConfig, extra: &str) -> Result<()> {
    write_atomic(path, bytes)?;
    let meta = format!(
        "{}config_hash = {}\ncontent_sha256 = {}\n{extra}",
        cfg.to_text(),
        cfg.hash(),
        content_hash(bytes)
    );
    write_atomic(&sidecar(path, ".meta"), meta.as_bytes())
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("{key} is required")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub path: PathBuf,
    pub shots: usize,
    pub content_hash: String,
}

/// Samples `shots` full-depth histories and writes the shot file.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<GenerateSummary> {
    cfg.validate()?;
    let out = required(&cfg.out, "out")?;
    let layout = build_layout(cfg.distance)?;
    let circuit = build_memory_circuit(&layout, cfg.rounds(), cfg.error_rate, cfg.basis)?;
    let shots = sample_batch(&circuit, cfg.shots, cfg.seed);
    let file = ShotFile::new(ShotFileHeader::for_circuit(&circuit), shots)?;
    let bytes = file.to_bytes()?;
    write_with_meta(out, &bytes, cfg, "")?;
    Ok(GenerateSummary {
        path: out.to_path_buf(),
        shots: cfg.shots,
        content_hash: content_hash(&bytes),
    })
}

/// Reads the configured dataset and checks it against the config.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<ShotFile> {
    let path = required(&cfg.dataset, "dataset")?;
    let file = ShotFile::from_bytes(&fs::read(path)?)?;
    let h = &file.header;
    if h.distance != cfg.distance || h.rounds != cfg.rounds() || h.basis != cfg.basis || h.p != cfg.error_rate {
        return Err(Error::Config(format!(
            "dataset {} has d={} rounds={} p={} basis={}, config has d={} rounds={} p={} basis={}",
            path.display(),
            h.distance,
            h.rounds,
            h.p,
            h.basis,
            cfg.distance,
            cfg.rounds(),
            cfg.error_rate,
            cfg.basis
        )));
    }
    Ok(file)
}

/// Decoder outcome of every shot in `file`.
pub fn decode_all(file: &ShotFile) -> Result<Vec<bool>> {
    use rayon::prelude::*;
    let h = &file.header;
    let layout = build_layout(h.distance)?;
    let circuit = build_memory_circuit(&layout, h.rounds, h.p, h.basis)?;
    let graph = match build_decoding_graph(&circuit) {
        Ok(g) => g,
        // nothing can fire without noise
        Err(Error::NoiselessGraph) => return Ok(file.shots.iter().map(|s| !s.observable_flip).collect()),
        Err(e) => return Err(e),
    };
    Ok(file
        .shots
        .par_chunks(4096)
        .map(|chunk| {
            let mut dec = Decoder::new(&graph);
            chunk.iter().map(|s| dec.success(s)).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .concat())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub examples: usize,
    pub report: TrainReport,
}

impl TrainSummary {
    /// Per-head AUC lines with standard errors.
    pub fn auc_text(&self) -> String {
        let names: &[&str] = if self.report.head_auc.len() == 2 { &["stop_now", "one_more"] } else { &["p_err"] };
        let mut s = String::new();
        for (name, a) in names.iter().zip(&self.report.head_auc) {
            match a {
                Some(a) => {
                    let se = auc_standard_error(a.auc, a.positives, a.negatives);
                    let _ = writeln!(s, "val_auc_{name} = {} se={} positives={} negatives={}", a.auc, se, a.positives, a.negatives);
                }
                None => {
                    let _ = writeln!(s, "val_auc_{name} = NA");
                }
            }
        }
        s
    }
}

/// Trains the configured architecture. The threshold CNN learns from the
/// prefixes of the dataset's shots; the two-head lookahead model samples
/// its own one- and two-round shots from the config.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let out = required(&cfg.checkpoint, "checkpoint")?;
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = cfg.seed;
    let (mut model, set) = match cfg.arch {
        Architecture::Cnn1d => {
            let file = load_dataset(cfg)?;
            let success = decode_all(&file)?;
            let keep_seed = derive(cfg.seed, "train-keep-success");
            let (shots, labels): (Vec<_>, Vec<_>) = file
                .shots
                .into_iter()
                .zip(success)
                .enumerate()
                .filter(|(i, (_, ok))| {
                    !ok || cfg.keep_success >= 1.0
                        || ((mix64(keep_seed ^ mix64(*i as u64)) >> 11) as f64 / (1u64 << 53) as f64) < cfg.keep_success
                })
                .map(|(_, pair)| pair)
                .unzip();
            let set = make_prefix_dataset(&shots, &labels)?;
            (Predictor::new(Architecture::Cnn1d, file.header.rounds, file.header.n_checks, cfg.seed), set)
        }
        Architecture::TwoHeadMlp => {
            let opts = OslaOptions {
                input: cfg.osla_input,
                keep_success: cfg.keep_success,
                shared_label: cfg.osla_shared_label,
            };
            let set = make_osla_dataset(cfg.distance, cfg.error_rate, cfg.basis, cfg.shots, cfg.seed, opts)?;
            let n_checks = cfg.distance * cfg.distance - 1;
            (Predictor::new(Architecture::TwoHeadMlp, 2, n_checks, cfg.seed), set)
        }
    };
    let report = train(&mut model, &set, &train_cfg)?;
    let summary = TrainSummary {
        checkpoint: out.to_path_buf(),
        examples: set.len(),
        report,
    };
    let extra = format!(
        "examples = {}\nn_train = {}\nn_val = {}\nbest_epoch = {}\n{}",
        set.len(),
        summary.report.n_train,
        summary.report.n_val,
        summary.report.best_epoch,
        summary.auc_text()
    );
    write_with_meta(out, &model.to_bytes(), cfg, &extra)?;
    write_atomic(&sidecar(out, ".loss.csv"), summary.report.loss_csv().as_bytes())?;
    Ok(summary)
}

fn load_model(path: &Option<PathBuf>, what: &str) -> Result<Predictor> {
    let path = path
        .as_deref()
        .ok_or_else(|| Error::Config(format!("{what} policy needs a checkpoint")))?;
    Predictor::from_bytes(&fs::read(path)?)
}

/// Loads the dataset and the checkpoints the configured policies need.
pub fn load_replay(cfg: &ExperimentConfig) -> Result<ReplaySet> {
    let file = load_dataset(cfg)?;
    let success = decode_all(&file)?;
    let ada = if cfg.policies.contains(&PolicyKind::AdAbort) {
        Some(load_model(&cfg.checkpoint, "adabort")?)
    } else {
        None
    };
    let osla = if cfg.policies.contains(&PolicyKind::Osla) {
        Some(load_model(&cfg.osla_checkpoint, "osla")?)
    } else {
        None
    };
    ReplaySet::build(&file.shots, &success, ada.as_ref(), osla.as_ref())
}

fn emit_rows(cfg: &ExperimentConfig, replay: &ReplaySet, thetas: &[f64], cs: &[f64]) -> Result<String> {
    let (d, p, seed, cost) = (cfg.distance, cfg.error_rate, cfg.seed, &cfg.cost);
    let mut csv = format!("{EFFICIENCY_HEADER}\n");
    for kind in &cfg.policies {
        match kind {
            PolicyKind::Fd => {
                let _ = writeln!(csv, "{}", efficiency_row("fd", d, p, None, &replay.fd(cost), seed));
            }
            PolicyKind::Osla => {
                for (c, r) in replay.sweep_c(cost, cs)? {
                    let _ = writeln!(csv, "{}", efficiency_row("osla", d, p, Some(c), &r, seed));
                }
            }
            PolicyKind::AdAbort => {
                for (th, r) in replay.sweep_theta(cost, thetas, cfg.cap_last)? {
                    let _ = writeln!(csv, "{}", efficiency_row("adabort", d, p, Some(th), &r, seed));
                }
            }
        }
    }
    Ok(csv)
}

fn check_out_differs(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.out.is_some() && cfg.out == cfg.dataset {
        return Err(Error::Config("out must not overwrite the dataset".into()));
    }
    Ok(())
}

fn write_csv(cfg: &ExperimentConfig, csv: &str) -> Result<()> {
    match &cfg.out {
        Some(out) => write_with_meta(out, csv.as_bytes(), cfg, ""),
        None => Ok(()),
    }
}

/// Efficiency rows of every configured policy at the configured `theta`
/// and `c` values, on identical replayed shots.
pub fn cmd_benchmark(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    check_out_differs(cfg)?;
    let replay = load_replay(cfg)?;
    let csv = emit_rows(cfg, &replay, &cfg.theta, &cfg.c)?;
    write_csv(cfg, &csv)?;
    Ok(csv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub csv: String,
    /// Best threshold and its efficiency.
    pub best_theta: Option<(f64, f64)>,
    /// Peaks of the median-smoothed threshold curve.
    pub theta_peaks: Option<usize>,
    pub best_c: Option<(f64, f64)>,
}

/// Efficiency rows over `theta_grid` and `c_grid`.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    cfg.validate()?;
    check_out_differs(cfg)?;
    let replay = load_replay(cfg)?;
    let csv = emit_rows(cfg, &replay, &cfg.theta_grid, &cfg.c_grid)?;
    write_csv(cfg, &csv)?;
    let best = |rows: Vec<(f64, crate::policy::EfficiencyReport)>| {
        let etas: Vec<f64> = rows.iter().map(|r| r.1.eta).collect();
        (argmax(&etas).map(|i| (rows[i].0, etas[i])), count_peaks(&median3(&etas)))
    };
    let (mut best_theta, mut theta_peaks, mut best_c) = (None, None, None);
    if cfg.policies.contains(&PolicyKind::AdAbort) {
        let (b, peaks) = best(replay.sweep_theta(&cfg.cost, &cfg.theta_grid, cfg.cap_last)?);
        best_theta = b;
        theta_peaks = Some(peaks);
    }
    if cfg.policies.contains(&PolicyKind::Osla) {
        best_c = best(replay.sweep_c(&cfg.cost, &cfg.c_grid)?).0;
    }
    Ok(SweepSummary {
        csv,
        best_theta,
        theta_peaks,
        best_c,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Runs the oracle suites: exhaustive matching, single-fault propagation,
/// finite-difference gradients and the efficiency arithmetic.
pub fn cmd_selftest(seed: u64) -> Result<Vec<SelfTestResult>> {
    let mut out = Vec::new();
    let t = oracle::check_matching(1000, 12, seed)?;
    out.push(SelfTestResult {
        name: "matching",
        pass: t.mismatches == 0,
        detail: format!("{} instances, {} mismatches", t.checked, t.mismatches),
    });
    let layout = build_layout(3)?;
    let circuit = build_memory_circuit(&layout, 3, 0.01, crate::layout::CheckKind::X)?;
    let t = oracle::check_single_faults(&circuit)?;
    out.push(SelfTestResult {
        name: "single_faults",
        pass: t.mismatches == 0,
        detail: format!("{} fault mechanisms, {} mismatches", t.checked, t.mismatches),
    });
    let worst = oracle::check_gradients(seed)?;
    out.push(SelfTestResult {
        name: "gradients",
        pass: worst < 1e-4,
        detail: format!("max relative error {worst:.3e}"),
    });
    let c = CostModel::default();
    let a = efficiency(&[c.outcome(Status::Success, 3), c.outcome(Status::Aborted(1), 3)]).eta;
    let b = efficiency(&[c.outcome(Status::Success, 3)]).eta;
    let mut v = vec![c.outcome(Status::Success, 3); 90];
    v.extend(vec![c.outcome(Status::Failure, 3); 10]);
    let e = efficiency(&v).eta;
    let rel = |x: f64, y: f64| (x - y).abs() / y;
    let worst = rel(a, 1.0 / 1.65).max(rel(b, 1.0 / 2.1)).max(rel(e, 0.9 / 2.2));
    out.push(SelfTestResult {
        name: "efficiency",
        pass: worst < 1e-12,
        detail: format!("max relative error {worst:.3e}"),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_in(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.apply_text("d = 3\np = 0.02\nshots = 600\nseed = 4\nepochs = 2\ntheta = 0.5\nc = -0.01").unwrap();
        c.out = Some(dir.join("shots.qshot"));
        c
    }

    #[test]
    fn generate_train_benchmark_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = cfg_in(dir.path());
        let g = cmd_generate(&cfg).unwrap();
        let meta = fs::read_to_string(sidecar(&g.path, ".meta")).unwrap();
        assert!(meta.contains(&format!("content_sha256 = {}", g.content_hash)));
        cfg.dataset = Some(g.path.clone());
        cfg.checkpoint = Some(dir.path().join("cnn.model"));
        let t = cmd_train(&cfg).unwrap();
        assert_eq!(t.examples, 600 * 3);
        assert!(sidecar(&t.checkpoint, ".loss.csv").exists());
        let mut osla = cfg.clone();
        osla.arch = Architecture::TwoHeadMlp;
        osla.checkpoint = Some(dir.path().join("osla.model"));
        cmd_train(&osla).unwrap();
        cfg.osla_checkpoint = osla.checkpoint.clone();
        cfg.out = Some(dir.path().join("bench.csv"));
        let csv = cmd_benchmark(&cfg).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(fs::read_to_string(dir.path().join("bench.csv")).unwrap(), csv);
        let sweep = cmd_sweep(&cfg).unwrap();
        assert_eq!(sweep.csv.lines().count(), 1 + 1 + 10 + 20);
        assert!(sweep.best_theta.is_some() && sweep.theta_peaks.is_some());
    }

    #[test]
    fn missing_inputs_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = cfg_in(dir.path());
        cmd_generate(&cfg).unwrap();
        cfg.dataset = cfg.out.clone();
        assert!(matches!(cmd_benchmark(&cfg), Err(Error::Config(_))));
        cfg.out = None;
        assert!(cmd_benchmark(&cfg).is_err());
        cfg.policies = vec![PolicyKind::Fd];
        assert!(cmd_benchmark(&cfg).is_ok());
        cfg.distance = 5;
        assert!(matches!(cmd_benchmark(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn noiseless_generate_is_all_zero() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = cfg_in(dir.path());
        cfg.error_rate = 0.0;
        cfg.shots = 10;
        let g = cmd_generate(&cfg).unwrap();
        let file = ShotFile::from_bytes(&fs::read(g.path).unwrap()).unwrap();
        assert_eq!(file.shots.len(), 10);
        assert!(file.shots.iter().all(|s| s.weight() == 0 && !s.observable_flip));
    }
}
