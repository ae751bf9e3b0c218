//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs with a custom harness so every criterion reports even when an
//! earlier one fails. Pass criterion numbers as arguments to run a subset,
//! e.g. `cargo test --release --test acceptance -- 3 5`.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use qec_abort::circuit::{build_memory_circuit, AnnotatedCircuit};
use qec_abort::experiment::{count_failures, sample_labelled, MemoryExperiment, RateEstimate};
use qec_abort::frame::{Fault, FrameSimulator, Injection, Pauli};
use qec_abort::harness::{cmd_benchmark, cmd_generate, cmd_train, with_threads, ExperimentConfig};
use qec_abort::layout::{build_layout, check_commutation, CheckKind, CodeLayout};
use qec_abort::oracle::{check_gradients, check_matching};
use qec_abort::policy::{argmax, count_peaks, efficiency, median3, theta_grid, CostModel, ReplaySet, Status, DEFAULT_C_GRID};
use qec_abort::predictor::train::HeadAuc;
use qec_abort::predictor::{
    auc_standard_error, make_osla_dataset, make_prefix_dataset, train, Architecture, OslaOptions, Predictor, TrainConfig,
};
use qec_abort::Result;

/// Outcome of one criterion: pass flag and a one-line detail.
type Verdict = Result<(bool, String)>;

// --- criterion 1 ---------------------------------------------------------

fn structural() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for d in [3, 5, 7, 9] {
        let l = build_layout(d)?;
        let good = l.n_physical() == 2 * d * d - 1
            && l.n_checks() == d * d - 1
            && check_commutation(&l)
            && l.logical_x_support.len() == d
            && l.logical_z_support.len() == d;
        ok &= good;
        notes.push(format!("d={d}: {} qubits, {} checks", l.n_physical(), l.n_checks()));
    }
    Ok((ok, notes.join("; ")))
}

// --- criterion 2 ---------------------------------------------------------

/// Hand-derived effect of one injected fault on a memory-X experiment.
struct Expected {
    what: String,
    injection: Injection,
    detectors: Vec<usize>,
    observable: bool,
}

fn detector_id(c: &AnnotatedCircuit, round: usize, check: usize) -> usize {
    round * c.n_checks + check
}

fn terminal_id(c: &AnnotatedCircuit, check: usize) -> Option<usize> {
    c.terminal.iter().position(|t| t.check == check).map(|k| c.rounds * c.n_checks + k)
}

fn measure_position(c: &AnnotatedCircuit, qubit: u32, after: usize) -> usize {
    use qec_abort::circuit::Instruction;
    after
        + c.instructions[after..]
            .iter()
            .position(|i| matches!(i, Instruction::Measure(q) if *q == qubit))
            .expect("qubit is measured")
}

fn hand_injections(l: &CodeLayout, c: &AnnotatedCircuit) -> Vec<Expected> {
    let mut out = Vec::new();
    let checks_on = |q: usize, kind: CheckKind| -> Vec<usize> {
        l.checks.iter().filter(|s| s.kind == kind && s.support().any(|x| x == q)).map(|s| s.check).collect()
    };
    for r in 0..c.rounds {
        for q in 0..l.n_data() {
            // X on data is seen by Z checks from this round on and commutes
            // with the X-basis readout.
            let mut dets: Vec<usize> = checks_on(q, CheckKind::Z).iter().map(|&k| detector_id(c, r, k)).collect();
            dets.sort_unstable();
            out.push(Expected {
                what: format!("X on data {q} before round {}", r + 1),
                injection: Injection {
                    before: c.round_starts[r],
                    fault: Fault::Pauli(q as u32, Pauli::X),
                },
                detectors: dets,
                observable: false,
            });
            // Z on data is seen by X checks; the terminal comparison cancels
            // and the readout of X_L flips iff q lies on its support.
            let mut dets: Vec<usize> = checks_on(q, CheckKind::X).iter().map(|&k| detector_id(c, r, k)).collect();
            dets.sort_unstable();
            out.push(Expected {
                what: format!("Z on data {q} before round {}", r + 1),
                injection: Injection {
                    before: c.round_starts[r],
                    fault: Fault::Pauli(q as u32, Pauli::Z),
                },
                detectors: dets,
                observable: l.logical_x_support.contains(&q),
            });
        }
        for s in &l.checks {
            let anc = l.ancilla_qubit(s.check) as u32;
            let mut dets = vec![detector_id(c, r, s.check)];
            if r + 1 < c.rounds {
                dets.push(detector_id(c, r + 1, s.check));
            } else if let Some(t) = terminal_id(c, s.check) {
                dets.push(t);
            }
            out.push(Expected {
                what: format!("flipped readout of check {} in round {}", s.check, r + 1),
                injection: Injection {
                    before: measure_position(c, anc, c.round_starts[r]),
                    fault: Fault::FlipNext(anc),
                },
                detectors: dets,
                observable: false,
            });
        }
    }
    let final_start = c.round_starts[c.rounds - 1];
    for q in 0..l.n_data() {
        let mut dets: Vec<usize> = checks_on(q, CheckKind::X).iter().filter_map(|&k| terminal_id(c, k)).collect();
        dets.sort_unstable();
        out.push(Expected {
            what: format!("flipped final readout of data {q}"),
            injection: Injection {
                before: measure_position(c, q as u32, final_start + 1),
                fault: Fault::FlipNext(q as u32),
            },
            detectors: dets,
            observable: l.logical_x_support.contains(&q),
        });
    }
    out
}

fn simulator_oracle() -> Verdict {
    let l = build_layout(3)?;
    let c = build_memory_circuit(&l, 3, 0.01, CheckKind::X)?;
    let cases = hand_injections(&l, &c);
    let mut sim = FrameSimulator::new();
    let mut bad = Vec::new();
    for case in &cases {
        let h = sim.run_injected(&c, std::slice::from_ref(&case.injection), None)?;
        let fired: Vec<usize> = h.fired().collect();
        if fired != case.detectors || h.observable_flip != case.observable {
            bad.push(format!("{}: got {fired:?}/{} want {:?}/{}", case.what, h.observable_flip, case.detectors, case.observable));
        }
    }
    let ok = cases.len() >= 50 && bad.is_empty();
    Ok((ok, format!("{} injections, {} mismatches {}", cases.len(), bad.len(), bad.first().cloned().unwrap_or_default())))
}

// --- criteria 3 to 5 -----------------------------------------------------

fn matching_optimality() -> Verdict {
    let t = check_matching(1000, 12, 2024)?;
    Ok((t.checked >= 1000 && t.mismatches == 0, format!("{} instances, {} mismatches", t.checked, t.mismatches)))
}

fn gradient_correctness() -> Verdict {
    let worst = check_gradients(17)?;
    Ok((worst < 1e-4, format!("max relative error {worst:.3e} (limit 1e-4)")))
}

fn metric_exactness() -> Verdict {
    let c = CostModel::default();
    let a = efficiency(&[c.outcome(Status::Success, 3), c.outcome(Status::Aborted(1), 3)]);
    let b = efficiency(&vec![c.outcome(Status::Success, 3); 10]);
    let mut v = vec![c.outcome(Status::Success, 3); 90];
    v.extend(vec![c.outcome(Status::Failure, 3); 10]);
    let e = efficiency(&v);
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    let errs = [
        rel(a.eta, 1.0 / 1.65),
        rel(b.eta, 1.0 / 2.1),
        rel(e.success_rate, 0.9),
        rel(e.total_time, 220.0),
        rel(e.eta, 0.9 / 2.2),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok((worst < 1e-12, format!("eta = {:.6}, {:.6}, {:.6}; max relative error {worst:.2e}", a.eta, b.eta, e.eta)))
}

// --- criterion 6 ---------------------------------------------------------

fn logical_suppression() -> Verdict {
    let shots = 100_000;
    let mut rates = Vec::new();
    for d in [3, 5, 7] {
        let exp = MemoryExperiment::new(d, d, 0.01, CheckKind::X)?;
        rates.push(RateEstimate::new(count_failures(&exp, shots, 6), shots));
    }
    let decreasing = rates[0].rate > rates[1].rate && rates[1].rate > rates[2].rate;
    let separated = rates[2].high < rates[0].low;
    let detail = rates
        .iter()
        .zip([3, 5, 7])
        .map(|(r, d)| format!("d={d}: {:.5} [{:.5}, {:.5}]", r.rate, r.low, r.high))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((decreasing && separated, detail))
}

// --- criterion 7 ---------------------------------------------------------

fn auc_margin(a: &HeadAuc, positives: usize, negatives: usize) -> (f64, f64) {
    let se = auc_standard_error(a.auc, positives, negatives);
    (se, (a.auc - 0.5) / se)
}

fn predictor_signal() -> Verdict {
    let (d, p) = (5, 0.001);
    let cfg = TrainConfig {
        max_epochs: 10,
        patience: 3,
        seed: 7,
        ..TrainConfig::default()
    };
    // all failures plus a sample of successes; AUC does not depend on the
    // class ratio
    let exp = MemoryExperiment::new(d, d, p, CheckKind::X)?;
    let shots = sample_labelled(&exp, 3_000_000, 71, 0.004);
    let (hs, ys): (Vec<_>, Vec<_>) = shots.into_iter().map(|s| (s.history, s.success)).unzip();
    let mut cnn = Predictor::new(Architecture::Cnn1d, d, exp.layout.n_checks(), 7);
    let report = train(&mut cnn, &make_prefix_dataset(&hs, &ys)?, &cfg)?;
    let cnn_auc = report.head_auc[0].ok_or(qec_abort::Error::Empty("CNN validation class"))?;
    // prefixes of one shot are correlated: count shots, not prefixes
    let (cnn_se, cnn_z) = auc_margin(&cnn_auc, cnn_auc.positives / d, cnn_auc.negatives / d);

    let opts = OslaOptions {
        keep_success: 0.0005,
        ..OslaOptions::default()
    };
    let set = make_osla_dataset(d, p, CheckKind::X, 40_000_000, 72, opts)?;
    let mut mlp = Predictor::new(Architecture::TwoHeadMlp, 2, exp.layout.n_checks(), 7);
    let report = train(&mut mlp, &set, &TrainConfig { max_epochs: 20, ..cfg })?;
    let (g, m) = match (report.head_auc[0], report.head_auc[1]) {
        (Some(g), Some(m)) => (g, m),
        _ => return Ok((false, "a lookahead head saw a single class".into())),
    };
    let (g_se, g_z) = auc_margin(&g, g.positives, g.negatives);
    let (m_se, m_z) = auc_margin(&m, m.positives, m.negatives);
    let ok = cnn_auc.auc >= 0.83 && g.auc >= 0.78 && cnn_z >= 10.0 && g_z >= 10.0 && m_z >= 10.0;
    Ok((
        ok,
        format!(
            "CNN {:.4} ± {cnn_se:.4} ({cnn_z:.1} SE, {} failing prefixes); stop-now {:.4} ± {g_se:.4} ({g_z:.1} SE); one-more {:.4} ± {m_se:.4} ({m_z:.1} SE)",
            cnn_auc.auc, cnn_auc.negatives, g.auc, m.auc
        ),
    ))
}

// --- criteria 8 and 9 ----------------------------------------------------

const P_HIGH: f64 = 0.01;

/// Threshold and lookahead models trained at `(d, P_HIGH)` and a replay set
/// of fresh shots.
fn replay_at(d: usize, n_train: usize, n_replay: usize, with_osla: bool) -> Result<ReplaySet> {
    let cfg = TrainConfig {
        max_epochs: 10,
        patience: 3,
        seed: 5,
        ..TrainConfig::default()
    };
    let exp = MemoryExperiment::new(d, d, P_HIGH, CheckKind::X)?;
    let shots = sample_labelled(&exp, n_train, 81, 1.0);
    let (hs, ys): (Vec<_>, Vec<_>) = shots.into_iter().map(|s| (s.history, s.success)).unzip();
    let mut cnn = Predictor::new(Architecture::Cnn1d, d, exp.layout.n_checks(), 5);
    train(&mut cnn, &make_prefix_dataset(&hs, &ys)?, &cfg)?;
    let mlp = if with_osla {
        let set = make_osla_dataset(d, P_HIGH, CheckKind::X, 40_000, 82, OslaOptions::default())?;
        let mut mlp = Predictor::new(Architecture::TwoHeadMlp, 2, exp.layout.n_checks(), 5);
        train(&mut mlp, &set, &cfg)?;
        Some(mlp)
    } else {
        None
    };
    let replay = sample_labelled(&exp, n_replay, 83, 1.0);
    let (hs, ys): (Vec<_>, Vec<_>) = replay.into_iter().map(|s| (s.history, s.success)).unzip();
    ReplaySet::build(&hs, &ys, Some(&cnn), mlp.as_ref())
}

fn theta_curve(replay: &ReplaySet) -> Result<Vec<f64>> {
    Ok(replay
        .sweep_theta(&CostModel::default(), &theta_grid(20), false)?
        .iter()
        .map(|r| r.1.eta)
        .collect())
}

fn policy_ordering(replay: &ReplaySet) -> Verdict {
    let cost = CostModel::default();
    let fd = replay.fd(&cost).eta;
    let ada = theta_curve(replay)?;
    let best_ada = ada.iter().copied().fold(0.0, f64::max);
    let osla: Vec<f64> = replay.sweep_c(&cost, &DEFAULT_C_GRID)?.iter().map(|r| r.1.eta).collect();
    let best_osla = osla.iter().copied().fold(0.0, f64::max);
    let gain = best_ada / fd - 1.0;
    Ok((
        gain >= 0.08 && best_osla >= fd,
        format!(
            "N={} eta FD {fd:.5}, OSLA {best_osla:.5}, AdAbort {best_ada:.5} (+{:.1}%)",
            replay.shots.len(),
            100.0 * gain
        ),
    ))
}

fn theta_sensitivity(replay_d5: &ReplaySet) -> Verdict {
    let grid = theta_grid(20);
    let curve = theta_curve(replay_d5)?;
    let peaks = count_peaks(&median3(&curve));
    let mut best = Vec::new();
    for d in [3, 7] {
        // the argmax sits where the model's lowest round-1 estimates are,
        // which moves with training noise; 4000 shots leave it dominated by that
        let replay = replay_at(d, 16_000, 20_000, false)?;
        let i = argmax(&theta_curve(&replay)?).unwrap_or(0);
        best.push(grid[i]);
    }
    Ok((
        peaks == 1 && best[1] > best[0],
        format!("d=5 curve has {peaks} peak(s) after smoothing; argmax theta d=3 {}, d=7 {}", best[0], best[1]),
    ))
}

// --- criterion 10 --------------------------------------------------------

fn full_scale_documented() -> Verdict {
    let readme = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md"))?;
    let section = readme.split("## Full-scale runs").nth(1).unwrap_or("");
    let ok = section.contains("qec-abort") && section.contains("-d 15") && section.contains("50000000");
    Ok((ok, "README documents the out-of-CI full-scale commands".into()))
}

// --- criterion 11 --------------------------------------------------------

fn determinism() -> Verdict {
    let dir = tempfile::tempdir()?;
    let base = {
        let mut c = ExperimentConfig::default();
        c.apply_text("d = 3\np = 0.01\nshots = 3000\nseed = 11\nepochs = 2\ntheta = 0.3,0.5\nc = -0.01").map(|_| c)?
    };
    let gen = |name: &str, threads: usize| -> Result<Vec<u8>> {
        let mut c = base.clone();
        c.out = Some(dir.path().join(name));
        with_threads(Some(threads), || cmd_generate(&c))??;
        Ok(fs::read(dir.path().join(name))?)
    };
    let a = gen("a.qshot", 1)?;
    let b = gen("b.qshot", 1)?;
    let c4 = gen("c.qshot", 4)?;
    let gen_ok = a == b && a == c4;

    let mut cfg = base.clone();
    cfg.dataset = Some(dir.path().join("a.qshot"));
    cfg.checkpoint = Some(dir.path().join("cnn.model"));
    cmd_train(&cfg)?;
    let mut osla = cfg.clone();
    osla.arch = Architecture::TwoHeadMlp;
    osla.checkpoint = Some(dir.path().join("osla.model"));
    cmd_train(&osla)?;
    cfg.osla_checkpoint = osla.checkpoint;
    let bench = |name: &str, threads: usize| -> Result<(String, Vec<u8>)> {
        let mut c = cfg.clone();
        c.out = Some(dir.path().join(name));
        let csv = with_threads(Some(threads), || cmd_benchmark(&c))??;
        Ok((csv, fs::read(dir.path().join(name))?))
    };
    let x = bench("x.csv", 1)?;
    let y = bench("y.csv", 1)?;
    let z = bench("z.csv", 4)?;
    let bench_ok = x == y && x == z && x.0.as_bytes() == x.1.as_slice();
    Ok((
        gen_ok && bench_ok,
        format!("generate identical: {gen_ok}; benchmark identical: {bench_ok} ({} rows)", x.0.lines().count() - 1),
    ))
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let mut all_ok = true;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        if !wanted(n) {
            return;
        }
        let start = Instant::now();
        let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        all_ok &= ok;
        println!(
            "{} criterion {n} ({name}): {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "structural exactness", &mut structural);
    report(2, "simulator oracle", &mut simulator_oracle);
    report(3, "matching optimality", &mut matching_optimality);
    report(4, "gradient correctness", &mut gradient_correctness);
    report(5, "metric exactness", &mut metric_exactness);
    report(6, "logical-error suppression", &mut logical_suppression);
    report(7, "predictor signal", &mut predictor_signal);
    if wanted(8) || wanted(9) {
        match replay_at(5, 5000, 200_000, true) {
            Ok(replay) => {
                report(8, "policy ordering", &mut || policy_ordering(&replay));
                report(9, "theta sensitivity", &mut || theta_sensitivity(&replay));
            }
            Err(e) => {
                for (n, name) in [(8, "policy ordering"), (9, "theta sensitivity")] {
                    report(n, name, &mut || Ok((false, format!("error: {e}"))));
                }
            }
        }
    }
    report(10, "full-scale scope", &mut full_scale_documented);
    report(11, "determinism", &mut determinism);
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
