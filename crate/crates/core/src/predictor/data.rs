//! Training examples built from syndrome histories.

use super::model::PAD;
use crate::circuit::Basis;
use crate::error::{Error, Result};
use crate::experiment::{sample_labelled_where, LabelledShot, MemoryExperiment};
use crate::rng::{derive, mix64};
use crate::syndrome::SyndromeHistory;

/// Head tags of the two-head model. Single-head examples use `STOP_NOW`.
pub const STOP_NOW: u8 = 0;
pub const ONE_MORE: u8 = 1;

/// Labelled, padded examples stored compactly as `i8` cells
/// (`0`, `1` or `-1` for padding).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExampleSet {
    pub t_max: usize,
    pub n_checks: usize,
    pub inputs: Vec<i8>,
    /// 1 when the decoder succeeds.
    pub labels: Vec<u8>,
    pub heads: Vec<u8>,
    pub true_rounds: Vec<u8>,
    /// Source shot of each example, used to split without leakage.
    pub groups: Vec<u64>,
}

impl ExampleSet {
    pub fn new(t_max: usize, n_checks: usize) -> Self {
        Self {
            t_max,
            n_checks,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.t_max * self.n_checks
    }

    pub fn input(&self, i: usize) -> &[i8] {
        &self.inputs[i * self.width()..(i + 1) * self.width()]
    }

    /// Appends rows `0..t` of `h` (or `rows` if given) and pads the rest.
    fn push(&mut self, rows: &[&[bool]], label: bool, head: u8, group: u64) {
        for r in 0..self.t_max {
            match rows.get(r) {
                Some(bits) => self.inputs.extend(bits.iter().map(|&b| b as i8)),
                None => self.inputs.extend(std::iter::repeat_n(-1i8, self.n_checks)),
            }
        }
        self.labels.push(label as u8);
        self.heads.push(head);
        self.true_rounds.push(rows.len() as u8);
        self.groups.push(group);
    }

    /// Writes example `i` as f64 into `out`.
    pub fn write_f64(&self, i: usize, out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(self.input(i)) {
            *o = v as f64;
        }
    }
}

fn rows_of(h: &SyndromeHistory) -> Vec<Vec<bool>> {
    (0..h.rounds()).map(|t| (0..h.n_checks()).map(|c| h.get(t, c)).collect()).collect()
}

/// Encodes rounds `0..t` of `h` padded to `t_max` rounds.
pub fn encode_prefix(h: &SyndromeHistory, t: usize, t_max: usize, out: &mut [f64]) {
    let n = h.n_checks();
    for r in 0..t_max {
        for c in 0..n {
            out[r * n + c] = if r < t { h.get(r, c) as u8 as f64 } else { PAD };
        }
    }
}

/// Encodes the single round `t` (0-based) of `h` followed by `t_max - 1`
/// padded rounds, the lookahead input at round `t + 1`.
pub fn encode_round(h: &SyndromeHistory, t: usize, t_max: usize, out: &mut [f64]) {
    let n = h.n_checks();
    for c in 0..n {
        out[c] = h.get(t, c) as u8 as f64;
    }
    out[n..t_max * n].fill(PAD);
}

/// Expands each full-depth shot into one example per prefix length, all
/// carrying the shot's label.
pub fn make_prefix_dataset(shots: &[SyndromeHistory], labels: &[bool]) -> Result<ExampleSet> {
    if shots.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: shots.len(),
            got: labels.len(),
        });
    }
    let first = shots.first().ok_or(Error::Empty("shot list"))?;
    let (t_max, n_checks) = (first.rounds(), first.n_checks());
    let mut set = ExampleSet::new(t_max, n_checks);
    for (i, (h, &y)) in shots.iter().zip(labels).enumerate() {
        if h.rounds() != t_max || h.n_checks() != n_checks {
            return Err(Error::LengthMismatch {
                what: "shot dimensions",
                expected: t_max * n_checks,
                got: h.rounds() * h.n_checks(),
            });
        }
        let rows = rows_of(h);
        for t in 1..=t_max {
            let view: Vec<&[bool]> = rows[..t].iter().map(|r| r.as_slice()).collect();
            set.push(&view, y, STOP_NOW, i as u64);
        }
    }
    Ok(set)
}

/// How the one-more head sees two-round shots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OslaInput {
    /// Row 2 is padded: the head learns the two-round outcome from `s_1`
    /// alone, which is what it is queried with during a lookahead.
    Lookahead,
    /// Both rows are visible.
    FullTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OslaOptions {
    pub input: OslaInput,
    /// Probability of keeping a successful shot (all failures are kept).
    pub keep_success: f64,
    /// Label both heads' examples for both heads (shared-label variant).
    pub shared_label: bool,
}

impl Default for OslaOptions {
    fn default() -> Self {
        Self {
            input: OslaInput::Lookahead,
            keep_success: 1.0,
            shared_label: false,
        }
    }
}

/// Draws `r ∈ {1, 2}` uniformly per shot, simulates an `r`-round memory
/// experiment and tags the example for the stop-now (`r = 1`) or one-more
/// (`r = 2`) head. Shot `i` uses the same seed derivation as full-depth
/// sampling; the round count comes from an independent stream.
pub fn make_osla_dataset(distance: usize, p: f64, basis: Basis, n: usize, seed: u64, opts: OslaOptions) -> Result<ExampleSet> {
    if n == 0 {
        return Err(Error::Empty("OSLA dataset"));
    }
    let one = MemoryExperiment::new(distance, 1, p, basis);
    let two = MemoryExperiment::new(distance, 2, p, basis);
    let (one, two) = match (one, two) {
        (Ok(a), Ok(b)) => (Some(a), Some(b)),
        (Err(Error::NoiselessGraph), Err(Error::NoiselessGraph)) => (None, None),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let r_seed = derive(seed, "osla-rounds");
    let is_two = |i: u64| mix64(r_seed ^ mix64(i)) & 1 == 1;
    let n_checks = distance * distance - 1;
    let mut set = ExampleSet::new(2, n_checks);
    let (shots_one, shots_two) = match (&one, &two) {
        (Some(one), Some(two)) => {
            let a = sample_labelled_where(one, n, seed, opts.keep_success, |i| !is_two(i));
            let b = sample_labelled_where(two, n, seed, opts.keep_success, is_two);
            (a, b)
        }
        _ => {
            // noiseless: every shot is an all-zero success
            let mk = |rounds: usize, want_two: bool| -> Vec<LabelledShot> {
                (0..n as u64)
                    .filter(|&i| is_two(i) == want_two)
                    .map(|index| LabelledShot {
                        index,
                        history: SyndromeHistory::new(rounds, n_checks, 0),
                        success: true,
                    })
                    .collect()
            };
            (mk(1, false), mk(2, true))
        }
    };
    let mut merged: Vec<(u64, u8, &LabelledShot)> = shots_one
        .iter()
        .map(|s| (s.index, STOP_NOW, s))
        .chain(shots_two.iter().map(|s| (s.index, ONE_MORE, s)))
        .collect();
    merged.sort_by_key(|m| m.0);
    for (index, head, shot) in merged {
        let rows = rows_of(&shot.history);
        let visible = match (head, opts.input) {
            (ONE_MORE, OslaInput::FullTrajectory) => 2,
            _ => 1,
        };
        let view: Vec<&[bool]> = rows[..visible].iter().map(|r| r.as_slice()).collect();
        set.push(&view, shot.success, head, index);
        if opts.shared_label {
            set.push(&view, shot.success, 1 - head, index);
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::sample_batch;
    use crate::layout::CheckKind;

    #[test]
    fn prefix_expansion() {
        let exp = MemoryExperiment::new(3, 3, 0.05, CheckKind::X).unwrap();
        let shots = sample_batch(&exp.circuit, 4, 2);
        let labels = [true, false, true, true];
        let set = make_prefix_dataset(&shots, &labels).unwrap();
        assert_eq!(set.len(), 12);
        assert_eq!(set.true_rounds[..3], [1, 2, 3]);
        for i in 0..set.len() {
            let t = set.true_rounds[i] as usize;
            assert!(set.input(i)[t * 8..].iter().all(|&v| v == -1));
            assert!(set.input(i)[..t * 8].iter().all(|&v| v == 0 || v == 1));
            assert_eq!(set.labels[i], labels[i / 3] as u8);
        }
        let mut buf = vec![0.0; 24];
        encode_prefix(&shots[1], 2, 3, &mut buf);
        let mut from_set = vec![0.0; 24];
        set.write_f64(4, &mut from_set);
        assert_eq!(buf, from_set);
        assert!(make_prefix_dataset(&shots, &labels[..3]).is_err());
    }

    #[test]
    fn osla_split_and_padding() {
        let set = make_osla_dataset(3, 0.01, CheckKind::X, 10_000, 4, OslaOptions::default()).unwrap();
        assert_eq!(set.len(), 10_000);
        let ones = set.heads.iter().filter(|&&h| h == ONE_MORE).count() as f64;
        assert!((ones - 5000.0).abs() < 3.0 * 50.0);
        for i in 0..set.len() {
            assert!(set.input(i)[8..].iter().all(|&v| v == -1));
        }
        let full = make_osla_dataset(
            3,
            0.01,
            CheckKind::X,
            200,
            4,
            OslaOptions {
                input: OslaInput::FullTrajectory,
                ..OslaOptions::default()
            },
        )
        .unwrap();
        for i in 0..full.len() {
            let padded = full.input(i)[8..].iter().all(|&v| v == -1);
            assert_eq!(padded, full.heads[i] == STOP_NOW);
        }
    }

    #[test]
    fn noiseless_osla_labels_are_success() {
        let set = make_osla_dataset(3, 0.0, CheckKind::X, 50, 1, OslaOptions::default()).unwrap();
        assert_eq!(set.len(), 50);
        assert!(set.labels.iter().all(|&y| y == 1));
    }
}
