//! Detection-event histories.

use std::fmt;

/// Detection events of one shot: a `rounds × n_checks` bit matrix (row `t`
/// is the syndrome vector of round `t + 1`), the terminal events derived
/// from the final transversal readout, and the ground-truth observable flip.
///
/// Rows are packed 64 checks per word and every row starts on a word
/// boundary. Detector ids are round-major (`t * n_checks + check`) with the
/// terminal detectors numbered after the last round.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SyndromeHistory {
    rounds: usize,
    n_checks: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    n_terminal: usize,
    terminal: Vec<u64>,
    pub observable_flip: bool,
}

impl SyndromeHistory {
    pub fn new(rounds: usize, n_checks: usize, n_terminal: usize) -> Self {
        let words_per_row = n_checks.div_ceil(64);
        Self {
            rounds,
            n_checks,
            words_per_row,
            bits: vec![0; rounds * words_per_row],
            n_terminal,
            terminal: vec![0; n_terminal.div_ceil(64)],
            observable_flip: false,
        }
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn n_checks(&self) -> usize {
        self.n_checks
    }

    pub fn n_terminal(&self) -> usize {
        self.n_terminal
    }

    /// Number of detectors including terminal ones.
    pub fn n_detectors(&self) -> usize {
        self.rounds * self.n_checks + self.n_terminal
    }

    pub fn clear(&mut self) {
        self.bits.fill(0);
        self.terminal.fill(0);
        self.observable_flip = false;
    }

    #[inline]
    pub fn get(&self, round: usize, check: usize) -> bool {
        debug_assert!(round < self.rounds && check < self.n_checks);
        let w = self.bits[round * self.words_per_row + check / 64];
        (w >> (check % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, round: usize, check: usize, value: bool) {
        debug_assert!(round < self.rounds && check < self.n_checks);
        let w = &mut self.bits[round * self.words_per_row + check / 64];
        let mask = 1u64 << (check % 64);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn terminal(&self, k: usize) -> bool {
        (self.terminal[k / 64] >> (k % 64)) & 1 == 1
    }

    #[inline]
    pub fn set_terminal(&mut self, k: usize, value: bool) {
        let mask = 1u64 << (k % 64);
        if value {
            self.terminal[k / 64] |= mask;
        } else {
            self.terminal[k / 64] &= !mask;
        }
    }

    /// Value of detector `id` in round-major numbering.
    pub fn detector(&self, id: usize) -> bool {
        let body = self.rounds * self.n_checks;
        if id < body {
            self.get(id / self.n_checks, id % self.n_checks)
        } else {
            self.terminal(id - body)
        }
    }

    pub fn set_detector(&mut self, id: usize, value: bool) {
        let body = self.rounds * self.n_checks;
        if id < body {
            self.set(id / self.n_checks, id % self.n_checks, value)
        } else {
            self.set_terminal(id - body, value)
        }
    }

    /// Packed words of round `round`.
    pub fn row_words(&self, round: usize) -> &[u64] {
        &self.bits[round * self.words_per_row..(round + 1) * self.words_per_row]
    }

    pub fn terminal_words(&self) -> &[u64] {
        &self.terminal
    }

    /// Fired detector ids in increasing order.
    pub fn fired(&self) -> impl Iterator<Item = usize> + '_ {
        let body = (0..self.rounds).flat_map(move |t| {
            self.row_words(t)
                .iter()
                .enumerate()
                .flat_map(move |(wi, &w)| ones(w).map(move |b| t * self.n_checks + wi * 64 + b))
        });
        let base = self.rounds * self.n_checks;
        let terminal = self
            .terminal
            .iter()
            .enumerate()
            .flat_map(move |(wi, &w)| ones(w).map(move |b| base + wi * 64 + b));
        body.chain(terminal)
    }

    /// Number of fired detectors in the first `rounds` rows.
    pub fn count_in_rounds(&self, rounds: usize) -> usize {
        self.bits[..rounds * self.words_per_row]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// Total number of fired detectors.
    pub fn weight(&self) -> usize {
        self.count_in_rounds(self.rounds)
            + self.terminal.iter().map(|w| w.count_ones() as usize).sum::<usize>()
    }

    /// Row-major bits of the round matrix (terminal events excluded).
    pub fn round_bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.rounds).flat_map(move |t| (0..self.n_checks).map(move |c| self.get(t, c)))
    }
}

fn ones(mut w: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if w == 0 {
            None
        } else {
            let b = w.trailing_zeros() as usize;
            w &= w - 1;
            Some(b)
        }
    })
}

impl fmt::Debug for SyndromeHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SyndromeHistory {}x{} flip={}", self.rounds, self.n_checks, self.observable_flip as u8)?;
        for t in 0..self.rounds {
            let row: String = (0..self.n_checks).map(|c| if self.get(t, c) { '1' } else { '.' }).collect();
            writeln!(f, "  {row}")?;
        }
        let term: String = (0..self.n_terminal).map(|k| if self.terminal(k) { '1' } else { '.' }).collect();
        write!(f, "  terminal {term}")
    }
}
