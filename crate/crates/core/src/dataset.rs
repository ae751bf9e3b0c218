//! Shot files: a compact binary format and a hex CSV export.
//!
//! Binary layout, all integers little-endian:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 8 | magic `QECSHOT\0` |
//! | 8  | 2 | format version (`1`) |
//! | 10 | 2 | distance `d` |
//! | 12 | 2 | rounds `T_d` |
//! | 14 | 2 | `n_checks` |
//! | 16 | 2 | `n_terminal` |
//! | 18 | 1 | basis, ASCII `X` or `Z` |
//! | 19 | 1 | convention tag (`1` = detection events, round-1 reference 0) |
//! | 20 | 8 | `p` as IEEE-754 f64 |
//! | 28 | 8 | number of shots `N` |
//! | 36 | … | `N` shot records |
//!
//! A shot record holds `T_d·n_checks` round bits in row-major order, then
//! `n_terminal` terminal bits, then the observable-flip bit. Bits are packed
//! LSB-first, and each record is zero-padded to a whole number of bytes.
//!
//! The CSV has the header `shot,history,terminal,flip`. `history` and
//! `terminal` are the same LSB-first packings as lowercase hex, two digits per
//! byte, each padded separately to whole bytes.

use std::io::{Read, Write};

use crate::circuit::{AnnotatedCircuit, Basis};
use crate::error::{Error, Result};
use crate::layout::CheckKind;
use crate::syndrome::SyndromeHistory;

pub const MAGIC: &[u8; 8] = b"QECSHOT\0";
pub const VERSION: u16 = 1;
pub const CONVENTION_DETECTION_EVENTS: u8 = 1;
const HEADER_LEN: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotFileHeader {
    pub distance: usize,
    pub rounds: usize,
    pub n_checks: usize,
    pub n_terminal: usize,
    pub basis: Basis,
    pub convention: u8,
    pub p: f64,
}

impl ShotFileHeader {
    pub fn for_circuit(c: &AnnotatedCircuit) -> Self {
        Self {
            distance: c.distance,
            rounds: c.rounds,
            n_checks: c.n_checks,
            n_terminal: c.terminal.len(),
            basis: c.basis,
            convention: CONVENTION_DETECTION_EVENTS,
            p: c.error_rate,
        }
    }

    fn bits_per_shot(&self) -> usize {
        self.rounds * self.n_checks + self.n_terminal + 1
    }

    pub fn bytes_per_shot(&self) -> usize {
        self.bits_per_shot().div_ceil(8)
    }

    fn check(&self, h: &SyndromeHistory) -> Result<()> {
        let ok = h.rounds() == self.rounds && h.n_checks() == self.n_checks && h.n_terminal() == self.n_terminal;
        if ok {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                what: "shot dimensions",
                expected: self.bits_per_shot() - 1,
                got: h.n_detectors(),
            })
        }
    }
}

/// A header plus its shots.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotFile {
    pub header: ShotFileHeader,
    pub shots: Vec<SyndromeHistory>,
}

fn put_bit(buf: &mut [u8], i: usize, v: bool) {
    if v {
        buf[i / 8] |= 1 << (i % 8);
    }
}

fn get_bit(buf: &[u8], i: usize) -> bool {
    buf[i / 8] >> (i % 8) & 1 == 1
}

fn u16_field(v: usize, what: &str) -> Result<[u8; 2]> {
    u16::try_from(v)
        .map(u16::to_le_bytes)
        .map_err(|_| Error::Format {
            what: "shot file",
            detail: format!("{what} = {v} does not fit 16 bits"),
        })
}

impl ShotFile {
    pub fn new(header: ShotFileHeader, shots: Vec<SyndromeHistory>) -> Result<Self> {
        for h in &shots {
            header.check(h)?;
        }
        Ok(Self { header, shots })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let h = &self.header;
        let per = h.bytes_per_shot();
        let mut out = Vec::with_capacity(HEADER_LEN + per * self.shots.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&u16_field(h.distance, "distance")?);
        out.extend_from_slice(&u16_field(h.rounds, "rounds")?);
        out.extend_from_slice(&u16_field(h.n_checks, "n_checks")?);
        out.extend_from_slice(&u16_field(h.n_terminal, "n_terminal")?);
        out.push(match h.basis {
            CheckKind::X => b'X',
            CheckKind::Z => b'Z',
        });
        out.push(h.convention);
        out.extend_from_slice(&h.p.to_le_bytes());
        out.extend_from_slice(&(self.shots.len() as u64).to_le_bytes());
        let body = h.rounds * h.n_checks;
        let mut rec = vec![0u8; per];
        for s in &self.shots {
            rec.fill(0);
            for (i, b) in s.round_bits().enumerate() {
                put_bit(&mut rec, i, b);
            }
            for k in 0..h.n_terminal {
                put_bit(&mut rec, body + k, s.terminal(k));
            }
            put_bit(&mut rec, body + h.n_terminal, s.observable_flip);
            out.extend_from_slice(&rec);
        }
        Ok(out)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |detail: String| Error::Format { what: "shot file", detail };
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(bad("missing magic".into()));
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]) as usize;
        let version = u16_at(8) as u16;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let basis = match bytes[18] {
            b'X' => CheckKind::X,
            b'Z' => CheckKind::Z,
            other => return Err(bad(format!("unknown basis byte {other}"))),
        };
        let header = ShotFileHeader {
            distance: u16_at(10),
            rounds: u16_at(12),
            n_checks: u16_at(14),
            n_terminal: u16_at(16),
            basis,
            convention: bytes[19],
            p: f64::from_le_bytes(bytes[20..28].try_into().unwrap()),
        };
        let n = u64::from_le_bytes(bytes[28..36].try_into().unwrap()) as usize;
        let per = header.bytes_per_shot();
        let body_len = bytes.len() - HEADER_LEN;
        if per.checked_mul(n) != Some(body_len) {
            return Err(bad(format!("{n} shots of {per} bytes do not match {body_len} body bytes")));
        }
        let body = header.rounds * header.n_checks;
        let shots = bytes[HEADER_LEN..]
            .chunks_exact(per)
            .map(|rec| {
                let mut s = SyndromeHistory::new(header.rounds, header.n_checks, header.n_terminal);
                for i in 0..body {
                    if get_bit(rec, i) {
                        s.set(i / header.n_checks, i % header.n_checks, true);
                    }
                }
                for k in 0..header.n_terminal {
                    s.set_terminal(k, get_bit(rec, body + k));
                }
                s.observable_flip = get_bit(rec, body + header.n_terminal);
                s
            })
            .collect();
        Ok(Self { header, shots })
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Hex CSV export, one shot per line.
    pub fn to_csv(&self) -> String {
        let h = &self.header;
        let mut out = String::from("shot,history,terminal,flip\n");
        let mut hist = vec![0u8; (h.rounds * h.n_checks).div_ceil(8)];
        let mut term = vec![0u8; h.n_terminal.div_ceil(8)];
        for (i, s) in self.shots.iter().enumerate() {
            hist.fill(0);
            term.fill(0);
            for (j, b) in s.round_bits().enumerate() {
                put_bit(&mut hist, j, b);
            }
            for k in 0..h.n_terminal {
                put_bit(&mut term, k, s.terminal(k));
            }
            out.push_str(&format!("{i},{},{},{}\n", hex::encode(&hist), hex::encode(&term), s.observable_flip as u8));
        }
        out
    }

    /// Parses the CSV export back given the header it was produced with.
    pub fn from_csv(header: ShotFileHeader, text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Format { what: "shot csv", detail };
        let mut lines = text.lines();
        if lines.next() != Some("shot,history,terminal,flip") {
            return Err(bad("unexpected header".into()));
        }
        let mut shots = Vec::new();
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(format!("line {}: expected 4 fields", n + 2)));
            }
            let hist = hex::decode(f[1]).map_err(|e| bad(e.to_string()))?;
            let term = hex::decode(f[2]).map_err(|e| bad(e.to_string()))?;
            if hist.len() != (header.rounds * header.n_checks).div_ceil(8) || term.len() != header.n_terminal.div_ceil(8) {
                return Err(bad(format!("line {}: wrong field width", n + 2)));
            }
            let mut s = SyndromeHistory::new(header.rounds, header.n_checks, header.n_terminal);
            for i in 0..header.rounds * header.n_checks {
                if get_bit(&hist, i) {
                    s.set(i / header.n_checks, i % header.n_checks, true);
                }
            }
            for k in 0..header.n_terminal {
                s.set_terminal(k, get_bit(&term, k));
            }
            s.observable_flip = match f[3] {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("line {}: flip {other}", n + 2))),
            };
            shots.push(s);
        }
        Ok(Self { header, shots })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_memory_circuit;
    use crate::frame::sample_batch;
    use crate::layout::build_layout;

    fn sample() -> ShotFile {
        let c = build_memory_circuit(&build_layout(3).unwrap(), 3, 0.05, CheckKind::X).unwrap();
        ShotFile::new(ShotFileHeader::for_circuit(&c), sample_batch(&c, 40, 9)).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let f = sample();
        let bytes = f.to_bytes().unwrap();
        // 24 round bits + 4 terminal + 1 flip = 29 bits -> 4 bytes
        assert_eq!(bytes.len(), 36 + 40 * 4);
        assert_eq!(&bytes[..8], b"QECSHOT\0");
        assert_eq!(ShotFile::from_bytes(&bytes).unwrap(), f);
        assert!(ShotFile::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = sample();
        let csv = f.to_csv();
        assert_eq!(csv.lines().count(), 41);
        assert_eq!(ShotFile::from_csv(f.header, &csv).unwrap(), f);
    }

    #[test]
    fn header_bytes_are_exact() {
        let mut s = SyndromeHistory::new(2, 8, 4);
        s.set(0, 0, true);
        s.set(1, 7, true);
        s.set_terminal(3, true);
        s.observable_flip = true;
        let header = ShotFileHeader {
            distance: 3,
            rounds: 2,
            n_checks: 8,
            n_terminal: 4,
            basis: CheckKind::X,
            convention: CONVENTION_DETECTION_EVENTS,
            p: 0.5,
        };
        let bytes = ShotFile::new(header, vec![s]).unwrap().to_bytes().unwrap();
        let mut expected = b"QECSHOT\0".to_vec();
        expected.extend([1, 0, 3, 0, 2, 0, 8, 0, 4, 0, b'X', 1]);
        expected.extend(0.5f64.to_le_bytes());
        expected.extend(1u64.to_le_bytes());
        // bit 0, bit 15, bit 19 (terminal 3), bit 20 (flip)
        expected.extend([0x01, 0x80, 0x18]);
        assert_eq!(bytes, expected);
    }
}
