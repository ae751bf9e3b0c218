//! Model checkpoint files.
//!
//! Layout, little-endian: magic `QECMODEL`, version `u16`, architecture
//! name length `u16` and bytes, `t_max u32`, `n_checks u32`,
//! `n_params u64`, `n_state u64`, then the parameters and the batch-norm
//! running statistics as `f64`.

use std::io::{Read, Write};

use super::model::{Architecture, Predictor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"QECMODEL";
const VERSION: u16 = 1;

fn bad(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        detail: detail.into(),
    }
}

impl Predictor {
    pub fn to_bytes(&self) -> Vec<u8> {
        let name = self.arch.name().as_bytes();
        let mut out = Vec::with_capacity(40 + name.len() + 8 * (self.params.len() + self.state.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(self.t_max as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_checks as u32).to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.state.len() as u64).to_le_bytes());
        for v in self.params.iter().chain(&self.state) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
            pos += n;
            Ok(s)
        };
        if take(8)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u16::from_le_bytes(take(2)?.try_into().unwrap());
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let name_len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(name_len)?).map_err(|_| bad("architecture name is not UTF-8"))?;
        let arch = Architecture::parse(name).map_err(|_| bad(format!("unknown architecture {name:?}")))?;
        let t_max = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let n_checks = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let n_params = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let n_state = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        if n_params != Predictor::n_params_for(arch, t_max, n_checks) || n_state != Predictor::n_state_for(arch) {
            return Err(bad("parameter count does not match architecture"));
        }
        let mut read = |n: usize| -> Result<Vec<f64>> {
            (0..n).map(|_| Ok(f64::from_le_bytes(take(8)?.try_into().unwrap()))).collect()
        };
        let params = read(n_params)?;
        let state = read(n_state)?;
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self {
            arch,
            t_max,
            n_checks,
            params,
            state,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
