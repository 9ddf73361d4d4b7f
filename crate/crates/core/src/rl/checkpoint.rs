//! Binary checkpoint of a trained policy.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic  b"XRPN"         4 bytes
//! version u32            currently 1
//! history_k u32
//! input_dim u32
//! hidden_layers u32, then that many u32 widths
//! actions u32, then that many f64 ladder bitrates (b/s)
//! steps_done u64
//! param_count u64, then that many f64 parameters in network order
//! ```

use std::io::{Read, Write};

use super::net::PolicyNet;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"XRPN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub history_k: usize,
    pub ladder: Vec<f64>,
    pub steps_done: u64,
    pub net: PolicyNet,
}

fn io(e: std::io::Error) -> Error {
    Error::Checkpoint(e.to_string())
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if self.ladder.len() != self.net.actions() {
            return Err(Error::DimensionMismatch {
                expected: self.net.actions(),
                got: self.ladder.len(),
            });
        }
        let mut buf = Vec::with_capacity(64 + 8 * self.net.param_count());
        buf.extend_from_slice(MAGIC);
        let u32s = |buf: &mut Vec<u8>, v: usize| buf.extend_from_slice(&(v as u32).to_le_bytes());
        u32s(&mut buf, CHECKPOINT_VERSION as usize);
        u32s(&mut buf, self.history_k);
        u32s(&mut buf, self.net.input_dim());
        u32s(&mut buf, self.net.hidden().len());
        for &h in self.net.hidden() {
            u32s(&mut buf, h);
        }
        u32s(&mut buf, self.ladder.len());
        for b in &self.ladder {
            buf.extend_from_slice(&b.to_le_bytes());
        }
        buf.extend_from_slice(&self.steps_done.to_le_bytes());
        buf.extend_from_slice(&(self.net.param_count() as u64).to_le_bytes());
        for p in self.net.params() {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(io)?;
        let mut cur = Cursor {
            bytes: &bytes,
            pos: 0,
        };
        if cur.take(4)? != MAGIC {
            return Err(Error::Checkpoint("not a policy checkpoint".into()));
        }
        let version = cur.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let history_k = cur.u32()? as usize;
        let input_dim = cur.u32()? as usize;
        let n_hidden = cur.u32()? as usize;
        let hidden = (0..n_hidden)
            .map(|_| cur.u32().map(|h| h as usize))
            .collect::<Result<Vec<_>>>()?;
        let actions = cur.u32()? as usize;
        let ladder = (0..actions)
            .map(|_| cur.f64())
            .collect::<Result<Vec<_>>>()?;
        let steps_done = cur.u64()?;
        let n = cur.u64()? as usize;
        let expected = PolicyNet::zeros(input_dim, &hidden, actions)
            .map_err(|e| Error::Checkpoint(e.to_string()))?
            .param_count();
        if n != expected {
            return Err(Error::Checkpoint(format!(
                "{n} parameters for a network that needs {expected}"
            )));
        }
        let params = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        if cur.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint {
            history_k,
            ladder,
            steps_done,
            net: PolicyNet::from_params(input_dim, &hidden, actions, params)?,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}
