//! Binary checkpoint:
//!
//! ```text
//! magic "MKRCKPT\0" | u32 version
//! u32 n | n bytes UTF-8 header, one `key=value` per line
//! u32 count | count × (u32 len, name, u32 ndim, ndim × u64 dim, f64 data…)
//! ```
//!
//! All integers and floats are little-endian. The header holds the
//! hyperparameters and the four table sizes.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{HyperParams, MkrModel, ModelSizes};
use crate::autodiff::Tensor;
use crate::error::{MkrError, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"MKRCKPT\0";
const VERSION: u32 = 1;
const SIZE_KEYS: [&str; 4] = ["users", "items", "entities", "relations"];

fn bad(msg: impl Into<String>) -> MkrError {
    MkrError::Checkpoint(msg.into())
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(bad("file is truncated"));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("string is not UTF-8"))
    }
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

impl<T: Scalar> MkrModel<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let mut header = String::new();
        for (k, v) in self.hp.to_pairs() {
            header.push_str(&format!("{k}={v}\n"));
        }
        let s = self.sizes;
        for (k, v) in SIZE_KEYS.iter().zip([s.users, s.items, s.entities, s.relations]) {
            header.push_str(&format!("{k}={v}\n"));
        }
        write_str(&mut w, &header)?;
        w.write_all(&(self.store.len() as u32).to_le_bytes())?;
        for id in self.store.ids() {
            write_str(&mut w, self.store.name(id))?;
            let value = self.store.value(id);
            w.write_all(&(value.shape().len() as u32).to_le_bytes())?;
            for &d in value.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for x in value.data() {
                w.write_all(&x.as_f64().to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rebuilds the architecture from the header, then overwrites every
    /// parameter. Names and shapes must match exactly.
    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut r = Reader { buf: &bytes };
        if r.take(8)? != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let header = r.string()?;
        let mut hp = HyperParams::default();
        let mut sizes = [None; 4];
        for line in header.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed header line `{line}`")))?;
            match SIZE_KEYS.iter().position(|s| *s == k) {
                Some(i) => sizes[i] = Some(v.parse::<usize>().map_err(|_| bad(format!("bad size `{line}`")))?),
                None => hp.set(k, v)?,
            }
        }
        let [Some(users), Some(items), Some(entities), Some(relations)] = sizes else {
            return Err(bad("header lacks table sizes"));
        };
        let sizes = ModelSizes {
            users,
            items,
            entities,
            relations,
        };
        let mut model = MkrModel::new(hp, sizes, 0)?;
        let count = r.u32()? as usize;
        if count != model.store.len() {
            return Err(bad(format!(
                "checkpoint has {count} parameters, architecture expects {}",
                model.store.len()
            )));
        }
        let mut seen = vec![false; count];
        for _ in 0..count {
            let name = r.string()?;
            let id = model.store.id(&name)?;
            if std::mem::replace(&mut seen[id.index()], true) {
                return Err(bad(format!("`{name}` appears twice")));
            }
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            if shape != model.store.value(id).shape() {
                return Err(bad(format!(
                    "`{name}` has shape {shape:?}, expected {:?}",
                    model.store.value(id).shape()
                )));
            }
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| r.u64().map(|b| T::lit(f64::from_bits(b))))
                .collect::<Result<Vec<T>>>()?;
            model.store.set(id, Tensor::new(shape, data)?)?;
        }
        if !r.buf.is_empty() {
            return Err(bad("trailing bytes after the last parameter"));
        }
        Ok(model)
    }
}
