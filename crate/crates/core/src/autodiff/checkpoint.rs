//! Binary checkpoint of a [`ParameterStore`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "BIGAT1"
//! repeated, in lexicographic name order:
//!   u32 name length, name bytes (UTF-8)
//!   u32 rank, rank x u64 dims
//!   prod(dims) x f64 payload
//! ```
//!
//! Optimizer moments are not saved; a loaded store starts with fresh moments.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::ParameterStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 6] = b"BIGAT1";

pub fn write_checkpoint<T: Scalar>(store: &ParameterStore<T>, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    for (name, p) in store.iter() {
        let shape = p.value.shape();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for x in p.value.data() {
            w.write_all(&x.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or<const N: usize>(r: &mut impl Read, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Checkpoint(format!("truncated while reading {what}")))?;
    Ok(buf)
}

pub fn read_checkpoint<T: Scalar>(mut r: impl Read) -> Result<ParameterStore<T>> {
    let magic: [u8; 6] = read_exact_or(&mut r, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic, expected BIGAT1".into()));
    }
    let mut store = ParameterStore::new();
    let mut previous: Option<String> = None;
    loop {
        let mut len_buf = [0u8; 4];
        match r.read(&mut len_buf[..1])? {
            0 => break,
            _ => r
                .read_exact(&mut len_buf[1..])
                .map_err(|_| Error::Checkpoint("truncated name length".into()))?,
        }
        let name_len = u32::from_le_bytes(len_buf) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|_| Error::Checkpoint("truncated name".into()))?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?;
        if previous.as_deref().is_some_and(|p| p >= name.as_str()) {
            return Err(Error::Checkpoint(format!("`{name}` out of lexicographic order")));
        }
        let rank = u32::from_le_bytes(read_exact_or(&mut r, "rank")?) as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(read_exact_or(&mut r, "dims")?) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let x = f64::from_le_bytes(read_exact_or(&mut r, "payload")?);
            data.push(T::lit(x));
        }
        store.insert(name.clone(), Tensor::new(shape, data)?)?;
        previous = Some(name);
    }
    Ok(store)
}

pub fn save_checkpoint<T: Scalar>(store: &ParameterStore<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    File::create(path)
        .map_err(Error::from)
        .and_then(|f| write_checkpoint(store, BufWriter::new(f)))
        .map_err(|e| e.at_path(path))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<ParameterStore<T>> {
    let path = path.as_ref();
    File::open(path)
        .map_err(Error::from)
        .and_then(|f| read_checkpoint(BufReader::new(f)))
        .map_err(|e| e.at_path(path))
}
