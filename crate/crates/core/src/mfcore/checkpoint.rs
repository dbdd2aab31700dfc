//! Binary checkpoints.
//!
//! A single ASCII header line `divmf-ckpt v1 users=<n> items=<m> d=<d>\n`
//! followed by row-major little-endian f64 values: the user embeddings, then
//! the item embeddings.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::MfModel;
use crate::error::{Error, Result};

const MAGIC: &str = "divmf-ckpt v1";

pub fn encode_checkpoint(model: &MfModel) -> Vec<u8> {
    let header = format!(
        "{MAGIC} users={} items={} d={}\n",
        model.n_users(),
        model.n_items(),
        model.dim()
    );
    let mut out = Vec::with_capacity(header.len() + 8 * (model.user_emb().len() + model.item_emb().len()));
    out.extend_from_slice(header.as_bytes());
    for v in model.user_emb().iter().chain(model.item_emb().iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<MfModel> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptCheckpoint("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::CorruptCheckpoint("header is not UTF-8".into()))?;
    let (n_users, n_items, dim) = parse_header(header)?;

    let payload = &bytes[newline + 1..];
    let rows = n_users + n_items;
    let expected = rows * dim * 8;
    if payload.len() != expected {
        let row_bytes = rows * 8;
        if row_bytes > 0 && payload.len() % row_bytes == 0 && payload.len() > 0 {
            return Err(Error::Shape(format!(
                "header declares d={dim} but payload holds d={}",
                payload.len() / row_bytes
            )));
        }
        return Err(Error::CorruptCheckpoint(format!(
            "expected {expected} payload bytes, found {}",
            payload.len()
        )));
    }

    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let user: Vec<f64> = values.by_ref().take(n_users * dim).collect();
    let item: Vec<f64> = values.collect();
    let user = Array2::from_shape_vec((n_users, dim), user).map_err(|e| Error::Shape(e.to_string()))?;
    let item = Array2::from_shape_vec((n_items, dim), item).map_err(|e| Error::Shape(e.to_string()))?;
    MfModel::from_embeddings(user, item)
}

fn parse_header(header: &str) -> Result<(usize, usize, usize)> {
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::CorruptCheckpoint(format!("bad magic in '{header}'")))?;
    let mut dims = [None; 3];
    for part in rest.split_whitespace() {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::CorruptCheckpoint(format!("bad header field '{part}'")))?;
        let slot = match key {
            "users" => 0,
            "items" => 1,
            "d" => 2,
            _ => return Err(Error::CorruptCheckpoint(format!("unknown header field '{key}'"))),
        };
        dims[slot] = Some(
            value
                .parse::<usize>()
                .map_err(|_| Error::CorruptCheckpoint(format!("bad value in '{part}'")))?,
        );
    }
    match dims {
        [Some(u), Some(i), Some(d)] if u > 0 && i > 0 && d > 0 => Ok((u, i, d)),
        _ => Err(Error::CorruptCheckpoint(format!("incomplete header '{header}'"))),
    }
}

pub fn save_checkpoint(model: &MfModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MfModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
