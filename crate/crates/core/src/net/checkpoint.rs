//! Self-describing checkpoint files.
//!
//! ```text
//! gesture-sig checkpoint
//! format 1
//! # <human-readable summary lines>
//! json <n>
//! <n bytes of JSON descriptor>
//! params <count>
//! <count little-endian f64 values in declared group order>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Architecture, MultiStreamNet};
use super::ops::count_multadds;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;

const MAGIC: &str = "gesture-sig checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub architecture: Architecture,
    pub features: FeatureConfig,
    pub feature_hash: String,
    /// Parameter groups in storage order, with their lengths.
    pub groups: Vec<(String, usize)>,
    /// Resolved configuration of the producing run, stored verbatim.
    #[serde(default)]
    pub run_config: serde_json::Value,
}

pub fn write_checkpoint<W: Write>(
    mut w: W,
    net: &MultiStreamNet,
    features: &FeatureConfig,
    run_config: &serde_json::Value,
) -> Result<()> {
    let groups: Vec<(String, usize)> = net
        .params
        .groups()
        .into_iter()
        .map(|(n, g)| (n, g.len()))
        .collect();
    let meta = CheckpointMeta {
        format_version: FORMAT_VERSION,
        architecture: net.arch.clone(),
        features: features.clone(),
        feature_hash: features.hash(),
        groups,
        run_config: run_config.clone(),
    };
    let flat = net.params.to_flat();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "format {FORMAT_VERSION}")?;
    writeln!(
        w,
        "# variant {}, {} streams, {} classes, hidden {}, ttm {}",
        net.arch.variant,
        net.arch.streams.len(),
        net.arch.classes,
        net.arch.hidden,
        if net.arch.ttm.is_some() { "on" } else { "off" }
    )?;
    for (i, s) in net.arch.streams.iter().enumerate() {
        let kinds: Vec<&str> = s.kinds.iter().map(|k| k.name()).collect();
        writeln!(w, "# stream {i}: {} inputs ({})", s.input_dim, kinds.join("+"))?;
    }
    writeln!(
        w,
        "# feature hash {}, {} parameters, {} mult-adds per forward pass",
        meta.feature_hash,
        flat.len(),
        count_multadds(&net.arch).total()
    )?;
    let json = serde_json::to_string(&meta)?;
    writeln!(w, "json {}", json.len())?;
    w.write_all(json.as_bytes())?;
    writeln!(w)?;
    writeln!(w, "params {}", flat.len())?;
    for v in &flat {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    net: &MultiStreamNet,
    features: &FeatureConfig,
    run_config: &serde_json::Value,
) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), net, features, run_config)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn read_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(bad("unexpected end of file"));
    }
    Ok(line.trim_end_matches('\n').to_string())
}

fn tagged_count(line: &str, tag: &str) -> Result<usize> {
    line.strip_prefix(tag)
        .and_then(|rest| rest.strip_prefix(' '))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| bad(format!("expected `{tag} <n>`, found {line:?}")))
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<(MultiStreamNet, CheckpointMeta)> {
    if read_line(&mut r)? != MAGIC {
        return Err(bad("not a gesture-sig checkpoint"));
    }
    let version = tagged_count(&read_line(&mut r)?, "format")?;
    if version != FORMAT_VERSION as usize {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let mut line = read_line(&mut r)?;
    while line.starts_with('#') {
        line = read_line(&mut r)?;
    }
    let json_len = tagged_count(&line, "json")?;
    let mut json = vec![0u8; json_len];
    r.read_exact(&mut json)?;
    let meta: CheckpointMeta = serde_json::from_slice(&json)?;
    if !read_line(&mut r)?.is_empty() {
        return Err(bad("descriptor length does not match its content"));
    }
    if meta.feature_hash != meta.features.hash() {
        return Err(bad("feature hash does not match the stored feature config"));
    }
    let count = tagged_count(&read_line(&mut r)?, "params")?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            count * 8,
            bytes.len()
        )));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut net = MultiStreamNet::zeros(meta.architecture.clone())?;
    let layout: Vec<(String, usize)> = net
        .params
        .groups()
        .into_iter()
        .map(|(n, g)| (n, g.len()))
        .collect();
    if layout != meta.groups {
        return Err(bad("parameter groups do not match the architecture"));
    }
    net.params.load_flat(&flat)?;
    Ok((net, meta))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(MultiStreamNet, CheckpointMeta)> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

/// First-layer weights of `stream` as `hidden × input` rows: row `h` is
/// neuron `h`'s fan-in in input layout order.
pub fn first_layer_matrix(net: &MultiStreamNet, stream: usize) -> Result<Vec<Vec<f64>>> {
    let s = net.params.streams.get(stream).ok_or_else(|| {
        Error::Config(format!(
            "stream {stream} does not exist ({} streams)",
            net.params.streams.len()
        ))
    })?;
    let fc1 = &s.fc1;
    Ok((0..fc1.output)
        .map(|h| (0..fc1.input).map(|i| fc1.weights[i * fc1.output + h]).collect())
        .collect())
}

/// Comma-separated rows; shortest round-trip decimal, so parsing is exact.
pub fn write_matrix_csv<W: Write>(mut w: W, rows: &[Vec<f64>]) -> Result<()> {
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",")?;
            }
            write!(w, "{v}")?;
            first = false;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
