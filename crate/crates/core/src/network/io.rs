//! Model, descriptor and loss-log files.

use std::io::{self, BufRead, Read, Write};

use super::config::NetworkConfig;
use super::model::DescriptorModel;
use super::NetworkError;

const MODEL_MAGIC: &[u8; 8] = b"MVDMODL1";
const DESC_MAGIC: &[u8; 8] = b"MVDDESC1";

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn format_err(section: &str, message: impl Into<String>) -> NetworkError {
    NetworkError::Format {
        section: section.into(),
        message: message.into(),
    }
}

/// Magic, config text length and text, parameter count, then parameters as
/// little-endian `f64` in declaration order.
pub fn write_model<W: Write>(model: &DescriptorModel, mut w: W) -> Result<(), NetworkError> {
    let text = model.config().to_string();
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&(text.len() as u64).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    w.write_all(&(model.param_count() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(model.param_count() * 8);
    for p in model.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<DescriptorModel, NetworkError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| format_err("header", "truncated"))?;
    if &magic != MODEL_MAGIC {
        return Err(format_err("header", "not a model file"));
    }
    let len = read_u64(&mut r).map_err(|_| format_err("config", "truncated"))? as usize;
    if len > 1 << 20 {
        return Err(format_err("config", "config block too large"));
    }
    let mut text = vec![0u8; len];
    r.read_exact(&mut text).map_err(|_| format_err("config", "truncated"))?;
    let text = String::from_utf8(text).map_err(|_| format_err("config", "not UTF-8"))?;
    let config = NetworkConfig::parse(&text)?;
    let mut model = DescriptorModel::zeros(config)?;
    let count = read_u64(&mut r).map_err(|_| format_err("parameters", "truncated"))? as usize;
    if count != model.param_count() {
        return Err(format_err(
            "parameters",
            format!("{count} parameters stored, config needs {}", model.param_count()),
        ));
    }
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes).map_err(|_| format_err("parameters", "truncated"))?;
    for (p, b) in model.params_mut().iter_mut().zip(bytes.chunks_exact(8)) {
        *p = f64::from_le_bytes(b.try_into().expect("8 bytes"));
        if !p.is_finite() {
            return Err(format_err("parameters", "non-finite parameter"));
        }
    }
    Ok(model)
}

/// Magic, count, D, then `count × D` little-endian `f32`.
pub fn write_descriptors<W: Write>(descriptors: &[Vec<f64>], dim: usize, mut w: W) -> Result<(), NetworkError> {
    w.write_all(DESC_MAGIC)?;
    w.write_all(&(descriptors.len() as u64).to_le_bytes())?;
    w.write_all(&(dim as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(descriptors.len() * dim * 4);
    for d in descriptors {
        if d.len() != dim {
            return Err(NetworkError::ShapeMismatch {
                expected: dim,
                found: d.len(),
            });
        }
        for x in d {
            buf.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_descriptors<R: Read>(mut r: R) -> Result<Vec<Vec<f64>>, NetworkError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| format_err("header", "truncated"))?;
    if &magic != DESC_MAGIC {
        return Err(format_err("header", "not a descriptor file"));
    }
    let count = read_u64(&mut r).map_err(|_| format_err("header", "truncated"))? as usize;
    let dim = read_u64(&mut r).map_err(|_| format_err("header", "truncated"))? as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if dim == 0 || bytes.len() != count * dim * 4 {
        return Err(format_err("values", format!("expected {count}×{dim} values")));
    }
    Ok(bytes
        .chunks_exact(dim * 4)
        .map(|row| {
            row.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect()
        })
        .collect())
}

/// `iteration,loss` CSV.
pub fn write_loss_log<W: Write>(losses: &[f64], mut w: W) -> io::Result<()> {
    writeln!(w, "iteration,loss")?;
    for (i, l) in losses.iter().enumerate() {
        writeln!(w, "{i},{l:e}")?;
    }
    Ok(())
}

pub fn read_loss_log<R: BufRead>(r: R) -> Result<Vec<f64>, NetworkError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if n == 0 {
            if line.trim() != "iteration,loss" {
                return Err(format_err("loss log", "missing header"));
            }
            continue;
        }
        let (_, v) = line.split_once(',').ok_or_else(|| format_err("loss log", format!("line {}", n + 1)))?;
        out.push(v.trim().parse().map_err(|_| format_err("loss log", format!("line {}", n + 1)))?);
    }
    Ok(out)
}
