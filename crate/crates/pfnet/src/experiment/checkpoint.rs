//! Versioned binary checkpoints: every persistable tensor with shape
//! headers, raw little-endian f64 payloads, bitwise round-trips.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::model::SpeakerNet;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"PFNETCK1";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config_hash: String,
    pub front_end: String,
    pub epoch: u64,
    pub tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl Checkpoint {
    pub fn capture(model: &mut SpeakerNet, epoch: u64, config_hash: &str) -> Self {
        let mut tensors = Vec::new();
        model.for_each_state(&mut |name, t| {
            tensors.push((name.to_string(), t.shape().to_vec(), t.data().to_vec()));
        });
        Checkpoint {
            config_hash: config_hash.to_string(),
            front_end: model.kind.name().to_string(),
            epoch,
            tensors,
        }
    }

    /// Write params, optimizer accumulators, and running stats back into a
    /// freshly constructed model. Names and shapes must match exactly.
    pub fn apply(&self, model: &mut SpeakerNet) -> Result<()> {
        if model.kind.name() != self.front_end {
            return Err(Error::config(format!(
                "checkpoint was trained with front end '{}', model is '{}'",
                self.front_end,
                model.kind.name()
            )));
        }
        let mut lookup: std::collections::BTreeMap<&str, (&[usize], &[f64])> = self
            .tensors
            .iter()
            .map(|(n, s, d)| (n.as_str(), (s.as_slice(), d.as_slice())))
            .collect();
        let mut problem = None;
        let mut applied = 0usize;
        model.for_each_state(&mut |name, t: &mut Tensor| match lookup.remove(name) {
            Some((shape, data)) if shape == t.shape() => {
                t.data_mut().copy_from_slice(data);
                applied += 1;
            }
            Some((shape, _)) => {
                problem.get_or_insert(format!(
                    "tensor '{name}': checkpoint shape {shape:?} vs model {:?}",
                    t.shape()
                ));
            }
            None => {
                problem.get_or_insert(format!("tensor '{name}' missing from checkpoint"));
            }
        });
        if let Some(p) = problem {
            return Err(Error::config(format!("checkpoint mismatch: {p}")));
        }
        if let Some((name, _)) = lookup.into_iter().next() {
            return Err(Error::config(format!(
                "checkpoint has extra tensor '{name}' unknown to the model"
            )));
        }
        let _ = applied;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(MAGIC);
        write_str(&mut out, &self.config_hash);
        write_str(&mut out, &self.front_end);
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, shape, data) in &self.tensors {
            write_str(&mut out, name);
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::File::create(path)?.write_all(&out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > buf.len() {
                return Err(Error::format("checkpoint", "truncated file"));
            }
            let s = &buf[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 8)? != MAGIC {
            return Err(Error::format("checkpoint_magic", "not a pfnet checkpoint"));
        }
        let config_hash = read_str(&buf, &mut pos)?;
        let front_end = read_str(&buf, &mut pos)?;
        let epoch = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        let count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name = read_str(&buf, &mut pos)?;
            let ndim = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize);
            }
            let len: usize = shape.iter().product();
            let raw = take(&mut pos, len * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((name, shape, data));
        }
        Ok(Checkpoint {
            config_hash,
            front_end,
            epoch,
            tensors,
        })
    }
}

fn write_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn read_str(buf: &[u8], pos: &mut usize) -> Result<String> {
    if *pos + 4 > buf.len() {
        return Err(Error::format("checkpoint", "truncated string length"));
    }
    let len = u32::from_le_bytes(buf[*pos..*pos + 4].try_into().unwrap()) as usize;
    *pos += 4;
    if *pos + len > buf.len() {
        return Err(Error::format("checkpoint", "truncated string body"));
    }
    let s = String::from_utf8(buf[*pos..*pos + len].to_vec())
        .map_err(|e| Error::format("checkpoint", format!("{e}")))?;
    *pos += len;
    Ok(s)
}
