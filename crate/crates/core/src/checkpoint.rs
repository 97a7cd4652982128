//! Model checkpoint container.
//!
//! A self-describing text format holding a kind tag, string metadata, and
//! named `f64` arrays:
//!
//! ```text
//! guidetrain-checkpoint v1
//! kind: hppn
//! meta.epochs: 80
//! array robot.w_ih 256
//! -0.1387213843273822
//! ...
//! end
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so values
//! restore bit-exactly and files are byte-stable across runs.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

const MAGIC: &str = "guidetrain-checkpoint v1";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("malformed checkpoint at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("checkpoint kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },
    #[error("missing {what} '{name}'")]
    Missing { what: &'static str, name: String },
    #[error("array '{name}' has length {got}, expected {expected}")]
    ArrayLen { name: String, got: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: BTreeMap<String, String>,
    arrays: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn new(kind: &str) -> Self {
        Checkpoint { kind: kind.to_string(), ..Default::default() }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn meta_str(&self, key: &str) -> Result<&str, CheckpointError> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CheckpointError::Missing { what: "meta key", name: key.to_string() })
    }

    pub fn meta_parse<F: std::str::FromStr>(&self, key: &str) -> Result<F, CheckpointError> {
        self.meta_str(key)?.parse().map_err(|_| CheckpointError::Missing {
            what: "parseable meta key",
            name: key.to_string(),
        })
    }

    pub fn push_array(&mut self, name: &str, values: Vec<f64>) {
        self.arrays.push((name.to_string(), values));
    }

    pub fn array(&self, name: &str) -> Result<&[f64], CheckpointError> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| CheckpointError::Missing { what: "array", name: name.to_string() })
    }

    pub fn array_exact(&self, name: &str, expected: usize) -> Result<&[f64], CheckpointError> {
        let a = self.array(name)?;
        if a.len() != expected {
            return Err(CheckpointError::ArrayLen {
                name: name.to_string(),
                got: a.len(),
                expected,
            });
        }
        Ok(a)
    }

    pub fn array_names(&self) -> impl Iterator<Item = &str> {
        self.arrays.iter().map(|(n, _)| n.as_str())
    }

    pub fn expect_kind(&self, kind: &str) -> Result<(), CheckpointError> {
        if self.kind != kind {
            return Err(CheckpointError::KindMismatch {
                expected: kind.to_string(),
                found: self.kind.clone(),
            });
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "kind: {}", self.kind)?;
        for (k, v) in &self.meta {
            writeln!(w, "meta.{k}: {v}")?;
        }
        for (name, values) in &self.arrays {
            writeln!(w, "array {name} {}", values.len())?;
            for v in values {
                writeln!(w, "{v}")?;
            }
        }
        writeln!(w, "end")?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, CheckpointError> {
        let mut lines = r.lines().enumerate();
        let bad = |line: usize, msg: &str| CheckpointError::Malformed { line: line + 1, msg: msg.to_string() };

        let (_, first) = lines.next().ok_or(CheckpointError::BadMagic)?;
        if first?.trim() != MAGIC {
            return Err(CheckpointError::BadMagic);
        }

        let mut ckpt = Checkpoint::default();
        let mut pending: Option<(String, usize, Vec<f64>)> = None;
        for (i, line) in lines {
            let line = line?;
            let line = line.trim_end();
            if let Some((name, len, mut values)) = pending.take() {
                let v: f64 = line
                    .trim()
                    .parse()
                    .map_err(|_| bad(i, &format!("bad float in array {name}")))?;
                values.push(v);
                if values.len() == len {
                    ckpt.arrays.push((name, values));
                } else {
                    pending = Some((name, len, values));
                }
                continue;
            }
            if line == "end" {
                return Ok(ckpt);
            }
            if let Some(rest) = line.strip_prefix("kind: ") {
                ckpt.kind = rest.to_string();
            } else if let Some(rest) = line.strip_prefix("meta.") {
                let (k, v) = rest
                    .split_once(": ")
                    .ok_or_else(|| bad(i, "expected 'meta.key: value'"))?;
                ckpt.meta.insert(k.to_string(), v.to_string());
            } else if let Some(rest) = line.strip_prefix("array ") {
                let (name, len) = rest
                    .rsplit_once(' ')
                    .ok_or_else(|| bad(i, "expected 'array name len'"))?;
                let len: usize = len.parse().map_err(|_| bad(i, "bad array length"))?;
                if len == 0 {
                    ckpt.arrays.push((name.to_string(), Vec::new()));
                } else {
                    pending = Some((name.to_string(), len, Vec::with_capacity(len)));
                }
            } else if !line.is_empty() {
                return Err(bad(i, "unrecognized line"));
            }
        }
        Err(CheckpointError::Malformed { line: 0, msg: "missing 'end'".into() })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(f)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read(f)
    }
}
