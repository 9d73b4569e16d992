//! Embedding and trial file formats.
//!
//! Embedding TSV: a `#dim<TAB>D` header, then one
//! `speaker<TAB>utterance<TAB>v1<TAB>...<TAB>vD` line per record.
//!
//! Embedding binary: magic `EMB1`, `u32` dim, `u64` record count, then per
//! record a `u16`-length-prefixed speaker id, a `u16`-length-prefixed
//! utterance id and `dim` `f64` values. All integers and floats little-endian.
//!
//! Trial TSV: `enroll<TAB>test<TAB>target|nontarget`, no header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Dataset, Embedding, Trial, TrialLabel};
use crate::error::{Error, Result};
use crate::linalg::Vector;

pub(crate) const EMB_MAGIC: &[u8; 4] = b"EMB1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Tsv,
    Binary,
}

impl std::str::FromStr for EmbeddingFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(EmbeddingFormat::Tsv),
            "binary" | "bin" => Ok(EmbeddingFormat::Binary),
            other => Err(format!("unknown embedding format `{other}`")),
        }
    }
}

pub fn load_embeddings(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<Dataset> {
    let path = path.as_ref();
    match format {
        EmbeddingFormat::Tsv => load_tsv(path),
        EmbeddingFormat::Binary => load_binary(path),
    }
}

/// Loads either format, picking binary when the file starts with `EMB1`.
pub fn load_embeddings_auto(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut head = [0u8; 4];
    let n = File::open(path)?.read(&mut head)?;
    if n == 4 && &head == EMB_MAGIC {
        load_binary(path)
    } else {
        load_tsv(path)
    }
}

pub fn write_embeddings(d: &Dataset, path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    match format {
        EmbeddingFormat::Tsv => write_tsv(d, &mut w)?,
        EmbeddingFormat::Binary => write_binary(d, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn load_tsv(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| parse_err(path, 1, "empty file; expected `#dim<TAB>D` header"))?;
    let dim = header
        .strip_prefix("#dim\t")
        .and_then(|d| d.trim_end_matches('\r').parse::<usize>().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| parse_err(path, 1, format!("bad header `{header}`; expected `#dim<TAB>D`")))?;

    let mut embeddings = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let speaker = fields.next().unwrap_or_default();
        let utterance = fields
            .next()
            .ok_or_else(|| parse_err(path, lineno, "missing utterance id"))?;
        if speaker.is_empty() || utterance.is_empty() {
            return Err(parse_err(path, lineno, "empty speaker or utterance id"));
        }
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(path, lineno, format!("bad value `{f}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        if !seen.insert(utterance.to_string()) {
            return Err(Error::DuplicateUtterance(utterance.to_string()));
        }
        let vector = Vector::new(values).map_err(|e| parse_err(path, lineno, e.to_string()))?;
        if !(vector.norm() > 0.0) {
            return Err(parse_err(path, lineno, format!("zero-norm vector for `{utterance}`")));
        }
        embeddings.push(Embedding::new(speaker, utterance, vector));
    }
    Dataset::new(dim, embeddings)
}

fn write_tsv(d: &Dataset, w: &mut impl Write) -> Result<()> {
    writeln!(w, "#dim\t{}", d.dim())?;
    for e in d.embeddings() {
        write!(w, "{}\t{}", e.speaker_id, e.utterance_id)?;
        for x in e.vector.as_slice() {
            // Debug formatting is the shortest string that parses back exactly
            write!(w, "\t{x:?}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                path: self.path.to_path_buf(),
                message: format!("truncated file while reading {what} at byte {}", self.pos),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, len: usize, what: &str) -> Result<String> {
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Format {
            path: self.path.to_path_buf(),
            message: format!("{what} is not valid UTF-8"),
        })
    }
}

pub(crate) fn read_magic(path: &Path, magic: &[u8; 4]) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("missing `{}` magic", String::from_utf8_lossy(magic)),
        });
    }
    Ok(bytes)
}

fn load_binary(path: &Path) -> Result<Dataset> {
    let bytes = read_magic(path, EMB_MAGIC)?;
    let mut c = Cursor { path, bytes: &bytes, pos: 4 };
    let dim = c.u32("dim")? as usize;
    let count = c.u64("record count")?;
    let format_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    if dim == 0 {
        return Err(format_err("dim must be positive".into()));
    }
    let mut embeddings = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for rec in 0..count {
        let what = format!("record {rec}");
        let spk_len = c.u16(&what)? as usize;
        let speaker = c.string(spk_len, &what)?;
        let utt_len = c.u16(&what)? as usize;
        let utterance = c.string(utt_len, &what)?;
        let values = (0..dim).map(|_| c.f64(&what)).collect::<Result<Vec<_>>>()?;
        let vector = Vector::new(values).map_err(|e| format_err(format!("record {rec}: {e}")))?;
        if !(vector.norm() > 0.0) {
            return Err(format_err(format!("record {rec}: zero-norm vector for `{utterance}`")));
        }
        if !seen.insert(utterance.clone()) {
            return Err(Error::DuplicateUtterance(utterance));
        }
        embeddings.push(Embedding::new(speaker, utterance, vector));
    }
    if c.pos != bytes.len() {
        return Err(format_err(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Dataset::new(dim, embeddings)
}

fn write_binary(d: &Dataset, w: &mut impl Write) -> Result<()> {
    w.write_all(EMB_MAGIC)?;
    let dim = u32::try_from(d.dim()).map_err(|_| Error::InvalidConfig("dim exceeds u32".into()))?;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&(d.len() as u64).to_le_bytes())?;
    for e in d.embeddings() {
        for id in [&e.speaker_id, &e.utterance_id] {
            let len = u16::try_from(id.len())
                .map_err(|_| Error::InvalidConfig(format!("id `{id}` longer than 65535 bytes")))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(id.as_bytes())?;
        }
        for x in e.vector.as_slice() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_trials(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut trials = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [enroll, test, label] = fields[..] else {
            return Err(parse_err(path, lineno, format!("expected 3 columns, found {}", fields.len())));
        };
        let label: TrialLabel = label.parse().map_err(|e: String| parse_err(path, lineno, e))?;
        let trial = Trial::new(enroll, test, label).map_err(|e| parse_err(path, lineno, e.to_string()))?;
        trials.push(trial);
    }
    Ok(trials)
}

pub fn write_trials(trials: &[Trial], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for t in trials {
        writeln!(w, "{}\t{}\t{}", t.enroll, t.test, t.label.as_str())?;
    }
    w.flush()?;
    Ok(())
}
