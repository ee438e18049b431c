//! Binary dataset files for series tasks and utterance sets.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        4 bytes  "DRCD"
//! version      u32      = 1
//! kind         u8       0 = series, 1 = utterances
//! n_classes    u32      0 for series
//! channels     u32
//! n_records    u64
//! series:      split (4 × u64: washout1, train_len, washout2, test_len)
//!              T u64, T×C f64 input (row-major), T f64 target
//! utterances:  per record: id_len u32, id (UTF-8), label u32, T u64,
//!              T×C f64 features (row-major)
//! ```
//!
//! Features round-trip bit-exactly. [`write_text`] produces a CSV export
//! for inspection; [`import_utterances_csv`] reads user-supplied
//! precomputed features.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::linalg::Matrix;
use crate::masking::InputSequence;
use crate::readout::{Utterance, UtteranceDataset};
use crate::tasks::{SeriesTask, SplitSpec};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"DRCD";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetFile {
    Series(SeriesTask),
    Utterances(UtteranceDataset),
}

impl From<SeriesTask> for DatasetFile {
    fn from(t: SeriesTask) -> Self {
        DatasetFile::Series(t)
    }
}

impl From<UtteranceDataset> for DatasetFile {
    fn from(d: UtteranceDataset) -> Self {
        DatasetFile::Utterances(d)
    }
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64s(w: &mut impl Write, vs: &[f64]) -> std::io::Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn encode(file: &DatasetFile, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(&MAGIC)?;
    put_u32(w, FORMAT_VERSION)?;
    match file {
        DatasetFile::Series(task) => {
            w.write_all(&[0])?;
            put_u32(w, 0)?;
            put_u32(w, task.input.channels() as u32)?;
            put_u64(w, 1)?;
            let s = task.split;
            for v in [s.washout1, s.train_len, s.washout2, s.test_len] {
                put_u64(w, v as u64)?;
            }
            put_u64(w, task.len() as u64)?;
            put_f64s(w, task.input.matrix().as_slice())?;
            put_f64s(w, &task.target)?;
        }
        DatasetFile::Utterances(ds) => {
            w.write_all(&[1])?;
            put_u32(w, ds.n_classes as u32)?;
            put_u32(w, ds.channels() as u32)?;
            put_u64(w, ds.len() as u64)?;
            for u in &ds.utterances {
                put_u32(w, u.id.len() as u32)?;
                w.write_all(u.id.as_bytes())?;
                put_u32(w, u.label as u32)?;
                put_u64(w, u.features.rows() as u64)?;
                put_f64s(w, u.features.as_slice())?;
            }
        }
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner
            .read_exact(&mut b)
            .map_err(|_| Error::DatasetFormat(format!("truncated file while reading {what}")))?;
        Ok(b)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<usize> {
        let v = u64::from_le_bytes(self.bytes(what)?);
        usize::try_from(v).map_err(|_| Error::DatasetFormat(format!("{what} = {v} does not fit in memory")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        // bound the up-front allocation; a lying header then fails on read
        let mut out = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            out.push(f64::from_le_bytes(self.bytes(what)?));
        }
        Ok(out)
    }
}

fn block_len(rows: usize, cols: usize) -> Result<usize> {
    rows.checked_mul(cols)
        .ok_or_else(|| Error::DatasetFormat(format!("block {rows}x{cols} overflows")))
}

pub fn decode(r: impl Read) -> Result<DatasetFile> {
    let mut c = Cursor { inner: r };
    if c.bytes::<4>("magic")? != MAGIC {
        return Err(Error::DatasetFormat("not a dataset file (bad magic)".into()));
    }
    let version = c.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::DatasetFormat(format!(
            "unsupported dataset version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let [kind] = c.bytes::<1>("kind")?;
    let n_classes = c.u32("n_classes")? as usize;
    let channels = c.u32("channels")? as usize;
    let n_records = c.u64("record count")?;
    let file = match kind {
        0 => {
            if n_records != 1 {
                return Err(Error::DatasetFormat(format!("series file must hold 1 record, found {n_records}")));
            }
            let split = SplitSpec::new(
                c.u64("split")?,
                c.u64("split")?,
                c.u64("split")?,
                c.u64("split")?,
            );
            let t = c.u64("series length")?;
            let input = c.f64s(block_len(t, channels)?, "series input")?;
            let target = c.f64s(t, "series target")?;
            DatasetFile::Series(SeriesTask::new(
                InputSequence::new(Matrix::from_row_major(t, channels, input)?)?,
                target,
                split,
            )?)
        }
        1 => {
            let mut utterances = Vec::with_capacity(n_records.min(1 << 16));
            for i in 0..n_records {
                let id_len = c.u32("id length")? as usize;
                let mut id = vec![0u8; id_len.min(1 << 16)];
                if id_len > id.len() {
                    return Err(Error::DatasetFormat(format!("record {i}: id length {id_len} too large")));
                }
                c.inner
                    .read_exact(&mut id)
                    .map_err(|_| Error::DatasetFormat(format!("record {i}: truncated id")))?;
                let id = String::from_utf8(id)
                    .map_err(|_| Error::DatasetFormat(format!("record {i}: id is not UTF-8")))?;
                let label = c.u32("label")? as usize;
                let t = c.u64("utterance length")?;
                let data = c.f64s(block_len(t, channels)?, "features")?;
                utterances.push(Utterance {
                    id,
                    label,
                    features: Matrix::from_row_major(t, channels, data)?,
                });
            }
            DatasetFile::Utterances(UtteranceDataset::new(utterances, n_classes)?)
        }
        k => return Err(Error::DatasetFormat(format!("unknown dataset kind {k}"))),
    };
    let mut rest = [0u8; 1];
    if c.inner.read(&mut rest).map_err(|e| Error::DatasetFormat(e.to_string()))? != 0 {
        return Err(Error::DatasetFormat("trailing bytes after last record".into()));
    }
    Ok(file)
}

pub fn write_dataset(path: &Path, file: &DatasetFile) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    encode(file, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode(BufReader::new(f))
}

/// CSV export: `n,input_0..,target` for series; `id,label,t,f_0..` for
/// utterances. Floats are written in shortest round-trip form.
pub fn write_text(file: &DatasetFile, w: &mut impl Write) -> std::io::Result<()> {
    match file {
        DatasetFile::Series(task) => {
            let c = task.input.channels();
            let cols: Vec<String> = (0..c).map(|i| format!("input_{i}")).collect();
            writeln!(w, "n,{},target", cols.join(","))?;
            for (n, y) in task.target.iter().enumerate() {
                let xs: Vec<String> = task.input.at(n).iter().map(|v| v.to_string()).collect();
                writeln!(w, "{n},{},{y}", xs.join(","))?;
            }
        }
        DatasetFile::Utterances(ds) => {
            let cols: Vec<String> = (0..ds.channels()).map(|i| format!("f_{i}")).collect();
            writeln!(w, "id,label,t,{}", cols.join(","))?;
            for u in &ds.utterances {
                for (t, row) in u.features.row_iter().enumerate() {
                    let xs: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    writeln!(w, "{},{},{t},{}", u.id, u.label, xs.join(","))?;
                }
            }
        }
    }
    Ok(())
}

/// Reads precomputed features from CSV with a header row and columns
/// `id,label,f_0,...,f_{C-1}`. Consecutive rows with the same id form one
/// utterance, in file order.
pub fn import_utterances_csv(r: impl Read, n_classes: Option<usize>) -> Result<UtteranceDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
    let headers = reader.headers().map_err(|e| Error::DatasetFormat(e.to_string()))?.clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "label" {
        return Err(Error::DatasetFormat(
            "CSV header must start with `id,label` followed by at least one feature column".into(),
        ));
    }
    let channels = headers.len() - 2;
    let mut utterances: Vec<Utterance> = Vec::new();
    let mut current: Option<(String, usize, Vec<f64>)> = None;
    let flush = |cur: Option<(String, usize, Vec<f64>)>, out: &mut Vec<Utterance>| -> Result<()> {
        if let Some((id, label, data)) = cur {
            let t = data.len() / channels;
            out.push(Utterance {
                id,
                label,
                features: Matrix::from_row_major(t, channels, data)?,
            });
        }
        Ok(())
    };
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::DatasetFormat(e.to_string()))?;
        let row = line + 2;
        let id = rec[0].to_string();
        let label: usize = rec[1]
            .parse()
            .map_err(|_| Error::DatasetFormat(format!("line {row}: bad label {:?}", &rec[1])))?;
        let feats = rec
            .iter()
            .skip(2)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::DatasetFormat(format!("line {row}: bad feature {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match &mut current {
            Some((cid, clabel, data)) if *cid == id => {
                if *clabel != label {
                    return Err(Error::DatasetFormat(format!("line {row}: label changes within utterance {id:?}")));
                }
                data.extend(feats);
            }
            _ => {
                flush(current.take(), &mut utterances)?;
                current = Some((id, label, feats));
            }
        }
    }
    flush(current, &mut utterances)?;
    let n_classes = match n_classes {
        Some(k) => k,
        None => utterances.iter().map(|u| u.label + 1).max().unwrap_or(0),
    };
    UtteranceDataset::new(utterances, n_classes)
}
