//! JSONL and CSV readers/writers for embedding records.
//!
//! JSONL rows look like
//! `{"user":"u1","finger":3,"index":0,"label":"BF","pad_score":0.93,"embedding":[...]}`;
//! CSV files carry the header `user,finger,index,label,pad_score,e0,..,e{D-1}`.
//! Fingers may be given by index (0..=9) or by name; writers always emit the index.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, EmbeddingRecord, Finger, Label, SampleId};

const FIXED_COLUMNS: [&str; 5] = ["user", "finger", "index", "label", "pad_score"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// `.csv` means CSV; anything else is read as JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

/// Records read from a file, possibly zero of them.
#[derive(Debug, Clone, Default)]
pub struct RecordFile {
    /// `None` only for a JSONL file without rows.
    pub dim: Option<usize>,
    pub records: Vec<EmbeddingRecord>,
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    user: String,
    finger: Finger,
    index: u32,
    label: Label,
    pad_score: f64,
    embedding: Vec<f64>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io { path: path.to_owned(), source })
}

/// Reads every record of a file, validating dimension, finiteness and score range.
pub fn load_records(path: &Path, format: Format) -> Result<RecordFile> {
    let file = open(path)?;
    let result = match format {
        Format::Jsonl => read_jsonl(BufReader::new(file)),
        Format::Csv => read_csv(file),
    };
    result.map_err(|e| match e {
        Error::Io { source, .. } => Error::Io { path: path.to_owned(), source },
        other => other,
    })
}

/// Loads a non-empty validation set.
pub fn load_dataset(path: &Path, format: Format) -> Result<Dataset> {
    let file = load_records(path, format)?;
    match file.dim {
        Some(dim) if !file.records.is_empty() => Dataset::new(dim, file.records),
        _ => Err(Error::EmptyDataset),
    }
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<RecordFile> {
    let mut out = RecordFile::default();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|source| Error::Io { path: Default::default(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonRow = serde_json::from_str(&line).map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let rec = EmbeddingRecord {
            id: SampleId { user: raw.user, finger: raw.finger, index: raw.index },
            label: raw.label,
            embedding: raw.embedding,
            pad_score: raw.pad_score,
        };
        push_checked(&mut out, rec, row)?;
    }
    Ok(out)
}

pub fn read_csv<R: Read>(reader: R) -> Result<RecordFile> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let fixed_ok =
        headers.len() > FIXED_COLUMNS.len() && FIXED_COLUMNS.iter().zip(headers.iter()).all(|(a, b)| *a == b);
    let dims_ok = headers.iter().skip(FIXED_COLUMNS.len()).enumerate().all(|(i, h)| h == format!("e{i}"));
    if !fixed_ok || !dims_ok {
        return Err(Error::Parse {
            row: 0,
            message: "header must be user,finger,index,label,pad_score,e0,..,e{D-1}".into(),
        });
    }
    let dim = headers.len() - FIXED_COLUMNS.len();
    let mut out = RecordFile { dim: Some(dim), records: Vec::new() };
    for row_rec in rdr.records() {
        let fields = row_rec?;
        // file line, header included, to match the JSONL convention
        let row = fields.position().map_or(0, |p| p.line() as usize);
        if fields.len() != headers.len() {
            return Err(Error::DimensionMismatch {
                row,
                expected: dim,
                found: fields.len().saturating_sub(FIXED_COLUMNS.len()),
            });
        }
        let parse_err = |message: String| Error::Parse { row, message };
        let finger: Finger = fields[1].parse().map_err(parse_err)?;
        let index: u32 = fields[2].parse().map_err(|e| parse_err(format!("index: {e}")))?;
        let label: Label = fields[3].parse().map_err(parse_err)?;
        let pad_score: f64 = fields[4].parse().map_err(|e| parse_err(format!("pad_score: {e}")))?;
        let embedding = fields
            .iter()
            .skip(FIXED_COLUMNS.len())
            .map(|v| v.parse::<f64>().map_err(|e| parse_err(format!("embedding: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let rec =
            EmbeddingRecord { id: SampleId { user: fields[0].to_owned(), finger, index }, label, embedding, pad_score };
        push_checked(&mut out, rec, row)?;
    }
    Ok(out)
}

fn push_checked(out: &mut RecordFile, rec: EmbeddingRecord, row: usize) -> Result<()> {
    let dim = *out.dim.get_or_insert(rec.embedding.len());
    if rec.embedding.len() != dim || dim == 0 {
        return Err(Error::DimensionMismatch { row, expected: dim, found: rec.embedding.len() });
    }
    rec.validate(row)?;
    out.records.push(rec);
    Ok(())
}

pub fn write_jsonl<W: Write>(mut writer: W, records: &[EmbeddingRecord]) -> Result<()> {
    for rec in records {
        let row = JsonRow {
            user: rec.id.user.clone(),
            finger: rec.id.finger,
            index: rec.id.index,
            label: rec.label,
            pad_score: rec.pad_score,
            embedding: rec.embedding.clone(),
        };
        serde_json::to_writer(&mut writer, &row)?;
        writer.write_all(b"\n").map_err(|source| Error::Io { path: Default::default(), source })?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(writer: W, dim: usize, records: &[EmbeddingRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let header: Vec<String> =
        FIXED_COLUMNS.iter().map(|s| s.to_string()).chain((0..dim).map(|i| format!("e{i}"))).collect();
    wtr.write_record(&header)?;
    for rec in records {
        let mut row = vec![
            rec.id.user.clone(),
            rec.id.finger.index().to_string(),
            rec.id.index.to_string(),
            rec.label.to_string(),
            rec.pad_score.to_string(),
        ];
        row.extend(rec.embedding.iter().map(f64::to_string));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|source| Error::Io { path: Default::default(), source })?;
    Ok(())
}

/// Serializes records in the requested format into a byte buffer.
pub fn encode_records(format: Format, dim: usize, records: &[EmbeddingRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        Format::Jsonl => write_jsonl(&mut buf, records)?,
        Format::Csv => write_csv(&mut buf, dim, records)?,
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_jsonl_is_an_empty_dataset_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(load_dataset(&path, Format::Jsonl), Err(Error::EmptyDataset)));
        let file = load_records(&path, Format::Jsonl).unwrap();
        assert!(file.records.is_empty());
    }

    #[test]
    fn four_rows_two_users() {
        let text = r#"{"user":"a","finger":0,"index":0,"label":"BF","pad_score":0.9,"embedding":[1,2,3]}
{"user":"a","finger":"index_l","index":0,"label":"PA","pad_score":0.1,"embedding":[0,0,0]}
{"user":"b","finger":0,"index":0,"label":"BF","pad_score":0.8,"embedding":[1,1,1]}
{"user":"b","finger":0,"index":1,"label":"BF","pad_score":0.7,"embedding":[2,2,2]}
"#;
        let file = read_jsonl(text.as_bytes()).unwrap();
        let d = Dataset::new(file.dim.unwrap(), file.records).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.dim(), 3);
        assert_eq!(d.user_index().len(), 2);
        assert_eq!(d.record(1).id.finger, Finger::IndexL);
    }

    #[test]
    fn jsonl_dimension_mismatch_reports_row() {
        let text = r#"{"user":"a","finger":0,"index":0,"label":"BF","pad_score":0.9,"embedding":[1,2,3]}
{"user":"a","finger":0,"index":1,"label":"BF","pad_score":0.9,"embedding":[1,2]}
"#;
        let err = read_jsonl(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { row: 2, expected: 3, found: 2 }));
    }

    #[test]
    fn csv_rejects_non_finite_and_bad_scores() {
        let text = "user,finger,index,label,pad_score,e0,e1\na,0,0,BF,0.5,1.0,NaN\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::NonFinite { row: 2, field: "embedding" })));
        let text = "user,finger,index,label,pad_score,e0,e1\na,0,0,BF,0.5,1.0,2.0\na,0,1,PA,-0.1,1.0,2.0\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::PadScoreOutOfRange { row: 3, .. })));
        let text = "user,finger,index,label,pad_score,e0,e1\na,0,0,BF,0.5,1.0\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::DimensionMismatch { row: 2, .. })));
    }

    #[test]
    fn csv_header_is_checked() {
        let text = "user,finger,idx,label,pad_score,e0\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::Parse { row: 0, .. })));
    }
}
