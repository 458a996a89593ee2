//! File formats: dataset CSV, sorted pretty JSON and atomic writes.
//!
//! Dataset CSV layout: one `ch_<id>:<f>` column per channel feature
//! (`f` in `0..d`), then a `label` column holding the task name. One sample
//! per row, `.` as decimal separator.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChannelId, ChannelReadings, Dataset, Sample, TaskId};

struct Header {
    channels: Vec<ChannelId>,
    feature_width: usize,
    /// column index -> (channel position, feature index)
    columns: Vec<Option<(usize, usize)>>,
    label_column: Option<usize>,
}

fn parse_header(record: &csv::StringRecord) -> Result<Header> {
    let mut channels: Vec<ChannelId> = Vec::new();
    let mut features: BTreeMap<ChannelId, Vec<usize>> = BTreeMap::new();
    let mut raw = Vec::with_capacity(record.len());
    let mut label_column = None;

    for (col, name) in record.iter().enumerate() {
        let name = name.trim();
        if name == "label" {
            if label_column.replace(col).is_some() {
                return Err(Error::Csv("duplicate label column".into()));
            }
            raw.push(None);
            continue;
        }
        let spec = name
            .strip_prefix("ch_")
            .ok_or_else(|| Error::Csv(format!("unexpected column {name:?}")))?;
        let (id, feat) = spec
            .split_once(':')
            .ok_or_else(|| Error::Csv(format!("column {name:?} lacks a feature index")))?;
        let id: u32 = id
            .parse()
            .map_err(|_| Error::Csv(format!("bad channel id in column {name:?}")))?;
        let feat: usize = feat
            .parse()
            .map_err(|_| Error::Csv(format!("bad feature index in column {name:?}")))?;
        let channel = ChannelId(id);
        if !features.contains_key(&channel) {
            channels.push(channel);
        }
        let entry = features.entry(channel).or_default();
        if entry.contains(&feat) {
            return Err(Error::Csv(format!("duplicate column {name:?}")));
        }
        entry.push(feat);
        raw.push(Some((channel, feat)));
    }

    if channels.is_empty() {
        return Err(Error::Csv("no channel columns".into()));
    }
    let feature_width = features[&channels[0]].len();
    for (channel, feats) in &features {
        let mut sorted = feats.clone();
        sorted.sort_unstable();
        if sorted != (0..feature_width).collect::<Vec<_>>() {
            return Err(Error::Csv(format!(
                "channel {channel} must have feature columns 0..{feature_width}"
            )));
        }
    }

    let columns = raw
        .into_iter()
        .map(|c| c.map(|(ch, f)| (channels.iter().position(|&x| x == ch).unwrap(), f)))
        .collect();
    Ok(Header {
        channels,
        feature_width,
        columns,
        label_column,
    })
}

/// Orders task names so that `T2` sorts before `T10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (&str, Option<u64>) {
        let digits = s.len() - s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (prefix, num) = s.split_at(s.len() - digits);
        (prefix, num.parse().ok())
    }
    let (pa, na) = split(a);
    let (pb, nb) = split(b);
    pa.cmp(pb).then(na.cmp(&nb)).then(a.cmp(b))
}

/// Per-channel feature vectors plus the label cell, if any.
type Row = (Vec<Vec<f64>>, Option<String>);

fn parse_rows<R: Read>(reader: R) -> Result<(Header, Vec<Row>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = parse_header(rdr.headers().map_err(|e| Error::Csv(e.to_string()))?)?;
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let mut readings = vec![vec![0.0; header.feature_width]; header.channels.len()];
        let mut label = None;
        for (col, field) in record.iter().enumerate() {
            if Some(col) == header.label_column {
                label = Some(field.to_string());
                continue;
            }
            let (pos, feat) = header.columns[col].expect("non-label column");
            readings[pos][feat] = field.parse().map_err(|_| {
                Error::Csv(format!("row {line}: cannot parse {field:?} as a number"))
            })?;
        }
        rows.push((readings, label));
    }
    Ok((header, rows))
}

/// Parses a labelled dataset. When `known_tasks` is given, task indices
/// follow that list and unknown labels are rejected; otherwise tasks are
/// the distinct labels in natural order.
pub fn parse_dataset<R: Read>(reader: R, known_tasks: Option<&[String]>) -> Result<Dataset> {
    let (header, rows) = parse_rows(reader)?;
    if header.label_column.is_none() {
        return Err(Error::Csv("missing label column".into()));
    }
    let tasks: Vec<String> = match known_tasks {
        Some(t) => t.to_vec(),
        None => {
            let mut names: Vec<String> = rows.iter().filter_map(|(_, l)| l.clone()).collect();
            names.sort_by(|a, b| natural_cmp(a, b));
            names.dedup();
            names
        }
    };
    let samples = rows
        .into_iter()
        .enumerate()
        .map(|(i, (readings, label))| {
            let label = label.unwrap_or_default();
            let idx = tasks
                .iter()
                .position(|t| *t == label)
                .ok_or_else(|| Error::Csv(format!("row {i}: unknown label {label:?}")))?;
            Ok(Sample {
                readings,
                label: TaskId(idx),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        channels: header.channels,
        tasks,
        feature_width: header.feature_width,
        samples,
    })
}

/// Parses rows of readings; the label column is optional and ignored.
pub fn parse_readings<R: Read>(reader: R) -> Result<Vec<ChannelReadings>> {
    let (header, rows) = parse_rows(reader)?;
    Ok(rows
        .into_iter()
        .map(|(readings, _)| {
            ChannelReadings(header.channels.iter().copied().zip(readings).collect())
        })
        .collect())
}

pub fn write_dataset<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = Vec::with_capacity(ds.n_channels() * ds.feature_width + 1);
    for c in &ds.channels {
        for f in 0..ds.feature_width {
            header.push(format!("ch_{c}:{f}"));
        }
    }
    header.push("label".into());
    wtr.write_record(&header)
        .map_err(|e| Error::Csv(e.to_string()))?;
    let mut record = Vec::with_capacity(header.len());
    for sample in &ds.samples {
        record.clear();
        for features in &sample.readings {
            record.extend(features.iter().map(|v| v.to_string()));
        }
        record.push(ds.tasks[sample.label.0].clone());
        wtr.write_record(&record)
            .map_err(|e| Error::Csv(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path, known_tasks: Option<&[String]>) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(std::io::BufReader::new(file), known_tasks)
}

pub fn read_readings_csv(path: &Path) -> Result<Vec<ChannelReadings>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_readings(std::io::BufReader::new(file))
}

pub fn write_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(ds, &mut buf)?;
    write_atomic(path, &buf)
}

/// Pretty JSON with object keys sorted.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value maps are BTreeMaps, so a round trip sorts keys.
    let value = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_atomic(path, to_sorted_json(value)?.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes through a temp file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "ch_4:0,ch_4:1,ch_9:0,ch_9:1,label\n\
                       0.5,1,2,-3.25,T2\n\
                       1e-3,0,0,0,T10\n\
                       7,8,9,10,T1\n";

    #[test]
    fn parses_header_and_orders_tasks_naturally() {
        let ds = parse_dataset(CSV.as_bytes(), None).unwrap();
        assert_eq!(ds.channels, vec![ChannelId(4), ChannelId(9)]);
        assert_eq!(ds.feature_width, 2);
        assert_eq!(ds.tasks, vec!["T1", "T2", "T10"]);
        assert_eq!(
            ds.samples[0].readings,
            vec![vec![0.5, 1.0], vec![2.0, -3.25]]
        );
        assert_eq!(ds.samples[0].label, TaskId(1));
        assert_eq!(ds.samples[1].label, TaskId(2));
    }

    #[test]
    fn write_then_parse_is_identity() {
        let ds = parse_dataset(CSV.as_bytes(), None).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        assert_eq!(parse_dataset(buf.as_slice(), None).unwrap(), ds);
    }

    #[test]
    fn columns_may_be_interleaved() {
        let csv = "label,ch_2:1,ch_1:0,ch_2:0,ch_1:1\nA,1,2,3,4\nB,5,6,7,8\n";
        let ds = parse_dataset(csv.as_bytes(), None).unwrap();
        assert_eq!(ds.channels, vec![ChannelId(2), ChannelId(1)]);
        assert_eq!(ds.samples[0].readings, vec![vec![3.0, 1.0], vec![2.0, 4.0]]);
    }

    #[test]
    fn rejects_bad_headers_and_values() {
        assert!(parse_dataset("ch_1:0,ch_1:2,label\n1,2,A\n".as_bytes(), None).is_err());
        assert!(parse_dataset("ch_1:0,ch_1:0,label\n1,2,A\n".as_bytes(), None).is_err());
        assert!(parse_dataset("ch_1:0,foo,label\n1,2,A\n".as_bytes(), None).is_err());
        assert!(parse_dataset("ch_1:0\n1\n".as_bytes(), None).is_err());
        assert!(parse_dataset("ch_1:0,label\nx,A\n".as_bytes(), None).is_err());
        let known = vec!["A".to_string()];
        assert!(parse_dataset("ch_1:0,label\n1,B\n".as_bytes(), Some(&known)).is_err());
    }

    #[test]
    fn nan_parses_so_validation_can_report_it() {
        let ds = parse_dataset("ch_1:0,label\nNaN,A\n1,B\n".as_bytes(), None).unwrap();
        assert!(!ds.validate().is_valid());
    }

    #[test]
    fn readings_without_label() {
        let rows = parse_readings("ch_3:0,ch_5:0\n1,2\n".as_bytes()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].0[&ChannelId(5)], vec![2.0]);
    }

    #[test]
    fn sorted_json_keys() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let s = to_sorted_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }
}
