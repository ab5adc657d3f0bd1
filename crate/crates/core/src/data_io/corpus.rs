//! CSV ingestion and export.
//!
//! Observations: header `series_id,t,ch1[,ch2,...]`, one row per minute.
//! Metadata: header `series_id,grade,labels`, where `labels` is a string of
//! `0`/`1` characters, one per topic. Lines starting with `#` are comments.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Corpus, TimeSeries};

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))
}

/// Loads observations grouped by series in order of first appearance; the
/// residuals start out equal to the raw values.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, e.to_string()))?
        .clone();
    if headers.len() < 3 || &headers[0] != "series_id" || &headers[1] != "t" {
        return Err(parse_err(
            path,
            "header must be `series_id,t,ch1[,ch2,...]`",
        ));
    }
    let m = headers.len() - 2;
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<(u64, Vec<f64>)>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e.to_string()))?;
        if rec.len() != m + 2 {
            return Err(Error::Shape(format!(
                "row {} of {} has {} channels, expected {m}",
                line + 1,
                path.display(),
                rec.len().saturating_sub(2)
            )));
        }
        let id = rec[0].to_string();
        let t: u64 = rec[1]
            .parse()
            .map_err(|_| parse_err(path, format!("row {}: bad time `{}`", line + 1, &rec[1])))?;
        let vals = (2..rec.len())
            .map(|i| {
                rec[i].parse::<f64>().map_err(|_| {
                    parse_err(path, format!("row {}: bad value `{}`", line + 1, &rec[i]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            rows.push(Vec::new());
            rows.len() - 1
        });
        rows[slot].push((t, vals));
    }
    let mut series = Vec::with_capacity(rows.len());
    for (id, mut r) in order.iter().zip(rows) {
        r.sort_by_key(|(t, _)| *t);
        for (pos, (t, _)) in r.iter().enumerate() {
            if *t != pos as u64 {
                return Err(Error::Gap {
                    series: id.clone(),
                    position: pos,
                    expected: pos as u64,
                    found: *t,
                });
            }
        }
        series.push(TimeSeries::new(
            m,
            r.into_iter().flat_map(|(_, v)| v).collect(),
        )?);
    }
    let mut corpus = Corpus::from_series(series);
    corpus.ids = order;
    Ok(corpus)
}

/// Attaches grades and label masks from a metadata file. Series missing from
/// the file keep `None`.
pub fn load_metadata(path: &Path, corpus: &mut Corpus) -> Result<()> {
    let mut rdr = reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, e.to_string()))?
        .clone();
    if headers.len() != 3
        || &headers[0] != "series_id"
        || &headers[1] != "grade"
        || &headers[2] != "labels"
    {
        return Err(parse_err(path, "header must be `series_id,grade,labels`"));
    }
    let index: HashMap<&str, usize> = corpus
        .ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut updates = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e.to_string()))?;
        if rec.len() != 3 {
            return Err(parse_err(
                path,
                format!("row {} must have 3 fields", line + 1),
            ));
        }
        let Some(&i) = index.get(&rec[0]) else {
            return Err(parse_err(path, format!("unknown series `{}`", &rec[0])));
        };
        let grade = if rec[1].is_empty() {
            None
        } else {
            Some(rec[1].parse::<i64>().map_err(|_| {
                parse_err(path, format!("row {}: bad grade `{}`", line + 1, &rec[1]))
            })?)
        };
        let labels = if rec[2].is_empty() {
            None
        } else {
            Some(
                rec[2]
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        _ => Err(parse_err(
                            path,
                            format!("row {}: bad label string `{}`", line + 1, &rec[2]),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        updates.push((i, grade, labels));
    }
    for (i, grade, labels) in updates {
        corpus.grades[i] = grade;
        corpus.labels[i] = labels;
    }
    Ok(())
}

fn comment_lines(w: &mut impl Write, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    Ok(())
}

/// Writes raw observations; `Display` for `f64` round-trips exactly.
pub fn save_corpus(path: &Path, corpus: &Corpus, comments: &[String]) -> Result<()> {
    let m = corpus.dim().unwrap_or(1);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    comment_lines(&mut w, comments)?;
    let chans: Vec<String> = (1..=m).map(|c| format!("ch{c}")).collect();
    writeln!(w, "series_id,t,{}", chans.join(","))?;
    for (id, s) in corpus.ids.iter().zip(&corpus.series) {
        for t in 0..s.len() {
            let vals: Vec<String> = s.at(t).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{id},{t},{}", vals.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_metadata(path: &Path, corpus: &Corpus, comments: &[String]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    comment_lines(&mut w, comments)?;
    writeln!(w, "series_id,grade,labels")?;
    for ((id, g), l) in corpus.ids.iter().zip(&corpus.grades).zip(&corpus.labels) {
        let g = g.map(|g| g.to_string()).unwrap_or_default();
        let l: String = l
            .as_ref()
            .map(|l| l.iter().map(|&b| if b { '1' } else { '0' }).collect())
            .unwrap_or_default();
        writeln!(w, "{id},{g},{l}")?;
    }
    w.flush()?;
    Ok(())
}
