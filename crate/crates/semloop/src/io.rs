//! Dataset loaders and file formats.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use semloop_core::corpus::{Document, LabeledCorpus, PreprocessConfig, RawRecord, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown dataset format `{0}` (expected ag_news_csv, reuters_labeled_text or corpus_jsonl)")]
    UnknownFormat(String),
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Core(#[from] semloop_core::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    AgNewsCsv,
    ReutersLabeledText,
    CorpusJsonl,
}

impl FromStr for DatasetFormat {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ag_news_csv" => Ok(Self::AgNewsCsv),
            "reuters_labeled_text" => Ok(Self::ReutersLabeledText),
            "corpus_jsonl" => Ok(Self::CorpusJsonl),
            other => Err(IoError::UnknownFormat(other.to_string())),
        }
    }
}

pub const AG_NEWS_CLASSES: [&str; 4] = ["World", "Sports", "Business", "Sci/Tech"];

/// Number of classes kept from a Reuters file.
pub const REUTERS_CLASSES: usize = 10;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

/// Rows of `class,title,description` with classes numbered from 1. Title and
/// description are joined with a space.
pub fn parse_ag_news(reader: impl Read, limit: Option<usize>) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        if limit.is_some_and(|n| out.len() >= n) {
            break;
        }
        let line = i + 1;
        let row = row.map_err(|e| IoError::Parse { line, message: e.to_string() })?;
        if row.len() != 3 {
            return Err(IoError::Parse { line, message: format!("expected 3 columns, found {}", row.len()) });
        }
        let class: usize = row[0]
            .trim()
            .parse()
            .ok()
            .filter(|c| (1..=AG_NEWS_CLASSES.len()).contains(c))
            .ok_or_else(|| IoError::Parse { line, message: format!("class index `{}` not in 1..=4", &row[0]) })?;
        out.push(RawRecord { id: format!("ag{line}"), text: format!("{} {}", &row[1], &row[2]), label: class - 1 });
    }
    Ok(out)
}

/// Lines of `label<TAB>text`. Keeps the ten most frequent labels (ties broken
/// by name); classes are ordered by frequency.
pub fn parse_reuters(reader: impl BufRead, limit: Option<usize>) -> Result<(Vec<RawRecord>, Vec<String>)> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IoError::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| IoError::Parse { line: line_no, message: "missing tab between label and text".into() })?;
        rows.push((line_no, label.trim().to_string(), text.to_string()));
    }
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, label, _) in &rows {
        *freq.entry(label).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.truncate(REUTERS_CLASSES);
    let classes: Vec<String> = ranked.iter().map(|(l, _)| l.to_string()).collect();
    let records = rows
        .iter()
        .filter_map(|(line, label, text)| {
            let class = classes.iter().position(|c| c == label)?;
            Some(RawRecord { id: format!("r{line}"), text: text.clone(), label: class })
        })
        .take(limit.unwrap_or(usize::MAX))
        .collect();
    Ok((records, classes))
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonlDocument {
    id: String,
    label: String,
    tokens: Vec<String>,
}

pub fn write_corpus_jsonl(corpus: &LabeledCorpus, mut out: impl Write) -> std::io::Result<()> {
    for (doc, &label) in corpus.documents.iter().zip(&corpus.labels) {
        let row = JsonlDocument {
            id: doc.id.clone(),
            label: corpus.classes[label].clone(),
            tokens: doc.tokens.iter().map(|&t| corpus.vocabulary.term(t).to_string()).collect(),
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads already preprocessed documents. Terms are indexed in order of first
/// appearance and classes in order of first appearance of their label.
pub fn read_corpus_jsonl(reader: impl BufRead, limit: Option<usize>) -> Result<LabeledCorpus> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        if limit.is_some_and(|n| rows.len() >= n) {
            break;
        }
        let line_no = i + 1;
        let line = line.map_err(|e| IoError::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonlDocument =
            serde_json::from_str(&line).map_err(|e| IoError::Parse { line: line_no, message: e.to_string() })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(semloop_core::Error::EmptyCorpus.into());
    }
    let vocabulary = Vocabulary::from_terms(rows.iter().flat_map(|r| r.tokens.iter().map(String::as_str)));
    let mut classes: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(rows.len());
    let mut documents = Vec::with_capacity(rows.len());
    for row in rows {
        let label = match classes.iter().position(|c| *c == row.label) {
            Some(p) => p,
            None => {
                classes.push(row.label.clone());
                classes.len() - 1
            }
        };
        labels.push(label);
        let raw = row.tokens.join(" ");
        documents.push(Document::new(row.id, raw, vocabulary.encode(&row.tokens)));
    }
    let corpus = LabeledCorpus { vocabulary, documents, labels, classes };
    corpus.validate()?;
    Ok(corpus)
}

/// Loads and preprocesses a dataset file. `limit` keeps the first documents
/// in file order.
pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    preprocess: &PreprocessConfig,
    limit: Option<usize>,
) -> Result<LabeledCorpus> {
    let file = open(path)?;
    match format {
        DatasetFormat::AgNewsCsv => {
            let records = parse_ag_news(file, limit)?;
            let classes = AG_NEWS_CLASSES.iter().map(|c| c.to_string()).collect();
            Ok(LabeledCorpus::build(&records, classes, preprocess)?)
        }
        DatasetFormat::ReutersLabeledText => {
            let (records, classes) = parse_reuters(BufReader::new(file), limit)?;
            Ok(LabeledCorpus::build(&records, classes, preprocess)?)
        }
        DatasetFormat::CorpusJsonl => read_corpus_jsonl(BufReader::new(file), limit),
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = open(path)?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

/// One JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    let err = |source| IoError::Io { path: path.to_path_buf(), source };
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
        w.write_all(b"\n").map_err(err)?;
    }
    w.flush().map_err(err)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| IoError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}
