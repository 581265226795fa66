use std::io::Cursor;

use semloop::io::{
    load_dataset, parse_ag_news, parse_reuters, read_corpus_jsonl, read_jsonl, write_corpus_jsonl, write_jsonl,
    DatasetFormat, IoError, REUTERS_CLASSES,
};
use semloop_core::corpus::PreprocessConfig;
use semloop_core::synthetic::{news_like_corpus, NewsLikeSpec};

const AG: &str = r#""3","Wall St. Bears Claw Back","Short-sellers are seeing green again."
"4","Space probe launched","NASA sends a probe toward Mars, scientists say."
"2","Late goal wins final","The striker scored in the final minute."
"#;

#[test]
fn ag_news_rows_become_zero_based_records() {
    let records = parse_ag_news(AG.as_bytes(), None).unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[0].label, 2);
    assert_eq!(records[0].text, "Wall St. Bears Claw Back Short-sellers are seeing green again.");
    assert_eq!(records[1].label, 3);
    assert_eq!(parse_ag_news(AG.as_bytes(), Some(2)).unwrap().len(), 2);
}

#[test]
fn ag_news_errors_carry_the_line() {
    let bad = "\"1\",\"a\",\"b\"\n\"7\",\"c\",\"d\"\n";
    match parse_ag_news(bad.as_bytes(), None) {
        Err(IoError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_ag_news("\"1\",\"only two\"\n".as_bytes(), None), Err(IoError::Parse { line: 1, .. })));
}

#[test]
fn reuters_keeps_the_most_frequent_labels() {
    let mut text = String::new();
    for c in 0..12 {
        for i in 0..(20 - c) {
            text.push_str(&format!("topic{c:02}\tdocument {i} about topic {c}\n"));
        }
    }
    let (records, classes) = parse_reuters(Cursor::new(text), None).unwrap();
    assert_eq!(classes.len(), REUTERS_CLASSES);
    assert_eq!(classes[0], "topic00");
    assert!(!classes.contains(&"topic10".to_string()));
    assert_eq!(records.len(), (0..10).map(|c| 20 - c).sum::<usize>());
    assert!(records.iter().all(|r| r.label < 10));
    assert!(parse_reuters(Cursor::new("no tab here\n"), None).is_err());
}

#[test]
fn corpus_jsonl_round_trips() {
    let corpus = news_like_corpus(&NewsLikeSpec { docs: 60, words_per_topic: 20, ..Default::default() });
    let mut buf = Vec::new();
    write_corpus_jsonl(&corpus, &mut buf).unwrap();
    let back = read_corpus_jsonl(Cursor::new(&buf), None).unwrap();
    assert_eq!(back.len(), corpus.len());
    assert_eq!(back.num_classes(), corpus.num_classes());
    for i in 0..corpus.len() {
        let terms = |c: &semloop_core::corpus::LabeledCorpus| -> Vec<String> {
            c.documents[i].tokens.iter().map(|&t| c.vocabulary.term(t).to_string()).collect()
        };
        assert_eq!(terms(&back), terms(&corpus));
        assert_eq!(back.classes[back.labels[i]], corpus.classes[corpus.labels[i]]);
    }
    assert_eq!(read_corpus_jsonl(Cursor::new(&buf), Some(10)).unwrap().len(), 10);
    assert!(read_corpus_jsonl(Cursor::new("{\"id\": 3}\n"), None).is_err());
}

#[test]
fn dataset_files_load_through_preprocessing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ag.csv");
    std::fs::write(&path, AG.repeat(2)).unwrap();
    let corpus = load_dataset(&path, DatasetFormat::AgNewsCsv, &PreprocessConfig::default(), None).unwrap();
    assert_eq!(corpus.len(), 6);
    assert_eq!(corpus.classes[corpus.labels[0]], "Business");
    // Stopwords go, stems stay.
    assert!(corpus.vocabulary.get("are").is_none());
    assert!(corpus.vocabulary.get("nasa").is_some());
    assert!(load_dataset(&dir.path().join("missing.csv"), DatasetFormat::AgNewsCsv, &PreprocessConfig::default(), None)
        .is_err());
    assert_eq!("ag_news_csv".parse::<DatasetFormat>().unwrap(), DatasetFormat::AgNewsCsv);
    assert!("parquet".parse::<DatasetFormat>().is_err());
}

#[test]
fn jsonl_helpers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.jsonl");
    let rows = vec![(1u32, 0.1f64), (2, 1.0 / 3.0)];
    write_jsonl(&path, rows.iter()).unwrap();
    let back: Vec<(u32, f64)> = read_jsonl(&path).unwrap();
    assert_eq!(back, rows);
}
