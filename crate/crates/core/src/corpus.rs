//! Labeled social-media datasets.
//!
//! Datasets are UTF-8 TSV with a header line. Labeled files carry three
//! columns (`id`, `tweet`, `label`); unlabeled files omit the label column.
//! A bare newline always ends a record, `\r\n` endings are accepted.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::preprocess::Preprocessor;
use crate::{Error, Label, Result};

pub const LABELED_HEADER: &str = "id\ttweet\tlabel";
pub const UNLABELED_HEADER: &str = "id\ttweet";

const DEFAULT_STOPWORDS: &str = include_str!("../resources/stopwords_en.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Split {
    Train,
    Valid,
    Test,
    #[default]
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledRecord {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
}

/// An ordered, immutable collection of records with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    records: Vec<LabeledRecord>,
    split: Split,
    has_label_column: bool,
}

impl Corpus {
    /// Builds a corpus, enforcing non-empty unique ids and non-empty text.
    pub fn new(records: Vec<LabeledRecord>, split: Split) -> Result<Corpus> {
        let mut seen = BTreeSet::new();
        for (i, r) in records.iter().enumerate() {
            let line = i + 2;
            if r.id.is_empty() {
                return Err(Error::InvalidRecord { line, reason: "empty id" });
            }
            if r.text.is_empty() {
                return Err(Error::InvalidRecord { line, reason: "empty text" });
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId { line, id: r.id.clone() });
            }
        }
        let has_label_column = !records.is_empty() && records.iter().all(|r| r.label.is_some());
        Ok(Corpus { records, split, has_label_column })
    }

    /// Parses dataset TSV content. With `expect_labels` a two-column file is
    /// rejected; without it a three-column file is still accepted and its
    /// labels kept.
    pub fn parse_tsv(content: &str, split: Split, expect_labels: bool) -> Result<Corpus> {
        let mut lines = content.split('\n').enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) if l.trim_end_matches('\r').is_empty() => continue,
                Some((_, l)) => break l.trim_end_matches('\r'),
                None => return Err(Error::MissingHeader),
            }
        };
        let columns = header.split('\t').count();
        let first = header.split('\t').next().unwrap_or("");
        if !(columns == 2 || columns == 3) || !first.trim().eq_ignore_ascii_case("id") {
            return Err(Error::MissingHeader);
        }
        if expect_labels && columns != 3 {
            return Err(Error::MissingLabels);
        }
        let mut records = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in lines {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != columns {
                return Err(Error::MalformedRow { line: line_no, expected: columns, found: fields.len() });
            }
            let id = fields[0];
            let text = fields[1];
            if id.is_empty() {
                return Err(Error::InvalidRecord { line: line_no, reason: "empty id" });
            }
            if text.is_empty() {
                return Err(Error::InvalidRecord { line: line_no, reason: "empty text" });
            }
            let label = if columns == 3 {
                let raw_label = fields[2].trim();
                Some(Label::parse(raw_label).ok_or_else(|| Error::UnknownLabel {
                    line: line_no,
                    label: raw_label.to_string(),
                })?)
            } else {
                None
            };
            if !seen.insert(id.to_string()) {
                return Err(Error::DuplicateId { line: line_no, id: id.to_string() });
            }
            records.push(LabeledRecord { id: id.to_string(), text: text.to_string(), label });
        }
        Ok(Corpus { records, split, has_label_column: columns == 3 })
    }

    /// Serializes back to the dataset TSV layout (lowercase labels, `\n` endings).
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(if self.has_label_column { LABELED_HEADER } else { UNLABELED_HEADER });
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.id);
            out.push('\t');
            out.push_str(&r.text);
            if self.has_label_column {
                out.push('\t');
                out.push_str(r.label.map(Label::as_str).unwrap_or(""));
            }
            out.push('\n');
        }
        out
    }

    pub fn records(&self) -> &[LabeledRecord] {
        &self.records
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// True when every record carries a label (vacuously for an empty
    /// corpus read from a three-column file).
    pub fn is_labeled(&self) -> bool {
        if self.records.is_empty() {
            self.has_label_column
        } else {
            self.records.iter().all(|r| r.label.is_some())
        }
    }

    /// Gold labels in record order.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.records.iter().map(|r| r.label.ok_or(Error::Unlabeled)).collect()
    }
}

/// Label counts; both classes are always present in the map.
pub fn class_stats(corpus: &Corpus) -> Result<BTreeMap<Label, usize>> {
    if !corpus.is_labeled() && !corpus.is_empty() {
        return Err(Error::Unlabeled);
    }
    let mut counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|&l| (l, 0)).collect();
    for r in corpus.records() {
        *counts.entry(r.label.ok_or(Error::Unlabeled)?).or_default() += 1;
    }
    Ok(counts)
}

/// Parses a stopword list: one token per line, blank lines and `#` comments skipped.
pub fn parse_stopwords(content: &str) -> BTreeSet<String> {
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_lowercase())
        .collect()
}

/// The shipped English function-word list.
pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}

/// Top-`k` pipeline tokens among posts with `label`, by descending total
/// frequency with lexicographic tie-breaking.
///
/// A token is excluded when it is a stopword or equals the pipeline output of
/// a stopword (so `this`, stemmed to `thi`, stays excluded).
pub fn frequent_terms(
    corpus: &Corpus,
    label: Label,
    k: usize,
    stopwords: &BTreeSet<String>,
    preprocessor: &Preprocessor,
) -> Result<Vec<(String, usize)>> {
    if !corpus.is_labeled() && !corpus.is_empty() {
        return Err(Error::Unlabeled);
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut excluded = stopwords.clone();
    for w in stopwords {
        excluded.extend(preprocessor.process(w, "").tokens);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in corpus.records().iter().filter(|r| r.label == Some(label)) {
        for tok in preprocessor.process(&r.text, &r.id).tokens {
            if !excluded.contains(&tok) {
                *counts.entry(tok).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    // BTreeMap order is lexicographic already; a stable sort keeps it for ties.
    ranked.sort_by_key(|e| core::cmp::Reverse(e.1));
    ranked.truncate(k);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::PipelineConfig;
    use alloc::vec;

    fn rec(id: &str, text: &str, label: Label) -> LabeledRecord {
        LabeledRecord { id: id.into(), text: text.into(), label: Some(label) }
    }

    #[test]
    fn parses_table_example_row() {
        let c = Corpus::parse_tsv(
            "id\ttweet\tlabel\n1\t1000 COVID-19 testing labs in India: ICMR\treal\n",
            Split::Train,
            true,
        )
        .unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.records()[0].label, Some(Label::Real));
        assert_eq!(c.records()[0].text, "1000 COVID-19 testing labs in India: ICMR");
    }

    #[test]
    fn header_only_is_empty() {
        let c = Corpus::parse_tsv("id\ttweet\tlabel\n", Split::Test, true).unwrap();
        assert!(c.is_empty());
        assert!(c.is_labeled());
        let u = Corpus::parse_tsv("id\ttweet\n", Split::Unlabeled, false).unwrap();
        assert!(u.is_empty());
    }

    #[test]
    fn labels_are_case_insensitive() {
        let c = Corpus::parse_tsv("id\ttweet\tlabel\na\tx\tFAKE\nb\ty\tReal\r\n", Split::Train, true).unwrap();
        assert_eq!(c.labels().unwrap(), vec![Label::Fake, Label::Real]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = Corpus::parse_tsv("id\ttweet\tlabel\na\tx\tfake\nb\ty\n", Split::Train, true).unwrap_err();
        assert_eq!(err, Error::MalformedRow { line: 3, expected: 3, found: 2 });
    }

    #[test]
    fn unknown_label_and_duplicate_id() {
        let err = Corpus::parse_tsv("id\ttweet\tlabel\na\tx\tmaybe\n", Split::Train, true).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { line: 2, .. }));
        let err = Corpus::parse_tsv("id\ttweet\tlabel\na\tx\tfake\na\ty\treal\n", Split::Train, true).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { line: 3, .. }));
    }

    #[test]
    fn expect_labels_rejects_two_columns() {
        assert_eq!(
            Corpus::parse_tsv("id\ttweet\na\tx\n", Split::Test, true).unwrap_err(),
            Error::MissingLabels
        );
        let c = Corpus::parse_tsv("id\ttweet\na\tx\n", Split::Test, false).unwrap();
        assert!(!c.is_labeled());
        assert_eq!(class_stats(&c).unwrap_err(), Error::Unlabeled);
    }

    #[test]
    fn class_stats_counts() {
        let c = Corpus::new(
            vec![rec("1", "a", Label::Fake), rec("2", "b", Label::Real), rec("3", "c", Label::Fake)],
            Split::Train,
        )
        .unwrap();
        let s = class_stats(&c).unwrap();
        assert_eq!(s[&Label::Fake], 2);
        assert_eq!(s[&Label::Real], 1);
        let empty = Corpus::parse_tsv(LABELED_HEADER, Split::Train, true).unwrap();
        let s = class_stats(&empty).unwrap();
        assert_eq!((s[&Label::Fake], s[&Label::Real]), (0, 0));
    }

    #[test]
    fn frequent_terms_toy() {
        let c = Corpus::new(
            vec![rec("1", "virus kill kill", Label::Fake), rec("2", "test test lab", Label::Real)],
            Split::Train,
        )
        .unwrap();
        let pre = Preprocessor::new(PipelineConfig::default());
        let none = BTreeSet::new();
        assert_eq!(frequent_terms(&c, Label::Fake, 1, &none, &pre).unwrap(), vec![("kill".into(), 2)]);
        assert!(frequent_terms(&c, Label::Fake, 0, &none, &pre).unwrap().is_empty());
        let all = frequent_terms(&c, Label::Real, 10, &none, &pre).unwrap();
        assert_eq!(all, vec![("test".into(), 2), ("lab".into(), 1)]);
    }

    #[test]
    fn frequent_terms_skip_stemmed_stopwords() {
        let c = Corpus::new(vec![rec("1", "this is this virus", Label::Fake)], Split::Train).unwrap();
        let pre = Preprocessor::new(PipelineConfig::default());
        let terms = frequent_terms(&c, Label::Fake, 5, &default_stopwords(), &pre).unwrap();
        assert_eq!(terms, vec![("viru".into(), 1)]);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let src = "id\ttweet\tlabel\n1\tCDC Recommends Mothers Stop Breastfeeding\tfake\n2\t1000 labs\treal\n";
        let c = Corpus::parse_tsv(src, Split::Train, true).unwrap();
        assert_eq!(c.to_tsv(), src);
        let crlf = src.replace('\n', "\r\n");
        assert_eq!(Corpus::parse_tsv(&crlf, Split::Train, true).unwrap().to_tsv(), src);
    }

    #[test]
    fn stopword_file_parsing() {
        let s = parse_stopwords("# comment\nThe\n\n a \n");
        assert_eq!(s.into_iter().collect::<Vec<_>>(), vec!["a".to_string(), "the".to_string()]);
        assert!(default_stopwords().contains("the"));
    }
}
