//! Leaked-corpus ingestion in the "withcount" format: one record per line,
//! optional leading whitespace, a decimal count, one run of whitespace, and
//! the password as the rest of the line.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::FrequencyDistribution;

#[derive(Clone, Debug)]
pub struct Dataset {
    pub distribution: FrequencyDistribution,
    pub summary: DatasetSummary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    /// Sum of all counts.
    pub total_count: u64,
    /// Distinct passwords after merging duplicates.
    pub distinct: usize,
    /// Records with a count but an empty password.
    pub skipped_empty: usize,
}

pub fn ingest_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_withcount(BufReader::new(file), path)
}

/// Parses withcount records from `reader`; `path` is only used in errors.
pub fn parse_withcount<R: BufRead>(mut reader: R, path: &Path) -> Result<Dataset> {
    let mut records: Vec<(String, u64)> = Vec::new();
    let mut skipped_empty = 0;
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        if buf.is_empty() {
            continue;
        }
        let line = String::from_utf8_lossy(&buf);
        match parse_record(&line) {
            Ok(Some(rec)) => records.push(rec),
            Ok(None) => skipped_empty += 1,
            Err(message) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message,
                })
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(PathBuf::from(path)));
    }
    let distribution =
        FrequencyDistribution::from_counts(records.iter().map(|(pw, c)| (pw.as_str(), *c)))
            .map_err(|e| match e {
                Error::EmptyDistribution => Error::EmptyDataset(path.to_path_buf()),
                other => other,
            })?;
    let summary = DatasetSummary {
        total_count: distribution.total_count().unwrap_or(0),
        distinct: distribution.space().len(),
        skipped_empty,
    };
    Ok(Dataset {
        distribution,
        summary,
    })
}

fn parse_record(line: &str) -> std::result::Result<Option<(String, u64)>, String> {
    let rest = line.trim_start();
    let digits = rest
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(rest.len());
    if digits == 0 {
        return Err(format!("expected a count, found {:?}", truncate(rest)));
    }
    let count: u64 = rest[..digits]
        .parse()
        .map_err(|e| format!("bad count {:?}: {e}", &rest[..digits]))?;
    let after = &rest[digits..];
    if after.is_empty() {
        return Ok(None);
    }
    let password = after.trim_start();
    if password.len() == after.len() {
        return Err(format!(
            "expected whitespace after the count, found {:?}",
            truncate(after)
        ));
    }
    if password.is_empty() {
        return Ok(None);
    }
    Ok(Some((password.to_string(), count)))
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(20) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        parse_withcount(text.as_bytes(), Path::new("mem"))
    }

    #[test]
    fn basic_records() {
        let d = parse("5 aaa\n5 bbb\n").unwrap();
        assert_eq!(d.distribution.prob_of("aaa").unwrap(), 0.5);
        assert_eq!(d.summary.total_count, 10);
        assert_eq!(d.summary.distinct, 2);
    }

    #[test]
    fn leading_spaces_and_inner_spaces() {
        let d = parse("  290729 123456\n   3 pass word\r\n      1 x\n").unwrap();
        assert_eq!(d.distribution.space().get(crate::PasswordId(0)), "123456");
        assert_eq!(d.summary.total_count, 290733);
        assert!(d.distribution.prob_of("pass word").is_ok());
    }

    #[test]
    fn duplicates_merge() {
        let d = parse("2 a\n3 b\n1 a\n").unwrap();
        assert_eq!(d.distribution.prob_of("a").unwrap(), 0.5);
        assert_eq!(d.summary.distinct, 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse("x y\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse("1 a\n\n12b\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse(""), Err(Error::EmptyDataset(_))));
        assert!(matches!(parse("0 a\n"), Err(Error::EmptyDataset(_))));
        assert!(matches!(
            parse("99999999999999999999999 a\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn empty_passwords_are_counted_not_kept() {
        let d = parse("4 \n2 ok\n7\n").unwrap();
        assert_eq!(d.summary.skipped_empty, 2);
        assert_eq!(d.summary.distinct, 1);
    }
}
