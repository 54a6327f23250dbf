//! Reading and writing the extreme-classification repository text format.
//!
//! ```text
//! num_points num_features num_labels
//! l1,l2,...,lk f1:v1 f2:v2 ...
//! ```
//!
//! The label block may be empty. Feature payloads are never interpreted; each
//! point's source line is kept verbatim so that written splits reproduce
//! their input lines byte-for-byte.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;

use crate::dataset::{Dataset, DatasetBuilder, LabelId, Partition, SplitAssignment};
use crate::error::{Error, Result};

/// First line of a repository-format file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepoHeader {
    pub num_points: usize,
    pub num_features: usize,
    pub num_labels: usize,
}

impl RepoHeader {
    fn parse(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                1,
                format!("header must hold 3 integers, found {:?}", line),
            ));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(1, format!("header field {s:?} is not a non-negative integer")))
        };
        Ok(Self {
            num_points: num(fields[0])?,
            num_features: num(fields[1])?,
            num_labels: num(fields[2])?,
        })
    }

    fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.num_points, self.num_features, self.num_labels)
    }
}

/// Byte offset where the feature payload of `line` begins: the start of the
/// first whitespace-delimited token containing ':', or `line.len()` when the
/// line carries labels only.
fn feature_boundary(line: &str) -> usize {
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && bytes[i] != b' ' && bytes[i] != b'\t' {
            if bytes[i] == b':' {
                return start;
            }
            i += 1;
        }
    }
    line.len()
}

fn parse_label_block(
    block: &str,
    num_labels: usize,
    line_no: usize,
    out: &mut Vec<LabelId>,
) -> Result<()> {
    out.clear();
    for token in block
        .split(|c: char| c == ',' || c.is_ascii_whitespace())
        .filter(|t| !t.is_empty())
    {
        let id: LabelId = token
            .parse()
            .map_err(|_| Error::parse(line_no, format!("label {token:?} is not an integer")))?;
        if id as usize >= num_labels {
            return Err(Error::parse(
                line_no,
                format!("label id {id} is not below num_labels {num_labels}"),
            ));
        }
        out.push(id);
    }
    let before = out.len();
    out.sort_unstable();
    out.dedup();
    if out.len() != before {
        warn!("line {line_no}: dropped {} duplicate label(s)", before - out.len());
    }
    Ok(())
}

fn strip_line_ending(line: &mut String) {
    if line.ends_with('\n') {
        line.pop();
        if line.ends_with('\r') {
            line.pop();
        }
    }
}

/// Parses a repository-format stream.
///
/// Labels are deduplicated and sorted per point. A body with more or fewer
/// lines than the header announces is an error.
pub fn parse_repo_format<R: BufRead>(mut reader: R) -> Result<Dataset> {
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Err(Error::parse(1, "missing header"));
    }
    strip_line_ending(&mut line);
    let header = RepoHeader::parse(&line)?;
    let mut builder = DatasetBuilder::new(header.num_labels, header.num_features, header.num_points);
    let mut labels = Vec::new();
    for point in 0..header.num_points {
        let line_no = point + 2;
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::parse(
                line_no,
                format!("header announces {} points but the body has {point}", header.num_points),
            ));
        }
        strip_line_ending(&mut line);
        let features_at = feature_boundary(&line);
        parse_label_block(&line[..features_at], header.num_labels, line_no, &mut labels)?;
        builder.push_line(&labels, &line, features_at);
    }
    line.clear();
    if reader.read_line(&mut line)? != 0 {
        return Err(Error::parse(
            header.num_points + 2,
            format!("body has more lines than the {} announced", header.num_points),
        ));
    }
    Ok(builder.finish())
}

pub fn parse_repo_str(text: &str) -> Result<Dataset> {
    parse_repo_format(text.as_bytes())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    parse_repo_format(BufReader::with_capacity(1 << 20, file))
}

/// Loads a repository-provided train/test file pair as one dataset plus the
/// provided split (train points first, then test points).
pub fn read_provided_split(
    train: impl AsRef<Path>,
    test: impl AsRef<Path>,
) -> Result<(Dataset, SplitAssignment)> {
    Dataset::concat_split(&read_dataset(train)?, &read_dataset(test)?)
}

fn write_part(
    dataset: &Dataset,
    assignment: &SplitAssignment,
    partition: Partition,
    out: &mut impl Write,
) -> std::io::Result<()> {
    let points = assignment.indices_of(partition);
    RepoHeader {
        num_points: points.len(),
        num_features: dataset.num_features(),
        num_labels: dataset.num_labels(),
    }
    .write_to(out)?;
    for point in points {
        out.write_all(dataset.line(point).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Writes the TRAIN and TEST points of `assignment` as two repository-format
/// files, keeping each point's source line and the relative point order.
pub fn write_split(
    dataset: &Dataset,
    assignment: &SplitAssignment,
    train: &mut impl Write,
    test: &mut impl Write,
) -> Result<()> {
    assignment.check_matches(dataset)?;
    write_part(dataset, assignment, Partition::Train, train)?;
    write_part(dataset, assignment, Partition::Test, test)?;
    Ok(())
}

pub fn write_split_files(
    dataset: &Dataset,
    assignment: &SplitAssignment,
    train: impl AsRef<Path>,
    test: impl AsRef<Path>,
) -> Result<()> {
    let mut train = BufWriter::new(File::create(train)?);
    let mut test = BufWriter::new(File::create(test)?);
    write_split(dataset, assignment, &mut train, &mut test)
}

/// One line per point: `0` for TRAIN, `1` for TEST.
pub fn write_assignment_index(assignment: &SplitAssignment) -> String {
    let mut out = String::with_capacity(assignment.len() * 2);
    for &p in assignment.as_slice() {
        out.push_str(if p.is_test() { "1\n" } else { "0\n" });
    }
    out
}

pub fn parse_assignment_index(text: &str, num_points: usize) -> Result<SplitAssignment> {
    let mut partition_of = Vec::with_capacity(num_points);
    for (i, raw) in text.lines().enumerate() {
        let token = raw.strip_suffix('\r').unwrap_or(raw).trim();
        let p = match token {
            "0" => Partition::Train,
            "1" => Partition::Test,
            other => {
                return Err(Error::parse(
                    i + 1,
                    format!("expected 0 or 1, found {other:?}"),
                ))
            }
        };
        partition_of.push(p);
    }
    if partition_of.len() != num_points {
        return Err(Error::parse(
            partition_of.len() + 1,
            format!(
                "index has {} entries but the dataset has {num_points} points",
                partition_of.len()
            ),
        ));
    }
    Ok(SplitAssignment::new(partition_of, None))
}
