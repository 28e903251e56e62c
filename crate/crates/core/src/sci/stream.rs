use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::Path;

use super::{
    collapse_sorted, merge_sorted_runs, EdgeList, IngestError, IngestStats, PairIssue, Row,
};
use crate::parallel::{map_slice, Parallelism};

pub const SCI_HEADER: &str = "user_loc\tfr_loc\tscaled_sci";

/// The study zone set; ids are interned in sorted order.
#[derive(Debug, Clone, Default)]
pub struct ZoneFilter {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl ZoneFilter {
    pub fn new<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        ids.sort();
        ids.dedup();
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        ZoneFilter { ids, index }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    fn lookup(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }
}

/// Reads a scaled SCI file in a single sequential pass.
pub fn stream_edges(
    path: impl AsRef<Path>,
    filter: &ZoneFilter,
) -> Result<(EdgeList, IngestStats), IngestError> {
    stream_edges_chunked(path, filter, 1, Parallelism::Sequential)
}

/// Reads a scaled SCI file split into `chunks` line-aligned byte ranges.
/// The result does not depend on `chunks` or `mode`.
pub fn stream_edges_chunked(
    path: impl AsRef<Path>,
    filter: &ZoneFilter,
    chunks: usize,
    mode: Parallelism,
) -> Result<(EdgeList, IngestStats), IngestError> {
    let path = path.as_ref();
    let io_err = |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = File::open(path).map_err(io_err)?;
    let size = file.metadata().map_err(io_err)?.len();
    let data_start = read_header(&mut file, path)?;
    let bounds = chunk_bounds(&mut file, data_start, size, chunks.max(1)).map_err(io_err)?;
    let ranges: Vec<(u64, u64)> = bounds.windows(2).map(|w| (w[0], w[1])).collect();

    let results = map_slice(&ranges, mode, |&(start, end)| {
        scan_range(path, start, end, filter)
    });

    let mut stats = IngestStats::default();
    let mut runs = Vec::with_capacity(results.len());
    let mut lines_before = 1u64;
    for result in results {
        match result {
            Ok(chunk) => {
                stats.merge(&chunk.stats);
                lines_before += chunk.lines;
                runs.push(chunk.rows);
            }
            Err(e) => return Err(e.at(path, lines_before)),
        }
    }

    let total: usize = runs.iter().map(Vec::len).sum();
    let mut edges = Vec::with_capacity(total);
    let mut issues = Vec::new();
    collapse_sorted(merge_sorted_runs(runs), &mut edges, &mut issues, true);
    if let Some(issue) = issues.first() {
        let lines = locate_pair(path, filter, issue).map_err(io_err)?;
        return Err(IngestError::Symmetry {
            path: path.to_path_buf(),
            violation: issue.describe(&filter.ids),
            lines,
        });
    }
    edges.shrink_to_fit();
    Ok((EdgeList::from_parts(filter.ids.clone(), edges), stats))
}

/// Validates the header line and returns the byte offset of the first data line.
fn read_header(file: &mut File, path: &Path) -> Result<u64, IngestError> {
    let mut reader = BufReader::new(&mut *file);
    let mut buf = Vec::new();
    let n = reader
        .read_until(b'\n', &mut buf)
        .map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    let line = trim_eol(&buf);
    let line = line.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(line);
    if line != SCI_HEADER.as_bytes() {
        return Err(IngestError::Header {
            path: path.to_path_buf(),
            expected: SCI_HEADER.to_string(),
            found: String::from_utf8_lossy(line).into_owned(),
        });
    }
    Ok(n as u64)
}

/// Splits [start, size) into `chunks` ranges whose interior boundaries sit
/// just after a newline.
fn chunk_bounds(
    file: &mut File,
    start: u64,
    size: u64,
    chunks: usize,
) -> std::io::Result<Vec<u64>> {
    let mut bounds = vec![start];
    let span = size.saturating_sub(start);
    for k in 1..chunks {
        let guess = start + span * k as u64 / chunks as u64;
        let prev = *bounds.last().unwrap();
        let aligned = if guess <= prev {
            prev
        } else {
            file.seek(SeekFrom::Start(guess - 1))?;
            let mut reader = BufReader::new(&mut *file);
            let mut skip = Vec::new();
            let n = reader.read_until(b'\n', &mut skip)?;
            (guess - 1 + n as u64).min(size)
        };
        bounds.push(aligned);
    }
    bounds.push(size.max(start));
    Ok(bounds)
}

struct Chunk {
    rows: Vec<Row>,
    stats: IngestStats,
    lines: u64,
}

/// A row-level failure with a line number relative to its chunk.
enum ChunkError {
    Io(std::io::Error),
    Malformed { line: u64, message: String },
    NonPositive { line: u64, value: String },
}

impl ChunkError {
    fn at(self, path: &Path, lines_before: u64) -> IngestError {
        let path = path.to_path_buf();
        match self {
            ChunkError::Io(source) => IngestError::Io { path, source },
            ChunkError::Malformed { line, message } => IngestError::Malformed {
                path,
                line: lines_before + line,
                message,
            },
            ChunkError::NonPositive { line, value } => IngestError::NonPositiveWeight {
                path,
                line: lines_before + line,
                value,
            },
        }
    }
}

fn scan_range(path: &Path, start: u64, end: u64, filter: &ZoneFilter) -> Result<Chunk, ChunkError> {
    let mut file = File::open(path).map_err(ChunkError::Io)?;
    file.seek(SeekFrom::Start(start)).map_err(ChunkError::Io)?;
    let mut reader = BufReader::with_capacity(1 << 16, file.take(end - start));
    let mut chunk = Chunk {
        rows: Vec::new(),
        stats: IngestStats::default(),
        lines: 0,
    };
    let mut buf = Vec::with_capacity(64);
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf).map_err(ChunkError::Io)? == 0 {
            break;
        }
        chunk.lines += 1;
        let line = trim_eol(&buf);
        if line.is_empty() {
            continue;
        }
        let (a, b, weight) = parse_row(line).map_err(|e| e.with_line(chunk.lines))?;
        chunk.stats.rows_read += 1;
        match (filter.lookup(a), filter.lookup(b)) {
            (Some(ia), Some(ib)) => {
                chunk.stats.rows_kept += 1;
                if ia == ib {
                    chunk.stats.self_pairs += 1;
                }
                chunk.rows.push(Row::new(ia, ib, weight));
            }
            _ => chunk.stats.rows_dropped_unknown_zone += 1,
        }
    }
    chunk.rows.sort_unstable();
    Ok(chunk)
}

enum RowError {
    Malformed(String),
    NonPositive(String),
}

impl RowError {
    fn with_line(self, line: u64) -> ChunkError {
        match self {
            RowError::Malformed(message) => ChunkError::Malformed { line, message },
            RowError::NonPositive(value) => ChunkError::NonPositive { line, value },
        }
    }
}

fn parse_row(line: &[u8]) -> Result<(&str, &str, u64), RowError> {
    let line = std::str::from_utf8(line)
        .map_err(|_| RowError::Malformed("row is not valid UTF-8".into()))?;
    let mut fields = line.split('\t');
    let (Some(a), Some(b), Some(w), None) =
        (fields.next(), fields.next(), fields.next(), fields.next())
    else {
        let n = line.split('\t').count();
        return Err(RowError::Malformed(format!(
            "expected 3 tab-separated fields, found {n}"
        )));
    };
    if a.is_empty() || b.is_empty() {
        return Err(RowError::Malformed("empty zone id".into()));
    }
    let weight = parse_weight(w)?;
    Ok((a, b, weight))
}

fn parse_weight(w: &str) -> Result<u64, RowError> {
    match w.trim().parse::<i128>() {
        Ok(v) if v <= 0 => Err(RowError::NonPositive(w.to_string())),
        Ok(v) => u64::try_from(v)
            .map_err(|_| RowError::Malformed(format!("weight {w:?} exceeds the 64-bit range"))),
        Err(_) => match w.trim().parse::<f64>() {
            Ok(f) if f <= 0.0 => Err(RowError::NonPositive(w.to_string())),
            _ => Err(RowError::Malformed(format!(
                "weight {w:?} is not an integer"
            ))),
        },
    }
}

fn trim_eol(buf: &[u8]) -> &[u8] {
    let buf = buf.strip_suffix(b"\n").unwrap_or(buf);
    buf.strip_suffix(b"\r").unwrap_or(buf)
}

/// Line numbers of every listing of the offending pair.
fn locate_pair(path: &Path, filter: &ZoneFilter, issue: &PairIssue) -> std::io::Result<Vec<u64>> {
    let (lo, hi) = issue.pair();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = Vec::new();
    for (i, line) in reader.split(b'\n').enumerate().skip(1) {
        let line = line?;
        if let Ok((a, b, _)) = parse_row(trim_eol(&line)) {
            if let (Some(ia), Some(ib)) = (filter.lookup(a), filter.lookup(b)) {
                if (ia.min(ib), ia.max(ib)) == (lo, hi) {
                    lines.push(i as u64 + 1);
                }
            }
        }
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sci::{EdgeRecord, SymmetryViolation};
    use std::io::Write;

    fn write(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "{SCI_HEADER}\n{body}").unwrap();
        f
    }

    fn filter(ids: &[&str]) -> ZoneFilter {
        ZoneFilter::new(ids.iter().copied())
    }

    #[test]
    fn filter_drops_unknown_zone() {
        let f = write("A\tB\t5\nB\tC\t3\nA\tZ\t9\n");
        let (list, stats) = stream_edges(f.path(), &filter(&["A", "B", "C"])).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(stats.rows_read, 3);
        assert_eq!(stats.rows_kept, 2);
        assert_eq!(stats.rows_dropped_unknown_zone, 1);
    }

    #[test]
    fn non_numeric_weight_reports_line() {
        let f = write("A\tB\t5\nA\tC\tx\n");
        let err = stream_edges(f.path(), &filter(&["A", "B", "C"])).unwrap_err();
        match err {
            IngestError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn zero_and_negative_weights_rejected() {
        for w in ["0", "-4"] {
            let f = write(&format!("A\tB\t{w}\n"));
            let err = stream_edges(f.path(), &filter(&["A", "B"])).unwrap_err();
            assert!(
                matches!(err, IngestError::NonPositiveWeight { line: 2, .. }),
                "{err}"
            );
        }
    }

    #[test]
    fn asymmetric_pair_is_error_with_lines() {
        let f = write("A\tB\t5\nC\tA\t1\nB\tA\t7\n");
        let err = stream_edges(f.path(), &filter(&["A", "B", "C"])).unwrap_err();
        match err {
            IngestError::Symmetry {
                violation:
                    SymmetryViolation::WeightMismatch {
                        forward, backward, ..
                    },
                lines,
                ..
            } => {
                assert_eq!((forward, backward), (5, 7));
                assert_eq!(lines, vec![2, 4]);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn duplicate_pair_is_error() {
        let f = write("A\tB\t5\nA\tB\t5\n");
        let err = stream_edges(f.path(), &filter(&["A", "B"])).unwrap_err();
        assert!(matches!(
            err,
            IngestError::Symmetry {
                violation: SymmetryViolation::DuplicatePair { .. },
                ..
            }
        ));
    }

    #[test]
    fn self_pairs_flagged() {
        let f = write("A\tA\t4\nA\tB\t1\n");
        let (list, stats) = stream_edges(f.path(), &filter(&["A", "B"])).unwrap();
        assert_eq!(stats.self_pairs, 1);
        assert_eq!(list.weight("A", "A"), Some(4));
    }

    #[test]
    fn bad_header_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a\tb\tc\nA\tB\t1").unwrap();
        assert!(matches!(
            stream_edges(f.path(), &filter(&["A", "B"])),
            Err(IngestError::Header { .. })
        ));
    }

    #[test]
    fn crlf_and_blank_lines_tolerated() {
        let f = write("A\tB\t5\r\n\r\nB\tC\t2\r\n");
        let (list, stats) = stream_edges(f.path(), &filter(&["A", "B", "C"])).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(stats.rows_read, 2);
    }

    #[test]
    fn chunking_does_not_change_result() {
        let mut body = String::new();
        for i in 0..40u32 {
            for j in (i + 1)..40 {
                if (i * 7 + j * 3) % 5 == 0 {
                    body.push_str(&format!("z{i}\tz{j}\t{}\n", 1 + i * j));
                    if j % 2 == 0 {
                        body.push_str(&format!("z{j}\tz{i}\t{}\n", 1 + i * j));
                    }
                }
            }
        }
        let f = write(&body);
        let ids: Vec<String> = (0..35).map(|i| format!("z{i}")).collect();
        let flt = ZoneFilter::new(ids);
        let single = stream_edges(f.path(), &flt).unwrap();
        for chunks in [2, 3, 7, 64, 1000] {
            for mode in [Parallelism::Sequential, Parallelism::Parallel] {
                let got = stream_edges_chunked(f.path(), &flt, chunks, mode).unwrap();
                assert_eq!(got.0, single.0);
                assert_eq!(got.1, single.1);
            }
        }
    }

    #[test]
    fn chunked_error_line_is_global() {
        let mut body = String::new();
        for i in 0..200 {
            body.push_str(&format!("a{i}\tb{i}\t1\n"));
        }
        body.push_str("a1\tb1\tbad\n");
        let f = write(&body);
        let err =
            stream_edges_chunked(f.path(), &filter(&["a1"]), 8, Parallelism::Parallel).unwrap_err();
        assert!(
            matches!(err, IngestError::Malformed { line: 202, .. }),
            "{err}"
        );
    }

    #[test]
    fn written_tsv_round_trips() {
        let list =
            EdgeList::from_records(&[EdgeRecord::new("A", "B", 3), EdgeRecord::new("B", "C", 8)])
                .unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        list.write_tsv(&mut f).unwrap();
        let (back, _) = stream_edges(f.path(), &filter(&["A", "B", "C"])).unwrap();
        assert_eq!(back, list);
    }
}
