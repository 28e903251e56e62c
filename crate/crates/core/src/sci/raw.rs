use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::{collapse_sorted, Edge, EdgeList, IngestError, Row};

/// Weight assigned to the most connected pair.
pub const SCI_SCALE: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct RawConnectivityRecord {
    pub loc_a: String,
    pub loc_b: String,
    pub friend_count: u64,
}

impl RawConnectivityRecord {
    pub fn new(loc_a: impl Into<String>, loc_b: impl Into<String>, friend_count: u64) -> Self {
        RawConnectivityRecord {
            loc_a: loc_a.into(),
            loc_b: loc_b.into(),
            friend_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct UserCount {
    pub zone_id: String,
    pub users: u64,
}

impl UserCount {
    pub fn new(zone_id: impl Into<String>, users: u64) -> Self {
        UserCount {
            zone_id: zone_id.into(),
            users,
        }
    }
}

/// Reads a tab-separated `loc_a	loc_b	friend_count` file.
pub fn read_raw_connectivity(
    path: impl AsRef<Path>,
) -> Result<Vec<RawConnectivityRecord>, IngestError> {
    read_table(path.as_ref(), b'\t', &["loc_a", "loc_b", "friend_count"])
}

/// Reads a comma-separated `zone_id,users` file.
pub fn read_user_counts(path: impl AsRef<Path>) -> Result<Vec<UserCount>, IngestError> {
    read_table(path.as_ref(), b',', &["zone_id", "users"])
}

fn read_table<T: for<'de> Deserialize<'de>>(
    path: &Path,
    delimiter: u8,
    header: &[&str],
) -> Result<Vec<T>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let found = reader.headers().map_err(|e| csv_error(path, e))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(IngestError::Header {
            path: path.to_path_buf(),
            expected: header.join(&(delimiter as char).to_string()),
            found: found
                .iter()
                .collect::<Vec<_>>()
                .join(&(delimiter as char).to_string()),
        });
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IngestError::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => IngestError::Malformed {
            path: path.to_path_buf(),
            line,
            message: csv_kind_message(kind),
        },
    }
}

fn csv_kind_message(kind: csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        csv::ErrorKind::Utf8 { err, .. } => err.to_string(),
        other => format!("{other:?}"),
    }
}

/// Scales raw friendship counts: each pair's count is normalized by the
/// product of its zones' user counts, divided by the largest such ratio,
/// multiplied by [`SCI_SCALE`], rounded half away from zero and floored at 1.
///
/// All arithmetic is exact integer arithmetic, so the output is invariant
/// under multiplying every user count by a common factor.
pub fn compute_sci_from_raw(
    raw: &[RawConnectivityRecord],
    users: &[UserCount],
) -> Result<EdgeList, IngestError> {
    let mut counts: HashMap<&str, u64> = HashMap::with_capacity(users.len());
    for u in users {
        if u.users == 0 {
            return Err(IngestError::ZeroUsers {
                zone_id: u.zone_id.clone(),
            });
        }
        if counts.insert(u.zone_id.as_str(), u.users).is_some() {
            return Err(IngestError::DuplicateUserCount {
                zone_id: u.zone_id.clone(),
            });
        }
    }

    let mut ids: Vec<String> = Vec::new();
    for r in raw {
        for id in [&r.loc_a, &r.loc_b] {
            if !counts.contains_key(id.as_str()) {
                return Err(IngestError::MissingUserCount {
                    zone_id: id.clone(),
                });
            }
            ids.push(id.clone());
        }
    }
    ids.sort();
    ids.dedup();
    let index: HashMap<&str, u32> = ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();

    let mut rows: Vec<Row> = raw
        .iter()
        .map(|r| {
            Row::new(
                index[r.loc_a.as_str()],
                index[r.loc_b.as_str()],
                r.friend_count,
            )
        })
        .collect();
    rows.sort_unstable();
    let mut pairs = Vec::with_capacity(rows.len());
    let mut issues = Vec::new();
    collapse_sorted(rows.into_iter(), &mut pairs, &mut issues, true);
    if let Some(issue) = issues.first() {
        return Err(IngestError::RawSymmetry(issue.describe(&ids)));
    }

    let user = |i: u32| counts[ids[i as usize].as_str()] as u128;
    let overflow = |e: &Edge| IngestError::Overflow {
        loc_a: ids[e.a as usize].clone(),
        loc_b: ids[e.b as usize].clone(),
    };

    // Each ratio is the fraction friend_count / (users_a · users_b).
    let mut fractions = Vec::with_capacity(pairs.len());
    for e in &pairs {
        let den = user(e.a)
            .checked_mul(user(e.b))
            .ok_or_else(|| overflow(e))?;
        fractions.push((e.weight as u128, den));
    }
    let mut best: Option<(u128, u128)> = None;
    for (e, &(v, d)) in pairs.iter().zip(&fractions) {
        best = match best {
            None => Some((v, d)),
            Some((bv, bd)) => {
                let lhs = v.checked_mul(bd).ok_or_else(|| overflow(e))?;
                let rhs = bv.checked_mul(d).ok_or_else(|| overflow(e))?;
                Some(if lhs > rhs { (v, d) } else { (bv, bd) })
            }
        };
    }
    let (max_v, max_d) = match best {
        Some((v, d)) if v > 0 => (v, d),
        _ => return Err(IngestError::AllZeroFriendCounts),
    };

    let mut edges = Vec::with_capacity(pairs.len());
    for (e, &(v, d)) in pairs.iter().zip(&fractions) {
        // ratio / max_ratio = (v · max_d) / (max_v · d) ≤ 1
        let num = v.checked_mul(max_d).ok_or_else(|| overflow(e))?;
        let den = max_v.checked_mul(d).ok_or_else(|| overflow(e))?;
        let scaled = scaled_round(num, den, SCI_SCALE).ok_or_else(|| overflow(e))?;
        edges.push(Edge {
            a: e.a,
            b: e.b,
            weight: scaled.max(1),
        });
    }
    Ok(EdgeList::from_parts(ids, edges))
}

/// round_half_away(num · scale / den) for 0 ≤ num ≤ den, by long division in
/// base 10 so that `num · scale` never has to be formed.
fn scaled_round(num: u128, den: u128, scale: u64) -> Option<u64> {
    debug_assert!(num <= den && den > 0);
    let digits = scale.checked_ilog10()?;
    debug_assert_eq!(10u64.pow(digits), scale);
    let mut q: u128 = num / den;
    let mut r = num % den;
    for _ in 0..digits {
        let t = r.checked_mul(10)?;
        q = q * 10 + t / den;
        r = t % den;
    }
    if r.checked_mul(2)? >= den {
        q += 1;
    }
    u64::try_from(q).ok()
}
