//! MovieLens ingestion, masked rating matrices and cross-validation folds.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Catalog size of MovieLens 100K: (users, items).
pub const ML100K_DIMS: (usize, usize) = (943, 1682);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingTriple {
    pub user_id: u32,
    pub item_id: u32,
    pub rating: f64,
    pub timestamp: i64,
}

impl RatingTriple {
    pub fn new(user_id: u32, item_id: u32, rating: f64) -> Self {
        RatingTriple {
            user_id,
            item_id,
            rating,
            timestamp: 0,
        }
    }
}

/// Field separator of a ratings file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    /// `user \t item \t rating \t timestamp` (100K `u.data`, `uN.base`)
    Tab,
    /// `user::item::rating::timestamp` (1M / 10M `ratings.dat`)
    DoubleColon,
}

impl Delimiter {
    pub fn as_str(self) -> &'static str {
        match self {
            Delimiter::Tab => "\t",
            Delimiter::DoubleColon => "::",
        }
    }
}

impl FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tab" | "\t" => Ok(Delimiter::Tab),
            "double-colon" | "::" => Ok(Delimiter::DoubleColon),
            other => Err(Error::invalid(format!("unknown delimiter {other:?}"))),
        }
    }
}

/// Legal rating range of a dataset. `step` is the rating granularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingScale {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl RatingScale {
    pub const STARS: RatingScale = RatingScale {
        lo: 1.0,
        hi: 5.0,
        step: 1.0,
    };
    pub const HALF_STARS: RatingScale = RatingScale {
        lo: 0.5,
        hi: 5.0,
        step: 0.5,
    };

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        if !(self.lo..=self.hi).contains(&v) {
            return false;
        }
        let steps = (v - self.lo) / self.step;
        (steps - steps.round()).abs() < 1e-9
    }
}

const MIN_RATING: f64 = 0.5;
const MAX_RATING: f64 = 5.0;

/// Parses one ratings line. `line_no` is 1-based and only used for errors.
pub fn parse_line(line: &str, delimiter: Delimiter, line_no: usize) -> Result<RatingTriple> {
    let err = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split(delimiter.as_str()).collect();
    if fields.len() != 4 {
        return Err(err(format!(
            "expected 4 fields separated by {:?}, found {}",
            delimiter.as_str(),
            fields.len()
        )));
    }
    let id = |s: &str, what: &str| -> Result<u32> {
        match s.trim().parse::<u32>() {
            Ok(0) => Err(err(format!("{what} id must be positive"))),
            Ok(v) => Ok(v),
            Err(_) => Err(err(format!("bad {what} id {s:?}"))),
        }
    };
    let user_id = id(fields[0], "user")?;
    let item_id = id(fields[1], "item")?;
    let rating: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| err(format!("bad rating {:?}", fields[2])))?;
    if !(MIN_RATING..=MAX_RATING).contains(&rating) {
        return Err(err(format!("rating {rating} outside [0.5, 5]")));
    }
    let timestamp: i64 = fields[3]
        .trim()
        .parse()
        .map_err(|_| err(format!("bad timestamp {:?}", fields[3])))?;
    Ok(RatingTriple {
        user_id,
        item_id,
        rating,
        timestamp,
    })
}

/// Parses ratings from a reader. Blank lines are skipped; anything else that
/// is not a well-formed record is an error carrying its line number.
pub fn parse_ratings<R: BufRead>(reader: R, delimiter: Delimiter) -> Result<Vec<RatingTriple>> {
    let mut out = Vec::new();
    for (idx, line) in reader.split(b'\n').enumerate() {
        let line_no = idx + 1;
        let bytes = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let text = std::str::from_utf8(&bytes).map_err(|_| Error::Parse {
            line: line_no,
            message: "invalid utf-8".into(),
        })?;
        let text = text.strip_suffix('\r').unwrap_or(text);
        if text.trim().is_empty() {
            continue;
        }
        out.push(parse_line(text, delimiter, line_no)?);
    }
    Ok(out)
}

pub fn parse_ratings_bytes(data: &[u8], delimiter: Delimiter) -> Result<Vec<RatingTriple>> {
    parse_ratings(data, delimiter)
}

pub fn parse_movielens(path: impl AsRef<Path>, delimiter: Delimiter) -> Result<Vec<RatingTriple>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(BufReader::new(file), delimiter).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Bijection between external ids and dense row/column positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdIndex {
    ids: Vec<u32>,
    lookup: HashMap<u32, usize>,
}

impl IdIndex {
    /// Ids `1..=n` mapped to positions `0..n`.
    pub fn contiguous(n: usize) -> Self {
        Self::from_sorted((1..=n as u32).collect())
    }

    /// Distinct ids in ascending order.
    pub fn from_ids(ids: impl IntoIterator<Item = u32>) -> Self {
        let mut ids: Vec<u32> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        Self::from_sorted(ids)
    }

    fn from_sorted(ids: Vec<u32>) -> Self {
        let lookup = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        IdIndex { ids, lookup }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: u32) -> Option<usize> {
        self.lookup.get(&id).copied()
    }

    pub fn id(&self, position: usize) -> u32 {
        self.ids[position]
    }
}

/// Observed ratings `y` with the binary sampling mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedRatings {
    y: DenseMatrix,
    mask: DenseMatrix,
    users: IdIndex,
    items: IdIndex,
}

impl MaskedRatings {
    /// Wraps raw matrices, checking the mask/observation invariants.
    pub fn from_parts(y: DenseMatrix, mask: DenseMatrix) -> Result<Self> {
        if y.shape() != mask.shape() {
            return Err(Error::Shape {
                op: "MaskedRatings",
                left: y.shape(),
                right: mask.shape(),
            });
        }
        for (idx, (&v, &m)) in y.as_slice().iter().zip(mask.as_slice()).enumerate() {
            if m != 0.0 && m != 1.0 {
                return Err(Error::invalid(format!("mask entry {idx} is {m}, not 0/1")));
            }
            if m == 0.0 && v != 0.0 {
                return Err(Error::invalid(format!(
                    "unobserved entry {idx} is non-zero"
                )));
            }
        }
        let (r, c) = y.shape();
        Ok(MaskedRatings {
            y,
            mask,
            users: IdIndex::contiguous(r),
            items: IdIndex::contiguous(c),
        })
    }

    /// Dense matrices from triples under fixed id indices; later duplicates win.
    /// Returns the matrices and the number of overwritten duplicates.
    pub fn from_triples(
        triples: &[RatingTriple],
        users: IdIndex,
        items: IdIndex,
    ) -> Result<(Self, usize)> {
        let (m, n) = (users.len(), items.len());
        let mut y = DenseMatrix::zeros(m, n);
        let mut mask = DenseMatrix::zeros(m, n);
        let mut duplicates = 0;
        for t in triples {
            let i = users.position(t.user_id).ok_or(Error::Bounds {
                what: "user",
                id: t.user_id.into(),
                bound: m,
            })?;
            let j = items.position(t.item_id).ok_or(Error::Bounds {
                what: "item",
                id: t.item_id.into(),
                bound: n,
            })?;
            if !t.rating.is_finite() {
                return Err(Error::invalid(format!(
                    "rating for ({}, {}) is not finite",
                    t.user_id, t.item_id
                )));
            }
            if mask.get(i, j) == 1.0 {
                duplicates += 1;
            }
            y.set(i, j, t.rating);
            mask.set(i, j, 1.0);
        }
        if duplicates > 0 {
            log::warn!("{duplicates} duplicate (user, item) ratings; last occurrence kept");
        }
        Ok((
            MaskedRatings {
                y,
                mask,
                users,
                items,
            },
            duplicates,
        ))
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    pub fn mask(&self) -> &DenseMatrix {
        &self.mask
    }

    pub fn users(&self) -> &IdIndex {
        &self.users
    }

    pub fn items(&self) -> &IdIndex {
        &self.items
    }

    pub fn shape(&self) -> (usize, usize) {
        self.y.shape()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.as_slice().iter().filter(|&&m| m == 1.0).count()
    }

    #[inline]
    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask.get(row, col) == 1.0
    }

    /// `(row, col, rating)` for each observed entry, row-major order.
    pub fn observed(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let cols = self.y.cols();
        self.mask
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == 1.0)
            .map(move |(p, _)| (p / cols, p % cols, self.y.as_slice()[p]))
    }

    /// Observed entries as triples with external ids (timestamps are not kept).
    pub fn to_triples(&self) -> Vec<RatingTriple> {
        self.observed()
            .map(|(i, j, r)| RatingTriple::new(self.users.id(i), self.items.id(j), r))
            .collect()
    }

    pub fn global_mean(&self) -> Option<f64> {
        let (sum, n) = self
            .observed()
            .fold((0.0, 0usize), |(s, n), (_, _, r)| (s + r, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// Builds the masked matrix for `triples`. With `dims`, ids `1..=M` / `1..=N`
/// map directly to rows/columns; without, the distinct ids present are used.
pub fn build_matrix(
    triples: &[RatingTriple],
    dims: Option<(usize, usize)>,
) -> Result<(MaskedRatings, usize)> {
    let (users, items) = match dims {
        Some((m, n)) => (IdIndex::contiguous(m), IdIndex::contiguous(n)),
        None => (
            IdIndex::from_ids(triples.iter().map(|t| t.user_id)),
            IdIndex::from_ids(triples.iter().map(|t| t.item_id)),
        ),
    };
    MaskedRatings::from_triples(triples, users, items)
}

#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub train: MaskedRatings,
    pub test: Vec<RatingTriple>,
}

/// Loads `u{fold}.base` / `u{fold}.test` from an ML-100K directory.
pub fn load_predefined_fold(dir: impl AsRef<Path>, fold_id: usize) -> Result<FoldSplit> {
    let dir = dir.as_ref();
    if !(1..=5).contains(&fold_id) {
        return Err(Error::invalid(format!("fold {fold_id} not in 1..=5")));
    }
    let load = |suffix: &str| -> Result<Vec<RatingTriple>> {
        let path = dir.join(format!("u{fold_id}.{suffix}"));
        parse_movielens(&path, Delimiter::Tab).map_err(|e| Error::Fold {
            fold: fold_id,
            source: Box::new(e),
        })
    };
    let base = load("base")?;
    let test = load("test")?;
    let (m, n) = ML100K_DIMS;
    for t in &test {
        if t.user_id as usize > m || t.item_id as usize > n {
            return Err(Error::Fold {
                fold: fold_id,
                source: Box::new(Error::Bounds {
                    what: if t.user_id as usize > m {
                        "user"
                    } else {
                        "item"
                    },
                    id: if t.user_id as usize > m {
                        t.user_id
                    } else {
                        t.item_id
                    }
                    .into(),
                    bound: if t.user_id as usize > m { m } else { n },
                }),
            });
        }
    }
    let (train, _) = build_matrix(&base, Some(ML100K_DIMS)).map_err(|e| Error::Fold {
        fold: fold_id,
        source: Box::new(e),
    })?;
    Ok(FoldSplit {
        fold_id,
        train,
        test,
    })
}

/// The five predefined ML-100K splits, all on the global 943x1682 catalog.
pub fn load_predefined_folds(dir: impl AsRef<Path>) -> Result<Vec<FoldSplit>> {
    (1..=5)
        .map(|f| load_predefined_fold(dir.as_ref(), f))
        .collect()
}

/// Drops earlier duplicates of each (user, item) pair, keeping order of the survivors.
pub fn dedup_last_wins(triples: &[RatingTriple]) -> Vec<RatingTriple> {
    let mut last: HashMap<(u32, u32), usize> = HashMap::with_capacity(triples.len());
    for (i, t) in triples.iter().enumerate() {
        last.insert((t.user_id, t.item_id), i);
    }
    triples
        .iter()
        .enumerate()
        .filter(|(i, t)| last[&(t.user_id, t.item_id)] == *i)
        .map(|(_, t)| *t)
        .collect()
}

/// Seeded k-fold partition. Every fold shares one id index built from all
/// triples, so test ids always have a row and column in the training matrix.
pub fn random_folds(
    triples: &[RatingTriple],
    k: usize,
    seed: u64,
    dims: Option<(usize, usize)>,
) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    let unique = dedup_last_wins(triples);
    if unique.len() < k {
        return Err(Error::invalid(format!(
            "{} distinct ratings cannot fill {k} folds",
            unique.len()
        )));
    }
    let (users, items) = match dims {
        Some((m, n)) => (IdIndex::contiguous(m), IdIndex::contiguous(n)),
        None => (
            IdIndex::from_ids(unique.iter().map(|t| t.user_id)),
            IdIndex::from_ids(unique.iter().map(|t| t.item_id)),
        ),
    };

    let mut order: Vec<usize> = (0..unique.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = unique.len() / k;
    let extra = unique.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let test_idx = &order[start..start + len];
        let mut in_test = vec![false; unique.len()];
        for &i in test_idx {
            in_test[i] = true;
        }
        let test: Vec<RatingTriple> = test_idx.iter().map(|&i| unique[i]).collect();
        let train: Vec<RatingTriple> = unique
            .iter()
            .zip(&in_test)
            .filter(|(_, &t)| !t)
            .map(|(r, _)| *r)
            .collect();
        let (train, _) = MaskedRatings::from_triples(&train, users.clone(), items.clone())?;
        folds.push(FoldSplit {
            fold_id: f + 1,
            train,
            test,
        });
        start += len;
    }
    Ok(folds)
}

/// Keeps triples whose ids fall in `1..=max_user` and `1..=max_item`.
pub fn restrict_ids(triples: &[RatingTriple], max_user: u32, max_item: u32) -> Vec<RatingTriple> {
    triples
        .iter()
        .filter(|t| t.user_id <= max_user && t.item_id <= max_item)
        .copied()
        .collect()
}

/// Summary counts of a ratings list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
}

impl DatasetStats {
    pub fn of(triples: &[RatingTriple]) -> Self {
        DatasetStats {
            users: IdIndex::from_ids(triples.iter().map(|t| t.user_id)).len(),
            items: IdIndex::from_ids(triples.iter().map(|t| t.item_id)).len(),
            ratings: triples.len(),
        }
    }

    pub fn density(&self) -> f64 {
        if self.users == 0 || self.items == 0 {
            0.0
        } else {
            self.ratings as f64 / (self.users as f64 * self.items as f64)
        }
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "users={} items={} ratings={} density={:.6}",
            self.users,
            self.items,
            self.ratings,
            self.density()
        )
    }
}
