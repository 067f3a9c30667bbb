//! Dataset files, leave-one-out folds and planted synthetic instances.
//!
//! Triplet files hold one `user item [value]` record per line, separated by
//! whitespace or commas. Extra columns (timestamps) are ignored, a missing value
//! means implicit feedback (1.0). External ids are mapped to dense indices in
//! sorted order (numeric when every id is an integer).

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, UserItemMatrix};
use crate::solver::CoefficientMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HeaderMode {
    /// The first line is a header when its value column is not a number.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FormatOptions {
    pub header: HeaderMode,
    /// Replace every value with 1.0.
    pub binarize: bool,
}

/// A loaded triplet file: the matrix plus the external ids behind each index.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub matrix: UserItemMatrix,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .collect()
}

fn sorted_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let unique: BTreeSet<&str> = ids.collect();
    let mut out: Vec<String> = unique.into_iter().map(str::to_owned).collect();
    if out.iter().all(|s| s.parse::<i64>().is_ok()) {
        out.sort_by_key(|s| s.parse::<i64>().unwrap());
    }
    out
}

pub fn load_triplets(path: impl AsRef<Path>, options: FormatOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_triplets(BufReader::new(file), options).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_triplets(reader: impl BufRead, options: FormatOptions) -> Result<Dataset> {
    let mut records: Vec<(usize, String, String, f64)> = Vec::new();
    let mut first_content = true;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = split_fields(trimmed);
        if first_content {
            first_content = false;
            let is_header = match options.header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => fields.get(2).is_some_and(|v| v.parse::<f64>().is_err()),
            };
            if is_header {
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("expected `user item [value]`, got {trimmed:?}"),
            });
        }
        let value = match fields.get(2) {
            None => 1.0,
            Some(v) => v.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                reason: format!("value {v:?} is not a number"),
            })?,
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Parse {
                line: line_no,
                reason: format!("value {value} must be positive and finite"),
            });
        }
        let value = if options.binarize { 1.0 } else { value };
        records.push((line_no, fields[0].to_owned(), fields[1].to_owned(), value));
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let user_ids = sorted_ids(records.iter().map(|r| r.1.as_str()));
    let item_ids = sorted_ids(records.iter().map(|r| r.2.as_str()));
    let user_index: HashMap<&str, usize> = user_ids.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect();
    let item_index: HashMap<&str, usize> = item_ids.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect();

    let mut seen: HashMap<(usize, usize), usize> = HashMap::with_capacity(records.len());
    let mut entries = Vec::with_capacity(records.len());
    for (line, user, item, value) in &records {
        let key = (user_index[user.as_str()], item_index[item.as_str()]);
        if seen.insert(key, *line).is_some() {
            return Err(Error::DuplicateEntry {
                line: *line,
                user: user.clone(),
                item: item.clone(),
            });
        }
        entries.push((key.0, key.1, *value));
    }
    let matrix = UserItemMatrix::new(user_ids.len(), item_ids.len(), entries)?;
    Ok(Dataset {
        matrix,
        user_ids,
        item_ids,
    })
}

/// C's `%.17g`: enough digits to round-trip any `f64`.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            s.to_owned()
        }
    };
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, v))
    } else {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

/// Writes `user<TAB>item<TAB>value` lines; ids default to dense indices.
pub fn write_triplets(
    path: impl AsRef<Path>,
    matrix: &UserItemMatrix,
    user_ids: Option<&[String]>,
    item_ids: Option<&[String]>,
) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let name = |ids: Option<&[String]>, k: usize| ids.map_or_else(|| k.to_string(), |ids| ids[k].clone());
    for (u, i, v) in matrix.entries() {
        writeln!(out, "{}\t{}\t{}", name(user_ids, u), name(item_ids, i), format_g17(v))
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// One leave-one-out split.
#[derive(Clone, Debug)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train: UserItemMatrix,
    /// At most one `(user, item, value)` per user.
    pub test: Vec<(usize, usize, f64)>,
    /// Seed of this fold's generator.
    pub seed: u64,
}

impl FoldSplit {
    pub fn test_pairs(&self) -> Vec<(usize, usize)> {
        self.test.iter().map(|&(u, i, _)| (u, i)).collect()
    }
}

/// SplitMix64 finalizer; spreads `(seed, fold)` into unrelated generator seeds.
fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n_folds` independent leave-one-out splits: in each, every user with at
/// least two entries has one entry, drawn uniformly, moved to the test set.
pub fn split_folds(x: &UserItemMatrix, n_folds: usize, seed: u64) -> Vec<FoldSplit> {
    (0..n_folds)
        .map(|fold| {
            let fold_seed = mix_seed(seed, fold as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(fold_seed);
            let mut train = Vec::with_capacity(x.nnz());
            let mut test = Vec::new();
            for u in 0..x.n_users() {
                let (items, values) = x.user_row(u);
                let held = if items.len() >= 2 {
                    Some(rng.gen_range(0..items.len()))
                } else {
                    None
                };
                for (k, (&i, &v)) in items.iter().zip(values).enumerate() {
                    if Some(k) == held {
                        test.push((u, i, v));
                    } else {
                        train.push((u, i, v));
                    }
                }
            }
            FoldSplit {
                fold_index: fold,
                train: UserItemMatrix::new(x.n_users(), x.n_items(), train).expect("subset of a valid matrix"),
                test,
                seed: fold_seed,
            }
        })
        .collect()
}

/// Writes `train.tsv`, `test.tsv` and `meta.txt` (dense indices) into `dir`.
pub fn write_fold(dir: impl AsRef<Path>, fold: &FoldSplit) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_triplets(dir.join("train.tsv"), &fold.train, None, None)?;
    let test_path = dir.join("test.tsv");
    let mut test = String::new();
    for &(u, i, v) in &fold.test {
        test.push_str(&format!("{u}\t{i}\t{}\n", format_g17(v)));
    }
    fs::write(&test_path, test).map_err(|e| Error::io(&test_path, e))?;
    let meta_path = dir.join("meta.txt");
    let meta = format!(
        "fold_index={}\nseed={}\nn_users={}\nn_items={}\ntrain_entries={}\ntest_entries={}\n",
        fold.fold_index,
        fold.seed,
        fold.train.n_users(),
        fold.train.n_items(),
        fold.train.nnz(),
        fold.test.len()
    );
    fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
}

fn parse_key_values(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect()
}

fn read_dense_triplets(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let bad = |reason: String| Error::Parse { line: k + 1, reason };
            let f = split_fields(l);
            if f.len() != 3 {
                return Err(bad(format!("expected 3 fields in {}", path.display())));
            }
            let u = f[0].parse().map_err(|_| bad(format!("bad user index {:?}", f[0])))?;
            let i = f[1].parse().map_err(|_| bad(format!("bad item index {:?}", f[1])))?;
            let v = f[2].parse().map_err(|_| bad(format!("bad value {:?}", f[2])))?;
            Ok((u, i, v))
        })
        .collect()
}

/// Reads a fold written by [`write_fold`].
pub fn read_fold(dir: impl AsRef<Path>) -> Result<FoldSplit> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.txt");
    let meta = parse_key_values(&fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?);
    let field = |key: &str| -> Result<u64> {
        meta.get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: 0,
                reason: format!("{}: missing or invalid `{key}`", meta_path.display()),
            })
    };
    let train = read_dense_triplets(&dir.join("train.tsv"))?;
    let test = read_dense_triplets(&dir.join("test.tsv"))?;
    Ok(FoldSplit {
        fold_index: field("fold_index")? as usize,
        train: UserItemMatrix::new(field("n_users")? as usize, field("n_items")? as usize, train)?,
        test,
        seed: field("seed")?,
    })
}

const COEFF_MAGIC: &[u8; 8] = b"TRNKW001";

/// Binary model file: magic, item count (u64 LE), then row-major f64 LE values.
pub fn write_coefficients(path: impl AsRef<Path>, w: &CoefficientMatrix) -> Result<()> {
    let path = path.as_ref();
    let n = w.size();
    let mut buf = Vec::with_capacity(16 + 8 * n * n);
    buf.extend_from_slice(COEFF_MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for v in w.as_dense().to_row_major() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a binary model. The diagonal and sign are not checked here, so that a
/// corrupted file can still be inspected.
pub fn read_coefficients(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: &str| Error::Parse {
        line: 0,
        reason: format!("{}: {reason}", path.display()),
    };
    if bytes.len() < 16 || &bytes[..8] != COEFF_MAGIC {
        return Err(corrupt("not a coefficient matrix file"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + 8 * n * n {
        return Err(corrupt("truncated coefficient matrix"));
    }
    let values: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::from_row_major(n, n, &values)
}

/// Hex SHA-256 of a file.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Parameters of the planted-model generator.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_blocks: usize,
    pub block_rank: usize,
    /// Probability that an admissible coefficient is dropped.
    pub sparsity: f64,
    /// Nonzeros per user in the latent purchase matrix.
    pub picks_per_user: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    /// The bundled fixture: 200 users, 40 items in 2 blocks of rank 3.
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 40,
            n_blocks: 2,
            block_rank: 3,
            sparsity: 0.2,
            picks_per_user: 3,
            seed: 7,
        }
    }
}

/// Planted instance `X = X0 * W_true`.
///
/// Items are split into contiguous blocks; within a block each item gets a
/// type `t(i) = i mod block_rank` and `W_true[i][j] = a_i * b_j[t(i)]` where
/// `b_j` vanishes on `t(j)`. So each block has rank `block_rank`, coefficients
/// between items of the same type (the diagonal included) are zero, and
/// everything is nonnegative. `X0` gives each user a few uniform weights on
/// items of a single block. Entries of `X` below `1e-9` are dropped.
pub fn synth_planted(config: &PlantedConfig) -> Result<(UserItemMatrix, CoefficientMatrix)> {
    let PlantedConfig {
        n_users,
        n_items,
        n_blocks,
        block_rank,
        sparsity,
        picks_per_user,
        seed,
    } = *config;
    if n_users == 0 || n_items == 0 || n_blocks == 0 || n_blocks > n_items {
        return Err(Error::InvalidConfig("planted sizes must be positive with n_blocks <= n_items".into()));
    }
    let blocks: Vec<std::ops::Range<usize>> = (0..n_blocks)
        .map(|b| (b * n_items / n_blocks)..((b + 1) * n_items / n_blocks))
        .collect();
    if block_rank == 0 || blocks.iter().any(|r| block_rank > r.len()) {
        return Err(Error::InvalidConfig("block_rank must be in 1..=block size".into()));
    }
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::InvalidConfig("sparsity must be in [0, 1)".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DenseMatrix::zeros(n_items, n_items);
    for block in &blocks {
        let ty = |i: usize| (i - block.start) % block_rank;
        let scale: Vec<f64> = block.clone().map(|_| rng.gen_range(0.5..1.5)).collect();
        for j in block.clone() {
            let mut loadings: Vec<f64> = (0..block_rank)
                .map(|t| {
                    if t == ty(j) || rng.gen::<f64>() < sparsity {
                        0.0
                    } else {
                        rng.gen_range(0.5..1.5)
                    }
                })
                .collect();
            if block_rank > 1 && loadings.iter().all(|&v| v == 0.0) {
                loadings[(ty(j) + 1) % block_rank] = rng.gen_range(0.5..1.5);
            }
            for i in block.clone() {
                let v = scale[i - block.start] * loadings[ty(i)];
                if v != 0.0 {
                    w.set(i, j, v);
                }
            }
        }
    }

    let mut entries = Vec::new();
    for u in 0..n_users {
        let block = &blocks[rng.gen_range(0..n_blocks)];
        let picks = picks_per_user.min(block.len()).max(1);
        let chosen = rand::seq::index::sample(&mut rng, block.len(), picks);
        let latent: Vec<(usize, f64)> = chosen
            .iter()
            .map(|k| (block.start + k, rng.gen_range(0.0..1.0)))
            .collect();
        for j in 0..n_items {
            let v: f64 = latent.iter().map(|&(k, x0)| x0 * w.get(k, j)).sum();
            if v >= 1e-9 {
                entries.push((u, j, v));
            }
        }
    }
    let x = UserItemMatrix::new(n_users, n_items, entries)?;
    Ok((x, CoefficientMatrix::new(w)?))
}

/// `<root>/fold-<k>` for every split.
pub fn write_folds(root: impl AsRef<Path>, folds: &[FoldSplit]) -> Result<Vec<PathBuf>> {
    folds
        .iter()
        .map(|f| {
            let dir = root.as_ref().join(format!("fold-{}", f.fold_index));
            write_fold(&dir, f).map(|_| dir)
        })
        .collect()
}
