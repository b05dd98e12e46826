//! Preference datasets: synthetic generators and JSONL persistence.
//!
//! Examples are stored winner-first with `prob = P(winner > loser) in [0.5, 1]`.
//! One JSON object per line:
//!
//! ```text
//! {"context":"c0","winner":"y1","loser":"y2","prob":1.0}
//! ```
//!
//! Items that appear in no example are kept in a side file
//! `<dataset>.catalog.json` of the form `{"c0": ["y0", "y1"]}`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{PrefError, Result};
use crate::models::{Catalog, ScoreMatrix};
use crate::prefcore::sigmoid;

/// One observed comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceExample {
    pub context: String,
    pub winner: String,
    pub loser: String,
    pub prob: f64,
}

impl PreferenceExample {
    pub fn hard(context: impl Into<String>, winner: impl Into<String>, loser: impl Into<String>) -> Self {
        Self {
            context: context.into(),
            winner: winner.into(),
            loser: loser.into(),
            prob: 1.0,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.context.is_empty() || self.winner.is_empty() || self.loser.is_empty() {
            return Err("context, winner and loser must be nonempty".into());
        }
        if self.winner == self.loser {
            return Err(format!("winner and loser are both `{}`", self.winner));
        }
        if !(0.5..=1.0).contains(&self.prob) {
            return Err(format!(
                "prob {} outside [0.5, 1]; store the winner first",
                self.prob
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PreferenceDataset {
    examples: Vec<PreferenceExample>,
    catalog: Catalog,
}

impl PreferenceDataset {
    /// Validate examples; the catalog is the union of referenced items and `extra`.
    pub fn new(examples: Vec<PreferenceExample>, extra: &Catalog) -> Result<Self> {
        let mut catalog = extra.clone();
        for (i, ex) in examples.iter().enumerate() {
            ex.validate()
                .map_err(|m| PrefError::InvalidArgument(format!("example {i}: {m}")))?;
            let set = catalog.entry(ex.context.clone()).or_default();
            set.insert(ex.winner.clone());
            set.insert(ex.loser.clone());
        }
        Ok(Self { examples, catalog })
    }

    pub fn from_examples(examples: Vec<PreferenceExample>) -> Result<Self> {
        Self::new(examples, &Catalog::new())
    }

    pub fn examples(&self) -> &[PreferenceExample] {
        &self.examples
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Catalog entries not referenced by any example.
    fn isolated_items(&self) -> Catalog {
        let referenced = Self::from_examples(self.examples.clone())
            .map(|d| d.catalog)
            .unwrap_or_default();
        let mut out = Catalog::new();
        for (ctx, items) in &self.catalog {
            let seen = referenced.get(ctx);
            let rest: std::collections::BTreeSet<String> = items
                .iter()
                .filter(|it| seen.is_none_or(|s| !s.contains(*it)))
                .cloned()
                .collect();
            if !rest.is_empty() {
                out.insert(ctx.clone(), rest);
            }
        }
        out
    }
}

/// Generating process behind a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroundTruth {
    /// Per context, the cycle order `y_0 > y_1 > ... > y_{n-1} > y_0`.
    Cycle { orders: BTreeMap<String, Vec<String>> },
    /// Per context, item rewards.
    Bt { rewards: BTreeMap<String, BTreeMap<String, f64>> },
    /// Per context, the skew score matrix over `items`.
    Skew {
        items: Vec<String>,
        matrices: BTreeMap<String, Vec<Vec<f64>>>,
    },
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// `contexts` directed `n`-cycles with hard labels; item order shuffled per context.
pub fn gen_cycle(n: usize, contexts: usize, seed: u64) -> Result<(PreferenceDataset, GroundTruth)> {
    if n < 3 {
        return Err(PrefError::InvalidArgument(format!(
            "a preference cycle needs at least 3 items, got {n}"
        )));
    }
    if contexts == 0 {
        return Err(PrefError::InvalidArgument("contexts must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::with_capacity(n * contexts);
    let mut orders = BTreeMap::new();
    for ctx in names("c", contexts) {
        let mut order = names("y", n);
        order.shuffle(&mut rng);
        for i in 0..n {
            examples.push(PreferenceExample::hard(
                ctx.clone(),
                order[i].clone(),
                order[(i + 1) % n].clone(),
            ));
        }
        orders.insert(ctx, order);
    }
    Ok((PreferenceDataset::from_examples(examples)?, GroundTruth::Cycle { orders }))
}

/// Options for [`gen_bt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtGenConfig {
    pub n_items: usize,
    pub contexts: usize,
    pub pairs_per_context: usize,
    pub seed: u64,
    /// Soft labels `sigma((r_w - r_l) / beta)` instead of hard labels.
    pub soft: bool,
    pub beta: f64,
}

/// Comparisons drawn from a Bradley-Terry model with standard normal rewards.
pub fn gen_bt(cfg: &BtGenConfig) -> Result<(PreferenceDataset, GroundTruth)> {
    if cfg.n_items < 2 || cfg.contexts == 0 || cfg.pairs_per_context == 0 {
        return Err(PrefError::InvalidArgument(format!(
            "need items >= 2 and positive contexts/pairs, got items={} contexts={} pairs={}",
            cfg.n_items, cfg.contexts, cfg.pairs_per_context
        )));
    }
    if cfg.soft && (!(cfg.beta > 0.0) || !cfg.beta.is_finite()) {
        return Err(PrefError::InvalidBeta(cfg.beta));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let items = names("y", cfg.n_items);
    let mut rewards = BTreeMap::new();
    let mut examples = Vec::new();
    for ctx in names("c", cfg.contexts) {
        let r: Vec<f64> = (0..cfg.n_items).map(|_| rng.sample(StandardNormal)).collect();
        let mut made = 0;
        while made < cfg.pairs_per_context {
            let i = rng.random_range(0..cfg.n_items);
            let j = rng.random_range(0..cfg.n_items);
            // equal rewards carry no preference: resample
            if i == j || r[i] == r[j] {
                continue;
            }
            let (w, l) = if r[i] > r[j] { (i, j) } else { (j, i) };
            let prob = if cfg.soft {
                sigmoid((r[w] - r[l]) / cfg.beta)
            } else {
                1.0
            };
            examples.push(PreferenceExample {
                context: ctx.clone(),
                winner: items[w].clone(),
                loser: items[l].clone(),
                prob,
            });
            made += 1;
        }
        rewards.insert(
            ctx,
            items.iter().cloned().zip(r).collect::<BTreeMap<_, _>>(),
        );
    }
    let catalog: Catalog = rewards
        .iter()
        .map(|(c, t)| (c.clone(), t.keys().cloned().collect()))
        .collect();
    Ok((PreferenceDataset::new(examples, &catalog)?, GroundTruth::Bt { rewards }))
}

/// All unordered pairs of one context scored by a skew matrix: winner by
/// sign, `prob = sigma(|P_ij|)`; zero entries are skipped.
pub fn examples_from_skew(context: &str, matrix: &ScoreMatrix) -> Vec<PreferenceExample> {
    let items = matrix.items();
    let mut out = Vec::new();
    for i in 0..matrix.n() {
        for j in i + 1..matrix.n() {
            let p = matrix.get(i, j);
            if p == 0.0 {
                continue;
            }
            let (w, l) = if p > 0.0 { (i, j) } else { (j, i) };
            out.push(PreferenceExample {
                context: context.to_string(),
                winner: items[w].clone(),
                loser: items[l].clone(),
                prob: sigmoid(p.abs()),
            });
        }
    }
    out
}

/// Random skew score matrices (`P_ij ~ scale * N(0,1)` above the diagonal)
/// with full pairwise coverage.
pub fn gen_skew(
    n_items: usize,
    contexts: usize,
    seed: u64,
    scale: f64,
) -> Result<(PreferenceDataset, GroundTruth)> {
    if n_items < 2 || contexts == 0 {
        return Err(PrefError::InvalidArgument(format!(
            "need items >= 2 and contexts >= 1, got items={n_items} contexts={contexts}"
        )));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(PrefError::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = names("y", n_items);
    let mut matrices = BTreeMap::new();
    let mut examples = Vec::new();
    let mut catalog = Catalog::new();
    for ctx in names("c", contexts) {
        let mut p = vec![vec![0.0; n_items]; n_items];
        for i in 0..n_items {
            for j in i + 1..n_items {
                let v: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
                p[i][j] = v;
                p[j][i] = -v;
            }
        }
        let m = ScoreMatrix::new(items.clone(), p.clone())?;
        examples.extend(examples_from_skew(&ctx, &m));
        catalog.insert(ctx.clone(), items.iter().cloned().collect());
        matrices.insert(ctx, p);
    }
    Ok((
        PreferenceDataset::new(examples, &catalog)?,
        GroundTruth::Skew { items, matrices },
    ))
}

/// Side-file path holding isolated catalog items.
pub fn catalog_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".catalog.json");
    path.with_file_name(name)
}

pub fn save_dataset(ds: &PreferenceDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for ex in &ds.examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let isolated = ds.isolated_items();
    let side = catalog_path(path);
    if !isolated.is_empty() {
        std::fs::write(side, serde_json::to_string_pretty(&isolated)? + "\n")?;
    } else if side.exists() {
        std::fs::remove_file(side)?;
    }
    Ok(())
}

/// Read and validate a JSONL dataset; errors cite 1-based line numbers.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<PreferenceDataset> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut examples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let ex: PreferenceExample = serde_json::from_str(&line).map_err(|e| PrefError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        ex.validate().map_err(|message| PrefError::Parse {
            line: lineno,
            message,
        })?;
        examples.push(ex);
    }
    let side = catalog_path(path);
    let extra = if side.exists() {
        serde_json::from_str(&std::fs::read_to_string(side)?)?
    } else {
        Catalog::new()
    };
    PreferenceDataset::new(examples, &extra)
}
