//! Tabular preference models.
//!
//! [`GpmModel`] stores, per context, a raw scale-gate vector (`k` reals) and a
//! raw `2k` embedding per item. Emitted embeddings are optionally
//! L2-normalized; emitted scales pass through softplus so they are never
//! negative. [`BtModel`] stores one scalar reward per item.
//!
//! All parameters of a model live in one flat vector, which is what the
//! trainer differentiates and updates. Table iteration order is the sorted
//! key order, so the layout is deterministic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{PrefError, Result};
use crate::prefcore::{self, EmbeddingVector, PreferenceScore, ScaleVector};

/// Items known per context.
pub type Catalog = BTreeMap<String, BTreeSet<String>>;

/// A response `item_id` to the prompt `context_id`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemRef {
    pub context_id: String,
    pub item_id: String,
}

impl ItemRef {
    pub fn new(context_id: impl Into<String>, item_id: impl Into<String>) -> Self {
        Self {
            context_id: context_id.into(),
            item_id: item_id.into(),
        }
    }
}

/// Pairwise scores over an ordered item list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    items: Vec<String>,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub const SKEW_TOL: f64 = 1e-10;

    /// Validate and wrap a row-major `K x K` matrix.
    pub fn new(items: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = items.len();
        if n == 0 {
            return Err(PrefError::Empty("score matrix"));
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(PrefError::NotSquare {
                rows: rows.len(),
                cols: rows.first().map_or(0, Vec::len),
            });
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PrefError::NonFinite("score matrix"));
        }
        let m = Self { items, values };
        m.check_skew(Self::SKEW_TOL)?;
        Ok(m)
    }

    /// Items named `y0..y{n-1}`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let items = (0..rows.len()).map(|i| format!("y{i}")).collect();
        Self::new(items, rows)
    }

    fn check_skew(&self, tol: f64) -> Result<()> {
        let n = self.n();
        let (mut worst, mut at) = (0.0, (0, 0));
        for i in 0..n {
            for j in i..n {
                let a = (self.get(i, j) + self.get(j, i)).abs();
                if a > worst {
                    worst = a;
                    at = (i, j);
                }
            }
        }
        if worst > tol {
            return Err(PrefError::NotSkew {
                row: at.0,
                col: at.1,
                asymmetry: worst,
            });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.items.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Common scoring and parameter access used by the trainer.
pub trait PreferenceModel {
    fn beta(&self) -> f64;

    /// `s(a > b | context)`.
    fn score_items(&self, context: &str, a: &str, b: &str) -> Result<f64>;

    fn catalog(&self) -> Catalog;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Add `weight * d s(a > b) / d params` into `grad`.
    fn accumulate_score_grad(
        &self,
        context: &str,
        a: &str,
        b: &str,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<()>;

    /// Human-readable name of a flat parameter index.
    fn param_label(&self, index: usize) -> String;
}

/// How raw gate parameters map to scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleGate {
    /// `lambda = softplus(raw)`; trainable.
    #[default]
    Softplus,
    /// `lambda = raw` (must be nonnegative); frozen during training.
    Fixed,
}

#[derive(Debug, Clone)]
struct ContextSlot {
    scale_offset: usize,
    items: BTreeMap<String, usize>,
}

/// General preference model with a per-context scale gate and per-item
/// embedding head.
#[derive(Debug)]
pub struct GpmModel {
    k: usize,
    beta: f64,
    normalize: bool,
    gate: ScaleGate,
    params: Vec<f64>,
    contexts: BTreeMap<String, ContextSlot>,
    embed_evals: AtomicUsize,
    pair_evals: AtomicUsize,
}

impl Clone for GpmModel {
    fn clone(&self) -> Self {
        Self {
            k: self.k,
            beta: self.beta,
            normalize: self.normalize,
            gate: self.gate,
            params: self.params.clone(),
            contexts: self.contexts.clone(),
            embed_evals: AtomicUsize::new(0),
            pair_evals: AtomicUsize::new(0),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(PrefError::InvalidBeta(beta));
    }
    Ok(())
}

impl GpmModel {
    /// Build from raw tables. Every context with embeddings needs a scale entry.
    pub fn from_tables(
        k: usize,
        beta: f64,
        normalize: bool,
        gate: ScaleGate,
        scales: &BTreeMap<String, Vec<f64>>,
        embeddings: &BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(PrefError::InvalidArgument("k must be positive".into()));
        }
        check_beta(beta)?;
        let mut params = Vec::new();
        let mut contexts = BTreeMap::new();
        for (ctx, raw) in scales {
            if raw.len() != k {
                return Err(PrefError::DimensionMismatch {
                    left: k,
                    right: raw.len(),
                });
            }
            if raw.iter().any(|x| !x.is_finite()) {
                return Err(PrefError::NonFinite("scale parameters"));
            }
            if gate == ScaleGate::Fixed && raw.iter().any(|x| *x < 0.0) {
                return Err(PrefError::InvalidArgument(format!(
                    "fixed scales for `{ctx}` must be nonnegative"
                )));
            }
            let scale_offset = params.len();
            params.extend_from_slice(raw);
            let mut items = BTreeMap::new();
            for (item, v) in embeddings.get(ctx).into_iter().flatten() {
                if v.len() != 2 * k {
                    return Err(PrefError::InvalidArgument(format!(
                        "embedding for `{item}` in `{ctx}` has length {}, expected {}",
                        v.len(),
                        2 * k
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(PrefError::NonFinite("embedding parameters"));
                }
                items.insert(item.clone(), params.len());
                params.extend_from_slice(v);
            }
            contexts.insert(
                ctx.clone(),
                ContextSlot {
                    scale_offset,
                    items,
                },
            );
        }
        if let Some(ctx) = embeddings.keys().find(|c| !scales.contains_key(*c)) {
            return Err(PrefError::UnknownContext(ctx.clone()));
        }
        Ok(Self {
            k,
            beta,
            normalize,
            gate,
            params,
            contexts,
            embed_evals: AtomicUsize::new(0),
            pair_evals: AtomicUsize::new(0),
        })
    }

    /// Gaussian embeddings (`sigma = init_scale`) and zero gate parameters
    /// (`lambda = ln 2`) for every item in `catalog`.
    pub fn init(
        catalog: &Catalog,
        k: usize,
        beta: f64,
        normalize: bool,
        init_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, init_scale)
            .map_err(|e| PrefError::InvalidArgument(format!("init_scale: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scales = BTreeMap::new();
        let mut embeddings = BTreeMap::new();
        for (ctx, items) in catalog {
            scales.insert(ctx.clone(), vec![0.0; k]);
            let table: BTreeMap<String, Vec<f64>> = items
                .iter()
                .map(|item| {
                    let v = (0..2 * k).map(|_| normal.sample(&mut rng)).collect();
                    (item.clone(), v)
                })
                .collect();
            embeddings.insert(ctx.clone(), table);
        }
        Self::from_tables(k, beta, normalize, ScaleGate::Softplus, &scales, &embeddings)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }

    pub fn gate(&self) -> ScaleGate {
        self.gate
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        check_beta(beta)?;
        self.beta = beta;
        Ok(())
    }

    fn slot(&self, context: &str) -> Result<&ContextSlot> {
        self.contexts
            .get(context)
            .ok_or_else(|| PrefError::UnknownContext(context.to_string()))
    }

    fn item_offset(&self, context: &str, item: &str) -> Result<usize> {
        self.slot(context)?
            .items
            .get(item)
            .copied()
            .ok_or_else(|| PrefError::UnknownItem {
                context: context.to_string(),
                item: item.to_string(),
            })
    }

    /// Raw head output before normalization.
    pub fn raw_embedding(&self, item: &ItemRef) -> Result<&[f64]> {
        let off = self.item_offset(&item.context_id, &item.item_id)?;
        Ok(&self.params[off..off + 2 * self.k])
    }

    /// Raw gate parameters.
    pub fn raw_scales(&self, context: &str) -> Result<&[f64]> {
        let off = self.slot(context)?.scale_offset;
        Ok(&self.params[off..off + self.k])
    }

    /// Embedding for `item`, normalized iff the model's `normalize` flag is set.
    pub fn embed(&self, item: &ItemRef) -> Result<EmbeddingVector> {
        let raw = self.raw_embedding(item)?;
        self.embed_evals.fetch_add(1, Ordering::Relaxed);
        let v = EmbeddingVector::new(raw.to_vec())?;
        if self.normalize {
            v.normalized().map_err(|_| PrefError::ZeroNorm {
                context: item.context_id.clone(),
                item: item.item_id.clone(),
            })
        } else {
            Ok(v)
        }
    }

    /// Gate output for `context`.
    pub fn scales(&self, context: &str) -> Result<ScaleVector> {
        let raw = self.raw_scales(context)?;
        let lambdas = match self.gate {
            ScaleGate::Softplus => raw.iter().map(|x| prefcore::softplus(*x)).collect(),
            ScaleGate::Fixed => raw.to_vec(),
        };
        ScaleVector::new(lambdas)
    }

    pub fn score(&self, i: &ItemRef, j: &ItemRef) -> Result<PreferenceScore> {
        if i.context_id != j.context_id {
            return Err(PrefError::ContextMismatch {
                left: i.context_id.clone(),
                right: j.context_id.clone(),
            });
        }
        let vi = self.embed(i)?;
        let vj = self.embed(j)?;
        let scales = self.scales(&i.context_id)?;
        self.pair_evals.fetch_add(1, Ordering::Relaxed);
        prefcore::skew_score(&vi, &vj, &scales)
    }

    /// All pairwise scores among `items` with one embedding evaluation per item.
    pub fn score_matrix(&self, context: &str, items: &[&str]) -> Result<ScoreMatrix> {
        if items.is_empty() {
            return Err(PrefError::Empty("item list"));
        }
        let scales = self.scales(context)?;
        let embs = items
            .iter()
            .map(|it| self.embed(&ItemRef::new(context, *it)))
            .collect::<Result<Vec<_>>>()?;
        let n = items.len();
        let mut values = Vec::with_capacity(n * n);
        for a in &embs {
            for b in &embs {
                values.push(prefcore::raw_skew_score(
                    a.coords(),
                    b.coords(),
                    scales.lambdas(),
                ));
            }
        }
        self.pair_evals.fetch_add(n * n, Ordering::Relaxed);
        Ok(ScoreMatrix {
            items: items.iter().map(|s| s.to_string()).collect(),
            values,
        })
    }

    /// Embedding evaluations since construction or the last reset.
    pub fn embedding_evals(&self) -> usize {
        self.embed_evals.load(Ordering::Relaxed)
    }

    /// Score combinations since construction or the last reset.
    pub fn pair_evals(&self) -> usize {
        self.pair_evals.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.embed_evals.store(0, Ordering::Relaxed);
        self.pair_evals.store(0, Ordering::Relaxed);
    }

    pub fn contexts(&self) -> impl Iterator<Item = &str> {
        self.contexts.keys().map(String::as_str)
    }

    pub fn items(&self, context: &str) -> Result<Vec<&str>> {
        Ok(self.slot(context)?.items.keys().map(String::as_str).collect())
    }

    fn tables(&self) -> (BTreeMap<String, Vec<f64>>, BTreeMap<String, BTreeMap<String, Vec<f64>>>) {
        let mut scales = BTreeMap::new();
        let mut embeddings = BTreeMap::new();
        for (ctx, slot) in &self.contexts {
            scales.insert(
                ctx.clone(),
                self.params[slot.scale_offset..slot.scale_offset + self.k].to_vec(),
            );
            let t = slot
                .items
                .iter()
                .map(|(it, off)| (it.clone(), self.params[*off..*off + 2 * self.k].to_vec()))
                .collect();
            embeddings.insert(ctx.clone(), t);
        }
        (scales, embeddings)
    }
}

impl PreferenceModel for GpmModel {
    fn beta(&self) -> f64 {
        self.beta
    }

    fn score_items(&self, context: &str, a: &str, b: &str) -> Result<f64> {
        Ok(self
            .score(&ItemRef::new(context, a), &ItemRef::new(context, b))?
            .value())
    }

    fn catalog(&self) -> Catalog {
        self.contexts
            .iter()
            .map(|(c, s)| (c.clone(), s.items.keys().cloned().collect()))
            .collect()
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_score_grad(
        &self,
        context: &str,
        a: &str,
        b: &str,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let k = self.k;
        let slot = self.slot(context)?;
        let oa = self.item_offset(context, a)?;
        let ob = self.item_offset(context, b)?;
        let ea = self.embed(&ItemRef::new(context, a))?;
        let eb = self.embed(&ItemRef::new(context, b))?;
        let (va, vb) = (ea.coords(), eb.coords());
        let scales = self.scales(context)?;
        let lam = scales.lambdas();

        // d s / d e_a and d s / d e_b
        let mut ga = vec![0.0; 2 * k];
        let mut gb = vec![0.0; 2 * k];
        for l in 0..k {
            ga[2 * l] = -lam[l] * vb[2 * l + 1];
            ga[2 * l + 1] = lam[l] * vb[2 * l];
            gb[2 * l] = lam[l] * va[2 * l + 1];
            gb[2 * l + 1] = -lam[l] * va[2 * l];
        }
        if self.normalize {
            project_through_normalization(&mut ga, va, &self.params[oa..oa + 2 * k]);
            project_through_normalization(&mut gb, vb, &self.params[ob..ob + 2 * k]);
        }
        for d in 0..2 * k {
            grad[oa + d] += weight * ga[d];
            grad[ob + d] += weight * gb[d];
        }
        if self.gate == ScaleGate::Softplus {
            let raw = &self.params[slot.scale_offset..slot.scale_offset + k];
            for l in 0..k {
                let term = va[2 * l + 1] * vb[2 * l] - va[2 * l] * vb[2 * l + 1];
                grad[slot.scale_offset + l] += weight * term * prefcore::sigmoid(raw[l]);
            }
        }
        Ok(())
    }

    fn param_label(&self, index: usize) -> String {
        for (ctx, slot) in &self.contexts {
            if (slot.scale_offset..slot.scale_offset + self.k).contains(&index) {
                return format!("scale[{ctx}][{}]", index - slot.scale_offset);
            }
            for (item, off) in &slot.items {
                if (*off..*off + 2 * self.k).contains(&index) {
                    return format!("embed[{ctx}][{item}][{}]", index - off);
                }
            }
        }
        format!("param[{index}]")
    }
}

/// Chain rule through `e = r / |r|`: `g <- (I - e e^T) g / |r|`.
fn project_through_normalization(g: &mut [f64], unit: &[f64], raw: &[f64]) {
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot: f64 = g.iter().zip(unit).map(|(a, b)| a * b).sum();
    for (gi, ui) in g.iter_mut().zip(unit) {
        *gi = (*gi - ui * dot) / norm;
    }
}

/// Scalar-reward Bradley-Terry model.
#[derive(Debug)]
pub struct BtModel {
    beta: f64,
    params: Vec<f64>,
    contexts: BTreeMap<String, BTreeMap<String, usize>>,
    reward_evals: AtomicUsize,
}

impl Clone for BtModel {
    fn clone(&self) -> Self {
        Self {
            beta: self.beta,
            params: self.params.clone(),
            contexts: self.contexts.clone(),
            reward_evals: AtomicUsize::new(0),
        }
    }
}

impl BtModel {
    pub fn from_rewards(beta: f64, rewards: &BTreeMap<String, BTreeMap<String, f64>>) -> Result<Self> {
        check_beta(beta)?;
        let mut params = Vec::new();
        let mut contexts = BTreeMap::new();
        for (ctx, table) in rewards {
            let mut items = BTreeMap::new();
            for (item, r) in table {
                if !r.is_finite() {
                    return Err(PrefError::NonFinite("reward"));
                }
                items.insert(item.clone(), params.len());
                params.push(*r);
            }
            contexts.insert(ctx.clone(), items);
        }
        Ok(Self {
            beta,
            params,
            contexts,
            reward_evals: AtomicUsize::new(0),
        })
    }

    /// Gaussian rewards (`sigma = init_scale`) for every catalog item.
    pub fn init(catalog: &Catalog, beta: f64, init_scale: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, init_scale)
            .map_err(|e| PrefError::InvalidArgument(format!("init_scale: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rewards = catalog
            .iter()
            .map(|(ctx, items)| {
                let t = items
                    .iter()
                    .map(|it| (it.clone(), normal.sample(&mut rng)))
                    .collect();
                (ctx.clone(), t)
            })
            .collect();
        Self::from_rewards(beta, &rewards)
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        check_beta(beta)?;
        self.beta = beta;
        Ok(())
    }

    fn offset(&self, item: &ItemRef) -> Result<usize> {
        self.contexts
            .get(&item.context_id)
            .ok_or_else(|| PrefError::UnknownContext(item.context_id.clone()))?
            .get(&item.item_id)
            .copied()
            .ok_or_else(|| PrefError::UnknownItem {
                context: item.context_id.clone(),
                item: item.item_id.clone(),
            })
    }

    pub fn reward(&self, item: &ItemRef) -> Result<f64> {
        let off = self.offset(item)?;
        self.reward_evals.fetch_add(1, Ordering::Relaxed);
        Ok(self.params[off])
    }

    /// `r_i - r_j`.
    pub fn score(&self, i: &ItemRef, j: &ItemRef) -> Result<PreferenceScore> {
        if i.context_id != j.context_id {
            return Err(PrefError::ContextMismatch {
                left: i.context_id.clone(),
                right: j.context_id.clone(),
            });
        }
        Ok(PreferenceScore(self.reward(i)? - self.reward(j)?))
    }

    pub fn score_matrix(&self, context: &str, items: &[&str]) -> Result<ScoreMatrix> {
        if items.is_empty() {
            return Err(PrefError::Empty("item list"));
        }
        let r = items
            .iter()
            .map(|it| self.reward(&ItemRef::new(context, *it)))
            .collect::<Result<Vec<_>>>()?;
        let values = r
            .iter()
            .flat_map(|a| r.iter().map(move |b| a - b))
            .collect();
        Ok(ScoreMatrix {
            items: items.iter().map(|s| s.to_string()).collect(),
            values,
        })
    }

    pub fn reward_evals(&self) -> usize {
        self.reward_evals.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.reward_evals.store(0, Ordering::Relaxed);
    }

    pub fn rewards(&self) -> BTreeMap<String, BTreeMap<String, f64>> {
        self.contexts
            .iter()
            .map(|(c, t)| {
                (
                    c.clone(),
                    t.iter().map(|(i, off)| (i.clone(), self.params[*off])).collect(),
                )
            })
            .collect()
    }

    pub fn contexts(&self) -> impl Iterator<Item = &str> {
        self.contexts.keys().map(String::as_str)
    }

    pub fn items(&self, context: &str) -> Result<Vec<&str>> {
        Ok(self
            .contexts
            .get(context)
            .ok_or_else(|| PrefError::UnknownContext(context.to_string()))?
            .keys()
            .map(String::as_str)
            .collect())
    }
}

impl PreferenceModel for BtModel {
    fn beta(&self) -> f64 {
        self.beta
    }

    fn score_items(&self, context: &str, a: &str, b: &str) -> Result<f64> {
        Ok(self
            .score(&ItemRef::new(context, a), &ItemRef::new(context, b))?
            .value())
    }

    fn catalog(&self) -> Catalog {
        self.contexts
            .iter()
            .map(|(c, t)| (c.clone(), t.keys().cloned().collect()))
            .collect()
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_score_grad(
        &self,
        context: &str,
        a: &str,
        b: &str,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let oa = self.offset(&ItemRef::new(context, a))?;
        let ob = self.offset(&ItemRef::new(context, b))?;
        grad[oa] += weight;
        grad[ob] -= weight;
        Ok(())
    }

    fn param_label(&self, index: usize) -> String {
        for (ctx, t) in &self.contexts {
            for (item, off) in t {
                if *off == index {
                    return format!("reward[{ctx}][{item}]");
                }
            }
        }
        format!("param[{index}]")
    }
}

/// Embed a BT model as a `k = 1` GPM: `v_y = [c, r(y)]`, unit scales, no
/// normalization, and `beta = |c| * beta_bt`.
///
/// Scores become `c * (r_i - r_j)`; for `c > 0` the preference probabilities
/// equal the BT probabilities, for `c < 0` every preference flips.
pub fn bt_to_gpm(bt: &BtModel, c: f64) -> Result<GpmModel> {
    if c == 0.0 || !c.is_finite() {
        return Err(PrefError::InvalidArgument(
            "BT embedding constant must be finite and nonzero".into(),
        ));
    }
    let rewards = bt.rewards();
    let scales = rewards.keys().map(|ctx| (ctx.clone(), vec![1.0])).collect();
    let embeddings = rewards
        .iter()
        .map(|(ctx, t)| {
            let e = t.iter().map(|(it, r)| (it.clone(), vec![c, *r])).collect();
            (ctx.clone(), e)
        })
        .collect();
    GpmModel::from_tables(
        1,
        c.abs() * bt.beta,
        false,
        ScaleGate::Fixed,
        &scales,
        &embeddings,
    )
}

/// On-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelFile {
    Gpm {
        k: usize,
        beta: f64,
        normalize: bool,
        #[serde(default)]
        gate: ScaleGate,
        /// Raw gate parameters per context.
        scales: BTreeMap<String, Vec<f64>>,
        /// Raw head outputs per context and item.
        embeddings: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    },
    Bt {
        beta: f64,
        rewards: BTreeMap<String, BTreeMap<String, f64>>,
    },
}

/// Either model kind.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Gpm(GpmModel),
    Bt(BtModel),
}

impl AnyModel {
    pub fn to_file(&self) -> ModelFile {
        match self {
            AnyModel::Gpm(m) => {
                let (scales, embeddings) = m.tables();
                ModelFile::Gpm {
                    k: m.k,
                    beta: m.beta,
                    normalize: m.normalize,
                    gate: m.gate,
                    scales,
                    embeddings,
                }
            }
            AnyModel::Bt(m) => ModelFile::Bt {
                beta: m.beta,
                rewards: m.rewards(),
            },
        }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        Ok(match file {
            ModelFile::Gpm {
                k,
                beta,
                normalize,
                gate,
                scales,
                embeddings,
            } => AnyModel::Gpm(GpmModel::from_tables(
                *k, *beta, *normalize, *gate, scales, embeddings,
            )?),
            ModelFile::Bt { beta, rewards } => AnyModel::Bt(BtModel::from_rewards(*beta, rewards)?),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn score_matrix(&self, context: &str, items: &[&str]) -> Result<ScoreMatrix> {
        match self {
            AnyModel::Gpm(m) => m.score_matrix(context, items),
            AnyModel::Bt(m) => m.score_matrix(context, items),
        }
    }

    pub fn items(&self, context: &str) -> Result<Vec<&str>> {
        match self {
            AnyModel::Gpm(m) => m.items(context),
            AnyModel::Bt(m) => m.items(context),
        }
    }

    fn inner(&self) -> &dyn PreferenceModel {
        match self {
            AnyModel::Gpm(m) => m,
            AnyModel::Bt(m) => m,
        }
    }
}

impl PreferenceModel for AnyModel {
    fn beta(&self) -> f64 {
        self.inner().beta()
    }

    fn score_items(&self, context: &str, a: &str, b: &str) -> Result<f64> {
        self.inner().score_items(context, a, b)
    }

    fn catalog(&self) -> Catalog {
        self.inner().catalog()
    }

    fn params(&self) -> &[f64] {
        self.inner().params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            AnyModel::Gpm(m) => m.params_mut(),
            AnyModel::Bt(m) => m.params_mut(),
        }
    }

    fn accumulate_score_grad(
        &self,
        context: &str,
        a: &str,
        b: &str,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        self.inner().accumulate_score_grad(context, a, b, weight, grad)
    }

    fn param_label(&self, index: usize) -> String {
        self.inner().param_label(index)
    }
}
