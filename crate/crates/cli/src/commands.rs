use std::path::Path;
use std::time::Instant;

use prefrep::datasets::{
    catalog_path, gen_bt, gen_cycle, gen_skew, load_dataset, save_dataset, BtGenConfig, GroundTruth,
};
use prefrep::expressiveness::{
    canonical_check, construct_complex, construct_real, construct_spectral, max_abs_diff, reconstruct,
    reconstruct_complex, SkewMatrix,
};
use prefrep::gpo::{
    gpo_run, solve_equilibrium, total_variation, GameSpec, GpoReport, InnerConfig, PolicyDistribution,
    ScoreMode,
};
use prefrep::models::{bt_to_gpm, AnyModel, BtModel, GpmModel, ItemRef, ScoreMatrix};
use prefrep::prefcore::SkewOperator;
use prefrep::training::{self, eval_accuracy, LossKind, Optimizer, TrainConfig};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{create_dir, emit, read_matrix, write_json, write_matrix, write_rows};
use crate::manifest::{beside, RunManifest};
use crate::{
    BenchArgs, ConstructArgs, ConstructMode, DataKind, EmbedDumpArgs, EvalArgs, GenDataArgs, GpoArgs, GpoMode,
    LossArg, ModelKind, OptimizerArg, TrainArgs,
};

fn truth_path(out: &Path) -> std::path::PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".truth.json");
    out.with_file_name(name)
}

fn load_model(path: &Path) -> CliResult<AnyModel> {
    AnyModel::load(path).map_err(|e| CliError::Validation(format!("loading model {}: {e}", path.display())))
}

pub fn gen_data(a: &GenDataArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("gen-data", a, Some(a.seed));
    if a.soft && !matches!(a.kind, DataKind::Bt) {
        return Err(CliError::Validation("--soft applies to --kind bt only".into()));
    }
    if a.truth_model.is_some() && !matches!(a.kind, DataKind::Bt) {
        return Err(CliError::Validation("--truth-model applies to --kind bt only".into()));
    }
    let (ds, truth) = match a.kind {
        DataKind::Cycle => gen_cycle(a.items, a.contexts, a.seed)?,
        DataKind::Bt => gen_bt(&BtGenConfig {
            n_items: a.items,
            contexts: a.contexts,
            pairs_per_context: a.pairs,
            seed: a.seed,
            soft: a.soft,
            beta: a.beta,
        })?,
        DataKind::Skew => gen_skew(a.items, a.contexts, a.seed, a.scale)?,
    };
    save_dataset(&ds, &a.out).map_err(|e| CliError::write(&a.out, e))?;
    manifest.artifact(&a.out);
    let side = catalog_path(&a.out);
    if side.exists() {
        manifest.artifact(&side);
    }
    let tp = truth_path(&a.out);
    write_json(&tp, &truth)?;
    manifest.artifact(&tp);
    if let (Some(path), GroundTruth::Bt { rewards }) = (&a.truth_model, &truth) {
        let bt = BtModel::from_rewards(a.beta, rewards)?;
        let gpm = AnyModel::Gpm(bt_to_gpm(&bt, 1.0)?);
        gpm.save(path).map_err(|e| CliError::write(path, e))?;
        manifest.artifact(path);
    }
    emit(&serde_json::json!({ "examples": ds.len(), "contexts": ds.catalog().len(), "out": a.out }))?;
    manifest.finish(&beside(&a.out))
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    model_kind: ModelKind,
    config: &'a TrainConfig,
    final_accuracy: f64,
    final_loss: f64,
    examples: usize,
    report: &'a training::TrainReport,
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("train", a, Some(a.seed));
    let ds = load_dataset(&a.data)?;
    if ds.is_empty() {
        return Err(CliError::Validation(format!("{}: dataset is empty", a.data.display())));
    }
    let mut cfg = match a.model_kind {
        ModelKind::Gpm => TrainConfig::gpm_default(),
        ModelKind::Bt => TrainConfig::bt_default(),
    };
    if let Some(b) = a.beta {
        cfg.beta = b;
    }
    cfg.loss = match a.loss {
        LossArg::Ce => LossKind::Ce,
        LossArg::Mse => LossKind::Mse,
    };
    cfg.optimizer = match a.optimizer {
        OptimizerArg::Adam => Optimizer::ADAM,
        OptimizerArg::Sgd => Optimizer::Sgd,
    };
    cfg.learning_rate = a.lr;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.seed = a.seed;
    cfg.init_scale = a.init_scale;
    let model = match a.model_kind {
        ModelKind::Gpm => AnyModel::Gpm(GpmModel::init(
            ds.catalog(),
            a.k,
            cfg.beta,
            a.normalize,
            cfg.init_scale,
            cfg.seed,
        )?),
        ModelKind::Bt => AnyModel::Bt(BtModel::init(ds.catalog(), cfg.beta, cfg.init_scale, cfg.seed)?),
    };
    let (model, report) = training::train(model, &ds, &cfg).map_err(|e| match e {
        prefrep::PrefError::Diverged { .. } => CliError::Internal(e.to_string()),
        other => other.into(),
    })?;
    create_dir(&a.out)?;
    let model_path = a.out.join("model.json");
    model.save(&model_path).map_err(|e| CliError::write(&model_path, e))?;
    manifest.artifact(&model_path);
    let out = TrainOutput {
        model_kind: a.model_kind,
        config: &cfg,
        final_accuracy: report.final_accuracy,
        final_loss: *report.loss.last().unwrap_or(&f64::NAN),
        examples: ds.len(),
        report: &report,
    };
    let report_path = a.out.join("report.json");
    write_json(&report_path, &out)?;
    manifest.artifact(&report_path);
    let curve_path = a.out.join("curve.csv");
    std::fs::write(&curve_path, report.to_csv()).map_err(|e| CliError::write(&curve_path, e))?;
    manifest.artifact(&curve_path);
    emit(&serde_json::json!({
        "final_accuracy": report.final_accuracy,
        "final_loss": out.final_loss,
        "model": model_path,
    }))?;
    manifest.finish(&a.out.join("manifest.json"))
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("eval", a, None);
    let model = load_model(&a.model)?;
    let ds = load_dataset(&a.data)?;
    let accuracy = eval_accuracy(&model, ds.examples())?;
    let ce = training::ce_loss(&model, ds.examples())?;
    let result = serde_json::json!({ "accuracy": accuracy, "ce_loss": ce, "examples": ds.len() });
    emit(&result)?;
    if let Some(out) = &a.out {
        write_json(out, &result)?;
        manifest.artifact(out);
        manifest.finish(&beside(out))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ConstructReport {
    mode: ConstructMode,
    n: usize,
    /// Number of 2-D blocks in the embedding space.
    k: usize,
    max_residual: f64,
    lambdas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    orthogonality_residual: Option<f64>,
    operator_canonical: bool,
}

pub fn construct(a: &ConstructArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("construct", a, None);
    let p = SkewMatrix::new(read_matrix(&a.matrix)?)?;
    let n = p.n();
    let (rows, report, u) = match a.mode {
        ConstructMode::Real => {
            let real = construct_real(&p);
            let lambdas = vec![1.0; n];
            let residual = max_abs_diff(&p, &reconstruct(&real.embeddings, &lambdas));
            let rows: Vec<Vec<f64>> = real.embeddings.iter().map(|v| v.coords().to_vec()).collect();
            (rows, (residual, lambdas, None, real.operator.k()), None)
        }
        ConstructMode::Complex => {
            let cx = construct_complex(&p);
            let residual = max_abs_diff(&p, &reconstruct_complex(&cx));
            let rows: Vec<Vec<f64>> = cx.iter().map(|z| z.to_real().into_coords()).collect();
            (rows, (residual, vec![1.0; n], None, n), None)
        }
        ConstructMode::Spectral => {
            let sd = construct_spectral(&p)?;
            let rows: Vec<Vec<f64>> = sd.embeddings.iter().map(|v| v.coords().to_vec()).collect();
            let dim = sd.dim();
            let u: Vec<Vec<f64>> = sd.u.chunks(dim).map(<[f64]>::to_vec).collect();
            let residual = sd.residual(&p);
            let orth = sd.orthogonality_residual();
            (rows, (residual, sd.lambdas.clone(), Some(orth), dim / 2), Some(u))
        }
    };
    let (max_residual, lambdas, orthogonality_residual, k) = report;
    let operator_canonical = canonical_check(&SkewOperator::new(k).to_dense())?.canonical;
    create_dir(&a.out)?;
    let emb_path = a.out.join("embeddings.csv");
    write_matrix(&emb_path, &rows)?;
    manifest.artifact(&emb_path);
    if let Some(u) = u {
        let u_path = a.out.join("u.csv");
        write_matrix(&u_path, &u)?;
        manifest.artifact(&u_path);
    }
    let report = ConstructReport {
        mode: a.mode,
        n,
        k,
        max_residual,
        lambdas,
        orthogonality_residual,
        operator_canonical,
    };
    let report_path = a.out.join("report.json");
    write_json(&report_path, &report)?;
    manifest.artifact(&report_path);
    emit(&report)?;
    manifest.finish(&a.out.join("manifest.json"))
}

#[derive(Serialize)]
struct GpoOutput<'a> {
    items: &'a [String],
    start: Vec<f64>,
    #[serde(flatten)]
    report: &'a GpoReport,
    equilibrium: Vec<f64>,
    tv_to_equilibrium: f64,
}

pub fn gpo(a: &GpoArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("gpo", a, Some(a.seed));
    let matrix = match (&a.matrix, &a.model) {
        (Some(path), _) => {
            let rows = read_matrix(path)?;
            ScoreMatrix::from_rows(rows)?
        }
        (None, Some(path)) => {
            let model = load_model(path)?;
            let ctx = a.context.as_deref().unwrap_or_default();
            let items: Vec<String> = model.items(ctx)?.into_iter().map(str::to_string).collect();
            let refs: Vec<&str> = items.iter().map(String::as_str).collect();
            model.score_matrix(ctx, &refs)?
        }
        (None, None) => return Err(CliError::Validation("one of --matrix or --model is required".into())),
    };
    let mode = match a.mode {
        GpoMode::Exact => ScoreMode::Exact,
        GpoMode::Sampled => ScoreMode::Sampled { k: a.k, seed: a.seed },
    };
    let game = GameSpec::new(matrix, a.beta, mode)?;
    let start = match &a.start {
        Some(p) => {
            if p.len() != game.n() {
                return Err(CliError::Validation(format!(
                    "--start has {} probabilities for {} responses",
                    p.len(),
                    game.n()
                )));
            }
            PolicyDistribution::from_probs(p)?
        }
        None => PolicyDistribution::uniform(game.n())?,
    };
    let (_, report) = gpo_run(&start, &game, a.iters, &InnerConfig::default())?;
    let eq = solve_equilibrium(game.matrix(), a.beta)?.probs();
    let out = GpoOutput {
        items: game.matrix().items(),
        start: start.probs(),
        report: &report,
        tv_to_equilibrium: total_variation(report.final_probs(), &eq),
        equilibrium: eq,
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_json(&a.out, &out)?;
    manifest.artifact(&a.out);
    emit(&serde_json::json!({
        "final_probs": report.final_probs(),
        "final_min_win_rate": report.final_min_win_rate,
        "tv_to_equilibrium": out.tv_to_equilibrium,
    }))?;
    manifest.finish(&beside(&a.out))
}

fn reset_counters(model: &AnyModel) {
    match model {
        AnyModel::Gpm(m) => m.reset_counters(),
        AnyModel::Bt(m) => m.reset_counters(),
    }
}

fn embedding_evals(model: &AnyModel) -> usize {
    match model {
        AnyModel::Gpm(m) => m.embedding_evals(),
        AnyModel::Bt(m) => m.reward_evals(),
    }
}

pub fn bench(a: &BenchArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("bench", a, None);
    let model = load_model(&a.model)?;
    let items = model.items(&a.context)?;
    let mut header = vec!["k", "embedding_evals", "pair_combinations"];
    if a.pairwise {
        header.extend(["pairwise_scorings", "pairwise_embedding_evals"]);
    }
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &k in &a.k_values {
        if k == 0 || k > items.len() {
            return Err(CliError::Validation(format!(
                "K={k} is outside 1..={} (items in context `{}`)",
                items.len(),
                a.context
            )));
        }
        let subset = &items[..k];
        reset_counters(&model);
        let t0 = Instant::now();
        let m = model.score_matrix(&a.context, subset)?;
        let batched_ns = t0.elapsed().as_nanos() as u64;
        let evals = embedding_evals(&model);
        let mut row = vec![k.to_string(), evals.to_string(), (m.n() * m.n()).to_string()];
        let mut timing = serde_json::json!({ "k": k, "score_matrix_ns": batched_ns });
        if a.pairwise {
            reset_counters(&model);
            let t0 = Instant::now();
            let mut scorings = 0usize;
            for i in 0..k {
                for j in i + 1..k {
                    let x = ItemRef::new(&a.context, subset[i]);
                    let y = ItemRef::new(&a.context, subset[j]);
                    match &model {
                        AnyModel::Gpm(g) => {
                            g.score(&x, &y)?;
                        }
                        AnyModel::Bt(b) => {
                            b.score(&x, &y)?;
                        }
                    }
                    scorings += 1;
                }
            }
            timing["pairwise_ns"] = (t0.elapsed().as_nanos() as u64).into();
            row.push(scorings.to_string());
            row.push(embedding_evals(&model).to_string());
        }
        rows.push(row);
        timings.push(timing);
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_rows(&a.out, Some(&header), &rows)?;
    manifest.artifact(&a.out);
    manifest.extra = serde_json::json!({ "timings": timings });
    let table: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| serde_json::Value::Object(header.iter().zip(r).map(|(h, v)| (h.to_string(), v.parse::<u64>().unwrap_or(0).into())).collect()))
        .collect();
    emit(&table)?;
    manifest.finish(&beside(&a.out))
}

pub fn embed_dump(a: &EmbedDumpArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("embed-dump", a, None);
    let model = load_model(&a.model)?;
    let gpm = match &model {
        AnyModel::Gpm(g) => g.clone(),
        AnyModel::Bt(b) => bt_to_gpm(b, 1.0)?,
    };
    let items = gpm.items(&a.context)?;
    let mut rows = Vec::with_capacity(items.len());
    for item in &items {
        let v = gpm.embed(&ItemRef::new(&a.context, *item))?;
        let mut row = vec![item.to_string()];
        row.extend(v.coords().iter().map(f64::to_string));
        rows.push(row);
    }
    let mut header = vec!["item".to_string()];
    header.extend((0..2 * gpm.k()).map(|i| format!("x{i}")));
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_rows(&a.out, Some(&header), &rows)?;
    manifest.artifact(&a.out);
    emit(&serde_json::json!({
        "items": items.len(),
        "k": gpm.k(),
        "scales": gpm.scales(&a.context)?.lambdas(),
        "normalized": gpm.normalize(),
    }))?;
    manifest.finish(&beside(&a.out))
}
