//! General Preference Optimization on tabular softmax policies.
//!
//! Each iteration fixes the previous policy `pi_t`, computes empirical
//! scores `s_hat_i` of every response against an opponent (by default
//! `pi_t` itself) and minimizes
//!
//! ```text
//! L(theta) = sum_y pi_t(y) (log pi_theta(y) - log pi_t(y) - s_hat_y / beta)^2
//! ```
//!
//! with the normalizer `log Z` set to zero. The exact normalizer is reported
//! alongside so the approximation error is visible.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{PrefError, Result};
use crate::models::ScoreMatrix;
use crate::prefcore::sigmoid;

/// Probabilities are floored here when converting to logits.
const MIN_PROB: f64 = 1e-300;

/// Softmax policy over a finite response set.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution {
    logits: Vec<f64>,
}

impl PolicyDistribution {
    pub fn new(logits: Vec<f64>) -> Result<Self> {
        if logits.is_empty() {
            return Err(PrefError::Empty("policy"));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(PrefError::NonFinite("policy logits"));
        }
        Ok(Self { logits })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    /// Logits `ln p`; zero entries are floored to a tiny positive mass.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(PrefError::InvalidArgument(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(PrefError::InvalidArgument(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Self::new(probs.iter().map(|p| p.max(MIN_PROB).ln()).collect())
    }

    pub fn n(&self) -> usize {
        self.logits.len()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn log_probs(&self) -> Vec<f64> {
        let m = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + self.logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        self.logits.iter().map(|l| l - lse).collect()
    }

    pub fn probs(&self) -> Vec<f64> {
        let m = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.logits.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|x| x / z).collect()
    }
}

/// How empirical scores are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ScoreMode {
    /// Probability-weighted mean over the whole response set.
    Exact,
    /// Mean over `k` opponents drawn from the opponent policy.
    Sampled { k: usize, seed: u64 },
}

/// Opponent each response is scored against.
#[derive(Debug, Clone, PartialEq)]
pub enum Opponent {
    /// The current policy `pi_t`.
    SelfPlay,
    Fixed(PolicyDistribution),
}

/// Fixed preference landscape for one context.
#[derive(Debug, Clone)]
pub struct GameSpec {
    matrix: ScoreMatrix,
    beta: f64,
    mode: ScoreMode,
    opponent: Opponent,
}

impl GameSpec {
    pub fn new(matrix: ScoreMatrix, beta: f64, mode: ScoreMode) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(PrefError::InvalidBeta(beta));
        }
        if let ScoreMode::Sampled { k: 0, .. } = mode {
            return Err(PrefError::Empty("opponent sample"));
        }
        Ok(Self {
            matrix,
            beta,
            mode,
            opponent: Opponent::SelfPlay,
        })
    }

    pub fn with_opponent(mut self, opponent: Opponent) -> Result<Self> {
        if let Opponent::Fixed(mu) = &opponent {
            check_dims(mu.n(), self.n())?;
        }
        self.opponent = opponent;
        Ok(self)
    }

    pub fn exact(matrix: ScoreMatrix, beta: f64) -> Result<Self> {
        Self::new(matrix, beta, ScoreMode::Exact)
    }

    pub fn matrix(&self) -> &ScoreMatrix {
        &self.matrix
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> ScoreMode {
        self.mode
    }

    pub fn opponent(&self) -> &Opponent {
        &self.opponent
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    fn opponent_probs(&self, theta_t: &PolicyDistribution) -> Vec<f64> {
        match &self.opponent {
            Opponent::SelfPlay => theta_t.probs(),
            Opponent::Fixed(mu) => mu.probs(),
        }
    }

    /// `s_hat_i` for every response given the current policy.
    fn scores(&self, theta_t: &PolicyDistribution, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        check_dims(theta_t.n(), self.n())?;
        let mu = self.opponent_probs(theta_t);
        let n = self.n();
        match self.mode {
            ScoreMode::Exact => (0..n).map(|i| expected_score(&self.matrix, i, &mu)).collect(),
            ScoreMode::Sampled { k, .. } => {
                let dist = WeightedIndex::new(&mu)
                    .map_err(|e| PrefError::InvalidArgument(format!("opponent policy: {e}")))?;
                let sample: Vec<usize> = (0..k).map(|_| dist.sample(rng)).collect();
                (0..n).map(|i| empirical_score(&self.matrix, i, &sample)).collect()
            }
        }
    }

    /// Empirical scores against the opponent induced by `theta_t`.
    ///
    /// Sampled mode draws from a generator seeded with the game's seed, so
    /// repeated calls are identical.
    pub fn empirical_scores(&self, theta_t: &PolicyDistribution) -> Result<Vec<f64>> {
        self.scores(theta_t, &mut self.rng())
    }

    fn rng(&self) -> ChaCha8Rng {
        match self.mode {
            ScoreMode::Sampled { seed, .. } => ChaCha8Rng::seed_from_u64(seed),
            ScoreMode::Exact => ChaCha8Rng::seed_from_u64(0),
        }
    }
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(PrefError::DimensionMismatch { left, right });
    }
    Ok(())
}

/// Mean of row `i` over a multiset of opponent indices.
pub fn empirical_score(m: &ScoreMatrix, i: usize, sample: &[usize]) -> Result<f64> {
    if sample.is_empty() {
        return Err(PrefError::Empty("opponent sample"));
    }
    let n = m.n();
    if let Some(&bad) = sample.iter().chain([&i]).find(|&&j| j >= n) {
        return Err(PrefError::InvalidArgument(format!(
            "response index {bad} out of range for {n} responses"
        )));
    }
    Ok(sample.iter().map(|&j| m.get(i, j)).sum::<f64>() / sample.len() as f64)
}

/// `sum_j w_j M_ij`.
pub fn expected_score(m: &ScoreMatrix, i: usize, weights: &[f64]) -> Result<f64> {
    check_dims(weights.len(), m.n())?;
    if i >= m.n() {
        return Err(PrefError::InvalidArgument(format!(
            "response index {i} out of range for {} responses",
            m.n()
        )));
    }
    Ok(m.row(i).iter().zip(weights).map(|(s, w)| s * w).sum())
}

/// Squared-error objective for fixed targets `s_hat`.
pub fn gpo_objective(
    theta: &PolicyDistribution,
    theta_t: &PolicyDistribution,
    s_hat: &[f64],
    beta: f64,
) -> Result<f64> {
    check_dims(theta.n(), theta_t.n())?;
    check_dims(s_hat.len(), theta.n())?;
    let lp = theta.log_probs();
    let lt = theta_t.log_probs();
    let w = theta_t.probs();
    Ok((0..theta.n())
        .map(|y| {
            let e = lp[y] - lt[y] - s_hat[y] / beta;
            w[y] * e * e
        })
        .sum())
}

/// Objective with targets computed from `theta_t` under `game`.
pub fn gpo_loss(theta: &PolicyDistribution, theta_t: &PolicyDistribution, game: &GameSpec) -> Result<f64> {
    check_dims(theta.n(), theta_t.n())?;
    let s_hat = game.empirical_scores(theta_t)?;
    gpo_objective(theta, theta_t, &s_hat, game.beta)
}

/// Gradient of [`gpo_objective`] with respect to the logits.
pub fn gpo_objective_grad(
    theta: &PolicyDistribution,
    theta_t: &PolicyDistribution,
    s_hat: &[f64],
    beta: f64,
) -> Result<Vec<f64>> {
    check_dims(theta.n(), theta_t.n())?;
    check_dims(s_hat.len(), theta.n())?;
    let lp = theta.log_probs();
    let p = theta.probs();
    let lt = theta_t.log_probs();
    let w = theta_t.probs();
    let we: Vec<f64> = (0..theta.n())
        .map(|y| w[y] * (lp[y] - lt[y] - s_hat[y] / beta))
        .collect();
    let total: f64 = we.iter().sum();
    Ok((0..theta.n()).map(|z| 2.0 * (we[z] - p[z] * total)).collect())
}

/// Inner minimization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InnerConfig {
    pub max_steps: usize,
    pub grad_tol: f64,
    /// Sufficient-decrease constant for the backtracking line search.
    pub armijo: f64,
    pub initial_step: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_steps: 10_000,
            grad_tol: 1e-8,
            armijo: 1e-4,
            initial_step: 1.0,
        }
    }
}

/// Result of one outer iteration.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub policy: PolicyDistribution,
    pub scores: Vec<f64>,
    /// Objective at `theta = theta_t`.
    pub loss_before: f64,
    pub loss: f64,
    pub grad_norm: f64,
    pub inner_steps: usize,
    /// `beta * ln sum_y pi_t(y) exp(s_hat_y / beta)`.
    pub log_z: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn step_with(
    theta_t: &PolicyDistribution,
    game: &GameSpec,
    inner: &InnerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<StepOutcome> {
    let s_hat = game.scores(theta_t, rng)?;
    let beta = game.beta;
    let loss_before = gpo_objective(theta_t, theta_t, &s_hat, beta)?;
    if !loss_before.is_finite() {
        return Err(PrefError::NonFinite("GPO loss"));
    }
    let mut theta = theta_t.clone();
    let mut loss = loss_before;
    let mut grad = gpo_objective_grad(&theta, theta_t, &s_hat, beta)?;
    let mut gnorm = norm(&grad);
    let mut eta = inner.initial_step;
    let mut steps = 0;
    while steps < inner.max_steps && gnorm >= inner.grad_tol {
        let g2 = gnorm * gnorm;
        let mut accepted = None;
        while eta > 1e-30 {
            let cand: Vec<f64> = theta.logits.iter().zip(&grad).map(|(t, g)| t - eta * g).collect();
            if let Ok(cand) = PolicyDistribution::new(cand) {
                let l = gpo_objective(&cand, theta_t, &s_hat, beta)?;
                if l <= loss - inner.armijo * eta * g2 {
                    accepted = Some((cand, l));
                    break;
                }
            }
            eta *= 0.5;
        }
        let Some((cand, l)) = accepted else { break };
        theta = cand;
        loss = l;
        steps += 1;
        grad = gpo_objective_grad(&theta, theta_t, &s_hat, beta)?;
        gnorm = norm(&grad);
        eta = (eta * 2.0).min(1e6);
    }
    if !loss.is_finite() {
        return Err(PrefError::NonFinite("GPO loss"));
    }
    let w = theta_t.probs();
    let m = s_hat.iter().map(|s| s / beta).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = w.iter().zip(&s_hat).map(|(wi, s)| wi * (s / beta - m).exp()).sum();
    Ok(StepOutcome {
        policy: theta,
        scores: s_hat,
        loss_before,
        loss,
        grad_norm: gnorm,
        inner_steps: steps,
        log_z: beta * (m + z.ln()),
    })
}

/// One GPO update from `theta_t`.
pub fn gpo_step(theta_t: &PolicyDistribution, game: &GameSpec, inner: &InnerConfig) -> Result<StepOutcome> {
    step_with(theta_t, game, inner, &mut game.rng())
}

/// Trajectory of a GPO run.
#[derive(Debug, Clone, Serialize)]
pub struct GpoReport {
    pub beta: f64,
    pub mode: ScoreMode,
    /// Policy probabilities, `T + 1` entries starting with `theta_0`.
    #[serde(rename = "probs")]
    pub snapshots: Vec<Vec<f64>>,
    /// Minimized objective per iteration (`T` entries).
    pub losses: Vec<f64>,
    pub log_z: Vec<f64>,
    pub inner_steps: Vec<usize>,
    pub grad_norms: Vec<f64>,
    /// `von_neumann_check` of every snapshot (`T + 1` entries).
    pub min_win_rates: Vec<f64>,
    pub final_min_win_rate: f64,
    pub final_witness: usize,
}

impl GpoReport {
    pub fn final_probs(&self) -> &[f64] {
        self.snapshots.last().expect("at least one snapshot")
    }
}

/// Run `iterations` GPO updates from `theta_0`.
pub fn gpo_run(
    theta_0: &PolicyDistribution,
    game: &GameSpec,
    iterations: usize,
    inner: &InnerConfig,
) -> Result<(PolicyDistribution, GpoReport)> {
    if iterations == 0 {
        return Err(PrefError::InvalidArgument("iterations must be at least 1".into()));
    }
    check_dims(theta_0.n(), game.n())?;
    let mut rng = game.rng();
    let mut theta = theta_0.clone();
    let (w0, _) = von_neumann_check(&theta, &game.matrix, game.beta)?;
    let mut report = GpoReport {
        beta: game.beta,
        mode: game.mode,
        snapshots: vec![theta.probs()],
        losses: Vec::with_capacity(iterations),
        log_z: Vec::with_capacity(iterations),
        inner_steps: Vec::with_capacity(iterations),
        grad_norms: Vec::with_capacity(iterations),
        min_win_rates: vec![w0],
        final_min_win_rate: w0,
        final_witness: 0,
    };
    for _ in 0..iterations {
        let out = step_with(&theta, game, inner, &mut rng)?;
        theta = out.policy;
        let (w, _) = von_neumann_check(&theta, &game.matrix, game.beta)?;
        report.snapshots.push(theta.probs());
        report.losses.push(out.loss);
        report.log_z.push(out.log_z);
        report.inner_steps.push(out.inner_steps);
        report.grad_norms.push(out.grad_norm);
        report.min_win_rates.push(w);
    }
    let (w, j) = von_neumann_check(&theta, &game.matrix, game.beta)?;
    report.final_min_win_rate = w;
    report.final_witness = j;
    Ok((theta, report))
}

/// Worst-case win probability of `pi` and the pure opponent attaining it.
pub fn von_neumann_check(pi: &PolicyDistribution, m: &ScoreMatrix, beta: f64) -> Result<(f64, usize)> {
    check_dims(pi.n(), m.n())?;
    win_rate_min(&pi.probs(), m, beta)
}

fn win_rate_min(p: &[f64], m: &ScoreMatrix, beta: f64) -> Result<(f64, usize)> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(PrefError::InvalidBeta(beta));
    }
    let n = m.n();
    let mut best = (f64::INFINITY, 0);
    for j in 0..n {
        let v: f64 = (0..n).map(|i| p[i] * sigmoid(m.get(i, j) / beta)).sum();
        if v < best.0 {
            best = (v, j);
        }
    }
    Ok(best)
}

/// Equilibrium solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumConfig {
    pub max_iterations: usize,
    /// Stop once the averaged strategy's worst-case win rate is within this of 1/2.
    pub tolerance: f64,
    /// Accept at the iteration cap if within this of 1/2.
    pub accept: f64,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1_000_000,
            tolerance: 1e-5,
            accept: 1e-3,
        }
    }
}

/// Symmetric equilibrium of the win-probability game `sigma(M / beta)`.
pub fn solve_equilibrium(m: &ScoreMatrix, beta: f64) -> Result<PolicyDistribution> {
    solve_equilibrium_with(m, beta, &EquilibriumConfig::default())
}

/// Regret matching (with the `+` truncation, alternating updates and
/// linearly weighted averaging) for both players of the constant-sum game;
/// the averaged row strategy is returned.
pub fn solve_equilibrium_with(m: &ScoreMatrix, beta: f64, cfg: &EquilibriumConfig) -> Result<PolicyDistribution> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(PrefError::InvalidBeta(beta));
    }
    let n = m.n();
    if n == 0 {
        return Err(PrefError::Empty("score matrix"));
    }
    let a: Vec<f64> = (0..n * n).map(|idx| sigmoid(m.get(idx / n, idx % n) / beta)).collect();
    let strategy = |r: &[f64]| -> Vec<f64> {
        let total: f64 = r.iter().sum();
        if total > 0.0 {
            r.iter().map(|x| x / total).collect()
        } else {
            vec![1.0 / n as f64; n]
        }
    };
    let mut reg_row = vec![0.0; n];
    let mut reg_col = vec![0.0; n];
    let mut avg = vec![0.0; n];
    let mut gap = f64::INFINITY;
    for t in 1..=cfg.max_iterations {
        // row player maximizes A, column player minimizes A
        let y = strategy(&reg_col);
        let u_row: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i * n + j] * y[j]).sum()).collect();
        let x = strategy(&reg_row);
        let v_row: f64 = x.iter().zip(&u_row).map(|(p, u)| p * u).sum();
        for i in 0..n {
            reg_row[i] = (reg_row[i] + u_row[i] - v_row).max(0.0);
        }
        let x = strategy(&reg_row);
        let u_col: Vec<f64> = (0..n).map(|j| -(0..n).map(|i| x[i] * a[i * n + j]).sum::<f64>()).collect();
        let v_col: f64 = y.iter().zip(&u_col).map(|(p, u)| p * u).sum();
        for j in 0..n {
            reg_col[j] = (reg_col[j] + u_col[j] - v_col).max(0.0);
        }
        for i in 0..n {
            avg[i] += t as f64 * x[i];
        }
        if t % 10 == 0 || t == cfg.max_iterations {
            let total: f64 = avg.iter().sum();
            let p: Vec<f64> = avg.iter().map(|v| v / total).collect();
            gap = 0.5 - win_rate_min(&p, m, beta)?.0;
            if gap <= cfg.tolerance {
                return PolicyDistribution::from_probs(&p);
            }
        }
    }
    if gap <= cfg.accept {
        let total: f64 = avg.iter().sum();
        let p: Vec<f64> = avg.iter().map(|v| v / total).collect();
        return PolicyDistribution::from_probs(&p);
    }
    Err(PrefError::NoConvergence {
        what: "regret matching",
        iterations: cfg.max_iterations,
    })
}

/// `[[0, 1, -1], [-1, 0, 1], [1, -1, 0]]`: each response beats the next one cyclically.
pub fn rock_paper_scissors() -> ScoreMatrix {
    ScoreMatrix::new(
        vec!["paper".into(), "rock".into(), "scissors".into()],
        vec![vec![0.0, 1.0, -1.0], vec![-1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]],
    )
    .expect("skew by construction")
}

/// `M_ij = r_i - r_j`.
pub fn transitive_matrix(rewards: &[f64]) -> Result<ScoreMatrix> {
    ScoreMatrix::from_rows(
        rewards
            .iter()
            .map(|ri| rewards.iter().map(|rj| ri - rj).collect())
            .collect(),
    )
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero(n: usize) -> ScoreMatrix {
        ScoreMatrix::from_rows(vec![vec![0.0; n]; n]).unwrap()
    }

    #[test]
    fn empirical_score_examples() {
        let z = zero(3);
        assert_eq!(empirical_score(&z, 1, &[0, 2, 2]).unwrap(), 0.0);
        let rps = rock_paper_scissors();
        for i in 0..3 {
            assert_eq!(expected_score(&rps, i, &[1.0 / 3.0; 3]).unwrap().abs(), 0.0);
        }
        let mean: f64 = (0..3)
            .map(|i| empirical_score(&rps, i, &[0, 1, 2]).unwrap())
            .sum::<f64>()
            / 3.0;
        assert_eq!(mean, 0.0);
        assert!(matches!(empirical_score(&rps, 0, &[]), Err(PrefError::Empty(_))));
        assert!(empirical_score(&rps, 0, &[3]).is_err());
    }

    #[test]
    fn loss_zero_cases() {
        let g = GameSpec::exact(zero(4), 1.0).unwrap();
        let t = PolicyDistribution::new(vec![0.3, -1.0, 2.0, 0.0]).unwrap();
        assert_eq!(gpo_loss(&t, &t, &g).unwrap(), 0.0);
        let g = GameSpec::exact(rock_paper_scissors(), 1.0).unwrap();
        let u = PolicyDistribution::uniform(3).unwrap();
        assert!(gpo_loss(&u, &u, &g).unwrap() < 1e-30);
        let short = PolicyDistribution::uniform(2).unwrap();
        assert!(matches!(
            gpo_loss(&short, &u, &g),
            Err(PrefError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_matrix_step_is_identity() {
        let g = GameSpec::exact(zero(3), 0.5).unwrap();
        let t = PolicyDistribution::from_probs(&[0.2, 0.3, 0.5]).unwrap();
        let out = gpo_step(&t, &g, &InnerConfig::default()).unwrap();
        for (a, b) in out.policy.probs().iter().zip(t.probs()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(out.inner_steps, 0);
    }

    #[test]
    fn uniform_is_fixed_point_on_rps() {
        let g = GameSpec::exact(rock_paper_scissors(), 1.0).unwrap();
        let u = PolicyDistribution::uniform(3).unwrap();
        let (_, rep) = gpo_run(&u, &g, 5, &InnerConfig::default()).unwrap();
        assert_eq!(rep.snapshots.len(), 6);
        assert_eq!(rep.losses.len(), 5);
        assert_eq!(rep.min_win_rates.len(), 6);
        for s in &rep.snapshots {
            for p in s {
                assert!((p - 1.0 / 3.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn von_neumann_examples() {
        let rps = rock_paper_scissors();
        let u = PolicyDistribution::uniform(3).unwrap();
        let (v, _) = von_neumann_check(&u, &rps, 1.0).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let pure = PolicyDistribution::from_probs(&[1.0, 0.0, 0.0]).unwrap();
        let (v, j) = von_neumann_check(&pure, &rps, 2.0).unwrap();
        assert_eq!(j, 2);
        assert!((v - sigmoid(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_examples() {
        let rps = rock_paper_scissors();
        let eq = solve_equilibrium(&rps, 1.0).unwrap();
        assert!(total_variation(&eq.probs(), &[1.0 / 3.0; 3]) < 1e-3);
        let tr = transitive_matrix(&[0.0, 2.0, -1.0, 0.5]).unwrap();
        let eq = solve_equilibrium(&tr, 1.0).unwrap();
        assert!(eq.probs()[1] > 0.99, "{:?}", eq.probs());
    }

    #[test]
    fn sampled_mode_is_seeded() {
        let g = GameSpec::new(rock_paper_scissors(), 1.0, ScoreMode::Sampled { k: 8, seed: 3 }).unwrap();
        let t = PolicyDistribution::from_probs(&[0.6, 0.3, 0.1]).unwrap();
        let (_, a) = gpo_run(&t, &g, 4, &InnerConfig::default()).unwrap();
        let (_, b) = gpo_run(&t, &g, 4, &InnerConfig::default()).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        assert!(GameSpec::new(rock_paper_scissors(), 1.0, ScoreMode::Sampled { k: 0, seed: 3 }).is_err());
    }

    #[test]
    fn fixed_opponent_targets_use_opponent() {
        let mu = PolicyDistribution::from_probs(&[1.0, 0.0, 0.0]).unwrap();
        let g = GameSpec::exact(rock_paper_scissors(), 1.0)
            .unwrap()
            .with_opponent(Opponent::Fixed(mu))
            .unwrap();
        let s = g.empirical_scores(&PolicyDistribution::uniform(3).unwrap()).unwrap();
        assert!((s[0]).abs() < 1e-12 && (s[1] + 1.0).abs() < 1e-12 && (s[2] - 1.0).abs() < 1e-12);
    }
}
