//! Scoring kernel: the skew-symmetric preference operator, the bilinear
//! preference score and its logistic link.
//!
//! Embeddings use an interleaved block layout: block `l` occupies coordinates
//! `(2l, 2l + 1)`. The operator is the block-diagonal matrix with `k` copies
//! of `[[0, -1], [1, 0]]`; it is never materialized on the scoring path, so a
//! score costs `O(k)`.

use serde::{Deserialize, Serialize};
use std::ops::Neg;

use crate::error::{PrefError, Result};

/// Norm tolerance for vectors flagged as normalized.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// A preference representation in `R^{2k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    coords: Vec<f64>,
    normalized: bool,
}

impl EmbeddingVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || !coords.len().is_multiple_of(2) {
            return Err(PrefError::OddEmbedding(coords.len()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(PrefError::NonFinite("embedding"));
        }
        Ok(Self {
            coords,
            normalized: false,
        })
    }

    /// Build a `k = 1` unit vector at angle `theta`.
    pub fn from_angle(theta: f64) -> Self {
        Self {
            coords: vec![theta.cos(), theta.sin()],
            normalized: true,
        }
    }

    pub fn k(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// L2-normalized copy. Fails on a zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(PrefError::InvalidArgument(
                "cannot normalize a zero-norm embedding".into(),
            ));
        }
        Ok(Self {
            coords: self.coords.iter().map(|c| c / n).collect(),
            normalized: true,
        })
    }
}

/// Nonnegative per-block scales `lambda_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleVector {
    lambdas: Vec<f64>,
}

impl ScaleVector {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(PrefError::Empty("scale vector"));
        }
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(PrefError::NonFinite("scale vector"));
        }
        if let Some(l) = lambdas.iter().find(|l| **l < 0.0) {
            return Err(PrefError::InvalidArgument(format!(
                "scales must be nonnegative, got {l}"
            )));
        }
        Ok(Self { lambdas })
    }

    /// The unscaled operator.
    pub fn ones(k: usize) -> Self {
        Self {
            lambdas: vec![1.0; k],
        }
    }

    pub fn k(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
}

/// Log-odds that the first response beats the second.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PreferenceScore(pub f64);

impl PreferenceScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl Neg for PreferenceScore {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

/// Canonical block-diagonal skew operator with `k` blocks `[[0,-1],[1,0]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkewOperator {
    k: usize,
}

impl SkewOperator {
    pub fn new(k: usize) -> Self {
        Self { k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        2 * self.k
    }

    /// Dense row-major `2k x 2k` matrix. Only used for operator-algebra checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut m = vec![vec![0.0; n]; n];
        for l in 0..self.k {
            m[2 * l][2 * l + 1] = -1.0;
            m[2 * l + 1][2 * l] = 1.0;
        }
        m
    }
}

fn check_dims(v: &EmbeddingVector, scales: &ScaleVector) -> Result<()> {
    if v.k() != scales.k() {
        return Err(PrefError::DimensionMismatch {
            left: v.k(),
            right: scales.k(),
        });
    }
    Ok(())
}

/// `v_i^T D R D v_j` with `D = blockdiag(sqrt(lambda_l) I_2)`.
///
/// Each block contributes `lambda_l * (v_i[2l+1] v_j[2l] - v_i[2l] v_j[2l+1])`;
/// swapping the arguments negates every summand exactly, so antisymmetry
/// holds bit-for-bit.
pub fn skew_score(
    vi: &EmbeddingVector,
    vj: &EmbeddingVector,
    scales: &ScaleVector,
) -> Result<PreferenceScore> {
    if vi.k() != vj.k() {
        return Err(PrefError::DimensionMismatch {
            left: vi.k(),
            right: vj.k(),
        });
    }
    check_dims(vi, scales)?;
    Ok(PreferenceScore(raw_skew_score(
        vi.coords(),
        vj.coords(),
        scales.lambdas(),
    )))
}

/// Unchecked kernel over raw slices. Lengths must agree (`a.len() == 2 * lambdas.len()`).
#[inline]
pub fn raw_skew_score(a: &[f64], b: &[f64], lambdas: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    debug_assert_eq!(a.len(), 2 * lambdas.len());
    lambdas
        .iter()
        .enumerate()
        .map(|(l, lam)| lam * (a[2 * l + 1] * b[2 * l] - a[2 * l] * b[2 * l + 1]))
        .sum()
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln sigma(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `sigma(s / beta)`.
pub fn preference_prob(s: PreferenceScore, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(PrefError::InvalidBeta(beta));
    }
    Ok(sigmoid(s.0 / beta))
}

/// `D R D v`.
pub fn apply_operator(v: &EmbeddingVector, scales: &ScaleVector) -> Result<EmbeddingVector> {
    check_dims(v, scales)?;
    let c = v.coords();
    let mut out = vec![0.0; c.len()];
    for (l, lam) in scales.lambdas().iter().enumerate() {
        out[2 * l] = -lam * c[2 * l + 1];
        out[2 * l + 1] = lam * c[2 * l];
    }
    EmbeddingVector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(c: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn self_score_is_zero() {
        let v = ev(&[0.3, -1.2, 4.0, 0.5]);
        assert_eq!(skew_score(&v, &v, &ScaleVector::ones(2)).unwrap().0, 0.0);
    }

    #[test]
    fn basis_vectors_score_one() {
        // e_2 is a quarter turn ahead of e_1
        let s = skew_score(&ev(&[0.0, 1.0]), &ev(&[1.0, 0.0]), &ScaleVector::ones(1)).unwrap();
        assert_eq!(s.0, 1.0);
        let s = skew_score(&ev(&[1.0, 0.0]), &ev(&[0.0, 1.0]), &ScaleVector::ones(1)).unwrap();
        assert_eq!(s.0, -1.0);
    }

    #[test]
    fn angles_give_sine_of_difference() {
        for &(a, b) in &[(0.3, 1.9), (2.5, -0.7), (0.0, std::f64::consts::FRAC_PI_2)] {
            let s = skew_score(
                &EmbeddingVector::from_angle(a),
                &EmbeddingVector::from_angle(b),
                &ScaleVector::ones(1),
            )
            .unwrap();
            assert!((s.0 - (a - b).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_k_is_rejected() {
        let err = skew_score(&ev(&[1.0, 0.0]), &ev(&[1.0, 0.0, 0.0, 1.0]), &ScaleVector::ones(1))
            .unwrap_err();
        assert!(err.to_string().contains("k=1 vs k=2"), "{err}");
        assert!(apply_operator(&ev(&[1.0, 0.0]), &ScaleVector::ones(3)).is_err());
    }

    #[test]
    fn prob_examples() {
        assert_eq!(preference_prob(PreferenceScore(0.0), 1.0).unwrap(), 0.5);
        assert!((preference_prob(PreferenceScore(3f64.ln()), 1.0).unwrap() - 0.75).abs() < 1e-15);
        let p = preference_prob(PreferenceScore(1.0), 0.1).unwrap();
        assert!((p - 0.999_954_602_131_297_5).abs() < 1e-15);
        assert!(preference_prob(PreferenceScore(1.0), 0.0).is_err());
        assert!(preference_prob(PreferenceScore(1.0), -2.0).is_err());
    }

    #[test]
    fn sigmoid_extremes_do_not_overflow() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!(log_sigmoid(-800.0).is_finite());
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        let tail = softplus(-40.0);
        assert!(tail > 0.0 && tail < 1e-12);
        assert!((softplus(5.0) - 5.006_715_348_489_118).abs() < 1e-12);
    }

    #[test]
    fn operator_rotates_blocks() {
        let out = apply_operator(&ev(&[1.0, 0.0]), &ScaleVector::ones(1)).unwrap();
        assert_eq!(out.coords(), &[0.0, 1.0]);
        let out = apply_operator(&ev(&[2.0, -3.0]), &ScaleVector::ones(1)).unwrap();
        assert_eq!(out.coords(), &[3.0, 2.0]);
    }

    #[test]
    fn dense_operator_matches_definition() {
        let r = SkewOperator::new(2).to_dense();
        let expect = [
            [0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, 1.0, 0.0],
        ];
        for i in 0..4 {
            assert_eq!(r[i].as_slice(), &expect[i]);
        }
    }

    #[test]
    fn invalid_vectors_rejected() {
        assert!(EmbeddingVector::new(vec![1.0, 2.0, 3.0]).is_err());
        assert!(EmbeddingVector::new(vec![]).is_err());
        assert!(EmbeddingVector::new(vec![f64::NAN, 0.0]).is_err());
        assert!(ScaleVector::new(vec![-0.1]).is_err());
        assert!(ev(&[0.0, 0.0]).normalized().is_err());
    }

    fn vec_and_scales() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..6).prop_flat_map(|k| {
            (
                prop::collection::vec(-10.0..10.0f64, 2 * k),
                prop::collection::vec(-10.0..10.0f64, 2 * k),
                prop::collection::vec(0.0..5.0f64, k),
            )
        })
    }

    proptest! {
        #[test]
        fn antisymmetry_is_exact((a, b, l) in vec_and_scales()) {
            let (a, b, l) = (ev(&a), ev(&b), ScaleVector::new(l).unwrap());
            let s_ab = skew_score(&a, &b, &l).unwrap();
            let s_ba = skew_score(&b, &a, &l).unwrap();
            prop_assert_eq!(s_ab.0, -s_ba.0);
        }

        #[test]
        fn magnitude_preserved((a, _b, _l) in vec_and_scales()) {
            let v = ev(&a);
            let out = apply_operator(&v, &ScaleVector::ones(v.k())).unwrap();
            prop_assert!((out.norm() - v.norm()).abs() < 1e-12);
        }

        #[test]
        fn score_equals_operator_inner_product((a, b, l) in vec_and_scales()) {
            // <D R D v_j, v_i> = v_i^T D R D v_j
            let (a, b, l) = (ev(&a), ev(&b), ScaleVector::new(l).unwrap());
            let rb = apply_operator(&b, &l).unwrap();
            let dot: f64 = a.coords().iter().zip(rb.coords()).map(|(x, y)| x * y).sum();
            let s = skew_score(&a, &b, &l).unwrap().0;
            prop_assert!((s - dot).abs() < 1e-10 * (1.0 + s.abs()));
        }

        #[test]
        fn prob_complement(s in -30.0..30.0f64, beta in 0.05..5.0f64) {
            let s = s * beta;
            let p = preference_prob(PreferenceScore(s), beta).unwrap();
            let q = preference_prob(PreferenceScore(-s), beta).unwrap();
            prop_assert!((p + q - 1.0).abs() < 1e-12);
        }

        #[test]
        fn bt_consistency(r in prop::collection::vec(-5.0..5.0f64, 2), c in -3.0..3.0f64) {
            // reward in the second slot of the block, shared constant in the first
            let vi = ev(&[c, r[0]]);
            let vj = ev(&[c, r[1]]);
            let s = skew_score(&vi, &vj, &ScaleVector::ones(1)).unwrap().0;
            prop_assert!((s - c * (r[0] - r[1])).abs() < 1e-12);
        }
    }
}
