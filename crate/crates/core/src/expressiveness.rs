//! Constructive expressiveness results.
//!
//! Every real skew-symmetric matrix `P` is the score matrix of some set of
//! embeddings under the canonical operator. Three constructions are provided:
//!
//! - [`construct_real`]: `k x k` matrix, `k` vectors in `R^{2k}` built from
//!   standard basis vectors and halved rows of `P`. Exact up to rounding.
//! - [`construct_complex`]: the same data read as complex vectors in `C^k`;
//!   scores are `Im <v_i, v_j>`.
//! - [`construct_spectral`]: even `2k x 2k` matrix, `P = U Lambda U^T` with
//!   `Lambda = blockdiag(lambda_l J)`; embeddings are the rows of `U D`,
//!   `D = blockdiag(sqrt(lambda_l) I_2)`.
//!
//! [`canonical_check`] verifies that a dense operator is skew and orthogonal,
//! i.e. of the form `U J U^T`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{PrefError, Result};
use crate::models::ScoreMatrix;
use crate::prefcore::{raw_skew_score, EmbeddingVector, SkewOperator};

/// Square skew-symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SkewMatrix {
    pub const TOL: f64 = 1e-12;

    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_tolerance(rows, Self::TOL)
    }

    /// Validate skew-symmetry (including a zero diagonal) within `tol`.
    pub fn with_tolerance(rows: Vec<Vec<f64>>, tol: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(PrefError::Empty("matrix"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(PrefError::NotSquare {
                rows: n,
                cols: r.len(),
            });
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PrefError::NonFinite("matrix"));
        }
        let (mut worst, mut at) = (0.0, (0, 0));
        for i in 0..n {
            for j in i..n {
                let a = (values[i * n + j] + values[j * n + i]).abs();
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
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

impl TryFrom<&ScoreMatrix> for SkewMatrix {
    type Error = PrefError;

    fn try_from(m: &ScoreMatrix) -> Result<Self> {
        Self::with_tolerance(m.to_rows(), ScoreMatrix::SKEW_TOL)
    }
}

/// Embeddings realizing a matrix under the unscaled canonical operator.
#[derive(Debug, Clone)]
pub struct RealConstruction {
    pub embeddings: Vec<EmbeddingVector>,
    pub operator: SkewOperator,
}

/// Basis-plus-half-row construction.
///
/// With `a_i = e_i` and `b_i = P_i / 2`, block `l` of `v_i` is
/// `(a_i[l], b_i[l])`, so `v_i^T R v_j = b_i[j] - b_j[i] = P_ij`. The stacked
/// form `[a_i; b_i]` is the same vector under the permutation that
/// interleaves the two halves.
pub fn construct_real(p: &SkewMatrix) -> RealConstruction {
    let k = p.n();
    let embeddings = (0..k)
        .map(|i| {
            let mut c = vec![0.0; 2 * k];
            c[2 * i] = 1.0;
            for (l, pil) in p.row(i).iter().enumerate() {
                c[2 * l + 1] = 0.5 * pil;
            }
            EmbeddingVector::new(c).expect("finite even-length construction")
        })
        .collect();
    RealConstruction {
        embeddings,
        operator: SkewOperator::new(k),
    }
}

/// Pairwise `v_i^T D R D v_j` for a set of embeddings and block scales.
pub fn reconstruct(embeddings: &[EmbeddingVector], lambdas: &[f64]) -> Vec<Vec<f64>> {
    embeddings
        .iter()
        .map(|a| {
            embeddings
                .iter()
                .map(|b| raw_skew_score(a.coords(), b.coords(), lambdas))
                .collect()
        })
        .collect()
}

/// Largest entrywise deviation between `p` and `rows`.
pub fn max_abs_diff(p: &SkewMatrix, rows: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            worst = worst.max((p.get(i, j) - v).abs());
        }
    }
    worst
}

/// A vector in `C^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEmbedding {
    pub coords: Vec<Complex64>,
}

impl ComplexEmbedding {
    pub fn re(&self) -> Vec<f64> {
        self.coords.iter().map(|z| z.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.coords.iter().map(|z| z.im).collect()
    }

    /// `<self, other> = sum_l self_l * conj(other_l)`.
    ///
    /// Conjugate-linear in the second argument; with this convention
    /// `Im <e^{i a}, e^{i b}> = sin(a - b)`, matching the real score.
    pub fn inner(&self, other: &ComplexEmbedding) -> Complex64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    /// Interleave `(re_l, im_l)` into the real block layout.
    pub fn to_real(&self) -> EmbeddingVector {
        EmbeddingVector::new(self.coords.iter().flat_map(|z| [z.re, z.im]).collect())
            .expect("finite complex embedding")
    }
}

/// `v_i = e_i + i P_i / 2`, so that `Im <v_i, v_j> = P_ij`.
pub fn construct_complex(p: &SkewMatrix) -> Vec<ComplexEmbedding> {
    let k = p.n();
    (0..k)
        .map(|i| ComplexEmbedding {
            coords: (0..k)
                .map(|l| Complex64::new(if l == i { 1.0 } else { 0.0 }, 0.5 * p.get(i, l)))
                .collect(),
        })
        .collect()
}

/// `Im <v_i, v_j>` for all pairs.
pub fn reconstruct_complex(embeddings: &[ComplexEmbedding]) -> Vec<Vec<f64>> {
    embeddings
        .iter()
        .map(|a| embeddings.iter().map(|b| a.inner(b).im).collect())
        .collect()
}

/// `P = U Lambda U^T` in canonical block form.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralDecomposition {
    /// Orthogonal `2k x 2k` matrix, row-major. Columns `(2l, 2l+1)` span block `l`.
    pub u: Vec<f64>,
    /// Block scales, descending, all `>= 0`.
    pub lambdas: Vec<f64>,
    /// Rows of `U D`; reproduce `P` under the unscaled operator.
    #[serde(skip)]
    pub embeddings: Vec<EmbeddingVector>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        2 * self.lambdas.len()
    }

    /// `max |P - V R V^T|`.
    pub fn residual(&self, p: &SkewMatrix) -> f64 {
        max_abs_diff(p, &reconstruct(&self.embeddings, &vec![1.0; self.lambdas.len()]))
    }

    /// `max |U^T U - I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|r| self.u[r * n + a] * self.u[r * n + b]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues and eigenvectors (column `j` of the row-major `n x n`
/// output pairs with eigenvalue `j`), unsorted.
pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s
    };
    let target = total * 1e-30;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= target {
            let vals = (0..n).map(|i| a[i * n + i]).collect();
            return Ok((vals, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if off(&a) <= target {
        let vals = (0..n).map(|i| a[i * n + i]).collect();
        return Ok((vals, v));
    }
    Err(PrefError::NoConvergence {
        what: "Jacobi eigensolver",
        iterations: JACOBI_MAX_SWEEPS,
    })
}

/// Scales below this are treated as exactly zero.
pub const ZERO_LAMBDA: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Remove the components along `basis` (two passes of Gram-Schmidt).
fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let d = dot(v, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= d * qi;
            }
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
    n
}

/// Pick the candidate with the largest component outside `basis`.
fn best_residual(candidates: &[Vec<f64>], basis: &[Vec<f64>]) -> Option<(Vec<f64>, f64)> {
    candidates
        .iter()
        .map(|c| {
            let mut r = c.clone();
            project_out(&mut r, basis);
            let n = dot(&r, &r).sqrt();
            (r, n)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Canonical block decomposition of an even-dimensional skew matrix.
///
/// `S = P P^T` is symmetric PSD with each `lambda_l^2` appearing twice.
/// Eigenvectors of `S` are grouped into clusters of equal eigenvalue; inside
/// a cluster each new direction `u` is paired with `w = P u / |P u|`, which
/// stays in the cluster and orients the block so that `P u = lambda w`.
/// The null space is filled with an arbitrary orthonormal basis.
pub fn construct_spectral(p: &SkewMatrix) -> Result<SpectralDecomposition> {
    let n = p.n();
    if !n.is_multiple_of(2) {
        return Err(PrefError::OddDimension(n));
    }
    let k = n / 2;
    // S = P P^T
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = dot(p.row(i), p.row(j));
        }
    }
    let (vals, vecs) = symmetric_eigen(&s, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| vals[*b].total_cmp(&vals[*a]));
    let column = |j: usize| -> Vec<f64> { (0..n).map(|r| vecs[r * n + j]).collect() };
    let s_norm = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cluster_tol = 1e-8 * s_norm;

    let apply_p = |u: &[f64]| -> Vec<f64> { (0..n).map(|i| dot(p.row(i), u)).collect() };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut blocks: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::with_capacity(k);

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (vals[order[start]] - vals[order[end]]).abs() <= cluster_tol {
            end += 1;
        }
        let lead = vals[order[start]].max(0.0).sqrt();
        if lead >= ZERO_LAMBDA {
            let cluster: Vec<Vec<f64>> = order[start..end].iter().map(|&j| column(j)).collect();
            while let Some((mut u, r)) = best_residual(&cluster, &basis) {
                if r < 1e-4 || basis.len() + 2 > n {
                    break;
                }
                normalize(&mut u);
                let mut w = apply_p(&u);
                let lambda = dot(&w, &w).sqrt();
                if lambda < ZERO_LAMBDA {
                    break;
                }
                basis.push(u.clone());
                project_out(&mut w, &basis);
                normalize(&mut w);
                basis.push(w.clone());
                blocks.push((lambda, u, w));
            }
        }
        start = end;
    }

    // null space: complete the basis and pair leftovers with lambda = 0
    let all: Vec<Vec<f64>> = (0..n)
        .map(column)
        .chain((0..n).map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        }))
        .collect();
    while blocks.len() < k {
        let mut pair = Vec::with_capacity(2);
        for _ in 0..2 {
            let (mut u, r) = best_residual(&all, &basis).expect("nonempty candidates");
            if r < 1e-8 {
                return Err(PrefError::NoConvergence {
                    what: "null-space completion",
                    iterations: n,
                });
            }
            normalize(&mut u);
            basis.push(u.clone());
            pair.push(u);
        }
        let w = pair.pop().unwrap();
        let u = pair.pop().unwrap();
        blocks.push((0.0, u, w));
    }

    blocks.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut u_mat = vec![0.0; n * n];
    let mut lambdas = Vec::with_capacity(k);
    for (l, (lambda, u, w)) in blocks.iter().enumerate() {
        for r in 0..n {
            u_mat[r * n + 2 * l] = u[r];
            u_mat[r * n + 2 * l + 1] = w[r];
        }
        lambdas.push(if *lambda < ZERO_LAMBDA { 0.0 } else { *lambda });
    }
    let embeddings = (0..n)
        .map(|r| {
            let c = (0..n)
                .map(|col| u_mat[r * n + col] * lambdas[col / 2].sqrt())
                .collect();
            EmbeddingVector::new(c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralDecomposition {
        u: u_mat,
        lambdas,
        embeddings,
    })
}

/// Outcome of [`canonical_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalReport {
    pub canonical: bool,
    /// `max |R + R^T|`
    pub skew_residual: f64,
    /// `max |R^T R - I|`
    pub orthogonality_residual: f64,
    /// `max |R^2 + I|`
    pub square_residual: f64,
    pub violations: Vec<String>,
}

pub const CANONICAL_TOL: f64 = 1e-10;

/// Check that `r` is skew-symmetric and orthogonal (hence `U J U^T`).
pub fn canonical_check(r: &[Vec<f64>]) -> Result<CanonicalReport> {
    let n = r.len();
    if let Some(row) = r.iter().find(|row| row.len() != n) {
        return Err(PrefError::NotSquare {
            rows: n,
            cols: row.len(),
        });
    }
    if n == 0 || !n.is_multiple_of(2) {
        return Err(PrefError::OddDimension(n));
    }
    let (mut skew, mut orth, mut sq) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            skew = skew.max((r[i][j] + r[j][i]).abs());
            let id = if i == j { 1.0 } else { 0.0 };
            let rtr: f64 = (0..n).map(|m| r[m][i] * r[m][j]).sum();
            orth = orth.max((rtr - id).abs());
            let rr: f64 = (0..n).map(|m| r[i][m] * r[m][j]).sum();
            sq = sq.max((rr + id).abs());
        }
    }
    let mut violations = Vec::new();
    if skew >= CANONICAL_TOL {
        violations.push(format!("not skew-symmetric: max |R + R^T| = {skew:e}"));
    }
    if orth >= CANONICAL_TOL {
        violations.push(format!("not magnitude preserving: max |R^T R - I| = {orth:e}"));
    }
    if sq >= CANONICAL_TOL {
        violations.push(format!("R^2 != -I: max |R^2 + I| = {sq:e}"));
    }
    Ok(CanonicalReport {
        canonical: skew < CANONICAL_TOL && orth < CANONICAL_TOL,
        skew_residual: skew,
        orthogonality_residual: orth,
        square_residual: sq,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_constructions() {
        for k in 1..5 {
            let p = SkewMatrix::new(vec![vec![0.0; k]; k]).unwrap();
            let real = construct_real(&p);
            for v in &real.embeddings {
                assert!(v.coords().iter().skip(1).step_by(2).all(|b| *b == 0.0));
            }
            assert_eq!(max_abs_diff(&p, &reconstruct(&real.embeddings, &vec![1.0; k])), 0.0);
            assert!(reconstruct_complex(&construct_complex(&p))
                .iter()
                .flatten()
                .all(|x| *x == 0.0));
        }
        let p = SkewMatrix::new(vec![vec![0.0; 4]; 4]).unwrap();
        let sd = construct_spectral(&p).unwrap();
        assert_eq!(sd.lambdas, vec![0.0, 0.0]);
        assert_eq!(sd.residual(&p), 0.0);
        assert!(sd.orthogonality_residual() < 1e-12);
    }

    #[test]
    fn two_by_two_real_construction() {
        let p = SkewMatrix::new(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let real = construct_real(&p);
        // stacked [a; b]: v1 = [1, 0; 0, 0.5], v2 = [0, 1; -0.5, 0]; interleaved per block
        assert_eq!(real.embeddings[0].coords(), &[1.0, 0.0, 0.0, 0.5]);
        assert_eq!(real.embeddings[1].coords(), &[0.0, -0.5, 1.0, 0.0]);
        let s = raw_skew_score(real.embeddings[0].coords(), real.embeddings[1].coords(), &[1.0, 1.0]);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn unit_modulus_complex_scores_are_sines() {
        for &(a, b) in &[(0.4, 2.2), (-1.0, 0.3), (3.0, 3.0)] {
            let va = ComplexEmbedding {
                coords: vec![Complex64::from_polar(1.0, a)],
            };
            let vb = ComplexEmbedding {
                coords: vec![Complex64::from_polar(1.0, b)],
            };
            assert!((va.inner(&vb).im - (a - b).sin()).abs() < 1e-15);
            let real = raw_skew_score(va.to_real().coords(), vb.to_real().coords(), &[1.0]);
            assert!((real - (a - b).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_block_spectral_is_exact() {
        let lam = 2.5;
        let p = SkewMatrix::new(vec![vec![0.0, -lam], vec![lam, 0.0]]).unwrap();
        let sd = construct_spectral(&p).unwrap();
        assert!((sd.lambdas[0] - lam).abs() < 1e-14);
        assert!(sd.residual(&p) < 1e-14);
    }

    #[test]
    fn repeated_eigenvalues_are_paired() {
        // two identical blocks, rotated by a fixed orthogonal change of basis
        let j = SkewMatrix::new(vec![
            vec![0.0, -1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, -1.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let sd = construct_spectral(&j).unwrap();
        assert!(sd.lambdas.iter().all(|l| (l - 1.0).abs() < 1e-12));
        assert!(sd.residual(&j) < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let err = SkewMatrix::new(vec![vec![0.0, 1.0], vec![0.5, 0.0]]).unwrap_err();
        assert!(matches!(err, PrefError::NotSkew { row: 0, col: 1, .. }));
        assert!(SkewMatrix::new(vec![vec![1.0]]).is_err());
        let odd = SkewMatrix::new(vec![vec![0.0; 3]; 3]).unwrap();
        assert!(matches!(construct_spectral(&odd), Err(PrefError::OddDimension(3))));
        assert!(canonical_check(&vec![vec![0.0; 3]; 3]).is_err());
    }

    #[test]
    fn canonical_operator_passes_and_identity_fails() {
        let r = SkewOperator::new(3).to_dense();
        let rep = canonical_check(&r).unwrap();
        assert!(rep.canonical, "{rep:?}");
        assert!(rep.square_residual < 1e-15);
        let id: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let rep = canonical_check(&id).unwrap();
        assert!(!rep.canonical);
        assert!(rep.violations[0].contains("skew"));
        // skew but not orthogonal
        let rep = canonical_check(&[vec![0.0, -2.0], vec![2.0, 0.0]]).unwrap();
        assert!(!rep.canonical && rep.violations[0].contains("magnitude"));
    }

    #[test]
    fn jacobi_diagonalizes_symmetric_matrix() {
        let a = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 1.0];
        let (vals, vecs) = symmetric_eigen(&a, 3).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                let av: f64 = (0..3).map(|m| a[i * 3 + m] * vecs[m * 3 + j]).sum();
                assert!((av - vals[j] * vecs[i * 3 + j]).abs() < 1e-12);
            }
        }
        assert!((vals.iter().sum::<f64>() - 8.0).abs() < 1e-12);
    }
}
