//! Linear discriminant analysis on embeddings: class means, pooled
//! within-class covariance, its pseudo-inverse, and the score transform.
//!
//! The score of vertex i for class k is
//!
//! `Z1(i,k) = Z(i,:) S+ mu_k - (q * mu_k' S+ mu_k - log(n_k / n))`
//!
//! with `q = 1` by default and `q = 1/2` for the classical discriminant
//! rule. The two differ only in how strongly the class-mean magnitude is
//! penalized; both are exposed because the default is what the refinement
//! loops expect while the half rule is the textbook classifier.

use nalgebra::{DMatrix, DVector};

use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::graph::LabelVector;

/// Fitted discriminant model: per-class means, pooled covariance and its
/// pseudo-inverse, and class priors `n_k / n`.
#[derive(Debug, Clone)]
pub struct LdaModel {
    /// d x K, column k holds the mean of class k+1.
    means: DMatrix<f64>,
    pooled_cov: DMatrix<f64>,
    pseudo_inv: DMatrix<f64>,
    priors: Vec<f64>,
    d: usize,
    k: usize,
}

impl LdaModel {
    /// Assemble a model from explicit parts; the pseudo-inverse is derived
    /// from the covariance.
    pub fn from_parts(means: DMatrix<f64>, pooled_cov: DMatrix<f64>, priors: Vec<f64>) -> Self {
        let d = means.nrows();
        let k = means.ncols();
        assert_eq!(pooled_cov.nrows(), d);
        assert_eq!(priors.len(), k);
        let pseudo_inv = sym_pseudo_inverse(&pooled_cov);
        LdaModel {
            means,
            pooled_cov,
            pseudo_inv,
            priors,
            d,
            k,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn pooled_cov(&self) -> &DMatrix<f64> {
        &self.pooled_cov
    }

    pub fn pseudo_inv(&self) -> &DMatrix<f64> {
        &self.pseudo_inv
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }
}

/// Pseudo-inverse of a symmetric matrix via eigendecomposition, inverting
/// eigenvalues above `d * eps * |lambda|_max` and zeroing the rest.
fn sym_pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    if d == 0 {
        return m.clone();
    }
    let eig = m.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let tol = d as f64 * f64::EPSILON * lambda_max;
    let inv = DVector::from_iterator(
        d,
        eig.eigenvalues
            .iter()
            .map(|&l| if l > tol { 1.0 / l } else { 0.0 }),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Fit the discriminant model on the rows with known labels. Needs at
/// least two classes, each with at least one labelled vertex.
///
/// The pooled covariance is the within-class scatter divided by `m - K`
/// (`m` = labelled count), falling back to `m` when `m <= K`. Priors use
/// the full row count `n`, so unknown-label rows dilute every class
/// equally and never change the ranking of scores.
pub fn fit_lda(z: &Embedding, y: &LabelVector) -> Result<LdaModel> {
    if y.len() != z.n() {
        return Err(Error::shape(format!(
            "labels have length {} but the embedding has {} rows",
            y.len(),
            z.n()
        )));
    }
    let k = y.num_classes() as usize;
    if k < 2 {
        return Err(Error::DegenerateModel(format!(
            "discriminant fit needs at least 2 classes, found {k}"
        )));
    }
    let counts = y.class_counts();
    for (idx, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::DegenerateClass {
                class: idx as u32 + 1,
            });
        }
    }
    let d = z.d();
    let m: usize = counts.iter().sum();

    let mut means = DMatrix::zeros(d, k);
    for i in 0..z.n() {
        let yi = y.get(i);
        if yi == 0 {
            continue;
        }
        let col = (yi - 1) as usize;
        for (r, &v) in z.row(i).iter().enumerate() {
            means[(r, col)] += v;
        }
    }
    for c in 0..k {
        let scale = 1.0 / counts[c] as f64;
        for r in 0..d {
            means[(r, c)] *= scale;
        }
    }

    let mut scatter = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for i in 0..z.n() {
        let yi = y.get(i);
        if yi == 0 {
            continue;
        }
        let col = (yi - 1) as usize;
        for (r, &v) in z.row(i).iter().enumerate() {
            centered[r] = v - means[(r, col)];
        }
        for a in 0..d {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            for b in a..d {
                scatter[(a, b)] += ca * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            scatter[(a, b)] = scatter[(b, a)];
        }
    }
    let denom = if m > k { (m - k) as f64 } else { m as f64 };
    let pooled_cov = scatter / denom;
    let pseudo_inv = sym_pseudo_inverse(&pooled_cov);

    let n = z.n() as f64;
    let priors = counts.iter().map(|&c| c as f64 / n).collect();

    Ok(LdaModel {
        means,
        pooled_cov,
        pseudo_inv,
        priors,
        d,
        k,
    })
}

/// Apply the discriminant transform to every row, producing an n x K score
/// embedding. `half_quadratic` switches to the classical rule.
pub fn lda_transform(z: &Embedding, model: &LdaModel, half_quadratic: bool) -> Result<Embedding> {
    if z.d() != model.d {
        return Err(Error::shape(format!(
            "embedding has {} columns but the model expects {}",
            z.d(),
            model.d
        )));
    }
    let d = model.d;
    let k = model.k;
    // projection = S+ mu, one column per class
    let proj = &model.pseudo_inv * &model.means;

    let factor = if half_quadratic { 0.5 } else { 1.0 };
    let mut shift = vec![0.0; k];
    for c in 0..k {
        let mut qf = 0.0;
        for r in 0..d {
            qf += model.means[(r, c)] * proj[(r, c)];
        }
        shift[c] = factor * qf - model.priors[c].ln();
    }

    let mut out = Embedding::zeros(z.n(), k, "lda");
    for i in 0..z.n() {
        let row = z.row(i);
        for c in 0..k {
            let mut dot = 0.0;
            for (r, &v) in row.iter().enumerate() {
                dot += v * proj[(r, c)];
            }
            out.set(i, c, dot - shift[c]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn embedding(rows: &[&[f64]]) -> Embedding {
        let n = rows.len();
        let d = rows[0].len();
        let mut values = Vec::with_capacity(n * d);
        for r in rows {
            values.extend_from_slice(r);
        }
        Embedding::from_values(n, d, values, "test")
    }

    #[test]
    fn zero_scatter_gives_zero_covariance_and_pinv() {
        let z = embedding(&[&[1.0, 2.0], &[1.0, 2.0], &[3.0, 0.0], &[3.0, 0.0]]);
        let y = LabelVector::new(vec![1, 1, 2, 2]);
        let m = fit_lda(&z, &y).unwrap();
        assert!(m.pooled_cov().iter().all(|&v| v == 0.0));
        assert!(m.pseudo_inv().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fit_requires_two_classes() {
        let z = embedding(&[&[1.0], &[2.0]]);
        let y = LabelVector::new(vec![1, 1]);
        assert!(matches!(
            fit_lda(&z, &y).unwrap_err(),
            Error::DegenerateModel(_)
        ));
    }

    #[test]
    fn fit_rejects_empty_class() {
        let z = embedding(&[&[1.0], &[2.0]]);
        let y = LabelVector::new(vec![1, 3]);
        assert!(matches!(
            fit_lda(&z, &y).unwrap_err(),
            Error::DegenerateClass { class: 2 }
        ));
    }

    #[test]
    fn unknown_rows_are_excluded_from_fit() {
        let z = embedding(&[&[1.0], &[3.0], &[100.0]]);
        let y = LabelVector::new(vec![1, 2, 0]);
        let m = fit_lda(&z, &y).unwrap();
        assert_eq!(m.means()[(0, 0)], 1.0);
        assert_eq!(m.means()[(0, 1)], 3.0);
        // priors use the full row count
        assert_eq!(m.priors(), &[1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn pseudo_inverse_identity_and_rank_deficient() {
        let id = sym_pseudo_inverse(&DMatrix::identity(3, 3));
        assert!((id - DMatrix::identity(3, 3)).amax() < 1e-12);

        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        let p = sym_pseudo_inverse(&m);
        assert!((p[(0, 0)] - 0.5).abs() < 1e-12);
        assert_eq!(p[(1, 1)], 0.0);
    }

    #[test]
    fn pseudo_inverse_property_on_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let d = 4;
            let mut a = DMatrix::from_fn(d, d, |_, _| rng.gen::<f64>() - 0.5);
            // rank-deficient PSD: zero one column before forming A A'
            a.set_column(0, &DVector::zeros(d));
            let s = &a * a.transpose();
            let p = sym_pseudo_inverse(&s);
            let back = &s * &p * &s;
            let rel = (&back - &s).amax() / s.amax().max(1e-30);
            assert!(rel < 1e-8, "recomposition error {rel}");
            assert!((&p - p.transpose()).amax() < 1e-10);
        }
    }

    #[test]
    fn transform_identity_covariance_example() {
        let means = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let model = LdaModel::from_parts(means, DMatrix::identity(2, 2), vec![0.5, 0.5]);
        let z = embedding(&[&[1.0, 0.0]]);
        let scores = lda_transform(&z, &model, false).unwrap();
        // hand evaluation: (1,0)*mu - (1 - ln 0.5) per class
        let ln2 = std::f64::consts::LN_2;
        assert!((scores.get(0, 0) - (-ln2)).abs() < 1e-12);
        assert!((scores.get(0, 1) - (-1.0 - ln2)).abs() < 1e-12);
        assert!(scores.get(0, 0) > scores.get(0, 1));
    }

    #[test]
    fn transform_zero_model_returns_log_priors() {
        let means = DMatrix::zeros(2, 2);
        let model = LdaModel::from_parts(means, DMatrix::identity(2, 2), vec![0.25, 0.75]);
        let z = embedding(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let scores = lda_transform(&z, &model, false).unwrap();
        for i in 0..2 {
            assert!((scores.get(i, 0) - 0.25f64.ln()).abs() < 1e-12);
            assert!((scores.get(i, 1) - 0.75f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_matches_entrywise_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 3;
        let k = 2;
        let a = DMatrix::from_fn(d, d, |_, _| rng.gen::<f64>() - 0.5);
        let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
        let means = DMatrix::from_fn(d, k, |_, _| rng.gen::<f64>());
        let model = LdaModel::from_parts(means.clone(), cov.clone(), vec![0.4, 0.6]);
        let z = embedding(&[&[0.3, -0.2, 0.9], &[0.0, 1.0, 0.5]]);
        for half in [false, true] {
            let scores = lda_transform(&z, &model, half).unwrap();
            let q = if half { 0.5 } else { 1.0 };
            let pinv = model.pseudo_inv();
            for i in 0..2 {
                let zi = DVector::from_column_slice(z.row(i));
                for c in 0..k {
                    let mu = means.column(c);
                    let expected = (zi.transpose() * pinv * mu)[(0, 0)]
                        - (q * (mu.transpose() * pinv * mu)[(0, 0)]
                            - model.priors()[c].ln());
                    assert!((scores.get(i, c) - expected).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn half_quadratic_changes_only_the_shift() {
        let means = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let model = LdaModel::from_parts(means, DMatrix::identity(2, 2), vec![0.5, 0.5]);
        let z = embedding(&[&[0.4, 0.7]]);
        let full = lda_transform(&z, &model, false).unwrap();
        let half = lda_transform(&z, &model, true).unwrap();
        // quadratic terms are 1 and 4, so halving adds 0.5 and 2.0
        assert!((half.get(0, 0) - full.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((half.get(0, 1) - full.get(0, 1) - 2.0).abs() < 1e-12);
    }

    /// Means from a 2-class Gaussian sample land within 3 standard errors.
    #[test]
    fn fit_recovers_gaussian_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut gauss = move || {
            let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
            (-2.0 * u1.max(1e-12).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let n_per = 100;
        let sigma = 0.7;
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (class, center) in [(1u32, [0.0, 0.0]), (2u32, [2.0, -1.0])] {
            for _ in 0..n_per {
                values.push(center[0] + sigma * gauss());
                values.push(center[1] + sigma * gauss());
                labels.push(class);
            }
        }
        let z = Embedding::from_values(2 * n_per, 2, values, "test");
        let y = LabelVector::new(labels);
        let model = fit_lda(&z, &y).unwrap();
        let se = sigma / (n_per as f64).sqrt();
        for (c, center) in [[0.0, 0.0], [2.0, -1.0]].iter().enumerate() {
            for r in 0..2 {
                let err = (model.means()[(r, c)] - center[r]).abs();
                assert!(err < 3.0 * se, "mean ({r},{c}) off by {err:.4}");
            }
        }
    }
}
