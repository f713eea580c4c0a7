//! Feature matrices, square-root preprocessing and principal component
//! analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{canonical_sign, complete_orthonormal, dot, reorthonormalize, symmetric_eigen, Matrix};
use crate::scalar::Scalar;

/// One sample per row, optionally labelled and identified.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    data: Matrix<T>,
    labels: Option<Vec<usize>>,
    ids: Option<Vec<String>>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(data: Matrix<T>) -> Result<Self> {
        if data.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("feature matrix has non-finite entries".into()));
        }
        Ok(FeatureMatrix {
            data,
            labels: None,
            ids: None,
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.data.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} samples",
                labels.len(),
                self.data.rows()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.data.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids for {} samples",
                ids.len(),
                self.data.rows()
            )));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    pub fn cols(&self) -> usize {
        self.data.cols()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.data.row(i)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Rows at `indices`, in that order, with labels and ids carried along.
    pub fn select(&self, indices: &[usize]) -> Self {
        let cols = self.cols();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            data: Matrix::from_vec(indices.len(), cols, data).expect("row selection keeps shape"),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            ids: self
                .ids
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    /// Applies `f` to every row.
    pub fn map_rows(&self, f: impl Fn(&[T]) -> Result<Vec<T>>) -> Result<Self> {
        let rows = (0..self.rows()).map(|i| f(self.row(i))).collect::<Result<Vec<_>>>()?;
        let data = if rows.is_empty() {
            Matrix::zeros(0, 0)
        } else {
            Matrix::from_rows(&rows)?
        };
        Ok(FeatureMatrix {
            data,
            labels: self.labels.clone(),
            ids: self.ids.clone(),
        })
    }
}

/// Elementwise square root; rejects negative components.
pub fn sqrt_transform<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    x.iter()
        .map(|&v| {
            if v < T::zero() {
                Err(Error::Domain(v.to_f64_lossy()))
            } else {
                Ok(v.sqrt())
            }
        })
        .collect()
}

/// Mean, top-`k` principal axes (rows of `components`) and their variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel<T> {
    n: usize,
    k: usize,
    mean: Vec<T>,
    /// `k x n`, row-major, one component per row.
    components: Vec<T>,
    eigenvalues: Vec<T>,
}

impl<T: Scalar> PcaModel<T> {
    pub fn input_dim(&self) -> usize {
        self.n
    }

    pub fn output_dim(&self) -> usize {
        self.k
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn component(&self, i: usize) -> &[T] {
        &self.components[i * self.n..(i + 1) * self.n]
    }

    pub fn components(&self) -> Matrix<T> {
        Matrix::from_vec(self.k, self.n, self.components.clone()).expect("consistent model")
    }

    /// Checks the shape bookkeeping of a deserialized model.
    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != self.n || self.components.len() != self.n * self.k || self.eigenvalues.len() != self.k {
            return Err(Error::ShapeMismatch(format!(
                "PCA model with n={} k={} has mean {}, components {}, eigenvalues {}",
                self.n,
                self.k,
                self.mean.len(),
                self.components.len(),
                self.eigenvalues.len()
            )));
        }
        Ok(())
    }
}

fn eigen_floor<T: Scalar>(largest: T) -> T {
    largest.max(T::min_positive_value()) * T::lit(1e-12)
}

/// Fits PCA on the rows of `train`. Covariance divides by `rows - 1`.
/// Uses the `n x n` covariance when `n <= rows`, otherwise the
/// `rows x rows` Gram matrix of the centered data.
pub fn pca_fit<T: Scalar>(train: &FeatureMatrix<T>, k: usize) -> Result<PcaModel<T>> {
    let m = train.rows();
    let n = train.cols();
    if m < 2 {
        return Err(Error::InsufficientSamples(format!(
            "PCA needs at least 2 samples, got {m}"
        )));
    }
    if k == 0 || k > (m - 1).min(n) {
        return Err(Error::InvalidParameter(format!(
            "PCA k must be in 1..={}, got {k}",
            (m - 1).min(n)
        )));
    }
    let m_t = T::from_usize_lossy(m);
    let mut mean = vec![T::zero(); n];
    for i in 0..m {
        for (acc, &v) in mean.iter_mut().zip(train.row(i)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m_t);
    let mut centered = train.matrix().clone();
    for i in 0..m {
        for (v, &mu) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    let denom = T::from_usize_lossy(m - 1);

    let mut axes: Vec<Vec<T>> = Vec::with_capacity(k);
    let mut eigenvalues: Vec<T> = Vec::with_capacity(k);
    if n <= m {
        let mut cov = centered.gram_cols();
        for i in 0..n {
            for v in cov.row_mut(i) {
                *v /= denom;
            }
        }
        let eig = symmetric_eigen(&cov)?;
        for i in 0..k {
            axes.push(eig.vectors.column(i));
            eigenvalues.push(eig.values[i]);
        }
    } else {
        let gram = centered.gram_rows();
        let eig = symmetric_eigen(&gram)?;
        let floor = eigen_floor(eig.values[0]);
        for i in 0..k {
            let mu = eig.values[i];
            if !(mu > floor) {
                break;
            }
            let v = eig.vectors.column(i);
            let mut u = centered.tr_mul_vec(&v)?;
            let s = mu.sqrt();
            u.iter_mut().for_each(|x| *x /= s);
            axes.push(u);
            eigenvalues.push(mu / denom);
        }
        reorthonormalize(&mut axes);
        // Directions beyond the data rank carry zero variance.
        complete_orthonormal(&mut axes, n, k);
        eigenvalues.resize(k, T::zero());
    }
    for a in axes.iter_mut() {
        canonical_sign(a);
    }
    Ok(PcaModel {
        n,
        k,
        mean,
        components: axes.into_iter().flatten().collect(),
        eigenvalues,
    })
}

/// Projects `x` onto the principal axes: `U^T (x - mean)`.
pub fn pca_transform<T: Scalar>(model: &PcaModel<T>, x: &[T]) -> Result<Vec<T>> {
    if x.len() != model.n {
        return Err(Error::ShapeMismatch(format!(
            "PCA input has {} features, model expects {}",
            x.len(),
            model.n
        )));
    }
    let centered: Vec<T> = x.iter().zip(&model.mean).map(|(&a, &b)| a - b).collect();
    Ok((0..model.k).map(|i| dot(model.component(i), &centered)).collect())
}

/// Maps PCA coordinates back to feature space: `mean + U z`.
pub fn pca_inverse_transform<T: Scalar>(model: &PcaModel<T>, z: &[T]) -> Result<Vec<T>> {
    if z.len() != model.k {
        return Err(Error::ShapeMismatch(format!(
            "PCA coordinates have length {}, model has {} components",
            z.len(),
            model.k
        )));
    }
    let mut out = model.mean.clone();
    for (i, &zi) in z.iter().enumerate() {
        for (o, &c) in out.iter_mut().zip(model.component(i)) {
            *o += zi * c;
        }
    }
    Ok(out)
}

pub fn pca_transform_matrix<T: Scalar>(model: &PcaModel<T>, x: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
    x.map_rows(|row| pca_transform(model, row))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn random_rows(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut s = seed;
        (0..m)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
                    })
                    .collect()
            })
            .collect()
    }

    fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = rows.len();
        let n = rows[0].len();
        let mean: Vec<f64> = (0..n)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / m as f64)
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (m - 1) as f64)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn sqrt_examples() {
        assert_eq!(sqrt_transform(&[0.0, 1.0, 4.0]).unwrap(), vec![0.0, 1.0, 2.0]);
        assert_eq!(sqrt_transform(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(matches!(sqrt_transform(&[1.0, -0.5]), Err(Error::Domain(_))));
        let d = [0.1, 0.2, 0.3, 0.4];
        let s = sqrt_transform(&d).unwrap();
        assert_abs_diff_eq!(s.iter().map(|v| v * v).sum::<f64>().sqrt(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_samples_have_zero_variance() {
        let rows = vec![vec![1.0, 2.0, 3.0]; 4];
        let fm = FeatureMatrix::from_rows(&rows).unwrap();
        let model = pca_fit(&fm, 3).unwrap();
        assert!(model.eigenvalues().iter().all(|&v: &f64| v.abs() < 1e-12));
        assert!(pca_transform(&model, &rows[0])
            .unwrap()
            .iter()
            .all(|&v: &f64| v.abs() < 1e-12));
        let gram_route = pca_fit(&FeatureMatrix::from_rows(&vec![vec![5.0; 6]; 3]).unwrap(), 2).unwrap();
        assert!(gram_route.eigenvalues().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn points_on_a_line() {
        let rows: Vec<Vec<f64>> = [-2.0, -0.5, 0.3, 1.0, 2.5].iter().map(|&t| vec![t, 2.0 * t]).collect();
        let model = pca_fit(&FeatureMatrix::from_rows(&rows).unwrap(), 1).unwrap();
        let e = model.component(0);
        let s5 = 5f64.sqrt();
        assert_abs_diff_eq!(e[0], 1.0 / s5, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], 2.0 / s5, epsilon = 1e-12);
        // second eigenvalue through the full decomposition (k = n needs m - 1 >= 2)
        let full = pca_fit(&FeatureMatrix::from_rows(&rows).unwrap(), 2).unwrap();
        assert_abs_diff_eq!(full.eigenvalues()[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn full_rank_reconstruction() {
        let rows = random_rows(20, 10, 7);
        let fm = FeatureMatrix::from_rows(&rows).unwrap();
        let model = pca_fit(&fm, 10).unwrap();
        for r in &rows {
            let back = pca_inverse_transform(&model, &pca_transform(&model, r).unwrap()).unwrap();
            for (a, b) in back.iter().zip(r) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn isometry_at_full_rank() {
        let rows = random_rows(15, 6, 3);
        let model = pca_fit(&FeatureMatrix::from_rows(&rows).unwrap(), 6).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| pca_transform(&model, r).unwrap()).collect();
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        for i in 0..rows.len() {
            for j in 0..rows.len() {
                assert_abs_diff_eq!(dist(&rows[i], &rows[j]), dist(&z[i], &z[j]), epsilon = 1e-8);
            }
        }
        assert!(pca_transform(&model, model.mean())
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn errors() {
        let fm = FeatureMatrix::from_rows(&random_rows(5, 3, 1)).unwrap();
        assert!(pca_fit(&fm, 0).is_err());
        assert!(pca_fit(&fm, 4).is_err());
        let one = FeatureMatrix::from_rows(&random_rows(1, 3, 1)).unwrap();
        assert!(pca_fit(&one, 1).is_err());
        let model = pca_fit(&fm, 2).unwrap();
        assert!(matches!(
            pca_transform(&model, &[1.0, 2.0]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(FeatureMatrix::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(fm.clone().with_labels(vec![0; 4]).is_err());
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        let model = pca_fit(&FeatureMatrix::from_rows(&random_rows(12, 5, 9)).unwrap(), 4).unwrap();
        for i in 0..4 {
            let c = model.component(i);
            let big = c
                .iter()
                .copied()
                .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let model = pca_fit(&FeatureMatrix::from_rows(&random_rows(12, 5, 2)).unwrap(), 3).unwrap();
        let text = serde_json::to_string(&model).unwrap();
        let back: PcaModel<f64> = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back, model);
    }

    fn check_invariants(rows: &[Vec<f64>], k: usize) -> std::result::Result<(), TestCaseError> {
        let fm = FeatureMatrix::from_rows(rows).unwrap();
        let model = pca_fit(&fm, k).unwrap();
        let u = model.components();
        let utu = u.matmul(&u.transpose()).unwrap();
        prop_assert!(utu.max_abs_diff(&Matrix::identity(k)) < 1e-8);
        for w in model.eigenvalues().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        prop_assert!(model.eigenvalues().iter().all(|&v| v >= -1e-10));
        let cov = covariance(rows);
        for i in 0..k {
            let e = model.component(i);
            let lambda = model.eigenvalues()[i];
            let r: f64 = cov
                .iter()
                .zip(e)
                .map(|(row, &ei)| (row.iter().zip(e).map(|(a, b)| a * b).sum::<f64>() - lambda * ei).powi(2))
                .sum::<f64>()
                .sqrt();
            prop_assert!(r < 1e-8, "residual {}", r);
        }
        // empirical variances of projected coordinates follow the ordering
        let z: Vec<Vec<f64>> = rows.iter().map(|r| pca_transform(&model, r).unwrap()).collect();
        let m = rows.len() as f64;
        let var: Vec<f64> = (0..k)
            .map(|i| z.iter().map(|v| v[i] * v[i]).sum::<f64>() / (m - 1.0))
            .collect();
        for w in var.windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-10);
        }
        if k == rows[0].len() {
            let trace: f64 = (0..k).map(|i| cov[i][i]).sum();
            prop_assert!((model.eigenvalues().iter().sum::<f64>() - trace).abs() < 1e-8);
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn covariance_route_invariants(m in 6usize..20, n in 2usize..6, seed in any::<u64>()) {
            let k = n.min(m - 1);
            check_invariants(&random_rows(m, n, seed), k)?;
        }

        #[test]
        fn gram_route_invariants(m in 3usize..10, extra in 1usize..12, seed in any::<u64>()) {
            let n = m + extra;
            check_invariants(&random_rows(m, n, seed), m - 1)?;
        }
    }
}
