//! Nearest subspace classifier.
//!
//! Each class is summarized by an orthonormal basis of the leading left
//! singular vectors of its (uncentered) sample matrix. A query goes to the
//! class whose subspace leaves the smallest projection residual.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{canonical_sign, dot, norm2, reorthonormalize, symmetric_eigen};
use crate::scalar::Scalar;

/// How many singular directions each class keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum SubspaceDimPolicy {
    /// At most `s` directions (clamped to the class rank).
    Fixed(usize),
    /// Smallest `s` whose squared singular values reach this fraction of
    /// the total.
    Energy(f64),
}

impl Default for SubspaceDimPolicy {
    fn default() -> Self {
        SubspaceDimPolicy::Energy(0.95)
    }
}

impl SubspaceDimPolicy {
    fn validate(&self) -> Result<()> {
        match *self {
            SubspaceDimPolicy::Fixed(0) => Err(Error::InvalidParameter("subspace dimension must be >= 1".into())),
            SubspaceDimPolicy::Energy(f) if !(f > 0.0 && f <= 1.0) => Err(Error::InvalidParameter(format!(
                "energy fraction must be in (0, 1], got {f}"
            ))),
            _ => Ok(()),
        }
    }

    /// Number of directions to keep given descending squared singular
    /// values (only the strictly positive ones count toward rank).
    pub fn select(&self, sq_singular: &[f64]) -> usize {
        let rank = sq_singular.len();
        match *self {
            SubspaceDimPolicy::Fixed(s) => s.min(rank).max(1),
            SubspaceDimPolicy::Energy(fraction) => {
                let total: f64 = sq_singular.iter().sum();
                let mut acc = 0.0;
                for (i, v) in sq_singular.iter().enumerate() {
                    acc += v;
                    if acc >= fraction * total * (1.0 - 1e-12) {
                        return i + 1;
                    }
                }
                rank.max(1)
            }
        }
    }
}

/// Orthonormal basis of one class, stored column-wise as a list of vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSubspace<T> {
    pub class: usize,
    /// `dim x s`, row-major: entry `(i, j)` is component `i` of basis vector `j`.
    basis: Vec<T>,
    dim: usize,
    s: usize,
}

impl<T: Scalar> ClassSubspace<T> {
    pub fn from_vectors(class: usize, vectors: &[Vec<T>]) -> Result<Self> {
        let s = vectors.len();
        if s == 0 {
            return Err(Error::InvalidParameter(
                "class subspace needs at least one vector".into(),
            ));
        }
        let dim = vectors[0].len();
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::ShapeMismatch("basis vectors differ in length".into()));
        }
        let mut basis = vec![T::zero(); dim * s];
        for (j, v) in vectors.iter().enumerate() {
            for (i, &x) in v.iter().enumerate() {
                basis[i * s + j] = x;
            }
        }
        Ok(ClassSubspace { class, basis, dim, s })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.s
    }

    pub fn vector(&self, j: usize) -> Vec<T> {
        (0..self.dim).map(|i| self.basis[i * self.s + j]).collect()
    }

    /// `B^T y`.
    pub fn coefficients(&self, y: &[T]) -> Vec<T> {
        let mut c = vec![T::zero(); self.s];
        for (i, &yi) in y.iter().enumerate() {
            let row = &self.basis[i * self.s..(i + 1) * self.s];
            for (cj, &b) in c.iter_mut().zip(row) {
                *cj += b * yi;
            }
        }
        c
    }

    /// `(I - B B^T) y`.
    pub fn residual_vector(&self, y: &[T]) -> Vec<T> {
        let c = self.coefficients(y);
        y.iter()
            .enumerate()
            .map(|(i, &yi)| yi - dot(&self.basis[i * self.s..(i + 1) * self.s], &c))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NscModel<T> {
    /// Ascending class labels; subspaces follow the same order.
    classes: Vec<usize>,
    subspaces: Vec<ClassSubspace<T>>,
    feature_dim: usize,
    policy: SubspaceDimPolicy,
}

impl<T: Scalar> NscModel<T> {
    /// Builds a model from precomputed bases, sorting them by class.
    pub fn from_subspaces(mut subspaces: Vec<ClassSubspace<T>>, policy: SubspaceDimPolicy) -> Result<Self> {
        subspaces.sort_by_key(|s| s.class);
        let feature_dim = subspaces.first().map_or(0, ClassSubspace::dim);
        if subspaces.iter().any(|s| s.dim() != feature_dim) {
            return Err(Error::ShapeMismatch("class subspaces differ in dimension".into()));
        }
        if subspaces.windows(2).any(|w| w[0].class == w[1].class) {
            return Err(Error::InvalidParameter("duplicate class subspace".into()));
        }
        Ok(NscModel {
            classes: subspaces.iter().map(|s| s.class).collect(),
            subspaces,
            feature_dim,
            policy,
        })
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn subspaces(&self) -> &[ClassSubspace<T>] {
        &self.subspaces
    }

    pub fn subspace(&self, class: usize) -> Option<&ClassSubspace<T>> {
        self.classes.binary_search(&class).ok().map(|i| &self.subspaces[i])
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn policy(&self) -> SubspaceDimPolicy {
        self.policy
    }

    /// Checks the bookkeeping of a deserialized model.
    pub fn validate(&self) -> Result<()> {
        if self.classes.len() != self.subspaces.len()
            || self.classes.iter().zip(&self.subspaces).any(|(c, s)| *c != s.class)
            || self.classes.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter("class list and subspaces disagree".into()));
        }
        for s in &self.subspaces {
            if s.dim != self.feature_dim || s.basis.len() != s.dim * s.s || s.s == 0 {
                return Err(Error::ShapeMismatch(format!("malformed basis for class {}", s.class)));
            }
        }
        Ok(())
    }
}

/// Fits one subspace per class from the labelled rows of `train`.
pub fn nsc_fit<T: Scalar>(train: &FeatureMatrix<T>, policy: SubspaceDimPolicy) -> Result<NscModel<T>> {
    policy.validate()?;
    let labels = train
        .labels()
        .ok_or_else(|| Error::InvalidParameter("training matrix has no labels".into()))?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if by_class.is_empty() {
        return Err(Error::EmptyModel);
    }
    let mut subspaces = Vec::with_capacity(by_class.len());
    for (&class, rows) in &by_class {
        if rows.len() < 2 {
            return Err(Error::InsufficientSamples(format!(
                "class {class} has {} training sample(s), need at least 2",
                rows.len()
            )));
        }
        let x = train.select(rows);
        subspaces.push(class_subspace(class, x.matrix(), policy)?);
    }
    NscModel::from_subspaces(subspaces, policy)
}

// Left singular vectors of X^T (feature_dim x samples) through the
// samples x samples Gram matrix X X^T.
fn class_subspace<T: Scalar>(
    class: usize,
    x: &crate::linalg::Matrix<T>,
    policy: SubspaceDimPolicy,
) -> Result<ClassSubspace<T>> {
    let gram = x.gram_rows();
    let eig = symmetric_eigen(&gram)?;
    let largest = eig.values.first().copied().unwrap_or(T::zero());
    let floor = largest.max(T::min_positive_value()) * T::lit(1e-12);
    let positive: Vec<f64> = eig
        .values
        .iter()
        .take_while(|&&v| v > floor)
        .map(|v| v.to_f64_lossy())
        .collect();
    if positive.is_empty() {
        return Err(Error::InsufficientSamples(format!(
            "class {class} has only zero-valued samples"
        )));
    }
    let s = policy.select(&positive);
    let mut vectors = Vec::with_capacity(s);
    for j in 0..s {
        let v = eig.vectors.column(j);
        let mut u = x.tr_mul_vec(&v)?;
        let sigma = eig.values[j].sqrt();
        u.iter_mut().for_each(|e| *e /= sigma);
        vectors.push(u);
    }
    reorthonormalize(&mut vectors);
    for v in vectors.iter_mut() {
        canonical_sign(v);
    }
    ClassSubspace::from_vectors(class, &vectors)
}

/// `||(I - B_c B_c^T) y||_2`.
pub fn nsc_residual<T: Scalar>(model: &NscModel<T>, y: &[T], class: usize) -> Result<T> {
    let sub = model.subspace(class).ok_or(Error::UnknownClass(class))?;
    if y.len() != model.feature_dim {
        return Err(Error::ShapeMismatch(format!(
            "query has {} features, model expects {}",
            y.len(),
            model.feature_dim
        )));
    }
    Ok(norm2(&sub.residual_vector(y)))
}

/// Residual for every class, in class order.
pub fn nsc_residuals<T: Scalar>(model: &NscModel<T>, y: &[T]) -> Result<Vec<(usize, T)>> {
    if model.classes.is_empty() {
        return Err(Error::EmptyModel);
    }
    model
        .classes
        .iter()
        .map(|&c| nsc_residual(model, y, c).map(|r| (c, r)))
        .collect()
}

/// Class with the smallest residual; ties go to the lowest label.
pub fn nsc_predict<T: Scalar>(model: &NscModel<T>, y: &[T]) -> Result<usize> {
    let residuals = nsc_residuals(model, y)?;
    let mut best = residuals[0];
    for &(c, r) in &residuals[1..] {
        if r < best.1 {
            best = (c, r);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn rng(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        }
    }

    fn labelled(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> FeatureMatrix<f64> {
        FeatureMatrix::from_rows(&rows).unwrap().with_labels(labels).unwrap()
    }

    fn axis_model() -> NscModel<f64> {
        let train = labelled(
            vec![vec![1.0, 0.0], vec![2.5, 0.0], vec![0.0, 3.0], vec![0.0, -1.0]],
            vec![0, 0, 1, 1],
        );
        nsc_fit(&train, SubspaceDimPolicy::Fixed(1)).unwrap()
    }

    #[test]
    fn rank_one_classes_recover_their_rays() {
        let d = [3.0f64, 4.0];
        let e = [1.0f64, -1.0];
        let train = labelled(
            vec![
                vec![d[0], d[1]],
                vec![2.0 * d[0], 2.0 * d[1]],
                vec![0.5 * e[0], 0.5 * e[1]],
                vec![3.0 * e[0], 3.0 * e[1]],
            ],
            vec![4, 4, 9, 9],
        );
        let model = nsc_fit(&train, SubspaceDimPolicy::Energy(0.95)).unwrap();
        assert_eq!(model.classes(), &[4, 9]);
        let b0 = model.subspace(4).unwrap();
        assert_eq!(b0.rank(), 1);
        let v = b0.vector(0);
        assert_abs_diff_eq!(v[0].abs(), 0.6, epsilon = 1e-10);
        assert_abs_diff_eq!(v[1].abs(), 0.8, epsilon = 1e-10);
        let v = model.subspace(9).unwrap().vector(0);
        assert_abs_diff_eq!(v[0].abs(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
    }

    #[test]
    fn energy_policy_arithmetic() {
        // singular values 10, 1, 0.1
        assert_eq!(SubspaceDimPolicy::Energy(0.95).select(&[100.0, 1.0, 0.01]), 1);
        assert_eq!(SubspaceDimPolicy::Energy(0.999).select(&[100.0, 1.0, 0.01]), 2);
        assert_eq!(SubspaceDimPolicy::Energy(1.0).select(&[100.0, 1.0, 0.01]), 3);
        assert_eq!(SubspaceDimPolicy::Fixed(5).select(&[3.0, 2.0]), 2);
    }

    #[test]
    fn hand_projection_example() {
        let model = axis_model();
        assert_abs_diff_eq!(nsc_residual(&model, &[3.0, 1.0], 0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nsc_residual(&model, &[3.0, 1.0], 1).unwrap(), 3.0, epsilon = 1e-12);
        assert_eq!(nsc_predict(&model, &[3.0, 1.0]).unwrap(), 0);
        assert_eq!(nsc_predict(&model, &[0.0, 2.5]).unwrap(), 1);
    }

    #[test]
    fn in_and_orthogonal_to_subspace() {
        let model = axis_model();
        assert_abs_diff_eq!(nsc_residual(&model, &[7.0, 0.0], 0).unwrap(), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(nsc_residual(&model, &[0.0, -2.0], 0).unwrap(), 2.0, epsilon = 1e-8);
    }

    #[test]
    fn ties_go_to_lowest_label() {
        let model = axis_model();
        assert_eq!(nsc_predict(&model, &[1.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn single_class_always_wins() {
        let mut r = rng(5);
        let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..5).map(|_| r()).collect()).collect();
        let model = nsc_fit(&labelled(rows, vec![3; 4]), SubspaceDimPolicy::Fixed(2)).unwrap();
        for _ in 0..10 {
            let y: Vec<f64> = (0..5).map(|_| r()).collect();
            assert_eq!(nsc_predict(&model, &y).unwrap(), 3);
        }
    }

    #[test]
    fn training_sample_of_rank_deficient_class() {
        let mut r = rng(8);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        // class 0 lives in a 2-D plane of R^6, class 1 is generic
        let a: Vec<f64> = (0..6).map(|_| r()).collect();
        let b: Vec<f64> = (0..6).map(|_| r()).collect();
        for _ in 0..5 {
            let (s, t) = (r(), r());
            rows.push(a.iter().zip(&b).map(|(x, y)| s * x + t * y).collect());
            labels.push(0);
        }
        for _ in 0..3 {
            rows.push((0..6).map(|_| r()).collect());
            labels.push(1);
        }
        let model = nsc_fit(&labelled(rows.clone(), labels), SubspaceDimPolicy::Energy(1.0)).unwrap();
        assert_eq!(model.subspace(0).unwrap().rank(), 2);
        assert_eq!(nsc_predict(&model, &rows[2]).unwrap(), 0);
    }

    #[test]
    fn errors() {
        let model = axis_model();
        assert!(matches!(
            nsc_residual(&model, &[1.0, 0.0], 7),
            Err(Error::UnknownClass(7))
        ));
        assert!(matches!(nsc_residual(&model, &[1.0], 0), Err(Error::ShapeMismatch(_))));
        let lonely = labelled(vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![0.0, 1.0]], vec![0, 0, 1]);
        assert!(matches!(
            nsc_fit(&lonely, SubspaceDimPolicy::default()),
            Err(Error::InsufficientSamples(_))
        ));
        let empty: NscModel<f64> = NscModel::from_subspaces(vec![], SubspaceDimPolicy::default()).unwrap();
        assert!(matches!(nsc_predict(&empty, &[]), Err(Error::EmptyModel)));
        assert!(nsc_fit(
            &labelled(vec![vec![1.0], vec![2.0]], vec![0, 0]),
            SubspaceDimPolicy::Fixed(0)
        )
        .is_err());
    }

    #[test]
    fn json_round_trip() {
        let model = axis_model();
        let text = serde_json::to_string(&model).unwrap();
        let back: NscModel<f64> = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back, model);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn basis_orthonormal_projector_idempotent_and_scale_invariant(seed in any::<u64>(), alpha in 0.01f64..100.0) {
            let mut r = rng(seed);
            let dim = 8;
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for c in 0..3 {
                for _ in 0..5 {
                    rows.push((0..dim).map(|_| r()).collect::<Vec<f64>>());
                    labels.push(c);
                }
            }
            let model = nsc_fit(&labelled(rows, labels), SubspaceDimPolicy::Energy(0.9)).unwrap();
            for sub in model.subspaces() {
                for i in 0..sub.rank() {
                    for j in 0..sub.rank() {
                        let d = dot(&sub.vector(i), &sub.vector(j));
                        let e = if i == j { 1.0 } else { 0.0 };
                        prop_assert!((d - e).abs() < 1e-8);
                    }
                }
            }
            let y: Vec<f64> = (0..dim).map(|_| r()).collect();
            for sub in model.subspaces() {
                let once = sub.residual_vector(&y);
                let twice = sub.residual_vector(&once);
                for (a, b) in once.iter().zip(&twice) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
                // brute-force projection
                let mut proj = vec![0.0; dim];
                for j in 0..sub.rank() {
                    let v = sub.vector(j);
                    let c: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
                    for (p, vi) in proj.iter_mut().zip(&v) {
                        *p += c * vi;
                    }
                }
                let brute: f64 = y.iter().zip(&proj).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let fast = nsc_residual(&model, &y, sub.class).unwrap();
                prop_assert!((brute - fast).abs() < 1e-10);
                prop_assert!(fast <= norm2(&y) + 1e-12);
            }
            let scaled: Vec<f64> = y.iter().map(|v| v * alpha).collect();
            prop_assert_eq!(nsc_predict(&model, &scaled).unwrap(), nsc_predict(&model, &y).unwrap());
        }
    }
}
