//! Covariance operators, their eigendecomposition, and spectral projectors.
//!
//! Operators are dense `J x J` symmetric arrays. Decompositions are sorted by
//! nonincreasing eigenvalue with ties broken by original index, and each
//! eigenvector is signed so that its first nonzero coordinate is positive.
//! Projectors keep both their matrix and the orthonormal basis they were built
//! from, so projected distances can be computed in `D` coordinates.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::hilbert::{dot, HilbertVector};

/// Relative symmetry tolerance: `max|T_jk - T_kj| <= SYMMETRY_TOLERANCE * max|T|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Default eigengap tolerance, relative to the leading eigenvalue.
pub const DEFAULT_GAP_TOLERANCE: f64 = 1e-10;

// coordinates below this magnitude are skipped by the sign convention
const SIGN_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricOperator {
    entries: DMatrix<f64>,
}

impl SymmetricOperator {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                left: entries.nrows(),
                right: entries.ncols(),
            });
        }
        if let Some((k, &value)) = entries.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFinite { index: k, value });
        }
        let scale = entries.amax();
        let asymmetry = (&entries - entries.transpose()).amax();
        let tolerance = SYMMETRY_TOLERANCE * scale;
        if asymmetry > tolerance {
            return Err(Error::NotSymmetric {
                asymmetry,
                tolerance,
            });
        }
        Ok(Self { entries })
    }

    /// Builds an operator from row-major entries.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: dim * dim,
                right: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            entries: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)),
        }
    }

    pub(crate) fn from_matrix_unchecked(entries: DMatrix<f64>) -> Self {
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n * n).map(|k| self.entries[(k / n, k % n)]).collect()
    }

    pub fn apply(&self, x: &HilbertVector) -> Result<HilbertVector> {
        self.check_vector(x)?;
        let out = (0..self.dim())
            .map(|r| {
                self.entries
                    .row(r)
                    .iter()
                    .zip(x.as_slice())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        HilbertVector::new(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            entries: &self.entries - &other.entries,
        })
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            entries: &self.entries + &other.entries,
        })
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    fn check_vector(&self, x: &HilbertVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: x.dim(),
            });
        }
        Ok(())
    }
}

/// JSON layout: `{"dim": J, "entries": [row-major J*J values]}`.
impl Serialize for SymmetricOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("SymmetricOperator", 2)?;
        st.serialize_field("dim", &self.dim())?;
        st.serialize_field("entries", &self.to_row_major())?;
        st.end()
    }
}

/// `(1/n) sum_i <X_i, .> X_i`, optionally after subtracting the sample mean.
pub fn empirical_covariance(sample: &[HilbertVector], center: bool) -> Result<SymmetricOperator> {
    let first = sample.first().ok_or(Error::EmptySample)?;
    let dim = first.dim();
    if let Some(bad) = sample.iter().find(|x| x.dim() != dim) {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: bad.dim(),
        });
    }
    let n = sample.len() as f64;
    let mean = if center {
        let mut m = vec![0.0; dim];
        for x in sample {
            for (acc, c) in m.iter_mut().zip(x.as_slice()) {
                *acc += c;
            }
        }
        m.iter_mut().for_each(|c| *c /= n);
        Some(m)
    } else {
        None
    };

    // upper triangle accumulated in sample order, then mirrored
    let mut upper = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for x in sample {
        let row: &[f64] = match &mean {
            Some(m) => {
                for ((out, c), mu) in centered.iter_mut().zip(x.as_slice()).zip(m) {
                    *out = c - mu;
                }
                &centered
            }
            None => x.as_slice(),
        };
        for j in 0..dim {
            let xj = row[j];
            if xj == 0.0 {
                continue;
            }
            let dst = &mut upper[j * dim + j..(j + 1) * dim];
            for (d, xk) in dst.iter_mut().zip(&row[j..]) {
                *d += xj * xk;
            }
        }
    }
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        for k in j..dim {
            let v = upper[j * dim + k] / n;
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    Ok(SymmetricOperator::from_matrix_unchecked(m))
}

/// Eigenvalues in nonincreasing order with aligned orthonormal eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<HilbertVector>,
}

impl SpectralDecomposition {
    /// Assembles a decomposition from parts, checking ordering and shape.
    /// Orthonormality is the caller's responsibility.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: Vec<HilbertVector>) -> Result<Self> {
        let dim = eigenvalues.len();
        if eigenvectors.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: eigenvectors.len(),
            });
        }
        if let Some(bad) = eigenvectors.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: bad.dim(),
            });
        }
        if let Some(k) = eigenvalues.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidSpectrum { index: k + 1 });
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Decomposition of a diagonal operator with nonincreasing diagonal: the
    /// eigenvectors are the coordinate axes.
    pub fn from_diagonal(spectrum: &[f64]) -> Result<Self> {
        let dim = spectrum.len();
        Self::from_parts(
            spectrum.to_vec(),
            (0..dim).map(|j| HilbertVector::axis(dim, j)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[HilbertVector] {
        &self.eigenvectors
    }

    /// Same decomposition with eigenvector `index` negated.
    pub fn with_flipped_sign(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.eigenvectors[index] = out.eigenvectors[index].scaled(-1.0);
        out
    }

    /// Largest deviation of the eigenvector Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.eigenvectors.iter().enumerate() {
            for (j, b) in self.eigenvectors.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a.as_slice(), b.as_slice()) - target).abs());
            }
        }
        worst
    }
}

/// Full symmetric eigendecomposition, sorted and sign-normalized.
pub fn eigendecompose(op: &SymmetricOperator) -> Result<SpectralDecomposition> {
    let dim = op.dim();
    let m = op.matrix();
    let diagonal = (0..dim).all(|j| (0..dim).all(|k| j == k || m[(j, k)] == 0.0));
    let (values, vectors): (Vec<f64>, Vec<Vec<f64>>) = if diagonal {
        (
            (0..dim).map(|j| m[(j, j)]).collect(),
            (0..dim)
                .map(|j| HilbertVector::axis(dim, j).into_inner())
                .collect(),
        )
    } else {
        let eig =
            SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(Error::EigenNoConvergence)?;
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        )
    };

    let mut order: Vec<usize> = (0..dim).collect();
    // stable: equal eigenvalues keep their original index order
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&i| {
            let mut v = vectors[i].clone();
            if let Some(first) = v.iter().find(|c| c.abs() > SIGN_THRESHOLD) {
                if *first < 0.0 {
                    v.iter_mut().for_each(|c| *c = -*c);
                }
            }
            HilbertVector::new(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigengap tolerance used by [`projector_from_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GapTolerance {
    /// Multiple of the leading eigenvalue.
    Relative(f64),
    Absolute(f64),
}

impl Default for GapTolerance {
    fn default() -> Self {
        GapTolerance::Relative(DEFAULT_GAP_TOLERANCE)
    }
}

impl GapTolerance {
    fn threshold(self, leading: f64) -> f64 {
        match self {
            GapTolerance::Relative(r) => r * leading.abs(),
            GapTolerance::Absolute(a) => a,
        }
    }
}

/// Orthogonal projector of rank `D`, stored with its orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    operator: SymmetricOperator,
    basis: Vec<HilbertVector>,
}

impl Projector {
    /// Projector onto the span of orthonormal vectors (checked within 1e-10).
    pub fn from_orthonormal(basis: Vec<HilbertVector>) -> Result<Self> {
        let first = basis
            .first()
            .ok_or(Error::InvalidRank { rank: 0, dim: 0 })?;
        let dim = first.dim();
        if basis.len() > dim {
            return Err(Error::InvalidRank {
                rank: basis.len(),
                dim,
            });
        }
        for (i, a) in basis.iter().enumerate() {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: a.dim(),
                });
            }
            for (j, b) in basis.iter().enumerate().skip(i) {
                let g = dot(a.as_slice(), b.as_slice());
                let target = if i == j { 1.0 } else { 0.0 };
                if (g - target).abs() > 1e-10 {
                    return Err(Error::NonOrthonormalProjector {
                        row: i,
                        col: j,
                        value: g,
                    });
                }
            }
        }
        Ok(Self::assemble(dim, basis))
    }

    /// Projector onto the first `rank` coordinate axes.
    pub fn coordinate(dim: usize, rank: usize) -> Result<Self> {
        if rank == 0 || rank > dim {
            return Err(Error::InvalidRank { rank, dim });
        }
        Ok(Self::assemble(
            dim,
            (0..rank).map(|j| HilbertVector::axis(dim, j)).collect(),
        ))
    }

    fn assemble(dim: usize, basis: Vec<HilbertVector>) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        for e in &basis {
            let e = e.as_slice();
            for j in 0..dim {
                for k in 0..dim {
                    m[(j, k)] += e[j] * e[k];
                }
            }
        }
        Self {
            operator: SymmetricOperator::from_matrix_unchecked(m),
            basis,
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn basis(&self) -> &[HilbertVector] {
        &self.basis
    }

    pub fn operator(&self) -> &SymmetricOperator {
        &self.operator
    }

    /// Coordinates of `x` in the projector's basis; `||P x||` is their norm.
    pub fn coordinates(&self, x: &HilbertVector) -> Result<Vec<f64>> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: x.dim(),
            });
        }
        Ok(self.coordinates_unchecked(x.as_slice()))
    }

    #[inline]
    pub(crate) fn coordinates_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|e| dot(e.as_slice(), x)).collect()
    }

    pub fn apply(&self, x: &HilbertVector) -> Result<HilbertVector> {
        self.operator.apply(x)
    }

    /// `I - P`.
    pub fn complement_operator(&self) -> SymmetricOperator {
        let dim = self.dim();
        SymmetricOperator::from_matrix_unchecked(
            DMatrix::identity(dim, dim) - self.operator.matrix(),
        )
    }

    /// `||P^2 - P||_2`.
    pub fn idempotence_defect(&self) -> f64 {
        let m = self.operator.matrix();
        (m * m - m).norm()
    }
}

impl Serialize for Projector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Projector", 3)?;
        st.serialize_field("dim", &self.dim())?;
        st.serialize_field("rank", &self.rank())?;
        st.serialize_field("entries", &self.operator.to_row_major())?;
        st.end()
    }
}

/// `sum_{i <= D} e_i e_i^T` with the default gap tolerance.
pub fn projector_from(decomp: &SpectralDecomposition, d: usize) -> Result<Projector> {
    projector_from_with(decomp, d, GapTolerance::default())
}

pub fn projector_from_with(
    decomp: &SpectralDecomposition,
    d: usize,
    tolerance: GapTolerance,
) -> Result<Projector> {
    let dim = decomp.dim();
    if d == 0 || d >= dim {
        return Err(Error::InvalidRank { rank: d, dim });
    }
    let values = decomp.eigenvalues();
    let (upper, lower) = (values[d - 1], values[d]);
    if !(upper - lower > tolerance.threshold(values[0])) {
        return Err(Error::EigenGap { d, upper, lower });
    }
    Ok(Projector::assemble(
        dim,
        decomp.eigenvectors()[..d].to_vec(),
    ))
}

/// Operator norm; for a symmetric argument, the largest absolute eigenvalue.
pub fn sup_norm(op: &SymmetricOperator) -> f64 {
    if op.dim() == 0 {
        return 0.0;
    }
    match eigendecompose(op) {
        Ok(d) => d
            .eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, l| acc.max(l.abs())),
        // nalgebra only fails on pathological input; fall back to the
        // singular values, which coincide with |eigenvalues| here
        Err(_) => op.matrix().clone().singular_values().max(),
    }
}

/// Hilbert-Schmidt (Frobenius) norm.
pub fn hs_norm(op: &SymmetricOperator) -> f64 {
    op.matrix().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Half the distance between the `D`-th and `(D+1)`-th eigenvalues.
pub fn spectral_gap(decomp: &SpectralDecomposition, d: usize) -> Result<f64> {
    let dim = decomp.dim();
    if d == 0 || d >= dim {
        return Err(Error::InvalidRank { rank: d, dim });
    }
    let values = decomp.eigenvalues();
    let gap = 0.5 * (values[d - 1] - values[d]);
    if !(gap > 0.0) {
        return Err(Error::EigenGap {
            d,
            upper: values[d - 1],
            lower: values[d],
        });
    }
    Ok(gap)
}

/// True when the top `D` empirical eigenvalues lie in the rectangle
/// `[lambda_D - delta_D, lambda_1 + 1/2]` and the next one lies left of it.
pub fn eigen_localization(
    empirical: &SpectralDecomposition,
    truth: &SpectralDecomposition,
    d: usize,
) -> Result<bool> {
    if empirical.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            left: empirical.dim(),
            right: truth.dim(),
        });
    }
    let delta = spectral_gap(truth, d)?;
    let lam = truth.eigenvalues();
    let hat = empirical.eigenvalues();
    let left_edge = lam[d - 1] - delta;
    Ok(hat[0] <= lam[0] + 0.5 && hat[d - 1] >= left_edge && hat[d] < left_edge)
}
