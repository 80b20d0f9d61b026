//! Finite-coordinate surrogate for a separable Hilbert space.
//!
//! Elements are stored as coefficient vectors against a fixed orthonormal
//! basis of length `J`. Functional observations sampled on a grid are mapped
//! into coefficients by quadrature against a tabulated basis; see
//! [`curve_to_coeffs`]. The curve file format is plain delimited text whose
//! header row holds the grid abscissae and whose remaining rows each hold one
//! sampled curve.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of an element of the truncated space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HilbertVector(Vec<f64>);

impl HilbertVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = coeffs.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Unit vector along coordinate `index`.
    pub fn axis(dim: usize, index: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        inner_product(self, other)
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|c| c * factor).collect())
    }

    pub(crate) fn from_raw(coeffs: Vec<f64>) -> Self {
        debug_assert!(coeffs.iter().all(|c| c.is_finite()));
        Self(coeffs)
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

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }
}

impl TryFrom<Vec<f64>> for HilbertVector {
    type Error = Error;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs)
    }
}

impl From<HilbertVector> for Vec<f64> {
    fn from(v: HilbertVector) -> Self {
        v.0
    }
}

impl Add for &HilbertVector {
    type Output = HilbertVector;

    /// Panics on dimension mismatch; use [`HilbertVector::checked_add`] otherwise.
    fn add(self, rhs: Self) -> HilbertVector {
        self.checked_add(rhs)
            .expect("dimension mismatch in vector addition")
    }
}

impl Sub for &HilbertVector {
    type Output = HilbertVector;

    /// Panics on dimension mismatch; use [`HilbertVector::checked_sub`] otherwise.
    fn sub(self, rhs: Self) -> HilbertVector {
        self.checked_sub(rhs)
            .expect("dimension mismatch in vector subtraction")
    }
}

/// Canonical inner product `sum_j u_j v_j`.
pub fn inner_product(u: &HilbertVector, v: &HilbertVector) -> Result<f64> {
    u.check_same_dim(v)?;
    Ok(dot(&u.0, &v.0))
}

pub fn norm(u: &HilbertVector) -> f64 {
    dot(&u.0, &u.0).sqrt()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The truncated space itself: a dimension and a free-text description of the
/// basis the coefficients refer to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbientSpace {
    dim: usize,
    description: String,
}

impl AmbientSpace {
    pub fn new(dim: usize, description: impl Into<String>) -> Result<Self> {
        if dim < 3 {
            return Err(Error::AmbientTooSmall(dim));
        }
        Ok(Self {
            dim,
            description: description.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Builds an element of this space, rejecting coefficient vectors of the
    /// wrong length.
    pub fn vector(&self, coeffs: Vec<f64>) -> Result<HilbertVector> {
        if coeffs.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: coeffs.len(),
            });
        }
        HilbertVector::new(coeffs)
    }

    pub fn contains(&self, v: &HilbertVector) -> bool {
        v.dim() == self.dim
    }
}

/// Abscissae and quadrature weights on which curves are sampled.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl CurveGrid {
    /// Trapezoidal weights on arbitrary strictly increasing abscissae.
    pub fn trapezoidal(points: Vec<f64>) -> Result<Self> {
        check_abscissae(&points)?;
        let m = points.len();
        let mut weights = vec![0.0; m];
        for k in 0..m - 1 {
            let half = 0.5 * (points[k + 1] - points[k]);
            weights[k] += half;
            weights[k + 1] += half;
        }
        Ok(Self { points, weights })
    }

    /// `m` equispaced points spanning `[a, b]` with trapezoidal weights.
    pub fn uniform(m: usize, a: f64, b: f64) -> Result<Self> {
        if m < 2 || !(b > a) {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points on a nonempty interval, got m = {m} on [{a}, {b}]"
            )));
        }
        let step = (b - a) / (m - 1) as f64;
        let mut points: Vec<f64> = (0..m).map(|k| a + step * k as f64).collect();
        points[m - 1] = b;
        Self::trapezoidal(points)
    }

    /// Grid with caller-supplied quadrature weights.
    pub fn with_weights(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_abscissae(&points)?;
        if weights.len() != points.len() {
            return Err(Error::GridMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        if let Some(k) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "weight {k} is not a positive finite number"
            )));
        }
        Ok(Self { points, weights })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn interval_length(&self) -> f64 {
        self.points[self.points.len() - 1] - self.points[0]
    }

    /// Quadrature approximation of the squared L2 norm of sampled values.
    pub fn l2_norm_sq(&self, samples: &[f64]) -> Result<f64> {
        self.check_len(samples.len())?;
        Ok(self
            .weights
            .iter()
            .zip(samples)
            .map(|(w, s)| w * s * s)
            .sum())
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::GridMismatch {
                expected: self.len(),
                found,
            });
        }
        Ok(())
    }
}

fn check_abscissae(points: &[f64]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 abscissae, got {}",
            points.len()
        )));
    }
    if let Some(k) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::InvalidGrid(format!("abscissa {k} is not finite")));
    }
    if let Some(k) = points.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid(format!(
            "abscissae must be strictly increasing (violated between {k} and {})",
            k + 1
        )));
    }
    Ok(())
}

/// Orthonormality tolerance for tabulated bases.
pub const BASIS_TOLERANCE: f64 = 1e-6;

/// `J` basis functions tabulated on a grid, verified orthonormal under the
/// grid's quadrature weights.
#[derive(Clone, Debug)]
pub struct CurveBasis {
    name: String,
    grid: CurveGrid,
    // one row of grid values per basis function
    table: Vec<Vec<f64>>,
}

impl CurveBasis {
    pub fn from_tabulation(
        name: impl Into<String>,
        grid: CurveGrid,
        table: Vec<Vec<f64>>,
    ) -> Result<Self> {
        for row in &table {
            grid.check_len(row.len())?;
        }
        for (j, row_j) in table.iter().enumerate() {
            for (k, row_k) in table.iter().enumerate().skip(j) {
                let g: f64 = grid
                    .weights
                    .iter()
                    .zip(row_j.iter().zip(row_k))
                    .map(|(w, (a, b))| w * a * b)
                    .sum();
                let target = if j == k { 1.0 } else { 0.0 };
                if (g - target).abs() > BASIS_TOLERANCE {
                    return Err(Error::NonOrthonormalBasis {
                        row: j,
                        col: k,
                        value: g,
                    });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            grid,
            table,
        })
    }

    /// Real trigonometric basis on the grid interval: the constant, then
    /// cosine/sine pairs of increasing frequency.
    pub fn fourier(grid: CurveGrid, dim: usize) -> Result<Self> {
        let a = grid.points[0];
        let len = grid.interval_length();
        let table = (0..dim)
            .map(|j| {
                grid.points
                    .iter()
                    .map(|&t| fourier_function(j, (t - a) / len) / len.sqrt())
                    .collect()
            })
            .collect();
        Self::from_tabulation("fourier", grid, table)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.table.len()
    }

    pub fn grid(&self) -> &CurveGrid {
        &self.grid
    }

    pub fn function(&self, j: usize) -> &[f64] {
        &self.table[j]
    }

    /// Evaluates `sum_j c_j phi_j` on the grid.
    pub fn synthesize(&self, coeffs: &HilbertVector) -> Result<Vec<f64>> {
        if coeffs.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: coeffs.dim(),
            });
        }
        let mut out = vec![0.0; self.grid.len()];
        for (c, row) in coeffs.as_slice().iter().zip(&self.table) {
            for (o, phi) in out.iter_mut().zip(row) {
                *o += c * phi;
            }
        }
        Ok(out)
    }
}

fn fourier_function(j: usize, u: f64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let freq = j.div_ceil(2) as f64;
    if j % 2 == 1 {
        std::f64::consts::SQRT_2 * (2.0 * PI * freq * u).cos()
    } else {
        std::f64::consts::SQRT_2 * (2.0 * PI * freq * u).sin()
    }
}

/// Coefficients of a sampled curve plus the quadrature norm of what the
/// basis failed to capture.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveCoefficients {
    pub coeffs: HilbertVector,
    pub residual: f64,
}

/// Projects grid samples onto the basis: `c_j = sum_k w_k x(t_k) phi_j(t_k)`.
pub fn curve_to_coeffs(samples: &[f64], basis: &CurveBasis) -> Result<CurveCoefficients> {
    let grid = &basis.grid;
    grid.check_len(samples.len())?;
    if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite {
            index,
            value: samples[index],
        });
    }
    let weighted: Vec<f64> = grid
        .weights
        .iter()
        .zip(samples)
        .map(|(w, s)| w * s)
        .collect();
    let coeffs =
        HilbertVector::from_raw(basis.table.iter().map(|row| dot(&weighted, row)).collect());
    let fitted = basis.synthesize(&coeffs)?;
    let resid: Vec<f64> = samples.iter().zip(&fitted).map(|(s, f)| s - f).collect();
    let residual = grid.l2_norm_sq(&resid)?.sqrt();
    Ok(CurveCoefficients { coeffs, residual })
}

/// Curves read from the delimited-text format.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveTable {
    pub abscissae: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
}

impl CurveTable {
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut abscissae: Option<Vec<f64>> = None;
        let mut curves = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let row = r + 1;
            let record = record?;
            let values = record
                .iter()
                .enumerate()
                .map(|(c, field)| {
                    field.parse::<f64>().map_err(|e| Error::Parse {
                        row,
                        column: c + 1,
                        message: format!("{field:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            match &abscissae {
                None => {
                    check_abscissae(&values).map_err(|e| Error::Parse {
                        row,
                        column: 1,
                        message: e.to_string(),
                    })?;
                    abscissae = Some(values);
                }
                Some(header) => {
                    if values.len() != header.len() {
                        return Err(Error::Parse {
                            row,
                            column: values.len().min(header.len()) + 1,
                            message: format!(
                                "expected {} values, found {}",
                                header.len(),
                                values.len()
                            ),
                        });
                    }
                    curves.push(values);
                }
            }
        }
        let abscissae = abscissae.ok_or(Error::Parse {
            row: 1,
            column: 1,
            message: "missing header row of grid abscissae".into(),
        })?;
        Ok(Self { abscissae, curves })
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        write_row(&mut writer, &self.abscissae)?;
        for curve in &self.curves {
            write_row(&mut writer, curve)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Converts every curve to coefficients against `basis`, whose grid must
    /// match the table's abscissae.
    pub fn to_coefficients(&self, basis: &CurveBasis) -> Result<Vec<CurveCoefficients>> {
        if self.abscissae != basis.grid.points {
            return Err(Error::InvalidGrid(
                "curve abscissae differ from the basis grid".into(),
            ));
        }
        self.curves
            .iter()
            .map(|c| curve_to_coeffs(c, basis))
            .collect()
    }
}

fn write_row<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        write!(w, "{v}")?;
    }
    w.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(c: &[f64]) -> HilbertVector {
        HilbertVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        assert_eq!(
            inner_product(&v(&[1., 0., 0.]), &v(&[1., 0., 0.])).unwrap(),
            1.0
        );
        assert_eq!(
            inner_product(&v(&[1., 0., 0.]), &v(&[0., 1., 0.])).unwrap(),
            0.0
        );
        assert_eq!(
            inner_product(&v(&[1., 2., 0.]), &v(&[3., 4., 0.])).unwrap(),
            11.0
        );
    }

    #[test]
    fn inner_product_dimension_mismatch_reports_both_lengths() {
        let err = inner_product(&v(&[1., 0., 0.]), &v(&[1., 0.])).unwrap_err();
        match err {
            Error::DimensionMismatch { left: 3, right: 2 } => {}
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err_text(&v(&[1., 0., 0.]), &v(&[1., 0.])).contains('3'));
    }

    fn err_text(a: &HilbertVector, b: &HilbertVector) -> String {
        inner_product(a, b).unwrap_err().to_string()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&v(&[0., 0., 0.])), 0.0);
        assert_eq!(norm(&v(&[3., 4., 0.])), 5.0);
        assert_eq!(norm(&v(&[1., 1., 1., 1.])), 2.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            HilbertVector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn ambient_space_requires_three_coordinates() {
        assert!(AmbientSpace::new(2, "too small").is_err());
        let space = AmbientSpace::new(3, "axes").unwrap();
        assert!(space.vector(vec![1.0, 2.0]).is_err());
        assert!(space.contains(&space.vector(vec![1.0, 2.0, 3.0]).unwrap()));
    }

    #[test]
    fn trapezoid_weights_sum_to_interval_length() {
        let grid = CurveGrid::trapezoidal(vec![0.0, 0.1, 0.35, 0.9, 2.0]).unwrap();
        let total: f64 = grid.weights().iter().sum();
        assert!((total - 2.0).abs() <= 1e-12 * 2.0);
        let grid = CurveGrid::uniform(256, -1.0, 3.0).unwrap();
        let total: f64 = grid.weights().iter().sum();
        assert!((total - 4.0).abs() <= 1e-12 * 4.0);
    }

    #[test]
    fn grid_rejects_unsorted_abscissae() {
        assert!(CurveGrid::trapezoidal(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }

    fn fourier(dim: usize) -> CurveBasis {
        CurveBasis::fourier(CurveGrid::uniform(256, 0.0, 1.0).unwrap(), dim).unwrap()
    }

    #[test]
    fn basis_function_maps_to_unit_coefficient() {
        let basis = fourier(7);
        let out = curve_to_coeffs(basis.function(0), &basis).unwrap();
        let c = out.coeffs.as_slice();
        assert!((c[0] - 1.0).abs() < 1e-9);
        assert!(c[1..].iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn zero_curve_maps_to_zero() {
        let basis = fourier(5);
        let out = curve_to_coeffs(&[0.0; 256], &basis).unwrap();
        assert!(out.coeffs.as_slice().iter().all(|&c| c == 0.0));
        assert_eq!(out.residual, 0.0);
    }

    /// Independent oracle: composite Simpson on a 4097-point grid of the
    /// analytic curve against the analytic basis functions.
    fn fine_quadrature_coefficient(curve: impl Fn(f64) -> f64, j: usize) -> f64 {
        let m = 4096;
        let h = 1.0 / m as f64;
        let f = |t: f64| curve(t) * fourier_function(j, t);
        let mut acc = f(0.0) + f(1.0);
        for k in 1..m {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn two_component_curve_recovers_coefficients() {
        let basis = fourier(9);
        let curve = |t: f64| 2.0 * fourier_function(0, t) + 3.0 * fourier_function(1, t);
        let expected: Vec<f64> = (0..9)
            .map(|j| fine_quadrature_coefficient(curve, j))
            .collect();
        assert!((expected[0] - 2.0).abs() < 1e-9 && (expected[1] - 3.0).abs() < 1e-9);

        let samples: Vec<f64> = basis.grid().points().iter().map(|&t| curve(t)).collect();
        let out = curve_to_coeffs(&samples, &basis).unwrap();
        for (c, e) in out.coeffs.as_slice().iter().zip(&expected) {
            assert!((c - e).abs() < 1e-6, "{c} vs {e}");
        }
        assert!(out.residual < 1e-6);
    }

    #[test]
    fn non_orthonormal_basis_names_gram_entry() {
        let grid = CurveGrid::uniform(64, 0.0, 1.0).unwrap();
        let ones = vec![1.0; 64];
        let err = CurveBasis::from_tabulation("dup", grid, vec![ones.clone(), ones]).unwrap_err();
        assert!(matches!(
            err,
            Error::NonOrthonormalBasis { row: 0, col: 1, .. }
        ));
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let basis = fourier(3);
        assert!(matches!(
            curve_to_coeffs(&[1.0; 10], &basis),
            Err(Error::GridMismatch {
                expected: 256,
                found: 10
            })
        ));
    }

    #[test]
    fn curve_file_round_trip_and_parse_errors() {
        let table = CurveTable {
            abscissae: vec![0.0, 0.5, 1.0],
            curves: vec![vec![1.0, -2.5, 1e-17], vec![0.1, 0.2, 0.30000000000000004]],
        };
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        assert_eq!(CurveTable::read(buf.as_slice()).unwrap(), table);

        let bad = "0,0.5,1\n1,2,3\n4,x,6\n";
        match CurveTable::read(bad.as_bytes()).unwrap_err() {
            Error::Parse {
                row: 3, column: 2, ..
            } => {}
            other => panic!("unexpected {other:?}"),
        }
        let short = "0,0.5,1\n1,2\n";
        assert!(matches!(
            CurveTable::read(short.as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    fn vec_pair(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..max_dim).prop_flat_map(|d| {
            (
                prop::collection::vec(-100.0..100.0f64, d),
                prop::collection::vec(-100.0..100.0f64, d),
            )
        })
    }

    proptest! {
        #[test]
        fn cauchy_schwarz((a, b) in vec_pair(40)) {
            let (u, w) = (v(&a), v(&b));
            let lhs = inner_product(&u, &w).unwrap().abs();
            prop_assert!(lhs <= norm(&u) * norm(&w) + 1e-12 * (1.0 + norm(&u) * norm(&w)));
        }

        #[test]
        fn parallelogram_law((a, b) in vec_pair(40)) {
            let (u, w) = (v(&a), v(&b));
            let lhs = norm(&(&u + &w)).powi(2) + norm(&(&u - &w)).powi(2);
            let rhs = 2.0 * norm(&u).powi(2) + 2.0 * norm(&w).powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300));
        }

        #[test]
        fn coefficient_norm_matches_quadrature_norm(c in prop::collection::vec(-3.0..3.0f64, 11)) {
            let basis = fourier(11);
            let coeffs = v(&c);
            let samples = basis.synthesize(&coeffs).unwrap();
            let quad = basis.grid().l2_norm_sq(&samples).unwrap().sqrt();
            let out = curve_to_coeffs(&samples, &basis).unwrap();
            prop_assert!((norm(&out.coeffs) - quad).abs() <= 1e-6 * quad.max(1e-12));
        }
    }
}
