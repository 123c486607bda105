//! Feature matrices `Phi in R^{S x k}` and their provenance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, OrthonormalBasis, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SrSvd,
    Tabular,
    Random,
    Krylov,
    Bisimulation,
    Custom,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::SrSvd,
        Family::Tabular,
        Family::Random,
        Family::Krylov,
        Family::Bisimulation,
        Family::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::SrSvd => "sr-svd",
            Family::Tabular => "tabular",
            Family::Random => "random",
            Family::Krylov => "krylov",
            Family::Bisimulation => "bisimulation",
            Family::Custom => "custom",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Family::SrSvd => 0,
            Family::Tabular => 1,
            Family::Random => 2,
            Family::Krylov => 3,
            Family::Bisimulation => 4,
            Family::Custom => 5,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.tag() == tag)
            .ok_or_else(|| Error::Format(format!("unknown family tag {tag}")))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown representation family `{s}`")))
    }
}

/// Construction parameters recorded alongside a feature matrix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<String>,
    /// Number of leading columns kept from a larger decomposition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    /// Set when a Krylov space stopped growing before the requested size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturated_at: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A representation together with an orthonormal basis of its column space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    phi: Matrix,
    family: Family,
    provenance: Provenance,
    basis: OrthonormalBasis,
}

impl FeatureMatrix {
    /// Arbitrary features; the column-space basis is computed by SVD.
    pub fn new(phi: Matrix, family: Family, provenance: Provenance) -> Result<Self> {
        check_shape(&phi)?;
        linalg::ensure_finite(&phi, "feature matrix")?;
        let basis = linalg::column_space_basis(&phi, DEFAULT_RANK_TOL)?;
        Ok(Self {
            phi,
            family,
            provenance,
            basis,
        })
    }

    /// Features whose columns are already orthonormal (checked to 1e-9).
    pub fn orthonormal(q: Matrix, family: Family, provenance: Provenance) -> Result<Self> {
        check_shape(&q)?;
        let err = linalg::orthonormality_error(&q);
        if err > 1e-9 {
            return Err(Error::Numerical(format!(
                "{family} columns are not orthonormal (defect {err:e})"
            )));
        }
        Ok(Self {
            basis: OrthonormalBasis::from_orthonormal(q.clone()),
            phi: q,
            family,
            provenance,
        })
    }

    pub fn tabular(num_states: usize) -> Result<Self> {
        Self::orthonormal(
            Matrix::identity(num_states, num_states),
            Family::Tabular,
            Provenance::default(),
        )
    }

    pub fn phi(&self) -> &Matrix {
        &self.phi
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn num_states(&self) -> usize {
        self.phi.nrows()
    }

    /// Number of columns.
    pub fn k(&self) -> usize {
        self.phi.ncols()
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    /// The first `k` columns as a new feature matrix.
    pub fn leading_columns(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k() {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {k} of {} columns",
                self.k()
            )));
        }
        let phi = self.phi.columns(0, k).into_owned();
        let mut provenance = self.provenance.clone();
        provenance.truncation = Some(k);
        if self.basis.rank() == self.k() && self.phi == *self.basis.q() {
            Self::orthonormal(phi, self.family, provenance)
        } else {
            Self::new(phi, self.family, provenance)
        }
    }
}

fn check_shape(phi: &Matrix) -> Result<()> {
    let (s, k) = phi.shape();
    if k == 0 || s == 0 {
        return Err(Error::InvalidArgument(format!("feature matrix shape {s}x{k} is empty")));
    }
    if k > s {
        return Err(Error::InvalidArgument(format!(
            "feature matrix has k = {k} > S = {s}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_constructor_checks_columns() {
        let bad = Matrix::from_element(3, 1, 1.0);
        assert!(FeatureMatrix::orthonormal(bad.clone(), Family::Custom, Provenance::default()).is_err());
        let fm = FeatureMatrix::new(bad, Family::Custom, Provenance::default()).unwrap();
        assert_eq!(fm.rank(), 1);
        assert_eq!(fm.k(), 1);
    }

    #[test]
    fn shape_is_validated() {
        assert!(FeatureMatrix::new(Matrix::zeros(2, 3), Family::Custom, Provenance::default()).is_err());
        assert!(FeatureMatrix::new(Matrix::zeros(2, 0), Family::Custom, Provenance::default()).is_err());
    }

    #[test]
    fn leading_columns_records_truncation() {
        let fm = FeatureMatrix::tabular(5).unwrap();
        let head = fm.leading_columns(2).unwrap();
        assert_eq!(head.k(), 2);
        assert_eq!(head.provenance().truncation, Some(2));
        assert!(fm.leading_columns(6).is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
            assert_eq!(Family::from_tag(f.tag()).unwrap(), f);
        }
    }
}
