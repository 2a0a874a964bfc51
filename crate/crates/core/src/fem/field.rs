//! Nodal fields with a unit label.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("field has {found} values, mesh has {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
    unit: String,
}

impl ScalarField {
    pub fn new(values: Vec<f64>, unit: impl Into<String>) -> Result<Self, FieldError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self {
            values,
            unit: unit.into(),
        })
    }

    pub fn constant(n: usize, value: f64, unit: impl Into<String>) -> Self {
        assert!(value.is_finite());
        Self {
            values: vec![value; n],
            unit: unit.into(),
        }
    }

    pub fn check_len(&self, n_nodes: usize) -> Result<(), FieldError> {
        if self.values.len() == n_nodes {
            Ok(())
        } else {
            Err(FieldError::LengthMismatch {
                expected: n_nodes,
                found: self.values.len(),
            })
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    values: Vec<[f64; 2]>,
    unit: String,
}

impl VectorField {
    pub fn new(values: Vec<[f64; 2]>, unit: impl Into<String>) -> Result<Self, FieldError> {
        if let Some(i) = values
            .iter()
            .position(|v| !(v[0].is_finite() && v[1].is_finite()))
        {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self {
            values,
            unit: unit.into(),
        })
    }

    pub fn zeros(n: usize, unit: impl Into<String>) -> Self {
        Self {
            values: vec![[0.0; 2]; n],
            unit: unit.into(),
        }
    }

    pub fn check_len(&self, n_nodes: usize) -> Result<(), FieldError> {
        if self.values.len() == n_nodes {
            Ok(())
        } else {
            Err(FieldError::LengthMismatch {
                expected: n_nodes,
                found: self.values.len(),
            })
        }
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn into_values(self) -> Vec<[f64; 2]> {
        self.values
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.values.iter().map(|v| v[0].hypot(v[1])).collect()
    }
}
