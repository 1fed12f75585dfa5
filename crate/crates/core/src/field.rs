//! Nodal solution fields.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{Error, Result};

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidArgument(alloc::format!("non-finite field value at index {i}"))),
        None => Ok(()),
    }
}

/// One real value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values)?;
        Ok(ScalarField(values))
    }

    pub fn zeros(n: usize) -> Self {
        ScalarField(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Two real values per node, interleaved `[x0, y0, x1, y1, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(Vec<f64>);

impl VectorField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() % 2 != 0 {
            return Err(Error::InvalidArgument("vector field needs an even number of values".into()));
        }
        check_finite(&values)?;
        Ok(VectorField(values))
    }

    pub fn zeros(nodes: usize) -> Self {
        VectorField(vec![0.0; 2 * nodes])
    }

    pub fn num_nodes(&self) -> usize {
        self.0.len() / 2
    }

    pub fn at(&self, node: usize) -> [f64; 2] {
        [self.0[2 * node], self.0[2 * node + 1]]
    }

    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.num_nodes())
            .map(|i| libm::hypot(self.0[2 * i], self.0[2 * i + 1]))
            .collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for VectorField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}
