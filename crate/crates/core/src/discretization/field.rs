use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

/// Variance of one tensor slot with respect to the holomorphic frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Index {
    Lower,
    LowerBar,
    Upper,
    UpperBar,
}

impl Index {
    pub(crate) fn code(self) -> u8 {
        match self {
            Index::Lower => 0,
            Index::LowerBar => 1,
            Index::Upper => 2,
            Index::UpperBar => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Index::Lower,
            1 => Index::LowerBar,
            2 => Index::Upper,
            3 => Index::UpperBar,
            _ => return None,
        })
    }
}

/// Complex values at every lattice site.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub values: Vec<C>,
}

impl ScalarField {
    pub fn new(values: Vec<C>) -> Self {
        ScalarField { values }
    }

    pub fn constant(sites: usize, value: C) -> Self {
        ScalarField { values: vec![value; sites] }
    }

    pub fn from_real(values: impl IntoIterator<Item = f64>) -> Self {
        ScalarField { values: values.into_iter().map(|v| C::new(v, 0.0)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Tensor of frame components over the lattice.
///
/// Components are stored one site-field each, ordered row-major over the
/// slot indices (`dim^rank` fields of `sites` values).
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    dim: usize,
    shape: Vec<Index>,
    components: Vec<Vec<C>>,
}

impl TensorField {
    pub fn zeros(dim: usize, shape: Vec<Index>, sites: usize) -> Self {
        let count = dim.pow(shape.len() as u32);
        TensorField { dim, shape, components: vec![vec![C::new(0.0, 0.0); sites]; count] }
    }

    pub fn from_components(dim: usize, shape: Vec<Index>, components: Vec<Vec<C>>) -> Result<Self> {
        let count = dim.pow(shape.len() as u32);
        if components.len() != count {
            return Err(Error::Shape(format!(
                "rank {} tensor in dimension {dim} needs {count} components, got {}",
                shape.len(),
                components.len()
            )));
        }
        if let Some(first) = components.first() {
            if components.iter().any(|c| c.len() != first.len()) {
                return Err(Error::Shape("components have differing site counts".into()));
            }
        }
        Ok(TensorField { dim, shape, components })
    }

    pub fn scalar(field: ScalarField) -> Self {
        TensorField { dim: 1, shape: Vec::new(), components: vec![field.values] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &[Index] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn sites(&self) -> usize {
        self.components.first().map_or(0, Vec::len)
    }

    pub fn components(&self) -> &[Vec<C>] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Vec<C>] {
        &mut self.components
    }

    pub fn into_components(self) -> Vec<Vec<C>> {
        self.components
    }

    /// Flat component number of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn component(&self, index: &[usize]) -> &[C] {
        &self.components[self.offset(index)]
    }

    pub fn component_mut(&mut self, index: &[usize]) -> &mut Vec<C> {
        let o = self.offset(index);
        &mut self.components[o]
    }

    /// Components at one site, in flat order.
    pub fn at_site(&self, site: usize) -> Vec<C> {
        self.components.iter().map(|c| c[site]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|v_ij̄ - conj(v_jī)|` for a rank-2 tensor.
    pub fn hermitian_residue(&self) -> f64 {
        if self.rank() != 2 {
            return f64::NAN;
        }
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let a = &self.components[i * n + j];
                let b = &self.components[j * n + i];
                for (x, y) in a.iter().zip(b) {
                    worst = worst.max((x - y.conj()).norm());
                }
            }
        }
        worst
    }
}
