//! Named parameter tensors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// Ordered collection of named tensors. Gradients and optimizer moments use
/// the same layout as the parameters they belong to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet<T> {
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ParameterSet<T> {
    pub fn new() -> Self {
        Self { tensors: Vec::new() }
    }

    /// Appends a zero tensor and returns its slot.
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize]) -> usize {
        let len = shape.iter().product();
        self.tensors.push(Tensor {
            name: name.into(),
            shape: shape.to_vec(),
            data: vec![T::zero(); len],
        });
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, slot: usize) -> &[T] {
        &self.tensors[slot].data
    }

    pub fn get_mut(&mut self, slot: usize) -> &mut [T] {
        &mut self.tensors[slot].data
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn find(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Total number of scalars.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: vec![T::zero(); t.data.len()],
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for t in &mut self.tensors {
            t.data.fill(T::zero());
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Converts every element to another precision.
    pub fn cast<U: Scalar>(&self) -> ParameterSet<U> {
        ParameterSet {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                })
                .collect(),
        }
    }

    /// Replaces all values from tensors with matching names and shapes.
    pub fn load_from(&mut self, other: &[Tensor<T>]) -> Result<()> {
        if other.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, found {}",
                self.tensors.len(),
                other.len()
            )));
        }
        for (dst, src) in self.tensors.iter_mut().zip(other) {
            if dst.name != src.name || dst.shape != src.shape {
                return Err(Error::Shape(format!(
                    "tensor {} {:?} does not match {} {:?}",
                    src.name, src.shape, dst.name, dst.shape
                )));
            }
            dst.data.copy_from_slice(&src.data);
        }
        Ok(())
    }
}

/// Uniform in `[-bound, bound]` with `bound = sqrt(3 / fan_in)` (unit
/// variance gain).
pub(crate) fn init_fan_in<T: Scalar>(data: &mut [T], fan_in: usize, rng: &mut ChaCha8Rng) {
    let bound = (3.0 / fan_in.max(1) as f64).sqrt();
    for v in data {
        *v = T::from_f64(rng.gen_range(-bound..=bound));
    }
}

/// Fills a row-major `rows × cols` block (`rows ≥ cols` or `rows ≤ cols`)
/// with orthonormal rows or columns from Gram–Schmidt on random vectors.
pub(crate) fn init_orthogonal<T: Scalar>(data: &mut [T], rows: usize, cols: usize, rng: &mut ChaCha8Rng) {
    let (n, dim) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let v = if rows <= cols { basis[r][c] } else { basis[c][r] };
            data[r * cols + c] = T::from_f64(v);
        }
    }
}
