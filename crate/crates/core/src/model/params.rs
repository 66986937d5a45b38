//! Named parameter tensors.

use std::collections::HashMap;

use super::tensor::{Mat, Scalar};

/// Flat store of named tensors in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<S> {
    names: Vec<String>,
    tensors: Vec<Mat<S>>,
    index: HashMap<String, usize>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Adds or replaces a tensor and returns its id.
    pub fn insert(&mut self, name: &str, value: Mat<S>) -> usize {
        if let Some(&id) = self.index.get(name) {
            self.tensors[id] = value;
            return id;
        }
        self.names.push(name.to_string());
        self.tensors.push(value);
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, id: usize) -> &Mat<S> {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Mat<S> {
        &mut self.tensors[id]
    }

    pub fn by_name(&self, name: &str) -> Option<&Mat<S>> {
        self.id(name).map(|id| &self.tensors[id])
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Mat<S>> {
        self.id(name).map(|id| &mut self.tensors[id])
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    /// Number of tensors.
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar entries.
    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat<S>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Mat::is_finite)
    }

    /// Same tensors converted to another scalar type.
    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        let mut out = ParamStore::new();
        for (name, t) in self.iter() {
            let data = t.data.iter().map(|&v| T::of(v.f64())).collect();
            out.insert(name, Mat::from_vec(t.rows, t.cols, data));
        }
        out
    }

    /// Zero tensors with the same names and shapes.
    pub fn zeros_like(&self) -> Self {
        let mut out = ParamStore::new();
        for (name, t) in self.iter() {
            out.insert(name, Mat::zeros(t.rows, t.cols));
        }
        out
    }
}
