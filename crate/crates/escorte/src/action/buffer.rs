use std::collections::VecDeque;

use crate::numcore::{Matrix, NumError};

/// Ring of the last `w` subject vectors with a per-slot presence mask.
///
/// Frames where the subject was not seen are recorded with a zero-vector
/// placeholder and mask bit 0; the model excludes those slots from
/// attention and pooling.
#[derive(Debug, Clone)]
pub struct WindowBuffer {
    capacity: usize,
    dim: usize,
    entries: VecDeque<(Vec<f64>, bool)>,
}

impl WindowBuffer {
    pub fn new(capacity: usize, dim: usize) -> Self {
        assert!(capacity > 0 && dim > 0);
        WindowBuffer {
            capacity,
            dim,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    /// Append one frame; evicts the oldest entry at capacity. `None` records
    /// an absent-subject frame.
    pub fn push(&mut self, subject_vector: Option<&[f64]>) -> Result<(), NumError> {
        let entry = match subject_vector {
            Some(v) => {
                if v.len() != self.dim {
                    return Err(NumError::BadShape {
                        op: "window_push",
                        expected: "vector length = buffer dim",
                        rows: 1,
                        cols: v.len(),
                    });
                }
                (v.to_vec(), true)
            }
            None => (vec![0.0; self.dim], false),
        };
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
        Ok(())
    }

    /// Chronological presence mask (oldest first).
    pub fn mask(&self) -> Vec<bool> {
        self.entries.iter().map(|(_, m)| *m).collect()
    }

    /// Window contents as a `w x d` matrix plus mask; `None` until full.
    pub fn as_input(&self) -> Option<(Matrix, Vec<bool>)> {
        if !self.is_full() {
            return None;
        }
        let mut data = Vec::with_capacity(self.capacity * self.dim);
        for (v, _) in &self.entries {
            data.extend_from_slice(v);
        }
        Some((
            Matrix::from_vec_unchecked(self.capacity, self.dim, data),
            self.mask(),
        ))
    }
}
