use nalgebra::{Isometry3, Point3};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Points with per-point attributes and class labels.
///
/// Model input features are `[x, y, z, attributes...]`, so
/// `C_in = 3 + attribute_width`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<[f64; 3]>,
    /// Row-major `[N, attribute_width]`.
    pub attributes: Vec<f64>,
    pub attribute_width: usize,
    pub labels: Vec<usize>,
}

impl PointCloud {
    pub fn new(positions: Vec<[f64; 3]>, attributes: Vec<f64>, attribute_width: usize, labels: Vec<usize>) -> Result<Self> {
        let n = positions.len();
        if attributes.len() != n * attribute_width || labels.len() != n {
            return Err(Error::shape(
                "PointCloud::new",
                format!(
                    "{n} points, {} attribute values (width {attribute_width}), {} labels",
                    attributes.len(),
                    labels.len()
                ),
            ));
        }
        Ok(Self {
            positions,
            attributes,
            attribute_width,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn input_width(&self) -> usize {
        3 + self.attribute_width
    }

    /// `[N, 3 + attribute_width]` model input with coordinates multiplied by `coord_scale`.
    pub fn input_features(&self, coord_scale: f64) -> Tensor {
        let w = self.input_width();
        let mut data = Vec::with_capacity(self.len() * w);
        for (i, p) in self.positions.iter().enumerate() {
            data.extend(p.iter().map(|v| v * coord_scale));
            data.extend_from_slice(&self.attributes[i * self.attribute_width..(i + 1) * self.attribute_width]);
        }
        Tensor::new(vec![self.len(), w], data).expect("consistent by construction")
    }

    pub fn transformed(&self, m: &Isometry3<f64>) -> Self {
        Self {
            positions: self
                .positions
                .iter()
                .map(|&p| {
                    let q = m * Point3::from(p);
                    [q.x, q.y, q.z]
                })
                .collect(),
            ..self.clone()
        }
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        let w = self.attribute_width;
        Self {
            positions: rows.iter().map(|&r| self.positions[r]).collect(),
            attributes: rows
                .iter()
                .flat_map(|&r| self.attributes[r * w..(r + 1) * w].iter().copied())
                .collect(),
            attribute_width: w,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }
}
