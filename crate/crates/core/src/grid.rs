//! Image-shaped containers. All grids are row-major, top row first.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Per-pixel depth in mm. A pixel is valid iff its value is finite and > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be >= 1, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("non-empty grid")
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidGrid("ragged rows".into()));
        }
        Self::new(width, height, rows.concat())
    }

    #[inline]
    pub fn is_valid_value(v: f64) -> bool {
        v.is_finite() && v > 0.0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[self.index(x, y)]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        let i = self.index(x, y);
        self.values[i] = v;
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        Self::is_valid_value(self.get(x, y))
    }

    pub fn valid_mask(&self) -> Vec<bool> {
        self.values
            .iter()
            .map(|&v| Self::is_valid_value(v))
            .collect()
    }

    pub fn valid_count(&self) -> usize {
        self.values
            .iter()
            .filter(|&&v| Self::is_valid_value(v))
            .count()
    }

    pub fn same_shape<T>(&self, other: &Grid<T>) -> bool {
        self.width == other.width() && self.height == other.height()
    }

    pub fn ensure_same_shape(&self, other: &DepthMap) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::ShapeMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: other.width,
                right_height: other.height,
            });
        }
        Ok(())
    }
}

/// A grid of values paired with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
    valid: Vec<bool>,
}

/// Back-projected camera-space points (mm).
pub type PointMap = Grid<Point3<f64>>;

/// Per-pixel normal vectors. Raw cross products (mm²) out of
/// [`estimate_normals`](crate::geometry::estimate_normals), unit vectors out of
/// [`unit_normals`](crate::geometry::unit_normals).
pub type NormalMap = Grid<Vector3<f64>>;

/// Per-pixel 3-vector field, e.g. Sobel derivatives of a point map.
pub type VectorGrid = Grid<Vector3<f64>>;

/// ∂L/∂d̂ per pixel (loss units per mm). Invalid exactly where the prediction is invalid.
pub type GradientMap = Grid<f64>;

impl<T> Grid<T> {
    pub fn from_parts(width: usize, height: usize, values: Vec<T>, valid: Vec<bool>) -> Self {
        assert_eq!(values.len(), width * height, "grid value count");
        assert_eq!(valid.len(), width * height, "grid mask length");
        Self {
            width,
            height,
            values,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.values[self.index(x, y)]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[self.index(x, y)]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Iterates `(index, value)` over valid cells in row-major order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, &T)> {
        self.values
            .iter()
            .zip(&self.valid)
            .enumerate()
            .filter_map(|(i, (v, &ok))| ok.then_some((i, v)))
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [T], &mut [bool]) {
        (&mut self.values, &mut self.valid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validity_rule() {
        let d = DepthMap::new(5, 1, vec![1.0, 0.0, -2.0, f64::NAN, f64::INFINITY]).unwrap();
        assert_eq!(d.valid_mask(), vec![true, false, false, false, false]);
        assert_eq!(d.valid_count(), 1);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(DepthMap::new(0, 3, vec![]).is_err());
        assert!(DepthMap::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DepthMap::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn shape_check() {
        let a = DepthMap::filled(3, 2, 1.0);
        let b = DepthMap::filled(2, 3, 1.0);
        assert!(matches!(
            a.ensure_same_shape(&b),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
