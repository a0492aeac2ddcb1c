//! Dense-vector primitives shared by all modules.

use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};

/// A dense feature vector. All vectors in a model share one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(components: Vec<f64>) -> Self {
        Vector(components)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.dim(),
            });
        }
        Ok(())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Euclidean distance between two vectors of equal dimension.
pub fn euclidean(a: &Vector, b: &Vector) -> Result<f64> {
    b.check_dim(a.dim())?;
    let sum: f64 = a
        .components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum.sqrt())
}

/// Element-wise square of each component.
pub fn squared_components(a: &Vector) -> Vector {
    Vector(a.components().iter().map(|c| c * c).collect())
}

/// Component-wise arithmetic mean of a non-empty list of vectors.
pub fn mean_of(points: &[Vector]) -> Result<Vector> {
    let first = points.first().ok_or(Error::EmptyInput("mean_of"))?;
    let dim = first.dim();
    let mut acc = vec![0.0; dim];
    for v in points {
        v.check_dim(dim)?;
        for (a, c) in acc.iter_mut().zip(v.components()) {
            *a += c;
        }
    }
    let n = points.len() as f64;
    Ok(Vector(acc.into_iter().map(|a| a / n).collect()))
}

/// Component-wise sum, used by CF construction.
pub(crate) fn add(a: &Vector, b: &Vector) -> Result<Vector> {
    b.check_dim(a.dim())?;
    Ok(Vector(
        a.components()
            .iter()
            .zip(b.components())
            .map(|(x, y)| x + y)
            .collect(),
    ))
}

/// a*wa + b*wb, component-wise.
pub(crate) fn weighted_sum(a: &Vector, wa: f64, b: &Vector, wb: f64) -> Result<Vector> {
    b.check_dim(a.dim())?;
    Ok(Vector(
        a.components()
            .iter()
            .zip(b.components())
            .map(|(x, y)| x * wa + y * wb)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec())
    }

    #[test]
    fn euclidean_345_triangle() {
        assert_eq!(euclidean(&v(&[0.0, 0.0]), &v(&[3.0, 4.0])).unwrap(), 5.0);
    }

    #[test]
    fn euclidean_identical_is_zero() {
        let a = v(&[1.0, 2.0, 3.0]);
        assert_eq!(euclidean(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn euclidean_unit_diagonal() {
        let d = euclidean(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap();
        assert!((d - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn euclidean_dimension_mismatch() {
        assert!(matches!(
            euclidean(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn squared_components_cases() {
        assert_eq!(squared_components(&v(&[0.0, 0.0])), v(&[0.0, 0.0]));
        assert_eq!(squared_components(&v(&[-2.0, 3.0])), v(&[4.0, 9.0]));
        assert_eq!(squared_components(&v(&[1.0, 1.0, 1.0])), v(&[1.0, 1.0, 1.0]));
    }

    #[test]
    fn mean_of_cases() {
        assert_eq!(mean_of(&[v(&[0.0, 0.0]), v(&[2.0, 2.0])]).unwrap(), v(&[1.0, 1.0]));
        assert_eq!(mean_of(&[v(&[5.0, 5.0])]).unwrap(), v(&[5.0, 5.0]));
        assert_eq!(
            mean_of(&[v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[2.0, 2.0])]).unwrap(),
            v(&[1.0, 1.0])
        );
        assert!(matches!(mean_of(&[]), Err(Error::EmptyInput(_))));
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in proptest::collection::vec(-1e3f64..1e3, 3),
                               b in proptest::collection::vec(-1e3f64..1e3, 3),
                               c in proptest::collection::vec(-1e3f64..1e3, 3)) {
            let (a, b, c) = (Vector::new(a), Vector::new(b), Vector::new(c));
            let ab = euclidean(&a, &b).unwrap();
            let bc = euclidean(&b, &c).unwrap();
            let ac = euclidean(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn euclidean_symmetric(a in proptest::collection::vec(-1e3f64..1e3, 4),
                               b in proptest::collection::vec(-1e3f64..1e3, 4)) {
            let (a, b) = (Vector::new(a), Vector::new(b));
            prop_assert_eq!(euclidean(&a, &b).unwrap(), euclidean(&b, &a).unwrap());
        }

        #[test]
        fn mean_matches_reverse_accumulation(
            vs in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 1..40)
        ) {
            let vs: Vec<Vector> = vs.into_iter().map(Vector::new).collect();
            let m = mean_of(&vs).unwrap();
            let reversed: Vec<Vector> = vs.iter().rev().cloned().collect();
            let mr = mean_of(&reversed).unwrap();
            for d in 0..3 {
                let scale = m[d].abs().max(1.0);
                prop_assert!((m[d] - mr[d]).abs() / scale < 1e-12);
            }
        }
    }
}
