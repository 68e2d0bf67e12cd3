use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::jets::Jet;

/// Dense square matrix of jets, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct JetMatrix {
    dim: usize,
    data: Vec<Jet>,
}

impl JetMatrix {
    /// Matrix filled with zero jets shaped like `like`.
    pub fn zeros(dim: usize, like: &Jet) -> JetMatrix {
        JetMatrix {
            dim,
            data: vec![like.zero_like(); dim * dim],
        }
    }

    pub fn identity(dim: usize, like: &Jet) -> JetMatrix {
        let mut m = JetMatrix::zeros(dim, like);
        for i in 0..dim {
            m.data[i * dim + i] = like.lift(1.0);
        }
        m
    }

    /// Constant matrix from plain values.
    pub fn from_values(values: &DMatrix<f64>, like: &Jet) -> JetMatrix {
        let dim = values.nrows();
        let mut m = JetMatrix::zeros(dim, like);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = like.lift(values[(i, j)]);
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Jet>>) -> JetMatrix {
        let dim = rows.len();
        let data: Vec<Jet> = rows.into_iter().flatten().collect();
        assert_eq!(data.len(), dim * dim, "matrix must be square");
        JetMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &Jet {
        &self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Jet) {
        self.data[i * self.dim + j] = value;
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, value: Jet) {
        self.data[j * self.dim + i] = value.clone();
        self.data[i * self.dim + j] = value;
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> JetMatrix {
        JetMatrix {
            dim: self.dim,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn truncate(&self, order: usize) -> JetMatrix {
        self.map(|j| j.truncate(order))
    }

    pub fn partial(&self, var: usize) -> JetMatrix {
        self.map(|j| j.partial(var))
    }

    pub fn values(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j).value())
    }

    pub fn mul(&self, other: &JetMatrix) -> JetMatrix {
        let d = self.dim;
        let mut out = JetMatrix::zeros(d, &self.data[0]);
        for i in 0..d {
            for j in 0..d {
                let mut acc = self.data[0].zero_like();
                for k in 0..d {
                    acc += self.get(i, k) * other.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn transpose(&self) -> JetMatrix {
        let d = self.dim;
        let mut out = self.clone();
        for i in 0..d {
            for j in 0..d {
                out.set(i, j, self.get(j, i).clone());
            }
        }
        out
    }

    /// Largest coefficient of `self - self^T`.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..i {
                m = m.max((self.get(i, j) - self.get(j, i)).max_abs());
            }
        }
        m
    }

    /// Jet-level inverse.
    ///
    /// Splits `G = G0 + N` into its value part and a nilpotent remainder;
    /// since `N^(K+1)` vanishes in the truncated algebra, the Neumann series
    /// `sum_k (-G0^-1 N)^k G0^-1` terminates and is exact.
    pub fn inverse(&self) -> Result<JetMatrix> {
        let g0 = self.values();
        let lu = g0.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::Singular);
        }
        let inv0 = lu.try_inverse().ok_or(Error::Singular)?;
        let scale = g0.abs().max().max(1.0);
        if inv0.iter().any(|x| !x.is_finite()) || inv0.abs().max() * scale > 1e14 {
            return Err(Error::Singular);
        }
        let like = &self.data[0];
        let inv0_j = JetMatrix::from_values(&inv0, like);
        let nil = self.map(|j| {
            let mut c = j.clone();
            c -= j.lift(j.value());
            c
        });
        let step = inv0_j.mul(&nil).map(|j| -j);
        let mut term = inv0_j.clone();
        let mut sum = inv0_j;
        for _ in 0..like.order() {
            term = step.mul(&term);
            for (s, t) in sum.data.iter_mut().zip(&term.data) {
                *s += t;
            }
        }
        Ok(sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_of_identity_and_diagonal() {
        let like = Jet::constant(0.0, 2, 2);
        let id = JetMatrix::identity(3, &like);
        assert_eq!(id.inverse().unwrap(), id);
        let d = JetMatrix::from_values(
            &DMatrix::from_diagonal(&nalgebra::dvector![2.0, 3.0]),
            &like,
        );
        let inv = d.inverse().unwrap();
        assert_relative_eq!(inv.get(0, 0).value(), 0.5);
        assert_relative_eq!(inv.get(1, 1).value(), 1.0 / 3.0);
        assert_eq!(inv.get(0, 1).value(), 0.0);
    }

    #[test]
    fn walker_block_inverse() {
        let x = Jet::seed_point(&[0.3, -1.2], 2).unwrap();
        let h = &x[0].square() * &x[1] + x[1].scale(2.0);
        let zero = h.zero_like();
        let one = h.lift(1.0);
        let m = JetMatrix::from_rows(vec![
            vec![zero.clone(), one.clone()],
            vec![one.clone(), h.clone()],
        ]);
        let inv = m.inverse().unwrap();
        let expect = JetMatrix::from_rows(vec![vec![-&h, one.clone()], vec![one, zero]]);
        for i in 0..2 {
            for j in 0..2 {
                let diff = inv.get(i, j) - expect.get(i, j);
                assert!(diff.max_abs() < 1e-14, "{i}{j}: {diff:?}");
            }
        }
    }

    #[test]
    fn singular_rejected() {
        let like = Jet::constant(0.0, 1, 1);
        let m = JetMatrix::zeros(2, &like);
        assert_eq!(m.inverse(), Err(Error::Singular));
    }
}
