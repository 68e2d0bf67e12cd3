use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::Jet;

/// Polynomial in the single variable `u`, constant term first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct UPoly {
    pub coeffs: Vec<f64>,
}

impl UPoly {
    pub fn new(coeffs: Vec<f64>) -> UPoly {
        UPoly { coeffs }
    }

    pub fn constant(c: f64) -> UPoly {
        UPoly { coeffs: vec![c] }
    }

    pub fn zero() -> UPoly {
        UPoly { coeffs: vec![] }
    }

    /// Random polynomial of degree `<= degree` with coefficients uniform in `[-1, 1]`.
    pub fn random<R: Rng>(rng: &mut R, degree: usize) -> UPoly {
        UPoly {
            coeffs: (0..=degree).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
        }
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|&c| c != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn eval_jet(&self, u: &Jet) -> Jet {
        let mut acc = u.zero_like();
        for &c in self.coeffs.iter().rev() {
            acc = &acc * u + c;
        }
        acc
    }

    pub fn derivative(&self) -> UPoly {
        UPoly {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> UPoly {
        UPoly {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &UPoly) -> UPoly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &UPoly, k: usize| p.coeffs.get(k).copied().unwrap_or(0.0);
        UPoly {
            coeffs: (0..len).map(|k| get(self, k) + get(other, k)).collect(),
        }
    }

    pub fn mul(&self, other: &UPoly) -> UPoly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return UPoly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UPoly { coeffs: out }
    }

    /// Range of values on `[lo, hi]`, from endpoints and interior critical points.
    pub fn range_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut candidates = vec![lo, hi];
        let d = self.derivative();
        match d.degree() {
            Some(0) | None => {}
            Some(1) => candidates.push(-d.coeffs[0] / d.coeffs[1]),
            Some(_) => {
                // dense scan is enough for the low degrees used here
                let steps = 2000;
                for k in 0..=steps {
                    candidates.push(lo + (hi - lo) * k as f64 / steps as f64);
                }
            }
        }
        candidates
            .into_iter()
            .filter(|t| *t >= lo && *t <= hi)
            .map(|t| self.eval(t))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
                (a.min(y), b.max(y))
            })
    }

    /// Parses a space-separated coefficient list, constant term first.
    pub fn parse(text: &str) -> Result<UPoly> {
        let coeffs = text
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("not a number: `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coefficient in `{text}`"
            )));
        }
        Ok(UPoly { coeffs })
    }
}

impl fmt::Display for UPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.coeffs.iter().map(|c| format!("{c}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Sparse polynomial in `nvars` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    nvars: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl MultiPoly {
    pub fn zero(nvars: usize) -> MultiPoly {
        MultiPoly {
            nvars,
            terms: Vec::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> MultiPoly {
        MultiPoly::zero(nvars).with_term(&vec![0; nvars], c)
    }

    pub fn var(nvars: usize, index: usize) -> MultiPoly {
        let mut e = vec![0; nvars];
        e[index] = 1;
        MultiPoly::zero(nvars).with_term(&e, 1.0)
    }

    /// Adds `coeff * prod x_i^exps[i]`.
    pub fn with_term(mut self, exps: &[u32], coeff: f64) -> MultiPoly {
        assert_eq!(exps.len(), self.nvars, "exponent vector length");
        if coeff == 0.0 {
            return self;
        }
        match self.terms.iter_mut().find(|(e, _)| e.as_slice() == exps) {
            Some((_, c)) => *c += coeff,
            None => self.terms.push((exps.to_vec(), coeff)),
        }
        self.terms.retain(|(_, c)| *c != 0.0);
        self
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[(Vec<u32>, f64)] {
        &self.terms
    }

    pub fn depends_on(&self, var: usize) -> bool {
        self.terms.iter().any(|(e, _)| e[var] > 0)
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out = out.with_term(e, *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> MultiPoly {
        let mut out = MultiPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            out = out.with_term(e, c * s);
        }
        out
    }

    pub fn partial(&self, var: usize) -> MultiPoly {
        let mut out = MultiPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[var] > 0 {
                let mut lower = e.clone();
                lower[var] -= 1;
                out = out.with_term(&lower, c * e[var] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(&k, &xi)| xi.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn eval_jet(&self, x: &[Jet]) -> Jet {
        let mut acc = x[0].zero_like();
        for (e, c) in &self.terms {
            let mut term = x[0].lift(*c);
            for (k, xi) in e.iter().zip(x) {
                if *k > 0 {
                    term = &term * &xi.powi(*k as i32);
                }
            }
            acc += term;
        }
        acc
    }
}

/// Polynomial map `R^m -> R^m`, used as a coordinate change `x = Phi(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMap {
    pub components: Vec<MultiPoly>,
}

impl PolyMap {
    pub fn identity(m: usize) -> PolyMap {
        PolyMap {
            components: (0..m).map(|i| MultiPoly::var(m, i)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Replaces component `index`.
    pub fn with_component(mut self, index: usize, poly: MultiPoly) -> PolyMap {
        self.components[index] = poly;
        self
    }

    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(y)).collect()
    }

    pub fn eval_jet(&self, y: &[Jet]) -> Vec<Jet> {
        self.components.iter().map(|c| c.eval_jet(y)).collect()
    }

    /// Symbolic Jacobian `J[a][b] = d Phi^a / d y^b`.
    pub fn jacobian(&self) -> Vec<Vec<MultiPoly>> {
        self.components
            .iter()
            .map(|c| (0..self.dim()).map(|b| c.partial(b)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn upoly_derivative_lowers_degree() {
        let p = UPoly::new(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.derivative(), UPoly::new(vec![2.0, 6.0]));
        assert_eq!(p.derivative().degree(), Some(1));
        assert_eq!(p.eval(2.0), 17.0);
    }

    #[test]
    fn upoly_jet_eval_matches_derivative() {
        let p = UPoly::new(vec![0.5, -1.0, 0.25, 2.0]);
        let u = Jet::variable(0, 0.7, 1, 2).unwrap();
        let j = p.eval_jet(&u);
        assert_relative_eq!(j.value(), p.eval(0.7), epsilon = 1e-14);
        assert_relative_eq!(
            j.derivative(&[0]),
            p.derivative().eval(0.7),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            j.derivative(&[0, 0]),
            p.derivative().derivative().eval(0.7),
            epsilon = 1e-14
        );
    }

    #[test]
    fn upoly_range() {
        let p = UPoly::new(vec![-1.0, 0.0, -0.25]);
        let (lo, hi) = p.range_on(-1.0, 1.0);
        assert_relative_eq!(lo, -1.25);
        assert_relative_eq!(hi, -1.0);
    }

    #[test]
    fn upoly_parse() {
        assert_eq!(
            UPoly::parse("1 0 0.5").unwrap(),
            UPoly::new(vec![1.0, 0.0, 0.5])
        );
        assert!(UPoly::parse("1 x").is_err());
    }

    #[test]
    fn multipoly_partial_and_eval() {
        // p = x^2 y - 3 z
        let p = MultiPoly::zero(3)
            .with_term(&[2, 1, 0], 1.0)
            .with_term(&[0, 0, 1], -3.0);
        assert_eq!(p.eval(&[2.0, 3.0, 1.0]), 9.0);
        assert_eq!(p.partial(0).eval(&[2.0, 3.0, 1.0]), 12.0);
        assert_eq!(p.partial(2).eval(&[2.0, 3.0, 1.0]), -3.0);
        let y = Jet::seed_point(&[2.0, 3.0, 1.0], 2).unwrap();
        let j = p.eval_jet(&y);
        assert_eq!(j.value(), 9.0);
        assert_eq!(j.derivative(&[0, 1]), 4.0);
        assert!(p.depends_on(1));
    }
}
