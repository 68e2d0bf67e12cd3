//! Parameter polynomials, jet matrices and metric fields over a chart.

mod matrix;
mod poly;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

pub use matrix::JetMatrix;
pub use poly::{MultiPoly, PolyMap, UPoly};

use crate::error::{Error, Result};
use crate::jets::{Jet, MAX_ORDER};

/// Chart coordinates; for Walker metrics ordered `(v, x^1, ..., x^n, u)`.
pub type ChartPoint = Vec<f64>;

pub type ComponentFn = dyn Fn(&[Jet]) -> Result<JetMatrix> + Send + Sync;
pub type PointPredicate = dyn Fn(&[f64]) -> bool + Send + Sync;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaKind {
    Zero,
    Constant,
    Varying,
}

/// Metadata attached by constructors of metrics in Walker form
/// `2 dv du + h + 2 A du + H du^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkerLayout {
    pub n: usize,
    pub fiber_depends_on_u: bool,
    pub lambda: LambdaKind,
}

/// A metric given by jet-valued components on one coordinate chart.
///
/// Components are evaluated on coordinate jets, so the same closure serves
/// plain evaluation, pullbacks and fiber restrictions.
#[derive(Clone)]
pub struct MetricField {
    pub dim: usize,
    /// `(positive, negative)` eigenvalue counts.
    pub signature: (usize, usize),
    pub label: String,
    pub params: BTreeMap<String, UPoly>,
    pub walker: Option<WalkerLayout>,
    components: Arc<ComponentFn>,
    domain: Arc<PointPredicate>,
    sample_box: Vec<(f64, f64)>,
    sample_filter: Arc<PointPredicate>,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("signature", &self.signature)
            .field("walker", &self.walker)
            .finish_non_exhaustive()
    }
}

impl MetricField {
    pub fn new(
        dim: usize,
        signature: (usize, usize),
        label: impl Into<String>,
        components: impl Fn(&[Jet]) -> Result<JetMatrix> + Send + Sync + 'static,
    ) -> MetricField {
        MetricField {
            dim,
            signature,
            label: label.into(),
            params: BTreeMap::new(),
            walker: None,
            components: Arc::new(components),
            domain: Arc::new(|_| true),
            sample_box: vec![(-0.5, 0.5); dim],
            sample_filter: Arc::new(|_| true),
        }
    }

    pub fn with_domain(mut self, domain: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Arc::new(domain);
        self
    }

    /// Sampling box and an extra predicate, stricter than the domain, for random points.
    pub fn with_sampling(
        mut self,
        sample_box: Vec<(f64, f64)>,
        filter: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
    ) -> Self {
        assert_eq!(sample_box.len(), self.dim);
        self.sample_box = sample_box;
        self.sample_filter = Arc::new(filter);
        self
    }

    pub fn with_walker(mut self, layout: WalkerLayout) -> Self {
        self.walker = Some(layout);
        self
    }

    pub fn with_param(mut self, name: impl Into<String>, p: UPoly) -> Self {
        self.params.insert(name.into(), p);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn sample_box(&self) -> &[(f64, f64)] {
        &self.sample_box
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        p.len() == self.dim && p.iter().all(|x| x.is_finite()) && (self.domain)(p)
    }

    /// Whether `p` is acceptable as a random sample (inside the domain and the sampling filter).
    pub fn admissible_sample(&self, p: &[f64]) -> bool {
        self.in_domain(p) && (self.sample_filter)(p)
    }

    /// Exact jet expansion of `g_ab` at `p` to the given order.
    pub fn eval(&self, p: &[f64], order: usize) -> Result<JetMatrix> {
        if p.len() != self.dim {
            return Err(Error::WrongDimension {
                op: "eval_metric",
                expected: self.dim.to_string(),
                got: p.len(),
            });
        }
        if order > MAX_ORDER {
            return Err(Error::UnsupportedOrder(order));
        }
        if !self.in_domain(p) {
            return Err(Error::OutsideDomain(p.to_vec()));
        }
        let coords = Jet::seed_point(p, order)?;
        (self.components)(&coords)
    }

    /// Evaluates on arbitrary coordinate jets (for compositions).
    pub fn eval_jets(&self, coords: &[Jet]) -> Result<JetMatrix> {
        let p: Vec<f64> = coords.iter().map(Jet::value).collect();
        if !self.in_domain(&p) {
            return Err(Error::OutsideDomain(p));
        }
        (self.components)(coords)
    }

    pub fn values(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.eval(p, 0)?.values())
    }

    /// Uniform sample from the sampling box, rejecting inadmissible points.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Result<ChartPoint> {
        for _ in 0..100_000 {
            let p: Vec<f64> = self
                .sample_box
                .iter()
                .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..hi) } else { lo })
                .collect();
            if self.admissible_sample(&p) {
                return Ok(p);
            }
        }
        Err(Error::InvalidParameter(format!(
            "no admissible sample point found for `{}`",
            self.label
        )))
    }

    /// The fiber metric `h` at fixed `(v, u)` as a standalone Riemannian field
    /// in the coordinates `x^1..x^n`.
    pub fn fiber_metric(&self, v: f64, u: f64) -> Result<MetricField> {
        let layout = self
            .walker
            .clone()
            .ok_or_else(|| Error::NotWalker(self.label.clone()))?;
        let n = layout.n;
        let parent = self.clone();
        let outer = self.clone();
        let embed = move |x: &[f64]| {
            let mut full = Vec::with_capacity(n + 2);
            full.push(v);
            full.extend_from_slice(x);
            full.push(u);
            full
        };
        let inner = outer.clone();
        let embed_inner = embed;
        let sample_box = self.sample_box[1..=n].to_vec();
        Ok(
            MetricField::new(n, (n, 0), format!("{}:fiber", self.label), move |x| {
                let like = &x[0];
                let mut full = Vec::with_capacity(n + 2);
                full.push(like.lift(v));
                full.extend(x.iter().cloned());
                full.push(like.lift(u));
                let g = parent.eval_jets(&full)?;
                let mut h = JetMatrix::zeros(n, like);
                for i in 0..n {
                    for j in 0..n {
                        h.set(i, j, g.get(i + 1, j + 1).clone());
                    }
                }
                Ok(h)
            })
            .with_domain(move |x| outer.in_domain(&embed(x)))
            .with_sampling(sample_box, move |x| {
                inner.admissible_sample(&embed_inner(x))
            }),
        )
    }
}

/// `g^-1` as a jet matrix.
pub fn inverse_metric(g: &JetMatrix) -> Result<JetMatrix> {
    g.inverse()
}

/// Eigenvalue sign counts of a symmetric matrix, `(positive, negative)`.
pub fn signature_of(m: &DMatrix<f64>) -> (usize, usize) {
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1e-300);
    let pos = eig
        .eigenvalues
        .iter()
        .filter(|&&e| e > 1e-12 * scale)
        .count();
    let neg = eig
        .eigenvalues
        .iter()
        .filter(|&&e| e < -1e-12 * scale)
        .count();
    (pos, neg)
}

/// Euclidean `sum x_i^2` of a slice of jets.
pub fn radius_sq(xs: &[Jet]) -> Jet {
    crate::jets::sum_squares(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_walker(n: usize) -> MetricField {
        MetricField::new(n + 2, (n + 1, 1), "flat", move |x| {
            let d = n + 2;
            let mut g = JetMatrix::zeros(d, &x[0]);
            g.set_sym(0, d - 1, x[0].lift(1.0));
            for i in 1..=n {
                g.set(i, i, x[0].lift(1.0));
            }
            Ok(g)
        })
        .with_walker(WalkerLayout {
            n,
            fiber_depends_on_u: false,
            lambda: LambdaKind::Zero,
        })
    }

    #[test]
    fn flat_metric_is_constant() {
        let g = flat_walker(2);
        let m = g.eval(&[0.3, 1.0, -2.0, 0.7], 2).unwrap();
        assert_eq!(m.get(0, 3).value(), 1.0);
        assert_eq!(m.get(3, 0).value(), 1.0);
        assert_eq!(m.get(1, 1).value(), 1.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(&m.get(i, j).coeffs()[1..], &[0.0; 14][..]);
            }
        }
        assert_eq!(signature_of(&m.values()), (3, 1));
    }

    #[test]
    fn wrong_length_and_domain() {
        let g = flat_walker(2).with_domain(|p| p[1] > 0.0);
        assert!(matches!(
            g.eval(&[0.0; 3], 1),
            Err(Error::WrongDimension { .. })
        ));
        assert!(matches!(
            g.eval(&[0.0, -1.0, 0.0, 0.0], 1),
            Err(Error::OutsideDomain(_))
        ));
    }

    #[test]
    fn fiber_restriction() {
        let g = flat_walker(3);
        let h = g.fiber_metric(0.0, 0.0).unwrap();
        assert_eq!(h.dim, 3);
        let m = h.eval(&[0.1, 0.2, 0.3], 1).unwrap();
        assert_eq!(m.values(), DMatrix::identity(3, 3));
    }
}
