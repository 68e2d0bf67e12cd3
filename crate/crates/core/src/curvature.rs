//! Metric to curvature pipeline.
//!
//! Conventions: `R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]`, with
//! `R(d_c, d_d) d_b = R^a_{bcd} d_a` and `R_{abcd} = g_{ae} R^e_{bcd}`, so that
//! `g(R(X,Y)Z, W) = R_{abcd} W^a Z^b X^c Y^d`. Ricci is `Ric_{bd} = R^a_{bad}`
//! (positive on spheres). With `(X ^ Y)Z = g(X,Z)Y - g(Y,Z)X` a round sphere
//! of curvature `k` has `R(X,Y) = -k X ^ Y`, and the Weyl tensor is
//! `W = R + R_L` with `R_L(X,Y) = LX ^ Y + X ^ LY`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::{ChartPoint, JetMatrix, MetricField};
use crate::jets::Jet;

/// Default number of RK4 steps per unit coordinate length.
pub const STEPS_PER_UNIT: usize = 64;

/// Dense tensor with all indices running over `0..dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    dim: usize,
    rank: usize,
    data: Vec<T>,
}

impl<T: Clone> Tensor<T> {
    pub fn filled(dim: usize, rank: usize, value: T) -> Tensor<T> {
        Tensor {
            dim,
            rank,
            data: vec![value; dim.pow(rank as u32)],
        }
    }

    pub fn from_fn(dim: usize, rank: usize, mut f: impl FnMut(&[usize]) -> T) -> Tensor<T> {
        let total = dim.pow(rank as u32);
        let mut idx = vec![0usize; rank];
        let mut data = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            for slot in idx.iter_mut().rev() {
                *slot = rem % dim;
                rem /= dim;
            }
            data.push(f(&idx));
        }
        Tensor { dim, rank, data }
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let k = self.offset(idx);
        self.data[k] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }
}

impl Tensor<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &Tensor<f64>) -> Tensor<f64> {
        Tensor {
            dim: self.dim,
            rank: self.rank,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Tensor<Jet> {
    pub fn values(&self) -> Tensor<f64> {
        Tensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().map(Jet::value).collect(),
        }
    }

    pub fn truncate(&self, order: usize) -> Tensor<Jet> {
        Tensor {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().map(|j| j.truncate(order)).collect(),
        }
    }
}

/// Curvature quantities carried as jets.
///
/// With the metric expanded to order `K`, `gamma` has order `K-1` and the
/// Riemann tensor order `K-2`.
#[derive(Clone, Debug)]
pub struct CurvatureJets {
    pub dim: usize,
    pub g: JetMatrix,
    pub ginv: JetMatrix,
    pub gamma: Tensor<Jet>,
    pub riemann_up: Tensor<Jet>,
}

/// Christoffel symbols `Gamma^a_{bc}` from a metric jet matrix of order `K >= 1`.
pub fn christoffel_from(g: &JetMatrix, ginv: &JetMatrix) -> Tensor<Jet> {
    let d = g.dim();
    let order = g.get(0, 0).order();
    assert!(order >= 1, "christoffel needs first-order jets");
    let dg: Vec<JetMatrix> = (0..d).map(|c| g.partial(c)).collect();
    let ginv = ginv.truncate(order - 1);
    // first kind: Gamma_{dbc} = 1/2 (d_b g_cd + d_c g_bd - d_d g_bc)
    let first = Tensor::from_fn(d, 3, |i| {
        let (dd, b, c) = (i[0], i[1], i[2]);
        (dg[b].get(c, dd) + dg[c].get(b, dd) - dg[dd].get(b, c)).scale(0.5)
    });
    let zero = first.get(&[0, 0, 0]).zero_like();
    let mut gamma = Tensor::filled(d, 3, zero.clone());
    for a in 0..d {
        for b in 0..d {
            for c in b..d {
                let mut acc = zero.clone();
                for e in 0..d {
                    acc += ginv.get(a, e) * first.get(&[e, b, c]);
                }
                gamma.set(&[a, c, b], acc.clone());
                gamma.set(&[a, b, c], acc);
            }
        }
    }
    gamma
}

/// `Gamma^a_{bc}` at `p`, as jets of order `order - 1`.
pub fn christoffel(g: &MetricField, p: &[f64], order: usize) -> Result<Tensor<Jet>> {
    if order == 0 {
        return Err(Error::UnsupportedOrder(0));
    }
    let gm = g.eval(p, order)?;
    let ginv = gm.inverse()?;
    Ok(christoffel_from(&gm, &ginv))
}

/// Plain values of the Christoffel symbols at `p`.
pub fn christoffel_values(g: &MetricField, p: &[f64]) -> Result<Tensor<f64>> {
    Ok(christoffel(g, p, 1)?.values())
}

/// `R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb} + Gamma^a_{ce} Gamma^e_{db} - Gamma^a_{de} Gamma^e_{cb}`.
pub fn riemann_from(gamma: &Tensor<Jet>) -> Tensor<Jet> {
    let d = gamma.dim();
    let order = gamma.get(&[0, 0, 0]).order();
    assert!(
        order >= 1,
        "riemann needs Christoffel symbols with first-order jets"
    );
    let dgamma: Vec<Tensor<Jet>> = (0..d)
        .map(|c| Tensor {
            dim: d,
            rank: 3,
            data: gamma.data.iter().map(|j| j.partial(c)).collect(),
        })
        .collect();
    let low = gamma.truncate(order - 1);
    let zero = low.get(&[0, 0, 0]).zero_like();
    let mut r = Tensor::filled(d, 4, zero.clone());
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for dd in (c + 1)..d {
                    let mut acc = dgamma[c].get(&[a, dd, b]) - dgamma[dd].get(&[a, c, b]);
                    for e in 0..d {
                        acc += low.get(&[a, c, e]) * low.get(&[e, dd, b]);
                        acc -= low.get(&[a, dd, e]) * low.get(&[e, c, b]);
                    }
                    r.set(&[a, b, dd, c], -&acc);
                    r.set(&[a, b, c, dd], acc);
                }
            }
        }
    }
    r
}

impl CurvatureJets {
    /// Expands the metric at `p` to `order >= 2` and builds Christoffel and Riemann jets.
    pub fn compute(g: &MetricField, p: &[f64], order: usize) -> Result<CurvatureJets> {
        if order < 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        let gm = g.eval(p, order)?;
        CurvatureJets::from_matrix(gm)
    }

    pub fn from_matrix(gm: JetMatrix) -> Result<CurvatureJets> {
        let ginv = gm.inverse()?;
        let gamma = christoffel_from(&gm, &ginv);
        let riemann_up = riemann_from(&gamma);
        Ok(CurvatureJets {
            dim: gm.dim(),
            g: gm,
            ginv,
            gamma,
            riemann_up,
        })
    }

    /// Jet order of the curvature tensors.
    pub fn order(&self) -> usize {
        self.riemann_up.get(&[0, 0, 0, 0]).order()
    }

    fn g_at(&self, order: usize) -> JetMatrix {
        self.g.truncate(order)
    }

    pub fn riemann_lo(&self) -> Tensor<Jet> {
        let d = self.dim;
        let g = self.g_at(self.order());
        Tensor::from_fn(d, 4, |i| {
            let mut acc = self.riemann_up.get(&[0, 0, 0, 0]).zero_like();
            for e in 0..d {
                acc += g.get(i[0], e) * self.riemann_up.get(&[e, i[1], i[2], i[3]]);
            }
            acc
        })
    }

    /// `Ric_{bd} = R^a_{bad}`.
    pub fn ricci_lo(&self) -> Tensor<Jet> {
        let d = self.dim;
        Tensor::from_fn(d, 2, |i| {
            let mut acc = self.riemann_up.get(&[0, 0, 0, 0]).zero_like();
            for a in 0..d {
                acc += self.riemann_up.get(&[a, i[0], a, i[1]]);
            }
            acc
        })
    }

    pub fn scalar(&self) -> Jet {
        let ric = self.ricci_lo();
        let ginv = self.ginv.truncate(self.order());
        let mut s = ric.get(&[0, 0]).zero_like();
        for a in 0..self.dim {
            for b in 0..self.dim {
                s += ginv.get(a, b) * ric.get(&[a, b]);
            }
        }
        s
    }

    /// `L_{ab} = (Ric_{ab} - s g_{ab} / (2(d-1))) / (d-2)`.
    pub fn schouten_lo(&self) -> Result<Tensor<Jet>> {
        let d = self.dim;
        if d < 3 {
            return Err(Error::WrongDimension {
                op: "schouten",
                expected: ">= 3".into(),
                got: d,
            });
        }
        let ric = self.ricci_lo();
        let s = self.scalar();
        let g = self.g_at(self.order());
        let df = d as f64;
        Ok(Tensor::from_fn(d, 2, |i| {
            (ric.get(i) - &(&s * g.get(i[0], i[1])).scale(1.0 / (2.0 * (df - 1.0))))
                .scale(1.0 / (df - 2.0))
        }))
    }
}

/// Raises the first index of a symmetric 2-tensor.
fn raise(ginv: &DMatrix<f64>, lo: &Tensor<f64>) -> DMatrix<f64> {
    let d = ginv.nrows();
    DMatrix::from_fn(d, d, |a, b| {
        (0..d).map(|c| ginv[(a, c)] * lo.get(&[c, b])).sum()
    })
}

/// `(R_L)_{abcd} = L_{bc} g_{ad} - L_{ac} g_{bd} + g_{bc} L_{ad} - g_{ac} L_{bd}`.
pub fn r_l_lo(schouten_lo: &Tensor<f64>, g: &DMatrix<f64>) -> Tensor<f64> {
    let l = |a: usize, b: usize| *schouten_lo.get(&[a, b]);
    Tensor::from_fn(g.nrows(), 4, |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        l(b, c) * g[(a, d)] - l(a, c) * g[(b, d)] + g[(b, c)] * l(a, d) - g[(a, c)] * l(b, d)
    })
}

/// `W = R + R_L`, lowered. Requires dimension at least 4.
pub fn weyl(
    riemann_lo: &Tensor<f64>,
    schouten_lo: &Tensor<f64>,
    g: &DMatrix<f64>,
) -> Result<Tensor<f64>> {
    let d = g.nrows();
    if d < 4 {
        return Err(Error::WrongDimension {
            op: "weyl",
            expected: ">= 4".into(),
            got: d,
        });
    }
    let rl = r_l_lo(schouten_lo, g);
    Ok(Tensor::from_fn(d, 4, |i| riemann_lo.get(i) + rl.get(i)))
}

/// Cotton tensor `C_{xyz} = (nabla_z L)_{yx} - (nabla_y L)_{zx}` of a 3-dimensional metric.
pub fn cotton(g: &MetricField, p: &[f64]) -> Result<Tensor<f64>> {
    if g.dim != 3 {
        return Err(Error::WrongDimension {
            op: "cotton",
            expected: "3".into(),
            got: g.dim,
        });
    }
    let cj = CurvatureJets::compute(g, p, 3)?;
    let l = cj.schouten_lo()?;
    let gamma = cj.gamma.values();
    let dl: Vec<Tensor<f64>> = (0..3)
        .map(|z| Tensor::from_fn(3, 2, |i| l.get(i).partial(z).value()))
        .collect();
    let lv = l.values();
    // (nabla_z L)_{yx}
    let nabla = Tensor::from_fn(3, 3, |i| {
        let (z, y, x) = (i[0], i[1], i[2]);
        let mut v = *dl[z].get(&[y, x]);
        for e in 0..3 {
            v -= gamma.get(&[e, z, y]) * lv.get(&[e, x]) + gamma.get(&[e, z, x]) * lv.get(&[y, e]);
        }
        v
    });
    Ok(Tensor::from_fn(3, 3, |i| {
        let (x, y, z) = (i[0], i[1], i[2]);
        nabla.get(&[z, y, x]) - nabla.get(&[y, z, x])
    }))
}

/// Curvature data at one point, as plain values.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub point: ChartPoint,
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    pub gamma: Tensor<f64>,
    pub riemann_up: Tensor<f64>,
    pub riemann_lo: Tensor<f64>,
    pub ricci_lo: Tensor<f64>,
    pub ricci_op: DMatrix<f64>,
    pub scalar: f64,
    pub schouten_lo: Option<Tensor<f64>>,
    pub schouten_op: Option<DMatrix<f64>>,
    pub r_l_lo: Option<Tensor<f64>>,
    pub weyl_lo: Option<Tensor<f64>>,
    pub cotton: Option<Tensor<f64>>,
}

impl CurvatureBundle {
    /// Full curvature data at `p`. Cotton is included in dimension 3.
    pub fn at(g: &MetricField, p: &[f64]) -> Result<CurvatureBundle> {
        let order = if g.dim == 3 { 3 } else { 2 };
        let cj = CurvatureJets::compute(g, p, order)?;
        let mut b = CurvatureBundle::from_jets(p, &cj)?;
        if g.dim == 3 {
            b.cotton = Some(cotton(g, p)?);
        }
        Ok(b)
    }

    pub fn from_jets(p: &[f64], cj: &CurvatureJets) -> Result<CurvatureBundle> {
        let d = cj.dim;
        let gv = cj.g.values();
        let ginv = cj.ginv.values();
        let riemann_up = cj.riemann_up.values();
        let riemann_lo = cj.riemann_lo().values();
        let ricci_lo = cj.ricci_lo().values();
        let ricci_op = raise(&ginv, &ricci_lo);
        let scalar = cj.scalar().value();
        let (schouten_lo, schouten_op, rl, w) = if d >= 3 {
            let l = cj.schouten_lo()?.values();
            let lop = raise(&ginv, &l);
            let rl = r_l_lo(&l, &gv);
            let w = if d >= 4 {
                Some(weyl(&riemann_lo, &l, &gv)?)
            } else {
                None
            };
            (Some(l), Some(lop), Some(rl), w)
        } else {
            (None, None, None, None)
        };
        Ok(CurvatureBundle {
            point: p.to_vec(),
            g: gv,
            ginv,
            gamma: cj.gamma.values(),
            riemann_up,
            riemann_lo,
            ricci_lo,
            ricci_op,
            scalar,
            schouten_lo,
            schouten_op,
            r_l_lo: rl,
            weyl_lo: w,
            cotton: None,
        })
    }

    /// `R(X,Y)` as a matrix acting on column vectors.
    pub fn curvature_operator(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        let d = self.g.nrows();
        DMatrix::from_fn(d, d, |a, b| {
            let mut s = 0.0;
            for c in 0..d {
                for e in 0..d {
                    s += self.riemann_up.get(&[a, b, c, e]) * x[c] * y[e];
                }
            }
            s
        })
    }

    /// Sectional curvature of the plane spanned by `x, y`.
    pub fn sectional(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let d = self.g.nrows();
        let mut num = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        num += self.riemann_lo.get(&[a, b, c, e]) * x[a] * y[b] * x[c] * y[e];
                    }
                }
            }
        }
        let gxx = x.dot(&(&self.g * x));
        let gyy = y.dot(&(&self.g * y));
        let gxy = x.dot(&(&self.g * y));
        num / (gxx * gyy - gxy * gxy)
    }

    pub fn weyl_norm(&self) -> Option<f64> {
        self.weyl_lo.as_ref().map(Tensor::max_abs)
    }

    /// Largest violation of the pair antisymmetries and the first Bianchi identity.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.g.nrows();
        let r = |a, b, c, e| *self.riemann_lo.get(&[a, b, c, e]);
        let mut m: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        m = m.max((r(a, b, c, e) + r(b, a, c, e)).abs());
                        m = m.max((r(a, b, c, e) + r(a, b, e, c)).abs());
                        m = m.max((r(a, b, c, e) + r(a, c, e, b) + r(a, e, b, c)).abs());
                    }
                }
            }
        }
        m
    }

    /// Largest trace of the Weyl tensor `g^{ac} W_{abcd}`.
    pub fn weyl_trace_defect(&self) -> Option<f64> {
        let w = self.weyl_lo.as_ref()?;
        let d = self.g.nrows();
        let mut m: f64 = 0.0;
        for b in 0..d {
            for e in 0..d {
                let mut t = 0.0;
                for a in 0..d {
                    for c in 0..d {
                        t += self.ginv[(a, c)] * w.get(&[a, b, c, e]);
                    }
                }
                m = m.max(t.abs());
            }
        }
        Some(m)
    }
}

/// Residual of the contracted second Bianchi identity `nabla_a Ric^a_b = d_b s / 2`.
pub fn contracted_bianchi_residual(g: &MetricField, p: &[f64]) -> Result<f64> {
    let cj = CurvatureJets::compute(g, p, 3)?;
    let d = cj.dim;
    let ric = cj.ricci_lo();
    let ginv = cj.ginv.truncate(1);
    // mixed Ricci Ric^a_b as order-1 jets
    let mixed = Tensor::from_fn(d, 2, |i| {
        let mut acc = ric.get(&[0, 0]).zero_like();
        for c in 0..d {
            acc += ginv.get(i[0], c) * ric.get(&[c, i[1]]);
        }
        acc
    });
    let s = cj.scalar();
    let gamma = cj.gamma.values();
    let mv = mixed.values();
    let mut worst: f64 = 0.0;
    for b in 0..d {
        let mut div = 0.0;
        for a in 0..d {
            div += mixed.get(&[a, b]).partial(a).value();
            for e in 0..d {
                div += gamma.get(&[a, a, e]) * mv.get(&[e, b])
                    - gamma.get(&[e, a, b]) * mv.get(&[a, e]);
            }
        }
        worst = worst.max((div - 0.5 * s.partial(b).value()).abs());
    }
    Ok(worst)
}

/// Parallel transport of the columns of `frame` along the polyline through `path`.
///
/// Each segment is integrated with classical RK4 using
/// `max(1, ceil(steps_per_unit * length))` steps.
pub fn parallel_transport(
    g: &MetricField,
    path: &[ChartPoint],
    frame: &DMatrix<f64>,
    steps_per_unit: usize,
) -> Result<DMatrix<f64>> {
    let mut x = frame.clone();
    for seg in path.windows(2) {
        let (start, end) = (&seg[0], &seg[1]);
        let delta: Vec<f64> = end.iter().zip(start).map(|(e, s)| e - s).collect();
        let len = delta.iter().map(|t| t * t).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        let steps = ((steps_per_unit as f64 * len).ceil() as usize).max(1);
        let h = 1.0 / steps as f64;
        let at =
            |t: f64| -> Vec<f64> { start.iter().zip(&delta).map(|(s, d)| s + t * d).collect() };
        let rhs = |t: f64, m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
            let q = at(t);
            if !g.in_domain(&q) {
                return Err(Error::PathExitsDomain(q));
            }
            let gamma = christoffel_values(g, &q)?;
            let d = g.dim;
            // A^a_c = Gamma^a_{bc} gamma'^b
            let a = DMatrix::from_fn(d, d, |r, c| {
                (0..d)
                    .map(|b| gamma.get(&[r, b, c]) * delta[b])
                    .sum::<f64>()
            });
            Ok(-(a * m))
        };
        for k in 0..steps {
            let t = k as f64 * h;
            let k1 = rhs(t, &x)?;
            let k2 = rhs(t + 0.5 * h, &(&x + &k1 * (0.5 * h)))?;
            let k3 = rhs(t + 0.5 * h, &(&x + &k2 * (0.5 * h)))?;
            let k4 = rhs(t + h, &(&x + &k3 * h))?;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::JetMatrix;
    use crate::jets::sum_squares;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    /// `Psi * delta` with `Psi = 4 / (1 + eps |x|^2)^2` scaled to curvature `k`.
    fn space_form(n: usize, k: f64) -> MetricField {
        MetricField::new(n, (n, 0), "space_form", move |x| {
            let r2 = sum_squares(x);
            let psi = (1.0 + r2.scale(k.signum())).powi(-2).scale(4.0 / k.abs());
            let mut g = JetMatrix::zeros(n, &x[0]);
            for i in 0..n {
                g.set(i, i, psi.clone());
            }
            Ok(g)
        })
        .with_domain(move |p| k > 0.0 || p.iter().map(|t| t * t).sum::<f64>() < 1.0)
    }

    #[test]
    fn flat_gives_zero() {
        let g = MetricField::new(4, (4, 0), "flat", |x| Ok(JetMatrix::identity(4, &x[0])));
        let b = CurvatureBundle::at(&g, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(b.gamma.max_abs(), 0.0);
        assert_eq!(b.riemann_lo.max_abs(), 0.0);
        assert_eq!(b.scalar, 0.0);
    }

    #[test]
    fn sphere_christoffel_matches_closed_form() {
        let g = space_form(2, 1.0);
        let origin = christoffel_values(&g, &[0.0, 0.0]).unwrap();
        assert!(origin.max_abs() < 1e-15);
        let p = [0.3, 0.0];
        let gamma = christoffel_values(&g, &p).unwrap();
        // Psi = 4/(1+r^2)^2, d_i Psi = -16 x_i / (1+r^2)^3
        let r2: f64 = p.iter().map(|t| t * t).sum();
        let psi = 4.0 / (1.0 + r2).powi(2);
        let dpsi: Vec<f64> = p.iter().map(|x| -16.0 * x / (1.0 + r2).powi(3)).collect();
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let expect = (delta(k, j) * dpsi[i] + delta(k, i) * dpsi[j]
                        - delta(i, j) * dpsi[k])
                        / (2.0 * psi);
                    assert_relative_eq!(*gamma.get(&[k, i, j]), expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn sectional_curvature_signs() {
        for (k, pts) in [
            (1.0, [[0.3, -0.2], [1.5, 0.7]]),
            (-1.0, [[0.3, -0.2], [-0.5, 0.6]]),
        ] {
            let g = space_form(2, k);
            for p in pts {
                let b = CurvatureBundle::at(&g, &p).unwrap();
                let s = b.sectional(&dvector![1.0, 0.0], &dvector![0.3, 1.0]);
                assert_relative_eq!(s, k, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn three_sphere_ricci_and_schouten() {
        let g = space_form(3, 1.0);
        let b = CurvatureBundle::at(&g, &[0.2, -0.1, 0.4]).unwrap();
        assert_relative_eq!(b.scalar, 6.0, epsilon = 1e-10);
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((&b.ricci_op - &id * 2.0).amax() < 1e-10);
        assert!((b.schouten_op.unwrap() - &id * 0.5).amax() < 1e-10);
        assert!(b.cotton.unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn constant_curvature_weyl_vanishes() {
        for d in 4..=6 {
            for k in [1.0, -0.5] {
                let g = space_form(d, k);
                let p: Vec<f64> = (0..d).map(|i| 0.1 * (i as f64 + 1.0) - 0.25).collect();
                let b = CurvatureBundle::at(&g, &p).unwrap();
                assert!(b.weyl_norm().unwrap() < 1e-9, "d={d} k={k}");
                assert!(b.riemann_lo.max_abs() > 0.1);
                assert!(b.symmetry_defect() < 1e-9);
            }
        }
    }

    #[test]
    fn sphere_operator_orientation() {
        // R(X,Y) = -k X ^ Y for a round sphere of curvature k
        let g = space_form(3, 1.0);
        let b = CurvatureBundle::at(&g, &[0.1, 0.2, -0.3]).unwrap();
        let x = dvector![1.0, 0.5, 0.0];
        let y = dvector![0.0, -0.2, 1.0];
        let wedge = &y * (&b.g * &x).transpose() - &x * (&b.g * &y).transpose();
        let r = b.curvature_operator(&x, &y);
        assert!((r + wedge).amax() < 1e-10);
    }

    #[test]
    fn second_bianchi_holds() {
        let g = MetricField::new(4, (4, 0), "bumpy", |x| {
            let mut g = JetMatrix::identity(4, &x[0]);
            g.set(0, 0, 1.0 + x[1].square() * 0.3 + &x[2] * &x[3]);
            g.set_sym(1, 2, (&x[0] * &x[3]).scale(0.2));
            g.set(3, 3, 2.0 + x[0].powi(3) * 0.1);
            Ok(g)
        });
        assert!(contracted_bianchi_residual(&g, &[0.3, -0.2, 0.5, 0.1]).unwrap() < 1e-9);
    }

    #[test]
    fn flat_transport_is_identity() {
        let g = MetricField::new(3, (3, 0), "flat", |x| Ok(JetMatrix::identity(3, &x[0])));
        let path = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 2.0, -1.0],
        ];
        let id = DMatrix::identity(3, 3);
        let out = parallel_transport(&g, &path, &id, STEPS_PER_UNIT).unwrap();
        assert!((out - id).amax() < 1e-15);
    }

    #[test]
    fn small_square_holonomy_angle() {
        // rotation angle of transport around a square of side eps ~ eps^2 Psi(x) K
        let g = space_form(2, 1.0);
        let base = [0.2, 0.1];
        let mut ratios = Vec::new();
        for eps in [0.04, 0.02] {
            let path = vec![
                base.to_vec(),
                vec![base[0] + eps, base[1]],
                vec![base[0] + eps, base[1] + eps],
                vec![base[0], base[1] + eps],
                base.to_vec(),
            ];
            let id = DMatrix::identity(2, 2);
            let out = parallel_transport(&g, &path, &id, 4096).unwrap();
            // g is conformal to the identity, so coordinate rotation angles are metric angles
            let (cx, cy) = (base[0] + eps / 2.0, base[1] + eps / 2.0);
            let psi = 4.0 / (1.0 + cx * cx + cy * cy).powi(2);
            let angle = out[(1, 0)].atan2(out[(0, 0)]).abs();
            ratios.push(angle / (eps * eps * psi));
        }
        // Richardson-style: the ratio approaches 1 as eps -> 0
        let extrapolated = (4.0 * ratios[1] - ratios[0]) / 3.0;
        assert_relative_eq!(extrapolated, 1.0, epsilon = 2e-3);
    }

    #[test]
    fn transport_preserves_inner_products() {
        let g = space_form(3, -1.0);
        let path = vec![
            vec![0.1, 0.2, 0.1],
            vec![0.3, 0.2, 0.1],
            vec![0.3, -0.2, 0.1],
            vec![0.3, -0.2, 0.3],
        ];
        let frame = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.3, -0.1, 0.0, 1.0]);
        let out = parallel_transport(&g, &path, &frame, STEPS_PER_UNIT).unwrap();
        let g0 = g.values(&path[0]).unwrap();
        let g1 = g.values(path.last().unwrap()).unwrap();
        let before = frame.transpose() * g0 * &frame;
        let after = out.transpose() * g1 * &out;
        let drift = (&before - after).amax() / before.amax();
        assert!(drift < 1e-8, "drift {drift:e}");
    }

    #[test]
    fn path_leaving_domain_is_rejected() {
        let g = space_form(2, -1.0);
        let path = vec![vec![0.0, 0.0], vec![1.5, 0.0]];
        let r = parallel_transport(&g, &path, &DMatrix::identity(2, 2), 16);
        assert!(matches!(r, Err(Error::PathExitsDomain(_))));
    }
}
