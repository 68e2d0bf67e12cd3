//! Walker-frame curvature data, conformal-flatness conditions and
//! coordinate/gauge transformations of Walker metrics.
//!
//! The frame at a point is `p = d_v`, `X_i = d_i - A_i d_v`,
//! `q = d_u - H/2 d_v`, with `g(p,q) = 1` and `g(X_i,X_j) = h_ij`.

use nalgebra::{DMatrix, DVector};

use crate::curvature::{CurvatureBundle, CurvatureJets, Tensor};
use crate::error::{Error, Result};
use crate::fields::{JetMatrix, LambdaKind, MetricField, MultiPoly, PolyMap};
use crate::jets::Jet;

/// Sign relating the closed-form expression for `T`, the constant-curvature
/// form of `R_0` and the family-1 Ricci display to the curvature convention
/// of this crate. `P`, `v` and the frame Ricci/`R_L` formulas need no sign.
///
/// Quantities extracted from the curvature tensor are never rescaled.
pub const CLOSED_FORM_ORIENTATION: f64 = -1.0;

#[derive(Clone, Debug)]
pub struct WalkerFrame {
    pub n: usize,
    pub p: DVector<f64>,
    pub x: Vec<DVector<f64>>,
    pub q: DVector<f64>,
}

impl WalkerFrame {
    pub fn from_metric_values(g: &DMatrix<f64>, n: usize) -> WalkerFrame {
        let d = n + 2;
        let u = d - 1;
        let mut p = DVector::zeros(d);
        p[0] = 1.0;
        let x = (1..=n)
            .map(|i| {
                let mut e = DVector::zeros(d);
                e[i] = 1.0;
                e[0] = -g[(i, u)];
                e
            })
            .collect();
        let mut q = DVector::zeros(d);
        q[u] = 1.0;
        q[0] = -0.5 * g[(u, u)];
        WalkerFrame { n, p, x, q }
    }

    /// Columns `p, X_1, ..., X_n, q`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut cols = vec![self.p.clone()];
        cols.extend(self.x.iter().cloned());
        cols.push(self.q.clone());
        DMatrix::from_columns(&cols)
    }

    /// Largest deviation of the frame Gram matrix from `[[0,0,1],[0,h,0],[1,0,0]]`.
    pub fn relation_defect(&self, g: &DMatrix<f64>) -> f64 {
        let e = self.matrix();
        let gram = e.transpose() * g * &e;
        let d = self.n + 2;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                let expect = if (a == 0 && b == d - 1) || (a == d - 1 && b == 0) {
                    1.0
                } else if a >= 1 && a <= self.n && b >= 1 && b <= self.n {
                    g[(a, b)]
                } else {
                    0.0
                };
                worst = worst.max((gram[(a, b)] - expect).abs());
            }
        }
        worst
    }
}

/// Walker-frame data at one point.
#[derive(Clone, Debug)]
pub struct WalkerData {
    pub point: Vec<f64>,
    pub n: usize,
    pub frame: WalkerFrame,
    pub lambda: f64,
    /// Components of `v` in the basis `X_i`.
    pub vvec: DVector<f64>,
    /// `F_ij = d_i A_j - d_j A_i`.
    pub f: DMatrix<f64>,
    /// `P^l_{jk}` stored at `[l, j, k]`, with `P(X_k) X_j = P^l_{jk} X_l`.
    pub p: Tensor<f64>,
    /// `T_ij = -g(R(X_i,q)q, X_j)`.
    pub t: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub hinv: DMatrix<f64>,
    pub s0: f64,
    /// Mixed fiber Ricci operator `Ric(h)^i_j`.
    pub ric_h: DMatrix<f64>,
    /// Fiber curvature `(R_0)_{ijkl}`.
    pub r0_lo: Tensor<f64>,
    /// `(f1, f0)` with `T = (v f1 + f0) id` when `T` is a multiple of the identity.
    pub f_split: Option<(f64, f64)>,
    pub bundle: CurvatureBundle,
}

fn require_walker(g: &MetricField) -> Result<usize> {
    g.walker
        .as_ref()
        .map(|w| w.n)
        .ok_or_else(|| Error::NotWalker(g.label.clone()))
}

/// `R_{abcd}` in the frame: `Rf[a,b,c,d] = g(R(e_c,e_d)e_b, e_a)`.
fn frame_riemann(r_lo: &Tensor<f64>, e: &DMatrix<f64>) -> Tensor<f64> {
    let d = e.nrows();
    let mut cur = r_lo.clone();
    // contract one slot at a time
    for slot in 0..4 {
        cur = Tensor::from_fn(d, 4, |idx| {
            let mut s = 0.0;
            for a in 0..d {
                let mut j = [idx[0], idx[1], idx[2], idx[3]];
                j[slot] = a;
                s += cur.get(&j) * e[(a, idx[slot])];
            }
            s
        });
    }
    cur
}

fn t_from_frame(rf: &Tensor<f64>, n: usize) -> DMatrix<f64> {
    let q = n + 1;
    DMatrix::from_fn(n, n, |i, j| -rf.get(&[j + 1, q, i + 1, q]))
}

fn block(g: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    g.view((1, 1), (n, n)).into_owned()
}

/// Mixed endomorphism `h^-1 T`.
pub fn mixed(hinv: &DMatrix<f64>, t: &DMatrix<f64>) -> DMatrix<f64> {
    hinv * t
}

/// Largest off-diagonal entry and diagonal spread of a square matrix.
pub fn identity_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut off: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off = off.max(m[(i, j)].abs());
            }
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let spread = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - diag.iter().cloned().fold(f64::INFINITY, f64::min);
    off.max(spread)
}

/// Extracts `lambda, v, F, P, T` and fiber data from the full curvature tensor.
pub fn walker_extract(g: &MetricField, pt: &[f64]) -> Result<WalkerData> {
    let n = require_walker(g)?;
    let d = n + 2;
    let u = d - 1;
    let gm = g.eval(pt, 2)?;
    let cj = CurvatureJets::from_matrix(gm.clone())?;
    let bundle = CurvatureBundle::from_jets(pt, &cj)?;
    let gv = &bundle.g;
    let frame = WalkerFrame::from_metric_values(gv, n);
    let e = frame.matrix();
    let rf = frame_riemann(&bundle.riemann_lo, &e);

    let hh = gm.get(u, u);
    let lambda = 0.5 * hh.derivative(&[0, 0]);
    let h = block(gv, n);
    let hinv = h.clone().try_inverse().ok_or(Error::Singular)?;
    let a: Vec<f64> = (1..=n).map(|i| gv[(i, u)]).collect();
    let w = DVector::from_fn(n, |i, _| {
        0.5 * (hh.derivative(&[i + 1, 0]) - a[i] * hh.derivative(&[0, 0]))
    });
    let vvec = &hinv * w;
    let f = DMatrix::from_fn(n, n, |i, j| {
        gm.get(j + 1, u).derivative(&[i + 1]) - gm.get(i + 1, u).derivative(&[j + 1])
    });
    // h_il P^l_jk = g(R(X_k,q)X_j, X_i)
    let p_lo = Tensor::from_fn(n, 3, |idx| {
        *rf.get(&[idx[0] + 1, idx[1] + 1, idx[2] + 1, u])
    });
    let p = Tensor::from_fn(n, 3, |idx| {
        (0..n)
            .map(|i| hinv[(idx[0], i)] * p_lo.get(&[i, idx[1], idx[2]]))
            .sum::<f64>()
    });
    let t = t_from_frame(&rf, n);

    let fiber = g.fiber_metric(pt[0], pt[u])?;
    let fb = CurvatureBundle::at(&fiber, &pt[1..=n])?;

    let f_split = t_split(g, pt, n).ok().flatten();

    Ok(WalkerData {
        point: pt.to_vec(),
        n,
        frame,
        lambda,
        vvec,
        f,
        p,
        t,
        h,
        hinv,
        s0: fb.scalar,
        ric_h: fb.ricci_op.clone(),
        r0_lo: fb.riemann_lo.clone(),
        f_split,
        bundle,
    })
}

fn t_at(g: &MetricField, pt: &[f64], n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let b = CurvatureBundle::at(g, pt)?;
    let frame = WalkerFrame::from_metric_values(&b.g, n);
    let rf = frame_riemann(&b.riemann_lo, &frame.matrix());
    let hinv = block(&b.g, n).try_inverse().ok_or(Error::Singular)?;
    Ok((t_from_frame(&rf, n), hinv))
}

fn t_split(g: &MetricField, pt: &[f64], n: usize) -> Result<Option<(f64, f64)>> {
    let mut fs = [0.0; 2];
    for (k, v) in [0.0, 1.0].into_iter().enumerate() {
        let mut q = pt.to_vec();
        q[0] = v;
        let (t, hinv) = t_at(g, &q, n)?;
        let m = mixed(&hinv, &t);
        let scale = m.amax().max(1.0);
        if identity_defect(&m) > 1e-8 * scale {
            return Ok(None);
        }
        fs[k] = m.trace() / n as f64;
    }
    Ok(Some((fs[1] - fs[0], fs[0])))
}

impl WalkerData {
    /// `Ric~P = h^{ij} P(X_i) X_j`, components in the basis `X_l`.
    pub fn ric_tilde_p(&self) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |l, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.hinv[(i, j)] * self.p.get(&[l, j, i]);
                }
            }
            s
        })
    }

    pub fn trace_t(&self) -> f64 {
        mixed(&self.hinv, &self.t).trace()
    }

    /// Largest violation of `g(P(X)Y,Z) + g(P(Y)Z,X) + g(P(Z)X,Y) = 0`.
    pub fn p_cyclic_defect(&self) -> f64 {
        let n = self.n;
        // g(P(X_k)X_j, X_i) = h_il P^l_jk
        let lo = |i: usize, j: usize, k: usize| {
            (0..n)
                .map(|l| self.h[(i, l)] * self.p.get(&[l, j, k]))
                .sum::<f64>()
        };
        let mut worst: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    // g(P(X)Y,Z) = lo(z, y, x)
                    let c = lo(z, y, x) + lo(x, z, y) + lo(y, x, z);
                    worst = worst.max(c.abs());
                }
            }
        }
        worst
    }

    fn vec_in_coords(&self, comps: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n + 2);
        for (i, xi) in self.frame.x.iter().enumerate() {
            out += xi * comps[i];
        }
        out
    }

    /// Ricci operator assembled from Walker data, as a coordinate matrix.
    pub fn ricci_from_formulas(&self) -> DMatrix<f64> {
        let n = self.n;
        let gv = &self.bundle.g;
        let v = self.vec_in_coords(&self.vvec);
        let rp = self.vec_in_coords(&self.ric_tilde_p());
        let w = &rp - &v;
        let fr = &self.frame;
        // images of the frame vectors
        let mut cols = Vec::with_capacity(n + 2);
        cols.push(&fr.p * self.lambda);
        for j in 0..n {
            let xj = &fr.x[j];
            let mut img = &fr.p * (-xj.dot(&(gv * &w)));
            for i in 0..n {
                img += &fr.x[i] * self.ric_h[(i, j)];
            }
            cols.push(img);
        }
        cols.push(&fr.p * (-self.trace_t()) - &rp + &v + &fr.q * self.lambda);
        let images = DMatrix::from_columns(&cols);
        let e = fr.matrix();
        images * e.try_inverse().expect("Walker frame is invertible")
    }

    /// Largest deviation between the assembled and the coordinate Ricci operators.
    pub fn ricci_formula_residual(&self) -> f64 {
        (self.ricci_from_formulas() - &self.bundle.ricci_op).amax()
    }

    fn wedge(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
        let g = &self.bundle.g;
        y * (g * x).transpose() - x * (g * y).transpose()
    }

    fn e_map(&self, m: &DMatrix<f64>, j: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.n + 2);
        for i in 0..self.n {
            out += &self.frame.x[i] * m[(i, j)];
        }
        out
    }

    /// Largest deviation of the Walker-frame expressions for `R_L` from the coordinate `R_L`.
    pub fn r_l_formula_residual(&self) -> Option<f64> {
        let rl_lo = self.bundle.r_l_lo.as_ref()?;
        let n = self.n;
        let nf = n as f64;
        let d = n + 2;
        let ginv = &self.bundle.ginv;
        let op = |x: &DVector<f64>, y: &DVector<f64>| -> DMatrix<f64> {
            DMatrix::from_fn(d, d, |a, b| {
                let mut s = 0.0;
                for e in 0..d {
                    for c in 0..d {
                        for dd in 0..d {
                            s += ginv[(a, e)] * rl_lo.get(&[e, b, c, dd]) * x[c] * y[dd];
                        }
                    }
                }
                s
            })
        };
        let fr = &self.frame;
        let (p, q) = (&fr.p, &fr.q);
        let s = self.bundle.scalar;
        let v = self.vec_in_coords(&self.vvec);
        let w = &v - self.vec_in_coords(&self.ric_tilde_p());
        let id = DMatrix::<f64>::identity(n, n);
        let k = &self.ric_h + &id * (((nf - 1.0) * self.lambda - self.s0) / (nf + 1.0));
        let m = &self.ric_h - &id * (s / (2.0 * (nf + 1.0)));
        let gw = &self.bundle.g * &w;
        let mut worst: f64 = 0.0;
        let mut check = |lhs: DMatrix<f64>, rhs: DMatrix<f64>| {
            worst = worst.max((lhs - rhs).amax());
        };
        for i in 0..n {
            let xi = &fr.x[i];
            check(op(p, xi), self.wedge(p, &self.e_map(&k, i)) / nf);
            let rhs = self.wedge(p, xi) * self.trace_t()
                + self.wedge(p, q) * xi.dot(&gw)
                + self.wedge(xi, &w)
                + self.wedge(&self.e_map(&k, i), q);
            check(op(xi, q), rhs / nf);
            for j in 0..n {
                let xj = &fr.x[j];
                let rhs = self.wedge(p, &(xj * xi.dot(&gw) - xi * xj.dot(&gw)))
                    + self.wedge(&self.e_map(&m, i), xj)
                    + self.wedge(xi, &self.e_map(&m, j));
                check(op(xi, xj), rhs / nf);
            }
        }
        let rhs = self.wedge(p, q) * ((2.0 * nf * self.lambda - self.s0) / (nf + 1.0))
            + self.wedge(p, &w);
        check(op(p, q), rhs / nf);
        Some(worst)
    }

    /// Residuals of the four conformal-flatness conditions:
    /// `s0 = -n(n-1) lambda`, `R_0` of constant curvature `-lambda`,
    /// `P(X) = v ^ X`, and `T` a multiple of the identity.
    pub fn lemma1_residuals(&self) -> [f64; 4] {
        let n = self.n;
        let nf = n as f64;
        let r1 = (self.s0 + nf * (nf - 1.0) * self.lambda).abs();
        // R_0 = -lambda/2 R_id up to orientation, R_id the R_L of L = id
        let h = &self.h;
        let mut r2: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for e in 0..n {
                        let rid = 2.0 * (h[(b, c)] * h[(a, e)] - h[(a, c)] * h[(b, e)]);
                        let expect = CLOSED_FORM_ORIENTATION * (-0.5 * self.lambda) * rid;
                        r2 = r2.max((self.r0_lo.get(&[a, b, c, e]) - expect).abs());
                    }
                }
            }
        }
        // (v ^ X_k) X_j = g(v, X_j) X_k - h_kj v
        let vlo = h * &self.vvec;
        let mut r3: f64 = 0.0;
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let delta = if l == k { 1.0 } else { 0.0 };
                    let expect = vlo[j] * delta - h[(k, j)] * self.vvec[l];
                    r3 = r3.max((self.p.get(&[l, j, k]) - expect).abs());
                }
            }
        }
        let r4 = identity_defect(&mixed(&self.hinv, &self.t));
        [r1, r2, r3, r4]
    }
}

/// `P` and `T` from the closed expressions in `F`, `A`, `H` and the fiber
/// connection; `T` is scaled by [`CLOSED_FORM_ORIENTATION`].
///
/// Only valid when `h` does not depend on `u`.
pub fn walker_closed_forms(g: &MetricField, pt: &[f64]) -> Result<(Tensor<f64>, DMatrix<f64>)> {
    let layout = g
        .walker
        .clone()
        .ok_or_else(|| Error::NotWalker(g.label.clone()))?;
    if layout.fiber_depends_on_u {
        return Err(Error::FiberDependsOnU(g.label.clone()));
    }
    let n = layout.n;
    let d = n + 2;
    let u = d - 1;
    let gm = g.eval(pt, 2)?;
    let xi = |i: usize| i + 1;
    let hh = gm.get(u, u);
    let a = |i: usize| gm.get(xi(i), u);
    let hv = DMatrix::from_fn(n, n, |i, j| gm.get(xi(i), xi(j)).value());
    let hinv = hv.clone().try_inverse().ok_or(Error::Singular)?;
    // fiber Christoffel symbols Gamma^k_ij
    let dh = |i: usize, j: usize, k: usize| gm.get(xi(i), xi(j)).derivative(&[xi(k)]);
    let first = Tensor::from_fn(n, 3, |idx| {
        let (l, i, j) = (idx[0], idx[1], idx[2]);
        0.5 * (dh(j, l, i) + dh(i, l, j) - dh(i, j, l))
    });
    let gam = Tensor::from_fn(n, 3, |idx| {
        (0..n)
            .map(|l| hinv[(idx[0], l)] * first.get(&[l, idx[1], idx[2]]))
            .sum::<f64>()
    });
    let av: Vec<f64> = (0..n).map(|i| a(i).value()).collect();
    // F_ij and its first derivatives
    let f = DMatrix::from_fn(n, n, |i, j| {
        a(j).derivative(&[xi(i)]) - a(i).derivative(&[xi(j)])
    });
    let df = |k: usize, i: usize, j: usize| {
        a(j).derivative(&[xi(i), xi(k)]) - a(i).derivative(&[xi(j), xi(k)])
    };
    let nabla_f = |k: usize, i: usize, j: usize| {
        let mut s = df(k, i, j);
        for l in 0..n {
            s -= gam.get(&[l, k, i]) * f[(l, j)] + gam.get(&[l, k, j]) * f[(i, l)];
        }
        s
    };
    // h_il P^l_jk = -1/2 nabla_k F_ij
    let p = Tensor::from_fn(n, 3, |idx| {
        let (l, j, k) = (idx[0], idx[1], idx[2]);
        (0..n)
            .map(|i| hinv[(l, i)] * (-0.5 * nabla_f(k, i, j)))
            .sum::<f64>()
    });
    let dv_h = hh.derivative(&[0]);
    let dvv_h = hh.derivative(&[0, 0]);
    let sym_nabla_a = |i: usize, j: usize| {
        let mut s = a(j).derivative(&[xi(i)]) + a(i).derivative(&[xi(j)]);
        for k in 0..n {
            s -= 2.0 * gam.get(&[k, i, j]) * av[k];
        }
        s
    };
    let du_sym_nabla_a = |i: usize, j: usize| {
        let mut s = a(j).derivative(&[xi(i), u]) + a(i).derivative(&[xi(j), u]);
        for k in 0..n {
            s -= 2.0 * gam.get(&[k, i, j]) * a(k).derivative(&[u]);
        }
        s
    };
    let t = DMatrix::from_fn(n, n, |i, j| {
        let mut hess = hh.derivative(&[xi(i), xi(j)]);
        for k in 0..n {
            hess -= gam.get(&[k, i, j]) * hh.derivative(&[xi(k)]);
        }
        let mut ff = 0.0;
        for k in 0..n {
            for l in 0..n {
                ff += f[(i, k)] * f[(j, l)] * hinv[(k, l)];
            }
        }
        let val = -0.5 * hess
            + 0.25 * ff
            + 0.25 * dv_h * sym_nabla_a(i, j)
            + 0.5 * (av[i] * hh.derivative(&[xi(j), 0]) + av[j] * hh.derivative(&[xi(i), 0]))
            + 0.5 * du_sym_nabla_a(i, j)
            - 0.5 * av[i] * av[j] * dvv_h;
        CLOSED_FORM_ORIENTATION * val
    });
    Ok((p, t))
}

/// Adds a polynomial to `g_uu` of a Walker metric, keeping the Walker tag.
pub fn perturb_h(g: &MetricField, delta: MultiPoly) -> Result<MetricField> {
    let layout = g
        .walker
        .clone()
        .ok_or_else(|| Error::NotWalker(g.label.clone()))?;
    let d = g.dim;
    let base = g.clone();
    let dom = g.clone();
    let filt = g.clone();
    let lambda = if delta.terms().iter().any(|(e, _)| e[0] >= 2) {
        LambdaKind::Varying
    } else {
        layout.lambda
    };
    Ok(
        MetricField::new(d, g.signature, format!("{}+perturbed", g.label), move |x| {
            let mut m = base.eval_jets(x)?;
            let add = delta.eval_jet(x);
            let uu = m.get(d - 1, d - 1) + add;
            m.set(d - 1, d - 1, uu);
            Ok(m)
        })
        .with_domain(move |p| dom.in_domain(p))
        .with_sampling(g.sample_box().to_vec(), move |p| filt.admissible_sample(p))
        .with_walker(crate::fields::WalkerLayout { lambda, ..layout }),
    )
}

/// Gauge change `v -> v - phi`: `A -> A + d phi`, `H0 -> H0 + H1 phi + 2 d_u phi`.
///
/// `phi` is a polynomial in all chart coordinates that must not involve `v`;
/// the metric must have `d_v^2 H = 0`.
pub fn gauge_transform(g: &MetricField, phi: &MultiPoly) -> Result<MetricField> {
    let layout = g
        .walker
        .clone()
        .ok_or_else(|| Error::NotWalker(g.label.clone()))?;
    if layout.lambda != LambdaKind::Zero {
        return Err(Error::NonzeroLambda(g.label.clone()));
    }
    if phi.nvars() != g.dim {
        return Err(Error::WrongDimension {
            op: "gauge_transform",
            expected: g.dim.to_string(),
            got: phi.nvars(),
        });
    }
    if phi.depends_on(0) {
        return Err(Error::GaugeDependsOnV);
    }
    let n = layout.n;
    let d = g.dim;
    let u = d - 1;
    let base = g.clone();
    let phi = phi.clone();
    let grads: Vec<MultiPoly> = (0..d).map(|k| phi.partial(k)).collect();
    let dom = g.clone();
    let filt = g.clone();
    Ok(
        MetricField::new(d, g.signature, format!("{}+gauge", g.label), move |x| {
            let m = base.eval_jets(x)?;
            let mut shifted = x.to_vec();
            shifted[0] = &shifted[0] + 1.0;
            let m1 = base.eval_jets(&shifted)?;
            let h1 = m1.get(u, u) - m.get(u, u);
            let ph = phi.eval_jet(x);
            let mut out = m.clone();
            for i in 1..=n {
                out.set_sym(i, u, m.get(i, u) + grads[i].eval_jet(x));
            }
            out.set(
                u,
                u,
                m.get(u, u) + &h1 * &ph + grads[u].eval_jet(x).scale(2.0),
            );
            Ok(out)
        })
        .with_domain(move |p| dom.in_domain(p))
        .with_sampling(g.sample_box().to_vec(), move |p| filt.admissible_sample(p))
        .with_walker(layout),
    )
}

/// Pullback `J^T g(Phi(y)) J` under the polynomial coordinate change `x = Phi(y)`.
///
/// The result carries no Walker tag; attach one when the new form is known.
pub fn coordinate_transform(g: &MetricField, phi: &PolyMap) -> Result<MetricField> {
    if phi.dim() != g.dim {
        return Err(Error::WrongDimension {
            op: "coordinate_transform",
            expected: g.dim.to_string(),
            got: phi.dim(),
        });
    }
    let d = g.dim;
    let base = g.clone();
    let map = phi.clone();
    let jac = phi.jacobian();
    let dom_g = g.clone();
    let dom_map = phi.clone();
    let filt_g = g.clone();
    let filt_map = phi.clone();
    let mut out = MetricField::new(d, g.signature, format!("{}+pullback", g.label), move |y| {
        let x = map.eval_jet(y);
        let m = base.eval_jets(&x)?;
        let j = JetMatrix::from_rows(
            jac.iter()
                .map(|row| row.iter().map(|p| p.eval_jet(y)).collect())
                .collect(),
        );
        let det = j.values().determinant();
        if det.abs() < 1e-12 {
            return Err(Error::SingularJacobian(y.iter().map(Jet::value).collect()));
        }
        Ok(j.transpose().mul(&m).mul(&j))
    })
    .with_domain(move |y| dom_g.in_domain(&dom_map.eval(y)))
    .with_sampling(g.sample_box().to_vec(), move |y| {
        filt_g.admissible_sample(&filt_map.eval(y))
    });
    out.params = g.params.clone();
    Ok(out)
}

/// The map `x = x~ - y~^2 + z~^2` (other coordinates fixed) on `(x, y, z, t)`.
pub fn gt_decomposition_map() -> PolyMap {
    let x = MultiPoly::var(4, 0)
        .with_term(&[0, 2, 0, 0], -1.0)
        .with_term(&[0, 0, 2, 0], 1.0);
    PolyMap::identity(4).with_component(0, x)
}

/// Linear map `x^i = O^i_j x~^j` on the fiber coordinates of a Walker chart.
pub fn fiber_rotation_map(o: &DMatrix<f64>) -> PolyMap {
    let n = o.nrows();
    let d = n + 2;
    let mut map = PolyMap::identity(d);
    for i in 0..n {
        let mut comp = MultiPoly::zero(d);
        for j in 0..n {
            let mut e = vec![0u32; d];
            e[j + 1] = 1;
            comp = comp.with_term(&e, o[(i, j)]);
        }
        map = map.with_component(i + 1, comp);
    }
    map
}

/// Pointwise maximum of `|g1 - g2|` over the given points.
pub fn max_metric_difference(g1: &MetricField, g2: &MetricField, pts: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in pts {
        worst = worst.max((g1.values(p)? - g2.values(p)?).amax());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{build, FamilyId, FamilyParams, FamilySpec, Sign};
    use crate::fields::UPoly;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f2(n: usize) -> MetricField {
        build(&FamilySpec::simple(FamilyId::SimF2, n)).unwrap()
    }

    #[test]
    fn flat_walker_data_vanishes() {
        let g = build(&FamilySpec::simple(FamilyId::Flat, 2)).unwrap();
        let w = walker_extract(&g, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(w.lambda, 0.0);
        assert_eq!(w.vvec.amax(), 0.0);
        assert_eq!(w.p.max_abs(), 0.0);
        assert_eq!(w.t.amax(), 0.0);
        assert_eq!(w.lemma1_residuals(), [0.0; 4]);
    }

    #[test]
    fn family1_t_is_identity_with_orientation() {
        let g = build(&FamilySpec::simple(FamilyId::PpwaveF1, 2)).unwrap();
        let pt = [0.3, 0.2, -0.4, 0.1];
        let w = walker_extract(&g, &pt).unwrap();
        assert_eq!(w.lambda, 0.0);
        assert!(w.vvec.amax() < 1e-15);
        // extracted T = -1/2 d_i d_j H0 with the sign flipped: +a id
        assert!((&w.t - DMatrix::identity(2, 2)).amax() < 1e-12);
        let (_, t) = walker_closed_forms(&g, &pt).unwrap();
        assert!((t - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn family2_vvec() {
        let g = f2(2);
        let w = walker_extract(&g, &[0.0, 0.2, 0.3, 0.0]).unwrap();
        // v = 1/2 d_i H1 delta^ij X_j with H1 = x^1
        assert_relative_eq!(w.vvec[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(w.vvec[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn frame_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for id in FamilyId::THEOREM_FAMILIES {
            let g = build(&FamilySpec::new(id, 3, FamilyParams::random(&mut rng, 3))).unwrap();
            let p = g.sample_point(&mut rng).unwrap();
            let gv = g.values(&p).unwrap();
            assert!(WalkerFrame::from_metric_values(&gv, 3).relation_defect(&gv) < 1e-10);
        }
    }

    #[test]
    fn extraction_matches_closed_forms_and_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for id in [FamilyId::PpwaveF1, FamilyId::SimF2] {
            for n in 2..=4 {
                let g = build(&FamilySpec::new(id, n, FamilyParams::random(&mut rng, n))).unwrap();
                for _ in 0..3 {
                    let pt = g.sample_point(&mut rng).unwrap();
                    let w = walker_extract(&g, &pt).unwrap();
                    let (p, t) = walker_closed_forms(&g, &pt).unwrap();
                    assert!(p.sub(&w.p).max_abs() < 1e-8, "{id} P");
                    assert!((t - &w.t).amax() < 1e-8, "{id} T");
                    assert!(w.ricci_formula_residual() < 1e-8, "{id} Ric");
                    assert!(w.r_l_formula_residual().unwrap() < 1e-8, "{id} R_L");
                    assert!(w.p_cyclic_defect() < 1e-9);
                    assert!(
                        w.lemma1_residuals().iter().all(|r| *r < 1e-8),
                        "{id} {:?}",
                        w.lemma1_residuals()
                    );
                }
            }
        }
    }

    #[test]
    fn scalar_split() {
        let g = build(&FamilySpec::simple(FamilyId::SphereF3, 3)).unwrap();
        let w = walker_extract(&g, &[0.2, 0.1, -0.3, 0.2, 0.5]).unwrap();
        assert_relative_eq!(w.bundle.scalar, 2.0 * w.lambda + w.s0, epsilon = 1e-9);
        assert!(w.f_split.is_some());
    }

    #[test]
    fn closed_forms_refuse_u_dependent_fiber() {
        let g = build(&FamilySpec::simple(FamilyId::HypF4, 2)).unwrap();
        assert!(matches!(
            walker_closed_forms(&g, &[0.0, 0.1, 0.1, 0.0]),
            Err(Error::FiberDependsOnU(_))
        ));
        let gt = build(&FamilySpec::simple(FamilyId::GtOriginal, 2)).unwrap();
        assert!(matches!(
            walker_extract(&gt, &[0.0, 0.5, 0.1, 0.0]),
            Err(Error::NotWalker(_))
        ));
    }

    #[test]
    fn perturbed_family1_breaks_conditions() {
        let g = build(&FamilySpec::simple(FamilyId::PpwaveF1, 2)).unwrap();
        let bumped = perturb_h(&g, MultiPoly::zero(4).with_term(&[0, 3, 0, 0], 0.1)).unwrap();
        let w = walker_extract(&bumped, &[0.1, 0.4, 0.2, 0.3]).unwrap();
        assert!(w.lemma1_residuals()[3] > 1e-3);
        assert!(w.bundle.weyl_norm().unwrap() > 1e-3);
    }

    #[test]
    fn gauge_identity_and_constant() {
        let g = f2(2);
        let pts = vec![vec![0.1, 0.2, 0.3, 0.4], vec![-0.3, 0.5, -0.1, 0.9]];
        let same = gauge_transform(&g, &MultiPoly::zero(4)).unwrap();
        assert_eq!(max_metric_difference(&g, &same, &pts).unwrap(), 0.0);
        let c = 0.7;
        let shifted = gauge_transform(&g, &MultiPoly::constant(4, c)).unwrap();
        for p in &pts {
            let (m0, m1) = (g.values(p).unwrap(), shifted.values(p).unwrap());
            assert_eq!(m0[(1, 3)], m1[(1, 3)]);
            // H1 = B.x = x^1
            assert_relative_eq!(m1[(3, 3)] - m0[(3, 3)], p[1] * c, epsilon = 1e-14);
        }
        assert!(matches!(
            gauge_transform(&g, &MultiPoly::var(4, 0)),
            Err(Error::GaugeDependsOnV)
        ));
        let f3 = build(&FamilySpec::simple(FamilyId::SphereF3, 2)).unwrap();
        assert!(matches!(
            gauge_transform(&f3, &MultiPoly::zero(4)),
            Err(Error::NonzeroLambda(_))
        ));
    }

    #[test]
    fn gauge_is_pullback() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = build(&FamilySpec::new(
            FamilyId::SimF2,
            3,
            FamilyParams::random(&mut rng, 3),
        ))
        .unwrap();
        // phi = x^1 u^2 - 0.5 x^2 x^3 + 0.3 u
        let phi = MultiPoly::zero(5)
            .with_term(&[0, 1, 0, 0, 2], 1.0)
            .with_term(&[0, 0, 1, 1, 0], -0.5)
            .with_term(&[0, 0, 0, 0, 1], 0.3);
        let gauged = gauge_transform(&g, &phi).unwrap();
        let pull = coordinate_transform(
            &g,
            &PolyMap::identity(5).with_component(0, MultiPoly::var(5, 0).add(&phi)),
        )
        .unwrap();
        let pts: Vec<Vec<f64>> = (0..10).map(|_| g.sample_point(&mut rng).unwrap()).collect();
        assert!(max_metric_difference(&gauged, &pull, &pts).unwrap() < 1e-12);
    }

    #[test]
    fn gt_decomposition() {
        let corr = build(&FamilySpec::simple(FamilyId::GtCorrected, 2)).unwrap();
        let simp = build(&FamilySpec::simple(FamilyId::GtSimplified, 2)).unwrap();
        let pulled = coordinate_transform(&corr, &gt_decomposition_map()).unwrap();
        let pts = vec![vec![0.1, 0.4, 0.2, 0.3], vec![-0.2, 0.8, -0.4, 0.1]];
        assert!(max_metric_difference(&pulled, &simp, &pts).unwrap() < 1e-12);
    }

    #[test]
    fn decomposable_lambda() {
        let g = build(&FamilySpec::new(
            FamilyId::Thc3Dec(Sign::Positive),
            2,
            FamilyParams::zeros(2).with_c_const(2.0),
        ))
        .unwrap();
        let w = walker_extract(&g, &[0.3, 0.1, 0.2, 0.4]).unwrap();
        assert_relative_eq!(w.lambda, -2.0, epsilon = 1e-14);
        assert!(w.lemma1_residuals().iter().all(|r| *r < 1e-9));
        let _ = UPoly::zero();
    }
}
