//! Killing and conformal 1-form systems on the sphere and Lobachevskian charts
//! `h = Psi delta`, `Psi = 4 / (1 +- |x|^2)^2`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::curvature::christoffel_values;
use crate::error::{Error, Result};
use crate::families::{riemannian_space_form, Sign};
use crate::fields::{MetricField, PolyMap};
use crate::jets::{sum_squares, Jet};

/// A vector or covector field given by jet-valued components.
#[derive(Clone)]
pub struct JetField {
    pub dim: usize,
    comps: Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>,
}

impl std::fmt::Debug for JetField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JetField")
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl JetField {
    pub fn new(dim: usize, comps: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static) -> JetField {
        JetField {
            dim,
            comps: Arc::new(comps),
        }
    }

    pub fn zero(dim: usize) -> JetField {
        JetField::new(dim, move |x| vec![x[0].zero_like(); dim])
    }

    pub fn eval_jets(&self, x: &[Jet]) -> Vec<Jet> {
        (self.comps)(x)
    }

    pub fn eval(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        Ok(self.eval_jets(&Jet::seed_point(p, order)?))
    }

    pub fn values(&self, p: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_iterator(
            self.dim,
            self.eval(p, 0)?.iter().map(Jet::value),
        ))
    }

    /// Value and Jacobian `d_j F^i` at `p`.
    pub fn jacobian(&self, p: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let f = self.eval(p, 1)?;
        let v = DVector::from_iterator(self.dim, f.iter().map(Jet::value));
        let j = DMatrix::from_fn(self.dim, self.dim, |i, k| f[i].derivative(&[k]));
        Ok((v, j))
    }

    /// Pullback of a covector field under the linear map `x = O y`: `(O^T A)(O y)`.
    pub fn rotate_covector(&self, o: &DMatrix<f64>) -> JetField {
        let inner = self.clone();
        let o = o.clone();
        let n = self.dim;
        JetField::new(n, move |y| {
            let x: Vec<Jet> = (0..n)
                .map(|i| {
                    let mut s = y[0].zero_like();
                    for j in 0..n {
                        s += &y[j] * o[(i, j)];
                    }
                    s
                })
                .collect();
            let a = inner.eval_jets(&x);
            (0..n)
                .map(|j| {
                    let mut s = y[0].zero_like();
                    for i in 0..n {
                        s += &a[i] * o[(i, j)];
                    }
                    s
                })
                .collect()
        })
    }
}

/// The chart metric `Psi delta` (sphere for `Positive`, Lobachevskian ball for `Negative`).
pub fn chart_metric(n: usize, sign: Sign) -> Result<MetricField> {
    riemannian_space_form(n, sign, 1.0)
}

/// `A_i = Psi X^i` for a vector field in the conformally flat chart.
pub fn lower(sign: Sign, x: &JetField) -> JetField {
    let inner = x.clone();
    JetField::new(x.dim, move |p| {
        let psi = crate::families::psi(p, sign);
        inner.eval_jets(p).iter().map(|c| c * &psi).collect()
    })
}

fn check_skew(f: &DMatrix<f64>) -> Result<()> {
    let defect = (f + f.transpose()).amax();
    if defect > 1e-12 {
        return Err(Error::NotSkew(defect));
    }
    Ok(())
}

/// `X^i = x^i (b.x) - 1/2 b_i |x|^2 + f_ik x^k +- 1/2 b_i`.
pub fn killing_vector(sign: Sign, b: &DVector<f64>, f: &DMatrix<f64>) -> Result<JetField> {
    let n = b.len();
    if f.shape() != (n, n) {
        return Err(Error::WrongDimension {
            op: "killing_vector",
            expected: format!("{n}x{n}"),
            got: f.nrows(),
        });
    }
    check_skew(f)?;
    let (b, f) = (b.clone(), f.clone());
    let half = 0.5 * sign.value();
    Ok(JetField::new(n, move |x| {
        let r2 = sum_squares(x);
        let mut bx = x[0].zero_like();
        for k in 0..n {
            bx += &x[k] * b[k];
        }
        (0..n)
            .map(|i| {
                let mut c = &x[i] * &bx - &r2 * (0.5 * b[i]);
                for k in 0..n {
                    c += &x[k] * f[(i, k)];
                }
                c + half * b[i]
            })
            .collect()
    }))
}

pub fn sphere_killing_form(b: &DVector<f64>, f: &DMatrix<f64>) -> Result<JetField> {
    Ok(lower(
        Sign::Positive,
        &killing_vector(Sign::Positive, b, f)?,
    ))
}

pub fn lobachevskian_killing_form(b: &DVector<f64>, f: &DMatrix<f64>) -> Result<JetField> {
    Ok(lower(
        Sign::Negative,
        &killing_vector(Sign::Negative, b, f)?,
    ))
}

/// Flat conformal Killing field `f_i = x^i (B.x) - 1/2 B_i |x|^2 + d_ik x^k + c x^i + c_i`.
pub fn conformal_vector(
    bb: &DVector<f64>,
    d: &DMatrix<f64>,
    c: f64,
    ci: &DVector<f64>,
) -> Result<JetField> {
    let n = bb.len();
    check_skew(d)?;
    let base = killing_vector(Sign::Positive, bb, d)?;
    let ci = ci.clone();
    let bb = bb.clone();
    Ok(JetField::new(n, move |x| {
        base.eval_jets(x)
            .into_iter()
            .enumerate()
            .map(|(i, comp)| comp - 0.5 * bb[i] + &x[i] * c + ci[i])
            .collect()
    }))
}

/// Symmetrized covariant derivative `nabla_i A_j + nabla_j A_i`.
pub fn killing_tensor(h: &MetricField, a: &JetField, p: &[f64]) -> Result<DMatrix<f64>> {
    if a.dim != h.dim {
        return Err(Error::WrongDimension {
            op: "killing_tensor",
            expected: h.dim.to_string(),
            got: a.dim,
        });
    }
    if !h.in_domain(p) {
        return Err(Error::OutsideDomain(p.to_vec()));
    }
    let n = h.dim;
    let gamma = christoffel_values(h, p)?;
    let comps = a.eval(p, 1)?;
    let nabla = |i: usize, j: usize| {
        let mut s = comps[j].derivative(&[i]);
        for k in 0..n {
            s -= gamma.get(&[k, i, j]) * comps[k].value();
        }
        s
    };
    Ok(DMatrix::from_fn(n, n, |i, j| nabla(i, j) + nabla(j, i)))
}

/// `max |nabla_i A_j + nabla_j A_i|`.
pub fn killing_residual(h: &MetricField, a: &JetField, p: &[f64]) -> Result<f64> {
    Ok(killing_tensor(h, a, p)?.amax())
}

/// Residual of `nabla_i A_i = nabla_j A_j` (no sum) and `nabla_i A_j + nabla_j A_i = 0` for `i != j`.
pub fn conformal_system_residual(h: &MetricField, a: &JetField, p: &[f64]) -> Result<f64> {
    let k = killing_tensor(h, a, p)?;
    let n = h.dim;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(k[(i, j)].abs());
            }
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| 0.5 * k[(i, i)]).collect();
    let hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(worst.max(hi - lo))
}

/// The `n(n+1)/2` basis Killing vectors: `b = e_k` with `f = 0`, then `f = E_ij - E_ji`.
pub fn killing_basis(sign: Sign, n: usize) -> Vec<JetField> {
    let mut out = Vec::new();
    for k in 0..n {
        let mut b = DVector::zeros(n);
        b[k] = 1.0;
        out.push(killing_vector(sign, &b, &DMatrix::zeros(n, n)).expect("zero is skew"));
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut f = DMatrix::zeros(n, n);
            f[(i, j)] = 1.0;
            f[(j, i)] = -1.0;
            out.push(killing_vector(sign, &DVector::zeros(n), &f).expect("skew by construction"));
        }
    }
    out
}

/// Rank of the basis fields sampled at the given points.
///
/// Fields vanishing at `k` generic points form `so(n - k + 1)`, so at least
/// `n` points are needed to see the full algebra (see [`rank_points`]).
pub fn killing_algebra_dim(sign: Sign, n: usize, points: &[Vec<f64>]) -> Result<usize> {
    let basis = killing_basis(sign, n);
    let mut m = DMatrix::zeros(basis.len(), n * points.len());
    for (r, x) in basis.iter().enumerate() {
        for (k, p) in points.iter().enumerate() {
            let v = x.values(p)?;
            for i in 0..n {
                m[(r, k * n + i)] = v[i];
            }
        }
    }
    let smax = m.amax().max(1e-300);
    Ok(m.rank(1e-9 * smax))
}

/// `max(3, n)` fixed generic points in the unit ball.
pub fn rank_points(n: usize) -> Vec<Vec<f64>> {
    let seeds = [
        [0.1, 0.2, -0.3, 0.05, 0.12, -0.07],
        [-0.2, 0.1, 0.15, 0.3, -0.05, 0.11],
        [0.25, -0.1, 0.05, -0.2, 0.09, 0.2],
        [-0.05, -0.25, 0.2, 0.1, -0.15, 0.03],
        [0.18, 0.07, 0.22, -0.12, 0.3, -0.2],
        [-0.3, 0.14, -0.08, 0.02, 0.17, 0.25],
    ];
    seeds
        .iter()
        .take(n.max(3))
        .map(|s| s[..n].to_vec())
        .collect()
}

/// Flows `x0` along `x` for `time` with RK4, carrying the Jacobian of the flow,
/// and returns `max |J^T h(x(t)) J - h(x0)|`.
pub fn flow_isometry_defect(
    h: &MetricField,
    x: &JetField,
    x0: &[f64],
    time: f64,
    steps: usize,
) -> Result<f64> {
    let n = h.dim;
    let dt = time / steps as f64;
    let mut pos = DVector::from_column_slice(x0);
    let mut jac = DMatrix::<f64>::identity(n, n);
    let rhs = |p: &DVector<f64>, j: &DMatrix<f64>| -> Result<(DVector<f64>, DMatrix<f64>)> {
        if !h.in_domain(p.as_slice()) {
            return Err(Error::PathExitsDomain(p.as_slice().to_vec()));
        }
        let (v, dv) = x.jacobian(p.as_slice())?;
        Ok((v, dv * j))
    };
    for _ in 0..steps {
        let (k1, l1) = rhs(&pos, &jac)?;
        let (k2, l2) = rhs(&(&pos + &k1 * (0.5 * dt)), &(&jac + &l1 * (0.5 * dt)))?;
        let (k3, l3) = rhs(&(&pos + &k2 * (0.5 * dt)), &(&jac + &l2 * (0.5 * dt)))?;
        let (k4, l4) = rhs(&(&pos + &k3 * dt), &(&jac + &l3 * dt))?;
        pos += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        jac += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (dt / 6.0);
    }
    let h0 = h.values(x0)?;
    let h1 = h.values(pos.as_slice())?;
    Ok((jac.transpose() * h1 * &jac - h0).amax())
}

/// `A_i(x) = g(d_i, d_u)` of a Walker metric on the slice of fixed `(v, u)`.
pub fn fiber_one_form(g: &MetricField, v: f64, u: f64) -> Result<JetField> {
    let n = g
        .walker
        .as_ref()
        .map(|w| w.n)
        .ok_or_else(|| Error::NotWalker(g.label.clone()))?;
    let g = g.clone();
    Ok(JetField::new(n, move |x| {
        let like = &x[0];
        let mut full = vec![like.lift(v)];
        full.extend(x.iter().cloned());
        full.push(like.lift(u));
        match g.eval_jets(&full) {
            Ok(m) => (1..=n).map(|i| m.get(i, n + 1).clone()).collect(),
            Err(_) => vec![like.lift(f64::NAN); n],
        }
    }))
}

/// Linear coordinate map `x = O y` on `R^n`.
pub fn linear_map(o: &DMatrix<f64>) -> PolyMap {
    let n = o.nrows();
    let mut map = PolyMap::identity(n);
    for i in 0..n {
        let mut comp = crate::fields::MultiPoly::zero(n);
        for j in 0..n {
            let mut e = vec![0u32; n];
            e[j] = 1;
            comp = comp.with_term(&e, o[(i, j)]);
        }
        map = map.with_component(i, comp);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_b_f(rng: &mut ChaCha8Rng, n: usize) -> (DVector<f64>, DMatrix<f64>) {
        let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        (b, &m - m.transpose())
    }

    fn point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-0.4..0.4)).collect()
    }

    #[test]
    fn zero_field() {
        let h = chart_metric(3, Sign::Positive).unwrap();
        let a = sphere_killing_form(&DVector::zeros(3), &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(killing_residual(&h, &a, &[0.1, 0.2, 0.3]).unwrap(), 0.0);
        assert_eq!(
            killing_residual(&h, &JetField::zero(3), &[0.1, 0.2, 0.3]).unwrap(),
            0.0
        );
    }

    #[test]
    fn chart_fields_are_killing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..=4 {
            for sign in [Sign::Positive, Sign::Negative] {
                let h = chart_metric(n, sign).unwrap();
                let (b, f) = random_b_f(&mut rng, n);
                let a = lower(sign, &killing_vector(sign, &b, &f).unwrap());
                for _ in 0..5 {
                    let p = point(&mut rng, n);
                    assert!(killing_residual(&h, &a, &p).unwrap() < 1e-9);
                }
                // the opposite constant term breaks it
                let wrong = lower(sign, &killing_vector(sign.flip(), &b, &f).unwrap());
                assert!(killing_residual(&h, &wrong, &point(&mut rng, n)).unwrap() > 1e-3);
            }
        }
    }

    #[test]
    fn rotation_generator_n2() {
        let h = chart_metric(2, Sign::Positive).unwrap();
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let a = sphere_killing_form(&DVector::zeros(2), &f).unwrap();
        assert!(killing_residual(&h, &a, &[0.3, -0.7]).unwrap() < 1e-12);
    }

    #[test]
    fn not_skew_rejected() {
        let f = DMatrix::identity(2, 2);
        assert!(matches!(
            sphere_killing_form(&DVector::zeros(2), &f),
            Err(Error::NotSkew(_))
        ));
    }

    #[test]
    fn algebra_dimension() {
        for n in 2..=6 {
            for sign in [Sign::Positive, Sign::Negative] {
                assert_eq!(
                    killing_algebra_dim(sign, n, &rank_points(n)).unwrap(),
                    n * (n + 1) / 2
                );
            }
        }
        // three points miss the so(2) fixing them in dimension 4
        assert_eq!(
            killing_algebra_dim(Sign::Positive, 4, &rank_points(4)[..3]).unwrap(),
            9
        );
    }

    #[test]
    fn conformal_general_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for sign in [Sign::Positive, Sign::Negative] {
            let h = chart_metric(3, sign).unwrap();
            let (bb, d) = random_b_f(&mut rng, 3);
            let ci = DVector::from_vec(vec![0.3, -0.2, 0.7]);
            let a = lower(sign, &conformal_vector(&bb, &d, 0.8, &ci).unwrap());
            let p = point(&mut rng, 3);
            assert!(conformal_system_residual(&h, &a, &p).unwrap() < 1e-9);
            // dilations are conformal but not Killing
            assert!(killing_residual(&h, &a, &p).unwrap() > 1e-3);
        }
    }

    #[test]
    fn family2_one_form_is_flat_conformal() {
        use crate::families::{build, FamilyId, FamilyParams, FamilySpec};
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..=4 {
            let g = build(&FamilySpec::new(
                FamilyId::SimF2,
                n,
                FamilyParams::random(&mut rng, n),
            ))
            .unwrap();
            let a = fiber_one_form(&g, 0.3, -0.4).unwrap();
            let flat = crate::families::riemannian_flat(n);
            let p = point(&mut rng, n);
            assert!(conformal_system_residual(&flat, &a, &p).unwrap() < 1e-9);
            // trace part: d_i A_i = H1 / 2 with H1 = B.x
            let k = killing_tensor(&flat, &a, &p).unwrap();
            let mut full = vec![1.0];
            full.extend_from_slice(&p);
            full.push(-0.4);
            let mut zero = full.clone();
            zero[0] = 0.0;
            let h1 =
                g.values(&full).unwrap()[(n + 1, n + 1)] - g.values(&zero).unwrap()[(n + 1, n + 1)];
            assert!((0.5 * k[(0, 0)] - 0.5 * h1).abs() < 1e-9);
        }
    }

    #[test]
    fn off_diagonal_violation() {
        let h = chart_metric(2, Sign::Positive).unwrap();
        let swap = JetField::new(2, |x| vec![x[1].clone(), x[0].clone()]);
        let a = lower(Sign::Positive, &swap);
        assert!(conformal_system_residual(&h, &a, &[0.2, 0.3]).unwrap() > 1e-3);
    }

    #[test]
    fn flow_preserves_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for sign in [Sign::Positive, Sign::Negative] {
            let h = chart_metric(3, sign).unwrap();
            let (b, f) = random_b_f(&mut rng, 3);
            let x = killing_vector(sign, &b, &f).unwrap();
            let defect = flow_isometry_defect(&h, &x, &[0.1, -0.2, 0.15], 0.1, 20).unwrap();
            assert!(defect < 1e-5, "{defect}");
        }
    }

    #[test]
    fn rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = chart_metric(3, Sign::Negative).unwrap();
        let (b, f) = random_b_f(&mut rng, 3);
        let a = lobachevskian_killing_form(&b, &f).unwrap();
        let q = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0))
            .qr()
            .q();
        let rotated = a.rotate_covector(&q);
        let y = [0.1, 0.3, -0.2];
        let x: Vec<f64> = (&q * DVector::from_column_slice(&y))
            .iter()
            .copied()
            .collect();
        let before = killing_residual(&h, &a, &x).unwrap();
        let after = killing_residual(&h, &rotated, &y).unwrap();
        assert!((before - after).abs() < 1e-9 && after < 1e-9);
        // the chart metric itself is rotation invariant
        let pulled = crate::walker::coordinate_transform(&h, &linear_map(&q)).unwrap();
        assert!((pulled.values(&y).unwrap() - h.values(&y).unwrap()).amax() < 1e-12);
    }
}
