//! Constructors for the metric families.
//!
//! Walker metrics use coordinates `(v, x^1, ..., x^n, u)` and have the form
//! `g = 2 dv du + h + 2 A_i dx^i du + H du^2`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fields::{JetMatrix, LambdaKind, MetricField, UPoly, WalkerLayout};
use crate::jets::{sum_squares, Jet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }

    fn symbol(self) -> char {
        match self {
            Sign::Positive => '+',
            Sign::Negative => '-',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyId {
    /// `2 dv du + sum dx^2` in Walker coordinates.
    Flat,
    /// Riemannian space form of dimension `n`, curvature `sign * c`.
    ConstCurvRiem(Sign),
    /// Lorentzian space form of dimension `n`, curvature `sign * c`.
    ConstCurvLorentz(Sign),
    /// Sphere of curvature `c` times Lobachevskian space of curvature `-c`, total dimension `n`.
    Product,
    PpwaveF1,
    SimF2,
    SphereF3,
    HypF4,
    Thc3Dec(Sign),
    Thc3Flat,
    GtOriginal,
    GtCorrected,
    GtSimplified,
    CahenWallach,
}

impl FamilyId {
    pub const ALL: [FamilyId; 17] = [
        FamilyId::Flat,
        FamilyId::ConstCurvRiem(Sign::Positive),
        FamilyId::ConstCurvRiem(Sign::Negative),
        FamilyId::ConstCurvLorentz(Sign::Positive),
        FamilyId::ConstCurvLorentz(Sign::Negative),
        FamilyId::Product,
        FamilyId::PpwaveF1,
        FamilyId::SimF2,
        FamilyId::SphereF3,
        FamilyId::HypF4,
        FamilyId::Thc3Dec(Sign::Positive),
        FamilyId::Thc3Dec(Sign::Negative),
        FamilyId::Thc3Flat,
        FamilyId::GtOriginal,
        FamilyId::GtCorrected,
        FamilyId::GtSimplified,
        FamilyId::CahenWallach,
    ];

    /// The four indecomposable families with holonomy inside `sim(n)`.
    pub const THEOREM_FAMILIES: [FamilyId; 4] = [
        FamilyId::PpwaveF1,
        FamilyId::SimF2,
        FamilyId::SphereF3,
        FamilyId::HypF4,
    ];

    pub fn is_walker(self) -> bool {
        !matches!(
            self,
            FamilyId::ConstCurvRiem(_)
                | FamilyId::ConstCurvLorentz(_)
                | FamilyId::Product
                | FamilyId::GtOriginal
        )
    }

    /// Whether the family lives in fixed dimension 4 regardless of `n`.
    pub fn fixed_dim4(self) -> bool {
        matches!(
            self,
            FamilyId::GtOriginal | FamilyId::GtCorrected | FamilyId::GtSimplified
        )
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyId::Flat => write!(f, "flat"),
            FamilyId::ConstCurvRiem(s) => write!(f, "const_curv_riem{}", s.symbol()),
            FamilyId::ConstCurvLorentz(s) => write!(f, "const_curv_lorentz{}", s.symbol()),
            FamilyId::Product => write!(f, "product"),
            FamilyId::PpwaveF1 => write!(f, "ppwave_f1"),
            FamilyId::SimF2 => write!(f, "sim_f2"),
            FamilyId::SphereF3 => write!(f, "sphere_f3"),
            FamilyId::HypF4 => write!(f, "hyp_f4"),
            FamilyId::Thc3Dec(s) => write!(f, "thc3_dec{}", s.symbol()),
            FamilyId::Thc3Flat => write!(f, "thc3_flat"),
            FamilyId::GtOriginal => write!(f, "gt_original"),
            FamilyId::GtCorrected => write!(f, "gt_corrected"),
            FamilyId::GtSimplified => write!(f, "gt_simplified"),
            FamilyId::CahenWallach => write!(f, "cahen_wallach"),
        }
    }
}

impl FromStr for FamilyId {
    type Err = Error;
    fn from_str(s: &str) -> Result<FamilyId> {
        FamilyId::ALL
            .iter()
            .copied()
            .find(|id| id.to_string() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown family `{s}`")))
    }
}

/// Parameter functions of `u` and the constant `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyParams {
    pub a: UPoly,
    pub b: Vec<UPoly>,
    pub c: Vec<UPoly>,
    pub d: UPoly,
    /// `None` selects the default `-+(1 + u^2/4)` for the sphere/Lobachevskian families.
    pub lambda: Option<UPoly>,
    pub c_const: f64,
}

impl FamilyParams {
    /// All functions zero, `c = 1`.
    pub fn zeros(n: usize) -> FamilyParams {
        FamilyParams {
            a: UPoly::zero(),
            b: vec![UPoly::zero(); n],
            c: vec![UPoly::zero(); n],
            d: UPoly::zero(),
            lambda: None,
            c_const: 1.0,
        }
    }

    /// Random polynomials of degree `<= 2` with coefficients in `[-1, 1]`.
    pub fn random<R: Rng>(rng: &mut R, n: usize) -> FamilyParams {
        FamilyParams {
            a: UPoly::random(rng, 2),
            b: (0..n).map(|_| UPoly::random(rng, 2)).collect(),
            c: (0..n).map(|_| UPoly::random(rng, 2)).collect(),
            d: UPoly::random(rng, 2),
            lambda: None,
            c_const: 1.0,
        }
    }

    pub fn with_a(mut self, a: UPoly) -> Self {
        self.a = a;
        self
    }

    pub fn with_b(mut self, b: Vec<UPoly>) -> Self {
        self.b = b;
        self
    }

    pub fn with_lambda(mut self, lambda: UPoly) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_c_const(mut self, c: f64) -> Self {
        self.c_const = c;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    pub id: FamilyId,
    pub n: usize,
    pub params: FamilyParams,
}

impl FamilySpec {
    pub fn new(id: FamilyId, n: usize, params: FamilyParams) -> FamilySpec {
        FamilySpec { id, n, params }
    }

    /// Zero parameters except those a family needs to be nondegenerate.
    pub fn simple(id: FamilyId, n: usize) -> FamilySpec {
        let mut params = FamilyParams::zeros(n);
        match id {
            FamilyId::PpwaveF1 | FamilyId::CahenWallach => params.a = UPoly::constant(1.0),
            FamilyId::SimF2 | FamilyId::SphereF3 | FamilyId::HypF4 => {
                if n > 0 {
                    params.b[0] = UPoly::constant(1.0);
                }
            }
            _ => {}
        }
        FamilySpec { id, n, params }
    }

    /// Dimension of the constructed metric.
    pub fn dim(&self) -> usize {
        match self.id {
            FamilyId::ConstCurvRiem(_) | FamilyId::ConstCurvLorentz(_) | FamilyId::Product => {
                self.n
            }
            id if id.fixed_dim4() => 4,
            _ => self.n + 2,
        }
    }
}

/// `Psi = 4 / (1 + eps |x|^2)^2` with `eps = +1` (sphere) or `-1` (Lobachevskian).
pub fn psi(x: &[Jet], sign: Sign) -> Jet {
    (1.0 + sum_squares(x).scale(sign.value()))
        .powi(-2)
        .scale(4.0)
}

fn default_lambda(sign: Sign) -> UPoly {
    // -+(1 + u^2/4), sign-safe on [-1, 1]
    UPoly::new(vec![1.0, 0.0, 0.25]).scale(-sign.value())
}

fn lambda_kind(p: &UPoly) -> LambdaKind {
    match p.degree() {
        None => LambdaKind::Zero,
        Some(0) => LambdaKind::Constant,
        Some(_) => LambdaKind::Varying,
    }
}

struct WalkerParts {
    h: JetMatrix,
    a: Vec<Jet>,
    hh: Jet,
}

fn walker_field(
    n: usize,
    label: String,
    layout: WalkerLayout,
    parts: impl Fn(&Jet, &[Jet], &Jet) -> Result<WalkerParts> + Send + Sync + 'static,
) -> MetricField {
    let d = n + 2;
    MetricField::new(d, (n + 1, 1), label, move |coords| {
        let (v, x, u) = (&coords[0], &coords[1..=n], &coords[n + 1]);
        let p = parts(v, x, u)?;
        let mut g = JetMatrix::zeros(d, v);
        g.set_sym(0, d - 1, v.lift(1.0));
        for i in 0..n {
            for j in 0..n {
                g.set(i + 1, j + 1, p.h.get(i, j).clone());
            }
            g.set_sym(i + 1, d - 1, p.a[i].clone());
        }
        g.set(d - 1, d - 1, p.hh);
        Ok(g)
    })
    .with_walker(layout)
}

fn conformal_fiber(x: &[Jet], factor: &Jet) -> JetMatrix {
    let n = x.len();
    let mut h = JetMatrix::zeros(n, factor);
    for i in 0..n {
        h.set(i, i, factor.clone());
    }
    h
}

fn dot(b: &[Jet], x: &[Jet]) -> Jet {
    let mut acc = x[0].zero_like();
    for (bi, xi) in b.iter().zip(x) {
        acc += bi * xi;
    }
    acc
}

fn sum_sq_polys(ps: &[UPoly]) -> UPoly {
    ps.iter().fold(UPoly::zero(), |acc, p| acc.add(&p.mul(p)))
}

fn check_walker_n(spec: &FamilySpec) -> Result<()> {
    if spec.n < 2 {
        return Err(Error::FamilyConstraint(format!(
            "{} needs fiber dimension n >= 2, got {}",
            spec.id, spec.n
        )));
    }
    if spec.params.b.len() != spec.n || spec.params.c.len() != spec.n {
        return Err(Error::FamilyConstraint(format!(
            "{} needs {} functions B_i and C_i",
            spec.id, spec.n
        )));
    }
    Ok(())
}

fn walker_box(n: usize, x_range: (f64, f64)) -> Vec<(f64, f64)> {
    let mut b = vec![(-0.5, 0.5)];
    b.extend(std::iter::repeat(x_range).take(n));
    b.push((-1.0, 1.0));
    b
}

fn attach_params(mut g: MetricField, p: &FamilyParams, n: usize) -> MetricField {
    g = g.with_param("a", p.a.clone()).with_param("D", p.d.clone());
    for i in 0..n {
        g = g
            .with_param(format!("B{}", i + 1), p.b[i].clone())
            .with_param(format!("C{}", i + 1), p.c[i].clone());
    }
    g
}

/// Builds the metric named by `spec`, validating family constraints.
pub fn build(spec: &FamilySpec) -> Result<MetricField> {
    let n = spec.n;
    let p = spec.params.clone();
    let label = spec.id.to_string();
    match spec.id {
        FamilyId::Flat | FamilyId::Thc3Flat => {
            if n < 1 {
                return Err(Error::FamilyConstraint("flat needs n >= 1".into()));
            }
            let layout = WalkerLayout {
                n,
                fiber_depends_on_u: false,
                lambda: LambdaKind::Zero,
            };
            Ok(walker_field(n, label, layout, move |v, _, _| {
                Ok(WalkerParts {
                    h: JetMatrix::identity(n, v),
                    a: vec![v.zero_like(); n],
                    hh: v.zero_like(),
                })
            })
            .with_sampling(walker_box(n, (-1.0, 1.0)), |_| true))
        }
        FamilyId::ConstCurvRiem(sign) => space_form(n, sign, p.c_const, false),
        FamilyId::ConstCurvLorentz(sign) => space_form(n, sign, p.c_const, true),
        FamilyId::Product => {
            if n < 4 {
                return Err(Error::FamilyConstraint(format!(
                    "product needs dimension >= 4, got {n}"
                )));
            }
            let k1 = n / 2;
            let g1 = space_form(k1, Sign::Positive, p.c_const, false)?;
            let g2 = space_form(n - k1, Sign::Negative, p.c_const, false)?;
            Ok(product_metric(&g1, &g2).with_label(label))
        }
        FamilyId::PpwaveF1 | FamilyId::CahenWallach => {
            check_walker_n(spec)?;
            let a = if spec.id == FamilyId::CahenWallach {
                UPoly::constant(1.0)
            } else {
                p.a.clone()
            };
            let layout = WalkerLayout {
                n,
                fiber_depends_on_u: false,
                lambda: LambdaKind::Zero,
            };
            let a2 = a.clone();
            let g = walker_field(n, label, layout, move |v, x, u| {
                Ok(WalkerParts {
                    h: JetMatrix::identity(n, v),
                    a: vec![v.zero_like(); n],
                    hh: &a2.eval_jet(u) * &sum_squares(x),
                })
            })
            .with_sampling(walker_box(n, (-1.0, 1.0)), |_| true);
            Ok(attach_params(g, &FamilyParams { a, ..p.clone() }, n))
        }
        FamilyId::SimF2 => {
            check_walker_n(spec)?;
            if sum_sq_polys(&p.b).is_zero() {
                return Err(Error::FamilyConstraint(
                    "sim_f2 requires sum B_i(u)^2 not identically 0".into(),
                ));
            }
            let layout = WalkerLayout {
                n,
                fiber_depends_on_u: false,
                lambda: LambdaKind::Zero,
            };
            let q = p.clone();
            let g = walker_field(n, label, layout, move |v, x, u| {
                let b: Vec<Jet> = q.b.iter().map(|f| f.eval_jet(u)).collect();
                let c: Vec<Jet> = q.c.iter().map(|f| f.eval_jet(u)).collect();
                let r2 = sum_squares(x);
                let bx = dot(&b, x);
                let a: Vec<Jet> = (0..n)
                    .map(|i| (&(&bx * &x[i]).scale(2.0) - &(&b[i] * &r2)).scale(0.25))
                    .collect();
                let h1 = bx.clone();
                let bsq = sum_squares(&b);
                let h0 = (&bsq * &r2.square()).scale(1.0 / 16.0)
                    + &q.a.eval_jet(u) * &r2
                    + dot(&c, x)
                    + q.d.eval_jet(u);
                Ok(WalkerParts {
                    h: JetMatrix::identity(n, v),
                    a,
                    hh: v * &h1 + h0,
                })
            })
            .with_sampling(walker_box(n, (-1.0, 1.0)), |_| true);
            Ok(attach_params(g, &p, n))
        }
        FamilyId::SphereF3 | FamilyId::HypF4 => {
            check_walker_n(spec)?;
            let sign = if spec.id == FamilyId::SphereF3 {
                Sign::Positive
            } else {
                Sign::Negative
            };
            let lambda = p.lambda.clone().unwrap_or_else(|| default_lambda(sign));
            let (lo, hi) = lambda.range_on(-1.0, 1.0);
            match sign {
                Sign::Positive if hi >= 0.0 => {
                    return Err(Error::FamilyConstraint(format!(
                        "sphere_f3 requires lambda(u) < 0 on [-1, 1]; max is {hi}"
                    )))
                }
                Sign::Negative if lo <= 0.0 => {
                    return Err(Error::FamilyConstraint(format!(
                        "hyp_f4 requires lambda(u) > 0 on [-1, 1]; min is {lo}"
                    )))
                }
                _ => {}
            }
            if sum_sq_polys(&p.b).add(&p.a.mul(&p.a)).is_zero() {
                return Err(Error::FamilyConstraint(format!(
                    "{} requires sum B_i(u)^2 + a(u)^2 not identically 0",
                    spec.id
                )));
            }
            let layout = WalkerLayout {
                n,
                fiber_depends_on_u: lambda.degree().unwrap_or(0) > 0,
                lambda: lambda_kind(&lambda),
            };
            let q = p.clone();
            let lam = lambda.clone();
            let eps = sign.value();
            let g = walker_field(n, label, layout, move |v, x, u| {
                let l = lam.eval_jet(u);
                let ps = psi(x, sign);
                let root = ps.try_sqrt()?;
                let b: Vec<Jet> = q.b.iter().map(|f| f.eval_jet(u)).collect();
                let c: Vec<Jet> = q.c.iter().map(|f| f.eval_jet(u)).collect();
                let r2 = sum_squares(x);
                let bx = dot(&b, x);
                // sphere: h = Psi / (-lambda), Lobachevskian: h = Psi / lambda
                let h = conformal_fiber(x, &ps.try_div(&l.scale(-eps))?);
                let a: Vec<Jet> = (0..n)
                    .map(|i| {
                        &ps * &(&bx * &x[i] - (&b[i] * &r2).scale(0.5) + b[i].scale(0.5 * eps))
                    })
                    .collect();
                let h0 = &ps * &(sum_squares(&b) + bx.square().scale(eps))
                    + &root * &(&q.a.eval_jet(u) * &r2 + dot(&c, x) + q.d.eval_jet(u));
                // H = lambda (v^2 - eps H0)
                let hh = &l * &(v.square() - h0.scale(eps));
                Ok(WalkerParts { h, a, hh })
            });
            let g = if sign == Sign::Negative {
                g.with_domain(move |pt| pt[1..=n].iter().map(|t| t * t).sum::<f64>() < 1.0)
                    .with_sampling(walker_box(n, (-0.9, 0.9)), move |pt| {
                        pt[1..=n].iter().map(|t| t * t).sum::<f64>() <= 0.81
                    })
            } else {
                g.with_sampling(walker_box(n, (-1.0, 1.0)), |_| true)
            };
            Ok(attach_params(g, &p, n).with_param("lambda", lambda))
        }
        FamilyId::Thc3Dec(sign) => {
            if n < 2 {
                return Err(Error::FamilyConstraint(format!(
                    "thc3_dec needs n >= 2, got {n}"
                )));
            }
            let c = p.c_const;
            if !(c > 0.0) {
                return Err(Error::FamilyConstraint(format!(
                    "thc3_dec requires c > 0, got {c}"
                )));
            }
            let layout = WalkerLayout {
                n,
                fiber_depends_on_u: false,
                lambda: LambdaKind::Constant,
            };
            let eps = sign.value();
            let g = walker_field(n, label, layout, move |v, x, _| {
                let h = conformal_fiber(x, &psi(x, sign).scale(1.0 / c));
                Ok(WalkerParts {
                    h,
                    a: vec![v.zero_like(); n],
                    hh: v.square().scale(-eps * c),
                })
            });
            let g = if sign == Sign::Negative {
                g.with_domain(move |pt| pt[1..=n].iter().map(|t| t * t).sum::<f64>() < 1.0)
                    .with_sampling(walker_box(n, (-0.9, 0.9)), move |pt| {
                        pt[1..=n].iter().map(|t| t * t).sum::<f64>() <= 0.81
                    })
            } else {
                g.with_sampling(walker_box(n, (-1.0, 1.0)), |_| true)
            };
            Ok(g.with_param("lambda", UPoly::constant(-eps * c)))
        }
        FamilyId::GtOriginal => Ok(gt_metric(label, false)),
        FamilyId::GtCorrected => Ok(gt_metric(label, true)),
        FamilyId::GtSimplified => {
            let layout = WalkerLayout {
                n: 2,
                fiber_depends_on_u: false,
                lambda: LambdaKind::Constant,
            };
            Ok(walker_field(2, label, layout, |v, x, _| {
                let f = x[0].square().scale(2.0).try_recip()?;
                Ok(WalkerParts {
                    h: conformal_fiber(x, &f),
                    a: vec![v.zero_like(); 2],
                    hh: v.square().scale(2.0),
                })
            })
            .with_domain(|pt| pt[1] > 0.05)
            .with_sampling(gt_box(), |pt| pt[1] >= 0.15)
            .with_param("lambda", UPoly::constant(2.0)))
        }
    }
}

fn gt_box() -> Vec<(f64, f64)> {
    vec![(-0.5, 0.5), (0.3, 1.0), (-0.5, 0.5), (-0.5, 0.5)]
}

/// The four-dimensional metrics in coordinates `(x, y, z, t)`:
/// original `2dxdt + 4y dxdy - 4z dxdz + ...` or corrected `2dxdt + 4y dtdy - 4z dtdz + ...`.
fn gt_metric(label: String, corrected: bool) -> MetricField {
    let comps = move |c: &[Jet]| {
        let (x, y, z) = (&c[0], &c[1], &c[2]);
        let mut g = JetMatrix::zeros(4, x);
        g.set_sym(0, 3, x.lift(1.0));
        let row = if corrected { 3 } else { 0 };
        g.set_sym(row, 1, y.scale(2.0));
        g.set_sym(row, 2, z.scale(-2.0));
        let f = y.square().scale(2.0).try_recip()?;
        g.set(1, 1, f.clone());
        g.set(2, 2, f);
        let w = x + y.square() - z.square();
        g.set(3, 3, w.square().scale(2.0));
        Ok(g)
    };
    let g = MetricField::new(4, (3, 1), label, comps)
        .with_domain(|pt| pt[1] > 0.05)
        .with_sampling(gt_box(), |pt| pt[1] >= 0.15);
    if corrected {
        g.with_walker(WalkerLayout {
            n: 2,
            fiber_depends_on_u: false,
            lambda: LambdaKind::Constant,
        })
        .with_param("lambda", UPoly::constant(2.0))
    } else {
        g
    }
}

/// Space form `(1/c) 4 eta / (1 + sign * eta(x,x))^2` of curvature `sign * c`,
/// with `eta` Euclidean or Minkowski (first coordinate timelike).
fn space_form(dim: usize, sign: Sign, c: f64, lorentz: bool) -> Result<MetricField> {
    if dim < 2 {
        return Err(Error::FamilyConstraint(format!(
            "space form needs dimension >= 2, got {dim}"
        )));
    }
    if !(c > 0.0) {
        return Err(Error::FamilyConstraint(format!(
            "curvature scale must be positive, got {c}"
        )));
    }
    let eta: Vec<f64> = (0..dim)
        .map(|i| if lorentz && i == 0 { -1.0 } else { 1.0 })
        .collect();
    let eta2 = eta.clone();
    let eps = sign.value();
    let quad = move |p: &[f64]| -> f64 { p.iter().zip(&eta2).map(|(x, e)| e * x * x).sum() };
    let kind = if lorentz {
        "const_curv_lorentz"
    } else {
        "const_curv_riem"
    };
    let sig = if lorentz { (dim - 1, 1) } else { (dim, 0) };
    let g = MetricField::new(dim, sig, format!("{kind}{}", sign.symbol()), move |x| {
        let mut q = x[0].zero_like();
        for (xi, e) in x.iter().zip(&eta) {
            q += xi.square().scale(*e);
        }
        let conf = (1.0 + q.scale(eps)).powi(-2).scale(4.0 / c);
        let mut g = JetMatrix::zeros(dim, &x[0]);
        for (i, e) in eta.iter().enumerate() {
            g.set(i, i, conf.scale(*e));
        }
        Ok(g)
    })
    .with_domain(move |p| 1.0 + eps * quad(p) > 0.05)
    .with_sampling(vec![(-0.5, 0.5); dim], |_| true);
    Ok(g.with_param("c", UPoly::constant(c)))
}

/// Riemannian space form of dimension `dim` and curvature `sign * c`.
pub fn riemannian_space_form(dim: usize, sign: Sign, c: f64) -> Result<MetricField> {
    space_form(dim, sign, c, false)
}

/// Lorentzian space form of dimension `dim` and curvature `sign * c`.
pub fn lorentzian_space_form(dim: usize, sign: Sign, c: f64) -> Result<MetricField> {
    space_form(dim, sign, c, true)
}

/// Euclidean `R^n`.
pub fn riemannian_flat(n: usize) -> MetricField {
    MetricField::new(n, (n, 0), "euclidean", move |x| {
        Ok(JetMatrix::identity(n, &x[0]))
    })
}

/// The line with metric `eps dt^2`.
pub fn line(eps: f64) -> MetricField {
    let sig = if eps > 0.0 { (1, 0) } else { (0, 1) };
    MetricField::new(1, sig, "line", move |x| {
        let mut g = JetMatrix::zeros(1, &x[0]);
        g.set(0, 0, x[0].lift(eps));
        Ok(g)
    })
}

/// Block-diagonal product metric on the product chart.
pub fn product_metric(g1: &MetricField, g2: &MetricField) -> MetricField {
    let (d1, d2) = (g1.dim, g2.dim);
    let d = d1 + d2;
    let (a, b) = (g1.clone(), g2.clone());
    let (da, db) = (g1.clone(), g2.clone());
    let mut sample_box = g1.sample_box().to_vec();
    sample_box.extend_from_slice(g2.sample_box());
    let (sa, sb) = (g1.clone(), g2.clone());
    MetricField::new(
        d,
        (
            g1.signature.0 + g2.signature.0,
            g1.signature.1 + g2.signature.1,
        ),
        format!("{}x{}", g1.label, g2.label),
        move |x| {
            let m1 = a.eval_jets(&x[..d1])?;
            let m2 = b.eval_jets(&x[d1..])?;
            let mut g = JetMatrix::zeros(d, &x[0]);
            for i in 0..d1 {
                for j in 0..d1 {
                    g.set(i, j, m1.get(i, j).clone());
                }
            }
            for i in 0..d2 {
                for j in 0..d2 {
                    g.set(d1 + i, d1 + j, m2.get(i, j).clone());
                }
            }
            Ok(g)
        },
    )
    .with_domain(move |p| da.in_domain(&p[..d1]) && db.in_domain(&p[d1..]))
    .with_sampling(sample_box, move |p| {
        sa.admissible_sample(&p[..d1]) && sb.admissible_sample(&p[d1..])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::CurvatureBundle;
    use crate::fields::signature_of;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ppwave_values() {
        let g = build(&FamilySpec::simple(FamilyId::PpwaveF1, 2)).unwrap();
        let m = g.values(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(m[(3, 3)], 1.0);
        assert_eq!(m[(0, 3)], 1.0);
        assert_eq!(m[(1, 1)], 1.0);
        assert_eq!(m[(2, 2)], 1.0);
        let m0 = g.values(&[0.3, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(m0[(3, 3)], 0.0);
        assert_eq!(signature_of(&m0), (3, 1));
    }

    #[test]
    fn sim_f2_hand_values() {
        // B = (1, 0): at x = (1, 0): H1 = 1, A1 = (2 - 1)/4, A2 = 0
        let g = build(&FamilySpec::simple(FamilyId::SimF2, 2)).unwrap();
        let m = g.values(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(m[(1, 3)], 0.25);
        assert_eq!(m[(2, 3)], 0.0);
        // H(v=1) - H(v=0) = H1
        let m1 = g.values(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(m1[(3, 3)] - m[(3, 3)], 1.0);
        // at x = (0.5, 0.7): A2 = (2 * 0.5 * 0.7 - 0)/4
        let m2 = g.values(&[0.0, 0.5, 0.7, 0.0]).unwrap();
        assert_relative_eq!(m2[(2, 3)], 0.175);
        assert_relative_eq!(m2[(1, 3)], (2.0 * 0.25 - 0.74) / 4.0);
    }

    #[test]
    fn sphere_fiber_at_origin() {
        let g = build(&FamilySpec::new(
            FamilyId::SphereF3,
            2,
            FamilyParams::zeros(2)
                .with_b(vec![UPoly::constant(1.0), UPoly::zero()])
                .with_lambda(UPoly::constant(-1.0)),
        ))
        .unwrap();
        let h = g.fiber_metric(0.0, 0.0).unwrap();
        let m = h.eval(&[0.0, 0.0], 1).unwrap();
        assert_eq!(m.values(), nalgebra::DMatrix::identity(2, 2) * 4.0);
        assert_eq!(m.get(0, 0).gradient(), vec![0.0, 0.0]);
    }

    #[test]
    fn constraints_rejected() {
        let bad = FamilySpec::new(
            FamilyId::SphereF3,
            2,
            FamilyParams::zeros(2)
                .with_a(UPoly::constant(1.0))
                .with_lambda(UPoly::new(vec![0.0, 1.0])),
        );
        assert!(matches!(build(&bad), Err(Error::FamilyConstraint(m)) if m.contains("lambda")));
        let flat_b = FamilySpec::new(FamilyId::SimF2, 2, FamilyParams::zeros(2));
        assert!(matches!(build(&flat_b), Err(Error::FamilyConstraint(_))));
        let neg_c = FamilySpec::new(
            FamilyId::Thc3Dec(Sign::Positive),
            2,
            FamilyParams::zeros(2).with_c_const(-1.0),
        );
        assert!(build(&neg_c).is_err());
        let hyp = FamilySpec::new(FamilyId::HypF4, 2, FamilyParams::zeros(2));
        assert!(build(&hyp).is_err());
    }

    #[test]
    fn names_round_trip() {
        for id in FamilyId::ALL {
            assert_eq!(id.to_string().parse::<FamilyId>().unwrap(), id);
        }
    }

    #[test]
    fn walker_structure_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for id in FamilyId::THEOREM_FAMILIES {
            for n in 2..=4 {
                let spec = FamilySpec::new(id, n, FamilyParams::random(&mut rng, n));
                let g = build(&spec).unwrap();
                for _ in 0..5 {
                    let p = g.sample_point(&mut rng).unwrap();
                    let m = g.values(&p).unwrap();
                    assert_eq!(m[(0, 0)], 0.0);
                    assert_eq!(m[(0, n + 1)], 1.0);
                    let h = m.view((1, 1), (n, n)).into_owned();
                    assert_eq!(signature_of(&h), (n, 0));
                    assert_eq!(signature_of(&m), (n + 1, 1));
                }
            }
        }
    }

    #[test]
    fn thc3_flat_is_flat() {
        let g = build(&FamilySpec::simple(FamilyId::Thc3Flat, 3)).unwrap();
        let b = CurvatureBundle::at(&g, &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert!(b.riemann_lo.max_abs() <= 1e-10);
    }

    #[test]
    fn gt_weyl() {
        let p = [0.1, 0.4, 0.2, 0.3];
        let orig = build(&FamilySpec::simple(FamilyId::GtOriginal, 2)).unwrap();
        let corr = build(&FamilySpec::simple(FamilyId::GtCorrected, 2)).unwrap();
        assert!(CurvatureBundle::at(&orig, &p).unwrap().weyl_norm().unwrap() > 1e-3);
        assert!(CurvatureBundle::at(&corr, &p).unwrap().weyl_norm().unwrap() < 1e-9);
    }

    #[test]
    fn space_forms_have_declared_curvature() {
        for lorentz in [false, true] {
            for sign in [Sign::Positive, Sign::Negative] {
                let g = space_form(4, sign, 2.0, lorentz).unwrap();
                let b = CurvatureBundle::at(&g, &[0.1, -0.2, 0.15, 0.3]).unwrap();
                let x = nalgebra::dvector![0.2, 1.0, 0.0, 0.1];
                let y = nalgebra::dvector![0.0, 0.3, 1.0, -0.4];
                assert_relative_eq!(b.sectional(&x, &y), 2.0 * sign.value(), epsilon = 1e-9);
                assert!(b.weyl_norm().unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn product_block_structure() {
        let g = build(&FamilySpec::new(
            FamilyId::Product,
            5,
            FamilyParams::zeros(0),
        ))
        .unwrap();
        let m = g.values(&[0.1, 0.2, 0.3, 0.1, -0.2]).unwrap();
        assert_eq!(m[(0, 3)], 0.0);
        assert_eq!(signature_of(&m), (5, 0));
        let b = CurvatureBundle::at(&g, &[0.1, 0.2, 0.3, 0.1, -0.2]).unwrap();
        assert!(b.weyl_norm().unwrap() < 1e-9);
    }
}
