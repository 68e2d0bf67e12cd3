//! Holonomy algebra estimates from curvature endomorphisms transported to a base point.

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curvature::{parallel_transport, CurvatureBundle, STEPS_PER_UNIT};
use crate::error::{Error, Result};
use crate::fields::{ChartPoint, MetricField};
use crate::walker::WalkerFrame;

/// Relative singular-value cutoff for spans.
pub const SVD_CUTOFF: f64 = 1e-7;
/// Largest tolerated loss of metric compatibility along a path.
pub const DRIFT_LIMIT: f64 = 1e-6;
/// Default per-coordinate radius of holonomy sample points around the base.
pub const SAMPLE_RADIUS: f64 = 0.2;
/// Tolerance of the invariant-line test.
pub const LINE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpanFlags {
    pub preserves_null_line: bool,
    pub preserves_nondeg_subspace: bool,
    pub fiber_rotation_dim: usize,
}

#[derive(Clone, Debug)]
pub struct EndoSpan {
    pub base: ChartPoint,
    pub metric: DMatrix<f64>,
    pub gens: Vec<DMatrix<f64>>,
    /// Frobenius-orthonormal basis of the span of `gens`.
    pub basis: Vec<DMatrix<f64>>,
    pub dim: usize,
    /// Orthonormal basis of the bracket closure.
    pub closure: Vec<DMatrix<f64>>,
    pub bracket_closed_dim: usize,
    pub flags: SpanFlags,
    pub null_line: Option<DVector<f64>>,
    /// Sizes of the invariant orthogonal blocks, largest first.
    pub blocks: Vec<usize>,
}

/// `(0.1, 0.2, ..., 0.2, 0.1)`.
pub fn default_base(dim: usize) -> ChartPoint {
    (0..dim)
        .map(|i| if i == 0 || i + 1 == dim { 0.1 } else { 0.2 })
        .collect()
}

/// Polyline from `from` to `to` changing one coordinate at a time.
pub fn axis_path(from: &[f64], to: &[f64]) -> Vec<ChartPoint> {
    let mut path = vec![from.to_vec()];
    let mut cur = from.to_vec();
    for k in 0..from.len() {
        if cur[k] != to[k] {
            cur[k] = to[k];
            path.push(cur.clone());
        }
    }
    path
}

/// The base point followed by `count - 1` random points within `radius`
/// (per coordinate) whose axis paths from the base stay in the domain,
/// sorted lexicographically.
pub fn sample_points(
    g: &MetricField,
    base: &[f64],
    count: usize,
    radius: f64,
    seed: u64,
) -> Result<Vec<ChartPoint>> {
    if !g.in_domain(base) {
        return Err(Error::OutsideDomain(base.to_vec()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![base.to_vec()];
    let mut tries = 0;
    while pts.len() < count {
        tries += 1;
        if tries > 100_000 {
            return Err(Error::InvalidParameter(format!(
                "no holonomy samples for `{}`",
                g.label
            )));
        }
        let y: Vec<f64> = base
            .iter()
            .map(|b| b + rng.gen_range(-radius..radius))
            .collect();
        if g.admissible_sample(&y) && axis_path(base, &y).iter().all(|p| g.in_domain(p)) {
            pts.push(y);
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    Ok(pts)
}

/// `P^-1 R_y(d_a, d_b) P` for all coordinate planes, with `P` the transport from `base` to `y`.
pub fn transported_generators(
    g: &MetricField,
    base: &[f64],
    y: &[f64],
) -> Result<Vec<DMatrix<f64>>> {
    let d = g.dim;
    let path = axis_path(base, y);
    let p = parallel_transport(g, &path, &DMatrix::identity(d, d), STEPS_PER_UNIT)?;
    let g0 = g.values(base)?;
    let gy = g.values(y)?;
    let drift = (p.transpose() * &gy * &p - &g0).amax() / g0.amax();
    if drift > DRIFT_LIMIT {
        return Err(Error::TransportDrift(drift));
    }
    let pinv = p.clone().try_inverse().ok_or(Error::Singular)?;
    let b = CurvatureBundle::at(g, y)?;
    let mut out = Vec::with_capacity(d * (d - 1) / 2);
    for a in 0..d {
        for c in a + 1..d {
            let r = b.curvature_operator(&unit(d, a), &unit(d, c));
            out.push(&pinv * r * &p);
        }
    }
    Ok(out)
}

fn unit(d: usize, k: usize) -> DVector<f64> {
    let mut e = DVector::zeros(d);
    e[k] = 1.0;
    e
}

/// Orthonormal basis of the span of `mats`, dropping singular values below
/// `cutoff` times the largest. `floor` is an absolute scale below which
/// everything counts as zero.
pub fn span_basis(mats: &[DMatrix<f64>], cutoff: f64, floor: f64) -> Vec<DMatrix<f64>> {
    let Some(first) = mats.first() else {
        return Vec::new();
    };
    let (r, c) = first.shape();
    let cols: Vec<DVector<f64>> = mats
        .iter()
        .map(|m| DVector::from_column_slice(m.as_slice()))
        .collect();
    let a = DMatrix::from_columns(&cols);
    // u_i = A v_i / s_i stays inside the column span even when singular values repeat,
    // which the U factor of nalgebra's SVD does not guarantee
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    if smax <= floor {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    idx.into_iter()
        .filter(|&i| svd.singular_values[i] > cutoff * smax)
        .map(|i| {
            let u = (&a * vt.row(i).transpose()).normalize();
            DMatrix::from_column_slice(r, c, u.as_slice())
        })
        .collect()
}

fn bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Smallest bracket-closed span containing `basis`.
pub fn lie_closure(basis: &[DMatrix<f64>], cutoff: f64) -> Vec<DMatrix<f64>> {
    let mut cur = basis.to_vec();
    loop {
        let mut all = cur.clone();
        for i in 0..cur.len() {
            for j in i + 1..cur.len() {
                all.push(bracket(&cur[i], &cur[j]));
            }
        }
        let next = span_basis(&all, cutoff, 0.0);
        if next.len() == cur.len() {
            return next;
        }
        cur = next;
    }
}

/// Orthonormal basis of the common null space of the stacked matrices.
fn common_kernel(mats: &[DMatrix<f64>], d: usize) -> DMatrix<f64> {
    if mats.is_empty() {
        return DMatrix::identity(d, d);
    }
    let mut stacked = DMatrix::zeros(mats.len() * d, d);
    for (k, m) in mats.iter().enumerate() {
        stacked.view_mut((k * d, 0), (d, d)).copy_from(m);
    }
    null_space(stacked, SVD_CUTOFF)
}

fn null_space(a: DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let ncols = a.ncols();
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let cols: Vec<DVector<f64>> = (0..ncols)
        .filter(|&i| {
            i >= svd.singular_values.len() || svd.singular_values[i] <= cutoff * smax || smax == 0.0
        })
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(ncols, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Eigenvalues of `m / |m|`, computed on a shifted copy so that the Schur
/// deflation test stays meaningful for nilpotent matrices.
fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    let d = m.nrows();
    let scale = m.amax();
    if scale == 0.0 {
        return Some(vec![Complex::new(0.0, 0.0); d]);
    }
    let shifted = m / scale + DMatrix::identity(d, d) * 2.0;
    Schur::try_new(shifted, 1e-14, 10_000).map(|s| {
        s.complex_eigenvalues()
            .iter()
            .map(|z| z - Complex::new(2.0, 0.0))
            .collect()
    })
}

/// Eigenvalues closer than this (after normalization) are treated as one class.
const CLASS_TOL: f64 = 1e-4;

fn is_invariant_line(mats: &[DMatrix<f64>], l: &DVector<f64>) -> bool {
    let l = l.normalize();
    mats.iter().all(|a| {
        let al = a * &l;
        let mu = l.dot(&al);
        (al - &l * mu).norm() <= LINE_TOL * a.amax().max(1.0)
    })
}

fn is_null(g: &DMatrix<f64>, l: &DVector<f64>) -> bool {
    l.dot(&(g * l)).abs() <= LINE_TOL * l.norm_squared() * g.amax()
}

/// A null line through a subspace with orthonormal columns `q`, if one exists.
fn null_vector_in(g: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DVector<f64>> {
    if q.ncols() == 0 {
        return None;
    }
    let gq = q.transpose() * g * q;
    let eig = gq.symmetric_eigen();
    let scale = g.amax();
    let vals = &eig.eigenvalues;
    if let Some(i) = (0..vals.len()).find(|&i| vals[i].abs() <= 1e-8 * scale) {
        return Some(q * eig.eigenvectors.column(i));
    }
    let pos = (0..vals.len()).find(|&i| vals[i] > 0.0)?;
    let neg = (0..vals.len()).find(|&i| vals[i] < 0.0)?;
    let v = eig.eigenvectors.column(pos) / vals[pos].sqrt()
        + eig.eigenvectors.column(neg) / (-vals[neg]).sqrt();
    Some(q * v)
}

/// A null line preserved by every matrix in `mats`.
fn find_null_line(
    g: &DMatrix<f64>,
    mats: &[DMatrix<f64>],
    rng: &mut ChaCha8Rng,
) -> Option<DVector<f64>> {
    let d = g.nrows();
    let kernel = common_kernel(mats, d);
    if let Some(l) = null_vector_in(g, &kernel) {
        if is_invariant_line(mats, &l) {
            return Some(l.normalize());
        }
    }
    // a common eigenline is an eigenline of a generic combination
    let mut m = DMatrix::zeros(d, d);
    for a in mats {
        m += a * rng.gen_range(-1.0..1.0);
    }
    let scale = m.amax();
    let mut reals: Vec<f64> = eigenvalues(&m)?
        .iter()
        .filter(|z| z.im.abs() <= CLASS_TOL)
        .map(|z| z.re * scale)
        .collect();
    reals.sort_by(f64::total_cmp);
    reals.dedup_by(|a, b| (*a - *b).abs() <= CLASS_TOL * scale);
    for mu in reals {
        let shifted = &m - DMatrix::identity(d, d) * mu;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        let l = vt.row(imin).transpose();
        if is_null(g, &l) && is_invariant_line(mats, &l) {
            return Some(l.normalize());
        }
    }
    None
}

/// Sizes of the eigen-classes of a generic `g`-self-adjoint element of the commutant.
/// More than one class means a nondegenerate invariant subspace exists.
fn invariant_blocks(g: &DMatrix<f64>, mats: &[DMatrix<f64>], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let d = g.nrows();
    let idx = |a: usize, b: usize| a * d + b;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for m in mats {
        for a in 0..d {
            for c in 0..d {
                let mut row = vec![0.0; d * d];
                for b in 0..d {
                    row[idx(b, c)] += m[(a, b)];
                    row[idx(a, b)] -= m[(b, c)];
                }
                rows.push(row);
            }
        }
    }
    for a in 0..d {
        for c in a + 1..d {
            let mut row = vec![0.0; d * d];
            for b in 0..d {
                row[idx(b, c)] += g[(a, b)];
                row[idx(b, a)] -= g[(c, b)];
            }
            rows.push(row);
        }
    }
    let nrows = rows.len().max(d * d);
    let mut a = DMatrix::zeros(nrows, d * d);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let sols = null_space(a, SVD_CUTOFF);
    let mut s = DMatrix::zeros(d, d);
    for k in 0..sols.ncols() {
        let w = rng.gen_range(-1.0..1.0);
        for a in 0..d {
            for b in 0..d {
                s[(a, b)] += w * sols[(idx(a, b), k)];
            }
        }
    }
    let Some(eigs) = eigenvalues(&s) else {
        return vec![d];
    };
    let mut classes: Vec<((f64, f64), usize)> = Vec::new();
    for z in eigs.iter() {
        let key = (z.re, z.im.abs());
        match classes
            .iter_mut()
            .find(|(k, _)| (k.0 - key.0).abs() <= CLASS_TOL && (k.1 - key.1).abs() <= CLASS_TOL)
        {
            Some((_, n)) => *n += 1,
            None => classes.push((key, 1)),
        }
    }
    let mut sizes: Vec<usize> = classes.into_iter().map(|(_, n)| n).collect();
    sizes.sort_by(|a, b| b.cmp(a));
    sizes
}

/// Dimension of the part of the algebra fixing `p` and `q` of the Walker frame.
fn fiber_rotation_dim(g: &MetricField, gv: &DMatrix<f64>, basis: &[DMatrix<f64>]) -> usize {
    let Some(layout) = &g.walker else {
        return 0;
    };
    if basis.is_empty() {
        return 0;
    }
    let fr = WalkerFrame::from_metric_values(gv, layout.n);
    let d = gv.nrows();
    let mut cons = DMatrix::zeros(2 * d, basis.len());
    for (k, b) in basis.iter().enumerate() {
        cons.view_mut((0, k), (d, 1)).copy_from(&(b * &fr.p));
        cons.view_mut((d, k), (d, 1)).copy_from(&(b * &fr.q));
    }
    let rank = cons.rank(SVD_CUTOFF * cons.amax().max(1e-300));
    basis.len() - rank
}

/// Columns `E` with `E^T g E = eta` diagonal with entries +-1.
fn orthonormal_frame(g: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = g.clone().symmetric_eigen();
    let d = g.nrows();
    let mut e = eig.eigenvectors.clone();
    let mut eta = DMatrix::zeros(d, d);
    for k in 0..d {
        let lam = eig.eigenvalues[k];
        if lam.abs() <= 1e-12 * g.amax() {
            return Err(Error::Singular);
        }
        e.column_mut(k).scale_mut(1.0 / lam.abs().sqrt());
        eta[(k, k)] = lam.signum();
    }
    Ok((e, eta))
}

/// Curvature span at `base` from the listed sample points.
pub fn curvature_span(
    g: &MetricField,
    base: &[f64],
    samples: &[ChartPoint],
    seed: u64,
) -> Result<EndoSpan> {
    let gv = g.values(base)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    let mut gens = Vec::new();
    for y in &sorted {
        gens.extend(transported_generators(g, base, y)?);
    }
    let floor = 1e-10 * gv.amax();
    let basis = span_basis(&gens, SVD_CUTOFF, floor);
    let closure = lie_closure(&basis, SVD_CUTOFF);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // the eigen analysis runs in a g-orthonormal frame, where the matrices are well conditioned
    let (e, eta) = orthonormal_frame(&gv)?;
    let e_inv = e.clone().try_inverse().ok_or(Error::Singular)?;
    let in_frame: Vec<DMatrix<f64>> = closure.iter().map(|a| &e_inv * a * &e).collect();
    let null_line = find_null_line(&eta, &in_frame, &mut rng).map(|l| (&e * l).normalize());
    let blocks = invariant_blocks(&eta, &in_frame, &mut rng);
    let flags = SpanFlags {
        preserves_null_line: null_line.is_some(),
        preserves_nondeg_subspace: blocks.len() > 1,
        fiber_rotation_dim: fiber_rotation_dim(g, &gv, &closure),
    };
    Ok(EndoSpan {
        base: base.to_vec(),
        metric: gv,
        dim: basis.len(),
        bracket_closed_dim: closure.len(),
        gens,
        basis,
        closure,
        flags,
        null_line,
        blocks,
    })
}

impl EndoSpan {
    /// Largest `|g A + (g A)^T|` over the generators, relative to `|g| |A|`.
    pub fn skew_defect(&self) -> f64 {
        self.gens
            .iter()
            .filter(|a| a.amax() > 0.0)
            .map(|a| {
                let ga = &self.metric * a;
                (&ga + ga.transpose()).amax() / (self.metric.amax() * a.amax())
            })
            .fold(0.0, f64::max)
    }

    pub fn is_abelian(&self) -> bool {
        self.closure.iter().enumerate().all(|(i, a)| {
            self.closure[i + 1..]
                .iter()
                .all(|b| bracket(a, b).amax() <= SVD_CUTOFF)
        })
    }

    /// Largest `|A^3|` over the closure basis; null translations `p ^ w` square to
    /// `-|w|^2 p (x) p^flat` and vanish at the third power.
    pub fn cube_defect(&self) -> f64 {
        self.closure
            .iter()
            .map(|a| (a * a * a).amax())
            .fold(0.0, f64::max)
    }

    /// `1 - |cos|` of the Euclidean angle between the preserved null line and `dir`.
    pub fn null_line_deviation(&self, dir: &DVector<f64>) -> Option<f64> {
        self.null_line
            .as_ref()
            .map(|l| 1.0 - l.normalize().dot(&dir.normalize()).abs())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HolonomyLabel {
    Trivial,
    NullTranslations(usize),
    Sim(usize),
    So11PlusSo(usize),
    SoSplit(usize, usize),
    Full { pos: usize, neg: usize },
    Unrecognized(usize),
}

impl fmt::Display for HolonomyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HolonomyLabel::Trivial => write!(f, "trivial"),
            HolonomyLabel::NullTranslations(k) => write!(f, "null_translations({k})"),
            HolonomyLabel::Sim(n) => write!(f, "sim({n})"),
            HolonomyLabel::So11PlusSo(n) => write!(f, "so(1,1)+so({n})"),
            HolonomyLabel::SoSplit(a, b) => write!(f, "so({a})+so({b})"),
            HolonomyLabel::Full { pos, neg: 0 } => write!(f, "so({pos})"),
            HolonomyLabel::Full { pos, neg } => write!(f, "so({neg},{pos})"),
            HolonomyLabel::Unrecognized(k) => write!(f, "unrecognized({k})"),
        }
    }
}

fn so_dim(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// Names the algebra from its dimension and invariant-subspace flags.
/// `n` is the fiber dimension for Lorentzian metrics.
pub fn classify(span: &EndoSpan, n: usize) -> HolonomyLabel {
    let k = span.bracket_closed_dim;
    let d = span.metric.nrows();
    let neg = span
        .metric
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .filter(|e| **e < 0.0)
        .count();
    let flags = &span.flags;
    if k == 0 {
        return HolonomyLabel::Trivial;
    }
    if k == so_dim(d) {
        return HolonomyLabel::Full { pos: d - neg, neg };
    }
    if neg == 1 && flags.preserves_null_line && !flags.preserves_nondeg_subspace {
        if span.is_abelian() && span.cube_defect() <= LINE_TOL && k <= n {
            return HolonomyLabel::NullTranslations(k);
        }
        if k == 1 + so_dim(n) + n {
            return HolonomyLabel::Sim(n);
        }
    }
    if flags.preserves_nondeg_subspace && span.blocks.len() == 2 {
        let (a, b) = (span.blocks[0], span.blocks[1]);
        if neg == 1 && k == 1 + so_dim(n) && span.blocks.contains(&2) && span.blocks.contains(&n) {
            return HolonomyLabel::So11PlusSo(n);
        }
        if neg == 0 && k == so_dim(a) + so_dim(b) {
            return HolonomyLabel::SoSplit(b.min(a), b.max(a));
        }
    }
    HolonomyLabel::Unrecognized(k)
}
