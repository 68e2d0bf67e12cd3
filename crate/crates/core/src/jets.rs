//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] holds the Taylor coefficients of a scalar function of `nvars`
//! variables around a point, truncated at total degree `order` (at most 3).
//! Coefficients are stored densely in graded order: the constant term, then
//! the `nvars` linear terms, then all degree-2 monomials `x_i x_j` with
//! `i <= j`, then degree 3. Storing monomial coefficients (rather than raw
//! partial derivatives) makes every block symmetric by construction, and
//! products become truncated polynomial products.
//!
//! Arithmetic is exact up to floating-point rounding: for any composite
//! expression built from the operations here, the stored coefficients are
//! the Taylor coefficients of the composite function.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 3;

/// Monomial bookkeeping shared by all jets with the same `(nvars, order)`.
pub struct Layout {
    nvars: usize,
    order: usize,
    monos: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    /// For each output slot `k`, the pairs `(i, j)` with `mono[i] + mono[j] == mono[k]`.
    products: Vec<Vec<(u32, u32)>>,
    /// For each variable, `(src, dst, factor)` triples implementing `d/dx_var`.
    partials: Vec<Vec<(u32, u32, f64)>>,
    /// `degree_end[k]` is the number of monomials of degree `<= k`.
    degree_end: Vec<usize>,
}

impl Layout {
    /// Returns the shared layout for `nvars` variables truncated at `order`.
    pub fn get(nvars: usize, order: usize) -> &'static Layout {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static Layout>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("layout cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Box::leak(Box::new(Layout::build(nvars, order))))
    }

    fn build(nvars: usize, order: usize) -> Layout {
        let mut monos: Vec<Vec<u8>> = Vec::new();
        let mut degree_end = Vec::with_capacity(order + 1);
        for degree in 0..=order {
            // nondecreasing index tuples of length `degree`
            let mut idx = vec![0usize; degree];
            loop {
                let mut mono = vec![0u8; nvars];
                for &i in &idx {
                    mono[i] += 1;
                }
                if degree == 0 || nvars > 0 {
                    monos.push(mono);
                }
                // advance
                let mut pos = degree;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    if idx[pos] + 1 < nvars {
                        idx[pos] += 1;
                        let v = idx[pos];
                        for slot in idx.iter_mut().skip(pos + 1) {
                            *slot = v;
                        }
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos != usize::MAX {
                    break;
                }
            }
            degree_end.push(monos.len());
        }

        let lookup: HashMap<Vec<u8>, usize> = monos
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();

        let mut products = vec![Vec::new(); monos.len()];
        for (i, a) in monos.iter().enumerate() {
            let da: usize = a.iter().map(|&e| e as usize).sum();
            for (j, b) in monos.iter().enumerate() {
                let db: usize = b.iter().map(|&e| e as usize).sum();
                if da + db > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let k = lookup[&sum];
                products[k].push((i as u32, j as u32));
            }
        }

        let mut partials = vec![Vec::new(); nvars];
        for (var, table) in partials.iter_mut().enumerate() {
            for (src, mono) in monos.iter().enumerate() {
                if mono[var] == 0 {
                    continue;
                }
                let mut lower = mono.clone();
                lower[var] -= 1;
                table.push((src as u32, lookup[&lower] as u32, mono[var] as f64));
            }
        }

        Layout {
            nvars,
            order,
            monos,
            lookup,
            products,
            partials,
            degree_end,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored coefficients, `C(nvars + order, order)`.
    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    fn index_of(&self, vars: &[usize]) -> Option<usize> {
        if vars.len() > self.order {
            return None;
        }
        let mut mono = vec![0u8; self.nvars];
        for &v in vars {
            if v >= self.nvars {
                return None;
            }
            mono[v] += 1;
        }
        self.lookup.get(&mono).copied()
    }
}

/// Truncated Taylor expansion of a scalar function of several variables.
#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.layout.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.layout, other.layout) && self.coeffs == other.coeffs
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        Err(Error::UnsupportedOrder(order))
    } else {
        Ok(())
    }
}

impl Jet {
    /// A constant function.
    pub fn constant(value: f64, nvars: usize, order: usize) -> Jet {
        let layout = Layout::get(nvars, order.min(MAX_ORDER));
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet { layout, coeffs }
    }

    /// The coordinate function `x -> x[index]` expanded at `value`.
    pub fn variable(index: usize, value: f64, nvars: usize, order: usize) -> Result<Jet> {
        check_order(order)?;
        if index >= nvars {
            return Err(Error::IndexOutOfRange { index, nvars });
        }
        let mut jet = Jet::constant(value, nvars, order);
        if order >= 1 {
            jet.coeffs[1 + index] = 1.0;
        }
        Ok(jet)
    }

    /// Seeds all coordinates of a point at once.
    pub fn seed_point(point: &[f64], order: usize) -> Result<Vec<Jet>> {
        let n = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &x)| Jet::variable(i, x, n, order))
            .collect()
    }

    /// Builds a jet directly from monomial coefficients.
    pub fn from_coeffs(nvars: usize, order: usize, coeffs: Vec<f64>) -> Result<Jet> {
        check_order(order)?;
        let layout = Layout::get(nvars, order);
        if coeffs.len() != layout.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                layout.len(),
                coeffs.len()
            )));
        }
        Ok(Jet { layout, coeffs })
    }

    /// Constant with the same shape as `self`.
    pub fn lift(&self, value: f64) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        Jet {
            layout: self.layout,
            coeffs,
        }
    }

    pub fn zero_like(&self) -> Jet {
        self.lift(0.0)
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn layout(&self) -> &'static Layout {
        self.layout
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient of the monomial named by `vars` (a multiset of
    /// variable indices, any order).
    pub fn coeff(&self, vars: &[usize]) -> f64 {
        self.layout
            .index_of(vars)
            .map(|k| self.coeffs[k])
            .unwrap_or(0.0)
    }

    /// Mixed partial derivative `d^|vars| f / dx_vars[0] dx_vars[1] ...`.
    ///
    /// Returns 0 for derivatives beyond the truncation order.
    pub fn derivative(&self, vars: &[usize]) -> f64 {
        match self.layout.index_of(vars) {
            Some(k) => {
                let weight: f64 = self.layout.monos[k]
                    .iter()
                    .map(|&e| (1..=e as u32).product::<u32>() as f64)
                    .product();
                weight * self.coeffs[k]
            }
            None => 0.0,
        }
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.nvars()).map(|i| self.derivative(&[i])).collect()
    }

    /// Exact partial derivative as a jet one order lower.
    pub fn partial(&self, var: usize) -> Jet {
        assert!(self.order() >= 1, "partial derivative of an order-0 jet");
        let lower = Layout::get(self.nvars(), self.order() - 1);
        let mut coeffs = vec![0.0; lower.len()];
        for &(src, dst, factor) in &self.layout.partials[var] {
            coeffs[dst as usize] += factor * self.coeffs[src as usize];
        }
        Jet {
            layout: lower,
            coeffs,
        }
    }

    /// Drops all terms above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let layout = Layout::get(self.nvars(), order);
        Jet {
            layout,
            coeffs: self.coeffs[..layout.degree_end[order]].to_vec(),
        }
    }

    fn assert_compatible(&self, other: &Jet) {
        assert!(
            std::ptr::eq(self.layout, other.layout),
            "jet shape mismatch: ({}, {}) vs ({}, {})",
            self.nvars(),
            self.order(),
            other.nvars(),
            other.order()
        );
    }

    /// Shape check returning an error instead of panicking.
    pub fn check_compatible(&self, other: &Jet) -> Result<()> {
        if std::ptr::eq(self.layout, other.layout) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(
                self.nvars(),
                self.order(),
                other.nvars(),
                other.order(),
            ))
        }
    }

    fn mul_raw(&self, other: &Jet) -> Jet {
        self.assert_compatible(other);
        let a = &self.coeffs;
        let b = &other.coeffs;
        let coeffs = self
            .layout
            .products
            .iter()
            .map(|pairs| {
                pairs
                    .iter()
                    .map(|&(i, j)| a[i as usize] * b[j as usize])
                    .sum()
            })
            .collect();
        Jet {
            layout: self.layout,
            coeffs,
        }
    }

    /// Series division; errors when the divisor's value part is zero.
    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        let b = &other.coeffs;
        if b[0] == 0.0 {
            return Err(Error::ZeroDivisor);
        }
        let mut q = vec![0.0; self.coeffs.len()];
        q[0] = self.coeffs[0] / b[0];
        for k in 1..q.len() {
            let mut acc = self.coeffs[k];
            for &(i, j) in &self.layout.products[k] {
                if i != 0 {
                    acc -= b[i as usize] * q[j as usize];
                }
            }
            q[k] = acc / b[0];
        }
        Ok(Jet {
            layout: self.layout,
            coeffs: q,
        })
    }

    /// Applies a univariate function given its Taylor coefficients
    /// `taylor[k] = f^(k)(a0) / k!` at the value part `a0`.
    fn compose(&self, taylor: &[f64]) -> Jet {
        let order = self.order();
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut acc = self.lift(taylor[order]);
        for k in (0..order).rev() {
            acc = acc.mul_raw(&delta);
            acc.coeffs[0] += taylor[k];
        }
        if order == 0 {
            acc.coeffs[0] = taylor[0];
        }
        acc
    }

    pub fn try_recip(&self) -> Result<Jet> {
        let a0 = self.value();
        if a0 == 0.0 {
            return Err(Error::ZeroDivisor);
        }
        let mut taylor = Vec::with_capacity(self.order() + 1);
        taylor.push(1.0 / a0);
        for k in 1..=self.order() {
            let prev: f64 = taylor[k - 1];
            taylor.push(-prev / a0);
        }
        Ok(self.compose(&taylor))
    }

    pub fn try_sqrt(&self) -> Result<Jet> {
        let a0 = self.value();
        if a0 <= 0.0 || a0.is_nan() {
            return Err(Error::NonPositiveSqrt(a0));
        }
        let root = a0.sqrt();
        // binomial series coefficients of (1 + t)^(1/2), rescaled by a0^-k
        let mut taylor = Vec::with_capacity(self.order() + 1);
        taylor.push(root);
        let mut binom = 1.0;
        let mut scale = root;
        for k in 1..=self.order() {
            binom *= (0.5 - (k as f64 - 1.0)) / k as f64;
            scale /= a0;
            taylor.push(binom * scale);
        }
        Ok(self.compose(&taylor))
    }

    /// Integer power. Negative exponents require a nonzero value part.
    pub fn powi(&self, n: i32) -> Jet {
        let a0 = self.value();
        let mut taylor = Vec::with_capacity(self.order() + 1);
        taylor.push(a0.powi(n));
        let mut falling = 1.0;
        for k in 1..=self.order() {
            falling *= (n as f64 - (k as f64 - 1.0)) / k as f64;
            taylor.push(falling * a0.powi(n - k as i32));
        }
        self.compose(&taylor)
    }

    /// Square root; panics on a nonpositive value part. See [`Jet::try_sqrt`].
    pub fn sqrt(&self) -> Jet {
        self.try_sqrt().expect("sqrt of nonpositive jet")
    }

    /// Reciprocal with IEEE semantics on a zero value part.
    pub fn recip(&self) -> Jet {
        self.lift(1.0) / self
    }

    pub fn square(&self) -> Jet {
        self.mul_raw(self)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            layout: self.layout,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

// Division via series recursion keeps the value part bit-identical to `a / b`.
fn div_ieee(a: &Jet, b: &Jet) -> Jet {
    a.assert_compatible(b);
    let b0 = b.coeffs[0];
    let mut q = vec![0.0; a.coeffs.len()];
    q[0] = a.coeffs[0] / b0;
    for k in 1..q.len() {
        let mut acc = a.coeffs[k];
        for &(i, j) in &a.layout.products[k] {
            if i != 0 {
                acc -= b.coeffs[i as usize] * q[j as usize];
            }
        }
        q[k] = acc / b0;
    }
    Jet {
        layout: a.layout,
        coeffs: q,
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| {
    a.assert_compatible(b);
    Jet {
        layout: a.layout,
        coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
    }
});
binop!(Sub, sub, |a, b| {
    a.assert_compatible(b);
    Jet {
        layout: a.layout,
        coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
    }
});
binop!(Mul, mul, |a, b| a.mul_raw(b));
binop!(Div, div, div_ieee);

macro_rules! scalar_op {
    ($tr:ident, $method:ident, $jet_scalar:expr, $scalar_jet:expr) => {
        impl $tr<f64> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                let f: fn(&Jet, f64) -> Jet = $jet_scalar;
                f(self, rhs)
            }
        }
        impl $tr<f64> for Jet {
            type Output = Jet;
            fn $method(self, rhs: f64) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<&Jet> for f64 {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(f64, &Jet) -> Jet = $scalar_jet;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for f64 {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

scalar_op!(
    Add,
    add,
    |a, s| {
        let mut out = a.clone();
        out.coeffs[0] += s;
        out
    },
    |s, a| {
        let mut out = a.clone();
        out.coeffs[0] = s + out.coeffs[0];
        out
    }
);
scalar_op!(
    Sub,
    sub,
    |a, s| {
        let mut out = a.clone();
        out.coeffs[0] -= s;
        out
    },
    |s, a| {
        let mut out = -a;
        out.coeffs[0] = s - a.coeffs[0];
        out
    }
);
scalar_op!(Mul, mul, |a, s| a.scale(s), |s, a| a.scale(s));
scalar_op!(Div, div, |a, s| a.scale(1.0 / s), |s, a| div_ieee(
    &a.lift(s),
    a
));

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            layout: self.layout,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.assert_compatible(rhs);
        for (x, y) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *x += y;
        }
    }
}

impl AddAssign<Jet> for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self += &rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.assert_compatible(rhs);
        for (x, y) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *x -= y;
        }
    }
}

impl SubAssign<Jet> for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self -= &rhs;
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        for x in self.coeffs.iter_mut() {
            *x *= rhs;
        }
    }
}

/// Sum of squares of a slice of jets.
pub fn sum_squares(xs: &[Jet]) -> Jet {
    let mut acc = xs[0].zero_like();
    for x in xs {
        acc += x.square();
    }
    acc
}
