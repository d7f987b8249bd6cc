//! Truncated univariate power series over an abstract coefficient field,
//! plus polynomials in an auxiliary variable `x` whose coefficients are
//! such series.
//!
//! A series is stored densely as its coefficients `c_0 .. c_N`; `N` is the
//! truncation order (inclusive). Arithmetic is exact through the minimum
//! order of the operands. Multiplication is schoolbook; at the orders this
//! crate works at (N <= 100) exactness matters, asymptotics do not.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::cyclotomic::CycNum;
use crate::rat::{rat_i, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeriesError {
    #[error("division requires a unit (nonzero constant term)")]
    NonUnitDivisor,
    #[error("exp requires zero constant term")]
    ExpConstantTerm,
    #[error("log requires constant term 1")]
    LogConstantTerm,
    #[error("rational power requires constant term 1")]
    PowConstantTerm,
    #[error("composition requires the inner series to have zero constant term")]
    ComposeConstantTerm,
    #[error("reversion requires f(0) = 0 and f'(0) invertible")]
    RevertPrecondition,
    #[error("coefficient order {wanted} beyond truncation order {order}")]
    OrderOutOfRange { wanted: usize, order: usize },
}

/// Coefficient field interface. Elements may carry shared context (the
/// cyclotomic modulus, jet slot tables), so constants are derived from an
/// existing element rather than from free functions.
pub trait Coeff: Clone + PartialEq + std::fmt::Debug {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    /// Embeds a rational constant into the field of `self`.
    fn embed_rat(&self, q: &Rat) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Multiplicative inverse; `None` for non-invertible elements.
    fn inv(&self) -> Option<Self>;
    /// Whether division by this element is possible. For jets this is
    /// weaker than `!is_zero()`.
    fn is_invertible(&self) -> bool {
        !self.is_zero()
    }
}

impl Coeff for Rat {
    fn zero_like(&self) -> Self {
        Rat::zero()
    }
    fn one_like(&self) -> Self {
        Rat::one()
    }
    fn embed_rat(&self, q: &Rat) -> Self {
        q.clone()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        (!Zero::is_zero(self)).then(|| self.recip())
    }
}

/// Coefficient fields that contain the cyclotomic scalars, so that phase
/// constants can be pushed into them. Implemented by [`CycNum`] itself and
/// by jets over it.
pub trait CycLift: Coeff {
    /// Embeds a cyclotomic scalar into the field of `self`.
    fn lift_cyc(&self, c: &CycNum) -> Self;
    /// A plain cyclotomic prototype sharing the context of `self`.
    fn cyc_proto(&self) -> &CycNum;
}

impl CycLift for CycNum {
    fn lift_cyc(&self, c: &CycNum) -> Self {
        c.clone()
    }
    fn cyc_proto(&self) -> &CycNum {
        self
    }
}

impl Coeff for CycNum {
    fn zero_like(&self) -> Self {
        self.context().zero()
    }
    fn one_like(&self) -> Self {
        self.context().one()
    }
    fn embed_rat(&self, q: &Rat) -> Self {
        self.context().from_rat(q)
    }
    fn is_zero(&self) -> bool {
        CycNum::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        CycNum::add(self, rhs)
    }
    fn sub(&self, rhs: &Self) -> Self {
        CycNum::sub(self, rhs)
    }
    fn mul(&self, rhs: &Self) -> Self {
        CycNum::mul(self, rhs)
    }
    fn neg(&self) -> Self {
        CycNum::neg(self)
    }
    fn inv(&self) -> Option<Self> {
        self.invert().ok()
    }
}

/// A power series truncated at a fixed order: coefficients `c_0 .. c_N`.
#[derive(Clone, PartialEq)]
pub struct TruncSeries<C> {
    coeffs: Vec<C>,
}

impl<C: Coeff> TruncSeries<C> {
    pub fn from_coeffs(coeffs: Vec<C>) -> Self {
        assert!(
            !coeffs.is_empty(),
            "series needs at least the constant term"
        );
        TruncSeries { coeffs }
    }

    pub fn constant(c: C, order: usize) -> Self {
        let zero = c.zero_like();
        let mut coeffs = vec![zero; order + 1];
        coeffs[0] = c;
        TruncSeries { coeffs }
    }

    pub fn zero(proto: &C, order: usize) -> Self {
        TruncSeries {
            coeffs: vec![proto.zero_like(); order + 1],
        }
    }

    pub fn one(proto: &C, order: usize) -> Self {
        Self::constant(proto.one_like(), order)
    }

    /// The monomial `c * v^k`, truncated at `order` (k beyond the order
    /// yields the zero series).
    pub fn monomial(proto: &C, c: C, k: usize, order: usize) -> Self {
        let mut s = Self::zero(proto, order);
        if k <= order {
            s.coeffs[k] = c;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> &C {
        &self.coeffs[n]
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn proto(&self) -> &C {
        &self.coeffs[0]
    }

    pub fn truncated(&self, order: usize) -> Self {
        if order >= self.order() {
            self.clone()
        } else {
            TruncSeries {
                coeffs: self.coeffs[..=order].to_vec(),
            }
        }
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D) -> TruncSeries<D> {
        TruncSeries {
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    pub fn set_coeff(&mut self, n: usize, c: C) {
        self.coeffs[n] = c;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(C::is_zero)
    }

    pub fn first_nonzero_order(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    fn common(&self, other: &Self) -> usize {
        self.order().min(other.order())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.common(other);
        let coeffs = (0..=n)
            .map(|i| self.coeffs[i].add(&other.coeffs[i]))
            .collect();
        TruncSeries { coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.common(other);
        let coeffs = (0..=n)
            .map(|i| self.coeffs[i].sub(&other.coeffs[i]))
            .collect();
        TruncSeries { coeffs }
    }

    pub fn neg(&self) -> Self {
        TruncSeries {
            coeffs: self.coeffs.iter().map(C::neg).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.common(other);
        let zero = self.coeffs[0].zero_like();
        let mut coeffs = vec![zero; n + 1];
        for (i, a) in self.coeffs.iter().take(n + 1).enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().take(n + 1 - i).enumerate() {
                if b.is_zero() {
                    continue;
                }
                coeffs[i + j] = coeffs[i + j].add(&a.mul(b));
            }
        }
        TruncSeries { coeffs }
    }

    pub fn mul_scalar(&self, c: &C) -> Self {
        TruncSeries {
            coeffs: self.coeffs.iter().map(|a| a.mul(c)).collect(),
        }
    }

    pub fn mul_rat(&self, q: &Rat) -> Self {
        let c = self.coeffs[0].embed_rat(q);
        self.mul_scalar(&c)
    }

    pub fn add_scalar(&self, c: &C) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = out.coeffs[0].add(c);
        out
    }

    /// Multiplication by `v^k`: coefficients shift up, the order is kept.
    pub fn shifted(&self, k: usize) -> Self {
        let n = self.order();
        let zero = self.coeffs[0].zero_like();
        let mut coeffs = vec![zero; n + 1];
        for i in 0..=n.saturating_sub(k) {
            if k + i <= n {
                coeffs[k + i] = self.coeffs[i].clone();
            }
        }
        TruncSeries { coeffs }
    }

    /// `f(-v)`: coefficient-wise sign alternation.
    pub fn alternate_signs(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| if i % 2 == 1 { c.neg() } else { c.clone() })
            .collect();
        TruncSeries { coeffs }
    }

    pub fn derivative(&self) -> Self {
        if self.order() == 0 {
            return Self::zero(&self.coeffs[0], 0);
        }
        let coeffs = (1..=self.order())
            .map(|i| self.coeffs[i].mul(&self.coeffs[0].embed_rat(&rat_i(i as i64))))
            .collect();
        TruncSeries { coeffs }
    }

    /// Multiplicative inverse of a unit series.
    pub fn inv(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_invertible() {
            return Err(SeriesError::NonUnitDivisor);
        }
        let c0_inv = self.coeffs[0].inv().ok_or(SeriesError::NonUnitDivisor)?;
        let n = self.order();
        let mut g = Vec::with_capacity(n + 1);
        g.push(c0_inv.clone());
        for m in 1..=n {
            let mut acc = self.coeffs[0].zero_like();
            for k in 1..=m {
                if self.coeffs[k].is_zero() {
                    continue;
                }
                acc = acc.add(&self.coeffs[k].mul(&g[m - k]));
            }
            g.push(acc.mul(&c0_inv).neg());
        }
        Ok(TruncSeries { coeffs: g })
    }

    pub fn div(&self, other: &Self) -> Result<Self, SeriesError> {
        Ok(self.mul(&other.inv()?))
    }

    /// Integer power of a unit series (negative exponents via inversion).
    pub fn pow_i64(&self, e: i64) -> Result<Self, SeriesError> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut acc = Self::one(&self.coeffs[0], self.order());
        let mut sq = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&sq);
            }
            k >>= 1;
            if k > 0 {
                sq = sq.mul(&sq);
            }
        }
        Ok(acc)
    }

    /// `exp(f)` for `f(0) = 0`, via the recurrence `g' = f' g` (no factorial
    /// denominators, works over any characteristic-zero field).
    pub fn exp(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_zero() {
            return Err(SeriesError::ExpConstantTerm);
        }
        let n = self.order();
        let one = self.coeffs[0].one_like();
        let mut g = Vec::with_capacity(n + 1);
        g.push(one);
        for m in 1..=n {
            // m*g_m = sum_{k=1..m} k f_k g_{m-k}
            let mut acc = self.coeffs[0].zero_like();
            for k in 1..=m {
                if self.coeffs[k].is_zero() {
                    continue;
                }
                let kf = self.coeffs[k].mul(&self.coeffs[0].embed_rat(&rat_i(k as i64)));
                acc = acc.add(&kf.mul(&g[m - k]));
            }
            g.push(acc.mul(&self.coeffs[0].embed_rat(&Rat::new(1.into(), (m as i64).into()))));
        }
        Ok(TruncSeries { coeffs: g })
    }

    /// `log(f)` for `f(0) = 1`, inverse of [`TruncSeries::exp`].
    pub fn log(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].sub(&self.coeffs[0].one_like()).is_zero() {
            return Err(SeriesError::LogConstantTerm);
        }
        let n = self.order();
        let mut g: Vec<C> = Vec::with_capacity(n + 1);
        g.push(self.coeffs[0].zero_like());
        for m in 1..=n {
            // f_m = sum_{k=1..m} (k/m) g_k f_{m-k}, solved for g_m (f_0 = 1)
            let mut acc = self.coeffs[m].clone();
            for k in 1..=m - 1 {
                if g[k].is_zero() || self.coeffs[m - k].is_zero() {
                    continue;
                }
                let w = self.coeffs[0].embed_rat(&Rat::new((k as i64).into(), (m as i64).into()));
                acc = acc.sub(&g[k].mul(&w).mul(&self.coeffs[m - k]));
            }
            g.push(acc);
        }
        Ok(TruncSeries { coeffs: g })
    }

    /// `f^e` for rational `e` and `f(0) = 1`, by the Euler/Miller recurrence
    /// `n g_n = sum_k ((e+1)k - n) f_k g_{n-k}`.
    pub fn pow_rat(&self, e: &Rat) -> Result<Self, SeriesError> {
        if !self.coeffs[0].sub(&self.coeffs[0].one_like()).is_zero() {
            return Err(SeriesError::PowConstantTerm);
        }
        let n = self.order();
        let mut g: Vec<C> = Vec::with_capacity(n + 1);
        g.push(self.coeffs[0].one_like());
        let e1 = e + Rat::one();
        for m in 1..=n {
            let mut acc = self.coeffs[0].zero_like();
            for k in 1..=m {
                if self.coeffs[k].is_zero() {
                    continue;
                }
                let w = (&e1 * rat_i(k as i64) - rat_i(m as i64)) / rat_i(m as i64);
                if Zero::is_zero(&w) {
                    continue;
                }
                acc = acc.add(
                    &self.coeffs[k]
                        .mul(&g[m - k])
                        .mul(&self.coeffs[0].embed_rat(&w)),
                );
            }
            g.push(acc);
        }
        Ok(TruncSeries { coeffs: g })
    }

    /// Composition `f(g)` for `g(0) = 0`, by Horner evaluation.
    pub fn compose(&self, g: &Self) -> Result<Self, SeriesError> {
        if !g.coeffs[0].is_zero() {
            return Err(SeriesError::ComposeConstantTerm);
        }
        let order = self.common(g);
        let f = self.truncated(order);
        let gt = g.truncated(order);
        let mut acc = TruncSeries::constant(f.coeffs[f.order()].clone(), order);
        for k in (0..f.order()).rev() {
            acc = acc.mul(&gt).add_scalar(&f.coeffs[k]);
        }
        Ok(acc)
    }

    /// Compositional inverse of `f` with `f(0) = 0`, `f'(0)` invertible:
    /// the unique `g` with `f(g) = id`. Solved order by order; the next
    /// coefficient enters linearly with slope `f'(0)`.
    pub fn revert(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_zero() || self.order() < 1 || !self.coeffs[1].is_invertible() {
            return Err(SeriesError::RevertPrecondition);
        }
        let n = self.order();
        let f1_inv = self.coeffs[1]
            .inv()
            .ok_or(SeriesError::RevertPrecondition)?;
        let mut g = Self::zero(&self.coeffs[0], n);
        g.coeffs[1] = f1_inv.clone();
        for m in 2..=n {
            let h = self.compose(&g.truncated(m))?;
            g.coeffs[m] = h.coeffs[m].mul(&f1_inv).neg();
        }
        Ok(g)
    }
}

impl<C: Coeff> std::fmt::Debug for TruncSeries<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Series(order={}, {:?})", self.order(), self.coeffs)
    }
}

/// Polynomial in an auxiliary variable `x` whose coefficients are truncated
/// series: entries `x^0 .. x^M` all share one truncation order in the main
/// variable.
#[derive(Clone, PartialEq, Debug)]
pub struct XSeries<C: Coeff> {
    layers: Vec<TruncSeries<C>>,
}

impl<C: Coeff> XSeries<C> {
    pub fn from_layers(layers: Vec<TruncSeries<C>>) -> Self {
        assert!(!layers.is_empty());
        let order = layers[0].order();
        assert!(layers.iter().all(|l| l.order() == order));
        XSeries { layers }
    }

    pub fn zero(proto: &C, order: usize, x_degree: usize) -> Self {
        XSeries {
            layers: vec![TruncSeries::zero(proto, order); x_degree + 1],
        }
    }

    pub fn x_degree(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn order(&self) -> usize {
        self.layers[0].order()
    }

    /// Coefficient of `x^n`.
    pub fn layer(&self, n: usize) -> &TruncSeries<C> {
        &self.layers[n]
    }

    pub fn add(&self, other: &Self) -> Self {
        let m = self.x_degree().min(other.x_degree());
        let layers = (0..=m)
            .map(|i| self.layers[i].add(&other.layers[i]))
            .collect();
        XSeries { layers }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let m = self.x_degree().min(other.x_degree());
        let layers = (0..=m)
            .map(|i| self.layers[i].sub(&other.layers[i]))
            .collect();
        XSeries { layers }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let m = self.x_degree().min(other.x_degree());
        let order = self.order().min(other.order());
        let proto = self.layers[0].proto();
        let mut layers = vec![TruncSeries::zero(proto, order); m + 1];
        for i in 0..=m {
            for j in 0..=m - i {
                layers[i + j] = layers[i + j].add(&self.layers[i].mul(&other.layers[j]));
            }
        }
        XSeries { layers }
    }

    pub fn mul_series(&self, s: &TruncSeries<C>) -> Self {
        XSeries {
            layers: self.layers.iter().map(|l| l.mul(s)).collect(),
        }
    }

    /// `exp(x*lin + x^2*quad)` through `x^M`: the `x^m` layer is
    /// `sum_{i+2k=m} lin^i quad^k / (i! k!)`.
    pub fn exp_linear_quadratic(
        lin: &TruncSeries<C>,
        quad: &TruncSeries<C>,
        x_degree: usize,
    ) -> Self {
        let order = lin.order().min(quad.order());
        let lin = lin.truncated(order);
        let quad = quad.truncated(order);
        let proto = lin.proto().clone();
        let mut lin_pows = vec![TruncSeries::one(&proto, order)];
        for i in 1..=x_degree {
            lin_pows.push(lin_pows[i - 1].mul(&lin));
        }
        let mut quad_pows = vec![TruncSeries::one(&proto, order)];
        for k in 1..=x_degree / 2 {
            quad_pows.push(quad_pows[k - 1].mul(&quad));
        }
        let mut layers = Vec::with_capacity(x_degree + 1);
        for m in 0..=x_degree {
            let mut layer = TruncSeries::zero(&proto, order);
            for k in 0..=m / 2 {
                let i = m - 2 * k;
                let w = Rat::one() / (factorial(i as u64) * factorial(k as u64));
                layer = layer.add(&lin_pows[i].mul(&quad_pows[k]).mul_rat(&w));
            }
            layers.push(layer);
        }
        XSeries { layers }
    }
}

fn factorial(n: u64) -> Rat {
    let mut acc = Rat::one();
    for k in 2..=n {
        acc = acc * rat_i(k as i64);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn rats(v: &[(i64, i64)]) -> TruncSeries<Rat> {
        TruncSeries::from_coeffs(v.iter().map(|&(n, d)| rat(n, d)).collect())
    }

    fn geom(order: usize) -> TruncSeries<Rat> {
        // 1/(1-w) = 1 + w + w^2 + ...
        TruncSeries::from_coeffs(vec![Rat::one(); order + 1])
    }

    #[test]
    fn one_minus_w_times_geometric_is_one() {
        let n = 12;
        let mut f = TruncSeries::one(&Rat::zero(), n);
        f.set_coeff(1, -Rat::one());
        assert_eq!(f.mul(&geom(n)), TruncSeries::one(&Rat::zero(), n));
        assert_eq!(f.inv().unwrap(), geom(n));
    }

    #[test]
    fn mul_by_one_is_identity() {
        let f = rats(&[(1, 1), (3, 2), (-5, 7), (0, 1), (2, 9)]);
        assert_eq!(f.mul(&TruncSeries::one(&Rat::zero(), 4)), f);
    }

    #[test]
    fn exp_of_zero_is_one() {
        let z = TruncSeries::zero(&Rat::zero(), 6);
        assert_eq!(z.exp().unwrap(), TruncSeries::one(&Rat::zero(), 6));
    }

    #[test]
    fn exp_coefficient_extraction() {
        // exp(2 z^2): coefficient of z^2 is 2
        let f = TruncSeries::monomial(&Rat::zero(), rat_i(2), 2, 8);
        let e = f.exp().unwrap();
        assert_eq!(*e.coeff(2), rat_i(2));
        assert_eq!(*e.coeff(4), rat_i(2)); // 2^2/2!
        assert_eq!(*e.coeff(1), Rat::zero());
    }

    #[test]
    fn log_one_plus_t_matches_mercator_oracle() {
        let n = 14;
        let mut f = TruncSeries::one(&Rat::zero(), n);
        f.set_coeff(1, Rat::one());
        let lg = f.log().unwrap();
        // oracle: log(1+t) = sum_{k>=1} (-1)^{k+1} t^k / k
        for k in 1..=n {
            let sign = if k % 2 == 1 { 1 } else { -1 };
            assert_eq!(*lg.coeff(k), rat(sign, k as i64), "k={k}");
        }
    }

    #[test]
    fn exp_log_round_trip() {
        let f = rats(&[(1, 1), (1, 1), (1, 1), (0, 1), (0, 1), (0, 1)]);
        assert_eq!(f.log().unwrap().exp().unwrap(), f);
    }

    #[test]
    fn sqrt_of_one_plus_t_matches_binomial_oracle() {
        let n = 12;
        let mut f = TruncSeries::one(&Rat::zero(), n);
        f.set_coeff(1, Rat::one());
        let g = f.pow_rat(&rat(1, 2)).unwrap();
        // oracle: C(1/2, k) = prod_{j=0..k-1} (1/2 - j) / k!
        let mut expected = Rat::one();
        assert_eq!(*g.coeff(0), expected);
        for k in 1..=n {
            expected = expected * (rat(1, 2) - rat_i(k as i64 - 1)) / rat_i(k as i64);
            assert_eq!(*g.coeff(k), expected, "k={k}");
        }
        assert_eq!(*g.coeff(1), rat(1, 2));
        assert_eq!(*g.coeff(2), rat(-1, 8));
        assert_eq!(*g.coeff(3), rat(1, 16));
    }

    #[test]
    fn pow_zero_is_one() {
        let f = rats(&[(1, 1), (4, 3), (-2, 5)]);
        assert_eq!(
            f.pow_rat(&Rat::zero()).unwrap(),
            TruncSeries::one(&Rat::zero(), 2)
        );
    }

    #[test]
    fn pow_inverse_exponents_cancel() {
        // ((1+v^2)^3)^{1/3} = 1+v^2
        let mut f = TruncSeries::one(&Rat::zero(), 10);
        f.set_coeff(2, Rat::one());
        let cubed = f.pow_rat(&rat_i(3)).unwrap();
        assert_eq!(cubed.pow_rat(&rat(1, 3)).unwrap(), f);
        // pow_rat with integer exponent equals repeated multiplication
        assert_eq!(cubed, f.mul(&f).mul(&f));
        assert_eq!(f.pow_i64(3).unwrap(), cubed);
    }

    #[test]
    fn compose_with_identity() {
        let f = rats(&[(2, 1), (1, 3), (5, 1), (-1, 2)]);
        let id = TruncSeries::monomial(&Rat::zero(), Rat::one(), 1, 3);
        assert_eq!(f.compose(&id).unwrap(), f);
    }

    #[test]
    fn compose_geometric_with_square() {
        // 1/(1-u) composed with u = t^2
        let n = 9;
        let t2 = TruncSeries::monomial(&Rat::zero(), Rat::one(), 2, n);
        let c = geom(n).compose(&t2).unwrap();
        for k in 0..=n {
            let expect = if k % 2 == 0 { Rat::one() } else { Rat::zero() };
            assert_eq!(*c.coeff(k), expect, "k={k}");
        }
    }

    #[test]
    fn exp_compose_log_is_identity_plus_t() {
        let n = 10;
        // exp-series in u composed with log(1+t) gives back 1+t
        let mut u = TruncSeries::zero(&Rat::zero(), n);
        u.set_coeff(1, Rat::one());
        let exp_series = u.exp().unwrap();
        let mut one_plus_t = TruncSeries::one(&Rat::zero(), n);
        one_plus_t.set_coeff(1, Rat::one());
        let lg = one_plus_t.log().unwrap();
        assert_eq!(exp_series.compose(&lg).unwrap(), one_plus_t);
    }

    #[test]
    fn revert_identity() {
        let id = TruncSeries::monomial(&Rat::zero(), Rat::one(), 1, 7);
        assert_eq!(id.revert().unwrap(), id);
    }

    #[test]
    fn revert_z_of_t_with_sqrt_factor() {
        // z = t (1+t^2)^{1/2}; its inverse starts t = z - z^3/2 + (7/8) z^5
        let n = 11;
        let mut one_t2 = TruncSeries::one(&Rat::zero(), n);
        one_t2.set_coeff(2, Rat::one());
        let z_of_t = TruncSeries::monomial(&Rat::zero(), Rat::one(), 1, n)
            .mul(&one_t2.pow_rat(&rat(1, 2)).unwrap());
        let t_of_z = z_of_t.revert().unwrap();
        assert_eq!(*t_of_z.coeff(1), Rat::one());
        assert_eq!(*t_of_z.coeff(3), rat(-1, 2));
        assert_eq!(*t_of_z.coeff(5), rat(7, 8));
        // composing back gives the identity
        let back = z_of_t.compose(&t_of_z).unwrap();
        assert_eq!(back, TruncSeries::monomial(&Rat::zero(), Rat::one(), 1, n));
    }

    #[test]
    fn revert_rational_function() {
        // f = v/(1+v) has inverse w/(1-w) = w + w^2 + w^3 + ...
        let n = 9;
        let mut one_v = TruncSeries::one(&Rat::zero(), n);
        one_v.set_coeff(1, Rat::one());
        let f = TruncSeries::monomial(&Rat::zero(), Rat::one(), 1, n)
            .div(&one_v)
            .unwrap();
        let g = f.revert().unwrap();
        assert_eq!(*g.coeff(0), Rat::zero());
        for k in 1..=n {
            assert_eq!(*g.coeff(k), Rat::one(), "k={k}");
        }
    }

    #[test]
    fn precondition_violations_signal_errors() {
        let f = rats(&[(1, 1), (1, 1)]);
        let g = rats(&[(0, 1), (1, 1)]);
        assert_eq!(f.div(&g), Err(SeriesError::NonUnitDivisor));
        assert_eq!(f.exp(), Err(SeriesError::ExpConstantTerm));
        assert_eq!(g.log(), Err(SeriesError::LogConstantTerm));
        assert_eq!(g.pow_rat(&rat(1, 2)), Err(SeriesError::PowConstantTerm));
        assert_eq!(f.compose(&f), Err(SeriesError::ComposeConstantTerm));
        assert_eq!(f.revert(), Err(SeriesError::RevertPrecondition));
        // t^2 has vanishing derivative at 0
        let t2 = TruncSeries::monomial(&Rat::zero(), Rat::one(), 2, 5);
        assert_eq!(t2.revert(), Err(SeriesError::RevertPrecondition));
    }

    #[test]
    fn truncation_commutes_with_multiplication() {
        let f = rats(&[(1, 1), (2, 1), (3, 1), (4, 1), (5, 1)]);
        let g = rats(&[(2, 1), (-1, 1), (1, 2), (0, 1), (7, 3)]);
        assert_eq!(f.mul(&g).truncated(2), f.truncated(2).mul(&g.truncated(2)));
    }

    #[test]
    fn xseries_exp_layers() {
        let n = 6;
        let s = rats(&[(0, 1), (2, 1), (1, 1), (0, 1), (0, 1), (0, 1), (0, 1)]);
        let q = rats(&[(0, 1), (0, 1), (3, 1), (0, 1), (0, 1), (0, 1), (0, 1)]);
        let zero = TruncSeries::zero(&Rat::zero(), n);
        // exp(x*s): layer 0 = 1, layer 1 = s, layer 2 = s^2/2
        let e = XSeries::exp_linear_quadratic(&s, &zero, 3);
        assert_eq!(*e.layer(0), TruncSeries::one(&Rat::zero(), n));
        assert_eq!(*e.layer(1), s);
        assert_eq!(*e.layer(2), s.mul(&s).mul_rat(&rat(1, 2)));
        // exp(x*s + x^2*q): layer 2 = s^2/2 + q
        let e2 = XSeries::exp_linear_quadratic(&s, &q, 2);
        assert_eq!(*e2.layer(2), s.mul(&s).mul_rat(&rat(1, 2)).add(&q));
    }

    #[test]
    fn xseries_product_collects_layers() {
        let a = rats(&[(1, 1), (1, 1), (0, 1), (0, 1), (0, 1)]);
        let b = rats(&[(2, 1), (0, 1), (1, 1), (0, 1), (0, 1)]);
        let xa = XSeries::from_layers(vec![a.clone(), b.clone()]);
        let prod = xa.mul(&xa);
        assert_eq!(*prod.layer(0), a.mul(&a));
        assert_eq!(*prod.layer(1), a.mul(&b).mul_rat(&rat_i(2)));
    }
}
