//! Exact arithmetic in the cyclotomic field `Q(zeta_{4 rho})`.
//!
//! The field is generated by `xi = e^{pi i / (2 rho)}`, a primitive
//! `4 rho`-th root of unity; it contains `eps_rho = e^{2 pi i / rho} = xi^4`.
//! Elements are polynomials in `xi` with rational coefficients, reduced
//! eagerly modulo the `4 rho`-th cyclotomic polynomial, so equal field
//! elements always have identical coefficient vectors.

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rat::{rat_i, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CycError {
    #[error("division by zero in Q(zeta_{conductor})")]
    DivisionByZero { conductor: u32 },
    #[error("cannot parse cyclotomic element from {0:?}")]
    Parse(String),
    #[error("operands belong to different cyclotomic fields ({0} vs {1})")]
    MixedFields(u32, u32),
}

/// Shared data of the field `Q(zeta_{4 rho})`: the minimal polynomial of
/// `xi` and precomputed reduction/power tables.
#[derive(Debug)]
pub struct CycContext {
    pub rho: u32,
    /// `4 rho`, the order of `xi`.
    pub conductor: u32,
    /// Degree of the field, `phi(4 rho)`.
    pub degree: usize,
    /// Monic integer coefficients of the `4 rho`-th cyclotomic polynomial,
    /// constant term first, length `degree + 1`.
    pub min_poly: Vec<Rat>,
    /// `xi^(degree + k)` reduced to the power basis, for `k = 0 .. degree-1`.
    reduction: Vec<Vec<Rat>>,
    /// `xi^k` reduced to the power basis, for `k = 0 .. conductor-1`.
    xi_powers: Vec<Vec<Rat>>,
}

/// Exact cyclotomic polynomial `Phi_n`, computed by dividing `x^n - 1` by
/// the cyclotomic polynomials of the proper divisors of `n`. Coefficients
/// are returned constant term first.
fn cyclotomic_polynomial(n: u32) -> Vec<Rat> {
    assert!(n >= 1);
    let mut cache: Vec<Option<Vec<Rat>>> = vec![None; (n + 1) as usize];
    for d in 1..=n {
        if n % d != 0 {
            continue;
        }
        // x^d - 1
        let mut num = vec![Rat::zero(); d as usize + 1];
        num[0] = -Rat::one();
        num[d as usize] = Rat::one();
        for e in 1..d {
            if d % e == 0 {
                num = poly_div_exact(&num, cache[e as usize].as_ref().unwrap());
            }
        }
        cache[d as usize] = Some(num);
    }
    cache[n as usize].take().unwrap()
}

/// Exact division of polynomials known to divide evenly (monic divisor).
fn poly_div_exact(num: &[Rat], den: &[Rat]) -> Vec<Rat> {
    let dn = num.len() - 1;
    let dd = den.len() - 1;
    assert!(dn >= dd);
    let mut rem = num.to_vec();
    let mut quot = vec![Rat::zero(); dn - dd + 1];
    for k in (0..=dn - dd).rev() {
        let c = rem[dd + k].clone();
        if !c.is_zero() {
            for (i, dc) in den.iter().enumerate() {
                rem[i + k] = &rem[i + k] - &(dc * &c);
            }
        }
        quot[k] = c;
    }
    assert!(
        rem.iter().all(Rat::is_zero),
        "non-exact polynomial division"
    );
    quot
}

impl CycContext {
    fn new(rho: u32) -> Arc<CycContext> {
        assert!(rho >= 1, "rho must be positive");
        let conductor = 4 * rho;
        let min_poly = cyclotomic_polynomial(conductor);
        let degree = min_poly.len() - 1;

        // Rows of x^(degree+k) mod min_poly. Row 0 is -(low part of min_poly)
        // since the polynomial is monic; row k+1 is row k shifted once and
        // re-reduced.
        let mut reduction: Vec<Vec<Rat>> = Vec::with_capacity(degree.max(1));
        let mut row: Vec<Rat> = min_poly[..degree].iter().map(|c| -c).collect();
        for _ in 0..degree.saturating_sub(1) {
            reduction.push(row.clone());
            let top = row[degree - 1].clone();
            let mut next = vec![Rat::zero(); degree];
            for i in 1..degree {
                next[i] = row[i - 1].clone();
            }
            if !top.is_zero() {
                for i in 0..degree {
                    next[i] = &next[i] + &(&reduction[0][i] * &top);
                }
            }
            row = next;
        }
        reduction.push(row);

        let mut xi_powers: Vec<Vec<Rat>> = Vec::with_capacity(conductor as usize);
        for k in 0..conductor as usize {
            if k < degree {
                let mut v = vec![Rat::zero(); degree];
                v[k] = Rat::one();
                xi_powers.push(v);
            } else {
                // multiply previous power by x and reduce
                let prev = &xi_powers[k - 1];
                let top = prev[degree - 1].clone();
                let mut v = vec![Rat::zero(); degree];
                for i in 1..degree {
                    v[i] = prev[i - 1].clone();
                }
                if !top.is_zero() {
                    for i in 0..degree {
                        v[i] = &v[i] + &(&reduction[0][i] * &top);
                    }
                }
                xi_powers.push(v);
            }
        }

        Arc::new(CycContext {
            rho,
            conductor,
            degree,
            min_poly,
            reduction,
            xi_powers,
        })
    }

    pub fn zero(self: &Arc<Self>) -> CycNum {
        CycNum {
            ctx: Arc::clone(self),
            coeffs: vec![Rat::zero(); self.degree],
        }
    }

    pub fn one(self: &Arc<Self>) -> CycNum {
        self.from_rat(&Rat::one())
    }

    pub fn from_rat(self: &Arc<Self>, q: &Rat) -> CycNum {
        let mut coeffs = vec![Rat::zero(); self.degree];
        coeffs[0] = q.clone();
        CycNum {
            ctx: Arc::clone(self),
            coeffs,
        }
    }

    pub fn from_int(self: &Arc<Self>, n: i64) -> CycNum {
        self.from_rat(&rat_i(n))
    }

    /// `xi^k` for any integer exponent (reduced modulo the conductor).
    pub fn xi_pow(self: &Arc<Self>, k: i64) -> CycNum {
        let m = k.rem_euclid(self.conductor as i64) as usize;
        CycNum {
            ctx: Arc::clone(self),
            coeffs: self.xi_powers[m].clone(),
        }
    }

    /// `eps_rho^k = e^{2 pi i k / rho}`, realized as `xi^{4k}`.
    pub fn eps_pow(self: &Arc<Self>, k: i64) -> CycNum {
        self.xi_pow(4 * k)
    }
}

/// An element of `Q(zeta_{4 rho})` in canonical form: a coefficient vector
/// of length `phi(4 rho)` on the power basis `1, xi, ..., xi^{deg-1}`.
#[derive(Clone)]
pub struct CycNum {
    ctx: Arc<CycContext>,
    coeffs: Vec<Rat>,
}

/// Builds the field `Q(zeta_{4 rho})` and returns it together with the
/// distinguished primitive root `xi = e^{pi i / (2 rho)}`.
pub fn make_root(rho: u32) -> (Arc<CycContext>, CycNum) {
    let ctx = CycContext::new(rho);
    let xi = ctx.xi_pow(1);
    (ctx, xi)
}

impl PartialEq for CycNum {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.conductor == other.ctx.conductor && self.coeffs == other.coeffs
    }
}
impl Eq for CycNum {}

impl CycNum {
    pub fn context(&self) -> &Arc<CycContext> {
        &self.ctx
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Rat::is_zero)
    }

    /// True when the element lies in the prime field Q.
    pub fn is_rational(&self) -> bool {
        self.coeffs[1..].iter().all(Rat::is_zero)
    }

    /// The element as a rational if it lies in Q.
    pub fn as_rat(&self) -> Option<Rat> {
        self.is_rational().then(|| self.coeffs[0].clone())
    }

    fn check_ctx(&self, other: &Self) {
        debug_assert_eq!(
            self.ctx.conductor, other.ctx.conductor,
            "mixed cyclotomic fields"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_ctx(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        CycNum {
            ctx: Arc::clone(&self.ctx),
            coeffs,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_ctx(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        CycNum {
            ctx: Arc::clone(&self.ctx),
            coeffs,
        }
    }

    pub fn neg(&self) -> Self {
        CycNum {
            ctx: Arc::clone(&self.ctx),
            coeffs: self.coeffs.iter().map(|a| -a).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_ctx(other);
        let deg = self.ctx.degree;
        let mut raw = vec![Rat::zero(); 2 * deg - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                raw[i + j] = &raw[i + j] + &(a * b);
            }
        }
        let mut coeffs: Vec<Rat> = raw[..deg].to_vec();
        for k in 0..deg.saturating_sub(1) {
            let c = &raw[deg + k];
            if c.is_zero() {
                continue;
            }
            let row = &self.ctx.reduction[k];
            for i in 0..deg {
                if !row[i].is_zero() {
                    coeffs[i] = &coeffs[i] + &(&row[i] * c);
                }
            }
        }
        CycNum {
            ctx: Arc::clone(&self.ctx),
            coeffs,
        }
    }

    pub fn mul_rat(&self, q: &Rat) -> Self {
        CycNum {
            ctx: Arc::clone(&self.ctx),
            coeffs: self.coeffs.iter().map(|a| a * q).collect(),
        }
    }

    /// Multiplicative inverse via the extended Euclidean algorithm against
    /// the minimal polynomial.
    pub fn invert(&self) -> Result<Self, CycError> {
        if self.is_zero() {
            return Err(CycError::DivisionByZero {
                conductor: self.ctx.conductor,
            });
        }
        // Extended gcd of (self as polynomial, min_poly) over Q[x]:
        // maintain r0 = a*s0 + m*t0 (t not tracked).
        let mut r0: Vec<Rat> = self.ctx.min_poly.clone();
        let mut r1: Vec<Rat> = trim(self.coeffs.clone());
        let mut s0: Vec<Rat> = vec![];
        let mut s1: Vec<Rat> = vec![Rat::one()];
        while !r1.is_empty() {
            let (q, r) = poly_divmod(&r0, &r1);
            let s = poly_sub(&s0, &poly_mul(&q, &s1));
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s;
        }
        // r0 is a nonzero constant gcd (min_poly is irreducible).
        assert_eq!(r0.len(), 1, "minimal polynomial must be irreducible");
        let scale = r0[0].recip();
        let mut coeffs = vec![Rat::zero(); self.ctx.degree];
        for (i, c) in s0.iter().enumerate() {
            coeffs[i] = c * &scale;
        }
        Ok(CycNum {
            ctx: Arc::clone(&self.ctx),
            coeffs,
        })
    }

    /// Integer power, with negative exponents via inversion.
    pub fn pow_i64(&self, n: i64) -> Result<Self, CycError> {
        let base = if n < 0 { self.invert()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = self.ctx.one();
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&sq);
            }
            sq = sq.mul(&sq);
            e >>= 1;
        }
        Ok(acc)
    }

    /// The Galois conjugation `xi -> xi^{-1}` (complex conjugation on the
    /// standard embedding). This is a field automorphism.
    pub fn conjugate(&self) -> Self {
        let mut acc = self.ctx.zero();
        let n = self.ctx.conductor as i64;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            acc = acc.add(&self.ctx.xi_pow(n - k as i64).mul_rat(c));
        }
        acc
    }

    /// True when the element is fixed by conjugation, i.e. real.
    pub fn is_real(&self) -> bool {
        self.conjugate() == *self
    }

    /// Numerical embedding sending `xi` to `e^{pi i / (2 rho)}`.
    pub fn embed_complex(&self) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        let step = std::f64::consts::PI / (2.0 * self.ctx.rho as f64);
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let a = rat_to_f64(c);
            let (s, co) = (step * k as f64).sin_cos();
            re += a * co;
            im += a * s;
        }
        (re, im)
    }

    /// Exact string form `c0 + c1*x + ...` with rationals printed as `p/q`.
    pub fn to_exact_string(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if out.is_empty() {
                if c.is_negative() {
                    out.push('-');
                }
            } else if c.is_negative() {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            let coeff_part = mag.to_string();
            match k {
                0 => out.push_str(&coeff_part),
                _ => {
                    if mag.is_one() {
                        out.push('x');
                    } else {
                        out.push_str(&coeff_part);
                        out.push_str("*x");
                    }
                    if k > 1 {
                        out.push_str(&format!("^{k}"));
                    }
                }
            }
        }
        out
    }

    /// Parses the output of [`CycNum::to_exact_string`].
    pub fn parse(ctx: &Arc<CycContext>, s: &str) -> Result<CycNum, CycError> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(CycError::Parse(s.to_string()));
        }
        if compact == "0" {
            return Ok(ctx.zero());
        }
        let mut coeffs = vec![Rat::zero(); ctx.degree];
        // split into signed terms
        let mut terms: Vec<String> = Vec::new();
        let mut cur = String::new();
        for (i, ch) in compact.chars().enumerate() {
            if (ch == '+' || ch == '-') && i > 0 && !matches!(compact.as_bytes()[i - 1], b'/') {
                terms.push(cur.clone());
                cur.clear();
            }
            cur.push(ch);
        }
        terms.push(cur);
        for term in terms {
            let (coeff_str, pow): (String, usize) = match term.find('x') {
                None => (term.clone(), 0),
                Some(pos) => {
                    let mut cs = term[..pos].trim_end_matches('*').to_string();
                    if cs.is_empty() || cs == "+" {
                        cs = "1".into();
                    } else if cs == "-" {
                        cs = "-1".into();
                    }
                    let rest = &term[pos + 1..];
                    let p = if rest.is_empty() {
                        1
                    } else {
                        rest.trim_start_matches('^')
                            .parse::<usize>()
                            .map_err(|_| CycError::Parse(s.to_string()))?
                    };
                    (cs, p)
                }
            };
            let q: Rat = coeff_str
                .parse()
                .map_err(|_| CycError::Parse(s.to_string()))?;
            if pow >= ctx.degree {
                return Err(CycError::Parse(s.to_string()));
            }
            coeffs[pow] = &coeffs[pow] + &q;
        }
        Ok(CycNum {
            ctx: Arc::clone(ctx),
            coeffs,
        })
    }
}

pub fn rat_to_f64(q: &Rat) -> f64 {
    // good enough for sanity embeddings: heights stay moderate
    let n = q.numer();
    let d = q.denom();
    let nf = n.to_string().parse::<f64>().unwrap_or(f64::NAN);
    let df = d.to_string().parse::<f64>().unwrap_or(f64::NAN);
    nf / df
}

fn trim(mut v: Vec<Rat>) -> Vec<Rat> {
    while v.last().map(Rat::is_zero).unwrap_or(false) {
        v.pop();
    }
    v
}

fn poly_divmod(num: &[Rat], den: &[Rat]) -> (Vec<Rat>, Vec<Rat>) {
    let dd = den.len() - 1;
    if num.len() <= dd {
        return (vec![], num.to_vec());
    }
    let lead_inv = den[dd].recip();
    let mut rem = num.to_vec();
    let mut quot = vec![Rat::zero(); num.len() - dd];
    for k in (0..=num.len() - 1 - dd).rev() {
        let c = &rem[dd + k] * &lead_inv;
        if !c.is_zero() {
            for (i, dc) in den.iter().enumerate() {
                rem[i + k] = &rem[i + k] - &(dc * &c);
            }
        }
        quot[k] = c;
    }
    (trim(quot), trim(rem))
}

fn poly_mul(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![Rat::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] = &out[i + j] + &(x * y);
        }
    }
    trim(out)
}

fn poly_sub(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] = x.clone();
    }
    for (i, y) in b.iter().enumerate() {
        out[i] = &out[i] - y;
    }
    trim(out)
}

impl fmt::Debug for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cyc[{}]({})", self.ctx.conductor, self.to_exact_string())
    }
}

impl fmt::Display for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_exact_string())
    }
}

impl std::ops::Add for &CycNum {
    type Output = CycNum;
    fn add(self, rhs: &CycNum) -> CycNum {
        CycNum::add(self, rhs)
    }
}
impl std::ops::Sub for &CycNum {
    type Output = CycNum;
    fn sub(self, rhs: &CycNum) -> CycNum {
        CycNum::sub(self, rhs)
    }
}
impl std::ops::Mul for &CycNum {
    type Output = CycNum;
    fn mul(self, rhs: &CycNum) -> CycNum {
        CycNum::mul(self, rhs)
    }
}
impl std::ops::Neg for &CycNum {
    type Output = CycNum;
    fn neg(self) -> CycNum {
        CycNum::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    #[test]
    fn min_poly_degrees() {
        // phi(4), phi(8), phi(12), phi(16), phi(20), phi(24)
        for (rho, deg) in [(1u32, 2usize), (2, 4), (3, 4), (4, 8), (5, 8), (6, 8)] {
            let (ctx, _) = make_root(rho);
            assert_eq!(ctx.degree, deg, "rho={rho}");
        }
        // Phi_8 = x^4 + 1
        let (ctx, _) = make_root(2);
        let expect: Vec<Rat> = [1, 0, 0, 0, 1].iter().map(|&n| rat_i(n)).collect();
        assert_eq!(ctx.min_poly, expect);
    }

    #[test]
    fn xi_is_primitive() {
        for rho in 1..=6u32 {
            let (ctx, xi) = make_root(rho);
            let n = ctx.conductor as i64;
            assert_eq!(xi.pow_i64(n).unwrap(), ctx.one());
            for k in 1..n {
                assert_ne!(xi.pow_i64(k).unwrap(), ctx.one(), "rho={rho} k={k}");
            }
        }
    }

    #[test]
    fn rho_one_gives_i() {
        let (ctx, xi) = make_root(1);
        // zeta_4 = i, so xi^2 = -1
        assert_eq!(xi.mul(&xi), ctx.from_int(-1));
    }

    #[test]
    fn rho_two_fourth_power() {
        let (ctx, xi) = make_root(2);
        assert_eq!(xi.pow_i64(4).unwrap(), ctx.from_int(-1));
        // (xi^4)^rho = 1 for any rho
        for rho in 1..=8 {
            let (ctx, xi) = make_root(rho);
            assert_eq!(
                xi.pow_i64(4).unwrap().pow_i64(rho as i64).unwrap(),
                ctx.one()
            );
        }
    }

    #[test]
    fn root_times_inverse_power() {
        let (ctx, xi) = make_root(3);
        let n = ctx.conductor as i64;
        assert_eq!(xi.mul(&xi.pow_i64(n - 1).unwrap()), ctx.one());
    }

    #[test]
    fn invert_one_plus_xi_rho_two() {
        let (ctx, xi) = make_root(2);
        let a = ctx.one().add(&xi);
        let inv = a.invert().unwrap();
        assert_eq!(a.mul(&inv), ctx.one());
    }

    #[test]
    fn divide_by_zero_is_an_error() {
        let (ctx, _) = make_root(2);
        assert_eq!(
            ctx.zero().invert(),
            Err(CycError::DivisionByZero { conductor: 8 })
        );
    }

    #[test]
    fn embedding_of_xi_rho_two() {
        let (_, xi) = make_root(2);
        let (re, im) = xi.embed_complex();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((re - s).abs() < 1e-12);
        assert!((im - s).abs() < 1e-12);
    }

    #[test]
    fn embedding_of_eps3() {
        let (ctx, _) = make_root(3);
        let eps = ctx.eps_pow(1);
        let (re, im) = eps.embed_complex();
        assert!((re + 0.5).abs() < 1e-12);
        assert!((im - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn embedding_of_zero() {
        let (ctx, _) = make_root(4);
        assert_eq!(ctx.zero().embed_complex(), (0.0, 0.0));
    }

    #[test]
    fn conjugation_is_an_involution() {
        let (ctx, xi) = make_root(5);
        let a = xi
            .pow_i64(3)
            .unwrap()
            .mul_rat(&rat(2, 7))
            .add(&ctx.from_int(4))
            .sub(&xi.pow_i64(9).unwrap());
        assert_eq!(a.conjugate().conjugate(), a);
        // conjugation is multiplicative
        let b = xi.add(&ctx.from_int(1));
        assert_eq!(a.mul(&b).conjugate(), a.conjugate().mul(&b.conjugate()));
    }

    #[test]
    fn exact_string_round_trip() {
        let (ctx, xi) = make_root(3);
        let a = xi
            .pow_i64(2)
            .unwrap()
            .mul_rat(&rat(-3, 4))
            .add(&ctx.from_rat(&rat(1, 2)))
            .add(&xi.pow_i64(3).unwrap());
        let s = a.to_exact_string();
        let back = CycNum::parse(&ctx, &s).unwrap();
        assert_eq!(back, a);
        assert_eq!(CycNum::parse(&ctx, "0").unwrap(), ctx.zero());
    }
}
