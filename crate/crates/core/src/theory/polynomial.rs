use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, ToPrimitive, Zero};

use crate::error::{MkrError, Result};

/// Sparse polynomial over `nvars` variables: exponent vector → coefficient.
/// Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultivariatePolynomial<C> {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, C>,
}

/// Coefficient ring requirements.
pub trait Coefficient:
    Clone + PartialEq + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
}

impl<C> Coefficient for C where
    C: Clone + PartialEq + Zero + One + Add<Output = C> + Sub<Output = C> + Mul<Output = C> + Neg<Output = C>
{
}

impl<C: Coefficient> MultivariatePolynomial<C> {
    pub fn zero(nvars: usize) -> Self {
        MultivariatePolynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The polynomial `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable {i} out of range");
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, C::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &C)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    pub fn coefficient(&self, exponents: &[u32]) -> C {
        self.terms.get(exponents).cloned().unwrap_or_else(C::zero)
    }

    fn add_term(&mut self, exponents: Vec<u32>, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&exponents) {
            Some(existing) => {
                let sum = existing.clone() + c;
                if sum.is_zero() {
                    self.terms.remove(&exponents);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(exponents, c);
            }
        }
    }

    fn check_vars(&self, other: &Self) {
        assert_eq!(self.nvars, other.nvars, "polynomials over different variable sets");
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, k) in &self.terms {
            out.add_term(e.clone(), k.clone() * c.clone());
        }
        out
    }

    /// Product that gives up once the result would exceed `budget` terms.
    pub fn mul_within(&self, other: &Self, budget: usize) -> Result<Self> {
        self.check_vars(other);
        let mut out = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca.clone() * cb.clone());
            }
            if out.terms.len() > budget {
                return Err(MkrError::TermBudget(format!(
                    "product exceeds {budget} terms ({} × {} inputs)",
                    self.terms.len(),
                    other.terms.len()
                )));
            }
        }
        Ok(out)
    }

    /// Sum of the exponents of the variables in `vars`, for one monomial.
    pub fn degree_of(exponents: &[u32], vars: std::ops::Range<usize>) -> u32 {
        exponents[vars].iter().sum()
    }

    /// Evaluates at a point, converting coefficients to `f64`.
    pub fn eval_f64(&self, point: &[f64]) -> f64
    where
        C: ToPrimitive,
    {
        assert_eq!(point.len(), self.nvars, "point has the wrong dimension");
        self.terms
            .iter()
            .map(|(e, c)| {
                let m: f64 = e.iter().zip(point).map(|(&k, &x)| x.powi(k as i32)).product();
                c.to_f64().unwrap_or(f64::NAN) * m
            })
            .sum()
    }
}

impl<C: Coefficient> Add for &MultivariatePolynomial<C> {
    type Output = MultivariatePolynomial<C>;
    fn add(self, other: Self) -> Self::Output {
        self.check_vars(other);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl<C: Coefficient> Sub for &MultivariatePolynomial<C> {
    type Output = MultivariatePolynomial<C>;
    fn sub(self, other: Self) -> Self::Output {
        self.check_vars(other);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }
}

impl<C: Coefficient> Mul for &MultivariatePolynomial<C> {
    type Output = MultivariatePolynomial<C>;
    fn mul(self, other: Self) -> Self::Output {
        self.mul_within(other, usize::MAX).expect("unbounded budget")
    }
}

impl<C: Coefficient> Neg for &MultivariatePolynomial<C> {
    type Output = MultivariatePolynomial<C>;
    fn neg(self) -> Self::Output {
        self.scale(&-C::one())
    }
}

/// Renders a monomial with the given variable names, e.g. `v1^2·e2`.
pub fn format_monomial(exponents: &[u32], names: &[String]) -> String {
    let parts: Vec<String> = exponents
        .iter()
        .zip(names)
        .filter(|(&k, _)| k > 0)
        .map(|(&k, n)| if k == 1 { n.clone() } else { format!("{n}^{k}") })
        .collect();
    if parts.is_empty() {
        "1".to_string()
    } else {
        parts.join("·")
    }
}

impl<C: Coefficient + fmt::Display> fmt::Display for MultivariatePolynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let names: Vec<String> = (0..self.nvars).map(|i| format!("x{i}")).collect();
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| format!("({c})·{}", format_monomial(e, &names)))
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;

    type P = MultivariatePolynomial<BigRational>;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn poly(nvars: usize, terms: &[(Vec<u32>, i64, i64)]) -> P {
        let mut p = P::zero(nvars);
        for (e, n, d) in terms {
            p.add_term(e.clone(), q(*n, *d));
        }
        p
    }

    #[test]
    fn square_of_binomial() {
        let x = P::var(2, 0);
        let y = P::var(2, 1);
        let s = &x + &y;
        let sq = &s * &s;
        assert_eq!(sq.num_terms(), 3);
        assert_eq!(sq.coefficient(&[1, 1]), q(2, 1));
        let diff = &sq - &(&x * &x);
        assert_eq!(diff.coefficient(&[2, 0]), q(0, 1));
        assert_eq!(diff.num_terms(), 2);
    }

    #[test]
    fn cancellation_drops_terms() {
        let x = P::var(1, 0);
        let z = &x - &x;
        assert!(z.is_zero());
        let third = P::constant(1, q(1, 3));
        let sum = &(&third + &third) + &third;
        assert_eq!(sum, P::constant(1, q(1, 1)));
    }

    #[test]
    fn budget_is_enforced() {
        let x = &P::var(3, 0) + &(&P::var(3, 1) + &P::var(3, 2));
        let x2 = &x * &x;
        assert!(matches!(x2.mul_within(&x2, 5), Err(MkrError::TermBudget(_))));
        assert_eq!(x2.mul_within(&x2, 1000).unwrap().num_terms(), 15);
    }

    #[test]
    fn evaluation() {
        let p = poly(2, &[(vec![2, 0], 1, 2), (vec![0, 1], -3, 1), (vec![0, 0], 1, 4)]);
        assert!((p.eval_f64(&[2.0, 1.0]) - (2.0 - 3.0 + 0.25)).abs() < 1e-15);
    }

    fn arb_poly() -> impl Strategy<Value = P> {
        proptest::collection::vec((proptest::collection::vec(0u32..3, 3), -5i64..6, 1i64..4), 0..6)
            .prop_map(|ts| poly(3, &ts))
    }

    proptest! {
        #[test]
        fn add_then_sub_is_identity(p in arb_poly(), r in arb_poly()) {
            prop_assert_eq!(&(&p + &r) - &r, p);
        }

        #[test]
        fn multiplication_distributes(p in arb_poly(), r in arb_poly(), s in arb_poly()) {
            prop_assert_eq!(&p * &(&r + &s), &(&p * &r) + &(&p * &s));
        }
    }
}
