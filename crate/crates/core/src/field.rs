//! Exact arithmetic in the prime field `Z_p` for word-sized primes.
//!
//! Every value is kept as its canonical representative in `[0, p)`.
//! Multiplication goes through a `u128` intermediate, so any prime that
//! fits in a `u64` is supported without overflow.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is composite")]
    CompositeModulus(u64),
    #[error("modulus {0} is too small, need p >= 3")]
    TooSmall(u64),
    #[error("operands live in different fields (p = {left} vs p = {right})")]
    ModulusMismatch { left: u64, right: u64 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// Witnesses that make Miller-Rabin deterministic for every `n < 2^64`.
const MR_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic primality test, correct for every 64-bit input.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &w in &MR_WITNESSES {
        if n == w {
            return true;
        }
        if n.is_multiple_of(w) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &MR_WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[inline]
fn mul_mod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, n: u64) -> u64 {
    let mut acc = 1 % n;
    base %= n;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, n);
        }
        base = mul_mod(base, base, n);
        exp >>= 1;
    }
    acc
}

/// A validated prime modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "String")]
pub struct Modulus(u64);

impl Modulus {
    /// Accepts `candidate` only if it is a prime `>= 3`.
    pub fn new(candidate: u64) -> Result<Self, FieldError> {
        if candidate < 3 {
            return Err(FieldError::TooSmall(candidate));
        }
        if !is_prime(candidate) {
            return Err(FieldError::CompositeModulus(candidate));
        }
        Ok(Modulus(candidate))
    }

    /// The Mersenne prime `2^61 - 1`, the default field for simulations.
    pub fn mersenne61() -> Self {
        Modulus((1u64 << 61) - 1)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Reduces an arbitrary integer into the field.
    pub fn element(self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.0,
            modulus: self,
        }
    }

    /// Reduces a signed integer, so `element_i64(-1)` is `p - 1`.
    pub fn element_i64(self, value: i64) -> FieldElement {
        let r = (value as i128).rem_euclid(self.0 as i128);
        FieldElement {
            value: r as u64,
            modulus: self,
        }
    }

    pub fn zero(self) -> FieldElement {
        self.element(0)
    }

    pub fn one(self) -> FieldElement {
        self.element(1)
    }

    /// Uniform sample from the whole field, zero included.
    pub fn random<R: Rng + ?Sized>(self, rng: &mut R) -> FieldElement {
        FieldElement {
            value: rng.random_range(0..self.0),
            modulus: self,
        }
    }
}

impl From<Modulus> for String {
    fn from(m: Modulus) -> String {
        m.0.to_string()
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<'de> Deserialize<'de> for Modulus {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = crate::wire::DecimalU64::deserialize(d)?;
        Modulus::new(raw.0).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

/// An element of `Z_p`, always canonical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    modulus: Modulus,
}

impl FieldElement {
    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> Modulus {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn same_field(self, other: FieldElement) -> Result<u64, FieldError> {
        if self.modulus != other.modulus {
            return Err(FieldError::ModulusMismatch {
                left: self.modulus.0,
                right: other.modulus.0,
            });
        }
        Ok(self.modulus.0)
    }

    pub fn checked_add(self, other: FieldElement) -> Result<FieldElement, FieldError> {
        self.apply(other, ArithOp::Add)
    }

    pub fn checked_sub(self, other: FieldElement) -> Result<FieldElement, FieldError> {
        self.apply(other, ArithOp::Sub)
    }

    pub fn checked_mul(self, other: FieldElement) -> Result<FieldElement, FieldError> {
        self.apply(other, ArithOp::Mul)
    }

    /// `a op b` for two elements of the same field.
    pub fn apply(self, other: FieldElement, op: ArithOp) -> Result<FieldElement, FieldError> {
        let p = self.same_field(other)?;
        let (a, b) = (self.value, other.value);
        let value = match op {
            // a, b < p <= u64::MAX so the u128 sum cannot overflow
            ArithOp::Add => ((a as u128 + b as u128) % p as u128) as u64,
            ArithOp::Sub => {
                if a >= b {
                    a - b
                } else {
                    p - (b - a)
                }
            }
            ArithOp::Mul => mul_mod(a, b, p),
        };
        Ok(FieldElement {
            value,
            modulus: self.modulus,
        })
    }

    pub fn pow(self, exp: u64) -> FieldElement {
        FieldElement {
            value: pow_mod(self.value, exp, self.modulus.0),
            ..self
        }
    }

    /// Multiplicative inverse via the extended Euclidean algorithm.
    pub fn inv(self) -> Result<FieldElement, FieldError> {
        if self.value == 0 {
            return Err(FieldError::ZeroInverse);
        }
        let p = self.modulus.0 as i128;
        let (mut old_r, mut r) = (self.value as i128, p);
        let (mut old_s, mut s) = (1i128, 0i128);
        while r != 0 {
            let q = old_r / r;
            (old_r, r) = (r, old_r - q * r);
            (old_s, s) = (s, old_s - q * s);
        }
        debug_assert_eq!(old_r, 1);
        Ok(FieldElement {
            value: old_s.rem_euclid(p) as u64,
            modulus: self.modulus,
        })
    }
}

impl std::ops::Neg for FieldElement {
    type Output = FieldElement;

    fn neg(self) -> FieldElement {
        let value = if self.value == 0 {
            0
        } else {
            self.modulus.0 - self.value
        };
        FieldElement { value, ..self }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Free-function form of [`FieldElement::apply`].
pub fn mod_arith(
    a: FieldElement,
    b: FieldElement,
    op: ArithOp,
) -> Result<FieldElement, FieldError> {
    a.apply(b, op)
}
