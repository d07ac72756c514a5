//! Exact mod-1 phase arithmetic.
//!
//! A [`FixedPointPhase`] holds a phase in turns (`1 turn = 2π rad`) as an
//! unsigned 128-bit integer over `2^128`. Addition, negation and
//! multiplication by integers or powers of two wrap around exactly, which
//! is what the collected exponentiation phases need: their integer weights
//! grow like `2^(p·n_q)` and would otherwise eat the mantissa of an `f64`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

/// Number of fractional bits.
pub const FRACTION_BITS: u32 = 128;

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FixedPointPhase(u128);

impl FixedPointPhase {
    pub const ZERO: Self = Self(0);
    /// Half a turn, i.e. `π` radians.
    pub const HALF: Self = Self(1u128 << 127);

    #[inline]
    pub const fn from_bits(bits: u128) -> Self {
        Self(bits)
    }

    #[inline]
    pub const fn bits(self) -> u128 {
        self.0
    }

    /// Exact dyadic phase `numerator / 2^log2_denominator` turns (mod 1).
    pub fn from_dyadic(numerator: i128, log2_denominator: u32) -> Self {
        let bits = numerator as u128;
        if log2_denominator <= FRACTION_BITS {
            Self(shl_wrapping(bits, FRACTION_BITS - log2_denominator))
        } else {
            let shift = log2_denominator - FRACTION_BITS;
            let v = if shift >= 128 { (numerator >> 127) as u128 } else { (numerator >> shift) as u128 };
            Self(v)
        }
    }

    /// `x · 2^-shift` turns, reduced mod 1. The `f64` is decomposed exactly
    /// into mantissa and exponent, so the only loss is truncation of bits
    /// below `2^-128`.
    pub fn from_turns_scaled(x: f64, shift: u32) -> Self {
        if x == 0.0 || !x.is_finite() {
            return Self::ZERO;
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let exp_field = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, exponent) = if exp_field == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp_field - 1075)
        };
        // value = mantissa · 2^(exponent - shift) turns
        let pos = exponent - shift as i32 + FRACTION_BITS as i32;
        let m = mantissa as u128;
        let mag = if pos >= 0 {
            shl_wrapping(m, pos as u32)
        } else if pos > -128 {
            m >> (-pos) as u32
        } else {
            0
        };
        let v = Self(mag);
        if negative {
            -v
        } else {
            v
        }
    }

    /// `x` turns, reduced mod 1.
    pub fn from_turns(x: f64) -> Self {
        Self::from_turns_scaled(x, 0)
    }

    /// `rad` radians, reduced mod 2π. Not exact: the division by 2π rounds.
    pub fn from_radians(rad: f64) -> Self {
        Self::from_turns(rad / TAU)
    }

    /// Exact multiplication by `2^k` (mod 1).
    #[inline]
    pub fn shifted(self, k: u32) -> Self {
        Self(shl_wrapping(self.0, k))
    }

    /// Exact multiplication by an integer (mod 1).
    #[inline]
    pub fn mul_int(self, k: u128) -> Self {
        Self(self.0.wrapping_mul(k))
    }

    /// A representative of half this phase. Exact when the raw value is
    /// even; otherwise off by `2^-129` turns.
    #[inline]
    pub fn half(self) -> Self {
        Self(((self.0 as i128) >> 1) as u128)
    }

    /// Signed value in turns, in `[-1/2, 1/2)`.
    pub fn to_signed_turns(self) -> f64 {
        let s = self.0 as i128;
        let hi = (s >> 64) as i64 as f64;
        let lo = (s as u128 & u64::MAX as u128) as u64 as f64;
        (hi * TWO_POW_64 + lo) / TWO_POW_64 / TWO_POW_64
    }

    /// Radians in `(-π, π]`.
    pub fn to_radians(self) -> f64 {
        if self == Self::HALF {
            return PI;
        }
        self.to_signed_turns() * TAU
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// 32 hex digits of the raw fraction.
    pub fn to_hex(self) -> String {
        format!("0x{:032x}", self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        u128::from_str_radix(digits, 16).ok().map(Self)
    }
}

#[inline]
fn shl_wrapping(v: u128, k: u32) -> u128 {
    if k >= 128 {
        0
    } else {
        v << k
    }
}

impl Add for FixedPointPhase {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0.wrapping_add(rhs.0))
    }
}

impl AddAssign for FixedPointPhase {
    fn add_assign(&mut self, rhs: Self) {
        self.0 = self.0.wrapping_add(rhs.0);
    }
}

impl Sub for FixedPointPhase {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0.wrapping_sub(rhs.0))
    }
}

impl Neg for FixedPointPhase {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.wrapping_neg())
    }
}

impl std::iter::Sum for FixedPointPhase {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl fmt::Debug for FixedPointPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FixedPointPhase({} turns)", self.to_signed_turns())
    }
}

impl fmt::Display for FixedPointPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}
