//! Exact fixed-point money amounts.
//!
//! Monetary values are stored as signed 64-bit counts of minor units
//! (cents), never as floating point, so sums over arbitrarily many
//! transactions are exact and association-order independent. Conversion to
//! `f64` happens only at the boundary into geometric algorithms
//! (standardization, clustering), where approximation is unavoidable anyway.

use std::fmt;
use std::iter::Sum;

use crate::{Error, Result};

/// An exact money amount in minor units (cents).
///
/// `Money` is a transparent wrapper over `i64`; two decimal digits of
/// fraction are assumed throughout (`Money::from_minor(150)` is `"1.50"`).
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    /// Zero cents.
    pub const ZERO: Money = Money(0);

    /// Wraps a raw count of minor units.
    pub fn from_minor(minor: i64) -> Money {
        Money(minor)
    }

    /// The raw count of minor units.
    pub fn minor(self) -> i64 {
        self.0
    }

    /// True for amounts strictly below zero.
    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    /// Checked addition; fails with [`Error::MoneyOverflow`] instead of
    /// wrapping.
    pub fn checked_add(self, other: Money) -> Result<Money> {
        self.0
            .checked_add(other.0)
            .map(Money)
            .ok_or(Error::MoneyOverflow)
    }

    /// Sums a slice exactly, failing on overflow.
    pub fn checked_sum<I: IntoIterator<Item = Money>>(amounts: I) -> Result<Money> {
        let mut total = Money::ZERO;
        for a in amounts {
            total = total.checked_add(a)?;
        }
        Ok(total)
    }

    /// Lossy conversion to major units for geometry. Exact for any amount a
    /// card network will ever clear (|amount| < 2^53 minor units).
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Parses a decimal string with at most two fractional digits.
    ///
    /// Accepted form: optional `+`/`-` sign, one or more digits, then
    /// optionally a `.` followed by one or two digits. Anything else —
    /// thousands separators, exponents, currency symbols, three decimals,
    /// a bare `.` — is rejected. `"7"`, `"7.5"` and `"7.50"` all parse to
    /// 750 minor units.
    pub fn parse(text: &str) -> Result<Money> {
        let bad = || Error::InvalidParam(format!("malformed money amount {text:?}"));
        let bytes = text.as_bytes();
        let (negative, rest) = match bytes.first() {
            Some(b'-') => (true, &bytes[1..]),
            Some(b'+') => (false, &bytes[1..]),
            _ => (false, bytes),
        };
        let (whole, frac) = match rest.iter().position(|&b| b == b'.') {
            Some(dot) => (&rest[..dot], &rest[dot + 1..]),
            None => (rest, &rest[rest.len()..]),
        };
        if whole.is_empty() || !whole.iter().all(u8::is_ascii_digit) {
            return Err(bad());
        }
        // No dot means `frac` is empty; with a dot we demand 1 or 2 digits.
        if rest.contains(&b'.') && !matches!(frac.len(), 1 | 2) {
            return Err(bad());
        }
        if !frac.iter().all(u8::is_ascii_digit) {
            return Err(bad());
        }

        let mut minor: i64 = 0;
        for &d in whole {
            minor = minor
                .checked_mul(10)
                .and_then(|m| m.checked_add(i64::from(d - b'0')))
                .ok_or(Error::MoneyOverflow)?;
        }
        minor = minor.checked_mul(100).ok_or(Error::MoneyOverflow)?;
        let cents = match frac.len() {
            0 => 0,
            1 => i64::from(frac[0] - b'0') * 10,
            _ => i64::from(frac[0] - b'0') * 10 + i64::from(frac[1] - b'0'),
        };
        minor = minor.checked_add(cents).ok_or(Error::MoneyOverflow)?;
        if negative {
            minor = -minor;
        }
        Ok(Money(minor))
    }
}

impl fmt::Display for Money {
    /// Canonical form: minus sign for negatives, no plus sign, always
    /// exactly two fractional digits (`-3.05`, `0.00`, `12.30`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Money({self})")
    }
}

impl Sum<Money> for Money {
    /// Panics on overflow; use [`Money::checked_sum`] for fallible sums.
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |acc, m| {
            Money(acc.0.checked_add(m.0).expect("money sum overflowed"))
        })
    }
}
