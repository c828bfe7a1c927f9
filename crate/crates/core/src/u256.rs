//! Unsigned 256-bit integers with EVM wraparound semantics.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A 256-bit unsigned integer stored as four little-endian 64-bit limbs.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct U256([u64; 4]);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseU256Error {
    #[error("empty integer literal")]
    Empty,
    #[error("invalid digit {0:?} in integer literal")]
    InvalidDigit(char),
    #[error("integer literal does not fit in 256 bits")]
    Overflow,
}

impl U256 {
    pub const ZERO: U256 = U256([0; 4]);
    pub const ONE: U256 = U256([1, 0, 0, 0]);
    pub const MAX: U256 = U256([u64::MAX; 4]);

    pub const fn from_limbs(limbs: [u64; 4]) -> Self {
        U256(limbs)
    }

    pub const fn from_u64(v: u64) -> Self {
        U256([v, 0, 0, 0])
    }

    pub fn from_u128(v: u128) -> Self {
        U256([v as u64, (v >> 64) as u64, 0, 0])
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Self::ONE
        } else {
            Self::ZERO
        }
    }

    pub fn limbs(&self) -> [u64; 4] {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn to_u64(&self) -> Option<u64> {
        if self.0[1..].iter().all(|&l| l == 0) {
            Some(self.0[0])
        } else {
            None
        }
    }

    /// Number of significant bits (0 for zero).
    pub fn bits(&self) -> u32 {
        for i in (0..4).rev() {
            if self.0[i] != 0 {
                return 64 * i as u32 + (64 - self.0[i].leading_zeros());
            }
        }
        0
    }

    /// `2^n` for `n < 256`.
    pub fn pow2(n: u32) -> Self {
        assert!(n < 256, "2^{n} does not fit in 256 bits");
        let mut limbs = [0u64; 4];
        limbs[(n / 64) as usize] = 1u64 << (n % 64);
        U256(limbs)
    }

    pub fn bit(&self, n: u32) -> bool {
        n < 256 && (self.0[(n / 64) as usize] >> (n % 64)) & 1 == 1
    }

    pub fn wrapping_add(self, rhs: Self) -> Self {
        let mut out = [0u64; 4];
        let mut carry = false;
        for (i, slot) in out.iter_mut().enumerate() {
            let (s1, c1) = self.0[i].overflowing_add(rhs.0[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            *slot = s2;
            carry = c1 || c2;
        }
        U256(out)
    }

    pub fn wrapping_sub(self, rhs: Self) -> Self {
        let mut out = [0u64; 4];
        let mut borrow = false;
        for (i, slot) in out.iter_mut().enumerate() {
            let (d1, b1) = self.0[i].overflowing_sub(rhs.0[i]);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            *slot = d2;
            borrow = b1 || b2;
        }
        U256(out)
    }

    pub fn wrapping_neg(self) -> Self {
        U256::ZERO.wrapping_sub(self)
    }

    pub fn wrapping_mul(self, rhs: Self) -> Self {
        let mut out = [0u64; 4];
        for i in 0..4 {
            let mut carry: u128 = 0;
            for j in 0..(4 - i) {
                let cur = out[i + j] as u128 + (self.0[i] as u128) * (rhs.0[j] as u128) + carry;
                out[i + j] = cur as u64;
                carry = cur >> 64;
            }
        }
        U256(out)
    }

    fn shl1(self) -> Self {
        let mut out = [0u64; 4];
        let mut carry = 0u64;
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = (self.0[i] << 1) | carry;
            carry = self.0[i] >> 63;
        }
        U256(out)
    }

    /// Quotient and remainder, `None` when dividing by zero.
    pub fn checked_div_rem(self, rhs: Self) -> Option<(Self, Self)> {
        if rhs.is_zero() {
            return None;
        }
        if self < rhs {
            return Some((U256::ZERO, self));
        }
        if let (Some(a), Some(b)) = (self.to_u64(), rhs.to_u64()) {
            return Some((U256::from_u64(a / b), U256::from_u64(a % b)));
        }
        let mut quot = U256::ZERO;
        let mut rem = U256::ZERO;
        for i in (0..self.bits()).rev() {
            rem = rem.shl1();
            if self.bit(i) {
                rem.0[0] |= 1;
            }
            if rem >= rhs {
                rem = rem.wrapping_sub(rhs);
                quot.0[(i / 64) as usize] |= 1u64 << (i % 64);
            }
        }
        Some((quot, rem))
    }

    /// EVM `DIV`: division by zero yields zero.
    pub fn evm_div(self, rhs: Self) -> Self {
        self.checked_div_rem(rhs).map_or(U256::ZERO, |(q, _)| q)
    }

    /// EVM `MOD`: modulo zero yields zero.
    pub fn evm_mod(self, rhs: Self) -> Self {
        self.checked_div_rem(rhs).map_or(U256::ZERO, |(_, r)| r)
    }

    fn div_rem_small(self, d: u64) -> (Self, u64) {
        let mut out = [0u64; 4];
        let mut rem: u128 = 0;
        for i in (0..4).rev() {
            let cur = (rem << 64) | self.0[i] as u128;
            out[i] = (cur / d as u128) as u64;
            rem = cur % d as u128;
        }
        (U256(out), rem as u64)
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for i in 0..4 {
            out[(3 - i) * 8..(4 - i) * 8].copy_from_slice(&self.0[i].to_be_bytes());
        }
        out
    }

    pub fn from_be_bytes(bytes: [u8; 32]) -> Self {
        let mut limbs = [0u64; 4];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let mut chunk = [0u8; 8];
            chunk.copy_from_slice(&bytes[(3 - i) * 8..(4 - i) * 8]);
            *limb = u64::from_be_bytes(chunk);
        }
        U256(limbs)
    }

    pub fn from_str_radix(s: &str, radix: u32) -> Result<Self, ParseU256Error> {
        if s.is_empty() {
            return Err(ParseU256Error::Empty);
        }
        let base = U256::from_u64(radix as u64);
        let mut acc = U256::ZERO;
        for ch in s.chars() {
            if ch == '_' {
                continue;
            }
            let digit = ch.to_digit(radix).ok_or(ParseU256Error::InvalidDigit(ch))?;
            let shifted = acc.wrapping_mul(base);
            // overflow check: shifted / base must give back acc
            if shifted.evm_div(base) != acc {
                return Err(ParseU256Error::Overflow);
            }
            let next = shifted.wrapping_add(U256::from_u64(digit as u64));
            if next < shifted {
                return Err(ParseU256Error::Overflow);
            }
            acc = next;
        }
        Ok(acc)
    }

    pub fn to_hex_string(&self) -> String {
        format!("{self:#x}")
    }
}

impl Ord for U256 {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in (0..4).rev() {
            match self.0[i].cmp(&other.0[i]) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for U256 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<u64> for U256 {
    fn from(v: u64) -> Self {
        U256::from_u64(v)
    }
}

impl FromStr for U256 {
    type Err = ParseU256Error;

    /// Accepts decimal or `0x`-prefixed hexadecimal.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
            Some(hex) => U256::from_str_radix(hex, 16),
            None => U256::from_str_radix(s, 10),
        }
    }
}

impl fmt::Display for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut digits = Vec::new();
        let mut cur = *self;
        while !cur.is_zero() {
            let (q, r) = cur.div_rem_small(10_000_000_000_000_000_000);
            digits.push(r);
            cur = q;
        }
        let mut out = format!("{}", digits.pop().unwrap());
        for chunk in digits.iter().rev() {
            out.push_str(&format!("{chunk:019}"));
        }
        f.write_str(&out)
    }
}

impl fmt::LowerHex for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let mut started = false;
        for i in (0..4).rev() {
            if started {
                out.push_str(&format!("{:016x}", self.0[i]));
            } else if self.0[i] != 0 {
                out.push_str(&format!("{:x}", self.0[i]));
                started = true;
            }
        }
        if !started {
            out.push('0');
        }
        if f.alternate() {
            f.write_str("0x")?;
        }
        f.write_str(&out)
    }
}

impl fmt::Debug for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:#x}")
    }
}

impl Serialize for U256 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex_string())
    }
}

impl<'de> Deserialize<'de> for U256 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraparound_add() {
        assert_eq!(U256::MAX.wrapping_add(U256::from_u64(2)), U256::ONE);
        assert_eq!(U256::ZERO.wrapping_sub(U256::ONE), U256::MAX);
    }

    #[test]
    fn division_by_zero_is_zero() {
        assert_eq!(U256::from_u64(7).evm_mod(U256::ZERO), U256::ZERO);
        assert_eq!(U256::from_u64(7).evm_div(U256::ZERO), U256::ZERO);
    }

    #[test]
    fn parse_and_print() {
        let v: U256 = "0x42".parse().unwrap();
        assert_eq!(v, U256::from_u64(66));
        assert_eq!(v.to_string(), "66");
        assert_eq!(format!("{v:#x}"), "0x42");
        let big = U256::pow2(200);
        assert_eq!(big.bits(), 201);
        assert_eq!(big.to_string().parse::<U256>().unwrap(), big);
        assert_eq!(
            U256::MAX.to_string(),
            "115792089237316195423570985008687907853269984665640564039457584007913129639935"
        );
        assert!("115792089237316195423570985008687907853269984665640564039457584007913129639936"
            .parse::<U256>()
            .is_err());
    }

    #[test]
    fn byte_roundtrip() {
        let v = U256::from_limbs([1, 2, 3, 4]);
        assert_eq!(U256::from_be_bytes(v.to_be_bytes()), v);
        assert_eq!(v.to_be_bytes()[31], 1);
    }
}
