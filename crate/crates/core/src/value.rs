//! 3-state signal values: 0/1/X per bit, up to 64 bits wide.
//!
//! A bit flagged in `xmask` is unknown; its `bits` entry is kept 0. All
//! operators are monotone in X: resolving an unknown input bit to 0 or 1
//! never changes an output bit that was already known.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Value {
    pub width: u32,
    pub bits: u64,
    pub xmask: u64,
}

#[inline]
pub fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl Value {
    pub fn new(width: u32, bits: u64, xmask: u64) -> Value {
        let m = width_mask(width);
        let xmask = xmask & m;
        Value { width, bits: bits & m & !xmask, xmask }
    }

    pub fn known(width: u32, bits: u64) -> Value {
        Value::new(width, bits, 0)
    }

    pub fn all_x(width: u32) -> Value {
        Value::new(width, 0, width_mask(width))
    }

    pub fn zero(width: u32) -> Value {
        Value::known(width, 0)
    }

    pub fn bit1(b: bool) -> Value {
        Value::known(1, b as u64)
    }

    pub fn x1() -> Value {
        Value::all_x(1)
    }

    pub fn is_fully_known(&self) -> bool {
        self.xmask == 0
    }

    pub fn has_x(&self) -> bool {
        self.xmask != 0
    }

    /// Known numeric value, if no bit is X.
    pub fn as_u64(&self) -> Option<u64> {
        if self.xmask == 0 {
            Some(self.bits)
        } else {
            None
        }
    }

    /// Truncate or zero-extend to `width` (extension bits are known 0).
    pub fn resize(&self, width: u32) -> Value {
        Value::new(width, self.bits, self.xmask)
    }

    /// Three-valued truthiness: Some(true) if any bit is known 1,
    /// Some(false) if every bit is known 0, None if unresolvable.
    pub fn truthiness(&self) -> Option<bool> {
        if self.bits != 0 {
            return Some(true);
        }
        if self.xmask == 0 {
            return Some(false);
        }
        None
    }

    /// MSB-first binary string, `x` for unknown bits.
    pub fn to_bin_string(&self) -> String {
        let mut s = String::with_capacity(self.width as usize);
        for i in (0..self.width).rev() {
            let m = 1u64 << i;
            if self.xmask & m != 0 {
                s.push('x');
            } else if self.bits & m != 0 {
                s.push('1');
            } else {
                s.push('0');
            }
        }
        s
    }

    /// Parse an MSB-first binary string with `x` digits.
    pub fn from_bin_string(s: &str) -> Option<Value> {
        let width = s.len() as u32;
        if width == 0 || width > 64 {
            return None;
        }
        let mut bits = 0u64;
        let mut xmask = 0u64;
        for c in s.chars() {
            bits <<= 1;
            xmask <<= 1;
            match c {
                '0' => {}
                '1' => bits |= 1,
                'x' | 'X' => xmask |= 1,
                _ => return None,
            }
        }
        Some(Value::new(width, bits, xmask))
    }

    pub fn get_bit(&self, i: u32) -> Value {
        if i >= self.width {
            return Value::x1();
        }
        let m = 1u64 << i;
        if self.xmask & m != 0 {
            Value::x1()
        } else {
            Value::bit1(self.bits & m != 0)
        }
    }

    pub fn slice(&self, msb: u32, lsb: u32) -> Value {
        let w = msb - lsb + 1;
        Value::new(w, self.bits >> lsb, self.xmask >> lsb)
    }

    /// Write `v` into bits [msb:lsb] of self.
    pub fn with_slice(&self, msb: u32, lsb: u32, v: Value) -> Value {
        let w = msb - lsb + 1;
        let m = width_mask(w) << lsb;
        let bits = (self.bits & !m) | ((v.bits << lsb) & m);
        let xmask = (self.xmask & !m) | ((v.xmask << lsb) & m);
        Value::new(self.width, bits, xmask)
    }

    // --- arithmetic: any X operand bit poisons the whole result ---

    fn arith(a: Value, b: Value, w: u32, f: impl Fn(u64, u64) -> u64) -> Value {
        if a.has_x() || b.has_x() {
            return Value::all_x(w);
        }
        Value::known(w, f(a.bits, b.bits))
    }

    pub fn add(a: Value, b: Value, w: u32) -> Value {
        Self::arith(a, b, w, |x, y| x.wrapping_add(y))
    }

    pub fn sub(a: Value, b: Value, w: u32) -> Value {
        Self::arith(a, b, w, |x, y| x.wrapping_sub(y))
    }

    pub fn mul(a: Value, b: Value, w: u32) -> Value {
        Self::arith(a, b, w, |x, y| x.wrapping_mul(y))
    }

    /// Division by zero yields all-X.
    pub fn div(a: Value, b: Value, w: u32) -> Value {
        if a.has_x() || b.has_x() || b.bits == 0 {
            return Value::all_x(w);
        }
        Value::known(w, a.bits / b.bits)
    }

    pub fn rem(a: Value, b: Value, w: u32) -> Value {
        if a.has_x() || b.has_x() || b.bits == 0 {
            return Value::all_x(w);
        }
        Value::known(w, a.bits % b.bits)
    }

    pub fn neg(a: Value, w: u32) -> Value {
        if a.has_x() {
            return Value::all_x(w);
        }
        Value::known(w, a.bits.wrapping_neg())
    }

    // --- bitwise: per-bit dominance keeps known bits known ---

    pub fn bit_and(a: Value, b: Value, w: u32) -> Value {
        let a = a.resize(w);
        let b = b.resize(w);
        // known 0 on either side dominates
        let known_zero = (!a.bits & !a.xmask) | (!b.bits & !b.xmask);
        let bits = a.bits & b.bits;
        let xmask = (a.xmask | b.xmask) & !known_zero;
        Value::new(w, bits, xmask)
    }

    pub fn bit_or(a: Value, b: Value, w: u32) -> Value {
        let a = a.resize(w);
        let b = b.resize(w);
        let known_one = a.bits | b.bits;
        let bits = known_one;
        let xmask = (a.xmask | b.xmask) & !known_one;
        Value::new(w, bits, xmask)
    }

    pub fn bit_xor(a: Value, b: Value, w: u32) -> Value {
        let a = a.resize(w);
        let b = b.resize(w);
        let xmask = a.xmask | b.xmask;
        Value::new(w, (a.bits ^ b.bits) & !xmask, xmask)
    }

    pub fn bit_not(a: Value, w: u32) -> Value {
        let a = a.resize(w);
        Value::new(w, !a.bits & !a.xmask, a.xmask)
    }

    // --- shifts: X amount poisons; known amount shifts xmask along ---

    pub fn shl(a: Value, amount: Value, w: u32) -> Value {
        let a = a.resize(w);
        match amount.as_u64() {
            None => Value::all_x(w),
            Some(k) if k >= w as u64 => Value::zero(w),
            Some(k) => Value::new(w, a.bits << k, a.xmask << k),
        }
    }

    pub fn shr(a: Value, amount: Value, w: u32) -> Value {
        let a = a.resize(w);
        match amount.as_u64() {
            None => Value::all_x(w),
            Some(k) if k >= w as u64 => Value::zero(w),
            Some(k) => Value::new(w, a.bits >> k, a.xmask >> k),
        }
    }

    // --- comparisons ---

    /// Equality with partial knowledge: a definite bit difference gives a
    /// known 0 even when other bits are X.
    pub fn eq(a: Value, b: Value) -> Value {
        let w = a.width.max(b.width);
        let a = a.resize(w);
        let b = b.resize(w);
        let both_known = !a.xmask & !b.xmask;
        if (a.bits ^ b.bits) & both_known != 0 {
            return Value::bit1(false);
        }
        if a.xmask | b.xmask != 0 {
            return Value::x1();
        }
        Value::bit1(true)
    }

    pub fn ne(a: Value, b: Value) -> Value {
        let r = Self::eq(a, b);
        if r.has_x() {
            r
        } else {
            Value::bit1(r.bits == 0)
        }
    }

    fn cmp_known(a: Value, b: Value, f: impl Fn(u64, u64) -> bool) -> Value {
        if a.has_x() || b.has_x() {
            return Value::x1();
        }
        Value::bit1(f(a.bits, b.bits))
    }

    pub fn lt(a: Value, b: Value) -> Value {
        Self::cmp_known(a, b, |x, y| x < y)
    }

    pub fn le(a: Value, b: Value) -> Value {
        Self::cmp_known(a, b, |x, y| x <= y)
    }

    pub fn gt(a: Value, b: Value) -> Value {
        Self::cmp_known(a, b, |x, y| x > y)
    }

    pub fn ge(a: Value, b: Value) -> Value {
        Self::cmp_known(a, b, |x, y| x >= y)
    }

    // --- logical ---

    pub fn log_and(a: Value, b: Value) -> Value {
        match (a.truthiness(), b.truthiness()) {
            (Some(false), _) | (_, Some(false)) => Value::bit1(false),
            (Some(true), Some(true)) => Value::bit1(true),
            _ => Value::x1(),
        }
    }

    pub fn log_or(a: Value, b: Value) -> Value {
        match (a.truthiness(), b.truthiness()) {
            (Some(true), _) | (_, Some(true)) => Value::bit1(true),
            (Some(false), Some(false)) => Value::bit1(false),
            _ => Value::x1(),
        }
    }

    pub fn log_not(a: Value) -> Value {
        match a.truthiness() {
            Some(b) => Value::bit1(!b),
            None => Value::x1(),
        }
    }

    // --- reductions ---

    pub fn red_and(a: Value) -> Value {
        let m = width_mask(a.width);
        if (!a.bits & !a.xmask) & m != 0 {
            return Value::bit1(false);
        }
        if a.xmask != 0 {
            return Value::x1();
        }
        Value::bit1(true)
    }

    pub fn red_or(a: Value) -> Value {
        if a.bits != 0 {
            return Value::bit1(true);
        }
        if a.xmask != 0 {
            return Value::x1();
        }
        Value::bit1(false)
    }

    pub fn red_xor(a: Value) -> Value {
        if a.has_x() {
            return Value::x1();
        }
        Value::bit1(a.bits.count_ones() % 2 == 1)
    }

    /// Bitwise merge for a ternary with an unknown condition: keep bits the
    /// branches agree on, X elsewhere.
    pub fn merge(a: Value, b: Value, w: u32) -> Value {
        let a = a.resize(w);
        let b = b.resize(w);
        let agree = !(a.bits ^ b.bits) & !a.xmask & !b.xmask;
        Value::new(w, a.bits & agree, width_mask(w) & !agree)
    }

    pub fn concat(parts: &[Value]) -> Value {
        let mut bits = 0u64;
        let mut xmask = 0u64;
        let mut width = 0u32;
        for p in parts {
            bits = (bits << p.width) | p.bits;
            xmask = (xmask << p.width) | p.xmask;
            width += p.width;
        }
        Value::new(width.min(64), bits, xmask)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'b{}", self.width, self.to_bin_string())
    }
}
