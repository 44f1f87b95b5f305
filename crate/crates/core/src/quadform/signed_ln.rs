//! Signed log-magnitude scalars.
//!
//! The series terms combine factorials, powers of eigenvalue ratios and
//! noncentralities whose individual magnitudes overflow or underflow f64
//! long before their product does. Every intermediate in the derivative
//! recursion is therefore carried as `sign * exp(ln)`, and only final
//! per-term values are converted back.

/// A real number represented as `sign * exp(ln)`. Zero is `sign == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLn {
    sign: i8,
    ln: f64,
}

impl SignedLn {
    pub const ZERO: SignedLn = SignedLn {
        sign: 0,
        ln: f64::NEG_INFINITY,
    };

    pub fn new(sign: i8, ln: f64) -> Self {
        if sign == 0 || ln == f64::NEG_INFINITY {
            SignedLn::ZERO
        } else {
            SignedLn { sign, ln }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            SignedLn::ZERO
        } else {
            SignedLn {
                sign: if x > 0.0 { 1 } else { -1 },
                ln: x.abs().ln(),
            }
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    /// Natural log of the magnitude (`-inf` for zero).
    pub fn ln_abs(self) -> f64 {
        self.ln
    }

    /// Converts back to f64; saturates to `+/-inf` outside range.
    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.ln.exp()
        }
    }

    /// Multiplies by `exp(delta)`.
    pub fn scale_ln(self, delta: f64) -> SignedLn {
        if self.sign == 0 {
            return SignedLn::ZERO;
        }
        SignedLn {
            sign: self.sign,
            ln: self.ln + delta,
        }
    }
}

impl std::ops::Mul for SignedLn {
    type Output = SignedLn;

    fn mul(self, other: SignedLn) -> SignedLn {
        if self.sign == 0 || other.sign == 0 {
            return SignedLn::ZERO;
        }
        SignedLn {
            sign: self.sign * other.sign,
            ln: self.ln + other.ln,
        }
    }
}

impl std::ops::Neg for SignedLn {
    type Output = SignedLn;

    fn neg(self) -> SignedLn {
        SignedLn {
            sign: -self.sign,
            ln: self.ln,
        }
    }
}

impl std::ops::Add for SignedLn {
    type Output = SignedLn;

    fn add(self, other: SignedLn) -> SignedLn {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        let (big, small) = if self.ln >= other.ln {
            (self, other)
        } else {
            (other, self)
        };
        let d = small.ln - big.ln; // <= 0
        if big.sign == small.sign {
            SignedLn {
                sign: big.sign,
                ln: big.ln + d.exp().ln_1p(),
            }
        } else {
            let e = d.exp();
            if e >= 1.0 {
                SignedLn::ZERO
            } else {
                SignedLn::new(big.sign, big.ln + (-e).ln_1p())
            }
        }
    }
}
