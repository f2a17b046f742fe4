use std::fmt;

use super::StabilizerError;

/// A Hermitian Pauli string `±P_0 ⊗ … ⊗ P_{n-1}` stored as packed X/Z masks.
///
/// Qubit `q` carries `X` when only its x bit is set, `Z` when only its z bit
/// is set and `Y` when both are set.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    negative: bool,
}

pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

impl PauliOperator {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        Self {
            n,
            x: vec![0; w],
            z: vec![0; w],
            negative: false,
        }
    }

    /// Builds `±X_q` style single-qubit operators; `x`/`z` select the letter.
    pub fn single(n: usize, q: usize, x: bool, z: bool) -> Self {
        let mut p = Self::identity(n);
        p.set(q, x, z);
        p
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    /// Overall sign as `+1` or `-1`.
    pub fn sign(&self) -> i8 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    pub fn set_negative(&mut self, negative: bool) {
        self.negative = negative;
    }

    pub fn x_bit(&self, q: usize) -> bool {
        self.x[q / 64] >> (q % 64) & 1 == 1
    }

    pub fn z_bit(&self, q: usize) -> bool {
        self.z[q / 64] >> (q % 64) & 1 == 1
    }

    pub fn set(&mut self, q: usize, x: bool, z: bool) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let (w, b) = (q / 64, q % 64);
        self.x[w] = (self.x[w] & !(1 << b)) | ((x as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((z as u64) << b);
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    /// GF(2) symplectic form: 0 when the operators commute, 1 otherwise.
    pub fn symplectic_inner(&self, other: &Self) -> Result<u8, StabilizerError> {
        if self.n != other.n {
            return Err(StabilizerError::LengthMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let mut acc = 0u32;
        for i in 0..self.x.len() {
            acc ^= ((self.x[i] & other.z[i]) ^ (self.z[i] & other.x[i])).count_ones();
        }
        Ok((acc & 1) as u8)
    }

    pub fn commutes_with(&self, other: &Self) -> Result<bool, StabilizerError> {
        Ok(self.symplectic_inner(other)? == 0)
    }

    /// Left-multiplies `other` by `self`, returning the product and the power
    /// of `i` it carries (mod 4). For commuting operands the power is 0 or 2
    /// and is folded into the sign of the result.
    pub fn mul_with_phase(&self, other: &Self) -> Result<(Self, u8), StabilizerError> {
        if self.n != other.n {
            return Err(StabilizerError::LengthMismatch {
                left: self.n,
                right: other.n,
            });
        }
        // Hermitian P(x,z) = i^{x.z} X^x Z^z, and X^a Z^b X^c Z^d = (-1)^{b.c} X^{a+c} Z^{b+d}.
        let mut e: u32 = 0;
        let mut x = vec![0u64; self.x.len()];
        let mut z = vec![0u64; self.x.len()];
        for i in 0..self.x.len() {
            let (x1, z1, x2, z2) = (self.x[i], self.z[i], other.x[i], other.z[i]);
            e += (x1 & z1).count_ones();
            e += (x2 & z2).count_ones();
            e += 2 * (z1 & x2).count_ones();
            x[i] = x1 ^ x2;
            z[i] = z1 ^ z2;
            e += 3 * (x[i] & z[i]).count_ones();
        }
        e += 2 * (self.negative as u32 + other.negative as u32);
        let e = (e % 4) as u8;
        let negative = e >= 2;
        let product = Self {
            n: self.n,
            x,
            z,
            negative,
        };
        Ok((product, e % 2))
    }

    /// Parses strings like `"+XIZ"`, `"-YY"` or `"XZ"` (qubit 0 first).
    pub fn parse(s: &str) -> Result<Self, StabilizerError> {
        let (negative, body) = match s.as_bytes().first() {
            Some(b'+') => (false, &s[1..]),
            Some(b'-') => (true, &s[1..]),
            _ => (false, s),
        };
        let n = body.chars().count();
        if n == 0 {
            return Err(StabilizerError::Parse(s.to_string()));
        }
        let mut p = Self::identity(n);
        for (q, c) in body.chars().enumerate() {
            let (x, z) = match c {
                'I' | '_' => (false, false),
                'X' => (true, false),
                'Y' => (true, true),
                'Z' => (false, true),
                _ => return Err(StabilizerError::Parse(s.to_string())),
            };
            p.set(q, x, z);
        }
        p.negative = negative;
        Ok(p)
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.negative { "-" } else { "+" })?;
        for q in 0..self.n {
            let c = match (self.x_bit(q), self.z_bit(q)) {
                (false, false) => 'I',
                (true, false) => 'X',
                (true, true) => 'Y',
                (false, true) => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliOperator({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliOperator {
        PauliOperator::parse(s).unwrap()
    }

    #[test]
    fn symplectic_examples() {
        assert_eq!(p("XI").symplectic_inner(&p("ZI")).unwrap(), 1);
        assert_eq!(p("XI").symplectic_inner(&p("XI")).unwrap(), 0);
        // X0 Z1 against Z0 X1: two anticommuting sites cancel.
        assert_eq!(p("XZ").symplectic_inner(&p("ZX")).unwrap(), 0);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            p("X").symplectic_inner(&p("XX")),
            Err(StabilizerError::LengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn products_track_phase() {
        // XZ = -iY
        let (prod, imag) = p("X").mul_with_phase(&p("Z")).unwrap();
        assert_eq!(prod.to_string(), "-Y");
        assert_eq!(imag, 1);
        // ZX = iY
        let (prod, imag) = p("Z").mul_with_phase(&p("X")).unwrap();
        assert_eq!(prod.to_string(), "+Y");
        assert_eq!(imag, 1);
        // (XX)(ZZ) = -YY, commuting
        let (prod, imag) = p("XX").mul_with_phase(&p("ZZ")).unwrap();
        assert_eq!(prod.to_string(), "-YY");
        assert_eq!(imag, 0);
        let (prod, _) = p("-YZ").mul_with_phase(&p("YZ")).unwrap();
        assert_eq!(prod.to_string(), "-II");
    }

    #[test]
    fn display_round_trip() {
        for s in ["+XYZI", "-IIII", "+Z"] {
            assert_eq!(p(s).to_string(), s);
        }
        assert!(PauliOperator::parse("XQ").is_err());
        assert!(PauliOperator::parse("+").is_err());
    }

    #[test]
    fn multiword_masks() {
        let mut a = PauliOperator::identity(130);
        a.set(129, true, false);
        a.set(3, false, true);
        let b = PauliOperator::single(130, 129, false, true);
        assert_eq!(a.symplectic_inner(&b).unwrap(), 1);
        assert_eq!(a.weight(), 2);
    }
}
