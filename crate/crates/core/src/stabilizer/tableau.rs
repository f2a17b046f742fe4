use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pauli::{words_for, PauliOperator};
use super::StabilizerError;
use crate::clifford::CliffordGate2Q;
use crate::gf2::BitMatrix;

/// Result of a projective `Z` measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    /// `+1` or `-1`.
    pub value: i8,
    /// True when the outcome was drawn with probability 1/2.
    pub was_random: bool,
}

/// Deterministic gates with textbook conjugation rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixtureGate {
    H(usize),
    S(usize),
    Cnot { control: usize, target: usize },
    Swap(usize, usize),
}

impl FromStr for FixtureGate {
    type Err = StabilizerError;

    /// Accepts `H 0`, `S 3`, `CNOT 0 1`, `SWAP 2 5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let name = parts.next().unwrap_or_default().to_ascii_uppercase();
        let args: Vec<usize> = parts
            .map(|p| p.parse().map_err(|_| StabilizerError::UnknownGate(s.into())))
            .collect::<Result<_, _>>()?;
        match (name.as_str(), args.as_slice()) {
            ("H", [q]) => Ok(Self::H(*q)),
            ("S", [q]) => Ok(Self::S(*q)),
            ("CNOT" | "CX", [c, t]) => Ok(Self::Cnot {
                control: *c,
                target: *t,
            }),
            ("SWAP", [a, b]) => Ok(Self::Swap(*a, *b)),
            _ => Err(StabilizerError::UnknownGate(s.into())),
        }
    }
}

/// Destabilizer/stabilizer tableau of a pure `n`-qubit stabilizer state.
///
/// Storage is column-major: for every qubit `j` there is an X column and a Z
/// column of `2 * half` words, where the first `half` words hold the bits of
/// destabilizer rows `0..n` and the next `half` words those of stabilizer
/// rows `0..n`. Gates therefore touch two columns; measurements sweep rows
/// word-parallel with bit-sliced phase counters.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Tableau {
    n: usize,
    half: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    r: Vec<u64>,
}

impl std::fmt::Debug for Tableau {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut d = f.debug_struct("Tableau");
        d.field("n_qubits", &self.n);
        if self.n <= 16 {
            let de: Vec<String> = (0..self.n).map(|i| self.destabilizer(i).to_string()).collect();
            let st: Vec<String> = (0..self.n).map(|i| self.stabilizer(i).to_string()).collect();
            d.field("destabilizers", &de).field("stabilizers", &st);
        }
        d.finish()
    }
}

#[inline]
fn prefix_xor(mut y: u64) -> u64 {
    y ^= y << 1;
    y ^= y << 2;
    y ^= y << 4;
    y ^= y << 8;
    y ^= y << 16;
    y ^= y << 32;
    y
}

impl Tableau {
    /// `|0…0⟩`: stabilizer `i` is `+Z_i`, destabilizer `i` is `+X_i`.
    pub fn new_zero_state(n: usize) -> Result<Self, StabilizerError> {
        if n == 0 {
            return Err(StabilizerError::EmptyRegister);
        }
        let half = words_for(n);
        let stride = 2 * half;
        let mut t = Self {
            n,
            half,
            x: vec![0; n * stride],
            z: vec![0; n * stride],
            r: vec![0; stride],
        };
        for q in 0..n {
            t.x[q * stride + q / 64] |= 1 << (q % 64);
            t.z[q * stride + half + q / 64] |= 1 << (q % 64);
        }
        Ok(t)
    }

    /// Builds a tableau from explicit rows and checks every invariant.
    pub fn from_rows(destabilizers: &[PauliOperator], stabilizers: &[PauliOperator]) -> Result<Self, StabilizerError> {
        let n = stabilizers.len();
        let mut t = Self::new_zero_state(n)?;
        if destabilizers.len() != n {
            return Err(StabilizerError::Invalid(format!(
                "{} destabilizers for {n} stabilizers",
                destabilizers.len()
            )));
        }
        t.x.fill(0);
        t.z.fill(0);
        t.r.fill(0);
        for (row, p) in destabilizers.iter().chain(stabilizers).enumerate() {
            if p.n_qubits() != n {
                return Err(StabilizerError::LengthMismatch {
                    left: n,
                    right: p.n_qubits(),
                });
            }
            let (w, b) = t.row_pos(row);
            for q in 0..n {
                let base = q * t.stride();
                t.x[base + w] |= (p.x_bit(q) as u64) << b;
                t.z[base + w] |= (p.z_bit(q) as u64) << b;
            }
            t.r[w] |= (p.is_negative() as u64) << b;
        }
        t.validate()?;
        Ok(t)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn stride(&self) -> usize {
        2 * self.half
    }

    /// Word and bit of tableau row `row` (destabilizers first, then stabilizers).
    #[inline]
    fn row_pos(&self, row: usize) -> (usize, u32) {
        if row < self.n {
            (row / 64, (row % 64) as u32)
        } else {
            let k = row - self.n;
            (self.half + k / 64, (k % 64) as u32)
        }
    }

    fn check_qubit(&self, q: usize) -> Result<(), StabilizerError> {
        if q >= self.n {
            Err(StabilizerError::QubitOutOfRange { qubit: q, n: self.n })
        } else {
            Ok(())
        }
    }

    fn row(&self, row: usize) -> PauliOperator {
        let (w, b) = self.row_pos(row);
        let mut p = PauliOperator::identity(self.n);
        for q in 0..self.n {
            let base = q * self.stride();
            let xb = self.x[base + w] >> b & 1 == 1;
            let zb = self.z[base + w] >> b & 1 == 1;
            if xb || zb {
                p.set(q, xb, zb);
            }
        }
        p.set_negative(self.r[w] >> b & 1 == 1);
        p
    }

    pub fn stabilizer(&self, i: usize) -> PauliOperator {
        assert!(i < self.n);
        self.row(self.n + i)
    }

    pub fn destabilizer(&self, i: usize) -> PauliOperator {
        assert!(i < self.n);
        self.row(i)
    }

    pub fn stabilizers(&self) -> Vec<PauliOperator> {
        (0..self.n).map(|i| self.stabilizer(i)).collect()
    }

    pub fn destabilizers(&self) -> Vec<PauliOperator> {
        (0..self.n).map(|i| self.destabilizer(i)).collect()
    }

    /// Stabilizer-half X and Z words of qubit column `q`.
    pub(crate) fn stabilizer_columns(&self, q: usize) -> (&[u64], &[u64]) {
        let base = q * self.stride() + self.half;
        (&self.x[base..base + self.half], &self.z[base..base + self.half])
    }

    /// Checks symplectic orthonormality and full rank of the 2n rows.
    pub fn validate(&self) -> Result<(), StabilizerError> {
        let rows: Vec<PauliOperator> = (0..2 * self.n).map(|i| self.row(i)).collect();
        let n = self.n;
        for i in 0..2 * n {
            for j in (i + 1)..2 * n {
                let want = u8::from(j == i + n);
                if rows[i].symplectic_inner(&rows[j])? != want {
                    return Err(StabilizerError::Invalid(format!(
                        "rows {i} and {j} have symplectic product {}",
                        1 - want
                    )));
                }
            }
        }
        let mut m = BitMatrix::zeros(2 * n, 2 * n);
        for (i, p) in rows.iter().enumerate() {
            for q in 0..n {
                m.set(i, q, p.x_bit(q));
                m.set(i, n + q, p.z_bit(q));
            }
        }
        if m.rank() != 2 * n {
            return Err(StabilizerError::Invalid("rows are linearly dependent".into()));
        }
        Ok(())
    }

    /// Conjugates every row by `gate` acting on `(qa, qb)`.
    pub fn apply_two_qubit_clifford(
        &mut self,
        gate: &CliffordGate2Q,
        qa: usize,
        qb: usize,
    ) -> Result<(), StabilizerError> {
        self.check_qubit(qa)?;
        self.check_qubit(qb)?;
        if qa == qb {
            return Err(StabilizerError::RepeatedQubit(qa));
        }
        let k = gate.kernel();
        let stride = self.stride();
        let (a0, b0) = (qa * stride, qb * stride);
        for w in 0..stride {
            let inp = [self.x[a0 + w], self.z[a0 + w], self.x[b0 + w], self.z[b0 + w]];
            if inp[0] | inp[1] | inp[2] | inp[3] == 0 {
                continue;
            }
            let mut mono = [0u64; 16];
            mono[0] = !0;
            for v in 1..16usize {
                mono[v] = mono[v & (v - 1)] & inp[v.trailing_zeros() as usize];
            }
            let mut flip = 0u64;
            let mut terms = k.anf;
            while terms != 0 {
                flip ^= mono[terms.trailing_zeros() as usize];
                terms &= terms - 1;
            }
            let out = k.lin.map(|sel| {
                (0..4).fold(0u64, |acc, i| {
                    acc ^ (inp[i] & 0u64.wrapping_sub(((sel >> i) & 1) as u64))
                })
            });
            self.x[a0 + w] = out[0];
            self.z[a0 + w] = out[1];
            self.x[b0 + w] = out[2];
            self.z[b0 + w] = out[3];
            self.r[w] ^= flip;
        }
        Ok(())
    }

    pub fn apply_fixture_gate(&mut self, gate: FixtureGate) -> Result<(), StabilizerError> {
        let stride = self.stride();
        match gate {
            FixtureGate::H(q) => {
                self.check_qubit(q)?;
                let base = q * stride;
                for w in 0..stride {
                    let (x, z) = (self.x[base + w], self.z[base + w]);
                    self.r[w] ^= x & z;
                    self.x[base + w] = z;
                    self.z[base + w] = x;
                }
            }
            FixtureGate::S(q) => {
                self.check_qubit(q)?;
                let base = q * stride;
                for w in 0..stride {
                    let (x, z) = (self.x[base + w], self.z[base + w]);
                    self.r[w] ^= x & z;
                    self.z[base + w] = z ^ x;
                }
            }
            FixtureGate::Cnot { control, target } => {
                self.check_qubit(control)?;
                self.check_qubit(target)?;
                if control == target {
                    return Err(StabilizerError::RepeatedQubit(control));
                }
                let (c, t) = (control * stride, target * stride);
                for w in 0..stride {
                    let (xc, zc) = (self.x[c + w], self.z[c + w]);
                    let (xt, zt) = (self.x[t + w], self.z[t + w]);
                    self.r[w] ^= xc & zt & !(xt ^ zc);
                    self.x[t + w] = xt ^ xc;
                    self.z[c + w] = zc ^ zt;
                }
            }
            FixtureGate::Swap(a, b) => {
                self.check_qubit(a)?;
                self.check_qubit(b)?;
                if a == b {
                    return Err(StabilizerError::RepeatedQubit(a));
                }
                for w in 0..stride {
                    self.x.swap(a * stride + w, b * stride + w);
                    self.z.swap(a * stride + w, b * stride + w);
                }
            }
        }
        Ok(())
    }

    /// Applies a fixture gate given by name, e.g. `"CNOT"` with targets `[0, 1]`.
    pub fn apply_named_gate(&mut self, name: &str, targets: &[usize]) -> Result<(), StabilizerError> {
        let gate = match (name.to_ascii_uppercase().as_str(), targets) {
            ("H", [q]) => FixtureGate::H(*q),
            ("S", [q]) => FixtureGate::S(*q),
            ("CNOT" | "CX", [c, t]) => FixtureGate::Cnot {
                control: *c,
                target: *t,
            },
            ("SWAP", [a, b]) => FixtureGate::Swap(*a, *b),
            _ => return Err(StabilizerError::UnknownGate(name.to_string())),
        };
        self.apply_fixture_gate(gate)
    }

    /// First stabilizer with an X or Y on qubit `q`, if any.
    fn random_pivot(&self, q: usize) -> Option<usize> {
        let base = q * self.stride() + self.half;
        self.x[base..base + self.half]
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
    }

    /// Outcome of measuring `Z_q` if it is deterministic, without touching the state.
    pub fn deterministic_z(&self, q: usize) -> Result<Option<i8>, StabilizerError> {
        self.check_qubit(q)?;
        if self.random_pivot(q).is_some() {
            return Ok(None);
        }
        Ok(Some(if self.deterministic_sign(q) { -1 } else { 1 }))
    }

    /// Projective `Z_q` measurement with Born-rule outcome.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<MeasurementOutcome, StabilizerError> {
        self.check_qubit(q)?;
        match self.random_pivot(q) {
            Some(k) => {
                let negative = rng.random::<bool>();
                self.collapse(q, k, negative);
                Ok(MeasurementOutcome {
                    value: if negative { -1 } else { 1 },
                    was_random: true,
                })
            }
            None => Ok(MeasurementOutcome {
                value: if self.deterministic_sign(q) { -1 } else { 1 },
                was_random: false,
            }),
        }
    }

    /// Measures `Z_q` forcing `value` when the outcome is random.
    ///
    /// Returns `None` when `value` has probability zero.
    pub fn measure_z_postselected(
        &mut self,
        q: usize,
        value: i8,
    ) -> Result<Option<MeasurementOutcome>, StabilizerError> {
        self.check_qubit(q)?;
        match self.random_pivot(q) {
            Some(k) => {
                self.collapse(q, k, value < 0);
                Ok(Some(MeasurementOutcome {
                    value,
                    was_random: true,
                }))
            }
            None => {
                let v = if self.deterministic_sign(q) { -1 } else { 1 };
                Ok((v == value).then_some(MeasurementOutcome {
                    value,
                    was_random: false,
                }))
            }
        }
    }

    /// Sign of `Z_q` in the stabilizer group (true for `-Z_q`).
    ///
    /// `Z_q` is the product of the stabilizers whose destabilizer has an X on
    /// `q`. Writing each row as `i^{x·z} X^x Z^z`, the product phase is
    /// `i^{Σ x_a·z_a} (-1)^{Σ_{a<b} z_a·x_b}`, evaluated per column with a
    /// prefix parity over the selected rows.
    fn deterministic_sign(&self, q: usize) -> bool {
        let stride = self.stride();
        let half = self.half;
        let sel_base = q * stride;
        let mut xz = 0u32;
        let mut pairs = 0u32;
        for j in 0..self.n {
            let base = j * stride + half;
            let mut carry = 0u64;
            for w in 0..half {
                let d = self.x[sel_base + w];
                if d == 0 {
                    continue;
                }
                let xs = self.x[base + w] & d;
                let zs = self.z[base + w] & d;
                xz += (xs & zs).count_ones();
                let below = (prefix_xor(zs) << 1) ^ carry;
                pairs += (xs & below).count_ones();
                carry ^= 0u64.wrapping_sub((zs.count_ones() & 1) as u64);
            }
        }
        let signs: u32 = (0..half)
            .map(|w| (self.r[half + w] & self.x[sel_base + w]).count_ones())
            .sum();
        let e = (xz + 2 * pairs + 2 * signs) % 4;
        debug_assert!(
            e.is_multiple_of(2),
            "product of commuting stabilizers must be Hermitian"
        );
        e == 2
    }

    /// Random-outcome update with pivot stabilizer `k`.
    fn collapse(&mut self, q: usize, k: usize, negative: bool) {
        let stride = self.stride();
        let half = self.half;
        let (pw, pb) = (half + k / 64, k % 64);
        let mut mask: Vec<u64> = self.x[q * stride..(q + 1) * stride].to_vec();
        mask[pw] &= !(1u64 << pb);
        let mut lo = vec![0u64; stride];
        let mut hi = vec![0u64; stride];
        for j in 0..self.n {
            let base = j * stride;
            let sx = self.x[base + pw] >> pb & 1 == 1;
            let sz = self.z[base + pw] >> pb & 1 == 1;
            let xs = &mut self.x[base..base + stride];
            let zs = &mut self.z[base..base + stride];
            match (sx, sz) {
                (false, false) => continue,
                (true, false) => rowsum_column(xs, zs, &mask, &mut lo, &mut hi, |x, z| (x & z, !x & z), true, false),
                (false, true) => rowsum_column(xs, zs, &mask, &mut lo, &mut hi, |x, z| (x & !z, x & z), false, true),
                (true, true) => rowsum_column(xs, zs, &mask, &mut lo, &mut hi, |x, z| (!x & z, x & !z), true, true),
            }
        }
        let rp = 0u64.wrapping_sub(self.r[pw] >> pb & 1);
        for w in 0..stride {
            self.r[w] ^= (hi[w] ^ rp) & mask[w];
        }
        // Destabilizer k takes the old pivot row; the pivot becomes ±Z_q.
        let dw = k / 64;
        let bit = 1u64 << pb;
        for j in 0..self.n {
            let base = j * stride;
            for v in [&mut self.x, &mut self.z] {
                let moved = v[base + pw] & bit;
                v[base + dw] = (v[base + dw] & !bit) | moved;
                v[base + pw] &= !bit;
            }
        }
        self.r[dw] = (self.r[dw] & !bit) | (self.r[pw] & bit);
        self.z[q * stride + pw] |= bit;
        self.r[pw] = (self.r[pw] & !bit) | if negative { bit } else { 0 };
    }

    /// Extends the register with one more qubit in `|0⟩` at index `n`.
    pub fn with_extra_qubit(&self) -> Self {
        let n = self.n + 1;
        let mut t = Self::new_zero_state(n).expect("n >= 1");
        let (old_half, new_half) = (self.half, t.half);
        let (old_stride, new_stride) = (self.stride(), t.stride());
        for j in 0..self.n {
            let (src, dst) = (j * old_stride, j * new_stride);
            for v in [(&self.x, &mut t.x), (&self.z, &mut t.z)] {
                let (from, to) = v;
                to[dst..dst + new_stride].fill(0);
                to[dst..dst + old_half].copy_from_slice(&from[src..src + old_half]);
                to[dst + new_half..dst + new_half + old_half].copy_from_slice(&from[src + old_half..src + old_stride]);
            }
        }
        t.r.fill(0);
        t.r[..old_half].copy_from_slice(&self.r[..old_half]);
        t.r[new_half..new_half + old_half].copy_from_slice(&self.r[old_half..]);
        t
    }
}

/// One column of the bit-sliced rowsum: counts the `i`-power contributed by
/// this qubit into the mod-4 counters `(lo, hi)` for every masked row, then
/// XORs the pivot's letter into those rows.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn rowsum_column(
    xs: &mut [u64],
    zs: &mut [u64],
    mask: &[u64],
    lo: &mut [u64],
    hi: &mut [u64],
    plus_minus: impl Fn(u64, u64) -> (u64, u64),
    sx: bool,
    sz: bool,
) {
    for w in 0..mask.len() {
        let m = mask[w];
        if m == 0 {
            continue;
        }
        let (x, z) = (xs[w], zs[w]);
        let (plus, minus) = plus_minus(x, z);
        let (plus, minus) = (plus & m, minus & m);
        let carry = lo[w] & plus;
        lo[w] ^= plus;
        hi[w] ^= carry;
        let borrow = !lo[w] & minus;
        lo[w] ^= minus;
        hi[w] ^= borrow;
        if sx {
            xs[w] = x ^ m;
        }
        if sz {
            zs[w] = z ^ m;
        }
    }
}
