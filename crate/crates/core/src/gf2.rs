//! Dense bit matrices over GF(2).

/// Row-major bit matrix with rows packed into `u64` words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64);
        Self {
            rows,
            cols,
            words,
            data: vec![0; rows * words],
        }
    }

    pub fn identity(k: usize) -> Self {
        let mut m = Self::zeros(k, k);
        for i in 0..k {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from equal-length rows of bits.
    ///
    /// Panics if the rows are ragged.
    pub fn from_rows<R: AsRef<[bool]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged row {i}");
            for (j, &b) in r.iter().enumerate() {
                m.set(i, j, b);
            }
        }
        m
    }

    /// Parses rows written as `"0110"` strings.
    pub fn from_strs(rows: &[&str]) -> Self {
        let bits: Vec<Vec<bool>> = rows.iter().map(|r| r.chars().map(|c| c == '1').collect()).collect();
        Self::from_rows(&bits)
    }

    /// Builds a matrix whose rows are already packed into words.
    pub fn from_word_rows<'a>(cols: usize, rows: impl IntoIterator<Item = &'a [u64]>) -> Self {
        let words = cols.div_ceil(64);
        let mut data = Vec::new();
        let mut n = 0;
        for r in rows {
            assert_eq!(r.len(), words);
            data.extend_from_slice(r);
            n += 1;
        }
        Self {
            rows: n,
            cols,
            words,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        assert!(i < self.rows && j < self.cols);
        let w = &mut self.data[i * self.words + j / 64];
        let bit = 1u64 << (j % 64);
        if v {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    /// Rank over GF(2); works on a copy.
    pub fn rank(&self) -> usize {
        self.clone().into_rank()
    }

    /// Rank over GF(2), consuming the matrix as scratch space.
    pub fn into_rank(mut self) -> usize {
        let w = self.words;
        let mut rank = 0;
        for col in 0..self.cols {
            if rank == self.rows {
                break;
            }
            let (cw, bit) = (col / 64, 1u64 << (col % 64));
            let Some(pivot) = (rank..self.rows).find(|&r| self.data[r * w + cw] & bit != 0) else {
                continue;
            };
            if pivot != rank {
                for k in cw..w {
                    self.data.swap(pivot * w + k, rank * w + k);
                }
            }
            let (top, rest) = self.data.split_at_mut((rank + 1) * w);
            let prow = &top[rank * w..];
            for row in rest.chunks_exact_mut(w) {
                if row[cw] & bit != 0 {
                    for k in cw..w {
                        row[k] ^= prow[k];
                    }
                }
            }
            rank += 1;
        }
        rank
    }
}

/// Rank over GF(2) of `m`.
pub fn gf2_rank(m: &BitMatrix) -> usize {
    m.rank()
}
