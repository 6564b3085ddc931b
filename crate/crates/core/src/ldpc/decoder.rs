//! Extended min-sum decoding over GF(64) with full 64-entry message vectors.
//!
//! Messages are kept in the cost domain: entry `a` of a vector is how much
//! less likely symbol `a` is than the best symbol, so the most likely symbol
//! has cost 0. Every vector is normalised by subtracting its minimum.

use super::matrix::syndrome_of;
use super::{symbols_to_bits, Codeword, LdpcError, ParityCheckMatrix, CODE_BITS, K, N};
use crate::gf64::{Gf64, ORDER, SYMBOL_BITS};
use crate::scalar::Real;

type Vector<T> = [T; ORDER];

/// Per-position log-domain reliabilities: for each of the 162 codeword
/// positions, one value per candidate symbol. Larger is more likely.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSequence<T: Real> {
    reliabilities: Vec<Vector<T>>,
}

impl<T: Real> ReceivedSequence<T> {
    /// Lifts 972 per-bit soft values (positive favours bit 0) to symbol
    /// reliabilities: `L_j[a] = sum_i (bit_i(a) ? -lambda_i : +lambda_i)`.
    pub fn from_bit_soft(soft: &[T]) -> Result<Self, LdpcError> {
        if soft.len() != CODE_BITS {
            return Err(LdpcError::SymbolCount { expected: CODE_BITS, got: soft.len() });
        }
        let reliabilities = soft
            .chunks_exact(SYMBOL_BITS)
            .map(|lambda| {
                let mut v = [T::zero(); ORDER];
                for (a, slot) in v.iter_mut().enumerate() {
                    *slot = lambda.iter().enumerate().fold(T::zero(), |acc, (i, &l)| {
                        if a >> (SYMBOL_BITS - 1 - i) & 1 == 1 {
                            acc - l
                        } else {
                            acc + l
                        }
                    });
                }
                v
            })
            .collect();
        Ok(ReceivedSequence { reliabilities })
    }

    /// Takes reliability vectors directly; all entries must be finite.
    pub fn from_reliabilities(reliabilities: Vec<Vector<T>>) -> Result<Self, LdpcError> {
        if reliabilities.len() != N {
            return Err(LdpcError::SymbolCount { expected: N, got: reliabilities.len() });
        }
        if reliabilities.iter().flatten().any(|v| !v.is_finite()) {
            return Err(LdpcError::Dimension("non-finite reliability".into()));
        }
        Ok(ReceivedSequence { reliabilities })
    }

    /// Noise-free antipodal soft values (`+1` for bit 0, `-1` for bit 1).
    pub fn noiseless(codeword: &Codeword) -> Self {
        let soft: Vec<T> = codeword
            .to_bits()
            .into_iter()
            .map(|b| if b == 0 { T::one() } else { -T::one() })
            .collect();
        Self::from_bit_soft(&soft).expect("codeword has 972 bits")
    }

    pub fn reliabilities(&self) -> &[Vector<T>] {
        &self.reliabilities
    }

    /// Symbol-wise maximum-reliability decision.
    pub fn hard_decision(&self) -> Vec<Gf64> {
        self.reliabilities
            .iter()
            .map(|v| Gf64::from_low_bits(argmax(v) as u8))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// The 81 information symbols of the final decision.
    pub message: Vec<Gf64>,
    pub codeword: Codeword,
    /// Including the initial hard-decision pass, so a frame that is already
    /// a codeword reports 1.
    pub iterations_used: usize,
    pub converged: bool,
}

impl DecodeResult {
    /// The 486 message bits.
    pub fn message_bits(&self) -> Vec<u8> {
        symbols_to_bits(&self.message)
    }
}

struct Edge {
    col: usize,
    /// `mul[x] = h * x` for this edge's coefficient.
    mul: [u8; ORDER],
}

/// Reusable decoder bound to one parity-check matrix.
pub struct Decoder {
    h: ParityCheckMatrix,
    row_start: Vec<usize>,
    edges: Vec<Edge>,
    /// Per column: indices into `edges`.
    col_edges: Vec<Vec<usize>>,
    itr_max: usize,
}

fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn argmin<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

fn normalize<T: Real>(v: &mut Vector<T>) {
    let m = v.iter().copied().fold(T::infinity(), T::min);
    for x in v.iter_mut() {
        *x = *x - m;
    }
}

/// `out[z] = min_{x ^ y = z} a[x] + b[y]`.
fn min_conv<T: Real>(a: &Vector<T>, b: &Vector<T>) -> Vector<T> {
    let mut out = [T::infinity(); ORDER];
    for (x, &ax) in a.iter().enumerate() {
        for (y, &by) in b.iter().enumerate() {
            let s = ax + by;
            let o = &mut out[x ^ y];
            if s < *o {
                *o = s;
            }
        }
    }
    out
}

impl Decoder {
    pub fn new(h: &ParityCheckMatrix, itr_max: usize) -> Self {
        assert!(itr_max >= 1, "itr_max must be at least 1");
        let mut row_start = Vec::with_capacity(h.rows() + 1);
        let mut edges = Vec::new();
        let mut col_edges = vec![Vec::new(); N];
        for r in 0..h.rows() {
            row_start.push(edges.len());
            for &(col, e) in h.row(r) {
                let mut mul = [0u8; ORDER];
                for (x, m) in mul.iter_mut().enumerate() {
                    *m = (e * Gf64::from_low_bits(x as u8)).value();
                }
                col_edges[col].push(edges.len());
                edges.push(Edge { col, mul });
            }
        }
        row_start.push(edges.len());
        Decoder { h: h.clone(), row_start, edges, col_edges, itr_max }
    }

    pub fn itr_max(&self) -> usize {
        self.itr_max
    }

    pub fn parity_matrix(&self) -> &ParityCheckMatrix {
        &self.h
    }

    fn finish(&self, hard: Vec<Gf64>, iterations_used: usize, converged: bool) -> DecodeResult {
        debug_assert!(!converged || syndrome_of(&hard, &self.h).iter().all(|s| s.is_zero()));
        DecodeResult { message: hard[..K].to_vec(), codeword: Codeword(hard), iterations_used, converged }
    }

    fn satisfied(&self, hard: &[Gf64]) -> bool {
        syndrome_of(hard, &self.h).iter().all(|s| s.is_zero())
    }

    pub fn decode<T: Real>(&self, y: &ReceivedSequence<T>) -> DecodeResult {
        let channel: Vec<Vector<T>> = y
            .reliabilities
            .iter()
            .map(|l| {
                let m = l.iter().copied().fold(T::neg_infinity(), T::max);
                let mut c = [T::zero(); ORDER];
                for (ci, &li) in c.iter_mut().zip(l) {
                    *ci = m - li;
                }
                c
            })
            .collect();
        let mut hard: Vec<Gf64> = channel.iter().map(|c| Gf64::from_low_bits(argmin(c) as u8)).collect();
        let mut itr = 1;
        if self.satisfied(&hard) {
            return self.finish(hard, itr, true);
        }

        let mut v2c: Vec<Vector<T>> = self.edges.iter().map(|e| channel[e.col]).collect();
        let mut c2v: Vec<Vector<T>> = vec![[T::zero(); ORDER]; self.edges.len()];
        let mut forward: Vec<Vector<T>> = Vec::new();
        let mut backward: Vec<Vector<T>> = Vec::new();
        let mut lifted: Vec<Vector<T>> = Vec::new();

        while itr < self.itr_max {
            // Check-node update.
            for r in 0..self.h.rows() {
                let span = self.row_start[r]..self.row_start[r + 1];
                let d = span.len();
                lifted.clear();
                for e in span.clone() {
                    let mut u = [T::infinity(); ORDER];
                    for (x, &cost) in v2c[e].iter().enumerate() {
                        u[self.edges[e].mul[x] as usize] = cost;
                    }
                    lifted.push(u);
                }
                forward.clear();
                forward.push(lifted[0]);
                for t in 1..d - 1 {
                    let next = min_conv(&forward[t - 1], &lifted[t]);
                    forward.push(next);
                }
                backward.clear();
                backward.resize(d, [T::zero(); ORDER]);
                backward[d - 1] = lifted[d - 1];
                for t in (1..d - 1).rev() {
                    backward[t] = min_conv(&backward[t + 1], &lifted[t]);
                }
                for (k, e) in span.enumerate() {
                    let w = if d == 1 {
                        let mut z = [T::infinity(); ORDER];
                        z[0] = T::zero();
                        z
                    } else if k == 0 {
                        backward[1]
                    } else if k == d - 1 {
                        forward[d - 2]
                    } else {
                        min_conv(&forward[k - 1], &backward[k + 1])
                    };
                    let msg = &mut c2v[e];
                    for (x, m) in msg.iter_mut().enumerate() {
                        *m = w[self.edges[e].mul[x] as usize];
                    }
                    normalize(msg);
                }
            }
            // Variable-node update and decision.
            for (j, es) in self.col_edges.iter().enumerate() {
                let mut total = channel[j];
                for &e in es {
                    for (t, &m) in total.iter_mut().zip(&c2v[e]) {
                        *t = *t + m;
                    }
                }
                hard[j] = Gf64::from_low_bits(argmin(&total) as u8);
                for &e in es {
                    let out = &mut v2c[e];
                    for ((o, &t), &m) in out.iter_mut().zip(&total).zip(&c2v[e]) {
                        *o = t - m;
                    }
                    normalize(out);
                }
            }
            itr += 1;
            if self.satisfied(&hard) {
                return self.finish(hard, itr, true);
            }
        }
        self.finish(hard, itr, false)
    }
}

/// One-shot decode; prefer [`Decoder`] when decoding many frames.
pub fn decode<T: Real>(y: &ReceivedSequence<T>, h: &ParityCheckMatrix, itr_max: usize) -> DecodeResult {
    Decoder::new(h, itr_max).decode(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{derive_generator, encode, syndrome, synthetic_parity_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bit_lifting_prefers_transmitted_symbol() {
        let soft: Vec<f64> = (0..972).map(|i| if i % 7 == 0 { -0.8 } else { 1.3 }).collect();
        let y = ReceivedSequence::from_bit_soft(&soft).unwrap();
        let bits: Vec<u8> = soft.iter().map(|&s| (s < 0.0) as u8).collect();
        assert_eq!(symbols_to_bits(&y.hard_decision()), bits);
    }

    #[test]
    fn noiseless_codeword_converges_in_one_pass() {
        let h = synthetic_parity_matrix();
        let g = derive_generator(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m: Vec<Gf64> = (0..K).map(|_| Gf64::from_low_bits(rng.random())).collect();
        let c = encode(&m, &g).unwrap();
        let r = decode(&ReceivedSequence::<f32>::noiseless(&c), &h, 10);
        assert!(r.converged);
        assert_eq!(r.iterations_used, 1);
        assert_eq!(r.message, m);
    }

    #[test]
    fn corrects_single_symbol_error() {
        let h = synthetic_parity_matrix();
        let dec = Decoder::new(&h, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let mut c = Codeword::zero();
            let pos = rng.random_range(0..N);
            c.0[pos] = Gf64::from_low_bits(rng.random_range(1..64));
            let r = dec.decode(&ReceivedSequence::<f64>::noiseless(&c));
            assert!(r.converged);
            assert!(r.codeword.0.iter().all(|s| s.is_zero()));
            assert!(r.iterations_used > 1);
        }
    }

    #[test]
    fn pure_noise_fails() {
        let h = synthetic_parity_matrix();
        let dec = Decoder::new(&h, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let soft: Vec<f64> = (0..972).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = dec.decode(&ReceivedSequence::from_bit_soft(&soft).unwrap());
            assert!(!r.converged);
            assert_eq!(r.iterations_used, 5);
            assert!(syndrome(&r.codeword, &h).iter().any(|s| !s.is_zero()));
        }
    }

    #[test]
    fn itr_max_one_only_checks_hard_decision() {
        let h = synthetic_parity_matrix();
        let mut c = Codeword::zero();
        c.0[3] = Gf64::ONE;
        let r = decode(&ReceivedSequence::<f64>::noiseless(&c), &h, 1);
        assert!(!r.converged);
        assert_eq!(r.iterations_used, 1);
    }

    #[test]
    fn rejects_wrong_soft_length() {
        assert!(ReceivedSequence::<f64>::from_bit_soft(&[0.0; 10]).is_err());
        let mut v = vec![[0.0f64; 64]; N];
        v[0][0] = f64::NAN;
        assert!(ReceivedSequence::from_reliabilities(v).is_err());
    }
}
