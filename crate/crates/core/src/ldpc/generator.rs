use super::{Codeword, LdpcError, ParityCheckMatrix, K, M, N};
use crate::gf64::Gf64;

/// Dense systematic generator matrix `G = [I | P]` (81 x 162).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    /// `parity[j][i]`: contribution of information symbol `i` to parity
    /// symbol `j`, i.e. `P^T`.
    parity: Vec<Vec<Gf64>>,
}

impl GeneratorMatrix {
    /// Entry `G[row][col]`.
    pub fn get(&self, row: usize, col: usize) -> Gf64 {
        if col < K {
            if row == col {
                Gf64::ONE
            } else {
                Gf64::ZERO
            }
        } else {
            self.parity[col - K][row]
        }
    }

    /// Dense copy (row-major, 81 x 162).
    pub fn to_dense(&self) -> Vec<Vec<Gf64>> {
        (0..K).map(|r| (0..N).map(|c| self.get(r, c)).collect()).collect()
    }
}

fn eliminate(rows: &mut [Vec<Gf64>], ncols_pivot: usize) -> Result<(), usize> {
    let n = rows.len();
    for step in 0..ncols_pivot.min(n) {
        let pivot = (step..n).find(|&r| !rows[r][step].is_zero()).ok_or(step)?;
        rows.swap(step, pivot);
        let inv = rows[step][step].inv().expect("pivot is nonzero");
        for v in rows[step].iter_mut() {
            *v = *v * inv;
        }
        let pivot_row = rows[step].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r == step || row[step].is_zero() {
                continue;
            }
            let f = row[step];
            for (v, &p) in row.iter_mut().zip(&pivot_row) {
                *v = *v + f * p;
            }
        }
    }
    Ok(())
}

fn rank(mut rows: Vec<Vec<Gf64>>) -> usize {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].inv().expect("nonzero");
        let pr: Vec<Gf64> = rows[r].iter().map(|&v| v * inv).collect();
        for row in rows.iter_mut().skip(r + 1) {
            let f = row[c];
            if !f.is_zero() {
                for (v, &p) in row.iter_mut().zip(&pr) {
                    *v = *v + f * p;
                }
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

/// Derives the systematic generator with information symbols in positions
/// `0..81` and parity in `81..162`.
///
/// Writing `H = [A | B]`, a codeword `[m | p]` satisfies `A m + B p = 0`,
/// so `p = B^{-1} A m` (characteristic 2).
pub fn derive_generator(h: &ParityCheckMatrix) -> Result<GeneratorMatrix, LdpcError> {
    let dense = h.to_dense();
    let r = rank(dense.clone());
    if r < M {
        return Err(LdpcError::RankDeficient { pivot_row: r });
    }
    // Augmented [B | A].
    let mut aug: Vec<Vec<Gf64>> = dense
        .iter()
        .map(|row| row[K..].iter().chain(&row[..K]).copied().collect())
        .collect();
    eliminate(&mut aug, M).map_err(|pivot_row| LdpcError::SingularParityBlock { pivot_row })?;
    let parity = aug.into_iter().map(|row| row[M..].to_vec()).collect();
    Ok(GeneratorMatrix { parity })
}

/// `c = m G`.
pub fn encode(message: &[Gf64], g: &GeneratorMatrix) -> Result<Codeword, LdpcError> {
    if message.len() != K {
        return Err(LdpcError::SymbolCount { expected: K, got: message.len() });
    }
    let mut c = Vec::with_capacity(N);
    c.extend_from_slice(message);
    for row in &g.parity {
        c.push(row.iter().zip(message).fold(Gf64::ZERO, |acc, (&p, &m)| acc + p * m));
    }
    Ok(Codeword(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{syndrome, synthetic_parity_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_message(rng: &mut ChaCha8Rng) -> Vec<Gf64> {
        (0..K).map(|_| Gf64::from_low_bits(rng.random())).collect()
    }

    /// Dense `G H^T`, computed without the sparse structure.
    fn g_times_ht(g: &GeneratorMatrix, h: &ParityCheckMatrix) -> Vec<Vec<Gf64>> {
        let gd = g.to_dense();
        let hd = h.to_dense();
        gd.iter()
            .map(|grow| {
                hd.iter()
                    .map(|hrow| grow.iter().zip(hrow).fold(Gf64::ZERO, |a, (&x, &y)| a + x * y))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn generator_is_orthogonal_to_h() {
        let h = synthetic_parity_matrix();
        let g = derive_generator(&h).unwrap();
        assert!(g_times_ht(&g, &h).iter().flatten().all(|v| v.is_zero()));
        for r in 0..K {
            for c in 0..K {
                assert_eq!(g.get(r, c), if r == c { Gf64::ONE } else { Gf64::ZERO });
            }
        }
    }

    #[test]
    fn identity_parity_block_gives_trivial_parity() {
        // H = [I | I]: parity symbol j must equal information symbol j.
        let h = ParityCheckMatrix::from_entries((0..81).flat_map(|r| [(r, r, 1), (r, r + 81, 1)])).unwrap();
        let g = derive_generator(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_message(&mut rng);
        let c = encode(&m, &g).unwrap();
        assert_eq!(&c.0[..81], &c.0[81..]);
    }

    #[test]
    fn unit_messages_encode_to_codewords() {
        let h = synthetic_parity_matrix();
        let g = derive_generator(&h).unwrap();
        for i in 0..K {
            let mut m = vec![Gf64::ZERO; K];
            m[i] = Gf64::ONE;
            let c = encode(&m, &g).unwrap();
            assert!(syndrome(&c, &h).iter().all(|s| s.is_zero()), "unit message {i}");
        }
    }

    #[test]
    fn systematic_and_linear() {
        let h = synthetic_parity_matrix();
        let g = derive_generator(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(encode(&vec![Gf64::ZERO; K], &g).unwrap(), Codeword::zero());
        for _ in 0..1000 {
            let m = random_message(&mut rng);
            let c = encode(&m, &g).unwrap();
            assert_eq!(c.message(), &m[..]);
            assert!(syndrome(&c, &h).iter().all(|s| s.is_zero()));
        }
        for _ in 0..100 {
            let a = random_message(&mut rng);
            let b = random_message(&mut rng);
            let sum: Vec<Gf64> = a.iter().zip(&b).map(|(&x, &y)| x + y).collect();
            let ca = encode(&a, &g).unwrap();
            let cb = encode(&b, &g).unwrap();
            let cs = encode(&sum, &g).unwrap();
            let expect: Vec<Gf64> = ca.0.iter().zip(&cb.0).map(|(&x, &y)| x + y).collect();
            assert_eq!(cs.0, expect);
        }
    }

    #[test]
    fn perturbation_breaks_syndrome() {
        let h = synthetic_parity_matrix();
        let g = derive_generator(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c = encode(&random_message(&mut rng), &g).unwrap();
        for pos in 0..N {
            let mut bad = c.clone();
            bad.0[pos] = bad.0[pos] + Gf64::from_low_bits(rng.random_range(1..64));
            assert!(syndrome(&bad, &h).iter().any(|s| !s.is_zero()), "position {pos}");
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        // Rows 0 and 1 identical: rank 80.
        let mut e: Vec<(usize, usize, u8)> = (0..81).flat_map(|r| [(r, r, 1), (r, r + 81, 1)]).collect();
        e.retain(|&(r, _, _)| r != 1);
        e.extend([(1, 0, 1), (1, 81, 1)]);
        let h = ParityCheckMatrix::from_entries(e).unwrap();
        assert!(matches!(derive_generator(&h), Err(LdpcError::RankDeficient { pivot_row: 80 })));
    }

    #[test]
    fn singular_parity_block_is_reported() {
        // Full rank via the information part, but parity column 81 is empty.
        let e = (0..81).flat_map(|r| {
            let mut v = vec![(r, r, 1u8)];
            if r > 0 {
                v.push((r, r + 81, 1));
            }
            v
        });
        let h = ParityCheckMatrix::from_entries(e).unwrap();
        assert!(matches!(derive_generator(&h), Err(LdpcError::SingularParityBlock { pivot_row: 0 })));
    }

    #[test]
    fn wrong_message_length() {
        let g = derive_generator(&synthetic_parity_matrix()).unwrap();
        assert_eq!(encode(&[Gf64::ZERO; 3], &g), Err(LdpcError::SymbolCount { expected: 81, got: 3 }));
    }
}
