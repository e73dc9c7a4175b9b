//! Batch evaluation of the log-fidelity and RLF kernels over sample sets.
//!
//! Everything downstream of the scalar kernels (classification, the
//! semi-supervised epoch loop, sweeps) reduces to dense matrices of
//! pairwise kernel values, and at MNIST scale those matrices are the
//! entire compute budget. This module provides that engine with one hard
//! guarantee: **every path produces values bit-identical to the scalar
//! [`crate::qkernel::log_fidelity`] call** — the fast paths are pure
//! re-implementations of the same pinned reduction order, so callers may
//! mix scalar and batch evaluation freely without reproducibility drift.
//!
//! Fast paths:
//! * **Byte quantization.** Features loaded from 8-bit image data only
//!   take the 256 values `b/255`. When a whole sample set is quantized,
//!   per-feature log terms come from a 256×256 lookup table (the table is
//!   filled by calling the same scalar term function, so values are
//!   bit-identical by construction). Equal 8-byte feature runs — the vast
//!   majority on MNIST, where most pixels are background zero in both
//!   samples — are folded into a counted constant term without touching
//!   the table.
//! * **Shared-block symmetry.** The semi-supervised engine scores one
//!   sample list against (pool ++ test); the pool×pool block is symmetric
//!   and only its upper triangle is computed, the rest mirrored. The
//!   |Δ|-before-cos term definition makes mirroring bit-exact.
//! * **β reuse.** The log-fidelity matrix is β-independent; a β sweep
//!   computes it once and maps it through `β^F` per grid point.

use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::mat::Mat;
use crate::qkernel::{log_fid_equal_term, log_fid_sum, log_fid_term, rlf_from_log_fidelity, Sample};

/// Byte-quantized mirror of one feature vector: `Some(bytes)` iff every
/// feature is exactly representable as `b/255` for a byte `b` (true for
/// anything loaded from 8-bit image data).
fn quantize_features(features: &[f64]) -> Option<Vec<u8>> {
    features
        .iter()
        .map(|&v| {
            let b = (v * 255.0).round();
            if (0.0..=255.0).contains(&b) && b as u8 as f64 / 255.0 == v {
                Some(b as u8)
            } else {
                None
            }
        })
        .collect()
}

/// Quantizes a whole sample set, or `None` if any sample is off-grid.
fn quantize<'a, I: IntoIterator<Item = &'a Sample>>(samples: I) -> Option<Vec<Vec<u8>>> {
    samples
        .into_iter()
        .map(|s| quantize_features(s.features()))
        .collect()
}

/// Cached 256×256 tables of `log_fid_term(b1/255, b2/255, ε)`, keyed by the
/// bit pattern of ε. One entry in practice; the map guards against mixed-ε
/// use.
fn term_table(epsilon: f64) -> Arc<[f64]> {
    static TABLES: OnceLock<Mutex<Vec<(u64, Arc<[f64]>)>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(Vec::new()));
    let key = epsilon.to_bits();
    let mut guard = tables.lock().unwrap();
    if let Some((_, t)) = guard.iter().find(|(k, _)| *k == key) {
        return Arc::clone(t);
    }
    let mut table = vec![0.0f64; 256 * 256];
    for b1 in 0..256usize {
        for b2 in 0..256usize {
            table[b1 * 256 + b2] =
                log_fid_term(b1 as f64 / 255.0, b2 as f64 / 255.0, epsilon);
        }
    }
    let table: Arc<[f64]> = table.into();
    guard.push((key, Arc::clone(&table)));
    table
}

/// Byte-path evaluation of the canonical log-fidelity sum.
///
/// Replicates [`log_fid_sum`] exactly: the same per-feature equal/unequal
/// classification (byte equality ⇔ f64 equality, since b → b/255 is
/// injective), the same four-accumulator pattern over differing features,
/// the same final combine. The only shortcut is comparing eight bytes at a
/// time to skip equal runs wholesale.
fn log_fid_bytes(xb: &[u8], yb: &[u8], table: &[f64], equal_term: f64) -> f64 {
    debug_assert_eq!(xb.len(), yb.len());
    let mut acc = [0.0f64; 4];
    let mut unequal = 0usize;
    let mut equal = 0usize;

    let mut xc = xb.chunks_exact(8);
    let mut yc = yb.chunks_exact(8);
    for (cx, cy) in (&mut xc).zip(&mut yc) {
        let wx = u64::from_ne_bytes(cx.try_into().unwrap());
        let wy = u64::from_ne_bytes(cy.try_into().unwrap());
        if wx == wy {
            equal += 8;
        } else {
            for (&a, &b) in cx.iter().zip(cy) {
                if a == b {
                    equal += 1;
                } else {
                    acc[unequal & 3] += table[a as usize * 256 + b as usize];
                    unequal += 1;
                }
            }
        }
    }
    for (&a, &b) in xc.remainder().iter().zip(yc.remainder()) {
        if a == b {
            equal += 1;
        } else {
            acc[unequal & 3] += table[a as usize * 256 + b as usize];
            unequal += 1;
        }
    }

    let spread = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    spread + (equal as f64) * equal_term
}

/// Dense matrix of log-fidelity values, `out[r][c] = F(rows[r], cols[c])`.
///
/// All samples must share one dimensionality (callers validate when
/// datasets are assembled; mixed dimensions panic here).
pub(crate) fn log_fid_matrix(rows: &[Sample], cols: &[Sample], epsilon: f64) -> Mat {
    let mut out = Mat::zeros(rows.len(), cols.len());
    if rows.is_empty() || cols.is_empty() {
        return out;
    }
    let n_cols = cols.len();

    let quantized = quantize(rows).zip(quantize(cols));
    if let Some((rb, cb)) = quantized {
        let table = term_table(epsilon);
        let equal_term = log_fid_equal_term(epsilon);
        out.data_mut()
            .par_chunks_mut(n_cols)
            .enumerate()
            .for_each(|(r, row)| {
                for (c, cell) in row.iter_mut().enumerate() {
                    *cell = log_fid_bytes(&rb[r], &cb[c], &table, equal_term);
                }
            });
    } else {
        out.data_mut()
            .par_chunks_mut(n_cols)
            .enumerate()
            .for_each(|(r, row)| {
                for (c, cell) in row.iter_mut().enumerate() {
                    *cell = log_fid_sum(rows[r].features(), cols[c].features(), epsilon);
                }
            });
    }
    out
}

/// Log-fidelity matrix for the semi-supervised layout:
/// rows = `labeled ++ pool`, columns = `pool ++ test`.
///
/// The pool×pool block appears with identical ordering on both axes, so
/// only its upper triangle (including the diagonal) is evaluated; the
/// lower triangle is mirrored afterwards. Bit-equality of the mirror is
/// guaranteed by the symmetric term definition.
pub(crate) fn log_fid_matrix_shared(
    labeled: &[Sample],
    pool: &[Sample],
    test: &[Sample],
    epsilon: f64,
) -> Mat {
    let n_labeled = labeled.len();
    let n_pool = pool.len();
    let n_cols = n_pool + test.len();
    let mut out = Mat::zeros(n_labeled + n_pool, n_cols);
    if n_cols == 0 || (n_labeled + n_pool) == 0 {
        return out;
    }

    let row_samples: Vec<&Sample> = labeled.iter().chain(pool.iter()).collect();
    let col_samples: Vec<&Sample> = pool.iter().chain(test.iter()).collect();

    let byte_data = quantize(row_samples.iter().copied())
        .zip(quantize(col_samples.iter().copied()))
        .map(|(rb, cb)| (rb, cb, term_table(epsilon), log_fid_equal_term(epsilon)));

    out.data_mut()
        .par_chunks_mut(n_cols)
        .enumerate()
        .for_each(|(r, row)| {
            // Pool rows skip the part of the pool block mirrored later.
            let start = if r < n_labeled { 0 } else { r - n_labeled };
            match &byte_data {
                Some((rb, cb, table, equal_term)) => {
                    for c in start..n_cols {
                        row[c] = log_fid_bytes(&rb[r], &cb[c], table, *equal_term);
                    }
                }
                None => {
                    for c in start..n_cols {
                        row[c] = log_fid_sum(
                            row_samples[r].features(),
                            col_samples[c].features(),
                            epsilon,
                        );
                    }
                }
            }
        });

    // Mirror the pool×pool lower triangle, in cache-friendly tiles.
    const B: usize = 64;
    for ib in (0..n_pool).step_by(B) {
        for jb in (0..=ib).step_by(B) {
            for i in ib..(ib + B).min(n_pool) {
                let i_row = n_labeled + i;
                for j in jb..(jb + B).min(i) {
                    let v = out.at(n_labeled + j, i);
                    out.set(i_row, j, v);
                }
            }
        }
    }
    out
}

/// Maps a log-fidelity matrix through `F ↦ β^F` elementwise, in place.
pub(crate) fn into_rlf(mut f: Mat, beta: f64) -> Mat {
    f.data_mut()
        .par_chunks_mut(4096)
        .for_each(|chunk| {
            for v in chunk {
                *v = rlf_from_log_fidelity(*v, beta);
            }
        });
    f
}

/// Dense RLF matrix, `out[r][c] = rlf(rows[r], cols[c])`.
pub(crate) fn rlf_matrix(rows: &[Sample], cols: &[Sample], epsilon: f64, beta: f64) -> Mat {
    into_rlf(log_fid_matrix(rows, cols, epsilon), beta)
}

/// Dense Euclidean distance matrix (canonical scalar path per pair — the
/// baselines are not hot enough to justify a quantized variant).
pub(crate) fn euclidean_matrix(rows: &[Sample], cols: &[Sample]) -> Mat {
    let mut out = Mat::zeros(rows.len(), cols.len());
    if rows.is_empty() || cols.is_empty() {
        return out;
    }
    let n_cols = cols.len();
    out.data_mut()
        .par_chunks_mut(n_cols)
        .enumerate()
        .for_each(|(r, row)| {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = crate::qkernel::euclidean_slice(rows[r].features(), cols[c].features());
            }
        });
    out
}
