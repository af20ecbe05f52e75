//! Deterministic chunked map over particle indices.
//!
//! Work is split into fixed-size index chunks; each chunk fills its own
//! accumulator and the per-chunk results are returned in chunk order. Callers
//! merge them sequentially, so the final result is bitwise identical for any
//! number of worker threads — parallelism only changes who computes a chunk,
//! never the merge order.

use alloc::vec::Vec;
use core::ops::Range;

pub const DEFAULT_CHUNK: usize = 4096;

fn chunk_ranges(n: usize, chunk: usize) -> Vec<Range<usize>> {
    assert!(chunk > 0);
    (0..n.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect()
}

/// Runs `fill` over every index in `0..n`, grouped into chunks, and returns
/// the per-chunk accumulators in chunk order.
#[cfg(feature = "rayon")]
pub fn chunked<A, M, F>(n: usize, chunk: usize, make: M, fill: F) -> Vec<A>
where
    A: Send,
    M: Fn() -> A + Sync,
    F: Fn(&mut A, usize) + Sync,
{
    use rayon::prelude::*;
    chunk_ranges(n, chunk)
        .into_par_iter()
        .map(|range| {
            let mut acc = make();
            for i in range {
                fill(&mut acc, i);
            }
            acc
        })
        .collect()
}

#[cfg(not(feature = "rayon"))]
pub fn chunked<A, M, F>(n: usize, chunk: usize, make: M, fill: F) -> Vec<A>
where
    A: Send,
    M: Fn() -> A + Sync,
    F: Fn(&mut A, usize) + Sync,
{
    chunk_ranges(n, chunk)
        .into_iter()
        .map(|range| {
            let mut acc = make();
            for i in range {
                fill(&mut acc, i);
            }
            acc
        })
        .collect()
}

/// Convenience wrapper: chunked fill followed by an in-order merge.
pub fn chunked_merge<A, M, F, G>(n: usize, chunk: usize, make: M, fill: F, mut merge: G) -> A
where
    A: Send,
    M: Fn() -> A + Sync,
    F: Fn(&mut A, usize) + Sync,
    G: FnMut(&mut A, A),
{
    let mut parts = chunked(n, chunk, &make, fill).into_iter();
    let mut total = parts.next().unwrap_or_else(make);
    for part in parts {
        merge(&mut total, part);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covers_every_index_exactly_once() {
        for (n, chunk) in [(0, 5), (1, 5), (12, 5), (4096, 4096), (10_001, 77)] {
            let mut seen = vec![0u32; n];
            for acc in chunked(n, chunk, Vec::new, |v: &mut Vec<usize>, i| v.push(i)) {
                for i in acc {
                    seen[i] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1), "n={n}, chunk={chunk}");
        }
    }

    #[test]
    fn merge_result_is_independent_of_chunk_size() {
        let weighted_sum = |chunk: usize| {
            chunked_merge(
                1000,
                chunk,
                || 0u64,
                |acc, i| *acc += (i as u64).wrapping_mul(2654435761),
                |a, b| *a = a.wrapping_add(b),
            )
        };
        let reference = weighted_sum(1000);
        for chunk in [1, 7, 64, 4096] {
            assert_eq!(weighted_sum(chunk), reference);
        }
    }
}
