//! Deterministic seeded sampling. Every sample point derives its randomness
//! from (seed, index), so results do not depend on how work is scheduled and
//! growing the sample count keeps the existing prefix.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::shrinkage::operator::BoxDomain;

/// Independent RNG stream for one sample index under a run seed.
pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform sample from a finite box.
pub fn sample_in_box(rng: &mut ChaCha8Rng, domain: &BoxDomain) -> Vec<f64> {
    debug_assert!(domain.is_finite(), "sampling requires finite bounds");
    domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(lo, hi)| {
            if lo == hi {
                *lo
            } else {
                rng.gen_range(*lo..*hi)
            }
        })
        .collect()
}

/// Uniform direction on the unit sphere.
pub fn sample_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Effective worker count: PROXATLAS_THREADS when set (>= 1), else the
/// machine's available parallelism.
pub fn thread_cap() -> usize {
    if let Ok(v) = std::env::var("PROXATLAS_THREADS") {
        if let Ok(k) = v.trim().parse::<usize>() {
            return k.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
}

/// Map `f` over `0..count` using up to `thread_cap()` scoped threads. The
/// output order is by index, independent of the schedule.
pub fn parallel_map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = thread_cap().min(count.max(1));
    if workers <= 1 || count < 2 {
        return (0..count).map(f).collect();
    }
    let chunk = count.div_ceil(workers);
    let mut out: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut rest = out.as_mut_slice();
        let mut start = 0;
        let mut handles = Vec::new();
        while !rest.is_empty() {
            let take = chunk.min(rest.len());
            let (head, tail) = rest.split_at_mut(take);
            rest = tail;
            let base = start;
            start += take;
            let f = &f;
            handles.push(scope.spawn(move || {
                for (offset, slot) in head.iter_mut().enumerate() {
                    *slot = Some(f(base + offset));
                }
            }));
        }
        for h in handles {
            h.join().expect("sample worker panicked");
        }
    });
    out.into_iter().map(|v| v.expect("all slots filled")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_deterministic_and_independent() {
        let mut a = rng_for(7, 3);
        let mut b = rng_for(7, 3);
        let mut c = rng_for(7, 4);
        let xa: f64 = a.gen_range(0.0..1.0);
        let xb: f64 = b.gen_range(0.0..1.0);
        let xc: f64 = c.gen_range(0.0..1.0);
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn box_samples_stay_inside() {
        let domain = BoxDomain::cube(3, -2.0, 5.0).unwrap();
        for k in 0..100 {
            let mut rng = rng_for(1, k);
            assert!(domain.contains(&sample_in_box(&mut rng, &domain)));
        }
    }

    #[test]
    fn parallel_map_matches_sequential() {
        let seq: Vec<u64> = (0..100).map(|i| (i as u64) * 3 + 1).collect();
        let par = parallel_map_indexed(100, |i| (i as u64) * 3 + 1);
        assert_eq!(seq, par);
    }
}
