//! Deterministic seeding and a worker pool whose results never depend on
//! scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

static WORKERS: AtomicUsize = AtomicUsize::new(1);

/// Set the number of worker threads used by [`par_map`]. Values below 1 are
/// clamped to 1. Results are identical for any worker count.
pub fn set_workers(n: usize) {
    WORKERS.store(n.max(1), Ordering::SeqCst);
}

pub fn workers() -> usize {
    WORKERS.load(Ordering::SeqCst)
}

/// SplitMix64 finalizer; the standard 64-bit avalanche.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a sequence of tags. Stable across
/// platforms and releases; every consumer of randomness in the engine gets its
/// seed through this function so that runs are reproducible bit for bit.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t));
    }
    s
}

/// FNV-1a hash of a string, used to fold identifiers into seed tags.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

pub fn rng_from(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}

/// Map `f` over `0..n`, fanning out across the configured worker threads.
/// Output order matches input order and each call of `f` receives only its
/// index, so the result is independent of how work interleaves.
pub fn par_map<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    let k = workers().min(n.max(1));
    if k <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..k {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = f(i);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.expect("worker filled every slot"))
        .collect()
}
