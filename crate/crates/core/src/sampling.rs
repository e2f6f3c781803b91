//! Deterministic low-discrepancy point sets over boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Hyperbox;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    r
}

/// Randomly shifted Halton lattice over `region`, preceded by the box
/// corners (up to 2^10 of them) and its center. Deterministic in `seed`.
pub fn lattice(region: &Hyperbox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = region.dim();
    assert!(n <= PRIMES.len(), "lattice supports up to {} dimensions", PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut points = Vec::with_capacity(count + (1 << n.min(10)) + 1);

    points.push(region.center());
    if n <= 10 {
        for mask in 0..(1usize << n) {
            let corner = (0..n)
                .map(|d| {
                    if mask >> d & 1 == 1 {
                        region.upper()[d]
                    } else {
                        region.lower()[d]
                    }
                })
                .collect();
            points.push(corner);
        }
    }
    let mut unit = vec![0.0; n];
    for i in 0..count {
        for d in 0..n {
            let u = radical_inverse(i as u64 + 1, PRIMES[d]) + shift[d];
            unit[d] = u - u.floor();
        }
        let mut p = vec![0.0; n];
        region.from_unit(&unit, &mut p);
        points.push(p);
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn points_stay_in_region_and_are_reproducible() {
        let b = Hyperbox::new(vec![-1.0, 2.0, 0.0], vec![1.0, 3.0, 0.5]).unwrap();
        let a = lattice(&b, 500, 7);
        assert_eq!(a.len(), 500 + 8 + 1);
        assert!(a.iter().all(|p| b.contains(p)));
        assert_eq!(a, lattice(&b, 500, 7));
        assert_ne!(a, lattice(&b, 500, 8));
    }
}
