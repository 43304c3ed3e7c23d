//! Speed ramp over consecutive identical predictions.

/// Consecutive-prediction count at which the ramp saturates.
pub const DEFAULT_RAMP_CAP: u32 = 50;

/// `a · min(x, k)^1.5`.
pub fn ramp_magnitude(a: f64, x: u32, k: u32) -> f64 {
    a * (x.min(k) as f64).powf(1.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(ramp_magnitude(1.0, 0, 50), 0.0);
        assert_eq!(ramp_magnitude(1.0, 4, 50), 8.0);
        assert_eq!(ramp_magnitude(1.0, 60, 50), ramp_magnitude(1.0, 50, 50));
        assert!((ramp_magnitude(1.0, 50, 50) - 50.0 * 50f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn nondecreasing_and_flat_past_cap(a in 1e-6f64..10.0, x in 0u32..200, k in 1u32..100) {
            prop_assert!(ramp_magnitude(a, x + 1, k) >= ramp_magnitude(a, x, k));
            prop_assert!(ramp_magnitude(a, x, k) <= a * (k as f64).powf(1.5));
            if x > k {
                prop_assert_eq!(ramp_magnitude(a, x, k), ramp_magnitude(a, k, k));
            }
        }
    }
}
