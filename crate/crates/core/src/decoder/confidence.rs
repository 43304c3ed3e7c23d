use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::{Gesture, NUM_GESTURES};

/// Tolerance on the sum of an incoming probability vector.
const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

/// Exponentially filtered class probabilities plus the vote buffer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceState {
    p_prime: [f64; NUM_GESTURES],
    alpha: f64,
    threshold: f64,
    m: usize,
    buffer: VecDeque<Gesture>,
}

impl Default for ConfidenceState {
    fn default() -> Self {
        Self::new(0.5, 0.5, 3).expect("default parameters are valid")
    }
}

impl ConfidenceState {
    pub fn new(alpha: f64, threshold: f64, m: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha {alpha} not in (0, 1]")));
        }
        if !(0.0..1.0).contains(&threshold) {
            return Err(Error::InvalidParameter(format!("threshold {threshold} not in [0, 1)")));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("vote buffer length must be positive".into()));
        }
        Ok(Self {
            p_prime: [1.0 / NUM_GESTURES as f64; NUM_GESTURES],
            alpha,
            threshold,
            m,
            buffer: VecDeque::with_capacity(m),
        })
    }

    /// State with a chosen confidence vector and buffer contents (oldest first).
    pub fn with_state(mut self, p_prime: [f64; NUM_GESTURES], buffer: &[Gesture]) -> Result<Self> {
        check_probability(&p_prime)?;
        if buffer.len() > self.m {
            return Err(Error::InvalidParameter(format!("buffer longer than m = {}", self.m)));
        }
        self.p_prime = p_prime;
        self.buffer = buffer.iter().copied().collect();
        Ok(self)
    }

    pub fn p_prime(&self) -> &[f64; NUM_GESTURES] {
        &self.p_prime
    }

    pub fn buffer(&self) -> impl Iterator<Item = Gesture> + '_ {
        self.buffer.iter().copied()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn reset(&mut self) {
        self.p_prime = [1.0 / NUM_GESTURES as f64; NUM_GESTURES];
        self.buffer.clear();
    }

    /// `p' ← (1 − α)·p' + α·p`.
    pub fn confidence_update(&mut self, p: &[f64]) -> Result<[f64; NUM_GESTURES]> {
        check_probability(p)?;
        for (c, x) in self.p_prime.iter_mut().zip(p) {
            *c = (1.0 - self.alpha) * *c + self.alpha * x;
        }
        Ok(self.p_prime)
    }

    /// Appends the argmax of `p_prime` if it exceeds the threshold (Rest
    /// otherwise) and returns the buffer majority, or Rest without one.
    pub fn threshold_and_vote(&mut self, p_prime: &[f64; NUM_GESTURES]) -> Gesture {
        let best = crate::classifier::argmax(p_prime);
        let entry = if p_prime[best] > self.threshold {
            Gesture::from_id(best).expect("argmax within class range")
        } else {
            Gesture::Rest
        };
        if self.buffer.len() == self.m {
            self.buffer.pop_front();
        }
        self.buffer.push_back(entry);
        majority(self.buffer.make_contiguous(), self.m).unwrap_or(Gesture::Rest)
    }

    /// One decoder tick for classifier output `p`.
    ///
    /// The vote uses the confidence accumulated from earlier ticks, p'(t);
    /// `p` then advances it to p'(t+1). A gesture the classifier starts
    /// reporting therefore reaches the output no earlier than its third tick
    /// when coming from a settled different gesture.
    pub fn step(&mut self, p: &[f64]) -> Result<Gesture> {
        check_probability(p)?;
        let current = self.p_prime;
        let decided = self.threshold_and_vote(&current);
        self.confidence_update(p)?;
        Ok(decided)
    }
}

/// The gesture occupying more than `m / 2` of `buffer`, if any.
pub fn majority(buffer: &[Gesture], m: usize) -> Option<Gesture> {
    let mut counts = [0usize; NUM_GESTURES];
    for g in buffer {
        counts[g.id()] += 1;
    }
    counts
        .iter()
        .position(|&c| 2 * c > m)
        .and_then(Gesture::from_id)
}

pub fn check_probability(p: &[f64]) -> Result<()> {
    if p.len() != NUM_GESTURES {
        return Err(Error::DimensionMismatch {
            expected: NUM_GESTURES,
            actual: p.len(),
        });
    }
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::NotAProbability("negative or non-finite entry".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
        return Err(Error::NotAProbability(format!("entries sum to {sum}")));
    }
    Ok(())
}

pub fn one_hot(g: Gesture) -> [f64; NUM_GESTURES] {
    let mut p = [0.0; NUM_GESTURES];
    p[g.id()] = 1.0;
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Gesture::*;

    #[test]
    fn initial_and_one_step() {
        let mut s = ConfidenceState::default();
        assert!(s.p_prime().iter().all(|&x| x == 0.1));
        let p = s.confidence_update(&one_hot(FingersClosed)).unwrap();
        assert!((p[FingersClosed.id()] - 0.55).abs() < 1e-15);
    }

    #[test]
    fn geometric_convergence() {
        let mut s = ConfidenceState::default();
        for t in 1..=30 {
            let p = s.confidence_update(&one_hot(WristUp)).unwrap();
            let expected = 1.0 - 0.9 * 0.5f64.powi(t);
            assert!((p[WristUp.id()] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn vote_examples() {
        let mut fc = [0.05; NUM_GESTURES];
        fc[FingersClosed.id()] = 0.55;
        let mut s = ConfidenceState::default()
            .with_state([0.1; NUM_GESTURES], &[FingersClosed, FingersClosed])
            .unwrap();
        assert_eq!(s.threshold_and_vote(&fc), FingersClosed);

        let mut low = [0.55 / 9.0; NUM_GESTURES];
        low[WristLeft.id()] = 0.45;
        let mut s = ConfidenceState::default();
        s.threshold_and_vote(&low);
        assert_eq!(s.buffer().collect::<Vec<_>>(), vec![Rest]);

        let s = ConfidenceState::default()
            .with_state([0.1; NUM_GESTURES], &[WristUp, WristDown, PalmUp])
            .unwrap();
        assert_eq!(majority(&s.buffer().collect::<Vec<_>>(), 3), None);
    }

    #[test]
    fn rejects_non_probabilities() {
        let mut s = ConfidenceState::default();
        let before = s.clone();
        assert!(s.step(&[0.2; NUM_GESTURES]).is_err());
        assert!(s.step(&[0.1; 9]).is_err());
        let mut neg = one_hot(Rest);
        neg[0] = 1.5;
        neg[1] = -0.5;
        assert!(s.step(&neg).is_err());
        assert_eq!(s, before);
    }

    fn probability_vector() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, NUM_GESTURES).prop_map(|v| {
            let sum: f64 = v.iter().sum::<f64>() + 1e-12;
            v.into_iter().map(|x| x / sum).collect()
        })
    }

    proptest! {
        #[test]
        fn p_prime_stays_a_probability_vector(
            inputs in proptest::collection::vec(probability_vector(), 1..200)
        ) {
            let mut s = ConfidenceState::default();
            for p in &inputs {
                let sum: f64 = p.iter().sum();
                let p: Vec<f64> = p.iter().map(|x| x / sum).collect();
                s.step(&p).unwrap();
                prop_assert!(s.p_prime().iter().all(|&x| x >= 0.0));
                prop_assert!((s.p_prime().iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(s.buffer().count() <= 3);
            }
        }
    }
}
