//! Three-class trend labels and class-probability triples.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sign of the drift: down (-1), flat (0) or up (+1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum TrendLabel {
    Down,
    Flat,
    Up,
}

impl TrendLabel {
    pub const ALL: [TrendLabel; 3] = [TrendLabel::Down, TrendLabel::Flat, TrendLabel::Up];

    pub fn value(self) -> i8 {
        match self {
            TrendLabel::Down => -1,
            TrendLabel::Flat => 0,
            TrendLabel::Up => 1,
        }
    }

    /// Position in a class vector ordered (down, flat, up).
    pub fn class_index(self) -> usize {
        (self.value() + 1) as usize
    }

    pub fn from_class_index(index: usize) -> Self {
        match index {
            0 => TrendLabel::Down,
            1 => TrendLabel::Flat,
            2 => TrendLabel::Up,
            _ => panic!("class index {index} out of range"),
        }
    }

    /// Strict sign: zero maps to flat.
    pub fn from_sign(x: f64) -> Self {
        if x > 0.0 {
            TrendLabel::Up
        } else if x < 0.0 {
            TrendLabel::Down
        } else {
            TrendLabel::Flat
        }
    }

    pub fn negate(self) -> Self {
        match self {
            TrendLabel::Down => TrendLabel::Up,
            TrendLabel::Flat => TrendLabel::Flat,
            TrendLabel::Up => TrendLabel::Down,
        }
    }
}

impl TryFrom<i8> for TrendLabel {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(TrendLabel::Down),
            0 => Ok(TrendLabel::Flat),
            1 => Ok(TrendLabel::Up),
            other => Err(Error::Input(format!("trend label must be -1, 0 or 1, got {other}"))),
        }
    }
}

impl From<TrendLabel> for i8 {
    fn from(l: TrendLabel) -> i8 {
        l.value()
    }
}

impl fmt::Display for TrendLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Argmax over (down, flat, up) scores. Ties go to flat first, then to the lower class.
pub fn argmax_label<T: Scalar>(scores: [T; 3]) -> TrendLabel {
    let best = scores[0].max(scores[1]).max(scores[2]);
    if scores[1] == best {
        TrendLabel::Flat
    } else if scores[0] == best {
        TrendLabel::Down
    } else {
        TrendLabel::Up
    }
}

/// Probability distribution over the three trend classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbTriple<T> {
    pub p_down: T,
    pub p_flat: T,
    pub p_up: T,
}

impl<T: Scalar> ProbTriple<T> {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(p_down: T, p_flat: T, p_up: T) -> Result<Self> {
        let p = Self { p_down, p_flat, p_up };
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn from_array_unchecked(p: [T; 3]) -> Self {
        Self { p_down: p[0], p_flat: p[1], p_up: p[2] }
    }

    pub fn validate(&self) -> Result<()> {
        let arr = self.to_array();
        if arr.iter().any(|p| !p.is_finite() || *p < T::zero() || *p > T::one()) {
            return Err(Error::Input(format!("probabilities out of [0,1]: {arr:?}")));
        }
        let sum = (arr[0] + arr[1] + arr[2]).to_f64_lossy();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE.max(4.0 * T::epsilon().to_f64_lossy()) {
            return Err(Error::Input(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn uniform() -> Self {
        let third = T::one() / T::of(3.0);
        Self::from_array_unchecked([third; 3])
    }

    pub fn one_hot(label: TrendLabel) -> Self {
        let mut p = [T::zero(); 3];
        p[label.class_index()] = T::one();
        Self::from_array_unchecked(p)
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.p_down, self.p_flat, self.p_up]
    }

    pub fn prob(&self, label: TrendLabel) -> T {
        self.to_array()[label.class_index()]
    }

    pub fn label(&self) -> TrendLabel {
        argmax_label(self.to_array())
    }

    pub fn sum(&self) -> T {
        self.p_down + self.p_flat + self.p_up
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_round_trips_through_i8() {
        for l in TrendLabel::ALL {
            assert_eq!(TrendLabel::try_from(l.value()).unwrap(), l);
            assert_eq!(TrendLabel::from_class_index(l.class_index()), l);
        }
        assert!(TrendLabel::try_from(2).is_err());
        assert!(serde_json::from_str::<TrendLabel>("3").is_err());
        assert_eq!(serde_json::to_string(&TrendLabel::Down).unwrap(), "-1");
    }

    #[test]
    fn argmax_prefers_flat_then_lower() {
        assert_eq!(argmax_label([1.0, 1.0, 1.0]), TrendLabel::Flat);
        assert_eq!(argmax_label([1.0, 0.0, 1.0]), TrendLabel::Down);
        assert_eq!(argmax_label([0.0, 0.0, 1.0]), TrendLabel::Up);
    }

    #[test]
    fn triple_rejects_bad_mass() {
        assert!(ProbTriple::new(0.5, 0.5, 0.5).is_err());
        assert!(ProbTriple::new(-0.1, 0.6, 0.5).is_err());
        assert!(ProbTriple::new(0.2, 0.3, 0.5).is_ok());
        let u = ProbTriple::<f64>::uniform();
        assert!((u.sum() - 1.0).abs() < 1e-15);
    }
}
