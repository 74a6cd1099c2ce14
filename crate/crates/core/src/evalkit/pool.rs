use crate::error::{Error, Result};
use crate::label::ProbTriple;
use crate::scalar::Scalar;

/// Per-step arithmetic mean of several estimators' class probabilities.
pub fn pool_probabilities<T: Scalar>(outputs: &[Vec<ProbTriple<T>>]) -> Result<Vec<ProbTriple<T>>> {
    let Some(first) = outputs.first() else {
        return Err(Error::Empty("pooling needs at least one estimator".into()));
    };
    let n = first.len();
    if let Some(bad) = outputs.iter().find(|o| o.len() != n) {
        return Err(Error::LengthMismatch { expected: n, got: bad.len() });
    }
    let k = T::of(outputs.len() as f64);
    Ok((0..n)
        .map(|t| {
            let mut acc = [T::zero(); 3];
            for o in outputs {
                for (a, p) in acc.iter_mut().zip(o[t].to_array()) {
                    *a += p;
                }
            }
            ProbTriple::from_array_unchecked(acc.map(|a| a / k))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_triples_average() {
        let a = vec![ProbTriple::new(0.2f64, 0.3, 0.5).unwrap()];
        let b = vec![ProbTriple::new(0.4, 0.3, 0.3).unwrap()];
        let p = pool_probabilities(&[a.clone(), b]).unwrap();
        assert!((p[0].p_down - 0.3).abs() < 1e-15 && (p[0].p_flat - 0.3).abs() < 1e-15);
        assert!((p[0].p_up - 0.4).abs() < 1e-15);
        assert_eq!(pool_probabilities(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn mismatched_lengths() {
        let a = vec![ProbTriple::<f64>::uniform(); 2];
        let b = vec![ProbTriple::<f64>::uniform(); 3];
        assert!(pool_probabilities(&[a, b]).is_err());
        assert!(pool_probabilities::<f64>(&[]).is_err());
    }
}
