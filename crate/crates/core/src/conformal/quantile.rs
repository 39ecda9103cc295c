//! Order-statistic quantiles.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileRule {
    /// `⌊level·(m+1)⌋`-th (lower) or `⌈level·(m+1)⌉`-th (upper) order
    /// statistic, clipped to `[1, m]`.
    #[default]
    Conformal,
    /// `⌈level·m⌉`-th order statistic, clipped to `[1, m]`.
    Plain,
}

// Guards against 0.95 * 20 landing a hair above 19.
const RANK_EPS: f64 = 1e-9;

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn quantile_with_rule(sample: &[f64], level: f64, tail: Tail, rule: QuantileRule) -> Result<f64> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::InvalidConfig(format!("quantile level {level} outside [0, 1]")));
    }
    let v = sorted(sample)?;
    let m = v.len();
    let rank = match rule {
        QuantileRule::Conformal => {
            let x = level * (m + 1) as f64;
            match tail {
                Tail::Lower => (x + RANK_EPS).floor(),
                Tail::Upper => (x - RANK_EPS).ceil(),
            }
        }
        QuantileRule::Plain => (level * m as f64 - RANK_EPS).ceil(),
    };
    let rank = (rank.max(1.0) as usize).min(m);
    Ok(v[rank - 1])
}

/// Conservative conformal quantile; see [`QuantileRule::Conformal`].
pub fn empirical_quantile(sample: &[f64], level: f64, tail: Tail) -> Result<f64> {
    quantile_with_rule(sample, level, tail, QuantileRule::Conformal)
}

/// Middle order statistic, or the mean of the two middle ones.
pub fn median(sample: &[f64]) -> Result<f64> {
    let v = sorted(sample)?;
    let m = v.len();
    Ok(if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        let s = [4.0, 2.0, 1.0, 3.0];
        assert_eq!(empirical_quantile(&s, 0.95, Tail::Upper).unwrap(), 4.0);
        assert_eq!(empirical_quantile(&s, 0.05, Tail::Lower).unwrap(), 1.0);
        // 0.5 * 5 = 2.5
        assert_eq!(empirical_quantile(&s, 0.5, Tail::Upper).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&s, 0.5, Tail::Lower).unwrap(), 2.0);
        assert_eq!(quantile_with_rule(&s, 0.5, Tail::Upper, QuantileRule::Plain).unwrap(), 2.0);
    }

    #[test]
    fn exact_ranks_are_not_rounded_up() {
        // 0.95 * 20 is 19 up to rounding.
        let s: Vec<f64> = (1..=19).map(f64::from).collect();
        assert_eq!(empirical_quantile(&s, 0.95, Tail::Upper).unwrap(), 19.0);
        let s: Vec<f64> = (1..=39).map(f64::from).collect();
        assert_eq!(empirical_quantile(&s, 0.95, Tail::Upper).unwrap(), 38.0);
        assert_eq!(empirical_quantile(&s, 0.05, Tail::Lower).unwrap(), 2.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(empirical_quantile(&[], 0.5, Tail::Upper), Err(Error::EmptySample)));
        assert!(empirical_quantile(&[1.0], 1.5, Tail::Upper).is_err());
        assert!(matches!(median(&[]), Err(Error::EmptySample)));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
    }

    proptest! {
        #[test]
        fn constant_sample(c in -1e6f64..1e6, m in 1usize..40, level in 0.0f64..=1.0) {
            let s = vec![c; m];
            prop_assert_eq!(empirical_quantile(&s, level, Tail::Upper).unwrap(), c);
            prop_assert_eq!(empirical_quantile(&s, level, Tail::Lower).unwrap(), c);
        }

        #[test]
        fn monotone_in_level(s in proptest::collection::vec(-100.0f64..100.0, 1..30), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for tail in [Tail::Lower, Tail::Upper] {
                prop_assert!(empirical_quantile(&s, lo, tail).unwrap() <= empirical_quantile(&s, hi, tail).unwrap());
            }
        }

        #[test]
        fn result_is_a_sample_member(s in proptest::collection::vec(-100.0f64..100.0, 1..30), level in 0.0f64..=1.0) {
            let q = empirical_quantile(&s, level, Tail::Upper).unwrap();
            prop_assert!(s.contains(&q));
        }
    }
}
