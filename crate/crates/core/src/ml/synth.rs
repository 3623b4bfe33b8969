//! Seeded synthetic datasets used as fixtures and as the desk-scale
//! reference workload.

use crate::hashcore::Decimal6;

use super::dataset::{Dataset, Row};
use super::rng::DetRng;

fn dec(x: f64) -> Decimal6 {
    Decimal6::from_f64(x).expect("generator values are finite")
}

/// Two features, two classes, separated by the line `0.6*x1 + 0.8*x2 = 0`
/// with no point closer than 0.5 to it (margin 1.0 between classes).
/// Features lie in [-3, 3]; the sensitive group is a fair coin.
pub fn separable(n: usize, seed: u64) -> Dataset {
    let mut rng = DetRng::new(seed);
    let mut rows = Vec::with_capacity(n);
    while rows.len() < n {
        let x1 = rng.symmetric(3.0);
        let x2 = rng.symmetric(3.0);
        let s = 0.6 * x1 + 0.8 * x2;
        if s.abs() < 0.5 {
            continue;
        }
        let sensitive = rng.bernoulli(0.5) as u32;
        rows.push(Row { features: vec![dec(x1), dec(x2)], label: (s > 0.0) as u32, sensitive });
    }
    Dataset::new(Dataset::default_schema(2), rows).expect("fixed arity")
}

/// Feature names of [`census_like`].
pub const CENSUS_SCHEMA: [&str; 8] =
    ["age", "education_num", "hours_per_week", "married", "sex", "race_white", "capital_gain", "occupation_skill"];

/// Census-income-style tabular data: standardized age, education and
/// hours, binary marital/sex/race/capital-gain indicators and a latent
/// occupation score. The label (income above threshold) is drawn from a
/// logistic model with about 27% positives and a Bayes accuracy near 0.86.
/// The sensitive attribute is `sex`.
///
/// Per row, draws are taken in this order: age, education, hours, sex,
/// married, race, capital gain, skill, label.
pub fn census_like(n: usize, seed: u64) -> Dataset {
    let mut rng = DetRng::new(seed);
    let mut rows = Vec::with_capacity(n);
    let sigmoid = |z: f64| 1.0 / (1.0 + (-z).exp());
    for _ in 0..n {
        let age = (38.5 + 13.6 * rng.normal()).clamp(17.0, 90.0);
        let a = (age - 38.5) / 13.6;
        let edu = (10.0 + 2.6 * rng.normal()).round().clamp(1.0, 16.0);
        let e = (edu - 10.0) / 2.6;
        let hours = (40.4 + 12.3 * rng.normal()).clamp(1.0, 99.0);
        let h = (hours - 40.4) / 12.3;
        let sex = rng.bernoulli(0.67) as u32 as f64;
        let married = rng.bernoulli(0.25 + 0.45 * sigmoid((age - 30.0) / 6.0) + 0.1 * sex) as u32 as f64;
        let white = rng.bernoulli(0.85) as u32 as f64;
        let gain = rng.bernoulli(0.08) as u32 as f64;
        let skill = rng.normal() + 0.5 * e;
        let logit = -2.6 + 0.6 * a - 0.3 * a * a + 0.9 * e + 0.5 * h + 1.6 * married + 0.3 * sex
            + 0.2 * white
            + 2.0 * gain
            + 0.5 * skill;
        let label = rng.bernoulli(sigmoid(1.6 * logit)) as u32;
        rows.push(Row {
            features: [a, e, h, married, sex, white, gain, skill].into_iter().map(dec).collect(),
            label,
            sensitive: sex as u32,
        });
    }
    Dataset::new(CENSUS_SCHEMA.iter().map(|s| s.to_string()).collect(), rows).expect("fixed arity")
}

/// The documented reference split: 48,000 rows from `seed`, first 24,000
/// for training and the remaining 24,000 for testing.
pub fn census_split(seed: u64) -> (Dataset, Dataset) {
    let all = census_like(48_000, seed);
    let (train, test) = all.rows().split_at(24_000);
    (all.with_rows(train.to_vec()).unwrap(), all.with_rows(test.to_vec()).unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_respects_margin() {
        let d = separable(200, 9);
        assert_eq!(d.len(), 200);
        for r in d.rows() {
            let s = 0.6 * r.features[0].to_f64() + 0.8 * r.features[1].to_f64();
            assert!(s.abs() >= 0.5 - 1e-5);
            assert_eq!(r.label, (s > 0.0) as u32);
        }
        assert_eq!(separable(200, 9), d);
    }

    #[test]
    fn census_shape() {
        let d = census_like(2000, 3);
        assert_eq!(d.arity(), 8);
        let pos = d.rows().iter().filter(|r| r.label == 1).count() as f64 / 2000.0;
        assert!((0.18..0.36).contains(&pos), "{pos}");
        assert!(d.rows().iter().all(|r| r.sensitive == r.features[4].to_f64() as u32));
    }
}
