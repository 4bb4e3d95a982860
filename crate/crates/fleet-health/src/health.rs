//! Fleet health scoring: weighted aggregation of per-component failure
//! probabilities into one rate per railcar, and the ranked report.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::ComponentId;
use crate::error::{Error, Result};

/// Component criticality weights, normalized to sum 1 at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentWeights {
    weights: Vec<f64>,
}

impl ComponentWeights {
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidArgument("weights are empty".into()));
        }
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and >= 0".into(),
            ));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        Ok(ComponentWeights {
            weights: raw.into_iter().map(|w| w / sum).collect(),
        })
    }

    pub fn uniform(count: usize) -> Result<Self> {
        ComponentWeights::new(vec![1.0; count.max(1)])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// Weighted mean of the component failure probabilities. A car missing a
/// component's probability (component absent from that car) renormalizes
/// the weights over the present components.
pub fn health_score(weights: &ComponentWeights, probs: &[Option<f64>]) -> Result<f64> {
    if probs.len() != weights.len() {
        return Err(Error::SchemaMismatch(format!(
            "{} probabilities for {} weights",
            probs.len(),
            weights.len()
        )));
    }
    let mut score = 0.0;
    let mut present_weight = 0.0;
    for (w, p) in weights.as_slice().iter().zip(probs) {
        if let Some(p) = p {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "probability {p} outside [0, 1]"
                )));
            }
            score += w * p;
            present_weight += w;
        }
    }
    if present_weight == 0.0 {
        return Err(Error::InvalidArgument(
            "no component probabilities present".into(),
        ));
    }
    Ok(score / present_weight)
}

/// One ranked fleet row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthRow {
    pub railcar_id: String,
    /// Per-component failure probability, `None` when the component is
    /// absent from the car.
    pub probs: Vec<Option<f64>>,
    pub score: f64,
    /// 1-based rank, 1 = sickest.
    pub rank: usize,
}

/// The fleet ranking with the inputs that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthReport {
    pub components: Vec<ComponentId>,
    pub weights_used: ComponentWeights,
    /// (component, model format version) for each model that scored.
    pub model_versions: Vec<(ComponentId, u32)>,
    pub rows: Vec<HealthRow>,
}

/// Rank cars by descending health rate (sickest first), ties broken by
/// ascending railcar id. Duplicate railcar ids are rejected.
pub fn rank_fleet(
    mut cars: Vec<(String, Vec<Option<f64>>, f64)>,
) -> Result<Vec<HealthRow>> {
    let mut ids = BTreeSet::new();
    for (id, _, score) in &cars {
        if !ids.insert(id.clone()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate railcar id '{id}' in ranking input"
            )));
        }
        if !score.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite health score for '{id}'"
            )));
        }
    }
    cars.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap()
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(cars
        .into_iter()
        .enumerate()
        .map(|(i, (railcar_id, probs, score))| HealthRow {
            railcar_id,
            probs,
            score,
            rank: i + 1,
        })
        .collect())
}

impl HealthReport {
    /// Write `railcar_id,p_c<i>...,health_score,rank` in rank order.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["railcar_id".to_string()];
        header.extend(self.components.iter().map(|c| format!("p_c{c}")));
        header.push("health_score".into());
        header.push("rank".into());
        writer.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.railcar_id.clone()];
            record.extend(
                row.probs
                    .iter()
                    .map(|p| p.map(|x| x.to_string()).unwrap_or_default()),
            );
            record.push(row.score.to_string());
            record.push(row.rank.to_string());
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(raw: &[f64]) -> ComponentWeights {
        ComponentWeights::new(raw.to_vec()).unwrap()
    }

    #[test]
    fn zero_probabilities_score_zero() {
        let w = weights(&[0.25; 4]);
        let p = vec![Some(0.0); 4];
        assert_eq!(health_score(&w, &p).unwrap(), 0.0);
    }

    #[test]
    fn uniform_weights_at_constant_probability_are_a_fixed_point() {
        let w = weights(&[0.25; 4]);
        let p = vec![Some(0.4); 4];
        assert!((health_score(&w, &p).unwrap() - 0.4).abs() <= 1e-12);
    }

    #[test]
    fn hand_dot_product() {
        let w = weights(&[0.4, 0.3, 0.2, 0.1]);
        let p = vec![Some(0.5), Some(0.2), Some(0.1), Some(0.0)];
        assert!((health_score(&w, &p).unwrap() - 0.28).abs() <= 1e-12);
    }

    #[test]
    fn missing_component_renormalizes_weights() {
        let w = weights(&[0.5, 0.5]);
        let p = vec![Some(0.6), None];
        assert!((health_score(&w, &p).unwrap() - 0.6).abs() <= 1e-12);
    }

    #[test]
    fn length_mismatch_and_negative_weights_error() {
        let w = weights(&[0.5, 0.5]);
        assert!(health_score(&w, &[Some(0.1)]).is_err());
        assert!(ComponentWeights::new(vec![0.5, -0.1]).is_err());
        assert!(ComponentWeights::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn weights_normalize_to_unit_sum() {
        let w = weights(&[2.0, 6.0]);
        assert_eq!(w.as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn ranking_is_descending_with_id_tie_break() {
        let rows = rank_fleet(vec![
            ("B".into(), vec![Some(0.1)], 0.1),
            ("A".into(), vec![Some(0.9)], 0.9),
            ("D".into(), vec![Some(0.5)], 0.5),
            ("C".into(), vec![Some(0.5)], 0.5),
        ])
        .unwrap();
        let order: Vec<&str> = rows.iter().map(|r| r.railcar_id.as_str()).collect();
        assert_eq!(order, vec!["A", "C", "D", "B"]);
        let ranks: Vec<usize> = rows.iter().map(|r| r.rank).collect();
        assert_eq!(ranks, vec![1, 2, 3, 4]);
    }

    #[test]
    fn duplicate_railcar_ids_are_rejected() {
        assert!(rank_fleet(vec![
            ("A".into(), vec![], 0.1),
            ("A".into(), vec![], 0.2),
        ])
        .is_err());
    }

    #[test]
    fn ranking_matches_an_independent_sort_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let cars: Vec<(String, Vec<Option<f64>>, f64)> = (0..100)
            .map(|i| {
                (
                    format!("RC{i:03}"),
                    vec![],
                    (rng.gen_range(0..20) as f64) / 20.0, // plenty of ties
                )
            })
            .collect();
        let rows = rank_fleet(cars.clone()).unwrap();
        // Oracle: selection-sort style extraction of the max.
        let mut remaining = cars;
        let mut expected = Vec::new();
        while !remaining.is_empty() {
            let mut best = 0;
            for i in 1..remaining.len() {
                let better = remaining[i].2 > remaining[best].2
                    || (remaining[i].2 == remaining[best].2
                        && remaining[i].0 < remaining[best].0);
                if better {
                    best = i;
                }
            }
            expected.push(remaining.remove(best).0);
        }
        let got: Vec<String> = rows.into_iter().map(|r| r.railcar_id).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn ranking_is_invariant_under_positive_weight_rescaling() {
        let probs = [
            vec![Some(0.1), Some(0.8)],
            vec![Some(0.7), Some(0.2)],
            vec![Some(0.4), Some(0.4)],
        ];
        let base = weights(&[0.3, 0.7]);
        let scaled = weights(&[0.3 * 13.0, 0.7 * 13.0]);
        assert_eq!(base, scaled);
        let order = |w: &ComponentWeights| -> Vec<usize> {
            let cars: Vec<_> = probs
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("RC{i}"), p.clone(), health_score(w, p).unwrap()))
                .collect();
            rank_fleet(cars)
                .unwrap()
                .into_iter()
                .map(|r| r.railcar_id[2..].parse().unwrap())
                .collect()
        };
        assert_eq!(order(&base), order(&scaled));
    }

    #[test]
    fn total_score_is_linear_in_probabilities() {
        let w = weights(&[0.4, 0.6]);
        let probs = [
            vec![Some(0.1), Some(0.3)],
            vec![Some(0.2), Some(0.5)],
            vec![Some(0.9), Some(0.0)],
        ];
        let total: f64 = probs
            .iter()
            .map(|p| health_score(&w, p).unwrap())
            .sum();
        let column_sums = [
            probs.iter().map(|p| p[0].unwrap()).sum::<f64>(),
            probs.iter().map(|p| p[1].unwrap()).sum::<f64>(),
        ];
        let expected: f64 = w
            .as_slice()
            .iter()
            .zip(&column_sums)
            .map(|(w, s)| w * s)
            .sum();
        assert!((total - expected).abs() <= 1e-12);
    }

    #[test]
    fn csv_report_has_the_fixed_layout() {
        let report = HealthReport {
            components: vec![ComponentId(1), ComponentId(2)],
            weights_used: weights(&[0.5, 0.5]),
            model_versions: vec![(ComponentId(1), 1), (ComponentId(2), 1)],
            rows: rank_fleet(vec![
                ("A".into(), vec![Some(0.5), None], 0.5),
                ("B".into(), vec![Some(0.25), Some(0.75)], 0.5),
            ])
            .unwrap(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("health.csv");
        report.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "railcar_id,p_c1,p_c2,health_score,rank\nA,0.5,,0.5,1\nB,0.25,0.75,0.5,2\n"
        );
    }
}
