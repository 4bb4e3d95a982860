//! Synthetic fleet generator with a planted degradation signal.
//!
//! Emits the ingest CSV schemas (`events.csv`, `cars.csv`, `trips.csv`)
//! plus `truth.csv` (sample_id, q, y) holding the latent failure
//! probabilities for oracle checks only; truth is never fed to training.
//!
//! Each sample's failure probability rises logistically with component
//! age and mileage since the last replacement, so those features are
//! recoverable by the downstream models.

use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{
    ComponentId, ConditionCode, CutoffConfig, EventKind, MaintenanceEvent, RailcarRecord,
    SampleId, Trip,
};
use crate::error::{Error, Result};

/// Logistic hazard terms for one component: `q = sigmoid(intercept +
/// age * (component_age_days / 1095) + mileage * (miles_since / 100_000)
/// + noise)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HazardCoeffs {
    pub age: f64,
    pub mileage: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub n_cars: usize,
    pub components: u8,
    pub locations: u8,
    /// Span of build dates before the cutoff, in years.
    pub years_history: u32,
    pub cutoff: CutoffConfig,
    /// One entry per component.
    pub hazards: Vec<HazardCoeffs>,
    pub noise_std: f64,
    /// Per-feature probability of blanking an optional field.
    pub missingness: f64,
    /// Acceptable per-component empirical failure-rate band.
    pub prevalence_band: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_cars: 1000,
            components: 4,
            locations: 2,
            years_history: 25,
            cutoff: CutoffConfig {
                cutoff_date: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(),
                horizon_days: 365,
            },
            hazards: vec![
                HazardCoeffs { age: 3.0, mileage: 1.5, intercept: -11.1 },
                HazardCoeffs { age: 2.8, mileage: 1.65, intercept: -10.95 },
                HazardCoeffs { age: 2.6, mileage: 1.8, intercept: -10.8 },
                HazardCoeffs { age: 2.4, mileage: 1.95, intercept: -10.65 },
            ],
            noise_std: 0.3,
            missingness: 0.1,
            prevalence_band: (0.005, 0.2),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cars == 0 {
            return Err(Error::InvalidArgument("n_cars must be >= 1".into()));
        }
        if self.components == 0 || self.locations == 0 {
            return Err(Error::InvalidArgument(
                "components and locations must be >= 1".into(),
            ));
        }
        if self.years_history < 2 {
            return Err(Error::InvalidArgument("years_history must be >= 2".into()));
        }
        if self.hazards.len() != self.components as usize {
            return Err(Error::InvalidArgument(format!(
                "{} hazard entries for {} components",
                self.hazards.len(),
                self.components
            )));
        }
        if !(0.0..=0.5).contains(&self.missingness) {
            return Err(Error::InvalidArgument(
                "missingness must be in [0, 0.5]".into(),
            ));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidArgument("noise_std must be >= 0".into()));
        }
        let (lo, hi) = self.prevalence_band;
        if !(0.0 < lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidArgument("invalid prevalence band".into()));
        }
        Ok(())
    }
}

/// Ground truth for one sample: the latent failure probability and the
/// realized outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub sample: SampleId,
    pub q: f64,
    pub y: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub events: Vec<MaintenanceEvent>,
    pub cars: Vec<RailcarRecord>,
    pub truth: Vec<TruthRow>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const REGIONS: [&str; 5] = ["R1", "R2", "R3", "R4", "R5"];

/// Generate the fleet. Fixed seed gives bitwise-identical output.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cutoff = cfg.cutoff.cutoff_date;

    let mut events = Vec::new();
    let mut cars = Vec::with_capacity(cfg.n_cars);
    let mut truth = Vec::new();
    let mut positives = vec![0usize; cfg.components as usize];

    for car_index in 0..cfg.n_cars {
        let railcar_id = format!("RC{:05}", car_index + 1);
        let age_days = rng.gen_range(540..=(cfg.years_history as i64 * 365));
        let build_date = cutoff - Days::new(age_days as u64);
        let region = REGIONS[rng.gen_range(0..REGIONS.len())].to_string();
        // Miles accumulated per year of service; the odometer is linear in
        // time so every event's reading is consistent with its date.
        let annual_miles = rng.gen_range(20_000.0..60_000.0);
        // Car-level maintenance quality: sloppy owners stretch replacement
        // intervals, so their components run old across every location.
        let interval_scale = rng.gen_range(0.5..2.5);
        let odometer = |date: NaiveDate| -> f64 {
            let days = (date - build_date).num_days().max(0) as f64;
            (annual_miles * days / 365.0).round()
        };

        // Trip log over the last few years of service.
        let mut trips = Vec::new();
        let window_days = age_days.min(4 * 365);
        let mut day = cutoff - Days::new(window_days as u64);
        let mut loaded = true;
        loop {
            let duration = if loaded {
                rng.gen_range(4..=30)
            } else {
                rng.gen_range(3..=20)
            };
            let end = day + Days::new(duration);
            if end > cutoff {
                break;
            }
            trips.push(Trip {
                start_date: day,
                end_date: end,
                loaded,
                region: REGIONS[rng.gen_range(0..REGIONS.len())].to_string(),
            });
            day = end + Days::new(rng.gen_range(5..=40));
            loaded = !loaded;
        }

        for component in 1..=cfg.components {
            let hazard = cfg.hazards[component as usize - 1];
            for location in 1..=cfg.locations {
                let sample = SampleId {
                    railcar_id: railcar_id.clone(),
                    component: ComponentId(component),
                    location,
                };

                // Replacement history: installed at build, then renewed at
                // 2-8 year intervals up to the cutoff.
                let mut replacement_dates = vec![build_date];
                let mut date = build_date;
                loop {
                    let base: u64 = rng.gen_range(1278..=2008);
                    let interval = (base as f64 * interval_scale).round() as u64;
                    date = date + Days::new(interval);
                    if date > cutoff {
                        break;
                    }
                    replacement_dates.push(date);
                }
                let last_replacement = *replacement_dates.last().unwrap();

                let blank_mileage = rng.gen::<f64>() < cfg.missingness;
                let blank_condition = rng.gen::<f64>() < cfg.missingness;
                let n_replacements = replacement_dates.len();
                for (k, &when) in replacement_dates.iter().enumerate() {
                    let is_last = k == n_replacements - 1;
                    // The build install is always new; renewals skip the
                    // draw via the short circuit.
                    let condition = if k == 0 || rng.gen::<f64>() < 0.6 {
                        ConditionCode::New
                    } else {
                        ConditionCode::Refurbished
                    };
                    events.push(MaintenanceEvent {
                        railcar_id: railcar_id.clone(),
                        component: ComponentId(component),
                        location,
                        event_date: when,
                        event_kind: EventKind::Replacement,
                        condition_code: if is_last && blank_condition {
                            None
                        } else {
                            Some(condition)
                        },
                        mileage_at_event: if is_last && blank_mileage {
                            None
                        } else {
                            Some(odometer(when))
                        },
                    });
                }

                // Two recent inspections carrying odometer readings; the
                // second offset strictly exceeds the first so dates never
                // collide.
                let offset1 = rng.gen_range(30..=400u64);
                let offset2 = offset1 + rng.gen_range(100..=700u64);
                for offset in [offset1, offset2] {
                    let when = cutoff - Days::new(offset);
                    if when <= build_date {
                        continue;
                    }
                    events.push(MaintenanceEvent {
                        railcar_id: railcar_id.clone(),
                        component: ComponentId(component),
                        location,
                        event_date: when,
                        event_kind: EventKind::Inspection,
                        condition_code: None,
                        mileage_at_event: Some(odometer(when)),
                    });
                }

                // Planted hazard: logistic in component age and mileage
                // accumulated since the last replacement.
                let component_age_days = (cutoff - last_replacement).num_days() as f64;
                let miles_since = odometer(cutoff) - odometer(last_replacement);
                let noise: f64 = <StandardNormal as Distribution<f64>>::sample(
                    &StandardNormal,
                    &mut rng,
                ) * cfg.noise_std;
                let q = sigmoid(
                    hazard.intercept
                        + hazard.age * component_age_days / 1095.0
                        + hazard.mileage * miles_since / 100_000.0
                        + noise,
                );
                let y = u8::from(rng.gen::<f64>() < q);
                if y == 1 {
                    positives[component as usize - 1] += 1;
                    let when = cutoff
                        + Days::new(rng.gen_range(1..=u64::from(cfg.cutoff.horizon_days)));
                    events.push(MaintenanceEvent {
                        railcar_id: railcar_id.clone(),
                        component: ComponentId(component),
                        location,
                        event_date: when,
                        event_kind: EventKind::Failure,
                        condition_code: None,
                        mileage_at_event: Some(odometer(when)),
                    });
                }
                truth.push(TruthRow { sample, q, y });
            }
        }

        cars.push(RailcarRecord {
            railcar_id,
            build_date,
            region,
            trips,
        });
    }

    let samples_per_component = cfg.n_cars * cfg.locations as usize;
    for (i, &count) in positives.iter().enumerate() {
        let rate = count as f64 / samples_per_component as f64;
        let (lo, hi) = cfg.prevalence_band;
        if rate < lo || rate > hi {
            return Err(Error::InvalidArgument(format!(
                "component {} failure rate {rate:.4} outside [{lo}, {hi}]; adjust hazards",
                i + 1
            )));
        }
    }

    Ok(SynthOutput { events, cars, truth })
}

fn opt_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl SynthOutput {
    /// Write `events.csv`, `cars.csv`, `trips.csv`, and `truth.csv` into
    /// `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;

        let mut writer = csv::Writer::from_path(dir.join("events.csv"))?;
        writer.write_record([
            "railcar_id",
            "component_id",
            "location",
            "event_date",
            "event_kind",
            "condition_code",
            "mileage",
        ])?;
        for e in &self.events {
            writer.write_record([
                e.railcar_id.clone(),
                e.component.to_string(),
                e.location.to_string(),
                e.event_date.to_string(),
                e.event_kind.to_string(),
                opt_string(&e.condition_code),
                opt_string(&e.mileage_at_event),
            ])?;
        }
        writer.flush()?;

        let mut writer = csv::Writer::from_path(dir.join("cars.csv"))?;
        writer.write_record(["railcar_id", "build_date", "region"])?;
        for c in &self.cars {
            writer.write_record([
                c.railcar_id.clone(),
                c.build_date.to_string(),
                c.region.clone(),
            ])?;
        }
        writer.flush()?;

        let mut writer = csv::Writer::from_path(dir.join("trips.csv"))?;
        writer.write_record(["railcar_id", "start_date", "end_date", "loaded", "region"])?;
        for c in &self.cars {
            for t in &c.trips {
                writer.write_record([
                    c.railcar_id.clone(),
                    t.start_date.to_string(),
                    t.end_date.to_string(),
                    t.loaded.to_string(),
                    t.region.clone(),
                ])?;
            }
        }
        writer.flush()?;

        let mut writer = csv::Writer::from_path(dir.join("truth.csv"))?;
        writer.write_record(["sample_id", "q", "y"])?;
        for row in &self.truth {
            writer.write_record([
                row.sample.to_string(),
                row.q.to_string(),
                row.y.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Read `truth.csv` back for oracle checks.
pub fn read_truth(path: &Path) -> Result<Vec<TruthRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(TruthRow {
            sample: record[0].parse()?,
            q: record[1]
                .parse()
                .map_err(|_| Error::Ingest(format!("invalid q '{}'", &record[1])))?,
            y: match &record[2] {
                "0" => 0,
                "1" => 1,
                other => return Err(Error::Ingest(format!("invalid y '{other}'"))),
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features;
    use std::collections::BTreeSet;

    fn small_config() -> SynthConfig {
        SynthConfig {
            n_cars: 200,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn fixed_seed_reproduces_csv_bytes() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg = small_config();
        generate(&cfg).unwrap().write_csvs(dir_a.path()).unwrap();
        generate(&cfg).unwrap().write_csvs(dir_b.path()).unwrap();
        for file in ["events.csv", "cars.csv", "trips.csv", "truth.csv"] {
            let a = std::fs::read(dir_a.path().join(file)).unwrap();
            let b = std::fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between runs");
        }
    }

    #[test]
    fn events_never_precede_build_date() {
        let output = generate(&small_config()).unwrap();
        let builds: std::collections::HashMap<&str, _> = output
            .cars
            .iter()
            .map(|c| (c.railcar_id.as_str(), c.build_date))
            .collect();
        for e in &output.events {
            assert!(e.event_date >= builds[e.railcar_id.as_str()]);
        }
    }

    #[test]
    fn event_keys_are_unique() {
        let output = generate(&small_config()).unwrap();
        let mut keys = BTreeSet::new();
        for e in &output.events {
            assert!(keys.insert(e.dedup_key()), "duplicate {:?}", e.dedup_key());
        }
    }

    #[test]
    fn prevalence_stays_in_the_configured_band() {
        let cfg = small_config();
        let output = generate(&cfg).unwrap();
        for component in 1..=cfg.components {
            let rows: Vec<_> = output
                .truth
                .iter()
                .filter(|t| t.sample.component == ComponentId(component))
                .collect();
            let rate =
                rows.iter().filter(|t| t.y == 1).count() as f64 / rows.len() as f64;
            assert!(
                (cfg.prevalence_band.0..=cfg.prevalence_band.1).contains(&rate),
                "component {component} rate {rate}"
            );
        }
    }

    #[test]
    fn zero_missingness_builds_complete_features() {
        let cfg = SynthConfig {
            missingness: 0.0,
            n_cars: 120,
            seed: 5,
            ..Default::default()
        };
        let output = generate(&cfg).unwrap();
        for (_, component_events) in features::split_by_component(&output.events) {
            let matrix =
                features::engineer_features(&component_events, &output.cars, &cfg.cutoff)
                    .unwrap();
            assert!(!matrix.has_missing());
        }
    }

    #[test]
    fn missingness_rate_shows_up_in_features() {
        let cfg = SynthConfig {
            missingness: 0.2,
            n_cars: 300,
            seed: 6,
            ..Default::default()
        };
        let output = generate(&cfg).unwrap();
        let by_component = features::split_by_component(&output.events);
        let events = &by_component[&ComponentId(1)];
        let matrix = features::engineer_features(events, &output.cars, &cfg.cutoff).unwrap();
        let col = matrix.feature_index("condition_code").unwrap();
        let missing = (0..matrix.n_rows())
            .filter(|&i| matrix.value(i, col).is_missing())
            .count();
        let rate = missing as f64 / matrix.n_rows() as f64;
        assert!((0.12..=0.28).contains(&rate), "rate {rate}");
    }

    #[test]
    fn truth_labels_match_planted_failure_events() {
        let cfg = small_config();
        let output = generate(&cfg).unwrap();
        let by_component = features::split_by_component(&output.events);
        for (component, events) in by_component {
            let labels = features::label_targets(&events, &cfg.cutoff);
            for t in output
                .truth
                .iter()
                .filter(|t| t.sample.component == component)
            {
                assert_eq!(labels[&t.sample], t.y, "label mismatch for {}", t.sample);
            }
        }
    }

    #[test]
    fn zero_hazard_terms_hit_the_noise_baseline() {
        let cfg = SynthConfig {
            n_cars: 2000,
            hazards: vec![
                HazardCoeffs { age: 0.0, mileage: 0.0, intercept: -3.0 };
                4
            ],
            noise_std: 0.0,
            seed: 13,
            ..Default::default()
        };
        let output = generate(&cfg).unwrap();
        // With no signal and no noise, every q equals sigmoid(-3.0)
        // and the empirical rate sits within binomial 3-sigma of it.
        let expected = sigmoid(-3.0);
        let n = output.truth.len() as f64;
        let rate = output.truth.iter().filter(|t| t.y == 1).count() as f64 / n;
        let sigma = (expected * (1.0 - expected) / n).sqrt();
        assert!(output.truth.iter().all(|t| (t.q - expected).abs() < 1e-12));
        assert!((rate - expected).abs() <= 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn strong_age_hazard_correlates_age_with_failures() {
        let cfg = SynthConfig {
            n_cars: 1500,
            hazards: vec![
                HazardCoeffs { age: 3.0, mileage: 0.0, intercept: -7.0 };
                4
            ],
            noise_std: 0.1,
            seed: 14,
            ..Default::default()
        };
        let output = generate(&cfg).unwrap();
        let by_component = features::split_by_component(&output.events);
        let events = &by_component[&ComponentId(1)];
        let matrix = features::engineer_features(events, &output.cars, &cfg.cutoff).unwrap();
        let labels = features::label_targets(events, &cfg.cutoff);
        let col = matrix.feature_index("component_age").unwrap();
        // Rank correlation between component age and the failure label.
        let mut pairs: Vec<(f64, u8)> = matrix
            .sample_ids()
            .iter()
            .enumerate()
            .map(|(i, id)| {
                (
                    matrix.value(i, col).as_num().unwrap(),
                    labels[id],
                )
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let n = pairs.len();
        let positives = pairs.iter().filter(|(_, y)| *y == 1).count();
        let mean_rank_pos: f64 = pairs
            .iter()
            .enumerate()
            .filter(|(_, (_, y))| *y == 1)
            .map(|(r, _)| r as f64)
            .sum::<f64>()
            / positives as f64;
        let mean_rank = (n as f64 - 1.0) / 2.0;
        // Positives should sit far above the average rank: a rank-biserial
        // style effect > 0.5.
        let effect = (mean_rank_pos - mean_rank) / (n as f64 / 2.0);
        assert!(effect > 0.5, "effect {effect}");
    }

    #[test]
    fn invalid_configs_are_rejected()  {
        let mut cfg = small_config();
        cfg.missingness = 0.7;
        assert!(generate(&cfg).is_err());
        let mut cfg = small_config();
        cfg.hazards.pop();
        assert!(generate(&cfg).is_err());
    }
}


