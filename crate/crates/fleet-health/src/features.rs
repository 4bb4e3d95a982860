//! Cut-off-based target labeling and engineered-feature computation.
//!
//! Features are computed strictly from records dated on or before the
//! cut-off; the target comes from failure/replacement events inside the
//! window (cutoff, cutoff + horizon].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::data::{
    ComponentId, CutoffConfig, EventKind, MaintenanceEvent, RailcarRecord, SampleId,
};
use crate::error::{Error, Result};
use crate::matrix::{FeatureDef, FeatureMatrix, Value};

/// Partition events by component, preserving input order within each list.
pub fn split_by_component(
    events: &[MaintenanceEvent],
) -> BTreeMap<ComponentId, Vec<MaintenanceEvent>> {
    let mut map: BTreeMap<ComponentId, Vec<MaintenanceEvent>> = BTreeMap::new();
    for event in events {
        map.entry(event.component).or_default().push(event.clone());
    }
    map
}

/// Label every sample appearing in `events`: 1 iff at least one failure or
/// replacement event falls in (cutoff, cutoff + horizon].
pub fn label_targets(
    events: &[MaintenanceEvent],
    cfg: &CutoffConfig,
) -> BTreeMap<SampleId, u8> {
    let mut labels: BTreeMap<SampleId, u8> = BTreeMap::new();
    for event in events {
        labels.entry(event.sample_id()).or_insert(0);
    }
    for event in events {
        let is_failure = matches!(
            event.event_kind,
            EventKind::Failure | EventKind::Replacement
        );
        if is_failure && cfg.in_failure_window(event.event_date) {
            labels.insert(event.sample_id(), 1);
        }
    }
    labels
}

/// Canonical feature order for matrices built by [`engineer_features`].
pub fn feature_defs() -> Vec<FeatureDef> {
    vec![
        FeatureDef::numeric("mileage_since_last_replacement", Some("miles")),
        FeatureDef::numeric("component_age", Some("days")),
        FeatureDef::categorical("pocket_number"),
        FeatureDef::categorical("condition_code"),
        FeatureDef::numeric("car_age", Some("days")),
        FeatureDef::numeric("loading_count", Some("count")),
        FeatureDef::numeric("loading_regions", Some("count")),
        FeatureDef::numeric("avg_days_in_service", Some("days")),
        FeatureDef::numeric("avg_day_trip_loaded", Some("days")),
        FeatureDef::numeric("avg_day_trip_empty", Some("days")),
        FeatureDef::numeric("car_mileage", Some("miles")),
    ]
}

fn num(x: f64) -> Value {
    Value::Num(x)
}

fn mean_days(durations: &[i64]) -> Value {
    if durations.is_empty() {
        Value::Missing
    } else {
        num(durations.iter().sum::<i64>() as f64 / durations.len() as f64)
    }
}

/// Build the feature matrix for one component's events. Samples with no
/// qualifying history get missing cells; the target is attached separately
/// via [`label_targets`] so the features stay a pure function of
/// pre-cutoff records.
pub fn engineer_features(
    events: &[MaintenanceEvent],
    cars: &[RailcarRecord],
    cfg: &CutoffConfig,
) -> Result<FeatureMatrix> {
    let horizon_end = cfg.horizon_end();
    for event in events {
        if event.event_date > horizon_end {
            return Err(Error::Ingest(format!(
                "event for {} dated {} is after the horizon end {horizon_end}",
                event.railcar_id, event.event_date
            )));
        }
    }

    let car_index: HashMap<&str, &RailcarRecord> = cars
        .iter()
        .map(|c| (c.railcar_id.as_str(), c))
        .collect();

    // Deterministic row order: sorted sample ids.
    let sample_ids: Vec<SampleId> = events
        .iter()
        .map(MaintenanceEvent::sample_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    // Pre-cutoff events grouped per sample (date order) and the latest
    // odometer reading per car across both locations.
    let mut per_sample: HashMap<SampleId, Vec<&MaintenanceEvent>> = HashMap::new();
    let mut odometer: HashMap<&str, f64> = HashMap::new();
    for id in &sample_ids {
        per_sample.insert(id.clone(), Vec::new());
    }
    for event in events {
        if event.event_date <= cfg.cutoff_date {
            per_sample.get_mut(&event.sample_id()).unwrap().push(event);
            if let Some(m) = event.mileage_at_event {
                let entry = odometer.entry(event.railcar_id.as_str()).or_insert(m);
                *entry = entry.max(m);
            }
        }
    }
    for list in per_sample.values_mut() {
        list.sort_by_key(|e| e.event_date);
    }

    let mut rows = Vec::with_capacity(sample_ids.len());
    for id in &sample_ids {
        let history = &per_sample[id];
        let car_mileage = odometer
            .get(id.railcar_id.as_str())
            .map_or(Value::Missing, |&m| num(m));

        // Last replacement on or before the cutoff.
        let last_replacement = history
            .iter()
            .rev()
            .find(|e| e.event_kind == EventKind::Replacement);
        let (component_age, condition_code, replacement_odometer) = match last_replacement {
            Some(event) => (
                num((cfg.cutoff_date - event.event_date).num_days() as f64),
                event
                    .condition_code
                    .map_or(Value::Missing, |c| Value::Cat(c.to_string())),
                event.mileage_at_event,
            ),
            None => (Value::Missing, Value::Missing, None),
        };

        let mileage_since = match (&car_mileage, replacement_odometer) {
            (Value::Num(total), Some(at_repl)) => num(total - at_repl),
            _ => Value::Missing,
        };

        // Railcar-side features from the car record and its trip log.
        let car = car_index.get(id.railcar_id.as_str());
        let (car_age, loading_count, loading_regions, avg_in_service, avg_loaded, avg_empty) =
            match car {
                Some(car) => {
                    let trips: Vec<_> = car
                        .trips
                        .iter()
                        .filter(|t| t.end_date <= cfg.cutoff_date)
                        .collect();
                    let loaded: Vec<_> = trips.iter().filter(|t| t.loaded).collect();
                    let regions: BTreeSet<&str> =
                        loaded.iter().map(|t| t.region.as_str()).collect();
                    let all_durations: Vec<i64> =
                        trips.iter().map(|t| t.duration_days()).collect();
                    let loaded_durations: Vec<i64> =
                        loaded.iter().map(|t| t.duration_days()).collect();
                    let empty_durations: Vec<i64> = trips
                        .iter()
                        .filter(|t| !t.loaded)
                        .map(|t| t.duration_days())
                        .collect();
                    (
                        num((cfg.cutoff_date - car.build_date).num_days() as f64),
                        num(loaded.len() as f64),
                        num(regions.len() as f64),
                        mean_days(&all_durations),
                        mean_days(&loaded_durations),
                        mean_days(&empty_durations),
                    )
                }
                None => (
                    Value::Missing,
                    Value::Missing,
                    Value::Missing,
                    Value::Missing,
                    Value::Missing,
                    Value::Missing,
                ),
            };

        rows.push(vec![
            mileage_since,
            component_age,
            Value::Cat(format!("P{}", id.location)),
            condition_code,
            car_age,
            loading_count,
            loading_regions,
            avg_in_service,
            avg_loaded,
            avg_empty,
            car_mileage,
        ]);
    }

    FeatureMatrix::new(feature_defs(), sample_ids, rows)
}

/// Attach labels from [`label_targets`] to a matrix built by
/// [`engineer_features`] over the same events.
pub fn attach_targets(
    matrix: FeatureMatrix,
    labels: &BTreeMap<SampleId, u8>,
) -> Result<FeatureMatrix> {
    let target = matrix
        .sample_ids()
        .iter()
        .map(|id| {
            labels
                .get(id)
                .copied()
                .ok_or_else(|| Error::SchemaMismatch(format!("no label for sample '{id}'")))
        })
        .collect::<Result<Vec<u8>>>()?;
    matrix.with_target(target)
}
