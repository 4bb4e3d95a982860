//! Raw maintenance records, railcar metadata, and CSV ingest.
//!
//! Input files:
//! - `events.csv`: `railcar_id,component_id,location,event_date,event_kind,condition_code,mileage`
//! - `cars.csv`: `railcar_id,build_date,region`
//! - `trips.csv` (optional): `railcar_id,start_date,end_date,loaded,region`
//!
//! Dates are ISO-8601; an empty field is a missing value.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the monitored component groups, identified by a small positive
/// integer (component #1, #2, ...).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ComponentId(pub u8);

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for ComponentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: u8 = s
            .parse()
            .map_err(|_| Error::Ingest(format!("invalid component id '{s}'")))?;
        if n == 0 {
            return Err(Error::Ingest("component id must be >= 1".into()));
        }
        Ok(ComponentId(n))
    }
}

/// What a maintenance record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Replacement,
    Inspection,
    Failure,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::Replacement => "replacement",
            EventKind::Inspection => "inspection",
            EventKind::Failure => "failure",
        };
        f.write_str(s)
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replacement" => Ok(EventKind::Replacement),
            "inspection" => Ok(EventKind::Inspection),
            "failure" => Ok(EventKind::Failure),
            other => Err(Error::Ingest(format!("invalid event kind '{other}'"))),
        }
    }
}

/// Condition of an installed part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionCode {
    New,
    Refurbished,
}

impl fmt::Display for ConditionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConditionCode::New => "new",
            ConditionCode::Refurbished => "refurbished",
        };
        f.write_str(s)
    }
}

impl FromStr for ConditionCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "new" => Ok(ConditionCode::New),
            "refurbished" => Ok(ConditionCode::Refurbished),
            other => Err(Error::Ingest(format!("invalid condition code '{other}'"))),
        }
    }
}

/// One dated repair/inspection record for a (railcar, component, location)
/// triple. Optional fields may be absent in the raw data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceEvent {
    pub railcar_id: String,
    pub component: ComponentId,
    /// Position of the component on the car; every component in this
    /// study has two locations.
    pub location: u8,
    pub event_date: NaiveDate,
    pub event_kind: EventKind,
    pub condition_code: Option<ConditionCode>,
    /// Car odometer reading at the event, in miles.
    pub mileage_at_event: Option<f64>,
}

impl MaintenanceEvent {
    /// The fields that identify an event; duplicates on this key are
    /// rejected at ingest.
    pub fn dedup_key(&self) -> (String, ComponentId, u8, NaiveDate, EventKind) {
        (
            self.railcar_id.clone(),
            self.component,
            self.location,
            self.event_date,
            self.event_kind,
        )
    }

    pub fn sample_id(&self) -> SampleId {
        SampleId {
            railcar_id: self.railcar_id.clone(),
            component: self.component,
            location: self.location,
        }
    }
}

/// Identity of one sample: the railcar joined with the component location.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleId {
    pub railcar_id: String,
    pub component: ComponentId,
    pub location: u8,
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.railcar_id, self.component, self.location)
    }
}

impl FromStr for SampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        // Split off the two rightmost segments so railcar ids containing
        // ':' still round-trip.
        let mut parts = s.rsplitn(3, ':');
        let loc = parts.next();
        let comp = parts.next();
        let car = parts.next();
        match (car, comp, loc) {
            (Some(car), Some(comp), Some(loc)) => Ok(SampleId {
                railcar_id: car.to_string(),
                component: comp.parse()?,
                location: loc
                    .parse()
                    .map_err(|_| Error::Ingest(format!("invalid location in '{s}'")))?,
            }),
            _ => Err(Error::Ingest(format!("invalid sample id '{s}'"))),
        }
    }
}

/// One service trip of a railcar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub loaded: bool,
    pub region: String,
}

impl Trip {
    pub fn duration_days(&self) -> i64 {
        (self.end_date - self.start_date).num_days()
    }
}

/// Static railcar metadata plus its trip log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RailcarRecord {
    pub railcar_id: String,
    pub build_date: NaiveDate,
    pub region: String,
    pub trips: Vec<Trip>,
}

/// The timestamp splitting feature history (before) from target outcomes
/// (after), with the horizon inside which a failure counts as a positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffConfig {
    pub cutoff_date: NaiveDate,
    /// Days after the cutoff inside which a failure sets the target to 1.
    pub horizon_days: u32,
}

impl CutoffConfig {
    pub fn new(cutoff_date: NaiveDate, horizon_days: u32) -> Result<Self> {
        if horizon_days == 0 {
            return Err(Error::InvalidArgument("horizon must be > 0".into()));
        }
        Ok(CutoffConfig {
            cutoff_date,
            horizon_days,
        })
    }

    pub fn horizon_end(&self) -> NaiveDate {
        self.cutoff_date + Days::new(u64::from(self.horizon_days))
    }

    /// True when `date` falls in the half-open failure window
    /// (cutoff, cutoff + horizon].
    pub fn in_failure_window(&self, date: NaiveDate) -> bool {
        date > self.cutoff_date && date <= self.horizon_end()
    }
}

fn opt_field(s: &str) -> Option<&str> {
    if s.is_empty() {
        None
    } else {
        Some(s)
    }
}

fn parse_date(s: &str, what: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| Error::Ingest(format!("invalid {what} date '{s}'")))
}

/// Read and validate `events.csv`. Duplicate (railcar, component,
/// location, date, kind) rows are rejected.
pub fn read_events(path: &Path) -> Result<Vec<MaintenanceEvent>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    let mut events = Vec::new();
    let mut seen = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
        if record.len() != 7 {
            return Err(Error::Ingest(format!(
                "events row has {} fields, expected 7",
                record.len()
            )));
        }
        let mileage = match opt_field(&record[6]) {
            Some(s) => {
                let m: f64 = s
                    .parse()
                    .map_err(|_| Error::Ingest(format!("invalid mileage '{s}'")))?;
                if !m.is_finite() || m < 0.0 {
                    return Err(Error::Ingest(format!("mileage must be >= 0, got {s}")));
                }
                Some(m)
            }
            None => None,
        };
        let event = MaintenanceEvent {
            railcar_id: record[0].to_string(),
            component: record[1].parse()?,
            location: record[2]
                .parse()
                .map_err(|_| Error::Ingest(format!("invalid location '{}'", &record[2])))?,
            event_date: parse_date(&record[3], "event")?,
            event_kind: record[4].parse()?,
            condition_code: opt_field(&record[5]).map(str::parse).transpose()?,
            mileage_at_event: mileage,
        };
        if !seen.insert(event.dedup_key()) {
            return Err(Error::Ingest(format!(
                "duplicate event for {} component {} location {} on {} ({})",
                event.railcar_id,
                event.component,
                event.location,
                event.event_date,
                event.event_kind
            )));
        }
        events.push(event);
    }
    Ok(events)
}

/// Read `cars.csv`; trip logs start empty and are attached by
/// [`read_trips_into`].
pub fn read_cars(path: &Path) -> Result<Vec<RailcarRecord>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    let mut cars = Vec::new();
    let mut seen = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
        if record.len() != 3 {
            return Err(Error::Ingest(format!(
                "cars row has {} fields, expected 3",
                record.len()
            )));
        }
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::Ingest(format!("duplicate railcar id '{id}'")));
        }
        cars.push(RailcarRecord {
            railcar_id: id,
            build_date: parse_date(&record[1], "build")?,
            region: record[2].to_string(),
            trips: Vec::new(),
        });
    }
    Ok(cars)
}

/// Read `trips.csv` and attach each trip to its railcar record. Trips for
/// unknown railcars are an ingest error.
pub fn read_trips_into(path: &Path, cars: &mut [RailcarRecord]) -> Result<()> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    let mut index = std::collections::HashMap::new();
    for (i, car) in cars.iter().enumerate() {
        index.insert(car.railcar_id.clone(), i);
    }
    for record in reader.records() {
        let record = record.map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
        if record.len() != 5 {
            return Err(Error::Ingest(format!(
                "trips row has {} fields, expected 5",
                record.len()
            )));
        }
        let car_idx = *index
            .get(&record[0])
            .ok_or_else(|| Error::Ingest(format!("trip references unknown railcar '{}'", &record[0])))?;
        let trip = Trip {
            start_date: parse_date(&record[1], "trip start")?,
            end_date: parse_date(&record[2], "trip end")?,
            loaded: match &record[3] {
                "true" | "1" => true,
                "false" | "0" => false,
                other => {
                    return Err(Error::Ingest(format!("invalid loaded flag '{other}'")));
                }
            },
            region: record[4].to_string(),
        };
        if trip.end_date < trip.start_date {
            return Err(Error::Ingest(format!(
                "trip for '{}' ends before it starts",
                &record[0]
            )));
        }
        cars[car_idx].trips.push(trip);
    }
    Ok(())
}
