//! Historical training triplets and test conditions, persisted as
//! line-delimited JSON.
//!
//! ```text
//! train: {"id": 0, "cities": [[x, y], ...], "route": [i, ...], "length": l}
//! test:  {"id": 0, "cities": [[x, y], ...]}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsp::{self, ProblemInstance, Route};

/// Tolerance between a stored length and the recomputed tour length.
pub const LENGTH_TOLERANCE: f64 = 1e-9;

/// One historical triplet: condition, solution, measured performance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub id: u64,
    pub instance: ProblemInstance,
    pub route: Route,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub id: u64,
    pub instance: ProblemInstance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Train(Vec<TrainingRecord>),
    Test(Vec<TestRecord>),
}

impl Dataset {
    pub fn kind(&self) -> DatasetKind {
        match self {
            Dataset::Train(_) => DatasetKind::Train,
            Dataset::Test(_) => DatasetKind::Test,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Train(r) => r.len(),
            Dataset::Test(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Problem conditions in record order, regardless of kind.
    pub fn instances(&self) -> Vec<&ProblemInstance> {
        match self {
            Dataset::Train(r) => r.iter().map(|r| &r.instance).collect(),
            Dataset::Test(r) => r.iter().map(|r| &r.instance).collect(),
        }
    }

    pub fn instance(&self, id: u64) -> Option<&ProblemInstance> {
        self.instances().into_iter().find(|i| i.id() == id)
    }

    pub fn as_train(&self) -> Option<&[TrainingRecord]> {
        match self {
            Dataset::Train(r) => Some(r),
            Dataset::Test(_) => None,
        }
    }

    pub fn as_test(&self) -> Option<&[TestRecord]> {
        match self {
            Dataset::Test(r) => Some(r),
            Dataset::Train(_) => None,
        }
    }
}

/// `count` instances of `n` uniform cities, each paired with one uniformly
/// random tour and its true length.
pub fn generate_training_set<R: Rng + ?Sized>(count: usize, n: usize, rng: &mut R) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "city count must be at least 2, got {n}"
        )));
    }
    let mut records = Vec::with_capacity(count);
    for id in 0..count as u64 {
        let instance = tsp::sample_instance(id, n, rng)?;
        let route = Route::random(n, rng);
        let length = tsp::closed_length(&instance, route.order());
        records.push(TrainingRecord {
            id,
            instance,
            route,
            length,
        });
    }
    Ok(Dataset::Train(records))
}

/// `count` instances whose city counts are uniform on `n_min..=n_max`.
pub fn generate_test_set<R: Rng + ?Sized>(count: usize, n_min: usize, n_max: usize, rng: &mut R) -> Result<Dataset> {
    if n_min < 2 || n_min > n_max {
        return Err(Error::InvalidArgument(format!(
            "city range [{n_min}, {n_max}] must satisfy 2 <= min <= max"
        )));
    }
    let mut records = Vec::with_capacity(count);
    for id in 0..count as u64 {
        let n = rng.gen_range(n_min..=n_max);
        let instance = tsp::sample_instance(id, n, rng)?;
        records.push(TestRecord { id, instance });
    }
    Ok(Dataset::Test(records))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainLine {
    id: u64,
    cities: Vec<[f64; 2]>,
    route: Vec<usize>,
    length: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestLine {
    id: u64,
    cities: Vec<[f64; 2]>,
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut emit = |line: String| -> Result<()> {
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))
    };
    match dataset {
        Dataset::Train(records) => {
            for r in records {
                emit(to_json(&TrainLine {
                    id: r.id,
                    cities: r.instance.cities().to_vec(),
                    route: r.route.order().to_vec(),
                    length: r.length,
                })?)?;
            }
        }
        Dataset::Test(records) => {
            for r in records {
                emit(to_json(&TestLine {
                    id: r.id,
                    cities: r.instance.cities().to_vec(),
                })?)?;
            }
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Numerical(format!("cannot serialize record: {e}")))
}

/// Reads a dataset of the declared kind. Blank lines are ignored.
pub fn read_dataset(path: impl AsRef<Path>, kind: DatasetKind) -> Result<Dataset> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let mut last_id: Option<u64> = None;
    let mut check_id = |line: usize, id: u64| -> Result<()> {
        if last_id.is_some_and(|prev| id <= prev) {
            return Err(Error::Validation {
                line: Some(line),
                message: format!("record id {id} is not strictly increasing"),
            });
        }
        last_id = Some(id);
        Ok(())
    };
    match kind {
        DatasetKind::Train => {
            let mut records = Vec::with_capacity(lines.len());
            for (line, text) in lines {
                let raw: TrainLine = parse_line(line, &text)?;
                check_id(line, raw.id)?;
                records.push(train_record(raw).map_err(|e| at_line(e, line))?);
            }
            Ok(Dataset::Train(records))
        }
        DatasetKind::Test => {
            let mut records = Vec::with_capacity(lines.len());
            for (line, text) in lines {
                let raw: TestLine = parse_line(line, &text)?;
                check_id(line, raw.id)?;
                let instance = ProblemInstance::new(raw.id, raw.cities).map_err(|e| at_line(e, line))?;
                records.push(TestRecord { id: raw.id, instance });
            }
            Ok(Dataset::Test(records))
        }
    }
}

/// Reads either kind, deciding from the first record whether a route is
/// present. An empty file reads as an empty test set.
pub fn read_dataset_any(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let kind = match lines.first() {
        None => DatasetKind::Test,
        Some((line, text)) => {
            let value: serde_json::Value = parse_line(*line, text)?;
            if value.get("route").is_some() {
                DatasetKind::Train
            } else {
                DatasetKind::Test
            }
        }
    };
    read_dataset(path, kind)
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let text = line.map_err(|e| Error::io(path, e))?;
        if !text.trim().is_empty() {
            out.push((i + 1, text));
        }
    }
    Ok(out)
}

fn parse_line<T: for<'de> Deserialize<'de>>(line: usize, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })
}

fn train_record(raw: TrainLine) -> Result<TrainingRecord> {
    let instance = ProblemInstance::new(raw.id, raw.cities)?;
    let route = Route::new(raw.route, instance.len())?;
    let actual = tsp::closed_length(&instance, route.order());
    if !raw.length.is_finite() || (actual - raw.length).abs() > LENGTH_TOLERANCE {
        return Err(Error::validation(format!(
            "recorded length {} disagrees with tour length {actual}",
            raw.length
        )));
    }
    Ok(TrainingRecord {
        id: raw.id,
        instance,
        route,
        length: raw.length,
    })
}

fn at_line(err: Error, line: usize) -> Error {
    match err {
        Error::Validation { message, .. } | Error::InvalidArgument(message) | Error::InvalidRoute(message) => {
            Error::Validation {
                line: Some(line),
                message,
            }
        }
        other => other,
    }
}
