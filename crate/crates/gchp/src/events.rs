//! Event-sequence data model and JSONL ingestion.
//!
//! A dataset is a collection of attributed event sequences. Each sequence
//! lives on an observation window `[0, T]` and carries strictly increasing
//! event times with either categorical marks (dense ids in `[0, K)`) or
//! real-valued vector marks of a fixed dimension.
//!
//! Times are plain reals in abstract units; there is no calendar handling.
//! Coincident timestamps are rejected rather than jittered — a simple point
//! process has no duplicate points.
//!
//! # Wire format
//!
//! One sequence per line:
//!
//! ```text
//! {"id":"s1","T":10.0,"events":[{"t":1.0,"k":0},{"t":3.5,"k":2}]}
//! ```
//!
//! Vector marks replace `"k"` with `"x":[...]`. Unknown keys are rejected.
//! Numbers round-trip at full precision.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Errors raised while loading, writing, or splitting datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {0}: malformed sequence record")]
    MalformedLine(usize),
    #[error("sequence {seq_id}: event times not strictly increasing at index {index}")]
    NonMonotoneTimes { seq_id: String, index: usize },
    #[error("sequence {seq_id}: mark out of range at index {index}")]
    MarkOutOfRange { seq_id: String, index: usize },
    #[error("sequence {seq_id}: event time exceeds horizon")]
    HorizonViolation { seq_id: String },
    #[error("split requires at least 2 sequences")]
    TooFewSequences,
    #[error("io failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

/// Declared mark space of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkKind {
    /// Dense ids in `[0, num_classes)`. `K` is declared, not inferred, so a
    /// split may lack some classes.
    Categorical { num_classes: usize },
    /// Real vectors of length `dim`.
    Vector { dim: usize },
}

/// Mark attached to one event.
#[derive(Debug, Clone, PartialEq)]
pub enum Mark<T> {
    Categorical(usize),
    Vector(Vec<T>),
}

impl<T> Mark<T> {
    pub fn class(&self) -> Option<usize> {
        match self {
            Mark::Categorical(k) => Some(*k),
            Mark::Vector(_) => None,
        }
    }
}

/// One timestamped, marked event.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<T> {
    /// Absolute event time, nonnegative and finite.
    pub t: T,
    pub mark: Mark<T>,
}

/// Ordered events on an observation window `[0, T]`. Empty sequences are legal.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence<T> {
    pub id: String,
    /// Horizon `T` of the observation window; every event time is `<= horizon`.
    pub horizon: T,
    pub events: Vec<Event<T>>,
}

impl<T: Real> EventSequence<T> {
    /// Interarrival times `tau_i = t_i - t_{i-1}` with `t_0 = 0`.
    pub fn interarrivals(&self) -> Vec<T> {
        let mut prev = T::zero();
        self.events
            .iter()
            .map(|e| {
                let tau = e.t - prev;
                prev = e.t;
                tau
            })
            .collect()
    }

    /// Event times only.
    pub fn times(&self) -> Vec<T> {
        self.events.iter().map(|e| e.t).collect()
    }
}

/// A set of sequences sharing one mark space.
///
/// Immutable after construction; safe to share read-only across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub sequences: Vec<EventSequence<T>>,
    pub mark_kind: MarkKind,
}

impl<T: Real> Dataset<T> {
    /// Builds a dataset, re-validating every sequence invariant.
    pub fn new(sequences: Vec<EventSequence<T>>, mark_kind: MarkKind) -> Result<Self, DataError> {
        for seq in &sequences {
            validate_sequence(seq, mark_kind)?;
        }
        Ok(Dataset {
            sequences,
            mark_kind,
        })
    }

    pub fn total_events(&self) -> usize {
        self.sequences.iter().map(|s| s.events.len()).sum()
    }

    /// Sum of the observation horizons of all sequences.
    pub fn total_horizon(&self) -> T {
        self.sequences
            .iter()
            .fold(T::zero(), |acc, s| acc + s.horizon)
    }

    /// Pooled interarrivals across sequences, in sequence order.
    pub fn pooled_interarrivals(&self) -> Vec<T> {
        self.sequences
            .iter()
            .flat_map(|s| s.interarrivals())
            .collect()
    }
}

fn validate_sequence<T: Real>(seq: &EventSequence<T>, mark_kind: MarkKind) -> Result<(), DataError> {
    if !(seq.horizon.is_finite() && seq.horizon > T::zero()) {
        return Err(DataError::HorizonViolation {
            seq_id: seq.id.clone(),
        });
    }
    let mut prev: Option<T> = None;
    for (index, ev) in seq.events.iter().enumerate() {
        if !(ev.t.is_finite() && ev.t >= T::zero()) {
            return Err(DataError::NonMonotoneTimes {
                seq_id: seq.id.clone(),
                index,
            });
        }
        if let Some(p) = prev {
            if ev.t <= p {
                return Err(DataError::NonMonotoneTimes {
                    seq_id: seq.id.clone(),
                    index,
                });
            }
        }
        if ev.t > seq.horizon {
            return Err(DataError::HorizonViolation {
                seq_id: seq.id.clone(),
            });
        }
        let mark_ok = match (&ev.mark, mark_kind) {
            (Mark::Categorical(k), MarkKind::Categorical { num_classes }) => *k < num_classes,
            (Mark::Vector(x), MarkKind::Vector { dim }) => x.len() == dim,
            _ => false,
        };
        if !mark_ok {
            return Err(DataError::MarkOutOfRange {
                seq_id: seq.id.clone(),
                index,
            });
        }
        prev = Some(ev.t);
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord<T> {
    t: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<Vec<T>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceRecord<T> {
    id: String,
    #[serde(rename = "T")]
    horizon: T,
    events: Vec<EventRecord<T>>,
}

/// Parses a JSONL dataset file against a declared mark space.
pub fn parse_jsonl<T>(path: &Path, mark_kind: MarkKind) -> Result<Dataset<T>, DataError>
where
    T: Real + Serialize + for<'de> Deserialize<'de>,
{
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut sequences = Vec::new();
    for (line_idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = line_idx + 1;
        let record: SequenceRecord<T> =
            serde_json::from_str(&line).map_err(|_| DataError::MalformedLine(line_no))?;
        let mut events = Vec::with_capacity(record.events.len());
        for ev in record.events {
            let mark = match (ev.k, ev.x, mark_kind) {
                (Some(k), None, MarkKind::Categorical { .. }) => Mark::Categorical(k),
                (None, Some(x), MarkKind::Vector { .. }) => Mark::Vector(x),
                _ => return Err(DataError::MalformedLine(line_no)),
            };
            if !(ev.t.is_finite() && ev.t >= T::zero()) {
                return Err(DataError::MalformedLine(line_no));
            }
            events.push(Event { t: ev.t, mark });
        }
        if !(record.horizon.is_finite() && record.horizon > T::zero()) {
            return Err(DataError::MalformedLine(line_no));
        }
        let seq = EventSequence {
            id: record.id,
            horizon: record.horizon,
            events,
        };
        validate_sequence(&seq, mark_kind)?;
        sequences.push(seq);
    }
    Dataset::new(sequences, mark_kind)
}

/// Writes a dataset as JSONL, one sequence per line.
///
/// `parse_jsonl(write_jsonl(d))` reproduces `d` bit-exactly: times are
/// serialized with full round-trip precision.
pub fn write_jsonl<T>(dataset: &Dataset<T>, path: &Path) -> Result<(), DataError>
where
    T: Real + Serialize + for<'de> Deserialize<'de>,
{
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    for seq in &dataset.sequences {
        let record = SequenceRecord {
            id: seq.id.clone(),
            horizon: seq.horizon,
            events: seq
                .events
                .iter()
                .map(|e| match &e.mark {
                    Mark::Categorical(k) => EventRecord {
                        t: e.t,
                        k: Some(*k),
                        x: None,
                    },
                    Mark::Vector(x) => EventRecord {
                        t: e.t,
                        k: None,
                        x: Some(x.clone()),
                    },
                })
                .collect(),
        };
        let json = serde_json::to_string(&record).expect("sequence record serializes");
        writeln!(writer, "{json}")?;
    }
    writer.flush()?;
    Ok(())
}

/// Splits a dataset into disjoint, exhaustive train/test parts by whole
/// sequences. Deterministic given `seed`.
///
/// The train side gets `round(train_fraction * n)` sequences, clamped so that
/// neither side is empty.
pub fn split<T: Real>(
    dataset: &Dataset<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>), DataError> {
    let n = dataset.sequences.len();
    if n < 2 {
        return Err(DataError::TooFewSequences);
    }
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train_fraction must lie in (0, 1)"
    );
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut train_idx: Vec<usize> = indices[..n_train].to_vec();
    let mut test_idx: Vec<usize> = indices[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize]| Dataset {
        sequences: idx.iter().map(|&i| dataset.sequences[i].clone()).collect(),
        mark_kind: dataset.mark_kind,
    };
    Ok((pick(&train_idx), pick(&test_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write as _;

    fn cat(k: usize) -> MarkKind {
        MarkKind::Categorical { num_classes: k }
    }

    fn write_temp(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    #[test]
    fn parses_basic_line() {
        let f = write_temp(&[r#"{"id":"s1","T":10.0,"events":[{"t":1.0,"k":0},{"t":3.5,"k":2}]}"#]);
        let ds: Dataset<f64> = parse_jsonl(f.path(), cat(3)).unwrap();
        assert_eq!(ds.sequences.len(), 1);
        assert_eq!(ds.sequences[0].events.len(), 2);
        assert_eq!(ds.sequences[0].events[1].mark, Mark::Categorical(2));
        assert_eq!(ds.sequences[0].interarrivals(), vec![1.0, 2.5]);
    }

    #[test]
    fn tied_times_rejected() {
        let f = write_temp(&[r#"{"id":"s1","T":10.0,"events":[{"t":2.0,"k":0},{"t":2.0,"k":1}]}"#]);
        let err = parse_jsonl::<f64>(f.path(), cat(3)).unwrap_err();
        assert!(matches!(err, DataError::NonMonotoneTimes { index: 1, .. }));
    }

    #[test]
    fn empty_sequence_accepted() {
        let f = write_temp(&[r#"{"id":"s2","T":5.0,"events":[]}"#]);
        let ds: Dataset<f64> = parse_jsonl(f.path(), cat(3)).unwrap();
        assert_eq!(ds.sequences[0].events.len(), 0);
    }

    #[test]
    fn unknown_keys_rejected() {
        let f = write_temp(&[r#"{"id":"s1","T":5.0,"events":[],"extra":1}"#]);
        let err = parse_jsonl::<f64>(f.path(), cat(3)).unwrap_err();
        assert!(matches!(err, DataError::MalformedLine(1)));
    }

    #[test]
    fn mark_out_of_range() {
        let f = write_temp(&[r#"{"id":"s1","T":5.0,"events":[{"t":1.0,"k":3}]}"#]);
        let err = parse_jsonl::<f64>(f.path(), cat(3)).unwrap_err();
        assert!(matches!(err, DataError::MarkOutOfRange { index: 0, .. }));
    }

    #[test]
    fn horizon_violation() {
        let f = write_temp(&[r#"{"id":"s1","T":5.0,"events":[{"t":6.0,"k":0}]}"#]);
        let err = parse_jsonl::<f64>(f.path(), cat(3)).unwrap_err();
        assert!(matches!(err, DataError::HorizonViolation { .. }));
    }

    #[test]
    fn vector_marks_roundtrip() {
        let f = write_temp(&[r#"{"id":"v","T":4.0,"events":[{"t":0.5,"x":[1.0,-2.0]}]}"#]);
        let ds: Dataset<f64> = parse_jsonl(f.path(), MarkKind::Vector { dim: 2 }).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_jsonl(&ds, out.path()).unwrap();
        let back: Dataset<f64> = parse_jsonl(out.path(), MarkKind::Vector { dim: 2 }).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn empty_dataset_writes_zero_lines() {
        let ds: Dataset<f64> = Dataset::new(vec![], cat(2)).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_jsonl(&ds, out.path()).unwrap();
        let contents = std::fs::read_to_string(out.path()).unwrap();
        assert!(contents.is_empty());
    }

    #[test]
    fn split_matches_expected_shape() {
        let sequences: Vec<EventSequence<f64>> = (0..140)
            .map(|i| EventSequence {
                id: format!("s{i}"),
                horizon: 1.0,
                events: vec![],
            })
            .collect();
        let ds = Dataset::new(sequences, cat(10)).unwrap();
        let (train, test) = split(&ds, 100.0 / 140.0, 7).unwrap();
        assert_eq!(train.sequences.len(), 100);
        assert_eq!(test.sequences.len(), 40);
    }

    #[test]
    fn split_two_sequences_half() {
        let sequences: Vec<EventSequence<f64>> = (0..2)
            .map(|i| EventSequence {
                id: format!("s{i}"),
                horizon: 1.0,
                events: vec![],
            })
            .collect();
        let ds = Dataset::new(sequences, cat(2)).unwrap();
        let (train, test) = split(&ds, 0.5, 3).unwrap();
        assert_eq!(train.sequences.len(), 1);
        assert_eq!(test.sequences.len(), 1);
    }

    #[test]
    fn split_deterministic() {
        let sequences: Vec<EventSequence<f64>> = (0..17)
            .map(|i| EventSequence {
                id: format!("s{i}"),
                horizon: 1.0,
                events: vec![],
            })
            .collect();
        let ds = Dataset::new(sequences, cat(2)).unwrap();
        let a = split(&ds, 0.6, 11).unwrap();
        let b = split(&ds, 0.6, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_too_few() {
        let ds: Dataset<f64> = Dataset::new(
            vec![EventSequence {
                id: "only".into(),
                horizon: 1.0,
                events: vec![],
            }],
            cat(2),
        )
        .unwrap();
        assert!(matches!(
            split(&ds, 0.5, 0),
            Err(DataError::TooFewSequences)
        ));
    }

    proptest! {
        #[test]
        fn split_partitions(n in 2usize..30, frac in 0.05f64..0.95, seed in 0u64..1000) {
            let sequences: Vec<EventSequence<f64>> = (0..n)
                .map(|i| EventSequence { id: format!("s{i}"), horizon: 1.0, events: vec![] })
                .collect();
            let ds = Dataset::new(sequences, cat(2)).unwrap();
            let (train, test) = split(&ds, frac, seed).unwrap();
            prop_assert_eq!(train.sequences.len() + test.sequences.len(), n);
            prop_assert!(!train.sequences.is_empty());
            prop_assert!(!test.sequences.is_empty());
            let mut ids: Vec<&str> = train.sequences.iter().chain(test.sequences.iter())
                .map(|s| s.id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
        }

        #[test]
        fn jsonl_roundtrip(times in proptest::collection::vec(0.0f64..100.0, 0..20)) {
            let mut ts = times;
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ts.dedup();
            let events: Vec<Event<f64>> = ts.iter().enumerate()
                .map(|(i, &t)| Event { t, mark: Mark::Categorical(i % 4) })
                .collect();
            let ds = Dataset::new(
                vec![EventSequence { id: "p".into(), horizon: 101.0, events }],
                cat(4),
            ).unwrap();
            let f = tempfile::NamedTempFile::new().unwrap();
            write_jsonl(&ds, f.path()).unwrap();
            let back: Dataset<f64> = parse_jsonl(f.path(), cat(4)).unwrap();
            prop_assert_eq!(ds, back);
        }
    }
}
