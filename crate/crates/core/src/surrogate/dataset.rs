use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::Domain;

/// Identity of an observation: who produced it and its position in that node's stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub node_id: u32,
    pub seq: u64,
}

/// One evaluated query, the unit of broadcast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord<T> {
    pub node_id: u32,
    pub seq: u64,
    pub x: Vec<T>,
    pub y: T,
}

impl<T: Scalar> ObservationRecord<T> {
    pub fn new(node_id: u32, seq: u64, x: Vec<T>, y: T) -> Self {
        Self { node_id, seq, x, y }
    }

    pub fn key(&self) -> RecordKey {
        RecordKey { node_id: self.node_id, seq: self.seq }
    }

    /// Bitwise payload equality (NaN-safe, distinguishes ±0).
    pub fn same_payload(&self, other: &Self) -> bool {
        self.x.len() == other.x.len()
            && self.x.iter().zip(&other.x).all(|(a, b)| a.as_f64().to_bits() == b.as_f64().to_bits())
            && self.y.as_f64().to_bits() == other.y.as_f64().to_bits()
    }
}

/// Set of observations keyed by `(node_id, seq)`. Iteration is always in key order,
/// so everything computed from a dataset is independent of insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    domain: Domain<T>,
    records: BTreeMap<RecordKey, ObservationRecord<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(domain: Domain<T>) -> Self {
        Self { domain, records: BTreeMap::new() }
    }

    pub fn from_records(domain: Domain<T>, records: impl IntoIterator<Item = ObservationRecord<T>>) -> Result<Self> {
        let mut d = Self::new(domain);
        for r in records {
            d.insert(r)?;
        }
        Ok(d)
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Inserts a record. Returns `Ok(true)` if it was new, `Ok(false)` for an
    /// identical duplicate, and a protocol violation for a conflicting one.
    pub fn insert(&mut self, record: ObservationRecord<T>) -> Result<bool> {
        self.domain.check_point(&record.x)?;
        if !self.domain.contains(&record.x) {
            return Err(Error::invalid(format!(
                "record ({}, {}) lies outside the domain",
                record.node_id, record.seq
            )));
        }
        let key = record.key();
        match self.records.get(&key) {
            Some(existing) if existing.same_payload(&record) => Ok(false),
            Some(_) => Err(Error::ProtocolViolation { node_id: key.node_id, seq: key.seq }),
            None => {
                self.records.insert(key, record);
                Ok(true)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.records.contains_key(key)
    }

    pub fn get(&self, key: &RecordKey) -> Option<&ObservationRecord<T>> {
        self.records.get(key)
    }

    /// Records in canonical `(node_id, seq)` order.
    pub fn iter(&self) -> impl Iterator<Item = &ObservationRecord<T>> {
        self.records.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &RecordKey> {
        self.records.keys()
    }

    pub fn xs(&self) -> Vec<Vec<T>> {
        self.iter().map(|r| r.x.clone()).collect()
    }

    pub fn ys(&self) -> Vec<T> {
        self.iter().map(|r| r.y).collect()
    }

    /// Lowest observed value, ties resolved by canonical order.
    pub fn best(&self) -> Option<&ObservationRecord<T>> {
        self.iter().fold(None, |best: Option<&ObservationRecord<T>>, r| match best {
            Some(b) if b.y <= r.y => Some(b),
            _ => Some(r),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(node: u32, seq: u64, x: f64, y: f64) -> ObservationRecord<f64> {
        ObservationRecord::new(node, seq, vec![x], y)
    }

    #[test]
    fn duplicates_and_conflicts() {
        let mut d = Dataset::new(Domain::unit(1));
        assert!(d.insert(rec(0, 0, 0.5, 1.0)).unwrap());
        assert!(!d.insert(rec(0, 0, 0.5, 1.0)).unwrap());
        assert_eq!(d.len(), 1);
        match d.insert(rec(0, 0, 0.5, 2.0)) {
            Err(Error::ProtocolViolation { node_id: 0, seq: 0 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_domain_rejected() {
        let mut d = Dataset::new(Domain::unit(1));
        assert!(d.insert(rec(0, 0, 1.5, 1.0)).is_err());
        assert!(d.insert(ObservationRecord::new(0, 0, vec![0.1, 0.2], 1.0)).is_err());
    }

    #[test]
    fn canonical_order_and_best() {
        let mut d = Dataset::new(Domain::unit(1));
        d.insert(rec(2, 0, 0.1, -1.0)).unwrap();
        d.insert(rec(0, 1, 0.2, -1.0)).unwrap();
        d.insert(rec(0, 0, 0.3, 4.0)).unwrap();
        let keys: Vec<_> = d.keys().map(|k| (k.node_id, k.seq)).collect();
        assert_eq!(keys, vec![(0, 0), (0, 1), (2, 0)]);
        assert_eq!(d.best().unwrap().key(), RecordKey { node_id: 0, seq: 1 });
    }
}
