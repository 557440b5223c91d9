use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub round: usize,
    pub client: usize,
    pub method: String,
    pub bytes: u64,
}

/// Transmitted bytes per round, client and method.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommLedger {
    entries: Vec<LedgerEntry>,
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record the summed length of the messages a client exchanged in a round.
    pub fn record<'a>(&mut self, round: usize, client: usize, method: &str, messages: impl IntoIterator<Item = &'a [u8]>) {
        let bytes = messages.into_iter().map(|m| m.len() as u64).sum();
        self.record_bytes(round, client, method, bytes);
    }

    pub fn record_bytes(&mut self, round: usize, client: usize, method: &str, bytes: u64) {
        self.entries.push(LedgerEntry {
            round,
            client,
            method: method.to_string(),
            bytes,
        });
    }

    /// Entries ordered by round, then client, then method.
    pub fn entries(&self) -> Vec<LedgerEntry> {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| (a.round, a.client, &a.method).cmp(&(b.round, b.client, &b.method)));
        e
    }

    pub fn extend(&mut self, other: CommLedger) {
        self.entries.extend(other.entries);
    }

    pub fn methods(&self) -> Vec<String> {
        let mut m: Vec<String> = self.entries.iter().map(|e| e.method.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn total(&self, method: &str) -> Result<u64> {
        let mut found = false;
        let mut sum = 0;
        for e in self.entries.iter().filter(|e| e.method == method) {
            found = true;
            sum += e.bytes;
        }
        if found {
            Ok(sum)
        } else {
            Err(Error::MissingMethod(method.to_string()))
        }
    }

    /// Running total after each round that has entries for `method`.
    pub fn cumulative_by_round(&self, method: &str) -> Result<Vec<(usize, u64)>> {
        self.total(method)?;
        let mut per_round: BTreeMap<usize, u64> = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.method == method) {
            *per_round.entry(e.round).or_default() += e.bytes;
        }
        let mut acc = 0;
        Ok(per_round
            .into_iter()
            .map(|(r, b)| {
                acc += b;
                (r, acc)
            })
            .collect())
    }

    /// `total(a) / total(b)`.
    pub fn comm_ratio(&self, a: &str, b: &str) -> Result<f64> {
        let (ta, tb) = (self.total(a)?, self.total(b)?);
        if tb == 0 {
            return Err(Error::invalid(format!("method {b} transmitted zero bytes")));
        }
        Ok(ta as f64 / tb as f64)
    }
}
