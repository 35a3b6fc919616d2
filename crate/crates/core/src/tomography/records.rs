use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{BlockingConfig, TomographyError};
use crate::ecosim::{AdLogEntry, Persona};
use crate::ids::{AdvertiserId, PersonaId};
use crate::stattest::{chi_square_independence, StatConfig, StatError};
use crate::textvec::{vectorize_tokens, Corpus, CountVector};

/// Everything one advertiser delivered to one persona in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorRecord {
    pub advertiser: AdvertiserId,
    pub persona: PersonaId,
    pub blocking: BlockingConfig,
    pub is_control: bool,
    pub run: u32,
    pub vector: CountVector,
    /// Set by [`flag_changes`].
    pub is_different_from_control: Option<bool>,
}

/// On-disk form of a [`VectorRecord`]; the vector is keyed by token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub advertiser: AdvertiserId,
    pub persona: PersonaId,
    pub blocking: BlockingConfig,
    pub is_control: bool,
    pub run: u32,
    pub vector: BTreeMap<String, u64>,
    pub is_different_from_control: Option<bool>,
}

impl VectorRecord {
    pub fn to_line(&self, corpus: &Corpus) -> RecordLine {
        RecordLine {
            advertiser: self.advertiser.clone(),
            persona: self.persona.clone(),
            blocking: self.blocking.clone(),
            is_control: self.is_control,
            run: self.run,
            vector: self.vector.to_token_map(corpus),
            is_different_from_control: self.is_different_from_control,
        }
    }

    fn key(&self) -> (&AdvertiserId, &PersonaId, u32) {
        (&self.advertiser, &self.persona, self.run)
    }
}

/// Rebuild records from their on-disk lines. The corpus is the union of
/// every token that occurs, which is the corpus the records were built on.
pub fn records_from_lines(lines: Vec<RecordLine>) -> Result<(Corpus, Vec<VectorRecord>), TomographyError> {
    let corpus = Corpus::from_tokens(lines.iter().flat_map(|l| l.vector.keys().cloned()));
    let records = lines
        .into_iter()
        .map(|l| {
            Ok(VectorRecord {
                vector: CountVector::from_token_map(&l.vector, &corpus)?,
                advertiser: l.advertiser,
                persona: l.persona,
                blocking: l.blocking,
                is_control: l.is_control,
                run: l.run,
                is_different_from_control: l.is_different_from_control,
            })
        })
        .collect::<Result<_, TomographyError>>()?;
    Ok((corpus, records))
}

/// Corpus over every token in an ad log.
pub fn adlog_corpus(adlog: &[AdLogEntry]) -> Corpus {
    Corpus::from_tokens(adlog.iter().flat_map(|e| e.tokens.iter().cloned()))
}

/// Sum the count vectors of every ad per (advertiser, persona, run). Output
/// is sorted by that key.
pub fn collate(
    adlog: &[AdLogEntry],
    corpus: &Corpus,
    personas: &[Persona],
) -> Result<Vec<VectorRecord>, TomographyError> {
    let by_id: BTreeMap<&PersonaId, &Persona> = personas.iter().map(|p| (&p.id, p)).collect();
    let mut acc: BTreeMap<(AdvertiserId, PersonaId, u32), CountVector> = BTreeMap::new();
    for e in adlog {
        if !by_id.contains_key(&e.persona) {
            return Err(TomographyError::UnknownPersona(e.persona.clone()));
        }
        let v = vectorize_tokens(e.tokens.iter().map(String::as_str), corpus)?;
        acc.entry((e.advertiser.clone(), e.persona.clone(), e.run))
            .or_insert_with(|| corpus.zero())
            .add_assign(&v)?;
    }
    Ok(acc
        .into_iter()
        .map(|((advertiser, persona, run), vector)| {
            let p = by_id[&persona];
            VectorRecord {
                advertiser,
                blocking: p.blocking.clone(),
                is_control: p.is_control,
                persona,
                run,
                vector,
                is_different_from_control: None,
            }
        })
        .collect())
}

/// Add an all-zero record for every (advertiser, persona, run) that received
/// no ads, so each pair has one record per run.
pub fn fill_missing(
    records: Vec<VectorRecord>,
    advertisers: &[AdvertiserId],
    personas: &[Persona],
    runs: u32,
    corpus: &Corpus,
) -> Vec<VectorRecord> {
    let mut have: BTreeMap<(AdvertiserId, PersonaId, u32), VectorRecord> = records
        .into_iter()
        .map(|r| ((r.advertiser.clone(), r.persona.clone(), r.run), r))
        .collect();
    for a in advertisers {
        for p in personas {
            for run in 0..runs {
                have.entry((a.clone(), p.id.clone(), run)).or_insert_with(|| VectorRecord {
                    advertiser: a.clone(),
                    persona: p.id.clone(),
                    blocking: p.blocking.clone(),
                    is_control: p.is_control,
                    run,
                    vector: corpus.zero(),
                    is_different_from_control: None,
                });
            }
        }
    }
    have.into_values().collect()
}

/// Sum control vectors per (advertiser, run).
pub fn pool_controls(
    controls: &[VectorRecord],
) -> Result<BTreeMap<(AdvertiserId, u32), CountVector>, TomographyError> {
    let mut pooled: BTreeMap<(AdvertiserId, u32), CountVector> = BTreeMap::new();
    for c in controls {
        match pooled.get_mut(&(c.advertiser.clone(), c.run)) {
            Some(v) => v.add_assign(&c.vector)?,
            None => {
                pooled.insert((c.advertiser.clone(), c.run), c.vector.clone());
            }
        }
    }
    Ok(pooled)
}

/// Test one persona vector against the pooled control vector. Tables that
/// cannot be tested (no mass in a row, fewer than two usable columns) are
/// not evidence of a change.
pub fn differs_from_control(
    control: &CountVector,
    persona: &CountVector,
    config: &StatConfig,
) -> Result<bool, TomographyError> {
    let cols: BTreeSet<usize> = control
        .counts()
        .keys()
        .chain(persona.counts().keys())
        .copied()
        .collect();
    let a: Vec<u64> = cols.iter().map(|&i| control.get(i)).collect();
    let b: Vec<u64> = cols.iter().map(|&i| persona.get(i)).collect();
    match chi_square_independence([&a, &b], config) {
        Ok(r) => Ok(r.p_value < config.alpha),
        Err(StatError::AllZero | StatError::InsufficientColumns(_)) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

/// Flag every record whose advertiser behaved differently from the pooled
/// controls of the same run (chi-squared p < alpha).
pub fn flag_changes(
    records: &[VectorRecord],
    controls: &[VectorRecord],
    config: &StatConfig,
) -> Result<Vec<VectorRecord>, TomographyError> {
    config.validate()?;
    let pooled = pool_controls(controls)?;
    records
        .iter()
        .map(|r| {
            let control = pooled.get(&(r.advertiser.clone(), r.run)).ok_or_else(|| {
                TomographyError::MissingControl {
                    advertiser: r.advertiser.clone(),
                    run: r.run,
                }
            })?;
            let mut out = r.clone();
            out.is_different_from_control = Some(differs_from_control(control, &r.vector, config)?);
            Ok(out)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// Sorted run indices held out for testing.
    pub holdout_runs: Vec<u32>,
    pub cv: Vec<VectorRecord>,
    pub holdout: Vec<VectorRecord>,
}

/// Hold out the same `holdout_runs` randomly chosen runs for every
/// (advertiser, persona) pair.
pub fn segment_records(
    records: &[VectorRecord],
    runs: u32,
    holdout_runs: u32,
    seed: u64,
) -> Result<Segmentation, TomographyError> {
    if holdout_runs >= runs {
        return Err(TomographyError::Segmentation(format!(
            "holdout_runs ({holdout_runs}) must be smaller than runs ({runs})"
        )));
    }
    let mut per_pair: BTreeMap<(&AdvertiserId, &PersonaId), BTreeSet<u32>> = BTreeMap::new();
    for r in records {
        if r.run >= runs {
            return Err(TomographyError::Segmentation(format!(
                "record for ({}, {}) has run {} but only {runs} runs exist",
                r.advertiser, r.persona, r.run
            )));
        }
        if !per_pair.entry((&r.advertiser, &r.persona)).or_default().insert(r.run) {
            return Err(TomographyError::Segmentation(format!(
                "duplicate record for ({}, {}) in run {}",
                r.advertiser, r.persona, r.run
            )));
        }
    }
    for ((a, p), have) in &per_pair {
        if have.len() != runs as usize {
            let missing: Vec<u32> = (0..runs).filter(|r| !have.contains(r)).collect();
            return Err(TomographyError::Segmentation(format!(
                "({a}, {p}) is missing runs {missing:?}"
            )));
        }
    }

    let mut order: Vec<u32> = (0..runs).collect();
    order.shuffle(&mut crate::substream!(seed, "segment"));
    let mut held: Vec<u32> = order[..holdout_runs as usize].to_vec();
    held.sort_unstable();

    let mut sorted: Vec<&VectorRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.key().cmp(&b.key()));
    let (holdout, cv): (Vec<VectorRecord>, Vec<VectorRecord>) =
        sorted.into_iter().cloned().partition(|r| held.contains(&r.run));
    Ok(Segmentation {
        holdout_runs: held,
        cv,
        holdout,
    })
}
