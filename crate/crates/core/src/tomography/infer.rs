use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{TomographyError, VectorRecord};
use crate::ecosim::SharingGraph;
use crate::forest::{
    cross_validate_grid, feature_importance, train_forest, ForestParams, HyperGrid, Sample,
};
use crate::ids::{AdvertiserId, TrackerId};
use crate::rng::derive_seed;
use crate::stattest::mean_std;

/// Indices of features whose gain is strictly more than one population
/// standard deviation above the mean gain. Nothing is inferred from a model
/// whose holdout accuracy is below `accuracy_threshold`.
pub fn infer_relationships(gains: &[f64], holdout_accuracy: f64, accuracy_threshold: f64) -> Vec<usize> {
    if gains.is_empty() || holdout_accuracy.is_nan() || holdout_accuracy < accuracy_threshold {
        return Vec::new();
    }
    let (mean, std) = mean_std(gains).expect("non-empty");
    let cutoff = mean + std;
    gains
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > cutoff)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerGain {
    pub tracker: TrackerId,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvertiserReport {
    pub advertiser: AdvertiserId,
    pub best_params: ForestParams,
    pub cv_accuracy: f64,
    /// `None` when there is no holdout data.
    pub holdout_accuracy: Option<f64>,
    /// Fraction of cross-validation records flagged as different.
    pub flagged_fraction: f64,
    pub importance: Vec<TrackerGain>,
    pub inferred: Vec<TrackerId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceSettings {
    pub folds: usize,
    pub accuracy_threshold: f64,
    pub seed: u64,
}

fn by_advertiser(records: &[VectorRecord]) -> BTreeMap<&AdvertiserId, Vec<&VectorRecord>> {
    let mut m: BTreeMap<&AdvertiserId, Vec<&VectorRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_control) {
        m.entry(&r.advertiser).or_default().push(r);
    }
    m
}

fn to_samples(
    records: &[&VectorRecord],
    trackers: &[TrackerId],
) -> Result<Vec<Sample>, TomographyError> {
    records
        .iter()
        .map(|r| {
            let label = r
                .is_different_from_control
                .ok_or_else(|| TomographyError::MissingFlag {
                    advertiser: r.advertiser.clone(),
                    persona: r.persona.clone(),
                    run: r.run,
                })?;
            Ok(Sample::new(r.blocking.features(trackers), label, r.persona.as_str()))
        })
        .collect()
}

/// Fit one model per advertiser and read relationships off its importances.
///
/// `trackers` must be sorted; it fixes the feature order. Control records
/// are ignored. Rows come back sorted by advertiser.
pub fn run_inference(
    cv: &[VectorRecord],
    holdout: &[VectorRecord],
    trackers: &[TrackerId],
    grid: &HyperGrid,
    settings: &InferenceSettings,
) -> Result<Vec<AdvertiserReport>, TomographyError> {
    let cv_by = by_advertiser(cv);
    let holdout_by = by_advertiser(holdout);

    // every record must carry a flag before any model is fit
    for r in cv.iter().chain(holdout) {
        if r.is_different_from_control.is_none() {
            return Err(TomographyError::MissingFlag {
                advertiser: r.advertiser.clone(),
                persona: r.persona.clone(),
                run: r.run,
            });
        }
    }

    let jobs: Vec<(&AdvertiserId, &Vec<&VectorRecord>)> = cv_by.iter().map(|(a, r)| (*a, r)).collect();
    jobs.par_iter()
        .map(|&(adv, recs)| {
            let samples = to_samples(recs, trackers)?;
            let mut per_persona: BTreeMap<&str, usize> = BTreeMap::new();
            for s in &samples {
                *per_persona.entry(&s.persona).or_default() += 1;
            }
            if let Some((p, &n)) = per_persona.iter().find(|(_, &n)| n < settings.folds) {
                return Err(TomographyError::TooFewRecords {
                    advertiser: adv.clone(),
                    persona: p.to_string(),
                    records: n,
                    folds: settings.folds,
                });
            }
            let seed = |stage: &str| derive_seed(settings.seed, &[stage.into(), adv.as_str().into()]);
            let cv = cross_validate_grid(&samples, grid, settings.folds, seed("cv"))?;
            let model = train_forest(&samples, &cv.best, seed("fit"))?;
            let holdout_accuracy = match holdout_by.get(adv) {
                Some(h) if !h.is_empty() => Some(model.accuracy(&to_samples(h, trackers)?)?),
                _ => None,
            };
            let importance = feature_importance(&model);
            let inferred = infer_relationships(
                &importance.gains,
                holdout_accuracy.unwrap_or(f64::NAN),
                settings.accuracy_threshold,
            );
            Ok(AdvertiserReport {
                advertiser: adv.clone(),
                best_params: cv.best,
                cv_accuracy: cv.accuracy,
                holdout_accuracy,
                flagged_fraction: samples.iter().filter(|s| s.label).count() as f64 / samples.len() as f64,
                importance: trackers
                    .iter()
                    .zip(&importance.gains)
                    .map(|(t, &gain)| TrackerGain {
                        tracker: t.clone(),
                        gain,
                    })
                    .collect(),
                inferred: inferred.into_iter().map(|i| trackers[i].clone()).collect(),
            })
        })
        .collect()
}

pub fn inferred_edges(rows: &[AdvertiserReport]) -> BTreeSet<(TrackerId, AdvertiserId)> {
    rows.iter()
        .flat_map(|r| r.inferred.iter().map(move |t| (t.clone(), r.advertiser.clone())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub precision: f64,
    pub recall: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Precision and recall of inferred edges against the planted graph. With
/// nothing inferred precision is 1; with nothing planted recall is 1.
pub fn evaluate(inferred: &BTreeSet<(TrackerId, AdvertiserId)>, truth: &SharingGraph) -> Evaluation {
    let truth = truth.edge_set();
    let tp = inferred.intersection(&truth).count();
    let fp = inferred.len() - tp;
    let fn_ = truth.len() - tp;
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Evaluation {
        precision: ratio(tp, inferred.len()),
        recall: ratio(tp, truth.len()),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    }
}
