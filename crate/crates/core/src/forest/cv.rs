use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{canonical, check_samples, train_forest, ForestError, ForestParams, HyperGrid, Sample};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub params: ForestParams,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub best: ForestParams,
    pub accuracy: f64,
    /// One entry per grid point, in grid order.
    pub scores: Vec<GridScore>,
}

/// Split samples into `folds` folds holding the same number of records of
/// every persona. Returns indices into the canonical ordering of `samples`,
/// together with that ordering.
pub fn make_folds(
    samples: &[Sample],
    folds: usize,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Vec<usize>>), ForestError> {
    if folds < 2 {
        return Err(ForestError::Params(format!("need at least 2 folds, got {folds}")));
    }
    check_samples(samples)?;
    let canon = canonical(samples);
    let mut by_persona: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in canon.iter().enumerate() {
        by_persona.entry(&s.persona).or_default().push(i);
    }
    let mut out = vec![Vec::new(); folds];
    for (persona, mut idx) in by_persona {
        if idx.len() % folds != 0 {
            return Err(ForestError::IndivisibleFolds {
                persona: persona.to_owned(),
                count: idx.len(),
                folds,
            });
        }
        let mut rng = crate::substream!(seed, "folds", persona);
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            out[j % folds].push(i);
        }
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    Ok((canon, out))
}

/// Grid search scored by mean held-out-fold accuracy. Every grid point sees
/// the same folds and the same per-fold forest seeds. Ties go to the
/// smallest parameter tuple.
pub fn cross_validate_grid(
    samples: &[Sample],
    grid: &HyperGrid,
    folds: usize,
    seed: u64,
) -> Result<CvOutcome, ForestError> {
    grid.validate()?;
    let (canon, fold_idx) = make_folds(samples, folds, seed)?;
    let splits: Vec<(Vec<Sample>, Vec<Sample>)> = (0..folds)
        .map(|f| {
            let mut held = vec![false; canon.len()];
            fold_idx[f].iter().for_each(|&i| held[i] = true);
            let (test, train): (Vec<_>, Vec<_>) =
                canon.iter().cloned().zip(held).partition(|(_, h)| *h);
            (
                train.into_iter().map(|(s, _)| s).collect(),
                test.into_iter().map(|(s, _)| s).collect(),
            )
        })
        .collect();

    let points = grid.points();
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|g| (0..folds).map(move |f| (g, f)))
        .collect();
    let correct: Vec<Result<usize, ForestError>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (train, test) = &splits[f];
            let model = train_forest(train, &points[g], derive_seed(seed, &["cv".into(), f.into()]))?;
            model.correct(test)
        })
        .collect();

    // folds are equal-sized, so the mean fold accuracy is total correct / total
    let mut totals = vec![0usize; points.len()];
    for (&(g, _), c) in jobs.iter().zip(correct) {
        totals[g] += c?;
    }
    let n = canon.len() as f64;
    let mut best = 0;
    for g in 1..points.len() {
        if totals[g] > totals[best] {
            best = g;
        }
    }
    Ok(CvOutcome {
        best: points[best],
        accuracy: totals[best] as f64 / n,
        scores: points
            .iter()
            .zip(&totals)
            .map(|(p, &t)| GridScore {
                params: *p,
                accuracy: t as f64 / n,
            })
            .collect(),
    })
}
