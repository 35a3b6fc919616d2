//! Interest-dependence experiment: do ads shown to one interest group look
//! more alike across runs than ads shown to different groups?

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TomographyError;
use crate::artifacts::format_float;
use crate::ecosim::{AdLogEntry, Persona};
use crate::stattest::{welch_t_test, TestResult};
use crate::textvec::{build_corpus, cosine_similarity, vectorize, CountVector, Document};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub groups: Vec<String>,
    /// `mean[i][j]`: mean cosine similarity between documents of groups i and j.
    pub mean: Vec<Vec<f64>>,
    /// `tests[i][j]` for i != j: Welch test of D(i, i) against D(i, j).
    /// `None` on the diagonal or when a distribution has fewer than two values.
    pub tests: Vec<Vec<Option<TestResult>>>,
}

/// One document per (interest group, run) holding the tokens of every ad
/// shown to that group's personas in that run.
pub fn group_documents(adlog: &[AdLogEntry], personas: &[Persona]) -> Result<Vec<Document>, TomographyError> {
    let group_of: BTreeMap<_, _> = personas.iter().map(|p| (&p.id, &p.group)).collect();
    let mut docs: BTreeMap<(String, u32), Vec<String>> = BTreeMap::new();
    for e in adlog {
        let g = group_of
            .get(&e.persona)
            .ok_or_else(|| TomographyError::UnknownPersona(e.persona.clone()))?;
        docs.entry((g.to_string(), e.run))
            .or_default()
            .extend(e.tokens.iter().cloned());
    }
    Ok(docs
        .into_iter()
        .map(|((g, run), tokens)| Document::new(g, run, tokens))
        .collect())
}

/// D(g, g) uses every pair of distinct runs; D(g1, g2) every pair of runs.
pub fn h1_similarity_matrix(documents: &[Document]) -> Result<SimilarityMatrix, TomographyError> {
    let corpus = build_corpus(documents);
    let mut by_group: BTreeMap<&str, Vec<(u32, CountVector)>> = BTreeMap::new();
    for d in documents {
        by_group
            .entry(&d.key.id)
            .or_default()
            .push((d.key.run, vectorize(d, &corpus)?));
    }
    for (g, docs) in by_group.iter_mut() {
        docs.sort_by_key(|(r, _)| *r);
        if docs.len() < 2 {
            return Err(TomographyError::TooFewRuns {
                group: g.to_string(),
                runs: docs.len(),
            });
        }
    }
    let groups: Vec<&str> = by_group.keys().copied().collect();
    let n = groups.len();

    let mut dist: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let a = &by_group[groups[i]];
            let b = &by_group[groups[j]];
            for (x, (_, va)) in a.iter().enumerate() {
                for (y, (_, vb)) in b.iter().enumerate() {
                    if i == j && x >= y {
                        continue;
                    }
                    dist[i][j].push(cosine_similarity(va, vb)?);
                }
            }
        }
    }

    let mean = dist
        .iter()
        .map(|row| {
            row.iter()
                .map(|d| d.iter().sum::<f64>() / d.len() as f64)
                .collect()
        })
        .collect();
    let tests = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        None
                    } else {
                        welch_t_test(&dist[i][i], &dist[i][j]).ok()
                    }
                })
                .collect()
        })
        .collect();
    Ok(SimilarityMatrix {
        groups: groups.iter().map(|g| g.to_string()).collect(),
        mean,
        tests,
    })
}

impl SimilarityMatrix {
    /// Long-form CSV: one row per ordered group pair.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["group", "other", "mean_similarity", "t_statistic", "df", "p_value"])?;
        for (i, g) in self.groups.iter().enumerate() {
            for (j, h) in self.groups.iter().enumerate() {
                let t = self.tests[i][j];
                let f = |x: Option<f64>| x.map(format_float).unwrap_or_default();
                w.write_record([
                    g.clone(),
                    h.clone(),
                    format_float(self.mean[i][j]),
                    f(t.map(|t| t.statistic)),
                    f(t.map(|t| t.df)),
                    f(t.map(|t| t.p_value)),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
