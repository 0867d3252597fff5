use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Scores at or above this count as "fake" (label 1). A score of exactly
/// 0.5 is therefore a positive prediction.
pub const THRESHOLD: f64 = 0.5;

/// Fraction of predictions that match their labels under [`THRESHOLD`].
/// Returns 0 for empty input.
pub fn accuracy(scores: &[f64], labels: &[u8]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (s >= THRESHOLD) == (y == 1))
        .count();
    hits as f64 / scores.len() as f64
}

/// Area under the precision-recall step function.
///
/// Scores are visited in descending order; equal scores form a single
/// threshold, so tied samples enter the curve together. Each threshold adds
/// `(recall gain) × precision`. Returns 0 when there are no positives.
pub fn average_precision(scores: &[f64], labels: &[u8]) -> f64 {
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut gained = 0;
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                gained += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        tp += gained;
        if gained > 0 {
            ap += gained as f64 / positives as f64 * tp as f64 / (tp + fp) as f64;
        }
    }
    ap
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorStats {
    pub generator: String,
    pub n: usize,
    pub accuracy: f64,
}

/// Accuracy and AP over a whole split, plus per-generator accuracy (AP is
/// undefined for single-class groups, so the breakdown reports accuracy
/// only).
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub average_precision: f64,
    /// Sorted by generator tag.
    pub per_generator: Vec<GeneratorStats>,
}

impl EvalReport {
    pub fn from_scores(scores: &[f64], labels: &[u8], generators: &[&str]) -> Self {
        let mut groups: BTreeMap<&str, (Vec<f64>, Vec<u8>)> = BTreeMap::new();
        for ((&s, &y), &g) in scores.iter().zip(labels).zip(generators) {
            let e = groups.entry(g).or_default();
            e.0.push(s);
            e.1.push(y);
        }
        Self {
            n: scores.len(),
            accuracy: accuracy(scores, labels),
            average_precision: average_precision(scores, labels),
            per_generator: groups
                .into_iter()
                .map(|(g, (s, y))| GeneratorStats {
                    generator: g.to_string(),
                    n: s.len(),
                    accuracy: accuracy(&s, &y),
                })
                .collect(),
        }
    }

    pub fn to_key_value(&self) -> String {
        format!(
            "n={}\naccuracy={:.6}\naverage_precision={:.6}\n",
            self.n, self.accuracy, self.average_precision
        )
    }

    pub fn breakdown_csv(&self) -> String {
        let mut out = String::from("generator,n,accuracy\n");
        for g in &self.per_generator {
            writeln!(out, "{},{},{:.6}", g.generator, g.n, g.accuracy).unwrap();
        }
        out
    }
}
