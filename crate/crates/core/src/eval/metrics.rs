use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

fn check(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Config(format!(
            "ranking metric needs positives and negatives (got {} and {})",
            pos.len(),
            neg.len()
        )));
    }
    if pos.iter().chain(neg).any(|s| s.is_nan()) {
        return Err(Error::Config("NaN score".into()));
    }
    Ok(())
}

/// Area under the ROC curve in Mann–Whitney form; ties count one half.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check(pos, neg)?;
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut wins = 0.0;
    let mut neg_below = 0usize;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut p, mut q) = (0usize, 0usize);
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        wins += p as f64 * neg_below as f64 + 0.5 * p as f64 * q as f64;
        neg_below += q;
        i = j;
    }
    Ok(wins / (pos.len() as f64 * neg.len() as f64))
}

/// Average precision over the descending ranking of all scores, with ties
/// ordered by a seeded shuffle.
pub fn average_precision_seeded(pos: &[f64], neg: &[f64], seed: u64) -> Result<f64> {
    check(pos, neg)?;
    let mut items: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    items.shuffle(&mut rng::stream(seed, Stream::Ranking));
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &(_, is_pos)) in items.iter().enumerate() {
        if is_pos {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / pos.len() as f64)
}

pub fn average_precision(pos: &[f64], neg: &[f64]) -> Result<f64> {
    average_precision_seeded(pos, neg, 0)
}
