//! k-fold node classification with one-vs-rest logistic regression.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::Labels;
use crate::linalg::Dense;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegConfig {
    pub l2: f64,
    pub lr: f64,
    pub iterations: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 1e-3,
            lr: 0.5,
            iterations: 300,
        }
    }
}

/// One-vs-rest ℓ2-regularized logistic regression on standardized inputs.
#[derive(Debug, Clone)]
pub struct OneVsRest {
    mean: Vec<f64>,
    std: Vec<f64>,
    classes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl OneVsRest {
    /// Full-batch gradient descent on mean log-loss plus `l2/2 ‖w‖²`.
    pub fn fit(x: &[&[f64]], y: &[usize], cfg: &LogRegConfig) -> Result<Self> {
        let n = x.len();
        if n == 0 || n != y.len() {
            return Err(Error::Config("classifier needs matching non-empty inputs".into()));
        }
        let d = x[0].len();
        let mut mean = vec![0.0; d];
        for row in x {
            mean.iter_mut().zip(*row).for_each(|(m, v)| *m += v / n as f64);
        }
        let mut std = vec![0.0; d];
        for row in x {
            for t in 0..d {
                std[t] += (row[t] - mean[t]).powi(2) / n as f64;
            }
        }
        std.iter_mut().for_each(|s| *s = if *s > 1e-24 { s.sqrt() } else { 1.0 });
        let z: Vec<Vec<f64>> = x
            .iter()
            .map(|row| (0..d).map(|t| (row[t] - mean[t]) / std[t]).collect())
            .collect();

        let classes: Vec<usize> = y.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let mut weights = Vec::with_capacity(classes.len());
        let mut bias = Vec::with_capacity(classes.len());
        for &c in &classes {
            let mut w = vec![0.0; d];
            let mut b = 0.0;
            let mut gw = vec![0.0; d];
            for _ in 0..cfg.iterations {
                gw.iter_mut().zip(&w).for_each(|(g, wi)| *g = cfg.l2 * wi);
                let mut gb = 0.0;
                for (row, &label) in z.iter().zip(y) {
                    let logit = b + row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                    let target = if label == c { 1.0 } else { 0.0 };
                    let r = (sigmoid(logit) - target) / n as f64;
                    gb += r;
                    gw.iter_mut().zip(row).for_each(|(g, v)| *g += r * v);
                }
                w.iter_mut().zip(&gw).for_each(|(wi, g)| *wi -= cfg.lr * g);
                b -= cfg.lr * gb;
            }
            weights.push(w);
            bias.push(b);
        }
        Ok(OneVsRest {
            mean,
            std,
            classes,
            weights,
            bias,
        })
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let z: Vec<f64> = row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let mut best = (f64::NEG_INFINITY, self.classes[0]);
        for ((w, b), &c) in self.weights.iter().zip(&self.bias).zip(&self.classes) {
            let logit = b + z.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            if logit > best.0 {
                best = (logit, c);
            }
        }
        best.1
    }
}

/// Micro and macro F1 for single-label predictions. Macro averages over the
/// classes appearing in either `truth` or `pred`.
pub fn f1_scores(truth: &[usize], pred: &[usize]) -> (f64, f64) {
    let correct = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    let micro = correct as f64 / truth.len().max(1) as f64;
    let classes: BTreeSet<usize> = truth.iter().chain(pred).copied().collect();
    let macro_sum: f64 = classes
        .iter()
        .map(|&c| {
            let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count();
            let fp = truth.iter().zip(pred).filter(|&(&t, &p)| t != c && p == c).count();
            let fneg = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p != c).count();
            let denom = 2 * tp + fp + fneg;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .sum();
    (micro, macro_sum / classes.len().max(1) as f64)
}

fn folds_cover_classes(assign: &[usize], y: &[usize], folds: usize) -> bool {
    let all: BTreeSet<usize> = y.iter().copied().collect();
    (0..folds).all(|f| {
        let train: BTreeSet<usize> = assign
            .iter()
            .zip(y)
            .filter(|(&a, _)| a != f)
            .map(|(_, &c)| c)
            .collect();
        train == all
    })
}

/// Fold id per sample: a seeded random partition, falling back to stratified
/// assignment when some training fold would miss a class.
pub fn assign_folds(y: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > y.len() {
        return Err(Error::Config(format!("{folds} folds for {} samples", y.len())));
    }
    let mut rng = rng::stream(seed, Stream::Folds);
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.shuffle(&mut rng);
    let mut assign = vec![0; y.len()];
    for (pos, &i) in order.iter().enumerate() {
        assign[i] = pos % folds;
    }
    if folds_cover_classes(&assign, y, folds) {
        return Ok(assign);
    }
    let classes: BTreeSet<usize> = y.iter().copied().collect();
    let mut next = 0;
    for c in classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            assign[i] = next % folds;
            next += 1;
        }
    }
    if folds_cover_classes(&assign, y, folds) {
        Ok(assign)
    } else {
        Err(Error::Config(
            "some class has too few members to appear in every training fold".into(),
        ))
    }
}

/// Cross-validated micro/macro F1 of a linear classifier on node embeddings.
/// Only labeled nodes take part.
pub fn classify(embeddings: &Dense, labels: &Labels, folds: usize, seed: u64) -> Result<(f64, f64)> {
    classify_with(embeddings, labels, folds, seed, &LogRegConfig::default())
}

pub fn classify_with(
    embeddings: &Dense,
    labels: &Labels,
    folds: usize,
    seed: u64,
    cfg: &LogRegConfig,
) -> Result<(f64, f64)> {
    if labels.of_node.len() != embeddings.rows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} embedding rows",
            labels.of_node.len(),
            embeddings.rows()
        )));
    }
    let (nodes, y): (Vec<usize>, Vec<usize>) = labels
        .of_node
        .iter()
        .enumerate()
        .filter_map(|(v, c)| c.map(|c| (v, c)))
        .unzip();
    if y.iter().collect::<BTreeSet<_>>().len() < 2 {
        return Err(Error::Config("classification needs at least two classes".into()));
    }
    let assign = assign_folds(&y, folds, seed)?;
    let (mut micro, mut macro_) = (0.0, 0.0);
    for f in 0..folds {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| assign[i] != f);
        let xs: Vec<&[f64]> = train.iter().map(|&i| embeddings.row(nodes[i])).collect();
        let ys: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let model = OneVsRest::fit(&xs, &ys, cfg)?;
        let truth: Vec<usize> = test.iter().map(|&i| y[i]).collect();
        let pred: Vec<usize> = test.iter().map(|&i| model.predict(embeddings.row(nodes[i]))).collect();
        let (mi, ma) = f1_scores(&truth, &pred);
        micro += mi;
        macro_ += ma;
    }
    Ok((micro / folds as f64, macro_ / folds as f64))
}
