use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::lbfgs::{minimize, LbfgsOptions};
use super::model::KanModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub lbfgs: LbfgsOptions,
    /// Weight of the mean-|phi| sparsity penalty.
    pub l1: f64,
    /// Fit knot grids to the data before training.
    pub init_grids: bool,
    /// Refit the grids once halfway through the iteration budget.
    pub refit_grids: bool,
    pub max_restarts: usize,
    /// Step damping applied on each restart after a divergence.
    pub restart_damping: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            lbfgs: LbfgsOptions::default(),
            l1: 1e-3,
            init_grids: true,
            refit_grids: true,
            max_restarts: 3,
            restart_damping: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
    pub final_loss: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: KanModel,
    pub report: TrainReport,
}

/// Full-batch L-BFGS on weighted softmax cross-entropy.
pub fn train(
    model: &KanModel,
    data: &Dataset,
    validation: Option<&Dataset>,
    opts: &TrainOptions,
) -> Result<TrainedModel> {
    data.check_trainable()?;
    if data.arity() != model.n_inputs() {
        return Err(Error::dimension(model.n_inputs(), data.arity()));
    }
    if model.n_outputs() != 2 {
        return Err(Error::InvalidConfig("detector networks need exactly two outputs".into()));
    }

    let mut start = model.clone();
    if opts.init_grids {
        start.adapt_grids(data);
    }

    let mut step = opts.lbfgs.initial_step;
    for restart in 0..=opts.max_restarts {
        let mut lbfgs = opts.lbfgs;
        lbfgs.initial_step = step;
        match run(&start, data, opts, &lbfgs) {
            Some((trained, history, iterations, converged)) => {
                let final_loss = *history.last().unwrap_or(&f64::NAN);
                let report = TrainReport {
                    final_loss,
                    loss_history: history,
                    iterations,
                    restarts: restart,
                    converged,
                    train_accuracy: trained.accuracy(data),
                    validation_accuracy: validation.map(|v| trained.accuracy(v)),
                };
                debug!(
                    "trained in {iterations} iterations, loss {final_loss:.6}, {} restarts",
                    restart
                );
                return Ok(TrainedModel {
                    model: trained,
                    report,
                });
            }
            None => {
                warn!("training diverged, restarting with step {}", step * opts.restart_damping);
                step *= opts.restart_damping;
            }
        }
    }
    Err(Error::Diverged(opts.max_restarts))
}

/// One attempt; `None` on a non-finite loss.
fn run(
    start: &KanModel,
    data: &Dataset,
    opts: &TrainOptions,
    lbfgs: &LbfgsOptions,
) -> Option<(KanModel, Vec<f64>, usize, bool)> {
    let mut model = start.clone();
    let mut history = Vec::new();
    let mut iterations = 0;
    let phases: Vec<usize> = if opts.refit_grids && lbfgs.max_iter >= 2 {
        let first = lbfgs.max_iter / 2;
        vec![first, lbfgs.max_iter - first]
    } else {
        vec![lbfgs.max_iter]
    };
    let mut converged = false;
    for (i, &budget) in phases.iter().enumerate() {
        if i > 0 {
            model.adapt_grids(data);
        }
        let mut phase_opts = *lbfgs;
        phase_opts.max_iter = budget;
        let mut work = model.clone();
        let result = minimize(
            |p| {
                work.set_params(p);
                work.loss_and_grad(data, opts.l1)
            },
            model.params(),
            &phase_opts,
        );
        if result.diverged || !result.loss.is_finite() {
            return None;
        }
        model.set_params(&result.x);
        history.extend(result.history);
        iterations += result.iterations;
        converged = result.converged;
    }
    Some((model, history, iterations, converged))
}

/// Continues training on `pretrain` plus `few_shot`, with the few-shot
/// samples' weights multiplied by `boost`. Grids stay where pretraining left
/// them.
pub fn fine_tune(
    model: &KanModel,
    pretrain: &Dataset,
    few_shot: &Dataset,
    boost: f64,
    validation: Option<&Dataset>,
    opts: &TrainOptions,
) -> Result<TrainedModel> {
    if few_shot.is_empty() {
        return Err(Error::Data("few-shot set is empty".into()));
    }
    if !(boost.is_finite() && boost > 0.0) {
        return Err(Error::InvalidArgument(format!("boost must be positive, got {boost}")));
    }
    let union = pretrain.concat(&few_shot.scaled_weights(boost))?;
    let opts = TrainOptions {
        init_grids: false,
        refit_grids: false,
        ..opts.clone()
    };
    train(model, &union, validation, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn threshold_set(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let x0: f64 = rng.random_range(0.0..1.0);
            if (x0 - 0.6).abs() < 0.02 {
                continue;
            }
            inputs.push(vec![x0, rng.random_range(0.0..0.3), rng.random_range(0.0..0.2)]);
            labels.push(usize::from(x0 > 0.6));
        }
        Dataset::new(inputs, labels).unwrap()
    }

    #[test]
    fn separable_threshold_is_learned() {
        let data = threshold_set(400, 1);
        let model = KanModel::detector(3, 2).unwrap();
        let t = train(&model, &data, None, &TrainOptions::default()).unwrap();
        assert!(t.report.train_accuracy >= 0.99, "{}", t.report.train_accuracy);
        let h = &t.report.loss_history;
        assert!(h.last().unwrap() < h.first().unwrap());
        assert!(t.report.iterations <= 200);
    }

    #[test]
    fn training_is_reproducible() {
        let data = threshold_set(200, 5);
        let model = KanModel::detector(3, 3).unwrap();
        let a = train(&model, &data, None, &TrainOptions::default()).unwrap();
        let b = train(&model, &data, None, &TrainOptions::default()).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn single_class_rejected() {
        let data = Dataset::new(vec![vec![0.1, 0.2, 0.3]; 4], vec![1; 4]).unwrap();
        let model = KanModel::detector(3, 0).unwrap();
        assert!(matches!(train(&model, &data, None, &TrainOptions::default()), Err(Error::Data(_))));
        let wrong = Dataset::new(vec![vec![0.1], vec![0.9]], vec![0, 1]).unwrap();
        assert!(matches!(
            train(&model, &wrong, None, &TrainOptions::default()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn diverging_start_exhausts_restarts() {
        let data = threshold_set(50, 2);
        let mut model = KanModel::detector(3, 4).unwrap();
        model.layers[0].edges[0].coeffs[0] = f64::NAN;
        let opts = TrainOptions {
            init_grids: false,
            refit_grids: false,
            ..TrainOptions::default()
        };
        assert!(matches!(train(&model, &data, None, &opts), Err(Error::Diverged(3))));
    }

    #[test]
    fn fine_tune_on_same_distribution_keeps_accuracy() {
        let data = threshold_set(400, 7);
        let test = threshold_set(400, 8);
        let model = KanModel::detector(3, 1).unwrap();
        let pre = train(&model, &data, Some(&test), &TrainOptions::default()).unwrap();
        let few = threshold_set(20, 9);
        let post = fine_tune(&pre.model, &data, &few, 10.0, Some(&test), &TrainOptions::default()).unwrap();
        let a = pre.report.validation_accuracy.unwrap();
        let b = post.report.validation_accuracy.unwrap();
        assert!((a - b).abs() <= 0.02, "{a} vs {b}");
        assert!(fine_tune(&pre.model, &data, &few, 0.0, None, &TrainOptions::default()).is_err());
    }
}
