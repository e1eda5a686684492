//! Training loops and evaluation.
//!
//! One epoch of the fairness-regularized loop: forward on the raw
//! features, explain and rebuild the top-k mask, forward on the masked
//! features (sharing the raw pass's dropout pattern), combine the utility
//! loss with the subgroup distance terms, and take one plain
//! gradient-descent step. Convergence is `patience` epochs without a
//! validation-score improvement, or the epoch cap. The returned model is
//! the best-validation-score checkpoint, and test metrics are computed
//! exactly once on it.
//!
//! Per-epoch validation scoring uses the (cheap) training explainer; the
//! final test report uses the evaluation explainer.

use crate::data::{Dataset, Split, SubgroupView};
use crate::distances::{DistanceDraw, DistanceSpec};
use crate::error::{Error, Result};
use crate::explain::{build_mask, explain, fidelity, ExplainerChoice, FidelityVariant};
use crate::fairmetrics::{positive_rates, FairnessReport, VefVariant};
use crate::model::{
    backward_weighted, composite_loss_weighted, Checkpoint, LossMode, MlpModel, ModelConfig,
};
use crate::numerics::{Matrix, Rng};
use serde::{Deserialize, Serialize};

/// Which composite-loss form to train with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossModeKind {
    /// `L_u + lambda * L_exp`.
    Collapsed,
    /// `L_u + alpha * L_f + beta * L_exp`.
    ThreeTerm,
}

/// Everything one training run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub loss_mode: LossModeKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    /// Top-K percentage for the explanation-fairness metrics.
    pub k_percent: f64,
    /// Features masked per instance.
    pub k_mask: usize,
    pub distance: DistanceSpec,
    /// Explainer used inside the training loop and for per-epoch
    /// validation scoring.
    pub train_explainer: ExplainerChoice,
    /// Explainer used for the final test report.
    pub eval_explainer: ExplainerChoice,
    pub fidelity_variant: FidelityVariant,
    pub vef_variant: VefVariant,
    pub seed: u64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub hidden_dims: Vec<usize>,
    /// Rebuild the explanation mask every this many epochs.
    pub mask_refresh_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.0,
            alpha: 0.0,
            beta: 0.0,
            loss_mode: LossModeKind::Collapsed,
            learning_rate: 1e-2,
            epochs: 200,
            patience: 30,
            k_percent: 25.0,
            k_mask: 1,
            distance: DistanceSpec::default(),
            train_explainer: ExplainerChoice::GradientSaliency,
            eval_explainer: ExplainerChoice::hsic_default(),
            fidelity_variant: FidelityVariant::Accuracy,
            vef_variant: VefVariant::PerSubgroupTopK,
            seed: 0,
            weight_decay: 0.0,
            dropout: 0.0,
            hidden_dims: vec![16],
            mask_refresh_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn effective_mode(&self) -> LossMode {
        match self.loss_mode {
            LossModeKind::Collapsed => LossMode::Collapsed {
                lambda: self.lambda,
            },
            LossModeKind::ThreeTerm => LossMode::ThreeTerm {
                alpha: self.alpha,
                beta: self.beta,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("need at least one epoch".into()));
        }
        if self.mask_refresh_every == 0 {
            return Err(Error::Config("mask_refresh_every must be at least 1".into()));
        }
        if self.lambda < 0.0 || self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::Config("loss coefficients must be nonnegative".into()));
        }
        Ok(())
    }

    fn eval_options(&self, explainer: ExplainerChoice) -> EvalOptions {
        EvalOptions {
            k_percent: self.k_percent,
            k_mask: self.k_mask,
            explainer,
            fidelity_variant: self.fidelity_variant,
            vef_variant: self.vef_variant,
        }
    }
}

/// One line of the per-epoch training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub loss_utility: f64,
    pub loss_fairness: f64,
    pub loss_explanation: f64,
    pub val_score: f64,
}

/// Output of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub checkpoint: Checkpoint,
    pub epochs: Vec<EpochLog>,
    pub test_report: FairnessReport,
    pub config: TrainConfig,
    pub seed: u64,
    pub best_epoch: usize,
    pub best_val_score: f64,
}

/// Evaluation knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub k_percent: f64,
    pub k_mask: usize,
    pub explainer: ExplainerChoice,
    pub fidelity_variant: FidelityVariant,
    pub vef_variant: VefVariant,
}

/// Full metric battery for a frozen model on one part of a dataset.
/// Explanation quality is the per-instance fidelity under the chosen
/// explainer's top-k mask. Errors carry the part label.
pub fn evaluate(
    model: &MlpModel,
    ds: &Dataset,
    part: &[usize],
    part_label: &str,
    opts: &EvalOptions,
) -> Result<FairnessReport> {
    let wrap = |e: Error| Error::Domain(format!("{part_label}: {e}"));
    if part.is_empty() {
        return Err(Error::Domain(format!("{part_label}: empty part")));
    }
    let x = ds.x.select_rows(part);
    let y: Vec<u8> = part.iter().map(|&i| ds.y[i]).collect();
    let s: Vec<usize> = part.iter().map(|&i| ds.s[i]).collect();
    let trace = model.forward_eval(&x, None).map_err(wrap)?;
    let expl = explain(model, &x, &opts.explainer).map_err(wrap)?;
    let mask = build_mask(&expl, opts.k_mask).map_err(wrap)?;
    let fid = fidelity(model, &x, &mask, &y, opts.fidelity_variant).map_err(wrap)?;
    FairnessReport::compute(
        &trace.y_prob,
        &y,
        &s,
        &fid.values,
        opts.k_percent,
        opts.vef_variant,
    )
    .map_err(wrap)
}

struct LoopOutcome {
    model: MlpModel,
    best_epoch: usize,
    best_val: f64,
    epochs: Vec<EpochLog>,
}

/// The shared epoch loop. `sample_weights`, when given, reweight the
/// utility term per instance (mean-1 normalized by the caller).
fn training_loop(
    ds: &Dataset,
    split: &Split,
    cfg: &TrainConfig,
    sample_weights: Option<&[f64]>,
) -> Result<LoopOutcome> {
    cfg.validate()?;
    let mode = cfg.effective_mode();
    let (w_raw, w_masked) = mode.distance_weights();

    let mut master = Rng::new(cfg.seed);
    let mut init_rng = master.split();
    let mut dropout_rng = master.split();
    let mut distance_rng = master.split();

    let model_cfg = ModelConfig {
        input_dim: ds.dim(),
        hidden_dims: cfg.hidden_dims.clone(),
        dropout: cfg.dropout,
    };
    let mut model = MlpModel::init(&model_cfg, &mut init_rng)?;

    let x_train = ds.x.select_rows(&split.train);
    let y_train: Vec<u8> = split.train.iter().map(|&i| ds.y[i]).collect();
    let groups = SubgroupView::new(&ds.y, &ds.s, &split.train, ds.n_sensitive_classes);
    if let Some(w) = sample_weights {
        if w.len() != split.train.len() {
            return Err(Error::Domain(format!(
                "{} sample weights for {} training rows",
                w.len(),
                split.train.len()
            )));
        }
    }

    let val_opts = cfg.eval_options(cfg.train_explainer.clone());
    let mut best: Option<(f64, MlpModel, usize)> = None;
    let mut epochs = Vec::new();
    let mut stale = 0usize;
    let mut x_masked: Option<Matrix> = None;

    for epoch in 0..cfg.epochs {
        let at_epoch = |e: Error| match e {
            Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch}: {msg}")),
            other => other,
        };
        if w_masked > 0.0 && (x_masked.is_none() || epoch % cfg.mask_refresh_every == 0) {
            let expl = explain(&model, &x_train, &cfg.train_explainer)?;
            let mask = build_mask(&expl, cfg.k_mask)?;
            x_masked = Some(mask.apply(&x_train)?);
        }
        let trace = model.forward(&x_train, x_masked.as_ref(), true, &mut dropout_rng)?;
        let draw = if w_raw > 0.0 || w_masked > 0.0 {
            Some(DistanceDraw::sample(
                &groups,
                &cfg.distance,
                model.hidden_dim(),
                &mut distance_rng,
            )?)
        } else {
            None
        };
        let (loss, parts) =
            composite_loss_weighted(&trace, &y_train, sample_weights, draw.as_ref(), mode)
                .map_err(at_epoch)?;
        let grads = backward_weighted(&model, &trace, &y_train, sample_weights, draw.as_ref(), mode)
            .map_err(at_epoch)?;
        model.apply_gradients(&grads, cfg.learning_rate, cfg.weight_decay);

        let val_score = evaluate(&model, ds, &split.val, "val", &val_opts)?.score;
        epochs.push(EpochLog {
            epoch,
            loss,
            loss_utility: parts.utility,
            loss_fairness: parts.fairness,
            loss_explanation: parts.explanation,
            val_score,
        });

        if best.as_ref().map_or(true, |(b, _, _)| val_score > *b) {
            best = Some((val_score, model.clone(), epoch));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let (best_val, model, best_epoch) =
        best.ok_or_else(|| Error::Domain("training ran no epochs".into()))?;
    Ok(LoopOutcome {
        model,
        best_epoch,
        best_val,
        epochs,
    })
}

fn finish_run(ds: &Dataset, split: &Split, cfg: &TrainConfig, outcome: LoopOutcome) -> Result<RunResult> {
    let test_opts = cfg.eval_options(cfg.eval_explainer.clone());
    let test_report = evaluate(&outcome.model, ds, &split.test, "test", &test_opts)?;
    let checkpoint = Checkpoint::new(
        outcome.model,
        ds.normalization().cloned(),
        ds.feature_names.clone(),
    );
    Ok(RunResult {
        checkpoint,
        epochs: outcome.epochs,
        test_report,
        config: cfg.clone(),
        seed: cfg.seed,
        best_epoch: outcome.best_epoch,
        best_val_score: outcome.best_val,
    })
}

/// Fairness-regularized training with validation-score model selection.
pub fn train_cfa(ds: &Dataset, split: &Split, cfg: &TrainConfig) -> Result<RunResult> {
    let outcome = training_loop(ds, split, cfg, None)?;
    finish_run(ds, split, cfg, outcome)
}

/// The plain-MLP baseline: the same loop with every distance coefficient
/// forced to zero.
pub fn train_vanilla(ds: &Dataset, split: &Split, cfg: &TrainConfig) -> Result<RunResult> {
    let mut plain = cfg.clone();
    plain.lambda = 0.0;
    plain.alpha = 0.0;
    plain.beta = 0.0;
    train_cfa(ds, split, &plain)
}

/// Reweighting baseline for a binary sensitive feature.
///
/// Outer loop, `outer_iters` times: train a fresh weighted-utility model
/// (same seed, so iteration zero reproduces the vanilla run), measure the
/// signed statistical-parity violation `v = P(y_hat=1|s=0) - P(y_hat=1|s=1)`
/// on the training part, move the per-group multipliers
/// `m_0 += eta * v`, `m_1 -= eta * v`, and set instance weights
/// `w_i = exp(-m_{s_i} * (2 y_i - 1))`, normalized to mean 1. A positive
/// violation therefore downweights group 0's positive examples and
/// upweights group 1's, pulling the positive rates together. Returns the
/// best run across outer iterations by validation score.
pub fn train_reweight(
    ds: &Dataset,
    split: &Split,
    cfg: &TrainConfig,
    eta: f64,
    outer_iters: usize,
) -> Result<RunResult> {
    if ds.n_sensitive_classes != 2 {
        return Err(Error::Domain(
            "reweight baseline needs a binary sensitive feature".into(),
        ));
    }
    if outer_iters == 0 {
        return Err(Error::Domain("need at least one outer iteration".into()));
    }
    if eta < 0.0 {
        return Err(Error::Domain("fairness step must be nonnegative".into()));
    }

    let n_train = split.train.len();
    let x_train = ds.x.select_rows(&split.train);
    let y_train: Vec<u8> = split.train.iter().map(|&i| ds.y[i]).collect();
    let s_train: Vec<usize> = split.train.iter().map(|&i| ds.s[i]).collect();

    let mut weights = vec![1.0; n_train];
    let mut multipliers = [0.0f64; 2];
    let mut best: Option<(f64, LoopOutcome)> = None;

    for _ in 0..outer_iters {
        let outcome = training_loop(ds, split, cfg, Some(&weights))?;
        let preds = outcome.model.forward_eval(&x_train, None)?.predictions();
        let rates = positive_rates(&preds, &s_train)?;
        let violation = rates[0] - rates[1];

        if best.as_ref().map_or(true, |(b, _)| outcome.best_val > *b) {
            best = Some((outcome.best_val, outcome));
        }

        multipliers[0] += eta * violation;
        multipliers[1] -= eta * violation;
        for (w, (&yy, &ss)) in weights.iter_mut().zip(y_train.iter().zip(&s_train)) {
            *w = (-multipliers[ss] * (2.0 * f64::from(yy) - 1.0)).exp();
        }
        let mean = weights.iter().sum::<f64>() / n_train as f64;
        for w in &mut weights {
            *w /= mean;
        }
        debug_assert!(weights.iter().all(|&w| w > 0.0));
    }

    finish_run(ds, split, cfg, best.expect("at least one iteration").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, split};
    use crate::distances::DistanceKind;
    use crate::model::{backward, composite_loss};

    fn small_setup(seed: u64) -> (Dataset, Split) {
        let mut ds = make_synthetic(240, 4, 0.3, &mut Rng::new(seed)).unwrap();
        let sp = split(&ds, (0.6, 0.2, 0.2), &mut Rng::new(seed ^ 0xFFFF)).unwrap();
        ds.normalize(&sp).unwrap();
        (ds, sp)
    }

    fn quick_cfg(lambda: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            lambda,
            epochs: 25,
            patience: 10,
            seed,
            hidden_dims: vec![8],
            distance: DistanceSpec {
                kind: DistanceKind::Sw,
                slices: 8,
                ..DistanceSpec::default()
            },
            // Keep unit tests fast: gradient explainer everywhere.
            eval_explainer: ExplainerChoice::GradientSaliency,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn lambda_zero_matches_a_hand_written_plain_loop() {
        let (ds, sp) = small_setup(3);
        let mut cfg = quick_cfg(0.0, 7);
        // No early stopping, so both loops run the same epoch count.
        cfg.patience = cfg.epochs;
        let run = train_cfa(&ds, &sp, &cfg).unwrap();

        // Independent plain-BCE loop with the same seeding discipline.
        let mut master = Rng::new(cfg.seed);
        let mut init_rng = master.split();
        let _dropout_rng = master.split();
        let _distance_rng = master.split();
        let model_cfg = ModelConfig {
            input_dim: ds.dim(),
            hidden_dims: cfg.hidden_dims.clone(),
            dropout: 0.0,
        };
        let mut model = MlpModel::init(&model_cfg, &mut init_rng).unwrap();
        let x = ds.x.select_rows(&sp.train);
        let y: Vec<u8> = sp.train.iter().map(|&i| ds.y[i]).collect();
        let mode = LossMode::Collapsed { lambda: 0.0 };
        let mut best: Option<(f64, MlpModel)> = None;
        for _ in 0..cfg.epochs {
            let trace = model.forward_eval(&x, None).unwrap();
            composite_loss(&trace, &y, None, mode).unwrap();
            let grads = backward(&model, &trace, &y, None, mode).unwrap();
            model.apply_gradients(&grads, cfg.learning_rate, cfg.weight_decay);
            let score = evaluate(
                &model,
                &ds,
                &sp.val,
                "val",
                &cfg.eval_options(ExplainerChoice::GradientSaliency),
            )
            .unwrap()
            .score;
            if best.as_ref().map_or(true, |(b, _)| score > *b) {
                best = Some((score, model.clone()));
            }
        }
        let expect = best.unwrap().1;
        for (a, b) in run
            .checkpoint
            .model
            .params()
            .iter()
            .zip(expect.params().iter())
        {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn fixed_seed_gives_byte_identical_results() {
        let (ds, sp) = small_setup(5);
        let cfg = quick_cfg(0.5, 11);
        let a = train_cfa(&ds, &sp, &cfg).unwrap();
        let b = train_cfa(&ds, &sp, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn selection_is_monotone_over_the_log() {
        let (ds, sp) = small_setup(9);
        let cfg = quick_cfg(0.1, 2);
        let run = train_cfa(&ds, &sp, &cfg).unwrap();
        for entry in &run.epochs {
            assert!(
                run.best_val_score >= entry.val_score,
                "epoch {} beats the selected checkpoint",
                entry.epoch
            );
        }
        assert_eq!(
            run.best_val_score,
            run.epochs[run.best_epoch].val_score
        );
    }

    #[test]
    fn loss_decomposition_identity_holds_in_the_log() {
        let (ds, sp) = small_setup(13);
        let mut cfg = quick_cfg(0.7, 4);
        cfg.epochs = 10;
        let run = train_cfa(&ds, &sp, &cfg).unwrap();
        for e in &run.epochs {
            let recomposed = e.loss_utility + 0.7 * e.loss_explanation;
            assert!((e.loss - recomposed).abs() < 1e-12);
        }
    }

    #[test]
    fn reweight_with_zero_step_equals_vanilla() {
        let (ds, sp) = small_setup(17);
        let cfg = quick_cfg(0.0, 21);
        let vanilla = train_vanilla(&ds, &sp, &cfg).unwrap();
        let reweighted = train_reweight(&ds, &sp, &cfg, 0.0, 3).unwrap();
        for (a, b) in vanilla
            .checkpoint
            .model
            .params()
            .iter()
            .zip(reweighted.checkpoint.model.params().iter())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn reweight_keeps_weights_positive_and_mean_one() {
        // Drive the update rule directly, mirroring the loop's bookkeeping.
        let (ds, sp) = small_setup(23);
        let y_train: Vec<u8> = sp.train.iter().map(|&i| ds.y[i]).collect();
        let s_train: Vec<usize> = sp.train.iter().map(|&i| ds.s[i]).collect();
        let mut multipliers = [0.0f64; 2];
        let mut weights = vec![1.0; y_train.len()];
        let mut rng = Rng::new(1);
        for _ in 0..6 {
            let violation = rng.next_normal() * 0.3;
            multipliers[0] += 1.0 * violation;
            multipliers[1] -= 1.0 * violation;
            for (w, (&yy, &ss)) in weights.iter_mut().zip(y_train.iter().zip(&s_train)) {
                *w = (-multipliers[ss] * (2.0 * f64::from(yy) - 1.0)).exp();
            }
            let mean = weights.iter().sum::<f64>() / weights.len() as f64;
            for w in &mut weights {
                *w /= mean;
            }
            assert!(weights.iter().all(|&w| w > 0.0));
            let mean_after = weights.iter().sum::<f64>() / weights.len() as f64;
            assert!((mean_after - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn evaluate_is_deterministic_on_a_frozen_model() {
        let (ds, sp) = small_setup(29);
        let cfg = quick_cfg(0.0, 31);
        let run = train_cfa(&ds, &sp, &cfg).unwrap();
        let opts = cfg.eval_options(ExplainerChoice::hsic_default());
        let a = evaluate(&run.checkpoint.model, &ds, &sp.test, "test", &opts).unwrap();
        let b = evaluate(&run.checkpoint.model, &ds, &sp.test, "test", &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evaluate_on_a_degenerate_perfect_fixture() {
        // A model that separates the two labels perfectly and identically
        // across groups: every gap is zero and the score is the utility
        // mean.
        let x = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![-1.0, 0.0],
            vec![-1.0, 0.0],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
        ])
        .unwrap();
        let y = vec![1, 1, 1, 0, 0, 0, 1, 0];
        let s = vec![0, 0, 1, 0, 0, 1, 1, 1];
        let ds = Dataset::new(
            x,
            y,
            s,
            vec!["signal".into(), "junk".into()],
            "s".into(),
            2,
        )
        .unwrap();
        let mut model = MlpModel::init(
            &ModelConfig {
                input_dim: 2,
                hidden_dims: vec![2],
                dropout: 0.0,
            },
            &mut Rng::new(0),
        )
        .unwrap();
        // h = relu([x0, -x0]); logit = 4 h0 - 4 h1: +-4 depending on sign.
        model.encoder[0].weight = Matrix::from_rows(&[vec![1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        model.encoder[0].bias = vec![0.0, 0.0];
        model.classifier.weight = Matrix::from_rows(&[vec![4.0], vec![-4.0]]).unwrap();
        model.classifier.bias = vec![0.0];
        let part: Vec<usize> = (0..ds.len()).collect();
        let opts = EvalOptions {
            k_percent: 50.0,
            k_mask: 1,
            explainer: ExplainerChoice::GradientSaliency,
            fidelity_variant: FidelityVariant::Accuracy,
            vef_variant: VefVariant::PerSubgroupTopK,
        };
        let report = evaluate(&model, &ds, &part, "all", &opts).unwrap();
        assert_eq!(report.auc, 1.0);
        assert_eq!(report.f1, 1.0);
        assert_eq!(report.acc, 1.0);
        assert_eq!(report.delta_sp, 0.0);
        assert_eq!(report.delta_eo, 0.0);
        assert_eq!(report.delta_ref, 0.0);
        assert_eq!(report.delta_vef, 0.0);
        assert_eq!(report.score, 1.0);
    }

    #[test]
    fn six_instance_fixture_matches_hand_computed_report() {
        // Hand-built predictions and EQ values; the report must equal the
        // hand arithmetic exactly.
        let y_prob = [0.9, 0.8, 0.4, 0.3, 0.6, 0.2];
        let y = [1u8, 1, 0, 0, 1, 0];
        let s = [0usize, 1, 0, 1, 0, 1];
        let eq = [1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let report = FairnessReport::compute(
            &y_prob,
            &y,
            &s,
            &eq,
            50.0,
            VefVariant::PerSubgroupTopK,
        )
        .unwrap();
        // preds = [1,1,0,0,1,0]; all positives correct, all negatives
        // correct.
        assert_eq!(report.acc, 1.0);
        assert_eq!(report.f1, 1.0);
        assert_eq!(report.auc, 1.0);
        // positive rates: g0 2/3, g1 1/3.
        assert!((report.delta_sp - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.delta_eo, 0.0);
        // top-3 of eq: indices 0, 2 (value 1.0) then 1 (tie at 0; lowest
        // index wins among {1,3,4,5}).
        assert!((report.delta_ref - 1.0 / 3.0).abs() < 1e-12);
        // per-subgroup top-2: g0 {1.0, 1.0} mean 1.0; g1 {0.0, 0.0} mean 0.
        assert!((report.delta_vef - 1.0).abs() < 1e-12);
        let expect_score = 1.0 - (1.0 / 3.0) / 2.0 - (1.0 / 3.0 + 1.0) / 2.0;
        assert!((report.score - expect_score).abs() < 1e-12);
    }
}
