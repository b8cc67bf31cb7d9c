//! Threshold-free and thresholded evaluation of membership scores.
//!
//! Scores arrive as `(score, is_member)` pairs under the crate-wide
//! orientation contract (higher means member). AUC is computed by the
//! rank statistic with average-rank tie handling: a tied member/nonmember
//! pair contributes exactly half a concordant pair, which equals the area
//! under the tie-aware step curve produced by [`RocCurve::from_scores`].
//!
//! Thresholded decisions use the rule `score > threshold`. Calibration
//! considers the midpoints of adjacent distinct scores plus the maximum
//! score (the reject-all rule); among equally good candidates the largest
//! threshold wins, which is the most conservative choice.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::attacks::Method;
use crate::numeric::compensated_mean;

/// Errors from score evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    /// AUC and error rates need at least one member and one nonmember.
    EmptyClass { members: usize, nonmembers: usize },
    /// A score is NaN or infinite and cannot be ranked.
    NonFiniteScore { index: usize, value: f64 },
    /// False-positive-rate budget outside `[0, 1]`.
    InvalidBudget { budget: f64 },
    /// Decision threshold is NaN.
    InvalidThreshold { value: f64 },
    /// Calibration fraction outside `(0, 1)`.
    InvalidDevFraction { fraction: f64 },
    /// A method summary needs at least one evaluated group.
    NoGroups,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptyClass {
                members,
                nonmembers,
            } => write!(
                f,
                "need at least one member and one nonmember, got {members} and {nonmembers}"
            ),
            EvalError::NonFiniteScore { index, value } => {
                write!(f, "non-finite score {value} at index {index}")
            }
            EvalError::InvalidBudget { budget } => {
                write!(f, "false-positive-rate budget {budget} outside [0, 1]")
            }
            EvalError::InvalidThreshold { value } => {
                write!(f, "decision threshold {value} is not a number")
            }
            EvalError::InvalidDevFraction { fraction } => {
                write!(f, "calibration fraction {fraction} outside (0, 1)")
            }
            EvalError::NoGroups => write!(f, "method summary needs at least one group"),
        }
    }
}

impl core::error::Error for EvalError {}

fn validate_scores(scores: &[(f64, bool)]) -> Result<(usize, usize), EvalError> {
    for (index, &(value, _)) in scores.iter().enumerate() {
        if !value.is_finite() {
            return Err(EvalError::NonFiniteScore { index, value });
        }
    }
    let members = scores.iter().filter(|(_, label)| *label).count();
    let nonmembers = scores.len() - members;
    if members == 0 || nonmembers == 0 {
        return Err(EvalError::EmptyClass {
            members,
            nonmembers,
        });
    }
    Ok((members, nonmembers))
}

fn validate_budget(budget: f64) -> Result<(), EvalError> {
    if (0.0..=1.0).contains(&budget) {
        Ok(())
    } else {
        Err(EvalError::InvalidBudget { budget })
    }
}

/// One operating point of a ROC curve; classify member when
/// `score > threshold` held at this point's boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Tie-aware ROC curve with its area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    points: Vec<RocPoint>,
    auc: f64,
    members: usize,
    nonmembers: usize,
}

impl RocCurve {
    /// Builds the curve and AUC from labeled scores.
    ///
    /// Points are emitted at each distinct score, descending, with an
    /// initial `(threshold = +inf, 0, 0)` point; tied scores enter as one
    /// block so the curve runs diagonally through ties, matching the
    /// average-rank AUC exactly.
    pub fn from_scores(scores: &[(f64, bool)]) -> Result<Self, EvalError> {
        let (members, nonmembers) = validate_scores(scores)?;

        let mut sorted: Vec<(f64, bool)> = scores.to_vec();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

        let mut points = vec![RocPoint {
            threshold: f64::INFINITY,
            fpr: 0.0,
            tpr: 0.0,
        }];
        let (mut tp, mut fp) = (0usize, 0usize);
        let mut i = 0;
        while i < sorted.len() {
            let threshold = sorted[i].0;
            while i < sorted.len() && sorted[i].0 == threshold {
                if sorted[i].1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            points.push(RocPoint {
                threshold,
                fpr: fp as f64 / nonmembers as f64,
                tpr: tp as f64 / members as f64,
            });
        }

        Ok(RocCurve {
            points,
            auc: rank_auc(&sorted, members, nonmembers),
            members,
            nonmembers,
        })
    }

    /// Probability a random member outscores a random nonmember, ties
    /// counting half.
    pub fn auc(&self) -> f64 {
        self.auc
    }

    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn nonmembers(&self) -> usize {
        self.nonmembers
    }

    /// Highest achievable TPR at FPR at most `budget`.
    ///
    /// Steps conservatively: the result is the TPR of an operating point
    /// actually on the curve, never an interpolation between points.
    pub fn tpr_at_fpr(&self, budget: f64) -> Result<f64, EvalError> {
        validate_budget(budget)?;
        // fpr and tpr are non-decreasing along the curve, so the last
        // point within budget has the maximal tpr
        Ok(self
            .points
            .iter()
            .rev()
            .find(|p| p.fpr <= budget)
            .map(|p| p.tpr)
            .unwrap_or(0.0))
    }
}

/// Average-rank Mann-Whitney statistic over descending-sorted scores.
fn rank_auc(sorted_desc: &[(f64, bool)], members: usize, nonmembers: usize) -> f64 {
    // ranks ascend with score; walk from the low end
    let mut member_rank_sum = 0.0f64;
    let len = sorted_desc.len();
    let mut i = 0;
    while i < len {
        let value = sorted_desc[len - 1 - i].0;
        let mut j = i;
        let mut tied_members = 0usize;
        while j < len && sorted_desc[len - 1 - j].0 == value {
            if sorted_desc[len - 1 - j].1 {
                tied_members += 1;
            }
            j += 1;
        }
        // mean of ranks i+1 ..= j
        let average_rank = (i + 1 + j) as f64 / 2.0;
        member_rank_sum += average_rank * tied_members as f64;
        i = j;
    }
    let m = members as f64;
    let n = nonmembers as f64;
    (member_rank_sum - m * (m + 1.0) / 2.0) / (m * n)
}

/// What a calibrated threshold optimizes on its calibration data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize Youden's J statistic, `tpr - fpr`.
    Youden,
    /// Maximize TPR subject to `fpr <= budget`.
    TprAtFpr { budget: f64 },
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Youden => f.write_str("youden"),
            Objective::TprAtFpr { budget } => write!(f, "tpr_at_fpr(budget={budget})"),
        }
    }
}

/// A calibrated decision threshold with the rates it achieved on its
/// calibration data under the rule `score > value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub objective: Objective,
}

/// Picks the threshold maximizing `objective` over the candidate set
/// (midpoints of adjacent distinct scores, plus the maximum score as the
/// reject-all rule). Equally good candidates resolve to the largest
/// threshold.
pub fn calibrate_threshold(
    scores: &[(f64, bool)],
    objective: Objective,
) -> Result<Threshold, EvalError> {
    let (members, nonmembers) = validate_scores(scores)?;
    if let Objective::TprAtFpr { budget } = objective {
        validate_budget(budget)?;
    }

    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // walk ascending; after consuming a tie group, (above_m, above_n) are
    // the counts accepted by any threshold inside the following gap
    let mut above_m = members;
    let mut above_n = nonmembers;
    let mut best: Option<(f64, Threshold)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let value = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == value {
            if sorted[i].1 {
                above_m -= 1;
            } else {
                above_n -= 1;
            }
            i += 1;
        }
        let candidate = if i < sorted.len() {
            (value + sorted[i].0) / 2.0
        } else {
            value
        };
        let tpr = above_m as f64 / members as f64;
        let fpr = above_n as f64 / nonmembers as f64;
        let fitness = match objective {
            Objective::Youden => tpr - fpr,
            Objective::TprAtFpr { budget } => {
                if fpr > budget {
                    continue;
                }
                tpr
            }
        };
        let better = match &best {
            None => true,
            // candidates ascend, so >= also realizes ties-to-largest
            Some((best_fitness, _)) => fitness >= *best_fitness,
        };
        if better {
            best = Some((
                fitness,
                Threshold {
                    value: candidate,
                    tpr,
                    fpr,
                    objective,
                },
            ));
        }
    }
    // the reject-all candidate has fpr 0, so every objective admits it
    Ok(best.expect("reject-all candidate is always feasible").1)
}

/// How decision thresholds are calibrated inside [`evaluate_group`]: a
/// seeded fraction of each class is held out as development data and the
/// threshold optimizes the report's FPR budget on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Fraction of each class used as development data, in `(0, 1)`.
    pub dev_fraction: f64,
    /// Seed for the deterministic shuffle behind the split.
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            dev_fraction: 0.2,
            seed: 0,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn shuffle(items: &mut [(f64, bool)], state: &mut u64) {
    for i in (1..items.len()).rev() {
        let j = (splitmix64(state) % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Labeled scores split into a calibration slice and a held-out remainder.
pub type DevTestSplit = (Vec<(f64, bool)>, Vec<(f64, bool)>);

/// Deterministically partitions labeled scores into a development slice for
/// threshold calibration and a held-out remainder.
///
/// The split is stratified per class and keeps at least one instance of
/// each class in the development slice, so calibration on it never fails.
/// Identical `(scores, dev_fraction, seed)` inputs always produce the same
/// partition.
pub fn split_dev_test(
    scores: &[(f64, bool)],
    dev_fraction: f64,
    seed: u64,
) -> Result<DevTestSplit, EvalError> {
    validate_scores(scores)?;
    if !(dev_fraction > 0.0 && dev_fraction < 1.0) {
        return Err(EvalError::InvalidDevFraction {
            fraction: dev_fraction,
        });
    }
    let mut state = seed ^ 0xA076_1D64_78BD_642F;
    let mut dev = Vec::new();
    let mut test = Vec::new();
    for class in [true, false] {
        let mut pool: Vec<(f64, bool)> = scores
            .iter()
            .filter(|(_, label)| *label == class)
            .copied()
            .collect();
        shuffle(&mut pool, &mut state);
        let take = ((dev_fraction * pool.len() as f64) as usize).max(1);
        test.extend_from_slice(&pool[take.min(pool.len())..]);
        dev.extend_from_slice(&pool[..take.min(pool.len())]);
    }
    Ok((dev, test))
}

/// Confusion counts and rates of `score > threshold` on labeled scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRates {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub accuracy: f64,
}

pub fn classification_rates(
    scores: &[(f64, bool)],
    threshold: f64,
) -> Result<ClassificationRates, EvalError> {
    let (members, nonmembers) = validate_scores(scores)?;
    if threshold.is_nan() {
        return Err(EvalError::InvalidThreshold { value: threshold });
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    for &(score, label) in scores {
        if score > threshold {
            if label {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    Ok(ClassificationRates {
        true_positives: tp,
        false_positives: fp,
        true_negatives: nonmembers - fp,
        false_negatives: members - tp,
        tpr: tp as f64 / members as f64,
        fpr: fp as f64 / nonmembers as f64,
        accuracy: (tp + (nonmembers - fp)) as f64 / scores.len() as f64,
    })
}

/// Unweighted mean, the macro average over groups. `None` when empty.
pub fn macro_average(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let collected: Vec<f64> = values.into_iter().collect();
    compensated_mean(&collected)
}

/// Evaluation of one method on one instance group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEval {
    pub group: String,
    pub members: usize,
    pub nonmembers: usize,
    /// Instances in the group the method could not score.
    pub skipped: usize,
    pub auc: f64,
    pub tpr_at_budget: f64,
    pub threshold: Threshold,
}

/// Evaluates one group: AUC and TPR within the budget over all scores, plus
/// a decision threshold calibrated for that budget on a held-out
/// development slice of the group (the threshold's stored rates are its
/// development rates).
pub fn evaluate_group(
    group: &str,
    scores: &[(f64, bool)],
    skipped: usize,
    fpr_budget: f64,
    calibration: CalibrationConfig,
) -> Result<GroupEval, EvalError> {
    let curve = RocCurve::from_scores(scores)?;
    let tpr_at_budget = curve.tpr_at_fpr(fpr_budget)?;
    let (dev, _held_out) = split_dev_test(scores, calibration.dev_fraction, calibration.seed)?;
    let threshold = calibrate_threshold(&dev, Objective::TprAtFpr { budget: fpr_budget })?;
    Ok(GroupEval {
        group: group.to_string(),
        members: curve.members(),
        nonmembers: curve.nonmembers(),
        skipped,
        auc: curve.auc(),
        tpr_at_budget,
        threshold,
    })
}

/// One method's evaluation across groups with macro averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub groups: Vec<GroupEval>,
    pub macro_auc: f64,
    pub macro_tpr_at_budget: f64,
}

impl MethodSummary {
    /// Macro averages are unweighted means over the groups present, so
    /// differing group sizes never reweight the headline numbers.
    pub fn from_groups(method: Method, groups: Vec<GroupEval>) -> Result<Self, EvalError> {
        let macro_auc = macro_average(groups.iter().map(|g| g.auc)).ok_or(EvalError::NoGroups)?;
        let macro_tpr_at_budget =
            macro_average(groups.iter().map(|g| g.tpr_at_budget)).ok_or(EvalError::NoGroups)?;
        Ok(MethodSummary {
            method,
            groups,
            macro_auc,
            macro_tpr_at_budget,
        })
    }
}

/// Full evaluation report: one summary per method plus run metadata.
///
/// Serialization is deterministic: methods and groups keep their insertion
/// order and metadata is sorted by key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub fpr_budget: f64,
    pub methods: Vec<MethodSummary>,
    pub metadata: BTreeMap<String, String>,
}

impl fmt::Display for RocReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, value) in &self.metadata {
            writeln!(f, "{key}: {value}")?;
        }
        if !self.metadata.is_empty() {
            writeln!(f)?;
        }
        writeln!(f, "fpr budget: {}", self.fpr_budget)?;
        writeln!(f)?;
        writeln!(
            f,
            "{:<11} {:>6} {:>8} {:>11} {:>8} {:>8} {:>9} {:>12}",
            "method", "group", "members", "nonmembers", "skipped", "auc", "tpr@fpr", "threshold"
        )?;
        for summary in &self.methods {
            for group in &summary.groups {
                writeln!(
                    f,
                    "{:<11} {:>6} {:>8} {:>11} {:>8} {:>8.4} {:>9.4} {:>12.4}",
                    summary.method.id(),
                    group.group,
                    group.members,
                    group.nonmembers,
                    group.skipped,
                    group.auc,
                    group.tpr_at_budget,
                    group.threshold.value,
                )?;
            }
            writeln!(
                f,
                "{:<11} {:>6} {:>8} {:>11} {:>8} {:>8.4} {:>9.4} {:>12}",
                summary.method.id(),
                "macro",
                "-",
                "-",
                "-",
                summary.macro_auc,
                summary.macro_tpr_at_budget,
                "-",
            )?;
        }
        Ok(())
    }
}
