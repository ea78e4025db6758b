//! Margin quantiles across targets and the perturbation budget at which
//! they cross the success threshold.

use serde::{Deserialize, Serialize};

use crate::attack::AttackTrace;
use crate::error::{Error, Result};

/// `(perturbation count, value)` pairs in increasing count order.
pub type Curve = Vec<(usize, f64)>;

/// The `q`-quantile with linear interpolation between the closest order
/// statistics: position `q·(n−1)` in the sorted sample.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile {q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Margins of every trace at every evaluated step.
///
/// All traces must be evaluated at the same steps. A trace that ran out of
/// legal perturbations early keeps its last margin for the remaining
/// steps: the attacker cannot do any further damage.
pub fn aligned_margins(traces: &[AttackTrace]) -> Result<Vec<(usize, Vec<f64>)>> {
    let Some(longest) = traces.iter().map(|t| t.margins.len()).max() else {
        return Err(Error::invalid("no traces"));
    };
    let reference = traces
        .iter()
        .find(|t| t.margins.len() == longest)
        .expect("a longest trace exists");
    let steps = reference.evaluated_steps();
    let mut out = Vec::with_capacity(steps.len());
    for &s in &steps {
        let mut column = Vec::with_capacity(traces.len());
        for t in traces {
            let m = if s < t.margins.len() {
                t.margins[s]
            } else if t.exhausted {
                t.margins.iter().rev().find_map(|m| *m)
            } else {
                None
            };
            column.push(m.ok_or_else(|| {
                Error::invalid(format!(
                    "target {}: no margin at step {s} (traces evaluated at different steps)",
                    t.target
                ))
            })?);
        }
        out.push((s, column));
    }
    Ok(out)
}

/// The `q`-quantile of target margins at each evaluated step.
pub fn margin_quantile_curve(traces: &[AttackTrace], q: f64) -> Result<Curve> {
    aligned_margins(traces)?
        .into_iter()
        .map(|(s, col)| Ok((s, quantile(&col, q)?)))
        .collect()
}

/// First perturbation count at which the piecewise-linear curve reaches
/// `tau` or below, or `budget + 1` if it never does. A curve that starts
/// at or below `tau` needs no budget.
pub fn required_budget(curve: &[(usize, f64)], tau: f64, budget: usize) -> f64 {
    let Some(&(s0, v0)) = curve.first() else {
        return budget as f64 + 1.0;
    };
    if v0 <= tau {
        log::warn!("margin curve starts at {v0}, already at or below the threshold {tau}");
        return 0.0;
    }
    let (mut ps, mut pv) = (s0 as f64, v0);
    for &(s, v) in &curve[1..] {
        let s = s as f64;
        if v <= tau {
            return ps + (pv - tau) / (pv - v) * (s - ps);
        }
        (ps, pv) = (s, v);
    }
    budget as f64 + 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetPoint {
    pub success_prob: f64,
    pub mean: f64,
    /// Sample standard deviation over trials divided by `√n`; 0 for a
    /// single trial.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetCurve {
    pub points: Vec<BudgetPoint>,
    pub n_trials: usize,
    /// Set when there was one trial, so no standard error exists.
    pub stderr_undefined: bool,
}

/// Mean and standard error of `xs`.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Budget needed for each success probability `p`: per trial, the budget at
/// which the `p`-quantile margin curve crosses `tau`; then the mean and
/// standard error across trials.
pub fn budget_vs_success(
    trials: &[Vec<AttackTrace>],
    success_probs: &[f64],
    tau: f64,
    budget: usize,
) -> Result<BudgetCurve> {
    if trials.is_empty() {
        return Err(Error::invalid("need at least one trial"));
    }
    let aligned: Vec<_> = trials.iter().map(|t| aligned_margins(t)).collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(success_probs.len());
    for &p in success_probs {
        let per_trial: Vec<f64> = aligned
            .iter()
            .map(|cols| {
                let curve: Curve = cols
                    .iter()
                    .map(|(s, col)| Ok((*s, quantile(col, p)?)))
                    .collect::<Result<_>>()?;
                Ok(required_budget(&curve, tau, budget))
            })
            .collect::<Result<_>>()?;
        let (mean, stderr) = mean_stderr(&per_trial);
        points.push(BudgetPoint {
            success_prob: p,
            mean,
            stderr,
        });
    }
    Ok(BudgetCurve {
        points,
        n_trials: trials.len(),
        stderr_undefined: trials.len() == 1,
    })
}
