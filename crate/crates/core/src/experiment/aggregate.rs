use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

use super::run::RegretTrace;

/// 95% interval estimator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CiMethod {
    /// `mean ± 1.96·sd/√n`.
    #[default]
    Normal,
    /// Student-t multiplier with `n − 1` degrees of freedom.
    StudentT,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub eval_index: usize,
    pub mean: f64,
    pub median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Trials contributing to this index.
    pub n: usize,
}

impl SummaryRow {
    /// A single trial: the interval collapses to the mean.
    pub fn degenerate(&self) -> bool {
        self.n < 2
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn multiplier(ci: CiMethod, n: usize) -> f64 {
    match ci {
        CiMethod::Normal => 1.96,
        CiMethod::StudentT => StudentsT::new(0.0, 1.0, (n - 1) as f64).map(|t| t.inverse_cdf(0.975)).unwrap_or(f64::NAN),
    }
}

/// Per method and evaluation index: mean, median and 95% CI of immediate
/// regret, or of the best value so far when the regret is unknown.
/// Methods keep their first-appearance order; trial order does not matter.
pub fn aggregate(traces: &[RegretTrace], ci: CiMethod) -> Result<Vec<SummaryRow>> {
    if traces.is_empty() {
        return Err(Error::invalid("nothing to aggregate"));
    }
    let mut order: Vec<&str> = Vec::new();
    for t in traces {
        if !order.contains(&t.method.as_str()) {
            order.push(&t.method);
        }
    }
    let mut out = Vec::new();
    for method in order {
        let group: Vec<&RegretTrace> = traces.iter().filter(|t| t.method == method).collect();
        let use_regret = group.iter().all(|t| t.rows.iter().all(|r| r.immediate_regret.is_some()));
        let mut by_index: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for t in &group {
            for r in &t.rows {
                let v = if use_regret { r.immediate_regret.unwrap() } else { r.best_so_far };
                by_index.entry(r.eval_index).or_default().push(v);
            }
        }
        for (eval_index, mut values) in by_index {
            // sorted first so the sums do not depend on trial order
            values.sort_by(f64::total_cmp);
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let half = if n < 2 {
                0.0
            } else {
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
                multiplier(ci, n) * var.sqrt() / (n as f64).sqrt()
            };
            let median = median(&mut values);
            out.push(SummaryRow {
                method: method.to_string(),
                eval_index,
                mean,
                median,
                ci_lo: mean - half,
                ci_hi: mean + half,
                n,
            });
        }
    }
    Ok(out)
}
