//! Evaluation metrics, the price of choices and the expected-cardinality
//! predictor for the randomized algorithm.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::SlotState;

/// Aggregate cardinality normalized by `m·n`.
pub fn nmac(state: &SlotState, n: usize) -> f64 {
    state.aggregate() as f64 / (state.m() * n) as f64
}

/// Expensive-link downloads normalized by `m·n`.
pub fn nmsd(state: &SlotState, n: usize) -> f64 {
    state.total_downloads() as f64 / (state.m() * n) as f64
}

/// `alpha / final_aggregate`. Only defined for runs where no node ever
/// downloads (`non_aggressive`).
pub fn price_of_choices(alpha: u64, final_aggregate: u64, non_aggressive: bool) -> Result<f64> {
    if !non_aggressive {
        return Err(Error::SapNonzero);
    }
    if final_aggregate == 0 {
        return Err(Error::ZeroAggregate);
    }
    Ok(alpha as f64 / final_aggregate as f64)
}

/// `ln C(n, x)` for real `x` via log-gamma.
fn ln_binomial(n: f64, x: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(x + 1.0) - ln_gamma(n - x + 1.0)
}

/// Which form of the per-epoch increment to iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecurrenceForm {
    /// First step uses the exact binomial factor `1 − 1/C(n,k)`; later steps
    /// use the closed Gamma expression `E(n−E) / (n (m−1)² C(n,E))`.
    #[default]
    Gamma,
    /// Every step uses `E(1 − E/n)(1 − 1/C(n,E)) / (m−1)²` with the binomial
    /// continued through log-gamma.
    Continued,
}

/// Expected per-node cardinality for epochs `1..=epochs` of the randomized
/// algorithm, starting from `E(x_1) = k`.
pub fn predict_expected_cardinality(
    m: usize,
    n: usize,
    k: usize,
    epochs: usize,
) -> Result<Vec<f64>> {
    predict_with_form(m, n, k, epochs, RecurrenceForm::Gamma)
}

pub fn predict_with_form(
    m: usize,
    n: usize,
    k: usize,
    epochs: usize,
    form: RecurrenceForm,
) -> Result<Vec<f64>> {
    Ok(Predictor::new(m, n, k, form)?.take(epochs).collect())
}

/// Unbounded stream of the predicted per-epoch expected cardinality.
#[derive(Debug, Clone)]
pub struct Predictor {
    n: f64,
    pairs: f64,
    form: RecurrenceForm,
    epoch: usize,
    current: f64,
}

impl Predictor {
    pub fn new(m: usize, n: usize, k: usize, form: RecurrenceForm) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!("need m >= 2, got {m}")));
        }
        if k == 0 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= k <= n - 1, got k = {k}, n = {n}"
            )));
        }
        Ok(Predictor {
            n: n as f64,
            pairs: ((m - 1) * (m - 1)) as f64,
            form,
            epoch: 1,
            current: k as f64,
        })
    }

    fn increment(&self) -> f64 {
        let (e, n) = (self.current, self.n);
        if e >= n {
            return 0.0;
        }
        let inc = match (self.form, self.epoch) {
            (RecurrenceForm::Gamma, 1) | (RecurrenceForm::Continued, _) => {
                let miss_equal = (-ln_binomial(n, e)).exp();
                e * (1.0 - e / n) * (1.0 - miss_equal) / self.pairs
            }
            (RecurrenceForm::Gamma, _) => {
                let gamma_ratio =
                    (ln_gamma(e + 1.0) + ln_gamma(n - e + 1.0) - ln_gamma(n + 1.0)).exp();
                e * gamma_ratio * (n - e) / (n * self.pairs)
            }
        };
        inc.max(0.0)
    }
}

impl Iterator for Predictor {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let out = self.current;
        self.current = (self.current + self.increment()).min(self.n);
        self.epoch += 1;
        Some(out)
    }
}

/// Normal-approximation interval `mean ± z·s/√N` at `level` (0.90, 0.95 or 0.99).
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    let z = match level {
        l if (l - 0.90).abs() < 1e-9 => 1.6449,
        l if (l - 0.95).abs() < 1e-9 => 1.9600,
        l if (l - 0.99).abs() < 1e-9 => 2.5758,
        l => {
            return Err(Error::InvalidParameter(format!(
                "unsupported confidence level {l}"
            )))
        }
    };
    let count = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / count;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0);
    Ok((mean, z * var.sqrt() / count.sqrt()))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
