//! Potential-outcomes bookkeeping and reduction estimates.
//!
//! A user's series is split at the signup hour into a pretreatment part used
//! for training and a post-signup part holding treated and control hours.
//! Counterfactual consumption at a treated hour is the forecast of a model
//! trained on pretreatment data only; the estimated reduction is that
//! forecast minus the observed (treated) consumption, so positive values mean
//! the household used less than predicted.
//!
//! Semi-synthetic sets take an untreated series, pick a synthetic signup and
//! subtract a known Uniform[0, c̄] amount at random daytime hours after it,
//! which makes the true reduction available for error analysis.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::forecast::{fit_forecaster, FittedForecaster, ForecastConfig, ForecastError, Frame, LatentFit, Method};
use crate::hmm::DUAL_HOURS;
use crate::rng::{stream, stream_id};
use crate::stats::{mean, sample_variance, Aggregates};
use crate::time::Hour;

/// Spacing of the grid that semi-synthetic values are rounded to. Values on
/// this grid below 2^21 in magnitude subtract without rounding error.
pub const SNAP_GRID: f64 = 1.0 / 4_294_967_296.0;

pub const DEFAULT_MAGNITUDE: f64 = 0.2;
pub const DEFAULT_TREAT_FRACTION: f64 = 0.05;

pub const EVENTS_HEADER: [&str; 2] = ["user_id", "timestamp"];

#[derive(Debug, thiserror::Error)]
pub enum CausalError {
    #[error("events file line {line}: {message}")]
    Events { line: u64, message: String },
    #[error("signup {0} lies outside the series")]
    SignupOutOfRange(Hour),
    #[error("event at {event} precedes signup at {signup}")]
    EventBeforeSignup { event: Hour, signup: Hour },
    #[error("treatment fraction {0} must lie in (0, 1]")]
    InvalidFraction(f64),
    #[error("treatment magnitude {0} must be non-negative")]
    NegativeMagnitude(f64),
    #[error("no eligible daytime hours after the synthetic signup")]
    NoEligibleHours,
    #[error("length mismatch: {0} vs {1}")]
    Misaligned(usize, usize),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

/// Reads a `user_id,timestamp` list of demand-response events.
pub fn read_events<R: io::Read>(r: R) -> Result<BTreeMap<String, Vec<Hour>>, CausalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r);
    let bad = |line: u64, message: String| CausalError::Events { line, message };
    let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != EVENTS_HEADER {
        return Err(bad(1, format!("expected header {}", EVENTS_HEADER.join(","))));
    }
    let mut out: BTreeMap<String, Vec<Hour>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(bad(line, format!("expected 2 fields, got {}", rec.len())));
        }
        let t = Hour::parse(&rec[1]).map_err(|e| bad(line, e.to_string()))?;
        out.entry(rec[0].to_string()).or_default().push(t);
    }
    for v in out.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    Ok(out)
}

/// Rounds to the nearest multiple of [`SNAP_GRID`].
pub fn snap(x: f64) -> f64 {
    (x / SNAP_GRID).round() * SNAP_GRID
}

fn eligible_hour(t: Hour) -> bool {
    DUAL_HOURS.contains(&t.hour_of_day())
}

/// Index sets of one user's series. All indices refer to the series the
/// ledger was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentLedger {
    pub user_id: String,
    pub start: Hour,
    pub signup: Hour,
    pub pretreatment: Vec<usize>,
    pub control: Vec<usize>,
    pub treatment: Vec<usize>,
    pub placebo: Vec<usize>,
    pub automation: bool,
    /// Events after the end of the series, dropped.
    pub skipped_events: usize,
}

impl TreatmentLedger {
    /// Signup position, which is also the length of the pretreatment part.
    pub fn signup_index(&self) -> usize {
        self.pretreatment.len()
    }

    /// Replaces the placebo set with a seeded hour-matched draw.
    pub fn with_placebo(mut self, seed: u64, fallback_fraction: f64) -> Self {
        let labels = ["placebo", self.user_id.as_str()];
        self.placebo = select_placebo(
            self.start,
            &self.control,
            &self.treatment,
            fallback_fraction,
            seed,
            &labels,
        );
        self
    }
}

/// Partitions `frame` at `signup`. An event exactly at signup is treated.
pub fn split_by_signup(
    user_id: &str,
    frame: &Frame,
    signup: Hour,
    events: &[Hour],
    automation: bool,
) -> Result<TreatmentLedger, CausalError> {
    let s = frame.index_of(signup).ok_or(CausalError::SignupOutOfRange(signup))?;
    let mut treated = Vec::new();
    let mut skipped = 0;
    for &e in events {
        if e < signup {
            return Err(CausalError::EventBeforeSignup { event: e, signup });
        }
        match frame.index_of(e) {
            Some(i) => treated.push(i),
            None => skipped += 1,
        }
    }
    treated.sort_unstable();
    treated.dedup();
    let control = (s..frame.len()).filter(|i| treated.binary_search(i).is_err()).collect();
    Ok(TreatmentLedger {
        user_id: user_id.to_string(),
        start: frame.start,
        signup,
        pretreatment: (0..s).collect(),
        control,
        treatment: treated,
        placebo: Vec::new(),
        automation,
        skipped_events: skipped,
    })
}

/// Draws daytime control hours with the same hour-of-day counts as
/// `treatment`. With no treatment hours, each daytime control hour is kept
/// with probability `fallback_fraction`.
pub fn select_placebo(
    start: Hour,
    control: &[usize],
    treatment: &[usize],
    fallback_fraction: f64,
    seed: u64,
    labels: &[&str],
) -> Vec<usize> {
    let mut rng = stream(seed, stream_id(labels));
    let hour = |i: usize| start.offset(i as i64);
    let mut pool: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for &i in control {
        if eligible_hour(hour(i)) {
            pool.entry(hour(i).hour_of_day()).or_default().push(i);
        }
    }
    let mut out = Vec::new();
    if treatment.is_empty() {
        for idx in pool.values().flatten() {
            if rng.random::<f64>() < fallback_fraction {
                out.push(*idx);
            }
        }
    } else {
        let mut want: BTreeMap<u8, usize> = BTreeMap::new();
        for &i in treatment {
            *want.entry(hour(i).hour_of_day()).or_default() += 1;
        }
        for (h, n) in want {
            if let Some(candidates) = pool.get_mut(&h) {
                candidates.shuffle(&mut rng);
                out.extend(candidates.iter().take(n));
            }
        }
    }
    out.sort_unstable();
    out
}

/// A series with known injected reductions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiSyntheticSet {
    pub user_id: String,
    pub signup: Hour,
    pub signup_index: usize,
    pub treat_fraction: f64,
    pub magnitude: f64,
    pub seed: u64,
    /// Untreated outcomes y⁰, snapped to the grid.
    pub untreated: Frame,
    /// The same series with y¹ at treated hours.
    pub observed: Frame,
    pub treated: Vec<usize>,
    /// Injected amounts, aligned with `treated`.
    pub u: Vec<f64>,
    pub placebo: Vec<usize>,
}

impl SemiSyntheticSet {
    pub fn y0(&self) -> Vec<f64> {
        self.treated.iter().map(|&i| self.untreated.consumption[i]).collect()
    }

    pub fn y1(&self) -> Vec<f64> {
        self.treated.iter().map(|&i| self.observed.consumption[i]).collect()
    }

    /// True reductions y⁰ − y¹.
    pub fn true_reduction(&self) -> Vec<f64> {
        self.y0().iter().zip(self.y1()).map(|(a, b)| a - b).collect()
    }
}

/// Injects Uniform[0, `magnitude`] reductions at a Bernoulli(`treat_fraction`)
/// sample of daytime hours from `signup` on. Placebo hours are drawn from the
/// remaining daytime hours after signup.
pub fn make_semisynthetic(
    user_id: &str,
    frame: &Frame,
    signup: Hour,
    treat_fraction: f64,
    magnitude: f64,
    seed: u64,
) -> Result<SemiSyntheticSet, CausalError> {
    if !(treat_fraction > 0.0 && treat_fraction <= 1.0) {
        return Err(CausalError::InvalidFraction(treat_fraction));
    }
    if !(magnitude >= 0.0) {
        return Err(CausalError::NegativeMagnitude(magnitude));
    }
    let s = frame.index_of(signup).ok_or(CausalError::SignupOutOfRange(signup))?;
    let eligible: Vec<usize> = (s..frame.len()).filter(|&i| eligible_hour(frame.time(i))).collect();
    if eligible.is_empty() {
        return Err(CausalError::NoEligibleHours);
    }
    let mut untreated = frame.clone();
    untreated.consumption.iter_mut().for_each(|y| *y = snap(*y));
    let mut observed = untreated.clone();
    let mut rng = stream(seed, stream_id(&["semisynthetic", user_id]));
    let mut treated = Vec::new();
    let mut u = Vec::new();
    for &i in &eligible {
        if rng.random::<f64>() < treat_fraction {
            let d = snap(rng.random::<f64>() * magnitude).min(magnitude);
            observed.consumption[i] -= d;
            treated.push(i);
            u.push(d);
        }
    }
    let control: Vec<usize> = (s..frame.len()).filter(|i| treated.binary_search(i).is_err()).collect();
    let placebo = select_placebo(
        frame.start,
        &control,
        &treated,
        treat_fraction,
        seed,
        &["placebo", user_id],
    );
    Ok(SemiSyntheticSet {
        user_id: user_id.to_string(),
        signup,
        signup_index: s,
        treat_fraction,
        magnitude,
        seed,
        untreated,
        observed,
        treated,
        u,
        placebo,
    })
}

/// One-step counterfactual forecasts at `targets`, using observed history.
/// The model's training window must end before the first target.
pub fn estimate_counterfactuals(
    model: &FittedForecaster,
    frame: &Frame,
    targets: &[usize],
) -> Result<Vec<f64>, CausalError> {
    Ok(model
        .predict_targets(frame, targets)?
        .iter()
        .map(|p| p.y_pred)
        .collect())
}

/// Pointwise ŷ⁰ − y¹.
pub fn estimate_reduction(counterfactual: &[f64], observed: &[f64]) -> Result<Vec<f64>, CausalError> {
    if counterfactual.len() != observed.len() {
        return Err(CausalError::Misaligned(counterfactual.len(), observed.len()));
    }
    Ok(counterfactual.iter().zip(observed).map(|(a, b)| a - b).collect())
}

/// Eventwise errors with their mean and sample variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub errors: Vec<f64>,
    pub bias: f64,
    pub variance: f64,
}

impl ErrorSummary {
    pub fn from_errors(errors: Vec<f64>) -> Self {
        let bias = if errors.is_empty() { 0.0 } else { mean(&errors) };
        let variance = sample_variance(&errors);
        Self { errors, bias, variance }
    }

    /// Standard error of the mean error.
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.errors.len().max(1) as f64).sqrt()
    }
}

/// Errors ŷΔ − yΔ of estimated against true reductions.
pub fn eventwise_error(estimated: &[f64], truth: &[f64]) -> Result<ErrorSummary, CausalError> {
    if estimated.len() != truth.len() {
        return Err(CausalError::Misaligned(estimated.len(), truth.len()));
    }
    Ok(ErrorSummary::from_errors(
        estimated.iter().zip(truth).map(|(a, b)| a - b).collect(),
    ))
}

/// One estimated reduction with its conditioning labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionRecord {
    pub user_id: String,
    pub timestamp: Hour,
    pub hour: u8,
    pub latent: Option<u8>,
    pub automation: bool,
    pub placebo: bool,
    pub y_obs: f64,
    pub y_hat_cf: f64,
    pub reduction: f64,
}

pub const REDUCTION_HEADER: &str = "user_id,timestamp,hour,latent,automation,placebo,y_obs,y_hat_cf,reduction";

pub fn write_reduction_rows<W: Write>(w: &mut W, records: &[ReductionRecord]) -> io::Result<()> {
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.user_id,
            r.timestamp,
            r.hour,
            r.latent.map(|l| l.to_string()).unwrap_or_default(),
            r.automation as u8,
            r.placebo as u8,
            r.y_obs,
            r.y_hat_cf,
            r.reduction
        )?;
    }
    Ok(())
}

/// Pointwise reductions and their aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionEstimate {
    pub records: Vec<ReductionRecord>,
    pub aggregates: Option<Aggregates>,
}

impl ReductionEstimate {
    pub fn new(records: Vec<ReductionRecord>) -> Self {
        let values: Vec<f64> = records.iter().map(|r| r.reduction).collect();
        Self {
            aggregates: Aggregates::of(&values),
            records,
        }
    }

    pub fn reductions(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reduction).collect()
    }
}

/// Trains `method` on the pretreatment part and forecasts the treated and
/// placebo hours of the ledger.
pub fn analyze_user(
    frame: &Frame,
    ledger: &TreatmentLedger,
    method: Method,
    config: &ForecastConfig,
    latent: Option<&LatentFit>,
) -> Result<ReductionEstimate, CausalError> {
    let train = frame.slice(0..ledger.signup_index());
    let mut targets: Vec<(usize, bool)> = ledger
        .treatment
        .iter()
        .map(|&i| (i, false))
        .chain(ledger.placebo.iter().map(|&i| (i, true)))
        .collect();
    targets.sort_unstable();
    if targets.is_empty() {
        return Ok(ReductionEstimate::new(Vec::new()));
    }
    let model = fit_forecaster(method, &train, config, latent)?;
    let idx: Vec<usize> = targets.iter().map(|t| t.0).collect();
    let preds = model.predict_targets(frame, &idx)?;
    let records = targets
        .iter()
        .zip(preds)
        .map(|(&(i, placebo), p)| {
            let y_obs = frame.consumption[i];
            ReductionRecord {
                user_id: ledger.user_id.clone(),
                timestamp: p.timestamp,
                hour: p.timestamp.hour_of_day(),
                latent: p.latent_label,
                automation: ledger.automation,
                placebo,
                y_obs,
                y_hat_cf: p.y_pred,
                reduction: p.y_pred - y_obs,
            }
        })
        .collect();
    Ok(ReductionEstimate::new(records))
}

/// Result of running one method on a semi-synthetic set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiSyntheticEval {
    pub method: Method,
    /// Counterfactual forecasts at treated hours, snapped to the grid.
    pub counterfactual: Vec<f64>,
    pub estimated_reduction: Vec<f64>,
    pub true_reduction: Vec<f64>,
    /// ŷΔ − yΔ.
    pub summary: ErrorSummary,
    /// ŷ⁰ − y⁰, computed separately.
    pub direct_errors: Vec<f64>,
    /// Estimated reductions at placebo hours.
    pub placebo_reduction: Vec<f64>,
    pub records: Vec<ReductionRecord>,
}

impl SemiSyntheticEval {
    /// Whether both error computations agree bit for bit.
    pub fn identity_holds(&self) -> bool {
        self.summary.errors.len() == self.direct_errors.len()
            && self
                .summary
                .errors
                .iter()
                .zip(&self.direct_errors)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Trains on the part of the set before its signup and scores the injected
/// reductions. Forecasts are snapped to the grid so that both error forms
/// are exact.
pub fn evaluate_semisynthetic(
    set: &SemiSyntheticSet,
    method: Method,
    config: &ForecastConfig,
    latent: Option<&LatentFit>,
) -> Result<SemiSyntheticEval, CausalError> {
    let ledger = TreatmentLedger {
        user_id: set.user_id.clone(),
        start: set.observed.start,
        signup: set.signup,
        pretreatment: (0..set.signup_index).collect(),
        control: Vec::new(),
        treatment: set.treated.clone(),
        placebo: set.placebo.clone(),
        automation: false,
        skipped_events: 0,
    };
    let mut estimate = analyze_user(&set.observed, &ledger, method, config, latent)?;
    for r in &mut estimate.records {
        r.y_hat_cf = snap(r.y_hat_cf);
        r.reduction = r.y_hat_cf - r.y_obs;
    }
    let (placebo, treated): (Vec<&ReductionRecord>, Vec<&ReductionRecord>) =
        estimate.records.iter().partition(|r| r.placebo);
    let counterfactual: Vec<f64> = treated.iter().map(|r| r.y_hat_cf).collect();
    let estimated_reduction = estimate_reduction(&counterfactual, &set.y1())?;
    let true_reduction = set.true_reduction();
    let summary = eventwise_error(&estimated_reduction, &true_reduction)?;
    let direct_errors = counterfactual.iter().zip(set.y0()).map(|(a, b)| a - b).collect();
    Ok(SemiSyntheticEval {
        method,
        counterfactual,
        estimated_reduction,
        true_reduction,
        summary,
        direct_errors,
        placebo_reduction: placebo.iter().map(|r| r.reduction).collect(),
        records: estimate.records,
    })
}

/// Which labels to group by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupBy {
    pub hour: bool,
    pub latent: bool,
    pub automation: bool,
    pub placebo: bool,
}

impl GroupBy {
    pub const ALL: GroupBy = GroupBy {
        hour: true,
        latent: true,
        automation: true,
        placebo: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub hour: Option<u8>,
    /// `Some(None)` groups records that carry no latent label.
    pub latent: Option<Option<u8>>,
    pub automation: Option<bool>,
    pub placebo: Option<bool>,
}

impl GroupKey {
    fn matches(&self, r: &ReductionRecord) -> bool {
        self.hour.is_none_or(|h| h == r.hour)
            && self.latent.is_none_or(|l| l == r.latent)
            && self.automation.is_none_or(|a| a == r.automation)
            && self.placebo.is_none_or(|p| p == r.placebo)
    }

    /// Stable text form used as the JSON key.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(h) = self.hour {
            parts.push(format!("hour={h:02}"));
        }
        if let Some(l) = self.latent {
            parts.push(format!(
                "latent={}",
                l.map(|v| v.to_string()).unwrap_or_else(|| "none".into())
            ));
        }
        if let Some(a) = self.automation {
            parts.push(format!("automation={a}"));
        }
        if let Some(p) = self.placebo {
            parts.push(format!("placebo={p}"));
        }
        if parts.is_empty() {
            "all".into()
        } else {
            parts.join(",")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub key: GroupKey,
    pub count: usize,
    /// `None` for an empty group.
    pub aggregates: Option<Aggregates>,
}

/// Aggregates over every combination of the selected labels, including
/// empty combinations.
pub fn conditional_summary(records: &[ReductionRecord], by: GroupBy) -> Vec<GroupSummary> {
    let hours: Vec<Option<u8>> = if by.hour {
        (0..24).map(Some).collect()
    } else {
        vec![None]
    };
    let latents: Vec<Option<Option<u8>>> = if by.latent {
        let mut v = vec![Some(Some(0)), Some(Some(1))];
        if records.iter().any(|r| r.latent.is_none()) {
            v.insert(0, Some(None));
        }
        v
    } else {
        vec![None]
    };
    let flags = |on: bool| if on { vec![Some(false), Some(true)] } else { vec![None] };
    let mut out = Vec::new();
    for &hour in &hours {
        for &latent in &latents {
            for &automation in &flags(by.automation) {
                for &placebo in &flags(by.placebo) {
                    let key = GroupKey {
                        hour,
                        latent,
                        automation,
                        placebo,
                    };
                    let values: Vec<f64> = records.iter().filter(|r| key.matches(r)).map(|r| r.reduction).collect();
                    out.push(GroupSummary {
                        key,
                        count: values.len(),
                        aggregates: Aggregates::of(&values),
                    });
                }
            }
        }
    }
    out
}

/// Groups keyed by their label, for JSON output.
pub fn summary_map(groups: &[GroupSummary]) -> BTreeMap<String, &GroupSummary> {
    groups.iter().map(|g| (g.key.label(), g)).collect()
}
