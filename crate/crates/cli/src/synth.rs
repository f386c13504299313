//! `synth`: inject known reductions after a synthetic signup and score each
//! method's estimates against them.

use std::collections::BTreeMap;
use std::fmt::Write;

use drlatent::batch::{self, Exec};
use drlatent::causal::{evaluate_semisynthetic, make_semisynthetic, ErrorSummary, SemiSyntheticEval};
use drlatent::forecast::{fit_latent, Family, Frame, Method};
use drlatent::Hour;
use serde::Serialize;

use crate::config::RunConfig;
use crate::forecast::user_config;
use crate::output::{self, file_stem};
use crate::store::{self, StoredUser};
use crate::svg;

/// The midnight closest to two thirds of the frame.
pub fn default_signup(frame: &Frame) -> Option<Hour> {
    let target = (2 * frame.len() / 3) as i64;
    (0..frame.len() as i64)
        .filter(|&i| frame.time(i as usize).hour_of_day() == 0)
        .min_by_key(|&i| (i - target).abs())
        .map(|i| frame.time(i as usize))
}

struct UserResult {
    signup: Hour,
    evals: Vec<(Method, Result<SemiSyntheticEval, String>)>,
}

fn synth_user(config: &RunConfig, user: &StoredUser) -> Result<UserResult, String> {
    let id = &user.series.user_id;
    let frame = Frame::from_series(&user.series);
    let signup = config
        .signup
        .or_else(|| default_signup(&frame))
        .ok_or("series has no midnight")?;
    let cfg = user_config(config, id);
    let set = make_semisynthetic(id, &frame, signup, config.treat_fraction, config.magnitude, cfg.seed)
        .map_err(|e| e.to_string())?;
    let latent = if config.methods.iter().any(|m| m.uses_hmm()) {
        Some(fit_latent(&set.observed.slice(0..set.signup_index), &cfg).map_err(|e| e.to_string()))
    } else {
        None
    };
    let evals = batch::map(Exec::Parallel, &config.methods, |&m| {
        let r = match (&latent, m.uses_hmm()) {
            (Some(Err(e)), true) => Err(format!("latent model: {e}")),
            (Some(Ok(l)), true) => evaluate_semisynthetic(&set, m, &cfg, Some(l)).map_err(|e| e.to_string()),
            _ => evaluate_semisynthetic(&set, m, &cfg, None).map_err(|e| e.to_string()),
        };
        (m, r)
    });
    Ok(UserResult { signup, evals })
}

#[derive(Serialize)]
struct MethodSummary {
    n_users: usize,
    n_events: usize,
    bias: Option<f64>,
    variance: Option<f64>,
    standard_error: Option<f64>,
    identity_holds: bool,
    mean_placebo_reduction: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    note: &'static str,
    /// Pooled over users.
    methods: BTreeMap<String, MethodSummary>,
}

fn color(m: Method) -> &'static str {
    if m.uses_hmm() || m == Method::Cgmm {
        svg::GREEN
    } else {
        svg::RED
    }
}

pub fn run(config: &RunConfig) -> anyhow::Result<()> {
    let (_, users) = store::load(config.store()?)?;
    let results = batch::map(Exec::Parallel, &users, |u| synth_user(config, u));
    let out = &config.paths.out;

    let mut errors = String::from_utf8(output::csv(
        config,
        "user_id,method,signup,n_events,bias,variance,identity_holds",
    ))?;
    let mut skipped = String::from_utf8(output::csv(config, "user_id,method,reason"))?;
    let mut pooled: BTreeMap<Method, (usize, Vec<f64>, Vec<f64>, bool)> = config
        .methods
        .iter()
        .map(|m| (*m, (0, Vec::new(), Vec::new(), true)))
        .collect();
    for (user, res) in users.iter().zip(&results) {
        let id = &user.series.user_id;
        let res = match res {
            Ok(r) => r,
            Err(e) => {
                writeln!(skipped, "{id},,{}", e.replace(',', ";"))?;
                continue;
            }
        };
        let mut rows = output::csv(
            config,
            "method,timestamp,y0,y1,y_hat_cf,true_reduction,estimated_reduction,error",
        );
        for (m, e) in &res.evals {
            let e = match e {
                Ok(e) => e,
                Err(msg) => {
                    writeln!(skipped, "{id},{m},{}", msg.replace(',', ";"))?;
                    continue;
                }
            };
            let treated = e.records.iter().filter(|r| !r.placebo);
            for (k, r) in treated.enumerate() {
                let y0 = r.y_obs + e.true_reduction[k];
                rows.extend_from_slice(
                    format!(
                        "{m},{},{y0},{},{},{},{},{}\n",
                        r.timestamp,
                        r.y_obs,
                        r.y_hat_cf,
                        e.true_reduction[k],
                        e.estimated_reduction[k],
                        e.summary.errors[k]
                    )
                    .as_bytes(),
                );
            }
            let s = &e.summary;
            let n = s.errors.len();
            let fmt = |v: f64| if n == 0 { String::new() } else { v.to_string() };
            writeln!(
                errors,
                "{id},{m},{},{n},{},{},{}",
                res.signup,
                fmt(s.bias),
                if n > 1 { s.variance.to_string() } else { String::new() },
                e.identity_holds()
            )?;
            let p = pooled.entry(*m).or_default();
            p.0 += 1;
            p.1.extend(&s.errors);
            p.2.extend(&e.placebo_reduction);
            p.3 &= e.identity_holds();
        }
        output::write(&out.join("semisynthetic").join(format!("{}.csv", file_stem(id))), rows)?;
    }

    let mut methods = BTreeMap::new();
    for (m, (n_users, errs, placebo, identity)) in &pooled {
        let s = (!errs.is_empty()).then(|| ErrorSummary::from_errors(errs.clone()));
        methods.insert(
            m.name(),
            MethodSummary {
                n_users: *n_users,
                n_events: errs.len(),
                bias: s.as_ref().map(|s| s.bias),
                variance: s.as_ref().filter(|_| errs.len() > 1).map(|s| s.variance),
                standard_error: s.as_ref().filter(|_| errs.len() > 1).map(|s| s.standard_error()),
                identity_holds: *identity,
                mean_placebo_reduction: (!placebo.is_empty()).then(|| drlatent::stats::mean(placebo)),
            },
        );
    }
    output::write(&out.join("errors.csv"), errors)?;
    output::write(&out.join("skipped.csv"), skipped)?;
    output::write(
        &out.join("error_summary.json"),
        output::json(config, &Summary {
                note: "variance is of the eventwise estimation error; the irreducible noise term is not identified separately",
                methods,
            })?,
    )?;

    // one chart per family, with and without the latent label
    let meta = config.to_json();
    let mut groups: BTreeMap<String, Vec<Method>> = BTreeMap::new();
    for m in &config.methods {
        let key = m.family().map(Family::name).unwrap_or("cgmm").to_string();
        groups.entry(key).or_default().push(*m);
    }
    for (key, ms) in groups {
        let series: Vec<(String, &str, &[f64])> = ms
            .iter()
            .map(|m| (m.name(), color(*m), pooled[m].1.as_slice()))
            .collect();
        let refs: Vec<(&str, &str, &[f64])> = series.iter().map(|(n, c, v)| (n.as_str(), *c, *v)).collect();
        let chart = svg::histogram(
            &format!("Reduction estimation error, {key}"),
            "estimated minus true reduction",
            &refs,
            30,
            &meta,
        );
        output::write(&out.join(format!("error_hist_{}.svg", file_stem(&key))), chart)?;
    }
    Ok(())
}
