//! `forecast`: per-user MAPE of every requested method.

use std::collections::BTreeMap;
use std::fmt::Write;

use drlatent::batch::{self, Exec};
use drlatent::forecast::{fit_latent, run_forecast, ForecastConfig, ForecastRun, Frame, Method, FORECAST_HEADER};
use drlatent::rng::derive_seed;
use drlatent::stats::Aggregates;

use crate::config::RunConfig;
use crate::output::{self, file_stem};
use crate::store::{self, StoredUser};
use crate::svg::{self, BoxSeries};

/// Pretreatment hours of a user: everything before signup when it falls
/// inside the series.
pub fn pretreatment(user: &StoredUser) -> Frame {
    let frame = Frame::from_series(&user.series);
    match user.meta.signup.and_then(|s| frame.index_of(s)) {
        Some(i) => frame.slice(0..i),
        None => frame,
    }
}

pub fn user_config(config: &RunConfig, user_id: &str) -> ForecastConfig {
    ForecastConfig {
        seed: derive_seed(config.seed, &[user_id]),
        ..config.forecast.clone()
    }
}

type MethodResult = (Method, Result<ForecastRun, String>);

fn forecast_user(config: &RunConfig, user: &StoredUser) -> Vec<MethodResult> {
    let id = &user.series.user_id;
    let pre = pretreatment(user);
    let n_train = (pre.len() as f64 * config.train_fraction).floor() as usize;
    let (train, test) = pre.split_at(n_train.min(pre.len()));
    let cfg = user_config(config, id);
    let latent = if config.methods.iter().any(|m| m.uses_hmm()) {
        Some(fit_latent(&train, &cfg).map_err(|e| e.to_string()))
    } else {
        None
    };
    batch::map(Exec::Parallel, &config.methods, |&m| {
        let run = match (&latent, m.uses_hmm()) {
            (Some(Err(e)), true) => Err(format!("latent model: {e}")),
            (Some(Ok(l)), true) => run_forecast(id, m, &train, &test, &cfg, Some(l)).map_err(|e| e.to_string()),
            _ => run_forecast(id, m, &train, &test, &cfg, None).map_err(|e| e.to_string()),
        };
        (m, run)
    })
}

pub fn run(config: &RunConfig) -> anyhow::Result<()> {
    let (_, users) = store::load(config.store()?)?;
    let results = batch::map(Exec::Parallel, &users, |u| forecast_user(config, u));
    let out = &config.paths.out;

    let mut mape = String::from_utf8(output::csv(config, "user_id,method,mape,included,excluded"))?;
    let mut skipped = String::from_utf8(output::csv(config, "user_id,method,reason"))?;
    let mut by_method: BTreeMap<Method, Vec<f64>> = config.methods.iter().map(|m| (*m, Vec::new())).collect();
    for (user, runs) in users.iter().zip(&results) {
        let id = &user.series.user_id;
        let mut rows = output::csv(config, FORECAST_HEADER);
        for (m, r) in runs {
            match r {
                Ok(run) => {
                    run.write_rows(&mut rows)?;
                    match run.mape {
                        Some(v) => {
                            writeln!(mape, "{id},{m},{},{},{}", v.value, v.included, v.excluded)?;
                            by_method.entry(*m).or_default().push(v.value);
                        }
                        None => writeln!(skipped, "{id},{m},MAPE undefined on the test window")?,
                    }
                }
                Err(e) => writeln!(skipped, "{id},{m},{}", e.replace(',', ";"))?,
            }
        }
        output::write(&out.join("forecasts").join(format!("{}.csv", file_stem(id))), rows)?;
    }

    let mut summary = String::from_utf8(output::csv(config, "method,n_users,mean,median,p10,p25,p75,p90"))?;
    let mut boxes = Vec::new();
    for m in &config.methods {
        let a = Aggregates::of(&by_method[m]);
        match a {
            Some(a) => writeln!(
                summary,
                "{m},{},{},{},{},{},{},{}",
                a.count, a.mean, a.median, a.p10, a.p25, a.p75, a.p90
            )?,
            None => writeln!(summary, "{m},0,,,,,,")?,
        }
        boxes.push(a);
    }
    let categories: Vec<String> = config.methods.iter().map(|m| m.name()).collect();
    let chart = svg::boxplot(
        "MAPE per user",
        "MAPE (%)",
        &categories,
        &[BoxSeries {
            name: "users",
            color: svg::BLUE,
            boxes,
        }],
        &config.to_json(),
    );
    output::write(&out.join("mape.csv"), mape)?;
    output::write(&out.join("mape_summary.csv"), summary)?;
    output::write(&out.join("skipped.csv"), skipped)?;
    output::write(&out.join("mape_boxplot.svg"), chart)?;
    Ok(())
}
