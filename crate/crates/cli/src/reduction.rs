//! `reduction`: estimated reductions at recorded events, with placebo hours,
//! summarised by hour, latent label, automation and placebo flag.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::fs::File;

use anyhow::Context;
use drlatent::batch::{self, Exec};
use drlatent::causal::{
    analyze_user, conditional_summary, read_events, split_by_signup, summary_map, write_reduction_rows, GroupBy,
    GroupSummary, ReductionRecord, REDUCTION_HEADER,
};
use drlatent::forecast::{fit_latent, Frame};
use drlatent::rng::derive_seed;
use drlatent::stats::Aggregates;
use serde::Serialize;

use crate::config::RunConfig;
use crate::forecast::user_config;
use crate::output;
use crate::store::{self, StoredUser};
use crate::svg::{self, BoxSeries};
use crate::UsageError;

fn reduce_user(
    config: &RunConfig,
    user: &StoredUser,
    events: &[drlatent::Hour],
) -> anyhow::Result<Vec<ReductionRecord>> {
    let id = &user.series.user_id;
    let signup = user.meta.signup.ok_or_else(|| anyhow::anyhow!("no signup date"))?;
    let frame = Frame::from_series(&user.series);
    let ledger = split_by_signup(id, &frame, signup, events, user.meta.has_automation)?
        .with_placebo(derive_seed(config.seed, &["placebo", id]), config.treat_fraction);
    let cfg = user_config(config, id);
    let latent = if config.estimator.uses_hmm() {
        Some(fit_latent(&frame.slice(0..ledger.signup_index()), &cfg)?)
    } else {
        None
    };
    Ok(analyze_user(&frame, &ledger, config.estimator, &cfg, latent.as_ref())?.records)
}

#[derive(Serialize)]
struct Summary<'a> {
    estimator: String,
    users: usize,
    overall: BTreeMap<String, &'a GroupSummary>,
    groups: BTreeMap<String, &'a GroupSummary>,
}

fn boxes(records: &[&ReductionRecord], hours: &[u8], latent: u8) -> Vec<Option<Aggregates>> {
    hours
        .iter()
        .map(|&h| {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r.hour == h && r.latent == Some(latent))
                .map(|r| r.reduction)
                .collect();
            Aggregates::of(&v)
        })
        .collect()
}

pub fn run(config: &RunConfig) -> anyhow::Result<()> {
    let (_, users) = store::load(config.store()?)?;
    let path = config
        .paths
        .events
        .as_deref()
        .ok_or_else(|| UsageError("--events is required".into()))?;
    let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let events = read_events(file).with_context(|| format!("reading {}", path.display()))?;
    let none = Vec::new();
    let results = batch::map(Exec::Parallel, &users, |u| {
        reduce_user(config, u, events.get(&u.series.user_id).unwrap_or(&none))
    });
    let out = &config.paths.out;

    let mut records = Vec::new();
    let mut analysed = 0;
    let mut skipped = String::from_utf8(output::csv(config, "user_id,reason"))?;
    for (u, r) in users.iter().zip(results) {
        match r {
            Ok(r) => {
                analysed += 1;
                records.extend(r);
            }
            Err(e) => writeln!(skipped, "{},{}", u.series.user_id, format!("{e:#}").replace(',', ";"))?,
        }
    }
    for id in events
        .keys()
        .filter(|id| !users.iter().any(|u| &&u.series.user_id == id))
    {
        writeln!(skipped, "{id},events for a user not in the store")?;
    }

    let mut csv = output::csv(config, REDUCTION_HEADER);
    write_reduction_rows(&mut csv, &records)?;
    let groups = conditional_summary(&records, GroupBy::ALL);
    let overall = conditional_summary(
        &records,
        GroupBy {
            automation: true,
            placebo: true,
            ..GroupBy::default()
        },
    );
    let summary = Summary {
        estimator: config.estimator.name(),
        users: analysed,
        overall: summary_map(&overall),
        groups: summary_map(&groups),
    };
    output::write(&out.join("reduction.csv"), csv)?;
    output::write(&out.join("reduction_summary.json"), output::json(config, &summary)?)?;
    output::write(&out.join("skipped.csv"), skipped)?;

    let meta = config.to_json();
    for automation in [false, true] {
        let treated: Vec<&ReductionRecord> = records
            .iter()
            .filter(|r| !r.placebo && r.automation == automation)
            .collect();
        let mut hours: Vec<u8> = treated.iter().map(|r| r.hour).collect();
        hours.sort_unstable();
        hours.dedup();
        let categories: Vec<String> = hours.iter().map(|h| format!("{h:02}")).collect();
        let chart = svg::boxplot(
            &format!("Estimated reduction by hour, automation={automation}"),
            "reduction (scaled)",
            &categories,
            &[
                BoxSeries {
                    name: "latent 0",
                    color: svg::BLUE,
                    boxes: boxes(&treated, &hours, 0),
                },
                BoxSeries {
                    name: "latent 1",
                    color: svg::GREEN,
                    boxes: boxes(&treated, &hours, 1),
                },
            ],
            &meta,
        );
        output::write(
            &out.join(format!("reduction_boxplot_automation_{automation}.svg")),
            chart,
        )?;
    }
    Ok(())
}
