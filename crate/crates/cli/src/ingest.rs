//! `ingest`: raw CSVs to a series store with an ADF report.

use std::collections::BTreeMap;
use std::fmt::Write;

use drlatent::batch::{self, Exec};
use drlatent::data::{
    adf_test, align_and_scale_with, exclusions, filter_users, load_metadata, load_readings, AlignOptions,
    ConsumptionSeries, ExclusionReason, RawReadingTable,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output;
use crate::store::{self, Manifest, UserEntry};
use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub user_id: String,
    pub reason: String,
}

/// The longest aligned piece; the earliest wins a tie.
fn longest(pieces: Vec<ConsumptionSeries>) -> Option<(ConsumptionSeries, usize)> {
    let dropped = pieces.len().saturating_sub(1);
    let mut best: Option<ConsumptionSeries> = None;
    for p in pieces {
        if best.as_ref().is_none_or(|b| p.len() > b.len()) {
            best = Some(p);
        }
    }
    best.map(|b| (b, dropped))
}

pub fn run(config: &RunConfig) -> anyhow::Result<()> {
    let meter = config
        .paths
        .meter
        .as_deref()
        .ok_or_else(|| UsageError("--meter is required".into()))?;
    let temperature = config
        .paths
        .temperature
        .as_deref()
        .ok_or_else(|| UsageError("--temperature is required".into()))?;
    let (mut table, temps) = load_readings(meter, temperature)?;
    if let Some(p) = &config.paths.metadata {
        table = table.with_metadata(load_metadata(p)?);
    }
    let excluded = exclusions(&table, config.max_kwh);
    let kept = filter_users(&table, config.max_kwh);
    let opts = AlignOptions {
        station: config.station.clone(),
        ..Default::default()
    };
    let users: Vec<(&String, &Vec<_>)> = kept.readings.iter().collect();
    let aligned = batch::map(Exec::Parallel, &users, |(id, rows)| {
        let single = RawReadingTable {
            readings: BTreeMap::from([((*id).clone(), (*rows).clone())]),
            metadata: BTreeMap::new(),
        };
        align_and_scale_with(&single, &temps, &opts).map(longest)
    });

    let out = &config.paths.out;
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    let mut adf = String::from_utf8(output::csv(
        config,
        "user_id,test_statistic,critical_value_99,lags_used,n_obs,reject_unit_root_99",
    ))?;
    for ((id, _), result) in users.iter().zip(aligned) {
        let (series, dropped) = match result {
            Ok(Some(s)) => s,
            Ok(None) => {
                skipped.push(Skipped {
                    user_id: (*id).clone(),
                    reason: "no aligned segment of two or more hours".into(),
                });
                continue;
            }
            // a bad station choice affects every user alike
            Err(e @ (drlatent::DataError::AmbiguousStation(_) | drlatent::DataError::UnknownStation(_))) => {
                return Err(e.into())
            }
            Err(e) => {
                skipped.push(Skipped {
                    user_id: (*id).clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let test = adf_test(&series, config.adf_max_lags).ok();
        match &test {
            Some(r) => writeln!(
                adf,
                "{id},{},{},{},{},{}",
                r.test_statistic, r.critical_value_99, r.lags_used, r.n_obs, r.reject_unit_root_99
            )?,
            None => writeln!(adf, "{id},,,,,")?,
        }
        let (file, path) = store::series_path(out, id);
        output::write(&path, store::series_csv(config, &series))?;
        let meta = table.meta(id);
        entries.push(UserEntry {
            user_id: (*id).clone(),
            file,
            start: series.start(),
            end: series.end(),
            hours: series.len(),
            scaling: series.scaling,
            has_automation: meta.has_automation,
            signup: meta.signup,
            dropped_segments: dropped,
            adf: test,
        });
    }
    let mut excl = String::from_utf8(output::csv(config, "user_id,reason,detail"))?;
    for e in &excluded {
        match &e.reason {
            ExclusionReason::Photovoltaic => writeln!(excl, "{},photovoltaic,", e.user_id)?,
            ExclusionReason::CorruptReading { max_kwh, at } => {
                writeln!(excl, "{},corrupt_reading,{at} above {max_kwh} kWh", e.user_id)?
            }
        }
    }
    for s in &skipped {
        writeln!(excl, "{},not_aligned,{}", s.user_id, s.reason.replace(',', ";"))?;
    }
    output::write(&out.join("adf.csv"), adf)?;
    output::write(&out.join("exclusions.csv"), excl)?;
    store::write_manifest(
        config,
        out,
        &Manifest {
            users: entries,
            exclusions: excluded,
        },
    )?;
    Ok(())
}
