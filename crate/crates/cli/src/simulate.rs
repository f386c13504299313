//! `simulate`: raw input files for a synthetic neighbourhood sharing one
//! weather station. Odd-numbered users have automation. After the signup day
//! each daytime hour carries an event with probability `event_fraction`, at
//! which consumption drops by a uniform amount up to `event_kwh` (half that
//! for users without automation).

use std::fmt::Write;

use drlatent::batch::{self, Exec};
use drlatent::rng::{derive_seed, stream, stream_id};
use drlatent::synthetic::{generate_with_temperature, temperature_record};
use rand::Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output;

#[derive(Serialize)]
struct UserSummary {
    user_id: String,
    has_automation: bool,
    events: usize,
    mean_event_kwh: f64,
}

#[derive(Serialize)]
struct Summary {
    users: Vec<UserSummary>,
}

struct Simulated {
    id: String,
    automation: bool,
    kwh: Vec<f64>,
    events: Vec<(usize, f64)>,
}

pub fn run(config: &RunConfig) -> anyhow::Result<()> {
    let sim = &config.simulate;
    let g = &sim.generator;
    let n = g.days * 24;
    let signup = sim.signup_day * 24;
    if signup >= n {
        return Err(crate::UsageError(format!("signup day {} is past the last day", sim.signup_day)).into());
    }
    let temps = temperature_record("station", g, derive_seed(config.seed, &["weather"]));
    let ids: Vec<usize> = (0..sim.users).collect();
    let users = batch::map(Exec::Parallel, &ids, |&u| -> anyhow::Result<Simulated> {
        let id = format!("u{u:03}");
        let h = generate_with_temperature(&id, g, derive_seed(config.seed, &[&id]), &temps)?;
        let automation = u % 2 == 1;
        let cap = if automation { sim.event_kwh } else { 0.5 * sim.event_kwh };
        let mut rng = stream(config.seed, stream_id(&["events", &id]));
        let mut kwh = h.kwh;
        let mut events = Vec::new();
        for (i, y) in kwh.iter_mut().enumerate().skip(signup) {
            let hour = g.start.offset(i as i64).hour_of_day();
            if drlatent::hmm::DUAL_HOURS.contains(&hour) && rng.random::<f64>() < sim.event_fraction {
                let d = rng.random::<f64>() * cap;
                *y = (*y - d).max(0.0);
                events.push((i, d));
            }
        }
        Ok(Simulated {
            id,
            automation,
            kwh,
            events,
        })
    })
    .into_iter()
    .collect::<anyhow::Result<Vec<_>>>()?;

    let out = &config.paths.out;
    let mut meter = String::from_utf8(output::csv(config, "user_id,timestamp,consumption_kwh"))?;
    let mut meta = String::from_utf8(output::csv(config, "user_id,has_pv,has_automation,signup_date"))?;
    let mut events = String::from_utf8(output::csv(config, "user_id,timestamp"))?;
    let mut temperature = String::from_utf8(output::csv(config, "station_id,timestamp,temp_c"))?;
    for (i, t) in temps.iter().enumerate() {
        writeln!(temperature, "S1,{},{t:.2}", g.start.offset(i as i64))?;
    }
    let mut summary = Vec::new();
    for u in &users {
        for (i, y) in u.kwh.iter().enumerate() {
            writeln!(meter, "{},{},{y:.4}", u.id, g.start.offset(i as i64))?;
        }
        writeln!(
            meta,
            "{},false,{},{}",
            u.id,
            u.automation,
            g.start.offset(signup as i64)
        )?;
        for (i, _) in &u.events {
            writeln!(events, "{},{}", u.id, g.start.offset(*i as i64))?;
        }
        let total: f64 = u.events.iter().map(|e| e.1).sum();
        summary.push(UserSummary {
            user_id: u.id.clone(),
            has_automation: u.automation,
            events: u.events.len(),
            mean_event_kwh: if u.events.is_empty() {
                0.0
            } else {
                total / u.events.len() as f64
            },
        });
    }
    output::write(&out.join("meter.csv"), meter)?;
    output::write(&out.join("temperature.csv"), temperature)?;
    output::write(&out.join("metadata.csv"), meta)?;
    output::write(&out.join("events.csv"), events)?;
    output::write(
        &out.join("simulate.json"),
        output::json(config, &Summary { users: summary })?,
    )?;
    Ok(())
}
