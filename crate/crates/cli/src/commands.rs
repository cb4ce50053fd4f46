use std::time::{Duration, Instant};

use gpchan::exponent::{esp_curve, esp_exponent, ExponentOptions, ExponentQuery, ExponentResult};
use gpchan::gp::{gp_capacity, gp_rate, receiver_csi_capacity, GpOptions};
use gpchan::sim::{
    best_code_search, exact_error, mc_error, messages_for_rate, strong_converse_probe, Code, ErrorReport, Method, ProbeOptions,
    SearchMode, SearchOptions,
};
use gpchan::Workers;
use serde_json::{json, Value};

use crate::output::{ext, joined, matrix, num, nums, text, Report, Table, Units};
use crate::spec::ChannelSpec;
use crate::{BestcodeArgs, CapacityArgs, CliError, CurveArgs, ExponentArgs, GridArgs, ProbeArgs, SimulateArgs};

/// Settings shared by every command.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub units: Units,
    pub seed: u64,
    pub workers: Workers,
    pub deadline: Option<Instant>,
}

impl RunConfig {
    pub fn new(units: Units, seed: u64, workers: usize, budget_seconds: Option<f64>) -> Result<Self, CliError> {
        let deadline = match budget_seconds {
            None => None,
            Some(b) if b > 0.0 && b.is_finite() => Some(Instant::now() + Duration::from_secs_f64(b)),
            Some(b) => return Err(CliError::Input(format!("--budget-seconds must be positive, got {b}"))),
        };
        Ok(RunConfig {
            units,
            seed,
            workers: Workers(workers),
            deadline,
        })
    }

    fn gp_options(&self) -> GpOptions {
        GpOptions {
            seed: self.seed,
            workers: self.workers,
            deadline: self.deadline,
            ..GpOptions::default()
        }
    }

    fn exponent_options(&self, grid: &GridArgs) -> ExponentOptions {
        ExponentOptions {
            s_step: grid.s_step,
            x_step: grid.x_step,
            v_step: grid.v_step,
            refine_rounds: grid.refine_rounds,
            descent_levels: grid.descent_levels,
            workers: self.workers,
            deadline: self.deadline,
            ..ExponentOptions::default()
        }
    }

    fn search_options(&self, exhaustive_decoder: bool, max_codes: u128) -> SearchOptions {
        SearchOptions {
            exhaustive_decoder,
            max_codes,
            workers: self.workers,
            deadline: self.deadline,
        }
    }
}

/// Parses a rate in nats. `0.4*ln2` and `0.4bits` are accepted as well.
pub fn parse_rate(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (body, scale) = if let Some(b) = t.strip_suffix("*ln2") {
        (b, std::f64::consts::LN_2)
    } else if let Some(b) = t.strip_suffix("bits") {
        (b, std::f64::consts::LN_2)
    } else {
        (t, 1.0)
    };
    let v: f64 = body.trim().parse().map_err(|_| format!("`{s}` is not a rate"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v * scale)
}

pub fn capacity(spec: &ChannelSpec, cfg: &RunConfig, args: &CapacityArgs) -> Result<Report, CliError> {
    if args.u_cap == Some(0) {
        return Err(CliError::Input("--u-cap must be at least 1".into()));
    }
    let problem = spec.problem();
    let opts = GpOptions {
        u_size_cap: args.u_cap,
        restarts: args.restarts,
        ..cfg.gp_options()
    };
    let res = gp_capacity(&problem, &opts)?;
    let witness_rate = gp_rate(&problem, &res.policy)?;
    let rcsi = receiver_csi_capacity(&problem);
    let u = cfg.units;
    let mut flags = Vec::new();
    if res.flags.budget {
        flags.push("budget");
    }
    if res.flags.cap_relaxed {
        flags.push("cap_relaxed");
    }
    let json = json!({
        "command": "capacity",
        "spec": spec.label(),
        "units": u.name(),
        "gp_capacity": num(u.from_nats(res.rate)),
        "gap": num(u.from_nats(res.gap)),
        "receiver_csi_capacity": num(u.from_nats(rcsi)),
        "witness": {
            "rate": num(u.from_nats(witness_rate)),
            "h": res.policy.h_table(),
            "p_u_given_s": matrix(&res.policy.p_u_given_s().to_rows()),
        },
        "flags": flags,
    });
    Ok(Report {
        json,
        table: None,
        budget: res.flags.budget,
    })
}

const EXPONENT_HEADER: [&str; 7] = [
    "R_nats",
    "Esp_nats",
    "witness_Ps",
    "witness_PxgS",
    "witness_V",
    "feasibility_margin",
    "flags",
];

fn exponent_report(command: &str, spec: &ChannelSpec, results: &[ExponentResult]) -> Report {
    let mut rows_json = Vec::new();
    let mut rows = Vec::new();
    let mut budget = false;
    for r in results {
        budget |= r.flags.budget;
        let ps = r.p_s.as_ref().map(|p| p.probs().to_vec());
        let pxs = r.p_x_given_s.as_ref().map(|c| c.to_rows());
        let v = r.v.as_ref().map(|c| c.to_nested());
        rows_json.push(json!({
            "R_nats": num(r.rate),
            "Esp_nats": ext(r.value),
            "witness_Ps": ps.as_ref().map_or(Value::Null, |p| nums(p)),
            "witness_PxgS": pxs.as_ref().map_or(Value::Null, |c| matrix(c)),
            "witness_V": v.as_ref().map_or(Value::Null, |v| Value::Array(v.iter().map(|b| matrix(b)).collect())),
            "feasibility_margin": r.feasibility_margin.map_or(Value::Null, num),
            "flags": r.flags.names(),
        }));
        rows.push(vec![
            text(r.rate),
            text(r.value.to_f64()),
            ps.map_or(String::new(), joined),
            pxs.map_or(String::new(), |c| joined(c.concat())),
            v.map_or(String::new(), |v| joined(v.concat().concat())),
            r.feasibility_margin.map_or(String::new(), text),
            r.flags.names().join(";"),
        ]);
    }
    Report {
        json: json!({"command": command, "spec": spec.label(), "rows": rows_json}),
        table: Some(Table {
            header: EXPONENT_HEADER.to_vec(),
            rows,
        }),
        budget,
    }
}

pub fn exponent(spec: &ChannelSpec, cfg: &RunConfig, args: &ExponentArgs) -> Result<Report, CliError> {
    let problem = spec.problem();
    let opts = cfg.exponent_options(&args.grid);
    let mut results = Vec::with_capacity(args.rate.len());
    for &r in &args.rate {
        results.push(esp_exponent(&ExponentQuery::new(problem.clone(), r, opts.clone())?)?);
    }
    Ok(exponent_report("exponent", spec, &results))
}

pub fn curve_rates(args: &CurveArgs) -> Result<Vec<f64>, CliError> {
    if !args.rates.is_empty() {
        return Ok(args.rates.clone());
    }
    match (args.from, args.to) {
        (Some(a), Some(b)) => {
            if args.points < 2 || !(a < b) {
                return Err(CliError::Input("a curve needs --from < --to and --points ≥ 2".into()));
            }
            let k = args.points - 1;
            Ok((0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect())
        }
        _ => Err(CliError::Input("give either --rates or both --from and --to".into())),
    }
}

pub fn curve(spec: &ChannelSpec, cfg: &RunConfig, args: &CurveArgs) -> Result<Report, CliError> {
    let rates = curve_rates(args)?;
    let c = esp_curve(&spec.problem(), &rates, &cfg.exponent_options(&args.grid))?;
    let results: Vec<ExponentResult> = c.samples.into_iter().map(|(_, r)| r).collect();
    Ok(exponent_report("curve", spec, &results))
}

fn error_report_json(r: &ErrorReport) -> Value {
    let method = match r.method {
        Method::Exact => json!({"kind": "exact"}),
        Method::MonteCarlo { samples, seed } => json!({"kind": "monte-carlo", "samples": samples, "seed": seed}),
    };
    json!({
        "per_message": nums(&r.per_message),
        "max_error": num(r.max_error),
        "average_error": num(r.average_error),
        "method": method,
        "half_widths": r.half_widths.as_ref().map_or(Value::Null, |h| nums(h)),
    })
}

pub fn simulate(spec: &ChannelSpec, cfg: &RunConfig, args: &SimulateArgs) -> Result<Report, CliError> {
    let raw = std::fs::read_to_string(&args.code)
        .map_err(|e| CliError::Input(format!("cannot read code file {}: {e}", args.code.display())))?;
    let code = Code::from_json(&raw).map_err(|e| CliError::Input(format!("{}: {e}", args.code.display())))?;
    let problem = spec.problem();
    let a = code.alphabets();
    if (a.s, a.x, a.y) != (problem.n_states(), problem.n_inputs(), problem.n_outputs()) {
        return Err(CliError::Input(format!(
            "code alphabets ({}, {}, {}) do not match the spec ({}, {}, {})",
            a.s,
            a.x,
            a.y,
            problem.n_states(),
            problem.n_inputs(),
            problem.n_outputs()
        )));
    }
    let report = match args.method {
        crate::SimMethod::Exact => exact_error(&code, &problem)?,
        crate::SimMethod::Mc => mc_error(&code, &problem, args.samples, cfg.seed, cfg.workers)?,
    };
    Ok(Report {
        json: json!({
            "command": "simulate",
            "spec": spec.label(),
            "messages": code.messages(),
            "n": code.blocklength(),
            "report": error_report_json(&report),
        }),
        table: None,
        budget: false,
    })
}

pub fn bestcode(spec: &ChannelSpec, cfg: &RunConfig, args: &BestcodeArgs) -> Result<Report, CliError> {
    let m = match (args.messages, args.rate) {
        (Some(m), None) => m,
        (None, Some(r)) if r > 0.0 => messages_for_rate(args.n, r),
        (None, Some(r)) => return Err(CliError::Input(format!("rate must be positive, got {r}"))),
        _ => return Err(CliError::Input("give exactly one of --messages and --rate".into())),
    };
    let mode = match args.random {
        Some(k) => SearchMode::Random { k, seed: cfg.seed },
        None => SearchMode::Exhaustive,
    };
    let found = best_code_search(&spec.problem(), m, args.n, mode, &cfg.search_options(args.exhaustive_decoder, args.max_codes))?;
    let code: Value = serde_json::from_str(&found.code.to_json()).expect("code json reparses");
    Ok(Report {
        json: json!({
            "command": "bestcode",
            "spec": spec.label(),
            "messages": m,
            "n": args.n,
            "search": if args.random.is_some() { "random" } else { "exhaustive" },
            "encoders_visited": found.encoders_visited,
            "budget": found.budget,
            "report": error_report_json(&found.report),
            "code": code,
        }),
        table: None,
        budget: found.budget,
    })
}

pub fn probe(spec: &ChannelSpec, cfg: &RunConfig, args: &ProbeArgs) -> Result<Report, CliError> {
    let opts = ProbeOptions {
        random_k: args.random_k,
        seed: cfg.seed,
        search: cfg.search_options(args.exhaustive_decoder, args.max_codes),
    };
    let rows = strong_converse_probe(&spec.problem(), args.rate, &args.n, &opts)?;
    let budget = rows.iter().any(|r| r.budget);
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "n": r.n,
                "messages": r.messages,
                "exhaustive": r.exhaustive,
                "max_error": num(r.max_error),
                "average_error": num(r.average_error),
                "budget": r.budget,
            })
        })
        .collect();
    let table_rows = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.messages.to_string(),
                r.exhaustive.to_string(),
                text(r.max_error),
                text(r.average_error),
                r.budget.to_string(),
            ]
        })
        .collect();
    Ok(Report {
        json: json!({
            "command": "probe",
            "spec": spec.label(),
            "R_nats": num(args.rate),
            "rows": json_rows,
        }),
        table: Some(Table {
            header: vec!["n", "messages", "exhaustive", "max_error", "average_error", "budget"],
            rows: table_rows,
        }),
        budget,
    })
}
