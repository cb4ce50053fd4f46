//! Desk-scale invariant and oracle checks over the bundled fixtures, or over
//! one user-supplied spec.

use std::f64::consts::LN_2;

use gpchan::exponent::{esp_curve, esp_exponent, ExponentOptions, ExponentQuery};
use gpchan::gp::{gp_capacity, gp_rate, receiver_csi_capacity};
use gpchan::sim::{best_code_search, exact_error, mc_error, Code, SearchMode, SearchOptions};
use gpchan::types::{typical_count, TypicalSet};
use gpchan::Pmf;
use serde_json::{json, Value};

use crate::commands::RunConfig;
use crate::fixtures::{self, channel};
use crate::output::{num, Report};
use crate::spec::ChannelSpec;
use crate::CliError;

/// Slack above the computed capacity past which the exponent must vanish.
pub const GRID_SLACK: f64 = 1e-3;

pub struct Check {
    pub name: String,
    /// `None` for exact checks, which the tolerance scale leaves alone.
    pub tolerance: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

struct Suite<'a> {
    cfg: &'a RunConfig,
    scale: f64,
    checks: Vec<Check>,
}

impl Suite<'_> {
    /// `|got − want| ≤ tol · scale`.
    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        let tol = tol * self.scale;
        let dev = (got - want).abs();
        self.checks.push(Check {
            name: name.to_string(),
            tolerance: Some(tol),
            passed: dev <= tol,
            detail: format!("got {got:.11e}, expected {want:.11e}, deviation {dev:.3e}"),
        });
    }

    /// `got ≤ bound + tol · scale`.
    fn at_most(&mut self, name: &str, got: f64, bound: f64, tol: f64) {
        let tol = tol * self.scale;
        self.checks.push(Check {
            name: name.to_string(),
            tolerance: Some(tol),
            passed: got <= bound + tol,
            detail: format!("got {got:.11e}, allowed up to {:.11e}", bound + tol),
        });
    }

    fn exact(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            tolerance: None,
            passed,
            detail,
        });
    }

    fn gp(&self) -> gpchan::gp::GpOptions {
        gpchan::gp::GpOptions {
            seed: self.cfg.seed,
            workers: self.cfg.workers,
            deadline: self.cfg.deadline,
            ..Default::default()
        }
    }

    fn exponent_opts(&self, coarse: bool) -> ExponentOptions {
        let base = ExponentOptions {
            workers: self.cfg.workers,
            deadline: self.cfg.deadline,
            ..ExponentOptions::default()
        };
        if coarse {
            ExponentOptions {
                s_step: 0.1,
                x_step: 0.1,
                v_step: 0.2,
                ..base
            }
        } else {
            base
        }
    }

    /// Nonincreasing curve that vanishes past the computed capacity.
    fn curve_shape(&mut self, label: &str, spec: &ChannelSpec) -> Result<(), CliError> {
        let problem = spec.problem();
        let cap = gp_capacity(&problem, &self.gp())?.rate;
        let rates: Vec<f64> = if cap > 0.05 {
            vec![0.3 * cap, 0.7 * cap, cap + GRID_SLACK, cap + 0.1]
        } else {
            vec![cap + GRID_SLACK, cap + 0.05, cap + 0.1]
        };
        let curve = esp_curve(&problem, &rates, &self.exponent_opts(true))?;
        let values: Vec<f64> = curve.samples.iter().map(|(_, r)| r.value.to_f64()).collect();
        let worst_rise = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        self.at_most(&format!("{label}: exponent curve nonincreasing"), worst_rise, 0.0, 1e-6);
        let above: Vec<f64> = curve
            .samples
            .iter()
            .filter(|(r, _)| *r >= cap + GRID_SLACK)
            .map(|(_, v)| v.value.to_f64())
            .collect();
        let worst = above.iter().cloned().fold(0.0, f64::max);
        self.at_most(&format!("{label}: exponent zero above capacity"), worst, 0.0, 1e-9);
        Ok(())
    }
}

fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }
}

fn d2(a: f64, b: f64) -> f64 {
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    term(a, b) + term(1.0 - a, 1.0 - b)
}

/// Classical sphere-packing exponent of BSC(p): `D(δ‖p)` with `h(δ) = ln 2 − R`.
pub fn bsc_sphere_packing(p: f64, r: f64) -> f64 {
    if r >= LN_2 - h2(p) {
        return 0.0;
    }
    let (mut lo, mut hi) = (p, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h2(mid) < LN_2 - r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    d2(0.5 * (lo + hi), p)
}

fn fixture_checks(s: &mut Suite) -> Result<(), CliError> {
    let mut roundtrip = Vec::new();
    for (name, text) in fixtures::CHANNELS {
        let spec = channel(text);
        if ChannelSpec::parse(&spec.to_json()).ok().as_ref() != Some(&spec) {
            roundtrip.push(name);
        }
    }
    s.exact("fixtures round-trip", roundtrip.is_empty(), format!("failed: {roundtrip:?}"));

    for (p, text) in [(0.05, fixtures::BSC_0_05), (0.11, fixtures::BSC_0_11), (0.25, fixtures::BSC_0_25)] {
        let cap = gp_capacity(&channel(text).problem(), &s.gp())?.rate;
        s.close(&format!("bsc {p}: capacity closed form"), cap, LN_2 - h2(p), 1e-3);
    }

    for (p, text) in [(0.2, fixtures::STUCK_AT_0_2), (0.3, fixtures::STUCK_AT_0_3)] {
        let problem = channel(text).problem();
        let res = gp_capacity(&problem, &s.gp())?;
        let target = (1.0 - p) * LN_2;
        s.close(&format!("stuck-at {p}: capacity"), res.rate, target, 5e-3);
        let witness = gp_rate(&problem, &res.policy)?;
        s.at_most(&format!("stuck-at {p}: witness achieves capacity"), target - witness, 0.0, 5e-3);
    }

    let zero = channel(fixtures::ZERO_CAPACITY).problem();
    let cap = gp_capacity(&zero, &s.gp())?.rate;
    s.close("zero-capacity: capacity", cap, 0.0, 1e-9);

    let oracle = fixtures::random_222_oracle();
    let random = channel(fixtures::RANDOM_222).problem();
    let cap = gp_capacity(&random, &s.gp())?.rate;
    let rcsi = receiver_csi_capacity(&random);
    s.close("random-222: capacity oracle", cap, oracle.gp_capacity_nats, 1e-6);
    s.close("random-222: receiver-CSI oracle", rcsi, oracle.receiver_csi_capacity_nats, 1e-6);
    s.at_most("random-222: CSI ordering", cap, rcsi, 1e-6);

    let bsc = channel(fixtures::BSC_0_1).problem();
    let r = 0.4 * LN_2;
    let value = esp_exponent(&ExponentQuery::new(bsc, r, s.exponent_opts(false))?)?.value.to_f64();
    s.close("bsc 0.1: sphere-packing closed form at 0.4 ln 2", value, bsc_sphere_packing(0.1, r), 2e-2);

    s.curve_shape("bsc 0.2", &channel(fixtures::BSC_0_2))?;
    s.curve_shape("stuck-at 0.3", &channel(fixtures::STUCK_AT_0_3))?;
    s.curve_shape("zero-capacity", &channel(fixtures::ZERO_CAPACITY))?;

    let code = Code::from_json(fixtures::REPETITION_N3).expect("bundled code parses");
    let bsc = channel(fixtures::BSC_0_1).problem();
    let exact = exact_error(&code, &bsc)?;
    s.close("repetition code: exact error", exact.max_error, 0.028, 1e-12);
    let mc = mc_error(&code, &bsc, 100_000, s.cfg.seed, s.cfg.workers)?;
    let half = mc.half_widths.as_ref().map_or(0.0, |h| h.iter().cloned().fold(0.0, f64::max));
    s.at_most("repetition code: monte-carlo within 3 sigma", (mc.max_error - exact.max_error).abs(), 0.0, half);

    let ts = TypicalSet::new(Pmf::uniform(2), 10, 0.1)?;
    let count = typical_count(&ts)?;
    s.exact("typical count for P = (1/2, 1/2), n = 10, δ = 0.1", count == 672, format!("got {count}"));

    let opts = SearchOptions {
        workers: s.cfg.workers,
        deadline: s.cfg.deadline,
        ..SearchOptions::default()
    };
    let best = best_code_search(&zero, 2, 1, SearchMode::Exhaustive, &opts)?;
    s.exact(
        "zero-capacity: best code error at n = 1",
        best.report.max_error >= 0.5 - 1e-12,
        format!("got {}", best.report.max_error),
    );
    Ok(())
}

fn spec_checks(s: &mut Suite, spec: &ChannelSpec) -> Result<(), CliError> {
    let label = spec.label().to_string();
    let again = ChannelSpec::parse(&spec.to_json()).ok();
    s.exact(&format!("{label}: spec round-trip"), again.as_ref() == Some(spec), String::new());
    let problem = spec.problem();
    let res = gp_capacity(&problem, &s.gp())?;
    let rcsi = receiver_csi_capacity(&problem);
    s.at_most(&format!("{label}: CSI ordering"), res.rate, rcsi, 1e-6);
    let witness = gp_rate(&problem, &res.policy)?;
    s.close(&format!("{label}: witness re-evaluates"), witness, res.rate, 1e-9);
    s.curve_shape(&label, spec)?;
    Ok(())
}

/// Runs the suite. The flag is true when every check passed.
pub fn run(cfg: &RunConfig, spec: Option<&ChannelSpec>, scale: f64) -> Result<(Report, bool), CliError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CliError::Input(format!("--tolerance-scale must be positive, got {scale}")));
    }
    let mut s = Suite {
        cfg,
        scale,
        checks: Vec::new(),
    };
    match spec {
        Some(spec) => spec_checks(&mut s, spec)?,
        None => fixture_checks(&mut s)?,
    }
    let failed: Vec<&Check> = s.checks.iter().filter(|c| !c.passed).collect();
    let ok = failed.is_empty();
    let checks: Vec<Value> = s
        .checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "passed": c.passed,
                "tolerance": c.tolerance.map_or(Value::Null, num),
                "detail": c.detail,
            })
        })
        .collect();
    let failures: Vec<String> = failed
        .iter()
        .map(|c| match c.tolerance {
            Some(t) => format!("{} (tolerance {t:e})", c.name),
            None => c.name.clone(),
        })
        .collect();
    let json = json!({
        "command": "selftest",
        "passed": ok,
        "tolerance_scale": num(scale),
        "checks": checks,
        "failures": failures,
    });
    Ok((
        Report {
            json,
            table: None,
            budget: false,
        },
        ok,
    ))
}
