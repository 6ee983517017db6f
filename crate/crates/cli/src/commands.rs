use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use throttlab::oracle::{
    check_split_quota_conditions, to_f64, ConditionReport, OracleReport,
};
use throttlab::sim::{read_csv, render_report, run_study_with_workers, write_csv};
use throttlab::{
    build_toy_instance, closed_form_bias_identical, exact_expected_estimate, AuctionRules,
    EnumerationBudget, Error, ExperimentInstance, InstanceDoc, OracleSetup, QuotaConfig,
    QuotaMode, QuotaSpec, RandomizationScheme, Result, StudyConfig, ThrottleKind, ToyInstance,
    WeightingConvention,
};

use crate::args::{OracleArgs, OutputFormat, SimulateArgs, TableFormat, Toy};
use crate::format::{rational, sig12};

pub const WORKERS_ENV: &str = "THROTTLAB_WORKERS";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))
}

pub fn toy(which: &Toy, out: &mut dyn Write) -> Result<()> {
    let (kind, closed) = match which {
        Toy::Identical { k, r0, r1 } => {
            let closed = closed_form_bias_identical(*k as u32, *r0, *r1).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            (ToyInstance::IdenticalBidders { k: *k, r0: *r0, r1: *r1 }, Some(closed))
        }
        Toy::Dominating { b0, b1 } => (ToyInstance::DominatingTreatment { b0: b0.clone(), b1: b1.clone() }, None),
    };
    let instance = build_toy_instance(&kind)?;
    let budget = EnumerationBudget::default();
    let base = OracleSetup::new(RandomizationScheme::PairBernoulli { p: 0.5 });
    let ht = exact_expected_estimate(&instance, &base, &budget)?;
    let unweighted = exact_expected_estimate(&instance, &base.clone().with_convention(WeightingConvention::Unweighted), &budget)?;

    let mut text = String::new();
    let _ = writeln!(text, "instance: K = {}, one query, pair_bernoulli(0.5), first price", instance.n_pairs());
    let _ = writeln!(text, "tau                      {}  ({})", sig12(to_f64(&ht.tau)), rational(&ht.tau));
    for (name, r) in [("unweighted", &unweighted), ("horvitz_thompson", &ht)] {
        let _ = writeln!(
            text,
            "{name:<17} E[est] {}  ({})  bias {}  ({})",
            sig12(to_f64(&r.expected_estimate)),
            rational(&r.expected_estimate),
            sig12(to_f64(&r.bias)),
            rational(&r.bias)
        );
    }
    if let Some(c) = closed {
        let agree = (c - to_f64(&unweighted.bias)).abs() <= 1e-12;
        let _ = writeln!(text, "closed-form bias         {}  (agrees with enumeration: {})", sig12(c), if agree { "yes" } else { "no" });
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Optional experiment description stored next to the instance.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub scheme: Option<RandomizationScheme>,
    #[serde(default)]
    pub quota: Option<QuotaSpec>,
    #[serde(default)]
    pub throttle: Option<ThrottleKind>,
    #[serde(default)]
    pub convention: Option<WeightingConvention>,
    #[serde(default)]
    pub rules: Option<AuctionRules>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleFile {
    #[serde(flatten)]
    pub instance: InstanceDoc,
    #[serde(default)]
    pub experiment: Option<ExperimentSection>,
}

fn resolve_setup(args: &OracleArgs, instance: &ExperimentInstance, section: &ExperimentSection) -> Result<OracleSetup> {
    let scheme = args.scheme.or(section.scheme).unwrap_or(RandomizationScheme::QueryBalanced);
    let mode = args.quota_mode.map(QuotaMode::from).or(section.quota.as_ref().map(|q| q.mode)).unwrap_or(QuotaMode::None);
    let quota = match (args.quota, args.quota_fraction) {
        (Some(total), _) => QuotaConfig::uniform(instance, mode, total)?,
        (None, Some(f)) => QuotaConfig::from_fraction(instance, mode, f)?,
        (None, None) => match &section.quota {
            Some(spec) => QuotaSpec { mode, ..spec.clone() }.resolve(instance)?,
            None if mode == QuotaMode::None => QuotaConfig::none(),
            None => return Err(Error::InvalidConfig(format!("{mode} quota mode needs --quota or --quota-fraction"))),
        },
    };
    let mut rules = section.rules.unwrap_or_default();
    if let Some(m) = args.mechanism {
        rules.mechanism = m.into();
    }
    Ok(OracleSetup::new(scheme)
        .with_quota(quota)
        .with_kind(args.throttle.map(Into::into).or(section.throttle).unwrap_or_default())
        .with_rules(rules)
        .with_convention(args.convention.map(Into::into).or(section.convention).unwrap_or_default()))
}

fn report_json(setup: &OracleSetup, r: &OracleReport, conditions: Option<&ConditionReport>) -> serde_json::Value {
    let money = |x| json!({ "value": sig12(to_f64(x)), "exact": rational(x) });
    let mut v = json!({
        "scheme": setup.scheme.label(),
        "quota_mode": setup.quota.mode.to_string(),
        "throttle": setup.kind,
        "convention": setup.convention.to_string(),
        "mechanism": setup.rules.mechanism,
        "n_assignments": r.n_assignments.to_string(),
        "n_states": r.n_states.to_string(),
        "expected_estimate": money(&r.expected_estimate),
        "tau": money(&r.tau),
        "tau_star": money(&r.tau_star),
        "bias": money(&r.bias),
        "gap": money(&r.bias_vs_tau_star),
    });
    if let Some(c) = conditions {
        v["conditions"] = json!({
            "interpretation": c.interpretation,
            "bid_zero_when_x0": c.bid_zero_when_x0,
            "offending_pairs": c.offending_pairs,
            "control_proportionality": c.control_proportionality,
            "treated_proportionality": c.treated_proportionality,
            "assignments_checked": c.n_assignments_checked.to_string(),
            "all_hold": c.all_hold(),
        });
    }
    v
}

pub fn oracle(args: &OracleArgs, out: &mut dyn Write) -> Result<()> {
    let text = read(&args.instance)?;
    let file: OracleFile =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", args.instance.display())))?;
    let instance = ExperimentInstance::try_from(file.instance)?;
    let setup = resolve_setup(args, &instance, &file.experiment.unwrap_or_default())?;
    let defaults = EnumerationBudget::default();
    let budget = EnumerationBudget {
        max_assignments: args.max_assignments.unwrap_or(defaults.max_assignments),
        max_masks_per_assignment: args.max_masks.unwrap_or(defaults.max_masks_per_assignment),
    };
    let report = exact_expected_estimate(&instance, &setup, &budget)?;
    let conditions = (setup.quota.mode == QuotaMode::Split && setup.scheme.is_query_level())
        .then(|| check_split_quota_conditions(&instance, &setup.quota, &setup.scheme, &budget))
        .transpose()?;

    match args.format {
        OutputFormat::Json => {
            let v = report_json(&setup, &report, conditions.as_ref());
            writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
        }
        OutputFormat::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "scheme {} | quota {} | throttle {:?} | {} | {:?}",
                setup.scheme,
                setup.quota.mode,
                setup.kind,
                setup.convention,
                setup.rules.mechanism
            );
            let _ = writeln!(s, "assignments {} | states {}", report.n_assignments, report.n_states);
            for (name, x) in [
                ("E[estimate]", &report.expected_estimate),
                ("tau", &report.tau),
                ("tau_star", &report.tau_star),
                ("bias vs tau", &report.bias),
                ("gap vs tau_star", &report.bias_vs_tau_star),
            ] {
                let _ = writeln!(s, "{name:<16} {:>20}  ({})", sig12(to_f64(x)), rational(x));
            }
            if let Some(c) = &conditions {
                let _ = writeln!(s, "split-quota conditions ({}; {} assignments):", c.interpretation, c.n_assignments_checked);
                let _ = writeln!(s, "  bid zero when x = 0      {}", c.bid_zero_when_x0);
                let _ = writeln!(s, "  control proportionality  {}", c.control_proportionality);
                let _ = writeln!(s, "  treated proportionality  {}", c.treated_proportionality);
                if !c.offending_pairs.is_empty() {
                    let _ = writeln!(s, "  offending pairs          {:?}", c.offending_pairs);
                }
                if let Some(ce) = &c.first_counterexample {
                    let _ = writeln!(s, "  first counterexample     {:?} for advertiser {} at {:?}", ce.condition, ce.advertiser, ce.query_z);
                }
            }
            out.write_all(s.as_bytes())?;
        }
    }
    Ok(())
}

fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidConfig(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

pub fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = StudyConfig::from_json(&read(&args.config)?)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    let rows = run_study_with_workers(&config, workers_from_env()?)?;
    let mut buf = Vec::new();
    match args.format {
        TableFormat::Csv => write_csv(&rows, &mut buf)?,
        TableFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, &rows).expect("rows serialize");
            buf.push(b'\n');
        }
    }
    match &args.out {
        Some(path) => fs::write(path, &buf)?,
        None => out.write_all(&buf)?,
    }
    Ok(())
}

pub fn report(csv: &Path, out: &mut dyn Write) -> Result<()> {
    let file = fs::File::open(csv).map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", csv.display())))?;
    let rows = read_csv(io::BufReader::new(file))?;
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("{} has no rows", csv.display())));
    }
    out.write_all(render_report(&rows).as_bytes())?;
    Ok(())
}
