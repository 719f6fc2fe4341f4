//! `ehmi`: calibrate the left-turn game, score it, plan EHMI disclosures and
//! run the trajectory simulations.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ehmi_core::calibration::{self, FitOptions, LabeledEncounter};
use ehmi_core::data_io::{self, ExtractConfig, ParseOptions, ENCOUNTER_HEADER};
use ehmi_core::disclosure::{self, BeliefModel, CensusReport};
use ehmi_core::simulation::{self, GridSpec, ScenarioConfig, SweepInputs};
use ehmi_core::{round3, Defaults, DeltaRule, Encounter, GameForm, Outcome, PayoffParams, Player};

#[derive(Parser)]
#[command(name = "ehmi", version, about = "EHMI disclosure planning for an unprotected left turn")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit payoff coefficients by maximum likelihood.
    Calibrate(RunArgs),
    /// Score a parameter file under every game form.
    Validate(RunArgs),
    /// Plan a display for every encounter and summarise the payoff changes.
    Decide(RunArgs),
    /// Sweep initial speeds and accelerations over a grid.
    Sweep(RunArgs),
    /// Simulate one scenario with and without deception.
    Simulate(RunArgs),
    /// Validation and disclosure summaries in one text report.
    Report(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Trajectory CSV or encounter CSV (detected from the header).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Payoff parameter file; the shipped calibration when omitted.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value = "b-first")]
    form: GameForm,
    /// Override the o11/o22 selection probability.
    #[arg(long)]
    delta: Option<f64>,
    /// Believed AV accelerations as `rush,yield`.
    #[arg(long)]
    beliefs: Option<String>,
    /// Sweep grid (JSON).
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Alternative defaults file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Input encounters, with labels where known, and rows that failed.
struct Dataset {
    rows: Vec<(Encounter, Option<Outcome>)>,
    rejected: Vec<(String, String)>,
}

impl Dataset {
    fn labeled(&self) -> Result<Vec<LabeledEncounter>> {
        self.rows
            .iter()
            .map(|(e, o)| match o {
                Some(o) => Ok(LabeledEncounter::new(e.clone(), *o)),
                None => bail!("encounter {} has no intention label", e.id),
            })
            .collect()
    }

    fn encounters(&self) -> Vec<Encounter> {
        self.rows.iter().map(|(e, _)| e.clone()).collect()
    }
}

fn load_dataset(path: &Path, d: &Defaults) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<&str> = text.lines().next().unwrap_or("").split(',').map(str::trim).collect();
    if header == ENCOUNTER_HEADER {
        let rows = data_io::read_encounters(text.as_bytes()).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(Dataset { rows, rejected: Vec::new() });
    }
    let trajs = data_io::parse_trajectories(text.as_bytes(), &ParseOptions::default())
        .with_context(|| format!("parsing {}", path.display()))?;
    let (labeled, failed) = calibration::label_trajectories(&trajs, &ExtractConfig::from_defaults(d), &d.labeling);
    Ok(Dataset {
        rows: labeled.into_iter().map(|l| (l.encounter, Some(l.observed))).collect(),
        rejected: failed.into_iter().map(|(id, e)| (id, e.to_string())).collect(),
    })
}

struct RunContext {
    args: RunArgs,
    defaults: Defaults,
}

impl RunContext {
    fn new(args: RunArgs) -> Result<Self> {
        let defaults = match &args.config {
            Some(p) => Defaults::load(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?,
            None => Defaults::default(),
        };
        Ok(Self { args, defaults })
    }

    fn data(&self) -> Result<Dataset> {
        let path = self.args.data.as_deref().context("--data is required")?;
        let ds = load_dataset(path, &self.defaults)?;
        if ds.rows.is_empty() {
            bail!("no usable encounters in {}", path.display());
        }
        Ok(ds)
    }

    fn params(&self) -> Result<PayoffParams> {
        match &self.args.params {
            Some(p) => PayoffParams::load(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(PayoffParams::calibrated()),
        }
    }

    /// Explicit `--delta`, else the labeled share of o11 among o11/o22,
    /// else the configured fallback.
    fn delta(&self, labeled: Option<&[LabeledEncounter]>) -> Result<DeltaRule> {
        if let Some(v) = self.args.delta {
            return DeltaRule::new(v).map_err(anyhow::Error::msg);
        }
        let dual = labeled
            .map(|l| l.iter().filter(|x| matches!(x.observed, Outcome::O11 | Outcome::O22)).count())
            .unwrap_or(0);
        match labeled {
            Some(l) if dual > 0 => Ok(calibration::estimate_delta(l)),
            _ => DeltaRule::new(self.defaults.delta_fallback).map_err(anyhow::Error::msg),
        }
    }

    fn beliefs(&self) -> Result<BeliefModel> {
        let Some(spec) = &self.args.beliefs else {
            return Ok(self.defaults.beliefs.into());
        };
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        let [rush, yield_] = parts.as_slice() else {
            bail!("--beliefs expects `rush,yield`, got {spec:?}");
        };
        let num = |s: &str| s.parse::<f64>().with_context(|| format!("bad belief value {s:?}"));
        BeliefModel::new(num(rush)?, num(yield_)?).map_err(anyhow::Error::msg)
    }

    fn out_dir(&self) -> Result<Option<&Path>> {
        if let Some(dir) = &self.args.out {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(self.args.out.as_deref())
    }
}

/// Round every float in a JSON tree to three decimals.
fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => n.as_f64().map_or(Value::Null, |x| json!(round3(x))),
        Value::Array(a) => Value::Array(a.into_iter().map(rounded).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

fn write_json(dir: Option<&Path>, name: &str, value: Value) -> Result<()> {
    if let Some(dir) = dir {
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(&rounded(value))? + "\n";
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<fs::File> {
    let path = dir.join(name);
    fs::File::create(&path).with_context(|| format!("creating {}", path.display()))
}

fn rejected_json(rejected: &[(String, String)]) -> Value {
    rejected.iter().map(|(id, why)| json!({"id": id, "error": why})).collect()
}

/// Report every rejected row on stderr; true if there were any.
fn report_rejected(rejected: &[(String, String)]) -> bool {
    for (id, why) in rejected {
        eprintln!("error: {id}: {why}");
    }
    !rejected.is_empty()
}

fn evaluation_table(evals: &[calibration::FormEvaluation]) -> String {
    let mut s = String::from("form      n      rmse   accuracy  mean_p\n");
    for e in evals {
        s += &format!(
            "{:<8} {:>5}  {:.3}  {:.3}     {:.3}\n",
            e.form.as_str(),
            e.n,
            e.rmse,
            e.accuracy,
            e.mean_winning_prob
        );
    }
    s
}

fn calibrate(ctx: &RunContext) -> Result<bool> {
    let ds = ctx.data()?;
    let labeled = ds.labeled()?;
    let delta = ctx.delta(Some(&labeled))?;
    let opts = FitOptions {
        seed: ctx.args.seed,
        delta,
        kinematics: ctx.defaults.kinematics,
        ..FitOptions::default()
    };
    let result = calibration::fit_mle(&labeled, ctx.args.form, &ctx.params()?, &opts)?;
    println!(
        "calibrated {} on {} encounters: log-likelihood {:.3}, delta {:.3}, converged {}",
        result.form,
        labeled.len(),
        result.log_likelihood,
        result.delta,
        result.converged
    );
    println!("form      rmse   accuracy");
    for f in GameForm::ALL {
        println!("{:<8}  {:.3}  {:.3}", f.as_str(), result.rmse_per_form[&f], result.accuracy_per_form[&f]);
    }
    let out = ctx.out_dir()?;
    if let Some(dir) = out {
        fs::write(dir.join("params.txt"), result.params.to_text())?;
    }
    write_json(
        out,
        "calibration.json",
        json!({
            "result": serde_json::to_value(&result)?,
            "rejected": rejected_json(&ds.rejected),
        }),
    )?;
    Ok(report_rejected(&ds.rejected))
}

fn validate(ctx: &RunContext) -> Result<bool> {
    let ds = ctx.data()?;
    let labeled = ds.labeled()?;
    let params = ctx.params()?;
    let delta = ctx.delta(Some(&labeled))?;
    let evals = GameForm::ALL
        .iter()
        .map(|&f| calibration::evaluate(&labeled, &params, f, delta, &ctx.defaults.kinematics))
        .collect::<Result<Vec<_>, _>>()?;
    print!("{}", evaluation_table(&evals));
    write_json(
        ctx.out_dir()?,
        "validation.json",
        json!({
            "delta": delta.value(),
            "forms": serde_json::to_value(&evals)?,
            "rejected": rejected_json(&ds.rejected),
        }),
    )?;
    Ok(report_rejected(&ds.rejected))
}

fn census_lines(r: &CensusReport) -> String {
    let s = &r.summary;
    let pct = |n: usize| if s.encounters == 0 { 0.0 } else { 100.0 * n as f64 / s.encounters as f64 };
    let mut out = format!(
        "encounters {}; disclosure raises total payoff in {} ({:.3}%)\n",
        s.encounters,
        s.improved,
        pct(s.improved)
    );
    out += &format!(
        "mean total payoff: baseline {:.3}, with display {:.3}, improvement {:.3}\n",
        s.mean_baseline_total, s.mean_ehmi_total, s.mean_improvement
    );
    for (name, c) in [("A up, B down", &s.a_up_b_down), ("A down, B up", &s.a_down_b_up), ("both up", &s.both_up)] {
        out += &format!(
            "  {name:<13} {:>4}  mean dA {:.3}  mean dB {:.3}\n",
            c.count, c.mean_delta_a, c.mean_delta_b
        );
    }
    out += &format!(
        "successful deceptions {} ({:.3}%): expected o21 {}, expected o12 {}\n",
        s.deceptions,
        pct(s.deceptions),
        s.deceptions_expected_o21,
        s.deceptions_expected_o12
    );
    out += &format!(
        "truthful disclosures {}; no effective signal {}\n",
        s.truthful_disclosures, s.no_effective_signal
    );
    out
}

fn run_census(ctx: &RunContext, ds: &Dataset) -> Result<(CensusReport, DeltaRule)> {
    let labeled: Vec<LabeledEncounter> = ds
        .rows
        .iter()
        .filter_map(|(e, o)| o.map(|o| LabeledEncounter::new(e.clone(), o)))
        .collect();
    let delta = ctx.delta((labeled.len() == ds.rows.len()).then_some(labeled.as_slice()))?;
    let report = disclosure::ehmi_gain_census(
        &ds.encounters(),
        &ctx.params()?,
        &ctx.beliefs()?,
        delta,
        &ctx.defaults.kinematics,
    );
    Ok((report, delta))
}

fn decide(ctx: &RunContext) -> Result<bool> {
    let ds = ctx.data()?;
    let (report, delta) = run_census(ctx, &ds)?;
    print!("{}", census_lines(&report));
    let out = ctx.out_dir()?;
    if let Some(dir) = out {
        disclosure::write_census_csv(create(dir, "plans.csv")?, &report.rows)?;
    }
    let mut errors = ds.rejected.clone();
    errors.extend(report.skipped.iter().cloned());
    write_json(
        out,
        "census.json",
        json!({
            "delta": delta.value(),
            "summary": serde_json::to_value(&report.summary)?,
            "rejected": rejected_json(&errors),
        }),
    )?;
    Ok(report_rejected(&errors))
}

fn sweep(ctx: &RunContext) -> Result<bool> {
    let path = ctx.args.grid.as_deref().context("--grid is required")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let grid = GridSpec::parse_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    let params = ctx.params()?;
    let beliefs = ctx.beliefs()?;
    let inputs = SweepInputs {
        params: &params,
        beliefs: &beliefs,
        delta: ctx.delta(None)?,
        kinematics: &ctx.defaults.kinematics,
        defaults: &ctx.defaults,
        simulate: true,
    };
    let report = simulation::sweep_initial_states(&grid, &inputs);
    let s = &report.summary;
    println!(
        "cells {} (evaluated {}, skipped {}); disclosures {}",
        s.cells, s.evaluated, s.skipped, s.disclosures
    );
    println!(
        "successful deception {} ({:.3}%): AV first {} ({:.3}%), AV later {} ({:.3}%)",
        s.successes,
        100.0 * s.success_share,
        s.av_first.count,
        100.0 * s.av_first.share,
        s.av_later.count,
        100.0 * s.av_later.share
    );
    println!("PET not improved in {} success cells", s.closure_failures);
    let out = ctx.out_dir()?;
    if let Some(dir) = out {
        simulation::write_sweep_csv(create(dir, "sweep.csv")?, &report.cells)?;
    }
    write_json(out, "sweep.json", json!({ "summary": serde_json::to_value(s)? }))?;
    let errors: Vec<(String, String)> = report
        .cells
        .iter()
        .filter_map(|c| {
            c.skipped.as_ref().map(|why| {
                (
                    format!("cell ({:.3},{:.3},{:.3},{:.3})", c.hv_speed, c.hv_accel, c.av_speed, c.av_accel),
                    why.clone(),
                )
            })
        })
        .collect();
    Ok(report_rejected(&errors))
}

fn vehicle(p: Player) -> &'static str {
    match p {
        Player::A => "HV",
        Player::B => "AV",
    }
}

fn simulate(ctx: &RunContext) -> Result<bool> {
    let path = ctx.args.scenario.as_deref().context("--scenario is required")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = ScenarioConfig::parse_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    let pair = simulation::simulate_pair(&cfg)?;
    let threshold = ctx.defaults.simulation.pet_danger_threshold;
    let class = |pet: f64| if pet < threshold { "dangerous" } else { "safe" };
    let name = if cfg.name.is_empty() { "scenario" } else { cfg.name.as_str() };
    println!("{name}: {} passes the conflict point first", vehicle(pair.without.first));
    for (label, r) in [("without deception", &pair.without), ("with deception", &pair.with)] {
        println!("  {label:<17}  PET {:.3} s ({})", r.pet, class(r.pet));
    }
    println!("  PET change {:+.3} s", round3(pair.pet_gain()));
    let out = ctx.out_dir()?;
    if let Some(dir) = out {
        simulation::write_trajectory_csv(
            create(dir, "trajectories.csv")?,
            &[("av", &pair.without.av), ("hv", &pair.without.hv), ("hv_deception", &pair.with.hv)],
        )?;
    }
    write_json(
        out,
        "pet.json",
        json!({
            "scenario": name,
            "danger_threshold": threshold,
            "without": {"pet": pair.without.pet, "first": vehicle(pair.without.first),
                        "hv_crossing": pair.without.hv_crossing, "av_crossing": pair.without.av_crossing},
            "with": {"pet": pair.with.pet, "first": vehicle(pair.with.first),
                     "hv_crossing": pair.with.hv_crossing, "av_crossing": pair.with.av_crossing},
            "gain": pair.pet_gain(),
        }),
    )?;
    Ok(false)
}

fn report(ctx: &RunContext) -> Result<bool> {
    let ds = ctx.data()?;
    let mut text = String::new();
    let labeled = ds.labeled().ok();
    if let Some(labeled) = &labeled {
        let params = ctx.params()?;
        let delta = ctx.delta(Some(labeled))?;
        let evals = GameForm::ALL
            .iter()
            .map(|&f| calibration::evaluate(labeled, &params, f, delta, &ctx.defaults.kinematics))
            .collect::<Result<Vec<_>, _>>()?;
        text += &format!("prediction (delta {:.3})\n", delta.value());
        text += &evaluation_table(&evals);
        text += "\n";
    }
    let (census, _) = run_census(ctx, &ds)?;
    text += "disclosure\n";
    text += &census_lines(&census);
    print!("{text}");
    if let Some(dir) = ctx.out_dir()? {
        create(dir, "report.txt")?.write_all(text.as_bytes())?;
    }
    let mut errors = ds.rejected.clone();
    errors.extend(census.skipped.iter().cloned());
    Ok(report_rejected(&errors))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = |args: &RunArgs, f: fn(&RunContext) -> Result<bool>| RunContext::new(args.clone()).and_then(|c| f(&c));
    let result = match &cli.command {
        Command::Calibrate(a) => run(a, calibrate),
        Command::Validate(a) => run(a, validate),
        Command::Decide(a) => run(a, decide),
        Command::Sweep(a) => run(a, sweep),
        Command::Simulate(a) => run(a, simulate),
        Command::Report(a) => run(a, report),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
