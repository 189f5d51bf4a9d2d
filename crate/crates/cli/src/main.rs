mod config;

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;
use hblasso::eta_approx::{validation_study, ValidationConfig};
use hblasso::experiments::{
    run_multimodality_demo, run_sensitivity, run_simulation_study, run_timing, MultimodalConfig,
    ScenarioSpec, SensitivityConfig, StudyConfig, TimingConfig,
};
use hblasso::influence::{run_influence_grid, InfluenceConfig};
use hblasso::io::{self, fmt_f64, CvRequest, FitRequest, Manifest};
use hblasso::{EtaMode, FitConfig, Hyperparams, SamplerKind};

use config::{
    parse_methods, Cli, Command, CvArgs, DemoArgs, FileConfig, FitArgs, InfluenceArgs,
    SensitivityArgs, Setting, SimulateArgs, TimingArgs, ValidateArgs,
};

const DEFAULT_METHODS: [&str; 4] = ["hbl", "bl", "mbl", "tbl"];

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Fit(a) => fit(a.merged(file.fit)),
        Command::Simulate(a) => simulate(a.merged(file.simulate)),
        Command::ValidateApprox(a) => validate(a.merged(file.validate_approx)),
        Command::Cv(a) => cv(a.merged(file.cv)),
        Command::Influence(a) => influence(a.merged(file.influence)),
        Command::DemoMultimodal(a) => demo(a.merged(file.demo_multimodal)),
        Command::Timing(a) => timing(a.merged(file.timing)),
        Command::Sensitivity(a) => sensitivity(a.merged(file.sensitivity)),
    }
}

fn out_dir(out: Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn required_data(data: Option<PathBuf>) -> Result<PathBuf> {
    let Some(path) = data else {
        bail!("--data is required");
    };
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(path)
}

fn method_list(methods: Option<Vec<String>>) -> Result<Vec<SamplerKind>> {
    let list = methods.unwrap_or_else(|| DEFAULT_METHODS.map(String::from).to_vec());
    parse_methods(&list)
}

fn hyper_from(a: &FitArgs) -> Hyperparams {
    let d = Hyperparams::default();
    Hyperparams {
        a: a.a.unwrap_or(d.a),
        b: a.b.unwrap_or(d.b),
        c: a.c.unwrap_or(d.c),
        d: a.d.unwrap_or(d.d),
        eta_mode: a.eta.map_or(d.eta_mode, Setting::eta),
        lambda_mode: a.lambda.map_or(d.lambda_mode, Setting::lambda),
        ..d
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let data = required_data(a.data.clone())?;
    let mut kind: SamplerKind = a.method.as_deref().unwrap_or("hbl").parse()?;
    let hyper = hyper_from(&a);
    if let EtaMode::Fixed(_) = hyper.eta_mode {
        match kind {
            SamplerKind::Hbl => kind = SamplerKind::HblFixedEta,
            SamplerKind::HblFixedEta => {}
            other => bail!("--eta applies to hbl only, not {}", other.label()),
        }
    }
    let mut config = FitConfig::new(
        kind,
        a.iters.unwrap_or(io::REAL_DATA_ITERATIONS),
        a.burn_in.unwrap_or(io::REAL_DATA_BURN_IN),
        a.seed.unwrap_or(1),
    );
    config.thin = a.thin.unwrap_or(1);
    config.hyper = hyper;
    config.store_full_state = a.full_state.unwrap_or(false);
    let req = FitRequest {
        data,
        response: a.response.unwrap_or_else(|| "y".into()),
        standardize: a.standardize.unwrap_or(true),
        config,
        out_dir: out_dir(a.out)?,
    };
    let outcome = io::fit_command(&req)?;
    println!(
        "{} draws of {} parameters written to {}",
        outcome.samples.len(),
        outcome.samples.names.len(),
        req.out_dir.display()
    );
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let models = a.model.unwrap_or_else(|| vec![1, 2, 3, 4]);
    let ns = a.n.unwrap_or_else(|| vec![100]);
    let reps = a.reps.unwrap_or(50);
    let seed = a.seed.unwrap_or(1);
    let methods = method_list(a.methods)?;
    let mut specs = Vec::new();
    for &m in &models {
        for &n in &ns {
            specs.push(ScenarioSpec::paper(m, n, reps, seed)?);
        }
    }
    let study = StudyConfig {
        iterations: a.iters.unwrap_or(2500),
        burn_in: a.burn_in.unwrap_or(500),
        ..StudyConfig::default()
    };
    let rows = run_simulation_study(&specs, &methods, &study)?;
    let dir = out_dir(a.out)?;
    io::write_study(&dir.join("simulation.csv"), &rows)?;
    io::write_eta_medians(&dir.join("eta_medians.csv"), &rows)?;
    let mut m = Manifest::new("simulate");
    m.set("models", join(&models));
    m.set("n", join(&ns));
    m.set("replications", reps);
    m.set("methods", labels(&methods));
    m.set("iterations", study.iterations);
    m.set("burn_in", study.burn_in);
    m.set("seed", seed);
    m.write(&dir.join("manifest.txt"))?;
    for r in &rows {
        println!(
            "model {} n={} {:<4} rmse {:.3} al {:.3} cp {:.3}",
            r.model_id,
            r.n,
            r.method.label(),
            r.rmse,
            r.al,
            r.cp
        );
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    let d = ValidationConfig::default();
    let cfg = ValidationConfig {
        n_grid: a.n_grid.unwrap_or(d.n_grid),
        prior_grid: a.ab_grid.unwrap_or(d.prior_grid),
        datasets: a.datasets.unwrap_or(d.datasets),
        mc_size: a.mc_size.unwrap_or(d.mc_size),
        seed: a.seed.unwrap_or(d.seed),
    };
    let rows = validation_study(&cfg)?;
    let dir = out_dir(a.out)?;
    io::write_validation(&dir.join("validate_approx.csv"), &rows)?;
    let mut m = Manifest::new("validate-approx");
    m.set("n_grid", join(&cfg.n_grid));
    m.set("ab_grid", floats(&cfg.prior_grid));
    m.set("datasets", cfg.datasets);
    m.set("mc_size", cfg.mc_size);
    m.set("seed", cfg.seed);
    m.write(&dir.join("manifest.txt"))?;
    for r in &rows {
        println!(
            "n={:<4} a=b={:<5} max TV {:.4} KL {:.4} rev KL {:.4}",
            r.n, r.prior, r.max_tv, r.max_kl, r.max_reverse_kl
        );
    }
    Ok(())
}

fn cv(a: CvArgs) -> Result<()> {
    let config = FitConfig {
        seed: a.seed.unwrap_or(1),
        ..FitConfig::default()
    };
    let req = CvRequest {
        data: required_data(a.data)?,
        response: a.response.unwrap_or_else(|| "y".into()),
        standardize: a.standardize.unwrap_or(true),
        methods: method_list(a.methods)?,
        config,
        length_factor: a.length_factor.unwrap_or(1.0),
        out_dir: out_dir(a.out)?,
    };
    for (m, r) in io::cv_command(&req)? {
        println!(
            "{:<4} MSPE {:.4} MAPE {:.4} MHPE {:.4} MedSPE {:.4}",
            m.label(),
            r.mspe,
            r.mape,
            r.mhpe,
            r.medspe
        );
    }
    Ok(())
}

fn influence(a: InfluenceArgs) -> Result<()> {
    let d = InfluenceConfig::default();
    let cfg = InfluenceConfig {
        n: a.n.unwrap_or(d.n),
        eta_list: a.eta_list.unwrap_or(d.eta_list),
        x_values: a.x_list.unwrap_or(d.x_values),
        z_points: a.z_points.unwrap_or(d.z_points),
        posterior_draws: a.draws.unwrap_or(d.posterior_draws),
        burn_in: a.burn_in.unwrap_or(d.burn_in),
        g_draws: a.g_draws.unwrap_or(d.g_draws),
        seed: a.seed.unwrap_or(d.seed),
        ..d
    };
    let grid = run_influence_grid(&cfg)?;
    let dir = out_dir(a.out)?;
    io::write_influence(&dir.join("influence.csv"), &grid)?;
    let mut m = Manifest::new("influence");
    m.set("n", cfg.n);
    m.set("eta_list", floats(&cfg.eta_list));
    m.set("x_list", floats(&cfg.x_values));
    m.set("z_range", format!("{},{}", cfg.z_min, cfg.z_max));
    m.set("z_points", cfg.z_points);
    m.set("posterior_draws", cfg.posterior_draws);
    m.set("burn_in", cfg.burn_in);
    m.set("g_draws", cfg.g_draws);
    m.set("seed", cfg.seed);
    m.write(&dir.join("manifest.txt"))?;
    println!("{} rows written to {}", grid.rows().len(), dir.display());
    Ok(())
}

fn demo(a: DemoArgs) -> Result<()> {
    let d = MultimodalConfig::default();
    let cfg = MultimodalConfig {
        n: a.n.unwrap_or(d.n),
        iterations: a.iters.unwrap_or(d.iterations),
        burn_in: a.burn_in.unwrap_or(d.burn_in),
        grid_size: a.grid.unwrap_or(d.grid_size),
        seed: a.seed.unwrap_or(d.seed),
        ..d
    };
    let result = run_multimodality_demo(&cfg)?;
    let dir = out_dir(a.out)?;
    io::write_multimodal(&dir, &result)?;
    let mut m = Manifest::new("demo-multimodal");
    m.set("n", cfg.n);
    m.set("sigma", fmt_f64(cfg.sigma));
    m.set("beta", floats(&cfg.beta));
    m.set("lambda", fmt_f64(cfg.lambda));
    m.set("eta", fmt_f64(cfg.eta));
    m.set("iterations", cfg.iterations);
    m.set("burn_in", cfg.burn_in);
    m.set("grid", cfg.grid_size);
    m.set("seed", cfg.seed);
    m.set("modes_unconditional", result.unconditional.mode_count);
    m.set("modes_conditional", result.conditional.mode_count);
    m.write(&dir.join("manifest.txt"))?;
    println!(
        "smoothed modes: unconditional prior {}, conditional prior {}",
        result.unconditional.mode_count, result.conditional.mode_count
    );
    Ok(())
}

fn timing(a: TimingArgs) -> Result<()> {
    let d = TimingConfig::default();
    let cfg = TimingConfig {
        n: a.n.unwrap_or(d.n),
        p_grid: a.p_grid.unwrap_or(d.p_grid),
        methods: match a.methods {
            Some(list) => parse_methods(&list)?,
            None => d.methods,
        },
        iterations: a.iters.unwrap_or(d.iterations),
        burn_in: a.burn_in.unwrap_or(d.burn_in),
        runs: a.runs.unwrap_or(d.runs),
        seed: a.seed.unwrap_or(d.seed),
    };
    let rows = run_timing(&cfg)?;
    let dir = out_dir(a.out)?;
    io::write_timing(&dir.join("timing.csv"), &rows)?;
    let mut m = Manifest::new("timing");
    m.set("n", cfg.n);
    m.set("p_grid", join(&cfg.p_grid));
    m.set("methods", labels(&cfg.methods));
    m.set("iterations", cfg.iterations);
    m.set("burn_in", cfg.burn_in);
    m.set("runs", cfg.runs);
    m.set("seed", cfg.seed);
    m.write(&dir.join("manifest.txt"))?;
    for r in &rows {
        println!("{:<4} p={:<4} {:.3} s", r.method.label(), r.p, r.seconds);
    }
    Ok(())
}

fn sensitivity(a: SensitivityArgs) -> Result<()> {
    let d = SensitivityConfig::default();
    let cfg = SensitivityConfig {
        values: a.values.unwrap_or(d.values),
        iterations: a.iters.unwrap_or(d.iterations),
        burn_in: a.burn_in.unwrap_or(d.burn_in),
        seed: a.seed.unwrap_or(d.seed),
        ..d
    };
    let result = run_sensitivity(&cfg)?;
    let dir = out_dir(a.out)?;
    io::write_sensitivity(&dir.join("sensitivity.csv"), &result)?;
    let mut m = Manifest::new("sensitivity");
    m.set("points", cfg.points);
    m.set("sigma", fmt_f64(cfg.sigma));
    m.set("values", floats(&cfg.values));
    m.set("iterations", cfg.iterations);
    m.set("burn_in", cfg.burn_in);
    m.set("seed", cfg.seed);
    m.write(&dir.join("manifest.txt"))?;
    println!(
        "{} curves written to {}",
        result.curves.len(),
        dir.display()
    );
    Ok(())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn floats(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

fn labels(v: &[SamplerKind]) -> String {
    v.iter().map(|m| m.label()).collect::<Vec<_>>().join(",")
}
