use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tmf::config::RunConfig;
use tmf::diagnostics::{
    energy_report, ips_energy_formula, kinetic_energy, l2_error, v1_nondissipation_terms,
    v2_dissipation_rate,
};
use tmf::dynamics::VariantTag;
use tmf::engine::{picard_iterate, Ensemble, ReferenceStepper, StepOptions};
use tmf::error::{Error, Result};
use tmf::io::{fmt_f64, write_snapshot, CsvWriter};
use tmf::lagrangian::{kelvin_audit, Loop};
use tmf::spectral::{divergence_norm, l2_norm};

#[derive(Parser)]
#[command(name = "tmf", version, about = "Stochastic mean-field solver for incompressible flow on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic viscous reference solve.
    Reference(RunArgs),
    /// Interacting particle system of N coupled momenta.
    Ips(RunArgs),
    /// Mean-field Monte Carlo driven by the reference velocity.
    Meanfield(RunArgs),
    /// Fixed-point iteration for the self-consistent mean field.
    Picard(RunArgs),
    /// Loop circulation audit under the stochastic flow.
    Circulation(RunArgs),
    /// Structural audit of the truncated noise basis.
    BasisCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Size of the worker thread pool (default: all cores). Outputs are
    /// byte-identical for any value.
    #[arg(long)]
    workers: Option<usize>,
    /// Override the noise seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn setup(&self) -> Result<(RunConfig, PathBuf)> {
        if let Some(w) = self.workers {
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build_global()
                .map_err(|e| Error::Config { key: "--workers".into(), reason: e.to_string() })?;
        }
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.noise.seed = s;
        }
        let out = PathBuf::from(&cfg.output.dir);
        std::fs::create_dir_all(&out)?;
        // the resolved config is always the first artifact
        std::fs::write(out.join("config_echo.toml"), cfg.echo()?)?;
        Ok((cfg, out))
    }
}

fn variant_name(tag: VariantTag) -> &'static str {
    match tag {
        VariantTag::V1Hamiltonian => "v1",
        VariantTag::V2Projected => "v2",
        VariantTag::H17Raw => "h17",
    }
}

fn error_kind(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Config { .. } | Error::InvalidGrid { .. } | Error::InvalidTruncation { .. } => {
            ("config", 2)
        }
        Error::BlowUp { .. } => ("blowup", 3),
        Error::NoConvergence(_) => ("no-convergence", 4),
        Error::NotSolenoidal { .. } | Error::NonZeroMean { .. } => ("invalid-field", 5),
        Error::LoopSpacing { .. } => ("loop-spacing", 6),
        Error::Io(_) | Error::Snapshot(_) => ("io", 7),
    }
}

fn steps_for(cfg: &RunConfig) -> Result<usize> {
    let steps = (cfg.stepper.t_final / cfg.stepper.dt).round() as usize;
    if steps == 0 {
        return Err(Error::Config {
            key: "stepper.t_final".into(),
            reason: "horizon shorter than one step".into(),
        });
    }
    Ok(steps)
}

fn run_reference_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let u0 = cfg.initial_field()?;
    let dt = cfg.stepper.dt;
    let steps = steps_for(cfg)?;
    let every = cfg.stepper.output_every.max(1);
    let mut stepper = ReferenceStepper::new(&u0, cfg.physics.eta, dt)?;
    let mut csv = CsvWriter::create(&out.join("energy.csv"), &["t", "e_d", "div_norm"])?;
    let record = |csv: &mut CsvWriter, st: &ReferenceStepper, step: usize| -> Result<()> {
        let u = st.current();
        csv.row(&[fmt_f64(st.t()), fmt_f64(kinetic_energy(&u)), fmt_f64(divergence_norm(&u))])?;
        write_snapshot(&out.join(format!("u_{step:06}.bin")), &u, st.t())
    };
    record(&mut csv, &stepper, 0)?;
    for s in 1..=steps {
        if let Err(e) = stepper.step() {
            if let Error::BlowUp { step, t } = e {
                csv.blowup_marker(step as usize, t)?;
            }
            csv.finish()?;
            return Err(e);
        }
        if s % every == 0 || s == steps {
            record(&mut csv, &stepper, s)?;
        }
    }
    println!("reference: {} steps, cfl_max = {:.3e}", steps, stepper.cfl_max);
    csv.finish()
}

fn energy_rate_cells(ens: &Ensemble) -> Result<[String; 3]> {
    // per-particle energy drift contributions, averaged over the ensemble
    let variant = ens.variant();
    let m = ens.len() as f64;
    match variant.tag() {
        VariantTag::V1Hamiltonian => {
            let u = ens.empirical_mean();
            let (mut t1, mut t2, mut t3) = (0.0, 0.0, 0.0);
            for xi in ens.particles() {
                let (a, b, c) = v1_nondissipation_terms(xi, &u, variant);
                t1 += a;
                t2 += b;
                t3 += c;
            }
            Ok([fmt_f64(t1 / m), fmt_f64(t2 / m), fmt_f64(t3 / m)])
        }
        _ => {
            let mut rate = 0.0;
            for xi in ens.particles() {
                rate += v2_dissipation_rate(xi, variant)?;
            }
            Ok([fmt_f64(rate / m), fmt_f64(0.0), fmt_f64(0.0)])
        }
    }
}

fn run_ips_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let u0 = cfg.initial_field()?;
    let model = cfg.model()?;
    let dt = cfg.stepper.dt;
    let steps = steps_for(cfg)?;
    let every = cfg.stepper.output_every.max(1);
    let mut ens = Ensemble::new(model, cfg.noise.seed, &u0, cfg.stepper.particles);
    let mut reference = ReferenceStepper::new(&u0, cfg.physics.eta, dt)?;
    let mut csv = CsvWriter::create(
        &out.join("energy.csv"),
        &["t", "e_d", "e_s_hat", "stderr", "rate_1", "rate_2", "rate_3", "drift_formula", "err_vs_ref", "div_norm"],
    )?;
    let record = |csv: &mut CsvWriter, ens: &Ensemble, reference: &ReferenceStepper, step: usize| -> Result<()> {
        let rep = energy_report(ens);
        let rates = energy_rate_cells(ens)?;
        let mean = ens.empirical_mean();
        csv.row(&[
            fmt_f64(rep.t),
            fmt_f64(rep.e_d),
            fmt_f64(rep.e_s_hat),
            fmt_f64(rep.stderr),
            rates[0].clone(),
            rates[1].clone(),
            rates[2].clone(),
            fmt_f64(ips_energy_formula(ens)),
            fmt_f64(l2_error(&mean, &reference.current())),
            fmt_f64(divergence_norm(&mean)),
        ])?;
        write_snapshot(&out.join(format!("mean_{step:06}.bin")), &mean, ens.t())
    };
    record(&mut csv, &ens, &reference, 0)?;
    for s in 1..=steps {
        let stepped = ens.step_ips(dt, StepOptions::default()).and_then(|_| reference.step());
        if let Err(e) = stepped {
            if let Error::BlowUp { step, t } = e {
                csv.blowup_marker(step as usize, t)?;
            }
            csv.finish()?;
            return Err(e);
        }
        if s % every == 0 || s == steps {
            record(&mut csv, &ens, &reference, s)?;
        }
    }
    println!("ips: {} particles, {} steps", ens.len(), steps);
    csv.finish()
}

fn run_meanfield_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let u0 = cfg.initial_field()?;
    let model = cfg.model()?;
    let dt = cfg.stepper.dt;
    let steps = steps_for(cfg)?;
    let every = cfg.stepper.output_every.max(1);
    let mut ens = Ensemble::new(model, cfg.noise.seed, &u0, cfg.stepper.particles);
    let mut reference = ReferenceStepper::new(&u0, cfg.physics.eta, dt)?;
    let mut csv = CsvWriter::create(
        &out.join("energy.csv"),
        &["t", "e_d", "e_s_hat", "stderr", "rate_1", "rate_2", "rate_3", "err_vs_ref", "div_norm"],
    )?;
    let record = |csv: &mut CsvWriter, ens: &Ensemble, reference: &ReferenceStepper, step: usize| -> Result<()> {
        let rep = energy_report(ens);
        let rates = energy_rate_cells(ens)?;
        let mean = ens.empirical_mean();
        csv.row(&[
            fmt_f64(rep.t),
            fmt_f64(rep.e_d),
            fmt_f64(rep.e_s_hat),
            fmt_f64(rep.stderr),
            rates[0].clone(),
            rates[1].clone(),
            rates[2].clone(),
            fmt_f64(l2_error(&mean, &reference.current())),
            fmt_f64(divergence_norm(&mean)),
        ])?;
        write_snapshot(&out.join(format!("mean_{step:06}.bin")), &mean, ens.t())
    };
    record(&mut csv, &ens, &reference, 0)?;
    for s in 1..=steps {
        let u_now = reference.current();
        let stepped = ens
            .step_meanfield(&u_now, dt, StepOptions::default())
            .and_then(|_| reference.step());
        if let Err(e) = stepped {
            if let Error::BlowUp { step, t } = e {
                csv.blowup_marker(step as usize, t)?;
            }
            csv.finish()?;
            return Err(e);
        }
        if s % every == 0 || s == steps {
            record(&mut csv, &ens, &reference, s)?;
        }
    }
    println!("meanfield: {} trajectories, {} steps", ens.len(), steps);
    csv.finish()
}

fn run_picard_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let u0 = cfg.initial_field()?;
    let model = cfg.model()?;
    let report = picard_iterate(
        &u0,
        &model,
        cfg.noise.seed,
        cfg.picard.trajectories,
        cfg.stepper.dt,
        cfg.stepper.t_final,
        cfg.picard.iterations,
        None,
    );
    let report = report?;
    let mut csv = CsvWriter::create(&out.join("residuals.csv"), &["iteration", "residual", "tol"])?;
    for (i, r) in report.residuals.iter().enumerate() {
        csv.row(&[(i + 1).to_string(), fmt_f64(*r), fmt_f64(report.tol)])?;
    }
    csv.finish()?;
    write_snapshot(&out.join("mean_final.bin"), &report.final_mean, cfg.stepper.t_final)?;
    let reference =
        tmf::engine::run_reference(&u0, cfg.physics.eta, cfg.stepper.dt, cfg.stepper.t_final, usize::MAX)?;
    println!(
        "picard: {} iterations, converged = {}, final residual = {:.3e}, err vs reference = {:.3e}",
        report.residuals.len(),
        report.converged,
        report.residuals.last().copied().unwrap_or(f64::NAN),
        l2_error(&report.final_mean, reference.final_field()),
    );
    Ok(())
}

fn run_circulation_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let u0 = cfg.initial_field()?;
    let model = cfg.model()?;
    let tag = variant_name(model.tag());
    let mut center = [0.0; 3];
    for (c, &v) in center.iter_mut().zip(&cfg.loop_spec.center) {
        *c = v;
    }
    let mut csv = CsvWriter::create(
        &out.join("circulation.csv"),
        &["t", "seed", "variant", "circulation", "rel_drift"],
    )?;
    for offset in 0..cfg.loop_spec.seeds {
        let seed = cfg.noise.seed + offset;
        let lp = Loop::circle(center, cfg.loop_spec.radius, cfg.loop_spec.points, cfg.grid.n);
        let audit = kelvin_audit(
            &u0,
            &model,
            seed,
            cfg.stepper.dt,
            cfg.stepper.t_final,
            lp,
            cfg.stepper.output_every,
        )?;
        let c0 = audit.circulations[0];
        for (t, c) in audit.times.iter().zip(&audit.circulations) {
            csv.row(&[
                fmt_f64(*t),
                seed.to_string(),
                tag.to_string(),
                fmt_f64(*c),
                fmt_f64((c - c0).abs() / c0.abs().max(1e-300)),
            ])?;
        }
        println!("circulation: seed {seed}, max relative drift = {:.3e}", audit.max_relative_drift());
    }
    csv.finish()
}

fn run_basis_check_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    use tmf::basis::{basis_field, Trig};
    use tmf::spectral::directional_derivative;
    let grid = cfg.grid_spec()?;
    let trunc = cfg.truncation()?;
    let mut csv = CsvWriter::create(
        &out.join("basis.csv"),
        &["alpha", "trig", "k1", "k2", "k3", "i", "div_norm", "self_advect_norm"],
    )?;
    for (alpha, idx) in trunc.indices().iter().enumerate() {
        let x = basis_field(grid, idx, trunc.s());
        let trig = match idx.trig {
            Trig::Constant => "const",
            Trig::Cos => "cos",
            Trig::Sin => "sin",
        };
        csv.row(&[
            alpha.to_string(),
            trig.to_string(),
            idx.k[0].to_string(),
            idx.k[1].to_string(),
            idx.k[2].to_string(),
            idx.i.to_string(),
            fmt_f64(divergence_norm(&x)),
            fmt_f64(l2_norm(&directional_derivative(&x, &x))),
        ])?;
    }
    csv.finish()?;
    let mut summary = CsvWriter::create(
        &out.join("basis_summary.csv"),
        &["dimension", "c_k", "epsilon_k"],
    )?;
    summary.row(&[trunc.len().to_string(), fmt_f64(trunc.c_k()), fmt_f64(trunc.epsilon_k())])?;
    summary.finish()?;
    println!(
        "basis: {} fields, c_k = {:.6e}, epsilon_k = {:.3e}",
        trunc.len(),
        trunc.c_k(),
        trunc.epsilon_k()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let (args, run): (&RunArgs, fn(&RunConfig, &Path) -> Result<()>) = match &cli.command {
        Command::Reference(a) => (a, run_reference_cmd),
        Command::Ips(a) => (a, run_ips_cmd),
        Command::Meanfield(a) => (a, run_meanfield_cmd),
        Command::Picard(a) => (a, run_picard_cmd),
        Command::Circulation(a) => (a, run_circulation_cmd),
        Command::BasisCheck(a) => (a, run_basis_check_cmd),
    };
    let (cfg, out) = args.setup()?;
    run(&cfg, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = error_kind(&e);
            eprintln!("error: {kind}: {e}");
            ExitCode::from(code)
        }
    }
}
