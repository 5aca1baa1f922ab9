use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ddsim::analytic::{
    diffusion_constant, gamma_ou, one_over_e_time_order_sweep, one_over_e_time_tau_sweep,
    ramsey_gamma,
};
use ddsim::config::RunConfig;
use ddsim::curve::{fmt_f64, DecayCurve};
use ddsim::dynamics::SpinState;
use ddsim::ensemble::{decay_curve, Sweep};
use ddsim::estimation::{estimate_tau_c, fit_decay, DecayModel, FitOptions};
use ddsim::gatemap::{fidelity_map, linspace, MapMetadata};
use ddsim::noise::{generate_trajectory, Channel, NoiseStream};
use ddsim::sequences::{SequenceKind, SequenceSpec};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "ddsim", version, about = "Dynamical-decoupling decoherence simulator")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for ensemble and map computations.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo decay curve for every configured sequence.
    Simulate,
    /// Fit a decay curve CSV.
    Fit {
        /// CSV with `total_time_s` and `signal` columns
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "simple")]
        model: ModelArg,
        /// Random restarts for the correlation-time fit.
        #[arg(long, default_value_t = 500)]
        restarts: usize,
        /// Pulse spacing for rows that lack `tau_s`, s.
        #[arg(long)]
        tau_s: Option<f64>,
        /// Also fit an additive offset (envelope models).
        #[arg(long)]
        fit_offset: bool,
        /// Bins of the binned restart histogram.
        #[arg(long, default_value_t = 30)]
        bins: usize,
    },
    /// Closed-form OU coherence for every configured sequence and correlation-time preset.
    Analytic,
    /// Gate fidelity maps over static amplitude and detuning errors.
    Gatemap,
    /// Write one sampled noise realization.
    TrajectoryDump {
        #[arg(long, default_value_t = 0)]
        realization: u64,
        /// Duration, s.
        #[arg(long, default_value_t = 1e-3)]
        duration: f64,
        /// Sample spacing, s.
        #[arg(long, default_value_t = 1e-6)]
        dt: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Simple,
    Stretched,
    OuTauC,
}

/// Files created by a command; removed again if the command fails.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs {
            dir,
            written: vec![],
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    fn discard(&self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.ensemble.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if cli.threads == Some(0) {
        bail!("--threads must be >= 1");
    }
    let mut out = Outputs::new(cfg.output_dir.clone())?;
    let res = match &cli.command {
        Command::Simulate => simulate(&cfg, cli.threads, &mut out),
        Command::Fit {
            input,
            model,
            restarts,
            tau_s,
            fit_offset,
            bins,
        } => fit(&cfg, input, *model, *restarts, *tau_s, *fit_offset, *bins, &mut out),
        Command::Analytic => analytic(&cfg, &mut out),
        Command::Gatemap => with_threads(cli.threads, || gatemap(&cfg, &mut out)),
        Command::TrajectoryDump {
            realization,
            duration,
            dt,
        } => trajectory_dump(&cfg, *realization, *duration, *dt, &mut out),
    };
    if res.is_err() {
        out.discard();
    }
    res
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")?
            .install(f),
    }
}

fn simulate(cfg: &RunConfig, threads: Option<usize>, out: &mut Outputs) -> Result<()> {
    if cfg.sequences.is_empty() {
        bail!("config: no [[sequence]] entries to simulate");
    }
    let noise = cfg.noise_params()?;
    let drive = cfg.drive_params()?;
    let ens = cfg.ensemble_config(threads)?;
    {
        let mut m = out.create("run_manifest.toml")?;
        m.write_all(cfg.to_toml()?.as_bytes())?;
        m.flush()?;
    }
    for s in &cfg.sequences {
        let sweep = s.sweep()?;
        let curve = decay_curve(&sweep, &SpinState::ground(), &noise, &drive, &ens)
            .with_context(|| format!("sequence {}", s.name))?;
        let mut w = out.create(&format!("{}.csv", s.name))?;
        curve.write_csv(&mut w)?;
        w.flush()?;
        eprintln!("{}: {} points", s.name, curve.len());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fit(
    cfg: &RunConfig,
    input: &Path,
    model: ModelArg,
    restarts: usize,
    tau_s: Option<f64>,
    fit_offset: bool,
    bins: usize,
    out: &mut Outputs,
) -> Result<()> {
    let mut curve = DecayCurve::read_path(input)?;
    if let Some(t) = tau_s {
        curve = curve.with_fixed_tau(t);
    }
    match model {
        ModelArg::Simple | ModelArg::Stretched => {
            let m = if matches!(model, ModelArg::Simple) {
                DecayModel::Simple
            } else {
                DecayModel::Stretched
            };
            let opts = FitOptions {
                fit_offset,
                ..Default::default()
            };
            let r = fit_decay(&curve, m, &opts)?;
            let mut w = csv::Writer::from_writer(out.create("fit_summary.csv")?);
            w.write_record([
                "model", "t2_s", "t2_stderr_s", "beta", "beta_stderr", "amplitude",
                "amplitude_stderr", "offset", "offset_stderr", "r_squared", "converged",
            ])?;
            let (p, e) = (&r.params, &r.param_stderr);
            w.write_record([
                if m == DecayModel::Simple { "simple".into() } else { "stretched".into() },
                fmt_f64(p.t2),
                fmt_f64(e.t2),
                fmt_f64(p.beta),
                fmt_f64(e.beta),
                fmt_f64(p.amplitude),
                fmt_f64(e.amplitude),
                fmt_f64(p.offset),
                fmt_f64(e.offset),
                fmt_f64(r.r_squared),
                r.converged.to_string(),
            ])?;
            w.flush()?;
            eprintln!("T2 = {:.6e} s, beta = {:.4}, R2 = {:.6}", p.t2, p.beta, r.r_squared);
        }
        ModelArg::OuTauC => {
            let (best, ens) = estimate_tau_c(&curve, cfg.sigma_delta(), restarts, cfg.ensemble.seed)?;
            let mut w = csv::Writer::from_writer(out.create("tau_c_summary.csv")?);
            w.write_record([
                "tau_c_s", "tau_c_stderr_s", "amplitude", "amplitude_stderr", "offset",
                "offset_stderr", "r_squared", "n_restarts", "converged",
            ])?;
            w.write_record([
                fmt_f64(best.tau_c),
                fmt_f64(best.tau_c_stderr),
                fmt_f64(best.amplitude),
                fmt_f64(best.amplitude_stderr),
                fmt_f64(best.offset),
                fmt_f64(best.offset_stderr),
                fmt_f64(best.r_squared),
                best.n_restarts.to_string(),
                best.converged.to_string(),
            ])?;
            w.flush()?;
            let mut w = csv::Writer::from_writer(out.create("tau_c_restarts.csv")?);
            w.write_record(["restart_id", "tau_c_s", "r2"])?;
            for (i, (t, r2)) in ens.estimates.iter().zip(&ens.r2_values).enumerate() {
                w.write_record([i.to_string(), fmt_f64(*t), fmt_f64(*r2)])?;
            }
            w.flush()?;
            let mut w = csv::Writer::from_writer(out.create("tau_c_histogram.csv")?);
            w.write_record(["bin_lower_s", "bin_upper_s", "count"])?;
            for b in ens.histogram(bins) {
                w.write_record([fmt_f64(b.lower), fmt_f64(b.upper), b.count.to_string()])?;
            }
            w.flush()?;
            eprintln!("tau_c = {:.4} s (R2 = {:.6})", best.tau_c, best.r_squared);
        }
    }
    Ok(())
}

/// Sweeps used by `analytic` when the configuration lists no sequences: a Hahn
/// spacing scan and a CPMG order scan at 100 µs.
fn default_analytic_sweeps() -> Vec<(String, Sweep)> {
    vec![
        (
            "hahn".into(),
            Sweep::Tau {
                base: SequenceSpec::hahn(1e-6),
                tau_values: linspace(1e-6, 2e-3, 200),
            },
        ),
        (
            "cpmg".into(),
            Sweep::Order {
                base: SequenceSpec::cpmg(1, 100e-6),
                n_values: (0..=50).map(|k| 8 * k).collect(),
            },
        ),
    ]
}

fn analytic(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let sigma = cfg.sigma_delta();
    let sweeps: Vec<(String, Sweep)> = if cfg.sequences.is_empty() {
        default_analytic_sweeps()
    } else {
        cfg.sequences
            .iter()
            .map(|s| Ok((s.name.clone(), s.sweep()?)))
            .collect::<ddsim::Result<_>>()?
    };
    for (name, sweep) in &sweeps {
        let (kind, points): (SequenceKind, Vec<(usize, f64)>) = match sweep {
            Sweep::Order { base, n_values } => {
                (base.kind, n_values.iter().map(|&n| (n, base.tau)).collect())
            }
            Sweep::Tau { base, tau_values } => (
                base.kind,
                tau_values.iter().map(|&t| (base.effective_n_pulses(), t)).collect(),
            ),
        };
        let mut w = csv::Writer::from_writer(out.create(&format!("analytic_{name}.csv"))?);
        w.write_record(["tau_c_s", "N", "tau_s", "total_time_s", "gamma", "coherence"])?;
        for &tc in &cfg.analytic.tau_c_presets_s {
            for &(n, tau) in &points {
                let (t, g) = if kind == SequenceKind::Ramsey || n == 0 {
                    let t = if kind == SequenceKind::Ramsey { tau } else { 0.0 };
                    (t, ramsey_gamma(t, sigma))
                } else if tau == 0.0 {
                    (0.0, 0.0)
                } else {
                    (n as f64 * tau, gamma_ou(n as u64, tau, sigma, tc)?)
                };
                w.write_record([
                    fmt_f64(tc),
                    n.to_string(),
                    fmt_f64(tau),
                    fmt_f64(t),
                    fmt_f64(g),
                    fmt_f64((-g).exp()),
                ])?;
            }
        }
        w.flush()?;
    }
    let mut w = csv::Writer::from_writer(out.create("analytic_summary.csv")?);
    w.write_record([
        "tau_c_s",
        "diffusion_rad2_s3",
        "hahn_one_over_e_s",
        "cpmg_order_one_over_e_s",
    ])?;
    for &tc in &cfg.analytic.tau_c_presets_s {
        let hahn = one_over_e_time_tau_sweep(1, sigma, tc)?;
        let cpmg = one_over_e_time_order_sweep(100e-6, sigma, tc)?;
        w.write_record([
            fmt_f64(tc),
            fmt_f64(diffusion_constant(sigma, tc)),
            fmt_f64(hahn),
            fmt_f64(cpmg),
        ])?;
        eprintln!("tau_c = {tc} s: Hahn 1/e at {hahn:.4e} s, CPMG(100 us) 1/e at {cpmg:.4e} s");
    }
    w.flush()?;
    Ok(())
}

fn gatemap(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let drive = cfg.drive_params()?;
    let g = &cfg.gatemap;
    let dmax = cfg.gatemap_delta_max();
    let eps = linspace(-g.eps_max, g.eps_max, g.n_eps);
    let deltas = linspace(-dmax, dmax, g.n_delta);
    let noise = cfg.noise_params()?;
    for &gate in &g.gates {
        let grid = fidelity_map(gate, &eps, &deltas, &drive, g.tau_s)?;
        let mut w = out.create(&format!("gatemap_{}.csv", gate.name()))?;
        grid.write_csv(&mut w)?;
        w.flush()?;
        let meta = MapMetadata::new(gate, &grid, g.tau_s, noise.amplitude.sigma, noise.detuning.sigma);
        let mut w = out.create(&format!("gatemap_{}.json", gate.name()))?;
        serde_json::to_writer_pretty(&mut w, &meta)?;
        w.flush()?;
        eprintln!(
            "{}: box minimum fidelity {}",
            gate.name(),
            meta.box_min_fidelity.map_or("n/a".into(), |f| format!("{f:.8}"))
        );
    }
    Ok(())
}

fn trajectory_dump(cfg: &RunConfig, k: u64, duration: f64, dt: f64, out: &mut Outputs) -> Result<()> {
    if !(dt > 0.0 && duration >= 0.0 && duration.is_finite()) {
        bail!("--dt must be > 0 and --duration >= 0");
    }
    let noise = cfg.noise_params()?;
    let n = (duration / dt + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let seed = cfg.ensemble.seed;
    let d = generate_trajectory(&noise.detuning, &grid, &mut NoiseStream::new(seed, k, Channel::Detuning))?;
    let e = generate_trajectory(&noise.amplitude, &grid, &mut NoiseStream::new(seed, k, Channel::Amplitude))?;
    let mut w = csv::Writer::from_writer(out.create("trajectory.csv")?);
    w.write_record(["time_s", "delta_rad_s", "eps"])?;
    for i in 0..n {
        w.write_record([fmt_f64(grid[i]), fmt_f64(d.values[i]), fmt_f64(e.values[i])])?;
    }
    w.flush()?;
    Ok(())
}
