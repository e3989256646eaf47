use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use sparse_limits::bounds::{self, BoundResult};
use sparse_limits::decoders::{self, LassoSettings, ReweightSettings};
use sparse_limits::error::{Error, Result};
use sparse_limits::exponent::{self, DiscreteChannelModel};
use sparse_limits::harness::{self, normalized_to_n, DecoderKind};
use sparse_limits::io::{self, fmt_sig10};
use sparse_limits::model::{CoeffModel, Dataset, ProblemConfig};

#[derive(Parser)]
#[command(name = "sparse-limits", version, about = "Information-theoretic limits and decoder benchmarks for sparse support recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides `base.seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exact-recovery (or partial-recovery) error bound.
    Bound {
        #[command(flatten)]
        scalars: Scalars,
        /// Bound the probability of at least ⌊αK⌋ errors instead.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Mutual information per error count, in bits.
    Mi {
        #[command(flatten)]
        scalars: Scalars,
        /// Single error count; all of 1..=K when omitted.
        #[arg(long)]
        i: Option<usize>,
    },
    /// Necessary and sufficient numbers of samples.
    SampleComplexity {
        #[command(flatten)]
        scalars: Scalars,
        #[arg(long, default_value_t = 0.01)]
        target_pe: f64,
    },
    /// SNR below which no number of samples drives the bound under 1.
    SnrCutoff {
        #[command(flatten)]
        scalars: Scalars,
    },
    /// Exponent, mutual information and bound for a discrete model.
    Exponent(ExponentArgs),
    /// Run one decoder on CSV inputs.
    Decode(DecodeArgs),
    /// Write one generated dataset as CSV files plus a JSON header into the `--out` directory.
    Generate {
        #[command(flatten)]
        scalars: Scalars,
    },
}

#[derive(Args, Clone)]
struct Scalars {
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Sets N from the normalized count N/(K log₂(D/K)); overrides --n.
    #[arg(long)]
    nn: Option<f64>,
    #[arg(long, default_value_t = 512)]
    d: usize,
    #[arg(long, default_value_t = 32)]
    k: usize,
    /// Linear SNR; the observation noise variance is 1/SNR.
    #[arg(long, default_value_t = 900.0)]
    snr: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.0)]
    nu: f64,
    #[arg(long, default_value = "fixed_signs")]
    coeff_model: CoeffModel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `<var>=<start:step:stop>` with var one of n, normalized_n, snr, rho, nu.
    #[arg(long)]
    sweep: Option<String>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExponentArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    i: Option<usize>,
    #[arg(long, conflicts_with = "delta_sweep")]
    delta: Option<f64>,
    /// `start:step:stop` grid of δ values.
    #[arg(long)]
    delta_sweep: Option<String>,
    /// Compare the δ = 0 derivative of E_o with the mutual information.
    #[arg(long)]
    check_derivative: bool,
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
    /// Also evaluate the general error bound at this N (requires --d).
    #[arg(long, requires = "d")]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Drop δ from the binomial term of the bound.
    #[arg(long)]
    weak: bool,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "lasso")]
    decoder: DecoderArg,
    /// Lasso λ; defaults to 2√(2 ln D)/√SNR.
    #[arg(long)]
    lambda: Option<f64>,
    /// Reweighted-lasso base threshold; defaults to eps·λ.
    #[arg(long)]
    lambda_r: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 900.0)]
    snr: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value = "fixed_signs")]
    coeff_model: CoeffModel,
}

#[derive(Clone, Copy, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
enum DecoderArg {
    #[value(alias = "ml-marginal")]
    MlMarginal,
    #[value(alias = "ml-least-squares")]
    MlLeastSquares,
    Lasso,
    #[value(alias = "reweighted-lasso")]
    ReweightedLasso,
    Omp,
}

impl From<DecoderArg> for DecoderKind {
    fn from(d: DecoderArg) -> Self {
        match d {
            DecoderArg::MlMarginal => DecoderKind::MlMarginal,
            DecoderArg::MlLeastSquares => DecoderKind::MlLeastSquares,
            DecoderArg::Lasso => DecoderKind::Lasso,
            DecoderArg::ReweightedLasso => DecoderKind::ReweightedLasso,
            DecoderArg::Omp => DecoderKind::Omp,
        }
    }
}

fn parse_grid(text: &str, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::param(what, format!("`{text}` is not start:step:stop")))?;
    let [start, step, stop] = nums[..] else {
        return Err(Error::param(what, format!("`{text}` is not start:step:stop")));
    };
    if !(step > 0.0) || stop < start {
        return Err(Error::param(what, "need step > 0 and stop ≥ start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|j| start + j as f64 * step).collect())
}

impl Scalars {
    fn config(&self) -> ProblemConfig {
        let n = match self.nn {
            Some(nn) => normalized_to_n(nn, self.d, self.k),
            None => self.n,
        };
        ProblemConfig {
            n_samples: n,
            dimension: self.d,
            sparsity: self.k,
            snr: self.snr,
            sigma2: self.sigma2,
            rho: self.rho,
            nu: self.nu,
            coeff_model: self.coeff_model,
            seed: self.seed,
        }
    }

    /// Sweep column name and the configuration at each point; a single
    /// unnamed point without `--sweep`.
    fn points(&self) -> Result<(Option<String>, Vec<(f64, ProblemConfig)>)> {
        let base = self.config();
        base.validate()?;
        let Some(spec) = &self.sweep else {
            return Ok((None, vec![(f64::NAN, base)]));
        };
        let (var, grid) = spec
            .split_once('=')
            .ok_or_else(|| Error::param("sweep", format!("`{spec}` is not <var>=<start:step:stop>")))?;
        let values = parse_grid(grid, "sweep")?;
        let mut out = Vec::with_capacity(values.len());
        let name = if var == "n" {
            "n".to_string()
        } else {
            var.parse::<harness::SweepVar>()?.name().to_string()
        };
        for v in values {
            let cfg = if var == "n" {
                ProblemConfig {
                    n_samples: v.round() as usize,
                    ..base
                }
            } else {
                var.parse::<harness::SweepVar>()?.apply(&base, v)
            };
            cfg.validate()?;
            out.push((v, cfg));
        }
        Ok((Some(name), out))
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(sweep: &Option<String>, cols: &[&str]) -> Self {
        let mut header: Vec<String> = sweep.iter().cloned().collect();
        header.extend(cols.iter().map(|c| c.to_string()));
        Table { header, rows: Vec::new() }
    }

    fn push(&mut self, sweep: &Option<String>, at: f64, cells: Vec<String>) {
        let mut row = Vec::with_capacity(cells.len() + 1);
        if sweep.is_some() {
            row.push(fmt_sig10(at));
        }
        row.extend(cells);
        self.rows.push(row);
    }

    fn emit(&self, out: &Option<PathBuf>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory flush");
        match out {
            Some(path) => std::fs::write(path, &bytes).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            }),
            None => {
                print!("{}", String::from_utf8_lossy(&bytes));
                Ok(())
            }
        }
    }
}

fn count_or_inf(n: Option<u64>) -> String {
    n.map_or_else(|| "inf".to_string(), |v| v.to_string())
}

fn bound_cells(b: &BoundResult) -> Vec<String> {
    vec![fmt_sig10(b.value), b.clamped.to_string()]
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            threads,
            seed,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Io {
                path: config.clone(),
                source: e,
            })?;
            let mut spec = harness::validate_config(&text)?;
            if let Some(s) = seed {
                spec.base.seed = s;
            }
            let curve = match threads {
                Some(t) => harness::run_sweep_with_threads(&spec, t)?,
                None => harness::run_sweep(&spec)?,
            };
            harness::emit_csv(&curve, &out)
        }
        Command::Bound { scalars, alpha } => {
            let (sweep, points) = scalars.points()?;
            let mut t = Table::new(&sweep, &["bound", "clamped"]);
            for (at, cfg) in points {
                let b = match alpha {
                    Some(a) => bounds::partial_recovery_bound(&cfg, a)?,
                    None if cfg.nu > 0.0 => bounds::error_bound_noisy(&cfg)?,
                    None => bounds::error_bound_linear(&cfg)?,
                };
                t.push(&sweep, at, bound_cells(&b));
            }
            t.emit(&scalars.out)
        }
        Command::Mi { scalars, i } => {
            let (sweep, points) = scalars.points()?;
            let mut t = Table::new(&sweep, &["i", "mi_bits"]);
            for (at, cfg) in points {
                let range = match i {
                    Some(i) => i..=i,
                    None => 1..=cfg.sparsity,
                };
                for i in range {
                    let mi = bounds::mutual_info_linear(i, &cfg)?;
                    t.push(&sweep, at, vec![i.to_string(), fmt_sig10(mi)]);
                }
            }
            t.emit(&scalars.out)
        }
        Command::SampleComplexity { scalars, target_pe } => {
            let (sweep, points) = scalars.points()?;
            let cols = ["necessary_n", "necessary_binding_i", "sufficient_n", "sufficient_binding_i"];
            let mut t = Table::new(&sweep, &cols);
            for (at, cfg) in points {
                let nec = bounds::necessary_samples(&cfg)?;
                let suf = bounds::sufficient_samples(&cfg, target_pe)?;
                t.push(
                    &sweep,
                    at,
                    vec![
                        count_or_inf(nec.n_required),
                        nec.binding_i.to_string(),
                        count_or_inf(suf.n_required),
                        suf.binding_i.to_string(),
                    ],
                );
            }
            t.emit(&scalars.out)
        }
        Command::SnrCutoff { scalars } => {
            let (sweep, points) = scalars.points()?;
            let mut t = Table::new(&sweep, &["snr_cutoff"]);
            for (at, cfg) in points {
                t.push(&sweep, at, vec![fmt_sig10(bounds::snr_cutoff(&cfg)?)]);
            }
            t.emit(&scalars.out)
        }
        Command::Exponent(args) => run_exponent(args),
        Command::Decode(args) => run_decode(args),
        Command::Generate { scalars } => {
            let out = scalars.out.clone().ok_or_else(|| Error::param("out", "generate needs an output directory"))?;
            let cfg = scalars.config();
            let ds = Dataset::generate(&cfg)?;
            ds.write_debug(&cfg, &out)
        }
    }
}

fn run_exponent(args: ExponentArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.model).map_err(|e| Error::Io {
        path: args.model.clone(),
        source: e,
    })?;
    let model = DiscreteChannelModel::from_json(&text)?;
    let errors: Vec<usize> = match args.i {
        Some(i) => vec![i],
        None => (1..=model.k).collect(),
    };
    let deltas = match (&args.delta, &args.delta_sweep) {
        (Some(d), _) => vec![*d],
        (None, Some(grid)) => parse_grid(grid, "delta-sweep")?,
        (None, None) => vec![1.0],
    };
    let mut w = csv::Writer::from_writer(std::io::stdout());
    let csv_err = |e: csv::Error| Error::param("output", e.to_string());
    w.write_record(["i", "delta", "eo_bits"]).map_err(csv_err)?;
    for &i in &errors {
        let curve = exponent::exponent_curve(&model, i, &deltas)?;
        for (d, v) in curve.deltas.iter().zip(&curve.values) {
            w.write_record([i.to_string(), fmt_sig10(*d), fmt_sig10(*v)]).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::param("output", e.to_string()))?;
    if args.check_derivative {
        println!("i,derivative_at_zero,mutual_information_bits");
        for &i in &errors {
            let (lhs, rhs) = exponent::derivative_check(&model, i, args.h)?;
            println!("{i},{},{}", fmt_sig10(lhs), fmt_sig10(rhs));
        }
    }
    if let (Some(n), Some(d)) = (args.n, args.d) {
        let b = exponent::error_bound_general(&model, n, d, args.weak)?;
        println!("bound,clamped");
        println!("{},{}", fmt_sig10(b.value), b.clamped);
    }
    Ok(())
}

fn run_decode(args: DecodeArgs) -> Result<()> {
    let x = io::read_matrix(&args.x)?;
    let y: DVector<f64> = io::read_vector(&args.y)?;
    let d = x.ncols();
    let lambda = args.lambda.unwrap_or_else(|| decoders::default_lambda(d, args.snr));
    let settings = LassoSettings::new(lambda);
    let out = match DecoderKind::from(args.decoder) {
        DecoderKind::MlMarginal => {
            let cfg = ProblemConfig {
                n_samples: x.nrows(),
                dimension: d,
                sparsity: args.k,
                snr: args.snr,
                sigma2: args.sigma2,
                coeff_model: args.coeff_model,
                ..ProblemConfig::default()
            };
            let (support, beta) = (sparse_limits::SupportSet::from_unsorted(vec![]), DVector::zeros(d));
            let ds = Dataset {
                x,
                z: None,
                y,
                support,
                beta,
            };
            decoders::ml_decode_marginal(&ds, &cfg)?
        }
        DecoderKind::MlLeastSquares => decoders::ml_decode_ls(&x, &y, args.k)?,
        DecoderKind::Lasso => decoders::lasso(&x, &y, args.k, &settings)?,
        DecoderKind::ReweightedLasso => {
            let mut rw = ReweightSettings::defaults(lambda, args.sigma2);
            if let Some(e) = args.eps {
                rw.eps = e;
                rw.lambda_r = e * lambda;
            }
            if let Some(l) = args.lambda_r {
                rw.lambda_r = l;
            }
            decoders::reweighted_lasso(&x, &y, args.k, &settings, &rw)?
        }
        DecoderKind::Omp => decoders::omp(&x, &y, args.k)?,
    };
    let report = serde_json::json!({
        "support": out.support_estimate,
        "iterations": out.iterations,
        "objective": out.objective,
        "converged": out.converged,
        "beta": out.beta_estimate.map(|b| b.iter().copied().collect::<Vec<f64>>()),
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
