//! Command line front end: dataset generation, mode-wise sampling,
//! recovery, experiment sweeps, PSNR, and sample-count bounds. Tensors
//! travel between commands as GTCS1 files; sweeps are driven by the
//! same JSON spec the library consumes.

use clap::{Parser, Subcommand};
use gtcs_core::harness::{
    gen_compressible, gen_sparse_phantom, psnr, run_sweep, Dataset, ExperimentSpec, SupportSpec,
};
use gtcs_core::recovery::{
    gtcs_p, gtcs_s, kcs_recover, mwcs_recover, DecompositionKind, Method, RecoveryReport,
};
use gtcs_core::sensing::{
    bound_gtcs_total, bound_kcs, bound_per_mode, generate_ensemble, sample, BoundParams,
    Distribution, MeasurementEnsemble,
};
use gtcs_core::transform::SparsifyingBasis;
use gtcs_core::{io, DenseTensor, SolverConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gtcs", version, about = "Mode-wise tensor compressive sensing")]
struct Cli {
    /// Base seed for every randomized stage.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Solver termination tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file for commands that write one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as GTCS1.
    Gen {
        /// One of sparse_image, compressible_image, sparse_video,
        /// compressible_video.
        #[arg(long)]
        dataset: String,
        /// Signal dimensions, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Support plan as JSON; defaults per dataset.
        #[arg(long)]
        support: Option<String>,
        /// Power-law exponent for compressible datasets.
        #[arg(long, default_value_t = 1.5)]
        decay: f64,
    },
    /// Sample a GTCS1 tensor through a seeded mode-wise ensemble.
    Sample {
        /// Signal tensor (GTCS1).
        #[arg(long)]
        input: PathBuf,
        /// Per-mode measurement counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[arg(long, default_value = "gaussian")]
        distribution: String,
        /// Directory receiving the per-mode matrices as GTCS1 files.
        #[arg(long)]
        dump_ensemble: Option<PathBuf>,
    },
    /// Recover a signal estimate from a GTCS1 measurement tensor.
    Recover {
        /// Measurement tensor (GTCS1).
        #[arg(long)]
        input: PathBuf,
        /// Signal dimensions, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Per-mode measurement counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<usize>,
        /// One of GTCS-S, GTCS-P-CT, GTCS-P-HOSVD, KCS, MWCS.
        #[arg(long)]
        method: String,
        #[arg(long, default_value = "gaussian")]
        distribution: String,
        /// Sparsifying basis: identity or dct2.
        #[arg(long, default_value = "identity")]
        basis: String,
        /// CP rank for MWCS.
        #[arg(long)]
        rank: Option<usize>,
        /// Write the JSON recovery report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run an experiment grid from a JSON spec file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Override the spec's CSV output path.
        #[arg(long)]
        csv_out: Option<PathBuf>,
        /// Override the spec's JSON report directory.
        #[arg(long)]
        reports_dir: Option<PathBuf>,
    },
    /// Peak signal-to-noise ratio between two GTCS1 tensors.
    Psnr {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Peak value; defaults to the reference maximum magnitude.
        #[arg(long)]
        peak: Option<f64>,
    },
    /// Measurement-count bounds for a signal size and sparsity.
    Bounds {
        /// Signal dimensions, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        sparsity: usize,
        /// Constant in front of the bound.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
}

fn parse_dataset(s: &str) -> Result<Dataset, String> {
    match s {
        "sparse_image" => Ok(Dataset::SparseImage),
        "compressible_image" => Ok(Dataset::CompressibleImage),
        "sparse_video" => Ok(Dataset::SparseVideo),
        "compressible_video" => Ok(Dataset::CompressibleVideo),
        other => Err(format!(
            "unknown dataset {other:?} (expected sparse_image, compressible_image, sparse_video, or compressible_video)"
        )),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "GTCS-S" => Ok(Method::GtcsS),
        "GTCS-P-CT" => Ok(Method::GtcsPCt),
        "GTCS-P-HOSVD" => Ok(Method::GtcsPHosvd),
        "KCS" => Ok(Method::Kcs),
        "MWCS" => Ok(Method::Mwcs),
        other => Err(format!(
            "unknown method {other:?} (expected GTCS-S, GTCS-P-CT, GTCS-P-HOSVD, KCS, or MWCS)"
        )),
    }
}

fn parse_distribution(s: &str) -> Result<Distribution, String> {
    match s {
        "gaussian" => Ok(Distribution::Gaussian),
        "bernoulli" => Ok(Distribution::Bernoulli),
        other => Err(format!(
            "unknown distribution {other:?} (expected gaussian or bernoulli)"
        )),
    }
}

fn parse_basis(s: &str) -> Result<SparsifyingBasis, String> {
    match s {
        "identity" => Ok(SparsifyingBasis::Identity),
        "dct2" => Ok(SparsifyingBasis::Dct2),
        other => Err(format!(
            "unknown basis {other:?} (expected identity or dct2)"
        )),
    }
}

fn solver_config(tol: Option<f64>) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    if let Some(t) = tol {
        cfg.termination_tol = t;
    }
    cfg
}

fn required_out(out: &Option<PathBuf>) -> Result<&PathBuf, String> {
    out.as_ref().ok_or_else(|| "--out is required".to_string())
}

/// Folds the sparsifying basis into the ensemble so recovery returns
/// transform-domain coefficients; the estimate is synthesized back.
fn basis_ensemble(e: &MeasurementEnsemble, basis: SparsifyingBasis) -> MeasurementEnsemble {
    if basis == SparsifyingBasis::Identity {
        return e.clone();
    }
    let mut out = e.clone();
    for (u, &n) in out.matrices.iter_mut().zip(&e.signal_dims) {
        *u = &*u * basis.matrix(n);
    }
    out
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Gen {
            dataset,
            dims,
            support,
            decay,
        } => {
            let dataset = parse_dataset(&dataset)?;
            let x = match dataset {
                Dataset::SparseImage | Dataset::SparseVideo => {
                    let plan: SupportSpec = match support {
                        Some(text) => serde_json::from_str(&text)?,
                        None => probe_spec(dataset, &dims, decay).support_plan(),
                    };
                    gen_sparse_phantom(&dims, &plan, cli.seed)?
                }
                Dataset::CompressibleImage | Dataset::CompressibleVideo => {
                    gen_compressible(&dims, decay, cli.seed)?
                }
                Dataset::File => return Err("gen needs a synthetic dataset".into()),
            };
            io::save(required_out(&cli.out)?, &x)?;
        }
        Command::Sample {
            input,
            m,
            distribution,
            dump_ensemble,
        } => {
            let x = io::load(&input)?;
            let distribution = parse_distribution(&distribution)?;
            let e = generate_ensemble(x.shape(), &m, distribution, cli.seed)?;
            let y = sample(&x, &e)?;
            if let Some(dir) = dump_ensemble {
                std::fs::create_dir_all(&dir)?;
                for (i, u) in e.matrices.iter().enumerate() {
                    io::save(dir.join(format!("U{}.gtcs1", i + 1)), &DenseTensor::from_matrix(u))?;
                }
            }
            io::save(required_out(&cli.out)?, &y)?;
        }
        Command::Recover {
            input,
            dims,
            m,
            method,
            distribution,
            basis,
            rank,
            report,
        } => {
            let y = io::load(&input)?;
            let method = parse_method(&method)?;
            let distribution = parse_distribution(&distribution)?;
            let basis = parse_basis(&basis)?;
            let cfg = solver_config(cli.tol);
            let e = generate_ensemble(&dims, &m, distribution, cli.seed)?;
            let re = basis_ensemble(&e, basis);
            let rec: RecoveryReport = match method {
                Method::GtcsS => gtcs_s(&y, &re, &cfg)?,
                Method::GtcsPCt => gtcs_p(&y, &re, &cfg, DecompositionKind::Ct, None)?,
                Method::GtcsPHosvd => gtcs_p(&y, &re, &cfg, DecompositionKind::Hosvd, None)?,
                Method::Kcs => kcs_recover(&y, &re, &cfg)?,
                Method::Mwcs => {
                    let r = rank.ok_or("MWCS needs --rank")?;
                    mwcs_recover(&y, &re, &cfg, r, cli.seed)?
                }
            };
            let estimate = basis.from_transform_domain(&rec.recovered)?;
            if let Some(path) = report {
                std::fs::write(path, serde_json::to_string_pretty(&rec)?)?;
            }
            io::save(required_out(&cli.out)?, &estimate)?;
        }
        Command::Sweep {
            config,
            csv_out,
            reports_dir,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let mut spec: ExperimentSpec = serde_json::from_str(&text)?;
            if let Some(path) = csv_out {
                spec.csv_out = Some(path);
            }
            if let Some(dir) = reports_dir {
                spec.reports_dir = Some(dir);
            }
            let rows = run_sweep(&spec)?;
            println!("{} rows", rows.len());
        }
        Command::Psnr {
            reference,
            estimate,
            peak,
        } => {
            let a = io::load(&reference)?;
            let b = io::load(&estimate)?;
            println!("{:.6}", psnr(&a, &b, peak)?);
        }
        Command::Bounds { dims, sparsity, c } => {
            let p = BoundParams { c, s: sparsity };
            for &n in &dims {
                println!("mode N={n}: m >= {}", bound_per_mode(n, &p)?);
            }
            println!("kcs total: {}", bound_kcs(&dims, &p)?);
            println!("gtcs total: {}", bound_gtcs_total(&dims, &p)?);
        }
    }
    Ok(())
}

/// Minimal spec used only to borrow the per-dataset default support.
fn probe_spec(dataset: Dataset, dims: &[usize], decay: f64) -> ExperimentSpec {
    ExperimentSpec {
        dataset,
        dims: dims.to_vec(),
        support: None,
        decay,
        input: None,
        methods: vec![Method::GtcsS],
        m_values: vec![],
        ranks: vec![],
        seeds: vec![0],
        distribution: Distribution::Gaussian,
        basis: SparsifyingBasis::Identity,
        solver: SolverConfig::default(),
        csv_out: None,
        reports_dir: None,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
