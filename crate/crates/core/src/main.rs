//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 malformed input,
//! 3 dimension mismatch, 4 unsupported rank, 5 input not positive
//! semidefinite.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seprank::apps::{
    choi_from_channel, eb_check_rank2, nonneg_factorization_rank2, rank_relations_report,
    EbVerdict,
};
use seprank::io;
use seprank::schmidt::{mpdo_from_dense, operator_schmidt, MpdoCores};
use seprank::separator::{separate_bipartite, separate_mpdo, verify_certificate};
use seprank::{CMat, Config, Error};

/// Environment variable selecting a default tolerance profile
/// (`default`, `strict`, or `loose`).
const TOL_PROFILE_ENV: &str = "SEPRANK_TOL_PROFILE";

#[derive(Parser)]
#[command(name = "seprank", version, about = "Separability certificates for operator Schmidt rank two")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct TolArgs {
    /// Certificate tolerance (residual and factor eigenvalue slack).
    #[arg(long, global = true)]
    tol_cert: Option<f64>,
    /// Numerical rank cutoff relative to the largest singular value.
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Operator Schmidt decomposition of a dense bipartite state.
    Schmidt {
        /// Input dense_state file.
        #[arg(long)]
        input: PathBuf,
        /// Local dimensions, e.g. 2,2 (defaults to the file's dims).
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Where to write the decomposition (mpdo file).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Separable decomposition with a machine-checkable certificate.
    Separate {
        /// Input dense_state or mpdo file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Where to write the certificate file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-verify a certificate against a state, from scratch.
    Certify {
        /// dense_state or mpdo file.
        #[arg(long)]
        state: PathBuf,
        /// certificate file.
        #[arg(long)]
        cert: PathBuf,
    },
    /// Entanglement-breaking check for a channel with term rank at most two.
    ChannelEb {
        /// Input channel file.
        #[arg(long)]
        input: PathBuf,
        /// Where to write the Choi matrix (dense_state file).
        #[arg(long)]
        choi_out: Option<PathBuf>,
        /// Where to write the separability certificate when the verdict is EB.
        #[arg(long)]
        cert_out: Option<PathBuf>,
    },
    /// Diagonal state and (for rank 2) nonnegative factorization of a matrix.
    FromNonneg {
        /// Input nonneg_matrix file.
        #[arg(long)]
        input: PathBuf,
        /// Where to write the diagonal state.
        #[arg(long)]
        state_out: Option<PathBuf>,
    },
    /// Rank relations report: osr per cut, Hermitian bound, separable rank.
    Ranks {
        /// Input dense_state or mpdo file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse(_) | Error::Io(_) => 2,
        Error::DimensionMismatch(_) | Error::DimensionLimit { .. } => 3,
        Error::RankTooHigh { .. } | Error::RankNotTwo { .. } => 4,
        Error::NotPSDInput { .. }
        | Error::CompressionNotPSD { .. }
        | Error::ChoiNotPSD { .. }
        | Error::NonHermitianInput { .. } => 5,
        _ => 1,
    }
}

fn build_config(tol: &TolArgs) -> Config {
    let mut cfg = match std::env::var(TOL_PROFILE_ENV).as_deref() {
        Ok("strict") => Config {
            cert_tol: 1e-10,
            rank_tol: 1e-11,
            ..Config::default()
        },
        Ok("loose") => Config {
            cert_tol: 1e-6,
            rank_tol: 1e-7,
            ..Config::default()
        },
        _ => Config::default(),
    };
    if let Some(t) = tol.tol_cert {
        cfg.cert_tol = t;
    }
    if let Some(t) = tol.tol_rank {
        cfg.rank_tol = t;
    }
    cfg
}

fn meta_for(cfg: &Config) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("tool".into(), format!("seprank {}", env!("CARGO_PKG_VERSION")));
    m.insert("tol_cert".into(), format!("{:e}", cfg.cert_tol));
    m.insert("tol_rank".into(), format!("{:e}", cfg.rank_tol));
    m
}

/// Load either a dense state or an MPDO, producing both representations.
fn load_state(
    path: &PathBuf,
    dims_override: &Option<Vec<usize>>,
    cfg: &Config,
) -> Result<(CMat, Vec<usize>, Option<MpdoCores>), Error> {
    let file = io::load(path)?;
    match file.kind {
        io::Kind::DenseState => {
            let (rho, mut dims) = io::dense_from_file(&file)?;
            if let Some(d) = dims_override {
                let total: usize = d.iter().product();
                if total != rho.nrows() {
                    return Err(Error::DimensionMismatch(format!(
                        "--dims {:?} do not match the {}-dimensional state",
                        d,
                        rho.nrows()
                    )));
                }
                dims = d.clone();
            }
            Ok((rho, dims, None))
        }
        io::Kind::Mpdo => {
            let cores = io::mpdo_from_file(&file)?;
            let rho = seprank::schmidt::dense_from_mpdo(&cores)?;
            let dims = cores.dims.clone();
            let _ = cfg;
            Ok((rho, dims, Some(cores)))
        }
        other => Err(Error::Parse(format!(
            "expected a dense_state or mpdo file, found {other:?}"
        ))),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let cfg = build_config(&cli.tol);
    match cli.command {
        Command::Schmidt {
            input,
            dims,
            output,
        } => {
            let (rho, dims, _) = load_state(&input, &dims, &cfg)?;
            if dims.len() != 2 {
                return Err(Error::DimensionMismatch(format!(
                    "schmidt needs exactly two local dimensions, got {dims:?}"
                )));
            }
            let dec = operator_schmidt(&rho, dims[0], dims[1], &cfg)?;
            println!("osr = {}", dec.rank());
            if let Some(out) = output {
                // store the pair decomposition as a two-site MPDO
                let terms = dec.pairs.len();
                let cores = MpdoCores::new(
                    dims.clone(),
                    vec![terms],
                    vec![
                        dec.pairs.iter().map(|(a, _)| a.clone()).collect(),
                        dec.pairs.iter().map(|(_, b)| b.clone()).collect(),
                    ],
                    false,
                )?;
                io::save(&out, &io::mpdo_file(&cores, meta_for(&cfg)))?;
            }
            Ok(0)
        }
        Command::Separate {
            input,
            dims,
            output,
        } => {
            let (rho, dims, cores) = load_state(&input, &dims, &cfg)?;
            let cert = if dims.len() == 2 && cores.is_none() {
                separate_bipartite(&rho, dims[0], dims[1], &cfg)
            } else {
                let cores = match cores {
                    Some(c) => c,
                    None => mpdo_from_dense(&rho, &dims, &cfg)?,
                };
                separate_mpdo(&cores, &cfg)
            };
            let cert = match cert {
                Err(Error::RankTooHigh { osr }) => {
                    eprintln!("operator Schmidt rank {osr} unsupported (method applies up to rank 2)");
                    return Ok(4);
                }
                other => other?,
            };
            println!("residual = {:.3e}", cert.residual);
            println!("min factor eigenvalue = {:.3e}", cert.min_factor_eig);
            for (i, cone) in cert.cone_metadata.iter().enumerate() {
                println!(
                    "cut {}: cone {:?}, case {:?}, rays {:?}",
                    i, cone.kind, cone.case, cone.rays
                );
            }
            if cert.cone_metadata.is_empty() {
                println!("product certificate (no cone step needed)");
            }
            if let Some(out) = output {
                io::save(&out, &io::certificate_file(&cert, meta_for(&cfg)))?;
            }
            Ok(0)
        }
        Command::Certify { state, cert } => {
            let (rho, _, _) = load_state(&state, &None, &cfg)?;
            let cert = io::certificate_from_file(&io::load(&cert)?)?;
            let report = verify_certificate(&cert, &rho, &cfg)?;
            if report.pass {
                println!(
                    "PASS (residual {:.3e}, min factor eigenvalue {:.3e})",
                    report.residual, report.min_factor_eig
                );
                Ok(0)
            } else {
                let reason = if report.residual > cert.tolerances.cert_tol.max(cfg.cert_tol) {
                    format!("residual {:.3e} exceeds tolerance", report.residual)
                } else if report.min_factor_eig < -cert.tolerances.cert_tol.max(cfg.cert_tol) {
                    format!("factor min eigenvalue {:.3e}", report.min_factor_eig)
                } else {
                    format!(
                        "core Hermiticity deviation {:.3e}",
                        report.core_herm_deviation
                    )
                };
                println!("FAIL ({reason})");
                Ok(1)
            }
        }
        Command::ChannelEb {
            input,
            choi_out,
            cert_out,
        } => {
            let ch = io::channel_from_file(&io::load(&input)?)?;
            let choi = choi_from_channel(&ch)?;
            if let Some(out) = &choi_out {
                io::save(
                    out,
                    &io::dense_state_file(&choi, &[ch.d_out, ch.d_in], meta_for(&cfg)),
                )?;
            }
            match eb_check_rank2(&ch, &cfg) {
                Ok((EbVerdict::EB, Some(cert))) => {
                    println!("EB");
                    if let Some(out) = cert_out {
                        io::save(&out, &io::certificate_file(&cert, meta_for(&cfg)))?;
                    }
                    Ok(0)
                }
                Ok(_) => {
                    println!("Unknown");
                    Ok(0)
                }
                Err(Error::ChoiNotPSD { min_eig }) => {
                    println!("NotCP (Choi min eigenvalue {min_eig:.3e})");
                    Ok(5)
                }
                Err(e) => Err(e),
            }
        }
        Command::FromNonneg { input, state_out } => {
            let m = io::nonneg_from_file(&io::load(&input)?)?;
            let (rho, (d1, d2)) = seprank::apps::diag_state_from_nonneg(&m);
            if let Some(out) = state_out {
                io::save(&out, &io::dense_state_file(&rho, &[d1, d2], meta_for(&cfg)))?;
            }
            match nonneg_factorization_rank2(&m, &cfg) {
                Ok(terms) => {
                    println!("rank₊ = 2");
                    for (i, (a, b)) in terms.iter().enumerate() {
                        println!(
                            "term {}: a = {:?}, b = {:?}",
                            i + 1,
                            a.as_slice(),
                            b.as_slice()
                        );
                    }
                    Ok(0)
                }
                Err(Error::RankNotTwo { rank }) => {
                    eprintln!("rank(M) = {rank}; nonnegative factorization skipped (needs rank 2)");
                    Ok(4)
                }
                Err(e) => Err(e),
            }
        }
        Command::Ranks { input, dims } => {
            let (rho, dims, _) = load_state(&input, &dims, &cfg)?;
            let r = rank_relations_report(&rho, &dims, &cfg)?;
            println!("dims = {:?}", r.dims);
            println!("osr per cut = {:?}", r.osr);
            match &r.hosr_bound {
                Some(h) => println!("hermitian decomposition bonds = {h:?}"),
                None => println!("hermitian decomposition bonds = not found"),
            }
            match r.sep_rank {
                Some(s) => println!("sep-rank found = {s}"),
                None => println!(
                    "sep-rank = unknown ({})",
                    r.sep_error.as_deref().unwrap_or("no certificate")
                ),
            }
            println!("rank checks pass = {}", r.checks_pass);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
