use clap::{Parser, Subcommand, ValueEnum};
use siegel_modp::experiments::{
    aop_bound, audit_conjecture, kernel_bound, render_aop, render_audit, render_checks, render_kernel, table_aop,
    table_primes, table_theta_kernel, verify, Format,
};
use siegel_modp::genforms::{Gen, GeneratorCache};
use siegel_modp::ringmodp::{sturm_bound, ModpRing};
use siegel_modp::thetaops::{a_op, theta, theta1};
use siegel_modp::{Error, QExp2, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "siegel-modp", version, about = "Degree-2 Siegel modular forms mod p")]
struct Cli {
    /// Directory for generator expansions, reused across runs.
    #[arg(long, global = true, env = "SIEGEL_MODP_CACHE")]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Text)]
    format: OutFormat,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Text,
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Format {
        match f {
            OutFormat::Text => Format::Text,
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute generator expansions (stored in the cache directory when given).
    Gen {
        #[arg(long, default_value_t = 16)]
        bound: usize,
        /// Comma-separated subset of E4,E6,E10,E12,X10,X12,X35.
        #[arg(long, value_delimiter = ',')]
        names: Vec<String>,
        /// Also write each expansion to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply Θ^[j] to an expansion, reduced mod p.
    Theta {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        j: u8,
        #[arg(long)]
        p: u64,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Apply A^(j)(M) to an expansion.
    Aop {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        j: u8,
        #[arg(long = "M")]
        m: u64,
        /// Reduce mod this prime first.
        #[arg(long)]
        p: Option<u64>,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Filtration ω₁ of a weight-K expansion mod p.
    Filtration {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        weight: i64,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Filtrations of A(p)-images for even k ≤ kmax.
    TableAop {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 60)]
        kmax: i64,
    },
    /// Weights k whose Θ-kernel mod p contains a form of filtration k.
    TableKernel {
        #[arg(long, default_value_t = 79)]
        pmax: u64,
        #[arg(long, default_value_t = 100)]
        kmax: i64,
        #[arg(long, default_value_t = 15)]
        cap: usize,
    },
    /// Classify Θ-kernel elements and check the predicted divisibility.
    Audit {
        #[arg(long, default_value_t = 79)]
        pmax: u64,
        #[arg(long, default_value_t = 100)]
        kmax: i64,
        #[arg(long, default_value_t = 15)]
        cap: usize,
    },
    /// Run the generator gates and consistency checks.
    Verify {
        #[arg(long, default_value_t = 8)]
        bound: usize,
    },
}

enum Outcome {
    Ok,
    VerifyFailed,
}

fn cache(cli: &Cli, bound: usize) -> GeneratorCache {
    match &cli.cache_dir {
        Some(d) => GeneratorCache::with_dir(bound, d),
        None => GeneratorCache::new(bound),
    }
}

fn read_qexp(path: &Path) -> Result<QExp2> {
    QExp2::parse(&std::fs::read_to_string(path)?)
}

fn run(cli: &Cli) -> Result<Outcome> {
    let fmt: Format = cli.format.into();
    let out = match &cli.cmd {
        Cmd::Gen { bound, names, out } => {
            let gens: Vec<Gen> = if names.is_empty() {
                Gen::ALL.to_vec()
            } else {
                names
                    .iter()
                    .map(|n| Gen::parse(n).ok_or_else(|| Error::InvalidArgument(format!("unknown generator {n}"))))
                    .collect::<Result<_>>()?
            };
            let c = cache(cli, *bound);
            let mut s = String::new();
            for g in gens {
                let f = c.get(g)?;
                if let Some(dir) = out {
                    std::fs::create_dir_all(dir)?;
                    std::fs::write(dir.join(format!("{}-B{}.qexp", g.name(), bound)), f.serialize())?;
                }
                let nonzero = f.values_q().iter().filter(|x| !num_is_zero(x)).count();
                s += &format!("{} weight={} bound={} nonzero={}\n", g.name(), f.weight(), f.bound(), nonzero);
            }
            s
        }
        Cmd::Theta { j, p, input } => {
            let f = read_qexp(input)?.reduce_mod(*p)?;
            if *j == 2 {
                theta(&f)?.serialize()
            } else {
                theta1(&f)?.serialize()
            }
        }
        Cmd::Aop { j, m, p, input } => {
            let mut f = read_qexp(input)?;
            if let Some(p) = p {
                f = f.reduce_mod(*p)?;
            }
            a_op(&f, *j, *m)?.serialize()
        }
        Cmd::Filtration { p, weight, input } => {
            let f = read_qexp(input)?;
            // X35 is normalized at (2,-1,3), so generators need bound 3.
            let b = sturm_bound(*weight).max(3);
            let ring = ModpRing::new(&cache(cli, b), *p, b)?;
            let poly = ring.psi_inv(&f, *weight)?;
            let omega = ring.omega1(&f, *weight)?;
            format!("omega1 {omega}\npoly {poly}\n")
        }
        Cmd::TableAop { p, kmax } => {
            if *p != 5 && *p != 7 {
                return Err(Error::InvalidArgument("table-aop supports p = 5 and p = 7".into()));
            }
            let rows = table_aop(&cache(cli, aop_bound(*p, *kmax)), *p, *kmax)?;
            render_aop(&rows, fmt)?
        }
        Cmd::TableKernel { pmax, kmax, cap } => {
            let primes = table_primes(*pmax);
            let b = primes.iter().map(|&p| kernel_bound(p, *kmax, *cap)).max().unwrap_or(0);
            let t = table_theta_kernel(&cache(cli, b), &primes, *kmax, *cap)?;
            render_kernel(&t, fmt)?
        }
        Cmd::Audit { pmax, kmax, cap } => {
            let primes = table_primes(*pmax);
            let b = primes.iter().map(|&p| kernel_bound(p, *kmax, *cap)).max().unwrap_or(0);
            let entries = audit_conjecture(&cache(cli, b), &primes, *kmax, *cap)?;
            render_audit(&entries, fmt)?
        }
        Cmd::Verify { bound } => {
            let checks = verify(&cache(cli, *bound));
            print!("{}", render_checks(&checks, fmt)?);
            return Ok(if checks.iter().all(|c| c.passed) { Outcome::Ok } else { Outcome::VerifyFailed });
        }
    };
    print!("{out}");
    Ok(Outcome::Ok)
}

fn num_is_zero(x: &num_rational::BigRational) -> bool {
    *x.numer() == 0.into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerifyFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
