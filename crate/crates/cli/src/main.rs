use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use forrlab::adversaries::protocol::{extend_protocol, junk_averaged_lift};
use forrlab::adversaries::{xor_lift_table, RectangleProtocol};
use forrlab::dist::instance::{read_all, write_instance, Instance};
use forrlab::dist::SigmaSampler;
use forrlab::fourier::brute_fourier;
use forrlab::harness::{any_failed, run, ExperimentConfig, OUT_DIR_ENV};
use forrlab::problem::label_k;
use forrlab::report::{emit, fmt_float, OutputFormat};
use forrlab::rng::{purpose_stream, stream_rng};
use forrlab::wht::forr;
use forrlab::{ForrelationParams, PromiseLabel, SignVector, Source};

#[derive(Parser)]
#[command(name = "forrlab", version, about = "Experiments on the XOR of k Forrelation instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw instances and write them as binary records.
    Sample(SampleArgs),
    /// Label instances read from binary records.
    Label(LabelArgs),
    /// Success rate of the amplified quantum algorithm on σ.
    QuantumSuccess(ExperimentArgs),
    /// Best decision-tree advantage between σ₀ and σ₁.
    TreeAdvantage(ExperimentArgs),
    /// Monte Carlo moment against its exact value.
    EstimateMoments(ExperimentArgs),
    /// Identity checks; exits 1 on any failure.
    Verify(ExperimentArgs),
    /// Any configured experiment, chosen by --experiment or the config file.
    Run(ExperimentArgs),
    /// Evaluate the XOR lift of a rectangle protocol.
    LiftEval(LiftArgs),
    /// Per-level Fourier mass as CSV.
    FourierMass(MassArgs),
}

#[derive(Args, Clone, Default)]
struct ExperimentArgs {
    /// Flat TOML config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    /// exhaustive or greedy.
    #[arg(long)]
    strategy: Option<String>,
    /// gaussian, uniform, mu0, mu1, mu0-tilde or mu1-tilde.
    #[arg(long)]
    source: Option<String>,
    /// read-coordinates, full-instance, sigma or uniform.
    #[arg(long)]
    tester_source: Option<String>,
    /// Moment index as global coordinates, comma separated.
    #[arg(long, value_delimiter = ',')]
    coords: Option<Vec<usize>>,
    #[arg(long)]
    max_rejects: Option<u64>,
    #[arg(long)]
    max_trees: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// json-lines or csv.
    #[arg(long)]
    format: Option<String>,
    /// Record wall time in each report.
    #[arg(long)]
    timing: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    eps: Option<f64>,
    /// uniform, mu0-tilde, mu1-tilde or sigma.
    #[arg(long, default_value = "sigma")]
    source: String,
    /// Label for the sigma source: yes or no.
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_rejects: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    /// Binary records; stdin when absent.
    input: Option<PathBuf>,
}

#[derive(Args)]
struct LiftArgs {
    /// Protocol as JSON.
    #[arg(long)]
    protocol: PathBuf,
    /// Point z as a mask (bit i set means z_i = −1); all points when absent.
    #[arg(long)]
    z: Option<u32>,
    /// Evaluate through ext^l with the junk bits averaged out.
    #[arg(long, default_value_t = 0)]
    extend: usize,
}

#[derive(Args)]
struct MassArgs {
    /// Protocol as JSON; its XOR lift is analysed.
    #[arg(long, conflicts_with = "table")]
    protocol: Option<PathBuf>,
    /// Truth table as whitespace-separated reals, 2^M of them.
    #[arg(long)]
    table: Option<PathBuf>,
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Sample(a) => sample(a),
        Command::Label(a) => label(a),
        Command::QuantumSuccess(a) => experiment(a, Some("quantum-success")),
        Command::TreeAdvantage(a) => experiment(a, Some("tree-advantage")),
        Command::EstimateMoments(a) => experiment(a, Some("estimate-moments")),
        Command::Verify(a) => experiment(a, Some("verify")),
        Command::Run(a) => experiment(a, None),
        Command::LiftEval(a) => lift_eval(a),
        Command::FourierMass(a) => fourier_mass(a),
    }
}

fn build_config(a: &ExperimentArgs, fixed: Option<&str>) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(e) = fixed {
        c.experiment = e.to_string();
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = &a.$f { c.$f = v.clone(); } )* };
    }
    set!(experiment, n, k, samples, trials, depth, strategy, source, tester_source, coords, max_rejects, max_trees, seed, workers);
    if a.eps.is_some() {
        c.eps = a.eps;
    }
    if let Some(f) = &a.format {
        c.format = match f.as_str() {
            "json-lines" | "jsonl" => OutputFormat::JsonLines,
            "csv" => OutputFormat::Csv,
            other => bail!("unknown format '{other}'"),
        };
    }
    if a.timing {
        c.timing = true;
    }
    if a.output.is_some() {
        c.output = a.output.clone();
    }
    Ok(c)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn experiment(a: ExperimentArgs, fixed: Option<&str>) -> Result<Outcome> {
    let config = build_config(&a, fixed)?;
    let reports = run(&config)?;
    let env_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let out = open_output(config.output_path(env_dir.as_deref()).as_deref())?;
    emit(&reports, config.format, out)?;
    Ok(if any_failed(&reports) { Outcome::Fail } else { Outcome::Pass })
}

fn sample(a: SampleArgs) -> Result<Outcome> {
    let params = match a.eps {
        Some(eps) => ForrelationParams::with_eps(a.n, a.k, eps)?,
        None => ForrelationParams::new(a.n, a.k)?,
    };
    let mut rng = stream_rng(a.seed, purpose_stream("sample"));
    let mut out = open_output(a.output.as_deref())?;
    let mut z = vec![0.0; params.total_len()];
    if a.source == "sigma" {
        let label = PromiseLabel::parse(a.label.as_deref().context("--label is required for the sigma source")?)?;
        let mut sampler = SigmaSampler::new(params, a.max_rejects);
        for _ in 0..a.count {
            sampler.sample_into(label, &mut z, &mut rng)?;
            write_instance(&mut out, &Instance::new(params, Some(label), SignVector::from_reals(&z)?)?)?;
        }
    } else {
        let source = Source::parse(&a.source)?;
        if matches!(source, Source::Gaussian | Source::Mu(_)) {
            bail!("source '{}' is not cube-valued; use uniform, mu0-tilde, mu1-tilde or sigma", a.source);
        }
        for _ in 0..a.count {
            source.fill(&params, &mut z, &mut rng);
            write_instance(&mut out, &Instance::new(params, None, SignVector::from_reals(&z)?)?)?;
        }
    }
    out.flush()?;
    Ok(Outcome::Pass)
}

fn label(a: LabelArgs) -> Result<Outcome> {
    let instances = match &a.input {
        Some(p) => read_all(&mut BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?))?,
        None => read_all(&mut io::stdin().lock())?,
    };
    let mut out = BufWriter::new(io::stdout().lock());
    let mut mismatch = false;
    for (i, inst) in instances.iter().enumerate() {
        let z = inst.signs.to_reals();
        let computed = label_k(&z, &inst.params)?;
        let forrs = z
            .chunks(inst.params.copy_len())
            .map(|c| forr(c).map(fmt_float))
            .collect::<forrlab::Result<Vec<_>>>()?;
        let stored = inst.label.map_or("none", PromiseLabel::name);
        mismatch |= inst.label.is_some_and(|l| l != computed);
        writeln!(
            out,
            "{{\"index\":{i},\"n\":{},\"k\":{},\"label\":\"{}\",\"stored\":\"{stored}\",\"forr\":[{}]}}",
            inst.params.n,
            inst.params.k,
            computed.name(),
            forrs.join(",")
        )?;
    }
    out.flush()?;
    Ok(if mismatch { Outcome::Fail } else { Outcome::Pass })
}

fn lift_eval(a: LiftArgs) -> Result<Outcome> {
    let c = RectangleProtocol::load_json(&a.protocol)?;
    let table = if a.extend == 0 {
        xor_lift_table(&c)?
    } else {
        junk_averaged_lift(&extend_protocol(&c, a.extend)?, a.extend)?
    };
    let mut out = BufWriter::new(io::stdout().lock());
    match a.z {
        Some(z) => {
            let v = table.get(z as usize).with_context(|| format!("z = {z} is outside arity {}", c.arity))?;
            writeln!(out, "{}", fmt_float(*v))?;
        }
        None => {
            for (z, v) in table.iter().enumerate() {
                writeln!(out, "{z} {}", fmt_float(*v))?;
            }
        }
    }
    out.flush()?;
    Ok(Outcome::Pass)
}

fn fourier_mass(a: MassArgs) -> Result<Outcome> {
    let tt = match (&a.protocol, &a.table) {
        (Some(p), None) => xor_lift_table(&RectangleProtocol::load_json(p)?)?,
        (None, Some(p)) => {
            let mut text = String::new();
            File::open(p).with_context(|| format!("opening {}", p.display()))?.read_to_string(&mut text)?;
            text.split_whitespace()
                .map(|t| t.parse::<f64>().with_context(|| format!("bad value '{t}'")))
                .collect::<Result<Vec<_>>>()?
        }
        _ => bail!("give exactly one of --protocol or --table"),
    };
    let table = brute_fourier(&tt)?;
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "level,mass,weight")?;
    for level in 0..=table.arity() {
        writeln!(out, "{level},{},{}", fmt_float(table.level_mass(level)), fmt_float(table.level_weight(level)))?;
    }
    out.flush()?;
    Ok(Outcome::Pass)
}
