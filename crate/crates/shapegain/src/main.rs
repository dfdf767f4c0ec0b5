use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use shapegain::codebook_io::{save_gain_codebook, save_shape_codebook};
use shapegain::experiments::{self, CsiMode};
use shapegain::report::Table;
use shapegain::ExperimentSpec;

#[derive(Parser)]
#[command(name = "shapegain", version, about = "Shape-gain limited-feedback precoding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the gain codebooks and draw the shape codebooks for every B_s.
    TrainCodebooks(Common),
    /// Gain quantizer distortion against B_g.
    DistortionGain(Common),
    /// RVQ shape distortion against B_s, with the closed-form bound.
    DistortionShape(Common),
    /// Quantization distortion against the split of B.
    SweepBitalloc(Common),
    /// Downlink sum-MSE against SNR, one series per B_s.
    SweepSmse(LinkArgs),
    /// Downlink bit error rate against SNR, one series per B_s.
    SweepBer(LinkArgs),
    /// CCDF of the RVQ minimum squared distance.
    Ccdf(Common),
    /// Optimal bit allocation from closed-form and fitted constants.
    Allocate(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Output path; defaults to `<output_dir>/<subcommand>.csv`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Overrides `trials`.
    #[arg(long)]
    trials: Option<u64>,
    /// Overrides `master_seed` and the environment.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct LinkArgs {
    #[command(flatten)]
    common: Common,
    /// Feed back the exact channels instead of quantizing them.
    #[arg(long)]
    perfect_csi: bool,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::load(&self.config)?;
        if let Some(t) = self.trials {
            spec.set_trials(t)?;
        }
        if let Some(s) = self.seed {
            spec.master_seed = s;
        }
        Ok(spec)
    }

    fn output(&self, spec: &ExperimentSpec, name: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| spec.output_dir.join(format!("{name}.csv")))
    }
}

fn write(table: &Table, path: &Path) -> Result<()> {
    table.write_csv(path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainCodebooks(args) => {
            let spec = args.spec()?;
            let dir = args.out.clone().unwrap_or_else(|| spec.output_dir.join("codebooks"));
            let (gains, books) = experiments::train_codebooks(&spec)?;
            let mut t = Table::new(&["B_s", "B_g", "gain_file", "shape_file"]);
            for cb in &books {
                let (bs, bg) = (cb.shape().bits(), cb.gain().bits());
                let gain_file = format!("gain_Bg{bg}.txt");
                let shape_file = format!("shape_M{}_Bs{bs}.txt", cb.shape().dimension());
                save_gain_codebook(&dir.join(&gain_file), cb.gain())?;
                save_shape_codebook(&dir.join(&shape_file), cb.shape())?;
                t.push(vec![bs.into(), bg.into(), gain_file.as_str().into(), shape_file.as_str().into()])?;
            }
            println!(
                "trained {} product codebooks on {} gains (E[g^2] = {:.6})",
                books.len(),
                gains.values.len(),
                gains.mean_gain_sq
            );
            write(&t, &dir.join("index.csv"))
        }
        Command::DistortionGain(args) => {
            let spec = args.spec()?;
            let curve = experiments::gain_distortion(&spec)?;
            println!("K_g = {:.6}, log2 slope = {:.4}", curve.constants.kg, curve.slope);
            write(&curve.table()?, &args.output(&spec, "distortion-gain"))
        }
        Command::DistortionShape(args) => {
            let spec = args.spec()?;
            let curve = experiments::shape_distortion(&spec)?;
            let below = curve.points.iter().all(|p| p.empirical < p.bound);
            println!("log2 slope = {:.4}, below bound everywhere: {below}", curve.slope);
            write(&curve.table()?, &args.output(&spec, "distortion-shape"))
        }
        Command::SweepBitalloc(args) => {
            let spec = args.spec()?;
            let sweep = experiments::bitalloc_sweep(&spec)?;
            let best = sweep.argmin();
            println!(
                "empirical argmin B_s = {} (B_g = {}), distortion {:.6e} +- {:.2e}",
                best.shape_bits, best.gain_bits, best.empirical, best.std_error
            );
            write(&sweep.table()?, &args.output(&spec, "sweep-bitalloc"))
        }
        Command::SweepSmse(args) => {
            let spec = args.common.spec()?;
            let sweep = experiments::link_sweep(&spec, mode(args.perfect_csi))?;
            println!("{} grid points, {} trials each", sweep.points.len(), spec.trials);
            write(&sweep.smse_table()?, &args.common.output(&spec, "sweep-smse"))
        }
        Command::SweepBer(args) => {
            let spec = args.common.spec()?;
            let sweep = experiments::link_sweep(&spec, mode(args.perfect_csi))?;
            println!("{} grid points, {} trials each, {}", sweep.points.len(), spec.trials, spec.modulation.name());
            write(&sweep.ber_table()?, &args.common.output(&spec, "sweep-ber"))
        }
        Command::Ccdf(args) => {
            let spec = args.spec()?;
            let curve = experiments::ccdf_compare(&spec)?;
            println!(
                "sup |exact - MC| = {:.4e}, sup |exact - approx_sin| = {:.4e}, sup |exact - approx_psi| = {:.4e}",
                curve.sup_gap(|p| p.exact, |p| p.monte_carlo),
                curve.sup_gap(|p| p.exact, |p| p.approx_sin),
                curve.sup_gap(|p| p.exact, |p| p.approx_psi),
            );
            write(&curve.table()?, &args.output(&spec, "ccdf"))
        }
        Command::Allocate(args) => {
            let spec = args.spec()?;
            let r = experiments::allocate(&spec)?;
            println!("B = {}", r.total_bits);
            for (name, row) in [("analytic", &r.analytic), ("fitted", &r.fitted)] {
                println!(
                    "{name:>8}: real B_s = {:.3}, B_g = {:.3}; integer B_s = {}, B_g = {}; D = {:.6e}, D_c = {:.6e}",
                    row.real_shape_bits,
                    row.real_gain_bits,
                    row.integer_shape_bits,
                    row.integer_gain_bits,
                    row.distortion,
                    row.scaling_constant
                );
            }
            println!("asymptotic: B_s = {:.3}, B_g = {:.3}", r.asymptotic.0, r.asymptotic.1);
            write(&r.table()?, &args.output(&spec, "allocate"))
        }
    }
}

fn mode(perfect: bool) -> CsiMode {
    if perfect {
        CsiMode::Perfect
    } else {
        CsiMode::Quantized
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli).context("shapegain failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
