//! The `sdremu` command.
//!
//! Exit codes: 0 success, 1 error, 2 usage or config error, 3 guest trap,
//! 4 step budget exhausted, 5 low-confidence BER point under `--strict`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use sdremu_core::cluster::{Cluster, ClusterError, ClusterRunReport, RunOptions};
use sdremu_core::emu::Program;
use sdremu_core::isa::{assemble, disassemble, AsmErrorKind, ProgramImage};
use sdremu_core::kernel::{generate_kernel, load_problems, Variant};

use crate::config::{load_sweep, ConfigFileError, Manifest};
use crate::fast::{run_cluster, ExecMode};
use crate::harness::{ber_sweep, cycle_problems, cycle_report, Emulation, HarnessError};
use crate::image::{decode_image, encode_image, parse_symbols, render_symbols};
use crate::results::{render_constellation, render_cycle_report, write_ber_csv, write_file};

#[derive(Parser, Debug)]
#[command(name = "sdremu", version, about = "Many-core RV32 emulator with low-precision MIMO kernels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Manifest file (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, or output file for assemble/disassemble
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed overriding the manifest and sweep seeds
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Host worker threads for BER sweeps
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Fail (exit 5) if a BER point misses its error target
    #[arg(long, global = true)]
    pub strict: bool,
    /// Cluster scheduling: deterministic round-robin or harts on host threads
    #[arg(long, global = true, value_name = "MODE", default_value = "deterministic",
          value_parser = ["deterministic", "fast"])]
    pub mode: String,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Assemble a source file into a binary image plus symbol map
    Assemble { src: PathBuf },
    /// Disassemble a binary image
    Disassemble { bin: PathBuf },
    /// Run a program or a generated kernel on the cluster
    Run,
    /// Write a generated kernel: assembly, image, symbols and layout
    KernelGen,
    /// Monte-Carlo BER sweep
    Ber,
    /// Cycle report for one or more kernel variants
    Cycles,
    /// Dump a constellation table as CSV
    Constellation {
        #[arg(value_parser = ["qam16", "qam64"])]
        scheme: String,
    },
}

#[derive(Debug)]
pub enum Failure {
    Error(String),
    Usage(String),
    Trap(String),
    Budget(String),
    LowConfidence(usize),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Error(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Trap(_) => 3,
            Failure::Budget(_) => 4,
            Failure::LowConfidence(_) => 5,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Error(m) | Failure::Usage(m) | Failure::Trap(m) | Failure::Budget(m) => m.clone(),
            Failure::LowConfidence(n) => format!("{n} point(s) below the error target"),
        }
    }
}

fn err(e: impl ToString) -> Failure {
    Failure::Error(e.to_string())
}

impl From<ConfigFileError> for Failure {
    fn from(e: ConfigFileError) -> Self {
        match e {
            ConfigFileError::Io { .. } => Failure::Error(e.to_string()),
            ConfigFileError::Invalid { .. } => Failure::Usage(e.to_string()),
        }
    }
}

fn cluster_failure(e: &ClusterError, msg: String) -> Failure {
    match e {
        ClusterError::Trap { .. } => Failure::Trap(msg),
        ClusterError::BudgetExhausted(_) | ClusterError::Deadlock { .. } => Failure::Budget(msg),
        _ => Failure::Error(msg),
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e.cluster_error() {
            Some(c) => cluster_failure(c, e.to_string()),
            None if matches!(e, HarnessError::Config(_)) => Failure::Usage(e.to_string()),
            None => Failure::Error(e.to_string()),
        }
    }
}

struct Ctx {
    manifest: Manifest,
    out: PathBuf,
    seed: Option<u64>,
    workers: Option<usize>,
    strict: bool,
    mode: ExecMode,
}

impl Ctx {
    fn out_dir(&self) -> Result<&Path, Failure> {
        fs::create_dir_all(&self.out).map_err(|e| err(format!("{}: {e}", self.out.display())))?;
        Ok(&self.out)
    }

    fn emulation(&self) -> Result<Emulation, Failure> {
        let m = &self.manifest;
        let mut options = RunOptions::default();
        if let Some(s) = m.max_steps {
            options.max_steps = s;
        }
        if let Some(q) = m.quantum {
            options.quantum = q;
        }
        Ok(Emulation {
            cluster: m.cluster_config()?,
            latency: m.latency_table()?,
            mode: self.mode,
            options,
        })
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<(), Failure> {
    let mode: ExecMode = cli.mode.parse().map_err(Failure::Usage)?;
    match &cli.command {
        Command::Assemble { src } => return cmd_assemble(src, cli.out.as_deref()),
        Command::Disassemble { bin } => return cmd_disassemble(bin, cli.out.as_deref(), stdout),
        Command::Constellation { scheme } => {
            let m = match scheme.as_str() {
                "qam64" => sdremu_core::phy::Modulation::Qam64,
                _ => sdremu_core::phy::Modulation::Qam16,
            };
            return emit(&render_constellation(m), cli.out.as_deref(), stdout);
        }
        _ => {}
    }
    let Some(path) = cli.config.as_deref() else {
        return Err(Failure::Usage("this command needs --config PATH".into()));
    };
    let manifest = Manifest::load(path)?;
    let ctx = Ctx {
        out: cli
            .out
            .clone()
            .or_else(|| manifest.out.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        seed: cli.seed.or(manifest.seed),
        workers: cli.workers.or(manifest.workers),
        strict: cli.strict,
        mode,
        manifest,
    };
    match cli.command {
        Command::Run => cmd_run(&ctx, stdout),
        Command::KernelGen => cmd_kernel_gen(&ctx, stdout),
        Command::Ber => cmd_ber(&ctx, stdout),
        Command::Cycles => cmd_cycles(&ctx, stdout),
        _ => unreachable!(),
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn std::io::Write) -> Result<(), Failure> {
    match out {
        Some(p) => write_file(p, text).map_err(err),
        None => stdout.write_all(text.as_bytes()).map_err(err),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))
}

fn assemble_file(src: &Path) -> Result<ProgramImage, Failure> {
    let text = read_text(src)?;
    assemble(&text).map_err(|e| match &e.kind {
        AsmErrorKind::DuplicateLabel { name, first_line } => err(format!(
            "{}:{}: duplicate label `{name}` (first defined on line {first_line})",
            src.display(),
            e.line
        )),
        _ => err(format!("{}:{}", src.display(), e)),
    })
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("sym")
}

fn cmd_assemble(src: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let img = assemble_file(src)?;
    let out = out.map_or_else(|| src.with_extension("bin"), Path::to_path_buf);
    fs::write(&out, encode_image(&img)).map_err(|e| err(format!("{}: {e}", out.display())))?;
    write_file(&sidecar(&out), &render_symbols(&img.symbols)).map_err(err)
}

fn load_binary(bin: &Path) -> Result<ProgramImage, Failure> {
    let bytes = fs::read(bin).map_err(|e| err(format!("{}: {e}", bin.display())))?;
    let mut img = decode_image(&bytes).map_err(|e| err(format!("{}: {e}", bin.display())))?;
    let sym = sidecar(bin);
    if sym.exists() {
        img.symbols = parse_symbols(&read_text(&sym)?).map_err(|e| err(format!("{}: {e}", sym.display())))?;
    }
    Ok(img)
}

fn cmd_disassemble(bin: &Path, out: Option<&Path>, stdout: &mut dyn std::io::Write) -> Result<(), Failure> {
    let img = load_binary(bin)?;
    emit(&disassemble(&img), out, stdout)
}

fn render_run_report(r: &ClusterRunReport) -> String {
    let mut s = format!(
        "total_cycles {}\ntotal_instructions {}\n\nhart instructions cycles raw_stalls mem_stalls barrier_wait\n",
        r.total_cycles(),
        r.total_instructions()
    );
    for h in &r.rows {
        s.push_str(&format!(
            "{} {} {} {} {} {}\n",
            h.hart_id, h.instructions, h.cycles, h.raw_stalls, h.mem_stalls, h.barrier_wait
        ));
    }
    s
}

fn cmd_run(ctx: &Ctx, stdout: &mut dyn std::io::Write) -> Result<(), Failure> {
    let m = &ctx.manifest;
    let em = ctx.emulation()?;
    let (img, harts, problems) = match (&m.program, &m.kernel) {
        (Some(p), _) => {
            let img = if p.extension().is_some_and(|e| e == "s" || e == "S") {
                assemble_file(p)?
            } else {
                load_binary(p)?
            };
            (img, m.harts.unwrap_or(1), None)
        }
        (None, Some(spec)) => {
            let mut spec = spec.clone();
            if let Some(s) = ctx.seed {
                spec.seed = s;
            }
            let k = generate_kernel(spec.variant, spec.n_tx, spec.n_rx, spec.batch, spec.harts, &em.cluster)
                .map_err(err)?;
            (k.image, spec.harts, Some((k.layout, cycle_problems(&spec))))
        }
        (None, None) => return Err(Failure::Usage("manifest needs `program` or [kernel]".into())),
    };
    let mut c = Cluster::new(em.cluster, harts).map_err(|e| Failure::Usage(e.to_string()))?;
    c.load(&img).map_err(err)?;
    if let Some((layout, qs)) = &problems {
        load_problems(&c.mem, layout, qs).map_err(err)?;
    }
    let prog = Program::new(&img, &em.latency);
    let t0 = Instant::now();
    let report = run_cluster(&mut c, &prog, &em.latency, em.options, em.mode)
        .map_err(|e| cluster_failure(&e, e.to_string()))?;
    let wall = t0.elapsed().as_secs_f64();
    let mips = report.total_instructions() as f64 / wall.max(1e-9) / 1e6;
    let dir = ctx.out_dir()?;
    write_file(&dir.join("run_report.txt"), &render_run_report(&report)).map_err(err)?;
    write_file(&dir.join("run.meta"), &format!("wall_seconds {wall}\nmips {mips:.3}\n")).map_err(err)?;
    let _ = writeln!(
        stdout,
        "harts {}  cycles {}  instructions {}  emulated MIPS {mips:.2}",
        report.rows.len(),
        report.total_cycles(),
        report.total_instructions()
    );
    Ok(())
}

fn cmd_kernel_gen(ctx: &Ctx, stdout: &mut dyn std::io::Write) -> Result<(), Failure> {
    let Some(spec) = &ctx.manifest.kernel else {
        return Err(Failure::Usage("manifest needs a [kernel] table".into()));
    };
    let cl = ctx.manifest.cluster_config()?;
    let k = generate_kernel(spec.variant, spec.n_tx, spec.n_rx, spec.batch, spec.harts, &cl).map_err(err)?;
    let dir = ctx.out_dir()?;
    let stem = format!("{}_{}x{}", spec.variant, spec.n_tx, spec.n_rx);
    write_file(&dir.join(format!("{stem}.s")), &k.asm).map_err(err)?;
    let bin = dir.join(format!("{stem}.bin"));
    fs::write(&bin, encode_image(&k.image)).map_err(|e| err(format!("{}: {e}", bin.display())))?;
    write_file(&sidecar(&bin), &render_symbols(&k.image.symbols)).map_err(err)?;
    let layout = toml::to_string(&k.layout).map_err(err)?;
    write_file(&dir.join(format!("{stem}.layout.toml")), &layout).map_err(err)?;
    let _ = writeln!(
        stdout,
        "{stem}: {} instructions of text, {} bytes per hart",
        k.image.text.iter().map(|t| t.words.len()).sum::<usize>(),
        k.layout.batch * k.layout.record_bytes + k.layout.scratch_bytes
    );
    Ok(())
}

fn cmd_ber(ctx: &Ctx, stdout: &mut dyn std::io::Write) -> Result<(), Failure> {
    let Some(path) = &ctx.manifest.sweep else {
        return Err(Failure::Usage("manifest needs `sweep`".into()));
    };
    let mut cfg = load_sweep(path)?;
    if let Some(s) = ctx.seed {
        cfg.master_seed = s;
    }
    if let Some(w) = ctx.workers {
        cfg.workers = w;
    }
    cfg.emulation = ctx.emulation()?;
    let points = ber_sweep(&cfg)?;
    let dir = ctx.out_dir()?;
    write_ber_csv(&points, &dir.join("ber.csv")).map_err(err)?;
    let _ = writeln!(stdout, "{} {:?} {}x{}", cfg.variant, cfg.engine, cfg.n_tx, cfg.n_rx);
    let _ = writeln!(stdout, "{:>8} {:>10} {:>10} {:>12} {:>10} {:>9}", "snr_db", "ber", "errors", "bits", "trials", "erasures");
    let mut low = 0;
    for p in &points {
        let flag = if p.low_confidence(cfg.target_bit_errors) {
            low += 1;
            "  low-confidence"
        } else {
            ""
        };
        let _ = writeln!(
            stdout,
            "{:>8} {:>10.3e} {:>10} {:>12} {:>10} {:>9}{flag}",
            p.snr_db, p.ber, p.bit_errors, p.bits_total, p.trials, p.erasure_problems
        );
    }
    if low > 0 && ctx.strict {
        return Err(Failure::LowConfidence(low));
    }
    Ok(())
}

fn cmd_cycles(ctx: &Ctx, stdout: &mut dyn std::io::Write) -> Result<(), Failure> {
    let Some(spec) = &ctx.manifest.kernel else {
        return Err(Failure::Usage("manifest needs a [kernel] table".into()));
    };
    let em = ctx.emulation()?;
    let variants: Vec<Variant> = ctx.manifest.compare.clone().unwrap_or_else(|| vec![spec.variant]);
    let dir = ctx.out_dir()?.to_path_buf();
    let _ = writeln!(
        stdout,
        "{:>9} {:>12} {:>12} {:>10} {:>10} {:>8} {:>8} {:>8}",
        "variant", "instructions", "cycles", "raw", "memory", "issue_x", "cycle_x", "MIPS"
    );
    let mut base = None;
    let mut meta = String::new();
    for v in variants {
        let mut s = spec.clone();
        s.variant = v;
        if let Some(seed) = ctx.seed {
            s.seed = seed;
        }
        let r = cycle_report(&s, &em)?;
        write_file(&dir.join(format!("cycles_{v}.txt")), &render_cycle_report(&r)).map_err(err)?;
        meta.push_str(&format!("{v} wall_seconds {} mips {:.3}\n", r.wall.as_secs_f64(), r.mips()));
        let (i, c) = (r.total_instructions() as f64, r.total_cycles() as f64);
        let (bi, bc) = *base.get_or_insert((i, c));
        let _ = writeln!(
            stdout,
            "{v:>9} {:>12} {:>12} {:>10} {:>10} {:>8.2} {:>8.2} {:>8.2}",
            r.total_instructions(),
            r.total_cycles(),
            r.raw_stalls(),
            r.mem_stalls(),
            bi / i,
            bc / c,
            r.mips()
        );
    }
    write_file(&dir.join("cycles.meta"), &meta).map_err(err)
}
