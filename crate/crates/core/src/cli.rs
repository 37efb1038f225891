//! Command-line front end: argument parsing, config files, manifests and the
//! subcommands that drive the solvers.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::eigensolve::{self, ConvergeOptions, SolveOptions, TruncationPolicy};
use crate::error::{Error, Result};
use crate::lowdim::{self, Dimension};
use crate::selfconsistent::{self, BranchFamily, FamilyOptions, ResonanceParams, ScOptions, ScatteringModel};
use crate::trapgeom::{self, TrapGeometry};
use crate::wavefn::{self, Wavefunction};

/// Atomic mass unit in kg.
const AMU: f64 = 1.660_539_066_60e-27;

#[derive(Parser, Debug)]
#[command(name = "axitrap", version, about = "Two atoms in an axially symmetric harmonic trap")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Lowest levels over a grid of a/d.
    #[command(args_override_self = true)]
    Spectrum(SpectrumArgs),
    /// Full spectrum next to the renormalized 1D or 2D model.
    #[command(args_override_self = true)]
    CompareLowdim(CompareArgs),
    /// Fit of the lowest level to c0 + c2·Λ² over a grid of A.
    #[command(args_override_self = true)]
    BoundState(BoundStateArgs),
    /// Self-consistent levels over a magnetic-field grid.
    #[command(args_override_self = true)]
    Feshbach(FeshbachArgs),
    /// rψ(x, 0, z) on a rectangular grid.
    #[command(args_override_self = true)]
    Wavefunction(WavefunctionArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Unit {
    Hz,
    HbarOmega,
}

/// A parameter grid: `start:stop:count`, a comma list, or one value.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub text: String,
    pub values: Vec<f64>,
}

pub fn parse_grid(text: &str) -> std::result::Result<Grid, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("empty grid".into());
    }
    let num = |s: &str| -> std::result::Result<f64, String> {
        let v: f64 = s.trim().parse().map_err(|_| format!("bad number `{s}` in grid `{t}`"))?;
        if !v.is_finite() {
            return Err(format!("non-finite value in grid `{t}`"));
        }
        Ok(v)
    };
    let values = if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid `{t}` is not start:stop:count"));
        }
        let (start, stop) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2].trim().parse().map_err(|_| format!("bad count in grid `{t}`"))?;
        match count {
            0 => return Err(format!("grid `{t}` is empty")),
            1 => vec![start],
            _ => (0..count)
                .map(|i| {
                    if i + 1 == count {
                        stop
                    } else {
                        start + (stop - start) * i as f64 / (count - 1) as f64
                    }
                })
                .collect(),
        }
    } else {
        t.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<std::result::Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(format!("grid `{t}` is empty"));
    }
    Ok(Grid {
        text: t.to_string(),
        values,
    })
}

fn parse_dimension(s: &str) -> std::result::Result<Dimension, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Flat `key = value` file; keys are long option names. Command-line flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output CSV, `-` for stdout. The manifest is written next to it as <out>.manifest.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Energy unit of the output columns.
    #[arg(long, value_enum, default_value_t = Unit::HbarOmega)]
    pub unit: Unit,
}

#[derive(Args, Debug, Clone)]
pub struct TrapArgs {
    /// Anisotropy A = ωz/ω⊥.
    #[arg(long = "A")]
    pub anisotropy: Option<f64>,
    /// Mean trap frequency ω/2π in Hz.
    #[arg(long)]
    pub omega_hz: Option<f64>,
    /// Radial trap frequency in Hz (with --nu-z, replaces --A and --omega-hz).
    #[arg(long)]
    pub nu_perp: Option<f64>,
    /// Axial trap frequency in Hz.
    #[arg(long)]
    pub nu_z: Option<f64>,
    /// Atomic mass in u.
    #[arg(long)]
    pub mass_amu: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct BasisArgs {
    /// Highest radial index (starting value with --auto-converge).
    #[arg(long, default_value_t = 32)]
    pub n_max: usize,
    /// Highest partial wave (starting value with --auto-converge).
    #[arg(long, default_value_t = 32)]
    pub l_max: usize,
    /// Refine the basis until the requested levels are stable to --tol.
    #[arg(long)]
    pub auto_converge: bool,
    /// Convergence tolerance on the energies in ħω.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Largest basis dimension tried by --auto-converge.
    #[arg(long, default_value_t = 200_000)]
    pub max_dimension: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    /// Grid of a/d.
    #[arg(long = "a", value_parser = parse_grid, allow_hyphen_values = true)]
    pub a_grid: Grid,
    /// Number of levels.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[command(flatten)]
    pub basis: BasisArgs,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    /// Grid of a/d.
    #[arg(long = "a", value_parser = parse_grid, allow_hyphen_values = true)]
    pub a_grid: Grid,
    /// Number of full-solver levels.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Model dimension, 1d or 2d; defaults to 1d for A < 1 and 2d otherwise.
    #[arg(long, value_parser = parse_dimension)]
    pub dimension: Option<Dimension>,
    /// Levels at or below this energy (ħω) get no deviation.
    #[arg(long, default_value_t = 0.8)]
    pub e_min: f64,
    #[command(flatten)]
    pub basis: BasisArgs,
}

#[derive(Args, Debug, Clone)]
pub struct BoundStateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scattering length a/d.
    #[arg(long = "a", allow_hyphen_values = true)]
    pub a_over_d: f64,
    /// Grid of anisotropies.
    #[arg(long = "A", value_parser = parse_grid)]
    pub a_grid: Grid,
    /// Mean trap frequency ω/2π in Hz, only needed for --unit hz.
    #[arg(long)]
    pub omega_hz: Option<f64>,
    #[command(flatten)]
    pub basis: BasisArgs,
}

#[derive(Args, Debug, Clone)]
pub struct FeshbachArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    /// Magnetic-field grid in mT.
    #[arg(long = "B", value_parser = parse_grid, allow_hyphen_values = true)]
    pub b_grid: Grid,
    /// Number of levels.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Radial cutoff of the fixed basis behind the level curves.
    #[arg(long, default_value_t = 32)]
    pub n_max: usize,
    #[arg(long, default_value_t = 32)]
    pub l_max: usize,
    /// Sample angles for the level curves.
    #[arg(long, default_value_t = 96)]
    pub samples: usize,
    /// Smallest positive a/d covered by the lowest level curve. Lower it when
    /// the sweep reaches deeply bound molecules.
    #[arg(long, default_value_t = 0.25)]
    pub a_min: f64,
    /// a_eff table (`E a` or `E B a`, lengths in m).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Energy-independent a_eff in m.
    #[arg(long, allow_hyphen_values = true)]
    pub a_eff: Option<f64>,
    /// Background scattering length in m.
    #[arg(long, allow_hyphen_values = true)]
    pub a_bg: Option<f64>,
    /// Resonance width Γ₀ in ħω.
    #[arg(long)]
    pub gamma0: Option<f64>,
    /// Magnetic moment difference δμ in ħω per mT.
    #[arg(long, allow_hyphen_values = true)]
    pub dmu: Option<f64>,
    /// Resonance position B₀ in mT.
    #[arg(long, allow_hyphen_values = true)]
    pub b0: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct WavefunctionArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trap: TrapArgs,
    /// Scattering length a/d.
    #[arg(long = "a", allow_hyphen_values = true)]
    pub a_over_d: f64,
    /// Level index, 0 for the lowest.
    #[arg(long, default_value_t = 0)]
    pub level: usize,
    /// Half-width of the x axis in d.
    #[arg(long, default_value_t = 5.0)]
    pub x_extent: f64,
    /// Half-width of the z axis in d.
    #[arg(long, default_value_t = 5.0)]
    pub z_extent: f64,
    #[arg(long, default_value_t = 101)]
    pub nx: usize,
    #[arg(long, default_value_t = 101)]
    pub nz: usize,
    /// Write a z-by-x matrix instead of x,z,r_psi rows.
    #[arg(long)]
    pub matrix: bool,
    #[command(flatten)]
    pub basis: BasisArgs,
}

/// Turns a `key = value` file into `--key=value` arguments. `true` gives a
/// bare flag and `false` drops the key.
pub fn config_args(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::Parse(format!("config line {}: missing key", lineno + 1)));
        }
        if key == "config" {
            continue;
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => out.push(format!("--{key}={value}")),
        }
    }
    Ok(out)
}

fn try_parse(argv: &[OsString]) -> Result<Option<Cli>> {
    match Cli::try_parse_from(argv) {
        Ok(cli) => Ok(Some(cli)),
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                print!("{}", e.render());
                Ok(None)
            }
            _ => {
                let text = e.render().to_string();
                let text = text.trim_end();
                Err(Error::Usage(text.strip_prefix("error: ").unwrap_or(text).to_string()))
            }
        },
    }
}

/// Value of `--config` in `argv`, if present.
fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(2);
    while let Some(arg) = it.next() {
        let text = arg.to_string_lossy();
        if text == "--" {
            break;
        }
        if text == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = text.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Parses `args` (program name first), merging a `--config` file under the
/// command-line flags. `None` means help or version was printed.
pub fn parse(args: impl IntoIterator<Item = impl Into<OsString>>) -> Result<Option<Cli>> {
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let Some(path) = config_path(&argv) else {
        return try_parse(&argv);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let extra = config_args(&text)?;
    // the subcommand is the first argument after the program name
    let mut merged = argv[..2].to_vec();
    merged.extend(extra.into_iter().map(OsString::from));
    merged.extend(argv[2..].iter().cloned());
    try_parse(&merged)
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::CompareLowdim(_) => "compare-lowdim",
            Command::BoundState(_) => "bound-state",
            Command::Feshbach(_) => "feshbach",
            Command::Wavefunction(_) => "wavefunction",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Spectrum(a) => &a.common,
            Command::CompareLowdim(a) => &a.common,
            Command::BoundState(a) => &a.common,
            Command::Feshbach(a) => &a.common,
            Command::Wavefunction(a) => &a.common,
        }
    }
}

/// Resolved trap parameters.
#[derive(Debug, Clone, Copy)]
pub struct Trap {
    pub anisotropy: f64,
    /// ω in rad/s when known.
    pub omega: Option<f64>,
    /// Full geometry when the mass is known too.
    pub geometry: Option<TrapGeometry>,
}

impl TrapArgs {
    pub fn resolve(&self) -> Result<Trap> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let (anisotropy, omega) = match (self.nu_perp, self.nu_z) {
            (Some(np), Some(nz)) => {
                if !(np > 0.0 && nz > 0.0) {
                    return Err(Error::Usage("trap frequencies must be positive".into()));
                }
                let a = nz / np;
                if let Some(given) = self.anisotropy {
                    if (given - a).abs() > 1e-12 * a {
                        return Err(Error::Usage(format!("--A {given} contradicts --nu-z/--nu-perp = {a}")));
                    }
                }
                let w = two_pi * ((2.0 * np * np + nz * nz) / 3.0).sqrt();
                if let Some(hz) = self.omega_hz {
                    if (two_pi * hz - w).abs() > 1e-12 * w {
                        return Err(Error::Usage(format!("--omega-hz {hz} contradicts the trap frequencies")));
                    }
                }
                (a, Some(w))
            }
            (None, None) => {
                let a = self
                    .anisotropy
                    .ok_or_else(|| Error::Usage("give --A or both --nu-perp and --nu-z".into()))?;
                (a, self.omega_hz.map(|hz| two_pi * hz))
            }
            _ => return Err(Error::Usage("--nu-perp and --nu-z go together".into())),
        };
        if !(anisotropy > 0.0 && anisotropy.is_finite()) {
            return Err(Error::Usage(format!("--A must be positive, got {anisotropy}")));
        }
        if let Some(w) = omega {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Usage("--omega-hz must be positive".into()));
            }
        }
        let geometry = match (omega, self.mass_amu) {
            (Some(w), Some(m)) => {
                let wp = w * trapgeom::omega_perp_ratio(anisotropy);
                Some(TrapGeometry::from_frequencies(wp, anisotropy * wp, m * AMU)?)
            }
            _ => None,
        };
        Ok(Trap {
            anisotropy,
            omega,
            geometry,
        })
    }
}

impl BasisArgs {
    pub fn policy(&self) -> TruncationPolicy {
        if self.auto_converge {
            TruncationPolicy::Auto(ConvergeOptions {
                tol_e: self.tol,
                start: (self.n_max, self.l_max),
                max_dimension: self.max_dimension,
                solve: SolveOptions::default(),
            })
        } else {
            TruncationPolicy::Fixed {
                n_max: self.n_max,
                l_max: self.l_max,
            }
        }
    }

    fn echo(&self, m: &mut Manifest) {
        m.push("n-max", self.n_max);
        m.push("l-max", self.l_max);
        m.push("auto-converge", self.auto_converge);
        m.push("tol", num(self.tol));
        m.push("max-dimension", self.max_dimension);
    }
}

/// Echo of the resolved run parameters. The body is a valid config file, so a
/// manifest can be passed back through `--config` to repeat the run.
#[derive(Debug, Default, Clone)]
pub struct Manifest {
    pub subcommand: String,
    pub params: Vec<(String, String)>,
    pub results: Vec<(String, String)>,
}

impl Manifest {
    fn new(subcommand: &str) -> Self {
        Manifest {
            subcommand: subcommand.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.params.push((key.into(), value.to_string()));
    }

    pub fn result(&mut self, key: &str, value: impl Display) {
        self.results.push((key.into(), value.to_string()));
    }

    pub fn write(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# axitrap {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "# subcommand = {}", self.subcommand)?;
        for (k, v) in &self.params {
            writeln!(out, "{k} = {v}")?;
        }
        for (k, v) in &self.results {
            writeln!(out, "# result {k} = {v}")?;
        }
        Ok(())
    }
}

fn echo_common(m: &mut Manifest, c: &CommonArgs, threads: usize) {
    m.push("threads", threads);
    m.push("unit", c.unit.to_possible_value().unwrap().get_name());
}

fn echo_trap(m: &mut Manifest, trap: &Trap, args: &TrapArgs) {
    match (args.nu_perp, args.nu_z) {
        (Some(np), Some(nz)) => {
            m.push("nu-perp", num(np));
            m.push("nu-z", num(nz));
        }
        _ => {
            m.push("A", num(trap.anisotropy));
            if let Some(hz) = args.omega_hz {
                m.push("omega-hz", num(hz));
            }
        }
    }
    if let Some(mass) = args.mass_amu {
        m.push("mass-amu", num(mass));
    }
}

/// Shortest round-tripping form of a float.
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Multiplier from ħω to the requested output unit.
fn energy_scale(unit: Unit, omega: Option<f64>) -> Result<f64> {
    match unit {
        Unit::HbarOmega => Ok(1.0),
        Unit::Hz => omega
            .map(|w| w / (2.0 * std::f64::consts::PI))
            .ok_or_else(|| Error::Usage("--unit hz needs the trap frequency (--omega-hz or --nu-perp/--nu-z)".into())),
    }
}

fn output_paths(common: &CommonArgs, name: &str) -> (Option<PathBuf>, Option<PathBuf>) {
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    if out == Path::new("-") {
        return (None, None);
    }
    let mut manifest = out.clone().into_os_string();
    manifest.push(".manifest");
    (Some(out), Some(PathBuf::from(manifest)))
}

/// Writes the CSV and the manifest; stdout and stderr stand in for `--out -`.
fn emit(common: &CommonArgs, csv: &[u8], manifest: &Manifest) -> Result<()> {
    let mut text = Vec::new();
    manifest.write(&mut text)?;
    match output_paths(common, &manifest.subcommand) {
        (Some(out), Some(man)) => {
            fs::write(&out, csv)?;
            fs::write(&man, &text)?;
        }
        _ => {
            std::io::stdout().write_all(csv)?;
            std::io::stderr().write_all(&text)?;
        }
    }
    Ok(())
}

/// Entry point: parses `args` (program name first) and runs the subcommand.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString>>) -> Result<()> {
    let Some(cli) = parse(args)? else {
        return Ok(());
    };
    let threads = match cli.command.common().threads {
        Some(0) => return Err(Error::Usage("--threads must be at least 1".into())),
        Some(n) => n,
        None => rayon::current_num_threads(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| execute(&cli.command, threads))
}

fn execute(command: &Command, threads: usize) -> Result<()> {
    match command {
        Command::Spectrum(a) => spectrum(a, threads),
        Command::CompareLowdim(a) => compare_lowdim(a, threads),
        Command::BoundState(a) => bound_state(a, threads),
        Command::Feshbach(a) => feshbach(a, threads),
        Command::Wavefunction(a) => wavefunction(a, threads),
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Usage("--k must be at least 1".into()));
    }
    Ok(())
}

fn spectrum(args: &SpectrumArgs, threads: usize) -> Result<()> {
    check_k(args.k)?;
    let trap = args.trap.resolve()?;
    let scale = energy_scale(args.common.unit, trap.omega)?;
    let mut table = eigensolve::spectrum_vs_a(
        trap.anisotropy,
        &args.a_grid.values,
        args.k,
        &args.basis.policy(),
        &SolveOptions::default(),
        false,
    )?;
    let mut worst = 0.0f64;
    for row in &mut table.rows {
        row.energies.iter_mut().for_each(|e| *e *= scale);
        worst = worst.max(row.max_residual);
    }
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;

    let mut m = Manifest::new("spectrum");
    echo_common(&mut m, &args.common, threads);
    echo_trap(&mut m, &trap, &args.trap);
    m.push("a", &args.a_grid.text);
    m.push("k", args.k);
    args.basis.echo(&mut m);
    m.result("max_residual", format!("{worst:.3e}"));
    emit(&args.common, &csv, &m)
}

fn compare_lowdim(args: &CompareArgs, threads: usize) -> Result<()> {
    check_k(args.k)?;
    let trap = args.trap.resolve()?;
    let aniso = trap.anisotropy;
    let scale = energy_scale(args.common.unit, trap.omega)?;
    let dim = args
        .dimension
        .unwrap_or(if aniso < 1.0 { Dimension::One } else { Dimension::Two });
    let mismatch = match dim {
        Dimension::One => aniso >= 1.0,
        Dimension::Two => aniso <= 1.0,
    };
    if mismatch {
        eprintln!("warning: {} model used at A = {aniso}, outside its regime", dim.tag());
    }
    let table = eigensolve::spectrum_vs_a(
        aniso,
        &args.a_grid.values,
        args.k,
        &args.basis.policy(),
        &SolveOptions::default(),
        false,
    )?;
    let models = args.k + 1;

    let mut csv = Vec::new();
    let mut header = vec!["a_over_d".to_string()];
    header.extend((1..=args.k).map(|i| format!("E_{i}")));
    header.extend((1..=models).map(|i| format!("E{}_{i}", dim.tag())));
    header.extend((1..=args.k).map(|i| format!("dev_{i}")));
    header.extend(["max_dev", "n_max", "l_max"].map(String::from));
    writeln!(csv, "{}", header.join(","))?;
    let mut overall = f64::NAN;
    for row in &table.rows {
        let model = match lowdim::energies(dim, row.param, aniso, models) {
            Ok(levels) => levels.energies,
            Err(Error::Resonance { .. }) => vec![f64::NAN; models],
            Err(e) => return Err(e),
        };
        let devs = lowdim::deviations(&row.energies, &model, args.e_min);
        let worst = devs.iter().flatten().copied().fold(f64::NAN, f64::max);
        overall = overall.max(worst);
        let mut fields = vec![format!("{:.11e}", row.param)];
        fields.extend(row.energies.iter().map(|e| format!("{:.11e}", e * scale)));
        fields.extend(model.iter().map(|e| format!("{:.11e}", e * scale)));
        fields.extend(devs.iter().map(|d| format!("{:.11e}", d.unwrap_or(f64::NAN) * scale)));
        fields.push(format!("{:.11e}", worst * scale));
        fields.push(row.n_max.to_string());
        fields.push(row.l_max.to_string());
        writeln!(csv, "{}", fields.join(","))?;
    }

    let mut m = Manifest::new("compare-lowdim");
    echo_common(&mut m, &args.common, threads);
    echo_trap(&mut m, &trap, &args.trap);
    m.push("a", &args.a_grid.text);
    m.push("k", args.k);
    m.push("dimension", dim.tag());
    m.push("e-min", num(args.e_min));
    args.basis.echo(&mut m);
    m.result("max_dev", overall * scale);
    emit(&args.common, &csv, &m)
}

fn bound_state(args: &BoundStateArgs, threads: usize) -> Result<()> {
    let omega = args.omega_hz.map(|hz| 2.0 * std::f64::consts::PI * hz);
    let scale = energy_scale(args.common.unit, omega)?;
    if let Some(&bad) = args.a_grid.values.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Usage(format!("anisotropies must be positive, got {bad}")));
    }
    let fit = eigensolve::bound_state_fit(args.a_over_d, &args.a_grid.values, &args.basis.policy(), &SolveOptions::default())?;
    let mut csv = Vec::new();
    writeln!(csv, "A,Lambda,E_1,E_fit")?;
    for &(a, lam, e) in &fit.points {
        let model = fit.c0 + fit.c2 * lam * lam;
        writeln!(csv, "{a:.11e},{lam:.11e},{:.11e},{:.11e}", e * scale, model * scale)?;
    }

    let mut m = Manifest::new("bound-state");
    echo_common(&mut m, &args.common, threads);
    m.push("a", num(args.a_over_d));
    m.push("A", &args.a_grid.text);
    if let Some(hz) = args.omega_hz {
        m.push("omega-hz", num(hz));
    }
    args.basis.echo(&mut m);
    m.result("c0", fit.c0 * scale);
    m.result("c2", fit.c2 * scale);
    m.result("max_fit_residual", fit.max_residual * scale);
    emit(&args.common, &csv, &m)
}

fn scattering_model(args: &FeshbachArgs, geometry: &TrapGeometry) -> Result<ScatteringModel> {
    let resonance = [args.a_bg, args.gamma0, args.dmu, args.b0];
    let given = [args.table.is_some(), args.a_eff.is_some(), resonance.iter().any(Option::is_some)];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(Error::Usage(
            "give exactly one scattering model: --table, --a-eff, or --a-bg/--gamma0/--dmu/--b0".into(),
        ));
    }
    if let Some(path) = &args.table {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read table {}: {e}", path.display())))?;
        return selfconsistent::parse_table(&text, geometry.energy_unit());
    }
    if let Some(a) = args.a_eff {
        return Ok(ScatteringModel::constant(a));
    }
    match resonance {
        [Some(a_bg_m), Some(gamma0), Some(dmu_per_mt), Some(b0_mt)] => Ok(ScatteringModel::resonance(ResonanceParams {
            a_bg_m,
            gamma0,
            dmu_per_mt,
            b0_mt,
        })),
        _ => Err(Error::Usage("the resonance model needs all of --a-bg, --gamma0, --dmu and --b0".into())),
    }
}

fn feshbach(args: &FeshbachArgs, threads: usize) -> Result<()> {
    check_k(args.k)?;
    let trap = args.trap.resolve()?;
    let geometry = trap.geometry.ok_or_else(|| {
        Error::Usage("feshbach needs the trap frequency (--omega-hz or --nu-perp/--nu-z) and --mass-amu".into())
    })?;
    let scale = energy_scale(args.common.unit, trap.omega)?;
    let model = scattering_model(args, &geometry)?;
    let family = BranchFamily::build(
        trap.anisotropy,
        args.k,
        FamilyOptions {
            n_max: args.n_max,
            l_max: args.l_max,
            samples: args.samples,
            phi_min: args.a_min.atan(),
            ..FamilyOptions::default()
        },
    )?;
    let mut sweep = selfconsistent::feshbach_sweep(&family, &model, &args.b_grid.values, geometry.d, &ScOptions::default())?;
    sweep.reference *= scale;
    for row in &mut sweep.rows {
        row.solutions.iter_mut().for_each(|s| s.energy *= scale);
    }
    let mut csv = Vec::new();
    sweep.write_csv(&mut csv)?;

    let mut m = Manifest::new("feshbach");
    echo_common(&mut m, &args.common, threads);
    echo_trap(&mut m, &trap, &args.trap);
    m.push("B", &args.b_grid.text);
    m.push("k", args.k);
    m.push("n-max", args.n_max);
    m.push("l-max", args.l_max);
    m.push("samples", args.samples);
    m.push("a-min", num(args.a_min));
    if let Some(p) = &args.table {
        m.push("table", p.display());
    }
    let optional = [
        ("a-eff", args.a_eff),
        ("a-bg", args.a_bg),
        ("gamma0", args.gamma0),
        ("dmu", args.dmu),
        ("b0", args.b0),
    ];
    for (key, v) in optional {
        if let Some(v) = v {
            m.push(key, num(v));
        }
    }
    m.result("trap_length_m", num(geometry.d));
    m.result("holdout_error", format!("{:.3e}", family.holdout_error));
    emit(&args.common, &csv, &m)
}

fn wavefunction(args: &WavefunctionArgs, threads: usize) -> Result<()> {
    let trap = args.trap.resolve()?;
    let scale = energy_scale(args.common.unit, trap.omega)?;
    let (spec, eigen) = eigensolve::solve_point(
        trap.anisotropy,
        args.a_over_d,
        args.level + 1,
        &args.basis.policy(),
        &SolveOptions::default(),
    )?;
    let wf = Wavefunction::from_eigen(&spec, &eigen, args.level)?;
    let grid = wavefn::export_grid(&wf, args.level, args.x_extent, args.z_extent, (args.nx, args.nz))
        .map_err(|e| Error::Usage(e.to_string()))?;
    let mut csv = Vec::new();
    if args.matrix {
        grid.write_matrix(&mut csv)?;
    } else {
        grid.write_csv(&mut csv)?;
    }

    let mut m = Manifest::new("wavefunction");
    echo_common(&mut m, &args.common, threads);
    echo_trap(&mut m, &trap, &args.trap);
    m.push("a", num(args.a_over_d));
    m.push("level", args.level);
    m.push("x-extent", num(args.x_extent));
    m.push("z-extent", num(args.z_extent));
    m.push("nx", args.nx);
    m.push("nz", args.nz);
    m.push("matrix", args.matrix);
    args.basis.echo(&mut m);
    m.result("energy", eigen.values[args.level] * scale);
    m.result("basis", format!("{} {}", spec.n_max, spec.l_max));
    m.result("grid_norm", grid.norm());
    emit(&args.common, &csv, &m)
}
