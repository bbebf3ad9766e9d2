//! Command-line front end.
//!
//! Every command that writes to `--out PATH` also writes
//! `PATH.manifest.toml`, which records the resolved invocation together with
//! the model file's text. `csbpc rerun --manifest PATH.manifest.toml`
//! reproduces the outputs byte for byte.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::cellmodel::{infected_regime, phase_diagram, phase_diagram_csv};
use crate::config::{Model, ModelConfig};
use crate::env::JumpPath;
use crate::error::{Error, Result};
use crate::mechanisms::Mechanism;
use crate::montecarlo::{annealed_survival_series, mean_stderr, par_replicates, with_workers, Method};
use crate::quenched_ode::{default_ladder, solve_backward, survival_general, survival_sandwich, DEFAULT_TOLERANCE};
use crate::quenched_stable::{quenched_laplace, quenched_survival, sample_feller_grid};
use crate::regimes::{classify, fit_rate};
use crate::rng::{derive_seed, stream};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "csbpc", version, about = "Branching processes with multiplicative catastrophes")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
struct Common {
    /// TOML model file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo replicates (or sampled paths).
    #[arg(long)]
    n: Option<usize>,
    /// Horizons as `A:B:STEP` (inclusive) or a comma list.
    #[arg(long = "t-grid")]
    t_grid: Option<String>,
    /// `plain`, `esscher:LAMBDA`, `esscher:auto` or `feller_exact`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output file; a manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Regime, exponential rate and polynomial exponent of the survival probability.
    Classify(Common),
    /// Annealed survival probabilities over a time grid.
    Survival {
        #[command(flatten)]
        common: Common,
        /// Survival along one environment path instead of the annealed average.
        #[arg(long)]
        quenched: bool,
        /// Environment path CSV (`time,log_multiplier`) for `--quenched`.
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Survival estimates for rate fitting.
    Rates {
        #[command(flatten)]
        common: Common,
        /// Append the fitted and predicted rate and exponent.
        #[arg(long)]
        fit: bool,
    },
    /// Backward ODE against closed forms on sampled paths.
    OdeCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Regime map of the symmetric two-point cell model.
    PhaseDiagram {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        gr: Option<String>,
    },
    /// Environment paths and exact Feller trajectories.
    Simulate(Common),
    /// Repeat a run recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        /// Write outputs here instead of the recorded path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Fully resolved invocation; this is what a manifest stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invocation {
    pub command: String,
    pub seed: u64,
    pub n: Option<usize>,
    pub t_grid: Option<String>,
    pub method: Option<String>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub quenched: bool,
    #[serde(default)]
    pub fit: bool,
    pub tol: Option<f64>,
    pub theta: Option<String>,
    pub gr: Option<String>,
    pub out: Option<PathBuf>,
    /// Text of the model file.
    pub config: Option<String>,
    /// Text of the `--path` file.
    pub path_csv: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: String,
    outputs: Vec<PathBuf>,
    invocation: Invocation,
}

/// What a command produced: the main table, optional extra tables keyed by a
/// file-name tag, and human-readable lines for the terminal.
#[derive(Debug, Default)]
struct Output {
    main: String,
    extras: Vec<(String, String)>,
    notes: Vec<String>,
}

/// `{:.16e}`: 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Compact form for terminal lines (10 significant digits, shortest repr).
pub fn fmt_short(x: f64) -> String {
    let r: f64 = format!("{x:.9e}").parse().unwrap_or(x);
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}

/// Parses `A:B:STEP` (inclusive of `B` up to rounding) or `a,b,c`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("malformed grid `{s}` (expected A:B:STEP or a,b,c)"));
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let [a, b, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0 && a.is_finite() && b >= a && b.is_finite()) {
            return Err(bad());
        }
        let k = ((b - a) / step + 1e-9).floor() as usize;
        Ok((0..=k).map(|i| a + i as f64 * step).collect())
    } else {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(bad());
        }
        Ok(v)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

impl Invocation {
    fn from_cmd(cmd: Cmd) -> Result<Self> {
        let blank = |command: &str, c: Common| -> Result<Invocation> {
            let config = c.config.as_deref().map(read).transpose()?;
            let defaults = match &config {
                Some(text) => ModelConfig::parse(text)?.run.unwrap_or_default(),
                None => Default::default(),
            };
            Ok(Invocation {
                command: command.into(),
                seed: c.seed.or(defaults.seed).unwrap_or(1),
                n: c.n.or(defaults.n),
                t_grid: c.t_grid.or(defaults.t_grid),
                method: c.method.or(defaults.method),
                workers: c.workers.or(defaults.workers),
                quenched: false,
                fit: false,
                tol: None,
                theta: None,
                gr: None,
                out: c.out,
                config,
                path_csv: None,
            })
        };
        match cmd {
            Cmd::Classify(c) => blank("classify", c),
            Cmd::Survival {
                common,
                quenched,
                path,
            } => {
                if path.is_some() && !quenched {
                    return Err(Error::Config("--path only applies with --quenched".into()));
                }
                if quenched && common.method.is_some() {
                    return Err(Error::Config("--method has no effect with --quenched".into()));
                }
                let mut inv = blank("survival", common)?;
                inv.quenched = quenched;
                inv.path_csv = path.as_deref().map(read).transpose()?;
                Ok(inv)
            }
            Cmd::Rates { common, fit } => {
                let mut inv = blank("rates", common)?;
                inv.fit = fit;
                Ok(inv)
            }
            Cmd::OdeCheck { common, tol } => {
                if common.method.is_some() {
                    return Err(Error::Config("ode-check takes no --method".into()));
                }
                let mut inv = blank("ode-check", common)?;
                inv.tol = tol;
                Ok(inv)
            }
            Cmd::PhaseDiagram { common, theta, gr } => {
                if common.method.is_some() || common.n.is_some() || common.t_grid.is_some() {
                    return Err(Error::Config(
                        "phase-diagram takes only --theta, --gr, --out and --config".into(),
                    ));
                }
                let mut inv = blank("phase-diagram", common)?;
                inv.theta = Some(theta.unwrap_or_else(|| "0.01:0.49:0.01".into()));
                inv.gr = Some(gr.unwrap_or_else(|| "0:2:0.02".into()));
                Ok(inv)
            }
            Cmd::Simulate(c) => blank("simulate", c),
            Cmd::Rerun { .. } => unreachable!("handled by the dispatcher"),
        }
    }

    fn model(&self) -> Result<Model> {
        let text = self
            .config
            .as_deref()
            .ok_or_else(|| Error::Config(format!("`{}` needs --config", self.command)))?;
        let cfg = ModelConfig::parse(text)?;
        if cfg.is_empty() {
            return Err(Error::Config(
                "empty model file: expected [mechanism] and [environment], or [cell]".into(),
            ));
        }
        cfg.resolve()
    }

    fn grid(&self, default: &str) -> Result<Vec<f64>> {
        parse_grid(self.t_grid.as_deref().unwrap_or(default))
    }

    fn method(&self, default: Method) -> Result<Method> {
        self.method.as_deref().map_or(Ok(default), str::parse)
    }

    fn execute(&self) -> Result<Output> {
        with_workers(self.workers, || match self.command.as_str() {
            "classify" => self.classify(),
            "survival" if self.quenched => self.survival_quenched(),
            "survival" => self.survival_annealed(),
            "rates" => self.rates(),
            "ode-check" => self.ode_check(),
            "phase-diagram" => self.phase_diagram(),
            "simulate" => self.simulate(),
            other => Err(Error::Config(format!("unknown command `{other}`"))),
        })?
    }

    fn classify(&self) -> Result<Output> {
        let model = self.model()?;
        let r = classify(&model.spec, model.mechanism.growth(), model.beta())?;
        let opt = |x: Option<f64>| x.map(fmt_f).unwrap_or_default();
        let mut out = Output {
            main: format!(
                "label,phi_prime_0,phi_prime_1,tau,exp_rate,poly_exponent\n{},{},{},{},{},{}\n",
                r.label,
                fmt_f(r.phi_prime_0),
                opt(r.phi_prime_1),
                opt(r.tau),
                fmt_f(r.exp_rate),
                fmt_f(r.poly_exponent)
            ),
            ..Default::default()
        };
        out.notes.push(format!(
            "{} rate={} kappa={}",
            r.label,
            fmt_short(r.exp_rate),
            fmt_short(r.poly_exponent)
        ));
        if let Some(tau) = r.tau {
            out.notes.push(format!("tau={}", fmt_short(tau)));
        }
        if let Some(cell) = &model.cell {
            let inf = infected_regime(cell)?;
            out.notes.push(format!(
                "infected cells: E[N*_t] ~ {} growth_rate={}",
                inf.form(),
                fmt_short(inf.growth_rate)
            ));
        }
        Ok(out)
    }

    fn survival_annealed(&self) -> Result<Output> {
        let model = self.model()?;
        let ts = self.grid("1:10:1")?;
        let n = self.n.unwrap_or(10_000);
        match &model.mechanism {
            Mechanism::Stable(m) => {
                let method = self.method(Method::Plain)?;
                let est = annealed_survival_series(m, model.x0, &model.spec, &ts, method, n, self.seed)?;
                let mut main = String::from("t,estimate,stderr,method\n");
                for e in &est {
                    let _ = writeln!(main, "{},{},{},{}", fmt_f(e.horizon), fmt_f(e.value), fmt_f(e.stderr), e.method);
                }
                Ok(Output {
                    main,
                    ..Default::default()
                })
            }
            Mechanism::General(_) => {
                if self.method.is_some() {
                    return Err(Error::Config(
                        "general mechanisms are averaged with plain sampling only".into(),
                    ));
                }
                let horizon = ts.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
                let ladder = default_ladder();
                let rows = par_replicates(n, |i| {
                    let path = model.spec.sample_path(horizon, &mut stream(self.seed, i))?;
                    ts.iter()
                        .map(|&t| {
                            let b = survival_general(&model.mechanism, model.x0, t, &path, &ladder, DEFAULT_TOLERANCE)?;
                            Ok((b.lower, b.upper))
                        })
                        .collect::<Result<Vec<_>>>()
                })?;
                let mut main = String::from("t,lower,lower_stderr,upper,upper_stderr\n");
                for (k, &t) in ts.iter().enumerate() {
                    let lo: Vec<f64> = rows.iter().map(|r| r[k].0).collect();
                    let hi: Vec<f64> = rows.iter().map(|r| r[k].1).collect();
                    let (lm, ls) = mean_stderr(&lo);
                    let (hm, hs) = mean_stderr(&hi);
                    let _ = writeln!(main, "{},{},{},{},{}", fmt_f(t), fmt_f(lm), fmt_f(ls), fmt_f(hm), fmt_f(hs));
                }
                Ok(Output {
                    main,
                    ..Default::default()
                })
            }
        }
    }

    fn environment_path(&self, model: &Model, horizon: f64) -> Result<JumpPath> {
        match &self.path_csv {
            Some(text) => JumpPath::from_csv(text, horizon, model.mechanism.growth()),
            None => model.spec.sample_path(horizon, &mut stream(self.seed, 0)),
        }
    }

    fn survival_quenched(&self) -> Result<Output> {
        let model = self.model()?;
        let ts = self.grid("1:10:1")?;
        let horizon = ts.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        let path = self.environment_path(&model, horizon)?;
        let mut main = String::new();
        match &model.mechanism {
            Mechanism::Stable(m) => {
                main.push_str("t,survival\n");
                for &t in &ts {
                    let _ = writeln!(main, "{},{}", fmt_f(t), fmt_f(quenched_survival(m, model.x0, t, &path)?));
                }
            }
            Mechanism::General(g) => {
                main.push_str("t,lower,upper,sandwich_lower,sandwich_upper\n");
                let ladder = default_ladder();
                for &t in &ts {
                    let b = survival_general(&model.mechanism, model.x0, t, &path, &ladder, DEFAULT_TOLERANCE)?;
                    let (sl, su) = match survival_sandwich(g, model.x0, t, &path) {
                        Ok((a, b)) => (fmt_f(a), fmt_f(b)),
                        Err(Error::Unsupported(_)) => (String::new(), String::new()),
                        Err(e) => return Err(e),
                    };
                    let _ = writeln!(main, "{},{},{},{},{}", fmt_f(t), fmt_f(b.lower), fmt_f(b.upper), sl, su);
                }
            }
        }
        Ok(Output {
            main,
            extras: vec![("path".into(), path.to_csv())],
            notes: vec![],
        })
    }

    fn rates(&self) -> Result<Output> {
        let model = self.model()?;
        let m = model.stable()?;
        let ts = self.grid("10:60:10")?;
        let method = self.method(Method::EsscherAuto)?;
        let n = self.n.unwrap_or(10_000);
        let est = annealed_survival_series(m, model.x0, &model.spec, &ts, method, n, self.seed)?;
        let mut main = String::from("t,estimate,stderr,method\n");
        for e in &est {
            let _ = writeln!(main, "{},{},{},{}", fmt_f(e.horizon), fmt_f(e.value), fmt_f(e.stderr), e.method);
        }
        let mut notes = vec![];
        if self.fit {
            let series: Vec<_> = est.iter().map(|e| (e.horizon, e.value, e.stderr)).collect();
            let f = fit_rate(&series)?;
            let p = classify(&model.spec, m.g, m.beta)?;
            // estimate column holds ρ, stderr column holds κ
            let _ = writeln!(main, "fit,{},{},r2={}", fmt_f(f.rho_hat), fmt_f(f.kappa_hat), fmt_f(f.r2));
            let _ = writeln!(main, "prediction,{},{},{}", fmt_f(p.exp_rate), fmt_f(p.poly_exponent), p.label);
            notes.push(format!(
                "fit rho={} kappa={} | predicted {} rho={} kappa={}",
                fmt_short(f.rho_hat),
                fmt_short(f.kappa_hat),
                p.label,
                fmt_short(p.exp_rate),
                fmt_short(p.poly_exponent)
            ));
        }
        Ok(Output {
            main,
            extras: vec![],
            notes,
        })
    }

    fn ode_check(&self) -> Result<Output> {
        let model = self.model()?;
        let ts = self.grid("1,5,20")?;
        let n = self.n.unwrap_or(100);
        let tol = self.tol.unwrap_or(DEFAULT_TOLERANCE);
        let horizon = ts.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        let paths = par_replicates(n, |i| model.spec.sample_path(horizon, &mut stream(self.seed, i)))?;
        let mut main = String::new();
        match &model.mechanism {
            Mechanism::Stable(m) => {
                main.push_str("t,lambda,max_rel_err,mean_rel_err,paths\n");
                for &t in &ts {
                    for lam in [0.1, 1.0, 10.0] {
                        let errs = par_replicates(n, |i| {
                            let p = &paths[i as usize];
                            let v = solve_backward(&model.mechanism, lam, t, p, tol)?.v0;
                            let exact = -quenched_laplace(m, 1.0, lam, t, p)?.ln();
                            Ok(((v - exact) / exact).abs())
                        })?;
                        let max = errs.iter().copied().fold(0.0, f64::max);
                        let _ = writeln!(main, "{},{},{},{},{}", fmt_f(t), fmt_f(lam), fmt_f(max), fmt_f(mean_stderr(&errs).0), n);
                    }
                }
            }
            Mechanism::General(g) => {
                main.push_str("t,path,lower,upper,sandwich_lower,sandwich_upper,inside\n");
                let ladder = default_ladder();
                for &t in &ts {
                    let rows = par_replicates(n, |i| {
                        let p = &paths[i as usize];
                        let b = survival_general(&model.mechanism, model.x0, t, p, &ladder, tol)?;
                        let (lo, hi) = survival_sandwich(g, model.x0, t, p)?;
                        Ok((b.lower, b.upper, lo, hi))
                    })?;
                    for (i, (l, u, lo, hi)) in rows.into_iter().enumerate() {
                        let inside = lo <= l && l <= u && u <= hi;
                        let _ = writeln!(main, "{},{},{},{},{},{},{}", fmt_f(t), i, fmt_f(l), fmt_f(u), fmt_f(lo), fmt_f(hi), inside);
                    }
                }
            }
        }
        Ok(Output {
            main,
            ..Default::default()
        })
    }

    fn phase_diagram(&self) -> Result<Output> {
        let thetas = parse_grid(self.theta.as_deref().unwrap_or("0.01:0.49:0.01"))?;
        let grs = parse_grid(self.gr.as_deref().unwrap_or("0:2:0.02"))?;
        Ok(Output {
            main: phase_diagram_csv(&phase_diagram(&thetas, &grs)?),
            ..Default::default()
        })
    }

    fn simulate(&self) -> Result<Output> {
        let model = self.model()?;
        let mut ts = self.grid("0:10:0.5")?;
        ts.sort_by(f64::total_cmp);
        let horizon = ts.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
        let n = self.n.unwrap_or(1);
        let feller = model.mechanism.as_stable().filter(|m| m.is_feller());
        let sims = par_replicates(n, |i| {
            let mut rng = stream(self.seed, i);
            let path = model.spec.sample_path(horizon, &mut rng)?;
            let ys = match feller {
                Some(m) => {
                    let mut branching = stream(derive_seed(self.seed, 1), i);
                    Some(sample_feller_grid(m, model.x0, &ts, &path, &mut branching)?)
                }
                None => None,
            };
            Ok((path, ys))
        })?;
        let mut main = String::from(if feller.is_some() { "replicate,t,K_t,Y_t\n" } else { "replicate,t,K_t\n" });
        let mut extras = vec![];
        for (i, (path, ys)) in sims.iter().enumerate() {
            for (k, &t) in ts.iter().enumerate() {
                let _ = write!(main, "{},{},{}", i, fmt_f(t), fmt_f(path.k_at(t)?));
                if let Some(ys) = ys {
                    let _ = write!(main, ",{}", fmt_f(ys[k]));
                }
                main.push('\n');
            }
            extras.push((format!("path{i}"), path.to_csv()));
        }
        let notes = if feller.is_none() {
            vec!["Y_t is sampled only for stable mechanisms with beta = 1".into()]
        } else {
            vec![]
        };
        Ok(Output { main, extras, notes })
    }
}

/// `dir/name.csv` + `tag` → `dir/name.tag.csv`.
fn extra_path(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}.{tag}.{ext}"))
}

/// `PATH` → `PATH.manifest.toml`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.toml");
    PathBuf::from(s)
}

fn emit(inv: &Invocation, output: Output) -> Result<()> {
    for note in &output.notes {
        println!("{note}");
    }
    let Some(out) = &inv.out else {
        print!("{}", output.main);
        return Ok(());
    };
    let mut outputs = vec![out.clone()];
    write(out, &output.main)?;
    for (tag, text) in &output.extras {
        let p = extra_path(out, tag);
        write(&p, text)?;
        outputs.push(p);
    }
    let manifest = Manifest {
        version: VERSION.into(),
        outputs,
        invocation: inv.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write(&manifest_path(out), &text)
}

fn dispatch(args: Vec<OsString>) -> Result<()> {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(Error::Config(e.to_string()));
        }
    };
    let inv = match cli.command {
        Cmd::Rerun { manifest, out } => {
            let m: Manifest = toml::from_str(&read(&manifest)?).map_err(|e| Error::Config(format!("bad manifest: {e}")))?;
            let mut inv = m.invocation;
            if out.is_some() {
                inv.out = out;
            }
            inv
        }
        cmd => Invocation::from_cmd(cmd)?,
    };
    let output = inv.execute()?;
    emit(&inv, output)
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    match dispatch(args.into_iter().map(Into::into).collect()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("csbpc: {e}");
            2
        }
    }
}
