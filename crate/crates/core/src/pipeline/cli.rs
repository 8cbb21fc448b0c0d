//! The `arealaw` command line.
//!
//! Exit status: 0 on success, 2 on a contract or witness failure, 3 on a
//! resource limit and 4 on a configuration error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{OneOrMany, RunConfig, SweepPoint};
use super::sweep::{run_sweep, write_outputs};
use super::witness::{read_bundle, write_bundle};
use super::{bootstrap_run, corollary2_check, low_rank_approx, BootstrapConfig, Witness};
use crate::agsp::{certify_agsp, chebyshev_agsp_from_eigen};
use crate::constructions::CERT_TOL;
use crate::entropy::{dmax, dmin, imax_seesaw, mutual_info, normalized_marginals, von_neumann_entropy, witness_margin};
use crate::error::{Error, Result};
use crate::linalg::dump::read_matrices;
use crate::linalg::{ComplexMatrix, SubState};
use crate::models::{solve, GroundSpace};

#[derive(Parser, Debug)]
#[command(name = "arealaw", version, about = "Certified smoothed max-information bounds for small gapped spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Entropy stack of the maximally mixed ground state across a cut.
    Measure(Common),
    /// Chebyshev AGSPs at doubling degrees with their certificates.
    Agsp {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 64)]
        max_degree: usize,
    },
    /// Runs the bootstrapping iteration and stores its witnesses.
    Bootstrap(Common),
    /// Low Schmidt rank approximation of the ground state.
    Lowrank(Common),
    /// Checks I(Ω) against the smoothed bound at ε = 1/|L|.
    Corollary2(Common),
    /// Cartesian sweep over models × n × |L| × ε.
    Sweep(Common),
    /// Runs the built-in invariant suite, or re-verifies a run's witnesses.
    Selftest {
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Number of sites left of the cut.
    #[arg(long)]
    cut: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    /// File, then environment, then flags.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let model = self.model.as_deref().ok_or_else(|| Error::Config("--model or --config is required".into()))?;
                let n = self.n.ok_or_else(|| Error::Config("--n or --config is required".into()))?;
                RunConfig::single(model, n, self.cut, self.epsilon.unwrap_or(0.2))
            }
        };
        if let Some(m) = &self.model {
            cfg.model.kind = OneOrMany::One(m.clone());
        }
        if let Some(n) = self.n {
            cfg.model.n = OneOrMany::One(n);
        }
        if let Some(c) = self.cut {
            cfg.cut.left = Some(OneOrMany::One(c));
        }
        if let Some(h) = self.h {
            cfg.model.h = h;
        }
        if let Some(e) = self.epsilon {
            cfg.bootstrap.epsilon = OneOrMany::One(e);
        }
        if let Some(s) = self.seed {
            cfg.bootstrap.seed = s;
        }
        cfg.apply_env()?;
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        // re-validate after overrides
        RunConfig::parse(&toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?)?;
        Ok(cfg)
    }

    fn single(&self) -> Result<(RunConfig, SweepPoint)> {
        let cfg = self.resolve()?;
        let mut pts = cfg.points();
        if pts.len() != 1 {
            return Err(Error::Config(format!("this command takes a single point but the config has {}; use sweep", pts.len())));
        }
        let p = pts.remove(0);
        for (left, n) in [(p.left, p.n)] {
            if left == 0 || left >= n {
                return Err(Error::Config(format!("cut: left size {left} must lie in 1..{n}")));
            }
        }
        Ok((cfg, p))
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(dir: Option<&Path>, name: &str, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("records serialize");
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{name}.json")), &text)?;
    }
    println!("{text}");
    Ok(())
}

fn setup(common: &Common) -> Result<(RunConfig, SweepPoint, GroundSpace, BootstrapConfig)> {
    let (cfg, p) = common.single()?;
    let bcfg = cfg.bootstrap_config(&p)?;
    let (_, gs) = solve(&p.chain()?)?;
    Ok((cfg, p, gs, bcfg))
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Measure(c) => {
            let (_, p, gs, bcfg) = setup(&c)?;
            let value = measure_json(&p, &gs, &bcfg)?;
            emit(c.out.as_deref(), "measure", &value)?;
            Ok(0)
        }
        Command::Agsp { common, max_degree } => {
            let (_, p, gs, bcfg) = setup(&common)?;
            let mut rows = Vec::new();
            let mut degree = 1;
            while degree <= max_degree {
                let a = chebyshev_agsp_from_eigen(&gs.eigen, &gs.spectral, degree, &bcfg.cut)?;
                let cert = certify_agsp(&a.k, &gs.pi_gs, &bcfg.cut, a.truncation_tol)?;
                rows.push(json!({
                    "certificate": a.certificate(),
                    "D2_Delta": a.shrink_product(),
                    "recertified": cert,
                }));
                if a.affine_fallback {
                    break;
                }
                degree *= 2;
            }
            let value = json!({ "point": p, "ground": gs.record(), "degrees": rows });
            emit(common.out.as_deref(), "agsp", &value)?;
            Ok(0)
        }
        Command::Bootstrap(c) => {
            let (cfg, p, gs, bcfg) = setup(&c)?;
            let run = bootstrap_run(&gs, &bcfg)?;
            let dir = cfg.output.dir.clone();
            write_bundle(&dir, &run.witnesses)?;
            let value = json!({
                "point": p,
                "ground": gs.record(),
                "delta": run.delta,
                "records": run.records,
                "halted_at": run.halted_at,
                "anomaly": run.anomaly,
                "smoothed": run.smoothed_record(),
                "distance": run.distance(),
                "initial": run.initial.record(),
                "witnesses": run.witnesses.iter().map(Witness::record).collect::<Vec<_>>(),
            });
            emit(Some(&dir), "bootstrap", &value)?;
            Ok(if run.anomaly.is_some() { 2 } else { 0 })
        }
        Command::Lowrank(c) => {
            let (cfg, p, gs, bcfg) = setup(&c)?;
            let lr = low_rank_approx(&gs, &bcfg)?;
            let value = json!({ "point": p, "ground": gs.record(), "lowrank": lr.record() });
            emit(Some(&cfg.output.dir), "lowrank", &value)?;
            Ok(0)
        }
        Command::Corollary2(c) => {
            let (cfg, p, gs, bcfg) = setup(&c)?;
            let (res, _) = corollary2_check(&gs, &bcfg)?;
            let value = json!({ "point": p, "ground": gs.record(), "corollary2": res });
            emit(Some(&cfg.output.dir), "corollary2", &value)?;
            Ok(0)
        }
        Command::Sweep(c) => {
            let cfg = c.resolve()?;
            let out = run_sweep(&cfg)?;
            write_outputs(&out, &cfg.output.dir)?;
            for r in &out.results {
                let row = &r.row;
                eprintln!("{} n={} L={} eps={} -> {}", row.model, row.n, row.left, row.eps, row.status);
            }
            Ok(out.exit_code())
        }
        Command::Selftest { run_dir } => match run_dir {
            Some(dir) => recheck_run(&dir),
            None => Ok(selftest()),
        },
    }
}

fn measure_json(p: &SweepPoint, gs: &GroundSpace, bcfg: &BootstrapConfig) -> Result<Value> {
    let cut = &bcfg.cut;
    let omega = gs.omega.as_substate();
    let (l, r) = normalized_marginals(omega, cut)?;
    let m = imax_seesaw(omega, cut, &bcfg.seesaw)?;
    Ok(json!({
        "point": p,
        "ground": gs.record(),
        "I_omega": mutual_info(omega, cut)?,
        "S_L": von_neumann_entropy(l.as_substate()),
        "S_R": von_neumann_entropy(r.as_substate()),
        "S_LR": von_neumann_entropy(omega),
        "imax_upper": m.record(),
        "imax_witness_margin": witness_margin(&m, omega)?,
    }))
}

/// Re-verifies every stored witness of a bootstrap run directory.
fn recheck_run(dir: &Path) -> Result<i32> {
    let entries = read_bundle(dir)?;
    let mut failed = 0;
    for (rec, w) in &entries {
        match w {
            Some(w) => {
                let m = w.recheck()?;
                let ok = m >= -CERT_TOL * rec.factor.max(1.0);
                failed += usize::from(!ok);
                println!("{} {}: lambda_min = {m:.3e}", if ok { "PASS" } else { "FAIL" }, rec.label);
            }
            None => println!("SKIP {}: operands above the storage limit", rec.label),
        }
    }
    println!("{} witnesses, {failed} failed", entries.len());
    Ok(if failed == 0 { 0 } else { 2 })
}

type Check = (&'static str, fn() -> Result<String>);

/// The built-in suite: small instances of each invariant, a few seconds in total.
fn selftest() -> i32 {
    let checks: [Check; 6] = [
        ("classical Ising mutual information", check_classical_info),
        ("flat nested pair entropies", check_flat_pair),
        ("AGSP certification", check_agsp),
        ("bootstrap halting and smoothing", check_bootstrap),
        ("witness storage round trip", check_witness_storage),
        ("mutual information corollary", check_corollary),
    ];
    let mut failed = 0;
    for (name, f) in checks {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(e) => {
                failed += 1;
                println!("FAIL {name}: {e}");
            }
        }
    }
    if failed == 0 {
        0
    } else {
        2
    }
}

fn point(model: &str, n: usize, left: usize, eps: f64) -> Result<(GroundSpace, BootstrapConfig)> {
    let cfg = RunConfig::single(model, n, Some(left), eps);
    let p = cfg.points().remove(0);
    let (_, gs) = solve(&p.chain()?)?;
    Ok((gs, cfg.bootstrap_config(&p)?))
}

fn ensure(ok: bool, what: String) -> Result<String> {
    if ok {
        Ok(what)
    } else {
        Err(Error::contract(what))
    }
}

fn check_classical_info() -> Result<String> {
    let (gs, cfg) = point("classical_ising", 4, 2, 0.2)?;
    let i = mutual_info(gs.omega.as_substate(), &cfg.cut)?;
    ensure((i - 1.0).abs() < 1e-9, format!("I = {i}"))
}

fn check_flat_pair() -> Result<String> {
    // ρ uniform on 2 of σ's 8 support states
    let rho = SubState::from_matrix(ComplexMatrix::from_real_diag(&[0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]))?;
    let sigma = SubState::from_matrix(ComplexMatrix::from_real_diag(&[0.125; 8]))?;
    let (lo, hi) = (dmin(&rho, &sigma)?, dmax(&rho, &sigma)?);
    ensure((lo - 2.0).abs() < 1e-9 && (hi - 2.0).abs() < 1e-9, format!("D_min = {lo}, D_max = {hi}"))
}

fn check_agsp() -> Result<String> {
    let (gs, cfg) = point("transverse_field_ising", 6, 3, 0.2)?;
    let mut last = f64::INFINITY;
    for degree in [1, 2, 4, 8] {
        let a = chebyshev_agsp_from_eigen(&gs.eigen, &gs.spectral, degree, &cfg.cut)?;
        if !(a.delta < last && a.fixes_gs_error <= 1e-8) {
            return Err(Error::contract(format!("degree {degree}: Delta {} after {last}", a.delta)));
        }
        last = a.delta;
    }
    Ok(format!("Delta(8) = {last:.3e}"))
}

fn check_bootstrap() -> Result<String> {
    let (gs, cfg) = point("classical_ising", 6, 3, 0.2)?;
    let run = bootstrap_run(&gs, &cfg)?;
    let k = run.halted_at.ok_or_else(|| Error::contract("no halt within the horizon"))?;
    let d = run.distance();
    ensure(k <= cfg.horizon() && d <= cfg.epsilon + 1e-6, format!("halted at k = {k}, distance {d:.3e}"))
}

fn check_witness_storage() -> Result<String> {
    let (gs, cfg) = point("classical_ising", 4, 2, 0.2)?;
    let run = bootstrap_run(&gs, &cfg)?;
    for w in &run.witnesses {
        let bytes = w.bytes().ok_or_else(|| Error::contract("witness not stored"))?;
        let mats: [ComplexMatrix; 3] =
            read_matrices(&bytes[..])?.try_into().map_err(|_| Error::Shape("expected three records".into()))?;
        let back = Witness::restore(&w.record(), mats)?;
        let m = back.recheck()?;
        if m < -CERT_TOL * w.factor.max(1.0) {
            return Err(Error::contract_psd(format!("witness '{}'", w.label), m));
        }
    }
    Ok(format!("{} witnesses", run.witnesses.len()))
}

fn check_corollary() -> Result<String> {
    let (gs, cfg) = point("classical_ising", 4, 2, 0.2)?;
    let (res, _) = corollary2_check(&gs, &cfg)?;
    ensure(res.i_omega <= res.rhs_chain, format!("I = {:.4} <= {:.4}", res.i_omega, res.rhs_chain))
}
