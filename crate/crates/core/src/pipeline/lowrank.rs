use serde::Serialize;

use super::bootstrap::{bootstrap_run, choose_agsp, conjugate, embed_within, BootstrapOutcome};
use super::{BootstrapConfig, DegreePolicy};
use crate::agsp::{extend_agsp, AgspCertificate};
use crate::constructions::{discretize_left, short_distance_bound};
use crate::entropy::{imax_seesaw, mutual_info};
use crate::error::{Error, Result};
use crate::linalg::{domination_margin, operator_schmidt, trace_distance, DensityOperator};
use crate::models::GroundSpace;

/// Relative cutoff when counting the Schmidt rank of Ω_ε.
const RANK_TOL: f64 = 1e-10;

/// One link of the distance budget: a measured value against its allowance.
#[derive(Clone, Debug, Serialize)]
pub struct AuditEntry {
    pub name: &'static str,
    pub measured: f64,
    pub allowance: f64,
}

#[derive(Clone, Debug)]
pub struct LowRankResult {
    pub omega_eps: DensityOperator,
    pub schmidt_rank: usize,
    /// D²·(number of τ_L classes), the certified rank bound.
    pub rank_bound: usize,
    /// ‖Ω − Ω_ε‖₁.
    pub distance: f64,
    pub certified_factor_chain: Vec<AuditEntry>,
    pub agsp: AgspCertificate,
    pub t_prime: f64,
    pub bootstrap: BootstrapOutcome,
}

#[derive(Clone, Debug, Serialize)]
pub struct LowRankRecord {
    pub schmidt_rank: usize,
    pub rank_bound: usize,
    pub distance: f64,
    pub t_prime: f64,
    pub agsp: AgspCertificate,
    pub certified_factor_chain: Vec<AuditEntry>,
    pub halted_at: Option<usize>,
}

impl LowRankResult {
    pub fn record(&self) -> LowRankRecord {
        LowRankRecord {
            schmidt_rank: self.schmidt_rank,
            rank_bound: self.rank_bound,
            distance: self.distance,
            t_prime: self.t_prime,
            agsp: self.agsp.clone(),
            certified_factor_chain: self.certified_factor_chain.clone(),
            halted_at: self.bootstrap.halted_at,
        }
    }
}

/// Ω_ε = Tr_B(K_AB σ′_AB K_AB†)/Tr, built from the halted bootstrap state of a
/// run at ε/9.
pub fn low_rank_approx(gs: &GroundSpace, cfg: &BootstrapConfig) -> Result<LowRankResult> {
    let eps = cfg.epsilon;
    let ninth = eps / 9.0;
    let run = bootstrap_run(gs, &cfg.with_epsilon(ninth)?)?;
    let cut = &cfg.cut;
    let omega = gs.omega.matrix();
    let rho = run.final_state.rho.clone();

    let m = imax_seesaw(&rho, cut, &cfg.seesaw)?;
    let (sl, sr) = m.witness.clone().ok_or_else(|| Error::contract("see-saw returned no witness"))?;
    let t = m.value.exp2();
    let disc = discretize_left(&rho, &sl, &sr, t, eps, cut)?;
    let emb = embed_within(&disc.rho, &disc.sigma_l, &sr, ninth, ninth, gs.r, cfg)?;
    let keep = emb.d_b / gs.r as u64;
    let classes = emb.classes()?.len();

    let delta_cap = eps / (6.0 * emb.t_prime);
    let max_degree = match cfg.degree_policy {
        DegreePolicy::Ceiling { max_degree, .. } => max_degree,
        DegreePolicy::Fixed { degree } => degree,
    };
    let policy = DegreePolicy::Ceiling { ceiling: Some(f64::INFINITY), max_degree };
    let agsp = choose_agsp(gs, cut, &policy, f64::INFINITY, delta_cap, None)?;
    let ext = extend_agsp(agsp.clone(), gs.r as u64, emb.d_b)?;
    let extended = ext.certify(&gs.pi_gs)?;

    let sigma_k = conjugate(&agsp.k, &emb.sigma_reduced(keep))?;
    let trace = sigma_k.trace();
    let omega_eps = sigma_k.normalized()?;
    drop(sigma_k);
    let eta = conjugate(&agsp.k, emb.rho_prime_a.matrix())?;

    // η ≼ t′·Tr(Kσ′K†)·Ω_ε with t′·Tr ≤ 1 + t′Δ
    let inflation = emb.t_prime * trace;
    let margin = domination_margin(eta.matrix(), omega_eps.matrix(), inflation)?;
    if margin < -cfg.tolerances.cert * inflation.max(1.0) {
        return Err(Error::contract_psd("eta <= t' Tr(K sigma K^dag) Omega_eps failed", margin));
    }
    let short = short_distance_bound(&eta, &omega_eps, (inflation - 1.0).max(0.0))?;

    let chain = vec![
        AuditEntry { name: "rho_k vs Omega", measured: trace_distance(rho.matrix(), omega), allowance: ninth },
        AuditEntry { name: "discretization", measured: disc.trace_distance, allowance: ninth },
        AuditEntry { name: "flat embedding", measured: emb.distance_a, allowance: ninth },
        AuditEntry {
            name: "eta vs Omega",
            measured: trace_distance(eta.matrix(), omega),
            allowance: eps / 3.0,
        },
        AuditEntry { name: "t' Delta", measured: emb.t_prime * extended.delta, allowance: eps / 6.0 },
        AuditEntry { name: "short distance bound", measured: short, allowance: 2.0 * eps / 3.0 },
        AuditEntry {
            name: "eta vs Omega_eps",
            measured: trace_distance(eta.matrix(), omega_eps.matrix()),
            allowance: 2.0 * eps / 3.0,
        },
    ];
    let distance = trace_distance(omega_eps.matrix(), omega);
    if !(distance <= eps + cfg.tolerances.distance) {
        let text: Vec<String> =
            chain.iter().map(|a| format!("{} {:.3e}/{:.3e}", a.name, a.measured, a.allowance)).collect();
        return Err(Error::Budget { distance, budget: eps, chain: text.join(", ") });
    }

    let schmidt_rank = operator_schmidt(omega_eps.matrix(), cut, RANK_TOL)?.rank;
    let rank_bound = agsp.d * agsp.d * classes;
    if schmidt_rank > rank_bound {
        return Err(Error::contract(format!("Schmidt rank {schmidt_rank} exceeds the certified {rank_bound}")));
    }
    Ok(LowRankResult {
        omega_eps,
        schmidt_rank,
        rank_bound,
        distance,
        certified_factor_chain: chain,
        agsp: agsp.certificate(),
        t_prime: emb.t_prime,
        bootstrap: run,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Corollary2Result {
    pub epsilon: f64,
    pub i_omega: f64,
    pub smoothed_upper: f64,
    pub rhs_chain: f64,
    pub smoothing_distance: f64,
    pub halted_at: Option<usize>,
}

/// I(Ω) ≤ I_max^ε + (3/2)·ε·log₂ d_L + 3 with ε = 1/|L|.
pub fn corollary2_check(gs: &GroundSpace, cfg: &BootstrapConfig) -> Result<(Corollary2Result, BootstrapOutcome)> {
    let eps = 1.0 / cfg.left_sites() as f64;
    let run = bootstrap_run(gs, &cfg.with_epsilon(eps)?)?;
    let i_omega = mutual_info(gs.omega.as_substate(), &cfg.cut)?;
    let smoothed_upper = run.smoothed.value;
    let rhs_chain = smoothed_upper + 1.5 * eps * (cfg.cut.d_l as f64).log2() + 3.0;
    if i_omega > rhs_chain + 1e-9 {
        return Err(Error::contract(format!("I(Omega) = {i_omega} exceeds the chain {rhs_chain}")));
    }
    let res = Corollary2Result {
        epsilon: eps,
        i_omega,
        smoothed_upper,
        rhs_chain,
        smoothing_distance: run.distance(),
        halted_at: run.halted_at,
    };
    Ok((res, run))
}
