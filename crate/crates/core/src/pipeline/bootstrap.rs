use std::collections::BTreeMap;

use serde::Serialize;

use super::witness::{Witness, WitnessRecord};
use super::{BootstrapConfig, DegreePolicy};
use crate::agsp::{chebyshev_agsp_from_eigen, extend_agsp, select_degree, Agsp, AgspCertificate, Certification};
use crate::constructions::{
    discretize_left, dominate_conjugated_flat, flat_embed_product, DiscretizationRecord, DominationRecord,
    FlatEmbedding, FlatOptions, FlatRecord,
};
use crate::entropy::{imax_seesaw, MeasureRecord, MeasureResult};
use crate::error::{Error, Result};
use crate::linalg::{
    cap_eigenvalues, partial_trace, trace_distance, BipartiteCut, ComplexMatrix, DensityOperator, HermitianOperator,
    Keep, SubState,
};
use crate::models::GroundSpace;

/// ρ_k ≼ t_k·τ_L⊗τ_R.
#[derive(Clone, Debug)]
pub struct BootstrapState {
    pub k: usize,
    pub rho: SubState,
    pub t: f64,
    pub tau_l: DensityOperator,
    pub tau_r: DensityOperator,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceBoundRecord {
    /// Tr(K_AB σ_AB K_AB†).
    pub trace: f64,
    /// Δ + Tr((1⊗Π_r)σ_AB), the exact form of the bound.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BootstrapRecord {
    pub k: usize,
    pub t_k: f64,
    pub t_next: f64,
    /// ‖ρ_k − Ω‖₁.
    pub distance_to_omega: f64,
    /// ‖ρ′_k − Ω‖₁ with ρ′_k = Tr_B ρ′_AB.
    pub distance_rho_prime: f64,
    /// ‖ρ_{k+1} − ρ_k‖₁ against the per-step budget 22√δ.
    pub step_distance: f64,
    pub step_bound: f64,
    pub imax_upper_rho_prime: f64,
    pub trace_rho_prime: f64,
    pub halted: bool,
    /// t_k·(1/4 + 2^{−I_max}·g·D²/δ²), the literal recurrence with the runtime g.
    pub envelope_t_next: f64,
    pub exact_factors: BTreeMap<&'static str, f64>,
    pub agsp_certificate: AgspCertificate,
    pub extended_certificate: Certification,
    pub discretization: DiscretizationRecord,
    pub flat: FlatRecord,
    pub domination: DominationRecord,
    /// max |Tr_B(K_AB ρ′_AB K_AB†) − K ρ′_A K†| entrywise.
    pub partial_trace_defect: f64,
    pub trace_bound: TraceBoundRecord,
    pub witnesses: Vec<WitnessRecord>,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub next: BootstrapState,
    pub record: BootstrapRecord,
    pub rho_prime: SubState,
    pub smoothed: MeasureResult,
    pub agsp: Agsp,
    pub witnesses: Vec<Witness>,
}

/// Reported when no halt occurs within the horizon. With t_0 ≤ d_L² this
/// cannot happen in exact arithmetic.
#[derive(Clone, Debug, Serialize)]
pub struct ContradictionWitness {
    pub horizon: usize,
    pub t_sequence: Vec<f64>,
    pub d_l_squared: f64,
}

#[derive(Clone, Debug)]
pub struct BootstrapOutcome {
    pub records: Vec<BootstrapRecord>,
    pub halted_at: Option<usize>,
    pub anomaly: Option<ContradictionWitness>,
    /// I_max upper bound of ρ′_k with its product witness; `distance_to_center` is ‖Ω − ρ′_k‖₁.
    pub smoothed: MeasureResult,
    pub rho_prime: SubState,
    /// The state ρ_k at which the run stopped.
    pub final_state: BootstrapState,
    pub initial: MeasureResult,
    pub witnesses: Vec<Witness>,
    pub delta: f64,
    pub epsilon: f64,
}

impl BootstrapOutcome {
    pub fn distance(&self) -> f64 {
        self.smoothed.distance_to_center.unwrap_or(f64::NAN)
    }

    pub fn smoothed_record(&self) -> MeasureRecord {
        self.smoothed.record()
    }
}

/// ρ_0 = Ω, τ_0 the see-saw witness and t_0 = 2^{I_max upper}. Falls back to
/// Ω ≼ d_L·1⊗Ω_R when the see-saw value exceeds log₂ d_L².
pub fn initial_state(gs: &GroundSpace, cfg: &BootstrapConfig) -> Result<(BootstrapState, MeasureResult, Witness)> {
    let cut = &cfg.cut;
    let omega = gs.omega.as_substate().clone();
    let m = imax_seesaw(&omega, cut, &cfg.seesaw)?;
    let (mut l, mut r) = m.witness.clone().ok_or_else(|| Error::contract("see-saw returned no witness"))?;
    let mut t = m.value.exp2();
    let d_l2 = (cut.d_l * cut.d_l) as f64;
    if t > d_l2 {
        l = DensityOperator::maximally_mixed(cut.d_l);
        r = DensityOperator::from_matrix(partial_trace(omega.matrix(), cut, Keep::Right)?.hermitian_part())?;
        t = d_l2;
    }
    let w = Witness::new("rho_0 <= t_0 tau_0", omega.matrix(), l.matrix(), r.matrix(), t, cut, cfg.tolerances.cert)?;
    Ok((BootstrapState { k: 0, rho: omega, t, tau_l: l, tau_r: r }, m, w))
}

/// Flat embedding against τ_L⊗τ_R, doubling d_B until ‖ρ′_A − ρ‖₁ ≤ budget.
pub(super) fn embed_within(
    rho: &SubState,
    tau_l: &DensityOperator,
    tau_r: &DensityOperator,
    delta: f64,
    budget: f64,
    r: usize,
    cfg: &BootstrapConfig,
) -> Result<FlatEmbedding> {
    let mut resolution = cfg.resolution.max(r);
    loop {
        let opts = FlatOptions { resolution, multiple_of: r, max_d_b: cfg.max_d_b };
        let emb = flat_embed_product(rho, tau_l, tau_r, &cfg.cut, delta, &opts)?;
        if emb.distance_a <= budget {
            return Ok(emb);
        }
        if resolution.saturating_mul(2) > cfg.max_d_b {
            return Err(Error::Budget {
                distance: emb.distance_a,
                budget,
                chain: format!("flat embedding at d_B = {} (max_d_b = {})", emb.d_b, cfg.max_d_b),
            });
        }
        resolution *= 2;
    }
}

/// Picks the AGSP for one step under the configured policy.
pub(super) fn choose_agsp(
    gs: &GroundSpace,
    cut: &BipartiteCut,
    policy: &DegreePolicy,
    runtime_ceiling: f64,
    delta_cap: f64,
    previous: Option<&Agsp>,
) -> Result<Agsp> {
    let fits = |a: &Agsp, ceiling: f64| a.shrink_product() <= ceiling && a.delta <= delta_cap;
    match policy {
        DegreePolicy::Fixed { degree } => {
            let a = match previous {
                Some(p) if p.degree == *degree => p.clone(),
                _ => chebyshev_agsp_from_eigen(&gs.eigen, &gs.spectral, *degree, cut)?,
            };
            if !fits(&a, runtime_ceiling) {
                return Err(Error::Ceiling {
                    ceiling: runtime_ceiling.min(delta_cap),
                    best: a.shrink_product(),
                    best_degree: *degree,
                    max_degree: *degree,
                });
            }
            Ok(a)
        }
        DegreePolicy::Ceiling { ceiling, max_degree } => {
            let c = ceiling.unwrap_or(runtime_ceiling);
            match previous {
                Some(p) if fits(p, c) => Ok(p.clone()),
                _ => select_degree(&gs.eigen, &gs.spectral, cut, c, delta_cap, *max_degree),
            }
        }
    }
}

/// K ρ K† for a square K and Hermitian ρ.
pub(super) fn conjugate(k: &ComplexMatrix, rho: &ComplexMatrix) -> Result<SubState> {
    SubState::new(HermitianOperator::new_unchecked(k.matmul(rho).matmul_adjoint(k).hermitian_part()))
}

pub fn bootstrap_step(state: &BootstrapState, gs: &GroundSpace, cfg: &BootstrapConfig) -> Result<StepOutput> {
    step(state, gs, cfg, None)
}

fn step(state: &BootstrapState, gs: &GroundSpace, cfg: &BootstrapConfig, previous: Option<&Agsp>) -> Result<StepOutput> {
    let cut = &cfg.cut;
    let tol = cfg.tolerances.cert;
    let delta = cfg.delta();
    let r = gs.r;
    let omega = gs.omega.matrix();
    let k = state.k;
    let mut witnesses = Vec::new();

    let disc = discretize_left(&state.rho, &state.tau_l, &state.tau_r, state.t, cfg.epsilon, cut)?;
    witnesses.push(Witness::new(
        format!("step {k}: discretized <= factor sigma_L x tau_R"),
        disc.rho.matrix(),
        disc.sigma_l.matrix(),
        state.tau_r.matrix(),
        disc.factor,
        cut,
        tol,
    )?);

    let emb = embed_within(&disc.rho, &disc.sigma_l, &state.tau_r, delta, delta, r, cfg)?;
    let keep = emb.d_b / r as u64;
    let top = emb.segments.iter().map(|s| s.hi).max().unwrap_or(0);
    if top > keep {
        return Err(Error::contract(format!(
            "rho'_AB occupies {top} levels of B, beyond the {keep} kept by the extended AGSP"
        )));
    }
    let rho_prime = emb.rho_prime_a.clone();
    let partial_trace_defect = (&emb.reduced_a(keep) - rho_prime.matrix()).max_abs();
    if partial_trace_defect > cfg.tolerances.partial_trace {
        return Err(Error::contract(format!("Tr_B identity for K_AB off by {partial_trace_defect:.3e}")));
    }

    let classes = emb.classes()?.len();
    let g = emb.t_prime / state.t * (classes * classes) as f64;
    let runtime_ceiling = 1.0 / (4.0 * g);
    let agsp = choose_agsp(gs, cut, &cfg.degree_policy, runtime_ceiling, delta, previous)?;
    let ext = extend_agsp(agsp.clone(), r as u64, emb.d_b)?;
    let extended = ext.certify(&gs.pi_gs)?;

    let dom = dominate_conjugated_flat(&agsp.schmidt, &emb, keep)?;
    let t_next = emb.t_prime * dom.unnormalized_factor();
    let eta = conjugate(&agsp.k, rho_prime.matrix())?;
    let next_rho = cap_eigenvalues(&eta, state.rho.lambda_max())?;
    drop(eta);
    witnesses.push(Witness::new(
        format!("step {k}: rho_{} <= t_{} tau_L x tau_R", k + 1, k + 1),
        next_rho.matrix(),
        dom.tau_l.matrix(),
        dom.tau_r.matrix(),
        t_next,
        cut,
        tol,
    )?);

    let kept_sigma: f64 = emb.counts.iter().map(|&m| m.min(keep) as f64).sum::<f64>() / emb.trace_p_sigma as f64;
    let trace_bound_value = extended.delta + kept_sigma;
    let trace_bound = TraceBoundRecord { trace: dom.trace, bound: trace_bound_value, holds: dom.trace <= trace_bound_value * (1.0 + 1e-9) };

    let mut smoothed = imax_seesaw(&rho_prime, cut, &cfg.seesaw)?;
    let distance_rho_prime = trace_distance(rho_prime.matrix(), omega);
    smoothed.distance_to_center = Some(distance_rho_prime);
    if let Some((l, rr)) = &smoothed.witness {
        witnesses.push(Witness::new(
            format!("step {k}: rho'_{k} <= 2^I tau'"),
            rho_prime.matrix(),
            l.matrix(),
            rr.matrix(),
            smoothed.value.exp2(),
            cut,
            tol,
        )?);
    }

    let d2 = (agsp.d * agsp.d) as f64;
    let envelope_t_next = state.t * (0.25 + (-smoothed.value).exp2() * g * d2 / (delta * delta));
    let mut exact = BTreeMap::new();
    exact.insert("discretization_factor", disc.factor);
    exact.insert("t_prime", emb.t_prime);
    exact.insert("t_prime_over_t", emb.t_prime / state.t);
    exact.insert("tau_l_classes", classes as f64);
    exact.insert("g", g);
    exact.insert("runtime_ceiling", runtime_ceiling);
    exact.insert("D2_Delta", agsp.shrink_product());
    exact.insert("n_total", dom.n_total as f64);
    exact.insert("peak", dom.peak);
    exact.insert("domination_factor", dom.unnormalized_factor());
    exact.insert("trace_k_sigma", dom.trace);
    exact.insert("d_b", emb.d_b as f64);
    exact.insert("keep", keep as f64);
    exact.insert("ratio", t_next / state.t);

    let step_distance = trace_distance(next_rho.matrix(), state.rho.matrix());
    let record = BootstrapRecord {
        k,
        t_k: state.t,
        t_next,
        distance_to_omega: trace_distance(state.rho.matrix(), omega),
        distance_rho_prime,
        step_distance,
        step_bound: 22.0 * delta.sqrt(),
        imax_upper_rho_prime: smoothed.value,
        trace_rho_prime: rho_prime.trace(),
        halted: t_next >= state.t / 2.0,
        envelope_t_next,
        exact_factors: exact,
        agsp_certificate: agsp.certificate(),
        extended_certificate: extended,
        discretization: disc.record(),
        flat: emb.record(),
        domination: dom.record(),
        partial_trace_defect,
        trace_bound,
        witnesses: witnesses.iter().map(Witness::record).collect(),
    };
    let next = BootstrapState { k: k + 1, rho: next_rho, t: t_next, tau_l: dom.tau_l, tau_r: dom.tau_r };
    Ok(StepOutput { next, record, rho_prime, smoothed, agsp, witnesses })
}

/// Iterates until t_{k+1} ≥ t_k/2 or the iteration cap, then reports the
/// I_max witness of ρ′_k as the smoothed bound.
pub fn bootstrap_run(gs: &GroundSpace, cfg: &BootstrapConfig) -> Result<BootstrapOutcome> {
    cfg.validate()?;
    cfg.cut.check(gs.omega.matrix())?;
    let (mut state, initial, w0) = initial_state(gs, cfg)?;
    let mut witnesses = vec![w0];
    let mut records = Vec::new();
    let mut agsp: Option<Agsp> = None;
    let mut ts = vec![state.t];
    loop {
        let out = step(&state, gs, cfg, agsp.as_ref())?;
        witnesses.extend(out.witnesses);
        ts.push(out.next.t);
        let halted = out.record.halted;
        records.push(out.record);
        let last = records.len() == cfg.max_iterations;
        if halted || last {
            let distance = out.smoothed.distance_to_center.unwrap_or(f64::NAN);
            let budget = cfg.epsilon + cfg.tolerances.distance;
            if !(distance <= budget) {
                return Err(Error::Budget {
                    distance,
                    budget,
                    chain: format!("smoothing distance after {} steps", records.len()),
                });
            }
            let anomaly = (!halted).then(|| ContradictionWitness {
                horizon: cfg.max_iterations,
                t_sequence: ts.clone(),
                d_l_squared: (cfg.cut.d_l * cfg.cut.d_l) as f64,
            });
            return Ok(BootstrapOutcome {
                halted_at: halted.then_some(state.k),
                anomaly,
                smoothed: out.smoothed,
                rho_prime: out.rho_prime,
                final_state: state,
                initial,
                witnesses,
                records,
                delta: cfg.delta(),
                epsilon: cfg.epsilon,
            });
        }
        agsp = Some(out.agsp);
        state = out.next;
    }
}
