//! Monte Carlo simulation of the urn experiments behind the stochastic
//! factors, on the flattened state space `Z≥0` (parity encodes the phase:
//! state `2m+i` is level `m`, phase `i`).
//!
//! Experiment 1 realizes the upper factor `P_U` (a pure-birth chain with
//! second-adjacent jumps), Experiment 2 the lower factor `P_L` (pure-death,
//! absorbing at 0). Composing 1-then-2 gives the chain `P = P_U P_L`;
//! composing 2-then-1 gives the Darboux transform `P̃ = P_L P_U`. The ball
//! mechanics are compiled to exact categorical probabilities and sampled
//! directly; a ball-by-ball mode would add nothing but bias opportunities.

use std::collections::BTreeMap;

use crate::blockmat::{BlockSequence, LevelBlocks};
use crate::error::Error;
use crate::jacobi::JacobiParams;
use crate::Result;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64: the fixed, published mixing generator used for all trials.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Per-trial generator: trial `t` draws from its own splitmix64 stream whose
/// seed is the `t`-th splitmix64 output over `base_seed`. Trials are
/// independent of evaluation order.
pub fn per_trial_rng(base_seed: u64, trial: u64) -> SplitMix64 {
    let mut jump = SplitMix64 {
        state: base_seed.wrapping_add(trial.wrapping_mul(GOLDEN)),
    };
    SplitMix64::new(jump.next_u64())
}

/// Which chain a simulation runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    /// Upper factor `P_U` alone.
    Exp1,
    /// Lower factor `P_L` alone.
    Exp2,
    /// Experiment 1 then Experiment 2 (`P = P_U P_L`).
    ComposedP,
    /// Experiment 2 then Experiment 1 (`P̃ = P_L P_U`).
    ComposedPtilde,
}

/// A validated urn-model configuration.
#[derive(Clone, Copy, Debug)]
pub struct UrnChainSpec {
    pub params: JacobiParams,
    pub experiment: Experiment,
}

impl UrnChainSpec {
    pub fn new(params: JacobiParams, experiment: Experiment) -> Result<Self> {
        params.validate_urn()?;
        Ok(UrnChainSpec { params, experiment })
    }
}

/// Exact one-step categorical distribution of Experiment 1 from `state`.
///
/// Odd `2m+1`: up two with probability `(m+β+2)/(2m+α+β+3)`, stay otherwise.
/// Even `2m`: stay / up one / up two through the three-urn draw.
pub fn experiment1_distribution(p: &JacobiParams, state: u64) -> Vec<(u64, f64)> {
    let (al, be, k) = (p.alpha, p.beta, p.k);
    let m = (state / 2) as f64;
    if !state.is_multiple_of(2) {
        let up2 = (m + be + 2.0) / (2.0 * m + al + be + 3.0);
        let stay = (m + al + 1.0) / (2.0 * m + al + be + 3.0);
        vec![(state, stay), (state + 2, up2)]
    } else {
        let stay = (m + al) * (m + al + be - k + 2.0)
            / ((2.0 * m + al + be + 2.0) * (m + al + 1.0 - k + be));
        let up1 = (be - k + 1.0) / ((m + al + be - k + 1.0) * (m + k + 1.0));
        let up2 = (m + k) * (m + be + 2.0) / ((2.0 * m + al + be + 2.0) * (m + k + 1.0));
        vec![(state, stay), (state + 1, up1), (state + 2, up2)]
    }
}

/// Exact one-step categorical distribution of Experiment 2 from `state`;
/// state 0 is absorbing.
pub fn experiment2_distribution(p: &JacobiParams, state: u64) -> Vec<(u64, f64)> {
    let (al, be, k) = (p.alpha, p.beta, p.k);
    if state == 0 {
        return vec![(0, 1.0)];
    }
    let m = (state / 2) as f64;
    if state.is_multiple_of(2) {
        let down2 = m / (2.0 * m + al + be + 1.0);
        let stay = (m + al + be + 1.0) / (2.0 * m + al + be + 1.0);
        vec![(state - 2, down2), (state, stay)]
    } else {
        let stay = (m + al + be + 2.0) * (m + al + 1.0 - k + be)
            / ((2.0 * m + al + be + 2.0) * (m + al + be - k + 2.0));
        let down1 = k / ((m + al + be - k + 2.0) * (m + k));
        let mut out = Vec::with_capacity(3);
        if state >= 2 {
            let down2 = m * (m + k + 1.0) / ((2.0 * m + al + be + 2.0) * (m + k));
            out.push((state - 2, down2));
        }
        out.push((state - 1, down1));
        out.push((state, stay));
        out
    }
}

fn sample(dist: &[(u64, f64)], u: f64) -> u64 {
    let mut cum = 0.0;
    for (target, prob) in dist {
        cum += prob;
        if u < cum {
            return *target;
        }
    }
    dist.last().expect("nonempty distribution").0
}

/// One step of Experiment 1.
pub fn experiment1_step(spec: &UrnChainSpec, state: u64, rng: &mut SplitMix64) -> u64 {
    sample(&experiment1_distribution(&spec.params, state), rng.next_f64())
}

/// One step of Experiment 2.
pub fn experiment2_step(spec: &UrnChainSpec, state: u64, rng: &mut SplitMix64) -> u64 {
    sample(&experiment2_distribution(&spec.params, state), rng.next_f64())
}

/// One step of the configured experiment (compositions draw twice).
pub fn chain_step(spec: &UrnChainSpec, state: u64, rng: &mut SplitMix64) -> u64 {
    match spec.experiment {
        Experiment::Exp1 => experiment1_step(spec, state, rng),
        Experiment::Exp2 => experiment2_step(spec, state, rng),
        Experiment::ComposedP => {
            let mid = experiment1_step(spec, state, rng);
            experiment2_step(spec, mid, rng)
        }
        Experiment::ComposedPtilde => {
            let mid = experiment2_step(spec, state, rng);
            experiment1_step(spec, mid, rng)
        }
    }
}

/// Empirical one-step kernel: counts of targets over independent trials.
#[derive(Clone, Debug)]
pub struct EmpiricalKernel {
    pub start_state: u64,
    pub counts: BTreeMap<u64, u64>,
    pub trials: u64,
}

/// Runs `trials` independent one-step draws from `start`; trial `t` uses the
/// deterministic stream `per_trial_rng(base_seed, t)`, so the result is
/// independent of execution order.
pub fn empirical_kernel(spec: &UrnChainSpec, start: u64, trials: u64, base_seed: u64) -> Result<EmpiricalKernel> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for t in 0..trials {
        let mut rng = per_trial_rng(base_seed, t);
        let target = chain_step(spec, start, &mut rng);
        *counts.entry(target).or_insert(0) += 1;
    }
    Ok(EmpiricalKernel {
        start_state: start,
        counts,
        trials,
    })
}

/// One target's comparison against its reference probability.
#[derive(Clone, Debug)]
pub struct KernelRow {
    pub target: u64,
    pub count: u64,
    pub empirical_p: f64,
    pub reference_p: f64,
    /// `(p̂ - p)/sqrt(p(1-p)/trials)`; 0 when the binomial SE vanishes and
    /// the counts agree exactly.
    pub z: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct KernelReport {
    pub rows: Vec<KernelRow>,
    pub passed: bool,
}

/// Per-target z-test of an empirical kernel against reference row
/// probabilities. The reference must sum to 1 and cover every observed
/// target.
pub fn kernel_vs_matrix(
    kernel: &EmpiricalKernel,
    reference: &BTreeMap<u64, f64>,
    z_threshold: f64,
) -> Result<KernelReport> {
    let total: f64 = reference.values().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!(
            "reference probabilities sum to {total}, expected 1"
        )));
    }
    for target in kernel.counts.keys() {
        if !reference.contains_key(target) {
            return Err(Error::Validation(format!(
                "observed target {target} is outside the reference reach set"
            )));
        }
    }
    let trials = kernel.trials as f64;
    let mut rows = Vec::new();
    let mut passed = true;
    for (&target, &p) in reference {
        let count = kernel.counts.get(&target).copied().unwrap_or(0);
        let emp = count as f64 / trials;
        let se = (p * (1.0 - p) / trials).sqrt();
        let (z, ok) = if se == 0.0 {
            if emp == p {
                (0.0, true)
            } else {
                (f64::INFINITY * (emp - p).signum(), false)
            }
        } else {
            let z = (emp - p) / se;
            (z, z.abs() <= z_threshold)
        };
        passed &= ok;
        rows.push(KernelRow {
            target,
            count,
            empirical_p: emp,
            reference_p: p,
            z,
            passed: ok,
        });
    }
    Ok(KernelReport { rows, passed })
}

/// Row of a block-banded matrix in the flattened `d = 2` state encoding;
/// exact zeros are dropped so the support is the chain's reach set.
pub fn flattened_row(seq: &BlockSequence, state: u64) -> Result<BTreeMap<u64, f64>> {
    if seq.d() != 2 {
        return Err(Error::InvalidParameter(
            "the flattened state encoding is defined for d = 2".into(),
        ));
    }
    let level = (state / 2) as usize;
    let phase = (state % 2) as usize;
    let mut row = BTreeMap::new();
    let mut put = |base_level: isize, block: &crate::blockmat::Block| {
        for j in 0..2usize {
            let v = block[(phase, j)];
            if v != 0.0 {
                row.insert((2 * base_level) as u64 + j as u64, v);
            }
        }
    };
    match seq.level(level)? {
        LevelBlocks::Tri { c, b, a } => {
            if let Some(c) = &c {
                put(level as isize - 1, c);
            }
            put(level as isize, &b);
            put(level as isize + 1, &a);
        }
        LevelBlocks::Upper { y, x } => {
            put(level as isize, &y);
            put(level as isize + 1, &x);
        }
        LevelBlocks::Lower { r, s } => {
            if let Some(r) = &r {
                put(level as isize - 1, r);
            }
            put(level as isize, &s);
        }
    }
    Ok(row)
}

/// Reference row probabilities for a spec and start state, taken from the
/// corresponding matrix: `P_U`, `P_L`, `P` or `P̃`.
pub fn reference_row(spec: &UrnChainSpec, start: u64) -> Result<BTreeMap<u64, f64>> {
    let p = &spec.params;
    let levels = (start / 2) as usize + 3;
    let seq = match spec.experiment {
        Experiment::Exp1 => crate::jacobi::paper_upper(p)?,
        Experiment::Exp2 => crate::jacobi::paper_lower(p)?,
        Experiment::ComposedP => crate::jacobi::tridiagonal_chain(p)?,
        Experiment::ComposedPtilde => {
            let upper = crate::jacobi::paper_upper(p)?;
            let lower = crate::jacobi::paper_lower(p)?;
            crate::darboux::darboux_from_ul(&upper, &lower, levels)?.transformed
        }
    };
    flattened_row(&seq, start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p321() -> JacobiParams {
        JacobiParams::new(3.0, 2.0, 1.0, 2).unwrap()
    }

    fn spec(experiment: Experiment) -> UrnChainSpec {
        UrnChainSpec::new(p321(), experiment).unwrap()
    }

    #[test]
    fn frozen_transition_probabilities() {
        let p = p321();
        // odd state 1 (m=0): up two w.p. (beta+2)/(alpha+beta+3) = 1/2
        let d1 = experiment1_distribution(&p, 1);
        let up2 = d1.iter().find(|(t, _)| *t == 3).unwrap().1;
        assert_abs_diff_eq!(up2, 0.5, epsilon = 1e-15);
        // even state 0: stay w.p. Y_0(1,1) = 18/35
        let d0 = experiment1_distribution(&p, 0);
        let stay = d0.iter().find(|(t, _)| *t == 0).unwrap().1;
        assert_abs_diff_eq!(stay, 18.0 / 35.0, epsilon = 1e-15);
        // experiment 2 at state 2 (m=1): down two w.p. R_1(1,1) = 1/8
        let d2 = experiment2_distribution(&p, 2);
        let down2 = d2.iter().find(|(t, _)| *t == 0).unwrap().1;
        assert_abs_diff_eq!(down2, 1.0 / 8.0, epsilon = 1e-15);
        // experiment 2 at state 1 (m=0): down one w.p. S_0(2,1) = 1/6
        let d3 = experiment2_distribution(&p, 1);
        let down1 = d3.iter().find(|(t, _)| *t == 0).unwrap().1;
        assert_abs_diff_eq!(down1, 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn distributions_are_categorical() {
        for params in [p321(), JacobiParams::new(1.0, 2.0, 2.0, 2).unwrap()] {
            for state in 0..=20 {
                let s1: f64 = experiment1_distribution(&params, state).iter().map(|(_, p)| p).sum();
                let s2: f64 = experiment2_distribution(&params, state).iter().map(|(_, p)| p).sum();
                assert_abs_diff_eq!(s1, 1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(s2, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn step_distributions_match_factor_rows() {
        // exp1 rows come from (Y_m, X_m), exp2 rows from (R_m, S_m)
        let upper = crate::jacobi::paper_upper(&p321()).unwrap();
        let lower = crate::jacobi::paper_lower(&p321()).unwrap();
        for state in 0..12u64 {
            let d1: BTreeMap<u64, f64> = experiment1_distribution(&p321(), state).into_iter().collect();
            let row1 = flattened_row(&upper, state).unwrap();
            assert_eq!(d1.len(), row1.len(), "state {state}");
            for (t, p) in &row1 {
                assert_abs_diff_eq!(d1[t], *p, epsilon = 1e-14);
            }
            let d2: BTreeMap<u64, f64> = experiment2_distribution(&p321(), state).into_iter().collect();
            let row2 = flattened_row(&lower, state).unwrap();
            for (t, p) in &row2 {
                assert_abs_diff_eq!(d2[t], *p, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn absorbing_at_zero() {
        let sp = spec(Experiment::Exp2);
        let mut rng = SplitMix64::new(99);
        for _ in 0..200 {
            assert_eq!(experiment2_step(&sp, 0, &mut rng), 0);
        }
    }

    #[test]
    fn composed_stays_nonnegative_and_within_reach() {
        for exp in [Experiment::ComposedP, Experiment::ComposedPtilde] {
            let sp = spec(exp);
            for start in 0..6u64 {
                let kernel = empirical_kernel(&sp, start, 2000, 7).unwrap();
                for target in kernel.counts.keys() {
                    assert!(*target + 2 >= start && *target <= start + 2, "start {start} -> {target}");
                }
            }
        }
    }

    #[test]
    fn single_trial_bookkeeping() {
        let kernel = empirical_kernel(&spec(Experiment::ComposedP), 0, 1, 3).unwrap();
        assert_eq!(kernel.counts.values().sum::<u64>(), 1);
    }

    #[test]
    fn determinism_under_fixed_seed() {
        let sp = spec(Experiment::ComposedPtilde);
        let a = empirical_kernel(&sp, 4, 5000, 2024).unwrap();
        let b = empirical_kernel(&sp, 4, 5000, 2024).unwrap();
        assert_eq!(a.counts, b.counts);
        let c = empirical_kernel(&sp, 4, 5000, 2025).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn kernel_self_consistency_passes() {
        let sp = spec(Experiment::Exp1);
        let kernel = empirical_kernel(&sp, 1, 100_000, 12345).unwrap();
        let reference: BTreeMap<u64, f64> = experiment1_distribution(&p321(), 1).into_iter().collect();
        let report = kernel_vs_matrix(&kernel, &reference, 3.0).unwrap();
        assert!(report.passed, "{:?}", report.rows);
    }

    #[test]
    fn perturbed_reference_fails() {
        let sp = spec(Experiment::Exp1);
        let trials = 100_000u64;
        let kernel = empirical_kernel(&sp, 1, trials, 12345).unwrap();
        let mut reference: BTreeMap<u64, f64> = experiment1_distribution(&p321(), 1).into_iter().collect();
        // shift 10 standard errors of mass between the two targets
        let p = reference[&3];
        let shift = 10.0 * (p * (1.0 - p) / trials as f64).sqrt();
        *reference.get_mut(&3).unwrap() -= shift;
        *reference.get_mut(&1).unwrap() += shift;
        let report = kernel_vs_matrix(&kernel, &reference, 3.0).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn exp1_kernel_matches_factor_entries() {
        let sp = spec(Experiment::Exp1);
        let kernel = empirical_kernel(&sp, 1, 100_000, 777).unwrap();
        let reference = reference_row(&sp, 1).unwrap();
        let report = kernel_vs_matrix(&kernel, &reference, 3.0).unwrap();
        assert!(report.passed, "{:?}", report.rows);
    }

    #[test]
    fn reach_set_mismatch_is_an_error() {
        let sp = spec(Experiment::Exp1);
        let kernel = empirical_kernel(&sp, 0, 1000, 5).unwrap();
        let mut reference = reference_row(&sp, 0).unwrap();
        // drop a target the chain can reach
        reference.remove(&2);
        let rest: f64 = reference.values().sum();
        for v in reference.values_mut() {
            *v /= rest;
        }
        assert!(matches!(
            kernel_vs_matrix(&kernel, &reference, 3.0),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 0 of the standard splitmix64.
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        let u = SplitMix64::new(42).next_f64();
        assert!((0.0..1.0).contains(&u));
    }
}
