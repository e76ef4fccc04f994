//! Deterministic-seed Monte-Carlo simulator of the five-step
//! asymmetric-basis protocol — quantum transmission, error estimation,
//! reconciliation, privacy amplification, verification — over a
//! classical i.i.d. flip channel.
//!
//! The simulator validates the *statistics* of the rate formulas:
//! sifted-count concentration, estimator spread (the empirical ground of
//! δ), and realized key lengths against [`crate::rate::finite_key_length`],
//! with which it shares one formula path (the same partition, the same
//! sacrificed lengths, the same m₃). It does not simulate quantum states
//! or an eavesdropper; coherent attacks are not classically simulable,
//! so the channel stands in for whatever produced the observed error
//! rates.
//!
//! # Determinism
//!
//! Every trial owns a counter-derived RNG stream: run r of master seed s
//! uses a ChaCha8 generator keyed by SplitMix64(s, r). Trials therefore
//! commute — ensembles are embarrassingly parallel and their results are
//! byte-identical regardless of thread count or scheduling. Within a
//! run, draws happen in a fixed documented order (bases and bits, check
//! sampling, PA seeds, tag seeds), so a master seed pins every bit of
//! every trial.

use crate::gf2::{verification_tag, BitVector, ToeplitzHash};
use crate::math::{binary_entropy_inverse, SecurityLevel};
use crate::rate::{finite_key_length, KeyLengthReport, RateError, Ratios, SiftedCounts};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::io::{self, Write};
use thiserror::Error;

/// Errors from simulator configuration and the abortable steps.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("block length n must be at least 1")]
    EmptyBlock,
    #[error("block length {0} exceeds the supported maximum of 2^32 - 1 rounds")]
    BlockTooLarge(u64),
    #[error("beta must lie in (0, 1], got {0}")]
    BetaOutOfRange(f64),
    #[error("flip probability {name} must lie in [0, 1], got {value}")]
    FlipProbability { name: &'static str, value: f64 },
    #[error("reconciliation margin must be finite and non-negative, got {0}")]
    InvalidMargin(f64),
    #[error("ensemble needs at least one trial")]
    ZeroTrials,
    #[error("{side} side generates keys but its conjugate error rate is unestimable")]
    Unestimable { side: &'static str },
    #[error("widened estimate p + delta = {0} reaches 1: inconclusive, run aborts")]
    Inconclusive(f64),
}

/// Classical i.i.d. noise: each matched bit-basis round flips with
/// probability q1, each matched phase-basis round with q2; unmatched
/// rounds are discarded by sifting. Probabilities live on the closed
/// [0, 1] (0 = noiseless is a meaningful test channel).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    q1: f64,
    q2: f64,
}

impl ChannelModel {
    pub fn new(q1: f64, q2: f64) -> Result<Self, SimError> {
        for (name, value) in [("q1", q1), ("q2", q2)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::FlipProbability { name, value });
            }
        }
        Ok(ChannelModel { q1, q2 })
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    pub fn q2(&self) -> f64 {
        self.q2
    }
}

/// How Bob's reconciled string is produced. The protocol fixes only the
/// code *rate* β, not a code, so the simulator offers:
///
/// * `Idealized { margin }` — an oracle decoder for a capacity-achieving
///   code: succeeds iff the realized error rate on the kept bits is at
///   most h⁻¹(1−β) − margin, the Shannon-limit threshold minus a safety
///   margin (margin 0 models the limit itself). On failure Bob's output
///   differs from Alice's and verification catches it downstream.
/// * `Passthrough` — no correction at all; Bob keeps his raw prefix.
///   Exact for noiseless channels, a designed failure path otherwise.
///
/// A real linear code would slot in as a third variant with the same
/// (X, X̂, leak) interface; none ships here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReconciliationStrategy {
    Idealized { margin: f64 },
    Passthrough,
}

/// Full parameterization of one protocol execution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub n: u64,
    pub ratios: Ratios,
    pub eps: SecurityLevel,
    pub beta: f64,
    pub channel: ChannelModel,
    pub master_seed: u64,
    pub reconciliation: ReconciliationStrategy,
}

impl ProtocolConfig {
    /// Checks the scalar invariants (the typed fields carry their own).
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 {
            return Err(SimError::EmptyBlock);
        }
        if self.n > u32::MAX as u64 {
            return Err(SimError::BlockTooLarge(self.n));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(SimError::BetaOutOfRange(self.beta));
        }
        if let ReconciliationStrategy::Idealized { margin } = self.reconciliation {
            if !(margin >= 0.0 && margin.is_finite()) {
                return Err(SimError::InvalidMargin(margin));
            }
        }
        Ok(())
    }
}

/// Why a run produced no key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    /// A keyed side has no check sample for its conjugate error rate.
    UnestimableSide,
    /// The widened estimate p̂ + δ reached 1.
    InconclusiveEstimate,
    /// Verification tags disagreed on some side.
    VerificationFailed,
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbortReason::UnestimableSide => "unestimable_side",
            AbortReason::InconclusiveEstimate => "inconclusive_estimate",
            AbortReason::VerificationFailed => "verification_failed",
        })
    }
}

/// Per-run results: the CSV row. Estimates are `None` when that basis
/// had no check bits (possible only for a side that generates no keys).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOutcome {
    pub run_index: u64,
    pub n1: u64,
    pub n2: u64,
    pub p1_hat: Option<f64>,
    pub p2_hat: Option<f64>,
    pub m1: u64,
    pub m2: u64,
    pub m3: u64,
    pub key_len: u64,
    pub verified: bool,
    pub abort_reason: Option<AbortReason>,
}

/// An outcome plus both parties' final keys, for correctness assertions
/// and golden-vector tests; `run_protocol` strips this down to the
/// outcome alone.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDetail {
    pub outcome: ProtocolOutcome,
    pub alice_key: BitVector,
    pub bob_key: BitVector,
}

/// Sifted strings, grouped by basis (the basis tag of each kept round is
/// its group; chronological interleaving carries no extra information
/// for i.i.d. rounds).
#[derive(Debug, Clone, PartialEq)]
pub struct SiftedData {
    pub alice_bit: BitVector,
    pub bob_bit: BitVector,
    pub alice_phase: BitVector,
    pub bob_phase: BitVector,
}

impl SiftedData {
    pub fn counts(&self) -> SiftedCounts {
        SiftedCounts { n1: self.alice_bit.len() as u64, n2: self.alice_phase.len() as u64 }
    }
}

/// Check/keep split realized on the sifted strings, with the empirical
/// error estimates from the check sets.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationData {
    pub p1_hat: Option<f64>,
    pub p2_hat: Option<f64>,
    pub checks1: u64,
    pub checks2: u64,
    pub alice_keep1: BitVector,
    pub bob_keep1: BitVector,
    pub alice_keep2: BitVector,
    pub bob_keep2: BitVector,
}

/// One side's reconciliation result: Alice's β-rate string X, Bob's
/// estimate X̂, and the syndrome bits counted as leaked.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconciledPair {
    pub alice: BitVector,
    pub bob: BitVector,
    pub leaked: u64,
}

/// The RNG stream of run `run_index` under `master_seed`: two SplitMix64
/// rounds over the pair key a ChaCha8 generator. Runs are independent of
/// each other and of execution order.
pub fn run_rng(master_seed: u64, run_index: u64) -> ChaCha8Rng {
    fn splitmix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    let mixed = splitmix(
        splitmix(master_seed.wrapping_add(0x9e3779b97f4a7c15))
            ^ run_index.wrapping_mul(0xd1342543de82ef95).wrapping_add(1),
    );
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Step 1 — quantum communication and sifting. Per round: Alice's basis
/// ~ Bernoulli(r0) (phase with probability r0), Bob's basis likewise,
/// Alice's bit uniform; on a basis match the round survives sifting and
/// Bob's bit is Alice's XOR a channel flip of that basis. Expected
/// counts are n(1−r0)² and n·r0².
pub fn run_quantum_phase(config: &ProtocolConfig, rng: &mut ChaCha8Rng) -> SiftedData {
    let r0 = config.ratios.r0();
    let mut alice_bit = Vec::new();
    let mut bob_bit = Vec::new();
    let mut alice_phase = Vec::new();
    let mut bob_phase = Vec::new();
    for _ in 0..config.n {
        let alice_uses_phase = rng.gen_bool(r0);
        let bob_uses_phase = rng.gen_bool(r0);
        let bit = rng.gen_bool(0.5);
        if alice_uses_phase != bob_uses_phase {
            continue;
        }
        let q = if alice_uses_phase { config.channel.q2 } else { config.channel.q1 };
        let received = bit ^ rng.gen_bool(q);
        if alice_uses_phase {
            alice_phase.push(bit);
            bob_phase.push(received);
        } else {
            alice_bit.push(bit);
            bob_bit.push(received);
        }
    }
    SiftedData {
        alice_bit: BitVector::from_bits(&alice_bit),
        bob_bit: BitVector::from_bits(&bob_bit),
        alice_phase: BitVector::from_bits(&alice_phase),
        bob_phase: BitVector::from_bits(&bob_phase),
    }
}

/// Draws `checks` distinct positions out of `len` (partial Fisher–Yates)
/// and splits both parties' strings into (check disagreements, keeps in
/// position order).
fn sample_checks(
    alice: &BitVector,
    bob: &BitVector,
    checks: u64,
    rng: &mut ChaCha8Rng,
) -> (Option<f64>, BitVector, BitVector) {
    let len = alice.len();
    let checks = checks as usize;
    if checks == 0 {
        return (None, alice.clone(), bob.clone());
    }
    let mut idx: Vec<u32> = (0..len as u32).collect();
    for t in 0..checks {
        let j = rng.gen_range(t..len);
        idx.swap(t, j);
    }
    let mut is_check = vec![false; len];
    let mut disagreements = 0u64;
    for &i in &idx[..checks] {
        is_check[i as usize] = true;
        if alice.get(i as usize) != bob.get(i as usize) {
            disagreements += 1;
        }
    }
    let mut alice_keep = Vec::with_capacity(len - checks);
    let mut bob_keep = Vec::with_capacity(len - checks);
    for i in 0..len {
        if !is_check[i] {
            alice_keep.push(alice.get(i));
            bob_keep.push(bob.get(i));
        }
    }
    (
        Some(disagreements as f64 / checks as f64),
        BitVector::from_bits(&alice_keep),
        BitVector::from_bits(&bob_keep),
    )
}

/// Step 2 — error estimation. Check sets of sizes given by
/// [`crate::rate::plan_partition`] (the same split `finite_key_length`
/// budgets with) are sampled without replacement from each basis; p̂ is
/// the disagreement fraction on the checks, `None` where no checks were
/// taken. Bit-basis draws precede phase-basis draws in the RNG stream.
pub fn run_estimation(
    sifted: &SiftedData,
    r1: f64,
    r2: f64,
    rng: &mut ChaCha8Rng,
) -> Result<EstimationData, SimError> {
    let counts = sifted.counts();
    let part = match crate::rate::plan_partition(counts.n1, counts.n2, r1, r2) {
        Ok(p) => p,
        Err(RateError::UnestimableSide { side }) => return Err(SimError::Unestimable { side }),
        Err(e) => unreachable!("ratios are typed, partition cannot fail otherwise: {e}"),
    };
    let (p1_hat, alice_keep1, bob_keep1) =
        sample_checks(&sifted.alice_bit, &sifted.bob_bit, part.checks1, rng);
    let (p2_hat, alice_keep2, bob_keep2) =
        sample_checks(&sifted.alice_phase, &sifted.bob_phase, part.checks2, rng);
    Ok(EstimationData {
        p1_hat,
        p2_hat,
        checks1: part.checks1,
        checks2: part.checks2,
        alice_keep1,
        bob_keep1,
        alice_keep2,
        bob_keep2,
    })
}

/// Step 3 — information reconciliation on one side's keep-strings.
/// Alice's X is the first ⌊β·len⌋ bits of her keeps; the remaining
/// ⌈(1−β)·len⌉ bits are the syndrome cost, counted as leaked. Bob's X̂
/// equals X when the strategy's decoder succeeds; on failure (or under
/// `Passthrough`, whenever his raw prefix differs) X̂ ≠ X and the
/// verification step downstream catches it. The RNG parameter is unused
/// by the shipped strategies but fixed in the signature so a randomized
/// decoder slots in without changing call sites.
pub fn run_reconciliation(
    alice_keep: &BitVector,
    bob_keep: &BitVector,
    beta: f64,
    strategy: ReconciliationStrategy,
    _rng: &mut ChaCha8Rng,
) -> ReconciledPair {
    assert_eq!(alice_keep.len(), bob_keep.len(), "keep strings must align");
    let len = alice_keep.len();
    let x_len = (beta * len as f64).floor() as usize;
    let alice = alice_keep.slice(0, x_len);
    let leaked = (len - x_len) as u64;
    if len == 0 {
        return ReconciledPair { alice, bob: BitVector::zero(0), leaked };
    }

    let bob = match strategy {
        ReconciliationStrategy::Passthrough => bob_keep.slice(0, x_len),
        ReconciliationStrategy::Idealized { margin } => {
            let mut diff = alice_keep.clone();
            diff.xor_assign(bob_keep);
            let error_rate = diff.count_ones() as f64 / len as f64;
            let threshold = binary_entropy_inverse(1.0 - beta)
                .expect("1 - beta lies in [0, 1) for validated beta")
                - margin;
            if error_rate <= threshold {
                alice.clone()
            } else {
                // Decode failure: Bob is left with a corrupted string.
                // His raw prefix stands in for it; if the errors all
                // fell in the discarded suffix, flip a bit so failure
                // is never silently identical to success.
                let mut bob = bob_keep.slice(0, x_len);
                if bob == alice && x_len > 0 {
                    bob.set(0, !bob.get(0));
                }
                bob
            }
        }
    };
    ReconciledPair { alice, bob, leaked }
}

/// Step 4 — privacy amplification on one side. Hashes both parties'
/// reconciled strings from |X| bits down to |X| − sacrifice bits with
/// the *same* seeded map, drawn here (|X|−1 bits, one draw shared by
/// both parties). Returns empty keys when nothing would remain. Equal
/// inputs are hashed once — the map is deterministic, so Bob's output
/// is copied rather than recomputed when X̂ = X.
pub fn run_privacy_amplification(
    pair: &ReconciledPair,
    sacrifice: u64,
    rng: &mut ChaCha8Rng,
) -> (BitVector, BitVector) {
    let x_len = pair.alice.len();
    if x_len == 0 || sacrifice >= x_len as u64 {
        return (BitVector::zero(0), BitVector::zero(0));
    }
    let out_len = x_len - sacrifice as usize;
    let seed = BitVector::random(x_len - 1, rng);
    let hash = ToeplitzHash::new(x_len, out_len, seed).expect("seed drawn at length |X|-1");
    let alice = hash.apply(&pair.alice).expect("X has length |X|");
    let bob = if pair.bob == pair.alice {
        alice.clone()
    } else {
        hash.apply(&pair.bob).expect("X-hat has length |X|")
    };
    (alice, bob)
}

/// Step 5 — error verification across both sides. Each key-bearing side
/// exchanges m₃-bit tags (clamped to the key length) under a shared
/// seed; if every tag matches, each side discards its first
/// min(m₃, length) bits and the run's key is the bit-side key followed
/// by the phase-side key. Any mismatch discards everything. Bit-side
/// seed draws precede phase-side draws.
pub fn run_verification(
    sides: [(&BitVector, &BitVector); 2],
    m3: u64,
    rng: &mut ChaCha8Rng,
) -> (bool, BitVector, BitVector) {
    let mut verified = true;
    let mut alice_parts = Vec::new();
    let mut bob_parts = Vec::new();
    for (alice, bob) in sides {
        debug_assert_eq!(alice.len(), bob.len(), "PA outputs must align");
        if alice.is_empty() {
            continue;
        }
        let tag_len = (m3 as usize).min(alice.len());
        let seed = if tag_len == 0 {
            BitVector::zero(0)
        } else {
            BitVector::random(alice.len() - 1, rng)
        };
        let tag_a = verification_tag(alice, tag_len, &seed).expect("tag_len <= |key|");
        let tag_b = verification_tag(bob, tag_len, &seed).expect("tag_len <= |key|");
        if tag_a != tag_b {
            verified = false;
            continue;
        }
        alice_parts.push(alice.slice(tag_len, alice.len()));
        bob_parts.push(bob.slice(tag_len, bob.len()));
    }
    if !verified {
        return (false, BitVector::zero(0), BitVector::zero(0));
    }
    let join = |parts: &[BitVector]| {
        let total: usize = parts.iter().map(BitVector::len).sum();
        let mut bits = Vec::with_capacity(total);
        for p in parts {
            for i in 0..p.len() {
                bits.push(p.get(i));
            }
        }
        BitVector::from_bits(&bits)
    };
    (true, join(&alice_parts), join(&bob_parts))
}

/// One full protocol execution under the RNG stream of `run_index`,
/// returning the outcome together with both final keys.
///
/// The sacrificed lengths, reconciled lengths and m₃ come from
/// [`finite_key_length`] evaluated on this run's realized counts and
/// estimates — the simulator and the formula share one path, so for
/// verified runs `key_len` equals the formula's total exactly.
pub fn run_protocol_detailed(
    config: &ProtocolConfig,
    run_index: u64,
) -> Result<RunDetail, SimError> {
    config.validate()?;
    let mut rng = run_rng(config.master_seed, run_index);

    let sifted = run_quantum_phase(config, &mut rng);
    let counts = sifted.counts();

    let abort = |n1, n2, p1, p2, reason| RunDetail {
        outcome: ProtocolOutcome {
            run_index,
            n1,
            n2,
            p1_hat: p1,
            p2_hat: p2,
            m1: 0,
            m2: 0,
            m3: 0,
            key_len: 0,
            verified: false,
            abort_reason: Some(reason),
        },
        alice_key: BitVector::zero(0),
        bob_key: BitVector::zero(0),
    };

    let est = match run_estimation(&sifted, config.ratios.r1(), config.ratios.r2(), &mut rng) {
        Ok(e) => e,
        Err(SimError::Unestimable { .. }) => {
            return Ok(abort(counts.n1, counts.n2, None, None, AbortReason::UnestimableSide))
        }
        Err(e) => return Err(e),
    };

    let report: KeyLengthReport = match finite_key_length(
        config.n,
        counts,
        config.ratios,
        est.p1_hat,
        est.p2_hat,
        config.eps,
        config.beta,
    ) {
        Ok(r) => r,
        Err(RateError::UnestimableSide { .. }) => {
            return Ok(abort(
                counts.n1,
                counts.n2,
                est.p1_hat,
                est.p2_hat,
                AbortReason::UnestimableSide,
            ))
        }
        Err(RateError::InconclusiveEstimate(_)) => {
            return Ok(abort(
                counts.n1,
                counts.n2,
                est.p1_hat,
                est.p2_hat,
                AbortReason::InconclusiveEstimate,
            ))
        }
        Err(e) => unreachable!("validated config cannot fail the formula: {e}"),
    };

    let bit_pair = run_reconciliation(
        &est.alice_keep1,
        &est.bob_keep1,
        config.beta,
        config.reconciliation,
        &mut rng,
    );
    let phase_pair = run_reconciliation(
        &est.alice_keep2,
        &est.bob_keep2,
        config.beta,
        config.reconciliation,
        &mut rng,
    );

    let (alice_bit_key, bob_bit_key) =
        run_privacy_amplification(&bit_pair, report.sacrificed1, &mut rng);
    let (alice_phase_key, bob_phase_key) =
        run_privacy_amplification(&phase_pair, report.sacrificed2, &mut rng);

    let (verified, alice_key, bob_key) = run_verification(
        [(&alice_bit_key, &bob_bit_key), (&alice_phase_key, &bob_phase_key)],
        report.verification_bits,
        &mut rng,
    );

    Ok(RunDetail {
        outcome: ProtocolOutcome {
            run_index,
            n1: counts.n1,
            n2: counts.n2,
            p1_hat: est.p1_hat,
            p2_hat: est.p2_hat,
            m1: report.sacrificed1,
            m2: report.sacrificed2,
            m3: report.verification_bits,
            key_len: if verified { alice_key.len() as u64 } else { 0 },
            verified,
            abort_reason: if verified { None } else { Some(AbortReason::VerificationFailed) },
        },
        alice_key,
        bob_key,
    })
}

/// One protocol execution (run index 0), outcome only.
pub fn run_protocol(config: &ProtocolConfig) -> Result<ProtocolOutcome, SimError> {
    Ok(run_protocol_detailed(config, 0)?.outcome)
}

/// Key-length histogram bucket: counts key_len in [lo, hi).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramBucket {
    pub lo: u64,
    pub hi: u64,
    pub count: u64,
}

/// Ensemble aggregates. Estimate moments are over the runs where the
/// estimate existed (`p1_hat_count` / `p2_hat_count` of them); standard
/// deviations are sample-style (n−1) and 0 for fewer than two samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub trials: u64,
    pub verified: u64,
    pub aborted: u64,
    pub abort_rate: f64,
    pub mean_n1: f64,
    pub stddev_n1: f64,
    pub mean_n2: f64,
    pub stddev_n2: f64,
    pub p1_hat_count: u64,
    pub mean_p1_hat: f64,
    pub stddev_p1_hat: f64,
    pub p2_hat_count: u64,
    pub mean_p2_hat: f64,
    pub stddev_p2_hat: f64,
    pub mean_key_len: f64,
    pub stddev_key_len: f64,
    pub histogram: Vec<HistogramBucket>,
}

fn mean_stddev(values: impl Iterator<Item = f64> + Clone) -> (u64, f64, f64) {
    let count = values.clone().count() as u64;
    if count == 0 {
        return (0, 0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / count as f64;
    if count < 2 {
        return (count, mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64;
    (count, mean, var.sqrt())
}

fn key_len_histogram(outcomes: &[ProtocolOutcome]) -> Vec<HistogramBucket> {
    let min = outcomes.iter().map(|o| o.key_len).min().unwrap_or(0);
    let max = outcomes.iter().map(|o| o.key_len).max().unwrap_or(0);
    let width = ((max - min) / 16).max(1);
    let buckets = ((max - min) / width + 1).min(16);
    let mut hist: Vec<HistogramBucket> = (0..buckets)
        .map(|k| HistogramBucket { lo: min + k * width, hi: min + (k + 1) * width, count: 0 })
        .collect();
    for o in outcomes {
        let k = (((o.key_len - min) / width).min(buckets - 1)) as usize;
        hist[k].count += 1;
    }
    hist
}

/// Everything an ensemble produces: ordered per-trial outcomes plus the
/// aggregate summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub outcomes: Vec<ProtocolOutcome>,
    pub summary: EnsembleSummary,
}

/// Runs `trials` independent executions (in parallel; outcomes are
/// ordered by run index and independent of scheduling) and aggregates
/// them. Verified runs are asserted to have bit-identical keys on both
/// sides — the correctness invariant checked on every trial.
pub fn run_ensemble(config: &ProtocolConfig, trials: u64) -> Result<EnsembleResult, SimError> {
    config.validate()?;
    if trials == 0 {
        return Err(SimError::ZeroTrials);
    }
    let outcomes: Vec<ProtocolOutcome> = (0..trials)
        .into_par_iter()
        .map(|r| {
            let detail = run_protocol_detailed(config, r)
                .expect("config was validated before dispatch");
            assert!(
                !detail.outcome.verified || detail.alice_key == detail.bob_key,
                "verified run {r} has mismatched keys"
            );
            detail.outcome
        })
        .collect();

    let (_, mean_n1, stddev_n1) = mean_stddev(outcomes.iter().map(|o| o.n1 as f64));
    let (_, mean_n2, stddev_n2) = mean_stddev(outcomes.iter().map(|o| o.n2 as f64));
    let (p1_hat_count, mean_p1_hat, stddev_p1_hat) =
        mean_stddev(outcomes.iter().filter_map(|o| o.p1_hat));
    let (p2_hat_count, mean_p2_hat, stddev_p2_hat) =
        mean_stddev(outcomes.iter().filter_map(|o| o.p2_hat));
    let (_, mean_key_len, stddev_key_len) =
        mean_stddev(outcomes.iter().map(|o| o.key_len as f64));
    let verified = outcomes.iter().filter(|o| o.verified).count() as u64;
    let aborted = outcomes.iter().filter(|o| o.abort_reason.is_some()).count() as u64;

    let summary = EnsembleSummary {
        trials,
        verified,
        aborted,
        abort_rate: aborted as f64 / trials as f64,
        mean_n1,
        stddev_n1,
        mean_n2,
        stddev_n2,
        p1_hat_count,
        mean_p1_hat,
        stddev_p1_hat,
        p2_hat_count,
        mean_p2_hat,
        stddev_p2_hat,
        mean_key_len,
        stddev_key_len,
        histogram: key_len_histogram(&outcomes),
    };
    Ok(EnsembleResult { outcomes, summary })
}

/// Writes the per-trial CSV (schema `bb84-sim-trials/1`): one row per
/// run, floats at full precision, absent estimates as empty fields.
pub fn write_trials_csv<W: Write>(outcomes: &[ProtocolOutcome], out: &mut W) -> io::Result<()> {
    writeln!(out, "# schema: bb84-sim-trials/1")?;
    writeln!(out, "run_index,n1,n2,p1_hat,p2_hat,m1,m2,m3,key_len,verified,abort_reason")?;
    for o in outcomes {
        let fmt_est = |e: Option<f64>| e.map(|v| format!("{v:.16e}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            o.run_index,
            o.n1,
            o.n2,
            fmt_est(o.p1_hat),
            fmt_est(o.p2_hat),
            o.m1,
            o.m2,
            o.m3,
            o.key_len,
            o.verified,
            o.abort_reason.map(|r| r.to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}

/// Formats the summary as a JSON object (schema `bb84-sim-summary/1`),
/// floats at full precision — stable, diffable output.
pub fn format_summary(s: &EnsembleSummary) -> String {
    let mut out = String::from("{\n");
    out.push_str("  \"schema\": \"bb84-sim-summary/1\",\n");
    out.push_str(&format!("  \"trials\": {},\n", s.trials));
    out.push_str(&format!("  \"verified\": {},\n", s.verified));
    out.push_str(&format!("  \"aborted\": {},\n", s.aborted));
    out.push_str(&format!("  \"abort_rate\": {:.16e},\n", s.abort_rate));
    out.push_str(&format!("  \"mean_n1\": {:.16e},\n", s.mean_n1));
    out.push_str(&format!("  \"stddev_n1\": {:.16e},\n", s.stddev_n1));
    out.push_str(&format!("  \"mean_n2\": {:.16e},\n", s.mean_n2));
    out.push_str(&format!("  \"stddev_n2\": {:.16e},\n", s.stddev_n2));
    out.push_str(&format!("  \"p1_hat_count\": {},\n", s.p1_hat_count));
    out.push_str(&format!("  \"mean_p1_hat\": {:.16e},\n", s.mean_p1_hat));
    out.push_str(&format!("  \"stddev_p1_hat\": {:.16e},\n", s.stddev_p1_hat));
    out.push_str(&format!("  \"p2_hat_count\": {},\n", s.p2_hat_count));
    out.push_str(&format!("  \"mean_p2_hat\": {:.16e},\n", s.mean_p2_hat));
    out.push_str(&format!("  \"stddev_p2_hat\": {:.16e},\n", s.stddev_p2_hat));
    out.push_str(&format!("  \"mean_key_len\": {:.16e},\n", s.mean_key_len));
    out.push_str(&format!("  \"stddev_key_len\": {:.16e},\n", s.stddev_key_len));
    out.push_str("  \"histogram\": [");
    for (i, b) in s.histogram.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("[{}, {}, {}]", b.lo, b.hi, b.count));
    }
    out.push_str("]\n}\n");
    out
}
