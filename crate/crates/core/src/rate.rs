//! Finite-length and second-order key-length formulas, the analytic
//! optimal basis ratios, and a deterministic numerical optimizer used as
//! an independent oracle against the analytic optimum.
//!
//! Naming follows the protocol's asymmetric-basis bookkeeping. Of `n`
//! transmissions, matched bit-basis rounds (`n1` of them, probability
//! `(1−r0)²` each) and matched phase-basis rounds (`n2`, probability
//! `r0²`) survive sifting. A fraction `r1` of the bit-basis rounds and
//! `r2` of the phase-basis rounds are spent as checks; the rest are raw
//! key. Each side then gives up a sacrificed length `m` for privacy
//! amplification — computed from the *conjugate* basis' estimated error
//! rate, widened by the statistical allowance δ — plus `m3 = ⌈log₂ n⌉`
//! bits for error verification.
//!
//! Two views of the same quantity coexist deliberately:
//!
//! * [`finite_key_length`] — exact integer accounting for one realized
//!   run (floors, ceilings, the simulator's check/keep partition).
//! * [`averaged_key_length`] — the smooth second-order expectation
//!   n·A − √n·B(...), whose optimum over the ratios is
//!   [`max_key_length`] = n·A − n^{3/4}·2√(2AB) at
//!   r0 = √(B/2A)·n^{−1/4}.
//!
//! The two agree to O(log n) at expected counts; tests enforce that
//! scaling.

use crate::math::{
    binary_entropy, binary_entropy_total, coef_a, coef_b, delta, gaussian_upper_tail_inverse,
    MathError, Prob, SecurityLevel,
};
use thiserror::Error;

/// Errors from rate-formula evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    /// A scalar-math domain error (probability, quantile, sample size).
    #[error(transparent)]
    Math(#[from] MathError),
    /// A ratio parameter was outside [0, 1].
    #[error("ratio {name} must lie in [0, 1], got {value}")]
    RatioOutOfRange { name: &'static str, value: f64 },
    /// The reconciliation code rate β was outside (0, 1].
    #[error("beta must lie in (0, 1], got {0}")]
    BetaOutOfRange(f64),
    /// A block length of zero transmissions.
    #[error("block length n must be at least 1")]
    EmptyBlock,
    /// Rate formulas require error rates strictly below 1/2.
    #[error("error rate {name} must lie in (0, 1/2) for rate formulas, got {value}")]
    ErrorRateTooLarge { name: &'static str, value: f64 },
    /// A side generates keys but the estimate of its conjugate error rate
    /// is unavailable (no check sample, or no estimate supplied).
    #[error("{side} side generates keys but its conjugate error rate is unestimable")]
    UnestimableSide { side: &'static str },
    /// The widened estimate p̂ + δ reached 1, where h is no longer
    /// meaningful: the run is inconclusive and must abort.
    #[error("widened estimate p + delta = {0} reaches 1: inconclusive, abort run")]
    InconclusiveEstimate(f64),
    /// Sifted counts exceeding the block length they came from.
    #[error("sifted counts n1 + n2 = {0} exceed the block length n = {1}")]
    CountsExceedBlock(u64, u64),
    /// First-order coefficient A ≤ 0: no keys are extractable at any
    /// block length.
    #[error("zero-rate regime: A = {0} is not positive, no keys extractable")]
    ZeroRate(f64),
}

/// Parameters of one rate computation: true (or assumed) error rates,
/// security level, code rate, block length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    p1: Prob,
    p2: Prob,
    eps: SecurityLevel,
    beta: f64,
    n: u64,
}

impl RateParams {
    /// Validates β ∈ (0, 1], n ≥ 1, and both error rates < 1/2 (the
    /// second-order expansion needs h′ > 0 on both bases).
    pub fn new(p1: Prob, p2: Prob, eps: SecurityLevel, beta: f64, n: u64) -> Result<Self, RateError> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(RateError::BetaOutOfRange(beta));
        }
        if n == 0 {
            return Err(RateError::EmptyBlock);
        }
        if p1.get() >= 0.5 {
            return Err(RateError::ErrorRateTooLarge { name: "p1", value: p1.get() });
        }
        if p2.get() >= 0.5 {
            return Err(RateError::ErrorRateTooLarge { name: "p2", value: p2.get() });
        }
        Ok(RateParams { p1, p2, eps, beta, n })
    }

    pub fn p1(&self) -> Prob {
        self.p1
    }
    pub fn p2(&self) -> Prob {
        self.p2
    }
    pub fn eps(&self) -> SecurityLevel {
        self.eps
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn n(&self) -> u64 {
        self.n
    }
}

/// The three protocol ratios: `r0` (phase-basis selection probability),
/// `r1` (bit-basis check fraction), `r2` (phase-basis check fraction).
///
/// All three live on the closed interval [0, 1]. Endpoints are
/// meaningful protocol choices — r1 = 0 (no bit-side checks), r2 = 1
/// (the whole phase basis is checks), r0 ∈ {0, 1} (single-basis
/// operation) — and each formula enforces its own stricter preconditions
/// where the endpoint would be degenerate (see
/// [`RateError::UnestimableSide`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratios {
    r0: f64,
    r1: f64,
    r2: f64,
}

impl Ratios {
    /// Validates each ratio into [0, 1].
    pub fn new(r0: f64, r1: f64, r2: f64) -> Result<Self, RateError> {
        let check = |name: &'static str, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(RateError::RatioOutOfRange { name, value })
            }
        };
        check("r0", r0)?;
        check("r1", r1)?;
        check("r2", r2)?;
        Ok(Ratios { r0, r1, r2 })
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }
    pub fn r1(&self) -> f64 {
        self.r1
    }
    pub fn r2(&self) -> f64 {
        self.r2
    }
}

/// Sifted-round counts: `n1` matched bit-basis rounds, `n2` matched
/// phase-basis rounds. Expectations are n(1−r0)² and n·r0².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiftedCounts {
    pub n1: u64,
    pub n2: u64,
}

/// The integer check/keep split of the sifted rounds.
///
/// Shared verbatim between [`finite_key_length`] and the protocol
/// simulator so the two compute byte-identical key lengths — see
/// [`plan_partition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partition {
    /// Bit-basis check bits (estimate p1).
    pub checks1: u64,
    /// Bit-basis raw key bits.
    pub keep1: u64,
    /// Phase-basis check bits (estimate p2).
    pub checks2: u64,
    /// Phase-basis raw key bits.
    pub keep2: u64,
}

/// Splits each basis' sifted rounds into checks and keeps.
///
/// Check counts round to nearest (`round(rᵢ·nᵢ)`), then a minimum of one
/// check is enforced wherever the *opposite* side generates raw key and
/// would otherwise have no estimate: first the phase-basis checks (needed
/// by bit-side keys), then the bit-basis checks (needed by phase-side
/// keys). Bumps are applied in that fixed order and never undone, so the
/// split is a deterministic function of its inputs. A side that needs an
/// estimate whose basis has zero sifted rounds is unestimable.
pub fn plan_partition(n1: u64, n2: u64, r1: f64, r2: f64) -> Result<Partition, RateError> {
    for (name, r) in [("r1", r1), ("r2", r2)] {
        if !(0.0..=1.0).contains(&r) {
            return Err(RateError::RatioOutOfRange { name, value: r });
        }
    }
    let mut checks1 = (r1 * n1 as f64).round() as u64;
    let mut checks2 = (r2 * n2 as f64).round() as u64;
    let mut keep1 = n1 - checks1;
    let mut keep2 = n2 - checks2;
    if keep1 > 0 && checks2 == 0 {
        if n2 == 0 {
            return Err(RateError::UnestimableSide { side: "bit" });
        }
        checks2 = 1;
        keep2 = n2 - 1;
    }
    if keep2 > 0 && checks1 == 0 {
        if n1 == 0 {
            return Err(RateError::UnestimableSide { side: "phase" });
        }
        checks1 = 1;
        keep1 = n1 - 1;
    }
    Ok(Partition { checks1, keep1, checks2, keep2 })
}

/// Smallest k with 2^k ≥ n (so a k-bit tag distinguishes n possibilities);
/// the verification length m₃ = ⌈log₂ n⌉.
pub fn ceil_log2(n: u64) -> u32 {
    assert!(n >= 1, "ceil_log2 needs n >= 1");
    if n == 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Full accounting of one finite-length key computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyLengthReport {
    /// Check/keep split used on both bases.
    pub partition: Partition,
    /// Bit-side sacrificed length m₁ = ⌈keep₁·h(p̂₂+δ)⌉ (0 if no bit keys).
    pub sacrificed1: u64,
    /// Phase-side sacrificed length m₂ (0 if no phase keys).
    pub sacrificed2: u64,
    /// Verification length m₃ = ⌈log₂ n⌉, charged once per key-bearing side.
    pub verification_bits: u64,
    /// Reconciled lengths ⌊β·keepᵢ⌋ per side.
    pub reconciled1: u64,
    pub reconciled2: u64,
    /// Final per-side key lengths, floored at zero.
    pub length_bit_side: u64,
    pub length_phase_side: u64,
    /// total = length_bit_side + length_phase_side.
    pub total: u64,
}

/// ⌈keep·h(p + δ(p, ε, keep, checks))⌉ for real-valued effective sample
/// sizes — the sacrificed-length kernel shared by both public wrappers
/// and [`finite_key_length`].
fn sacrificed_from_samples(
    keep: f64,
    checks: f64,
    p: f64,
    eps: SecurityLevel,
) -> Result<u64, RateError> {
    let d = delta(p, eps, keep, checks)?;
    let widened = p + d;
    if widened >= 1.0 {
        return Err(RateError::InconclusiveEstimate(widened));
    }
    Ok((keep * binary_entropy_total(widened)).ceil() as u64)
}

/// Bit-side sacrificed length m₁: privacy amplification removes
/// ⌈(1−r1)·n1 · h(p2 + δ(p2, ε, (1−r1)n1, r2·n2))⌉ bits, the phase-basis
/// error rate widened by the allowance for estimating it on `r2·n2`
/// checks and applying it to `(1−r1)·n1` keys.
pub fn sacrificed_length_bit_side(
    n1: u64,
    n2: u64,
    r1: f64,
    r2: f64,
    p2: Prob,
    eps: SecurityLevel,
) -> Result<u64, RateError> {
    let keep = (1.0 - r1) * n1 as f64;
    let checks = r2 * n2 as f64;
    sacrificed_from_samples(keep, checks, p2.get(), eps)
}

/// Phase-side sacrificed length m₂ — the mirror of the bit side with
/// keeps (1−r2)·n2 and checks r1·n1, widened from the bit-basis rate p1.
/// Returns 0 when no phase-side keys exist ((1−r2)·n2 = 0): nothing to
/// sacrifice.
pub fn sacrificed_length_phase_side(
    n1: u64,
    n2: u64,
    r1: f64,
    r2: f64,
    p1: Prob,
    eps: SecurityLevel,
) -> Result<u64, RateError> {
    let keep = (1.0 - r2) * n2 as f64;
    if keep == 0.0 {
        return Ok(0);
    }
    let checks = r1 * n1 as f64;
    sacrificed_from_samples(keep, checks, p1.get(), eps)
}

/// Exact integer key-length accounting for one realized run.
///
/// `n_total` is the number of transmissions (it sets m₃ = ⌈log₂ n⌉;
/// the sifted counts alone cannot reconstruct it). The error-rate
/// estimates are empirical values in [0, 1] and may be absent when the
/// side that needs them generates no keys (e.g. r2 = 1 leaves p̂1
/// undefined — and unneeded). Per side:
///
/// ```text
/// length = max(0, ⌊β·keep⌋ − m − m₃)
/// ```
///
/// A side with zero raw bits contributes zero length and is charged no
/// m₃. The check/keep split comes from [`plan_partition`], the same
/// function the simulator uses, so simulated runs and this formula agree
/// exactly.
pub fn finite_key_length(
    n_total: u64,
    counts: SiftedCounts,
    ratios: Ratios,
    p1_est: Option<f64>,
    p2_est: Option<f64>,
    eps: SecurityLevel,
    beta: f64,
) -> Result<KeyLengthReport, RateError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(RateError::BetaOutOfRange(beta));
    }
    if n_total == 0 {
        return Err(RateError::EmptyBlock);
    }
    if counts.n1.saturating_add(counts.n2) > n_total {
        return Err(RateError::CountsExceedBlock(counts.n1 + counts.n2, n_total));
    }
    let part = plan_partition(counts.n1, counts.n2, ratios.r1(), ratios.r2())?;
    let m3 = ceil_log2(n_total) as u64;

    let side = |keep: u64,
                checks: u64,
                est: Option<f64>,
                side_name: &'static str|
     -> Result<(u64, u64, u64), RateError> {
        if keep == 0 {
            return Ok((0, 0, 0));
        }
        let p = est.ok_or(RateError::UnestimableSide { side: side_name })?;
        let m = sacrificed_from_samples(keep as f64, checks as f64, p, eps)?;
        let reconciled = (beta * keep as f64).floor() as u64;
        let length = reconciled.saturating_sub(m).saturating_sub(m3);
        Ok((m, reconciled, length))
    };

    // Bit-side keys are widened by the phase estimate and vice versa.
    let (m1, rec1, len1) = side(part.keep1, part.checks2, p2_est, "bit")?;
    let (m2, rec2, len2) = side(part.keep2, part.checks1, p1_est, "phase")?;

    Ok(KeyLengthReport {
        partition: part,
        sacrificed1: m1,
        sacrificed2: m2,
        verification_bits: m3,
        reconciled1: rec1,
        reconciled2: rec2,
        length_bit_side: len1,
        length_phase_side: len2,
        total: len1 + len2,
    })
}

/// Second-order expectation of the key length over the sifting and
/// estimation randomness:
///
/// ```text
/// n·[A(p2)·g1 + A(p1)·g2]
///   − √n·[B(p2,ε)·√(g1(g1+e1)/e1) + B(p1,ε)·√(g2(g2+e2)/e2)]
/// ```
///
/// with generated-bit fractions g1 = (1−r0)²(1−r1), g2 = r0²(1−r2) and
/// estimation fractions e1 = r0²·r2, e2 = (1−r0)²·r1. Bit-side keys pair
/// with the *phase* coefficients A(p2), B(p2) (their sacrifice is
/// h(p̂2+δ)) and symmetrically — matching [`finite_key_length`] and
/// [`max_key_length`], with which this must agree to O(log n) and
/// o(n^{3/4}) respectively.
///
/// A √-term whose generated-bit fraction g is zero is defined as 0 —
/// that side produces no keys and leaks nothing — and its denominator is
/// never touched. A side with g > 0 but e = 0 is unestimable and errors.
pub fn averaged_key_length(params: RateParams, ratios: Ratios) -> Result<f64, RateError> {
    let (r0, r1, r2) = (ratios.r0(), ratios.r1(), ratios.r2());
    let g1 = (1.0 - r0) * (1.0 - r0) * (1.0 - r1);
    let e1 = r0 * r0 * r2;
    let g2 = r0 * r0 * (1.0 - r2);
    let e2 = (1.0 - r0) * (1.0 - r0) * r1;

    let a1 = coef_a(params.p1(), params.beta());
    let a2 = coef_a(params.p2(), params.beta());
    let first = a2 * g1 + a1 * g2;

    let mut second = 0.0;
    if g1 > 0.0 {
        if e1 == 0.0 {
            return Err(RateError::UnestimableSide { side: "bit" });
        }
        second += coef_b(params.p2(), params.eps())? * (g1 * (g1 + e1) / e1).sqrt();
    }
    if g2 > 0.0 {
        if e2 == 0.0 {
            return Err(RateError::UnestimableSide { side: "phase" });
        }
        second += coef_b(params.p1(), params.eps())? * (g2 * (g2 + e2) / e2).sqrt();
    }

    let n = params.n() as f64;
    Ok(n * first - n.sqrt() * second)
}

/// The analytic optimum of [`averaged_key_length`], with bookkeeping
/// about how it was reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalRatios {
    pub ratios: Ratios,
    /// The n^{−1/4} formula left [1/n, 1/2] and was clamped — the
    /// asymptotic regime is not reached at this block length.
    pub clamped: bool,
    /// h(p2) > h(p1): the basis roles were swapped (keys from the phase
    /// basis, bit basis spent on estimation).
    pub swapped: bool,
}

/// Picks the key basis (the one whose *conjugate* error rate has the
/// smaller entropy) and returns the coefficients A, B of that
/// orientation plus the swap flag.
fn key_basis_coefficients(params: RateParams) -> Result<(f64, f64, bool), RateError> {
    let swapped = binary_entropy(params.p2()) > binary_entropy(params.p1());
    let p_key = if swapped { params.p1() } else { params.p2() };
    let a = coef_a(p_key, params.beta());
    if a <= 0.0 {
        return Err(RateError::ZeroRate(a));
    }
    Ok((a, coef_b(p_key, params.eps())?, swapped))
}

/// Analytic optimal ratios: r0 = √(B(p2,ε)/(2A(p2)))·n^{−1/4}, r1 = 0,
/// r2 = 1 when h(p2) ≤ h(p1) — all keys from the bit basis, the whole
/// phase basis spent estimating p2. When h(p2) > h(p1) the basis roles
/// swap (r0 → 1−r0, r1 = 1, r2 = 0) and the p1 coefficients apply.
/// r0 is clamped into [1/n, 1/2] with a flag when the raw value falls
/// outside.
pub fn optimal_ratios(params: RateParams) -> Result<OptimalRatios, RateError> {
    let (a, b, swapped) = key_basis_coefficients(params)?;
    let n = params.n() as f64;
    let raw = (b / (2.0 * a)).sqrt() * n.powf(-0.25);
    let clamped_r0 = raw.clamp(1.0 / n, 0.5);
    let clamped = clamped_r0 != raw;
    let ratios = if swapped {
        Ratios::new(1.0 - clamped_r0, 1.0, 0.0)
    } else {
        Ratios::new(clamped_r0, 0.0, 1.0)
    }
    .expect("clamped optimum is inside the unit cube");
    Ok(OptimalRatios { ratios, clamped, swapped })
}

/// The maximum of [`averaged_key_length`] over the ratios, to second
/// order: n·A − n^{3/4}·2·√(2AB) with the key-basis coefficients.
/// Division by n gives the rate form A·(1 − n^{−1/4}·2√(2B/A)) plotted
/// by [`rate_curve`].
pub fn max_key_length(params: RateParams) -> Result<f64, RateError> {
    let (a, b, _) = key_basis_coefficients(params)?;
    let n = params.n() as f64;
    Ok(n * a - n.powf(0.75) * 2.0 * (2.0 * a * b).sqrt())
}

/// One ε-series of the rate curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub eps: SecurityLevel,
    /// (n, rate) points in the grid's order.
    pub points: Vec<(f64, f64)>,
}

/// The key-generation-rate figure: per-transmission rates against block
/// length for several security levels, plus the first-order asymptote.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    /// A(p2), the n → ∞ limit of every series.
    pub asymptote: f64,
    pub series: Vec<RateSeries>,
}

/// Computes rate(n, ε) = A·(1 − n^{−1/4}·2·√(2B/A)) for each grid point
/// and security level.
///
/// Values below a series' knee (n < (2√(2B/A))⁴) are negative — zero
/// extractable keys — and are emitted *unclipped* so every series stays
/// strictly increasing in n and the series stay strictly ordered in ε at
/// every grid point; consumers that draw the figure clamp the axis
/// instead. The grid takes real-valued n ≥ 1 (the figure's abscissa is
/// log₁₀ n on a fractional grid).
pub fn rate_curve(
    p2: Prob,
    eps_list: &[SecurityLevel],
    beta: f64,
    n_grid: &[f64],
) -> Result<RateCurve, RateError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(RateError::BetaOutOfRange(beta));
    }
    let a = coef_a(p2, beta);
    if a <= 0.0 {
        return Err(RateError::ZeroRate(a));
    }
    if n_grid.iter().any(|&n| !(n >= 1.0) || !n.is_finite()) {
        return Err(RateError::EmptyBlock);
    }
    let mut series = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let b = coef_b(p2, eps)?;
        let penalty = 2.0 * (2.0 * b / a).sqrt();
        let points = n_grid
            .iter()
            .map(|&n| (n, a * (1.0 - n.powf(-0.25) * penalty)))
            .collect();
        series.push(RateSeries { eps, points });
    }
    Ok(RateCurve { asymptote: a, series })
}

/// The β = efficiency·(1 − h(p)) rule: the code rate of a reconciliation
/// code running at the given fraction of the Shannon limit for a binary
/// symmetric channel at rate p. The headline parameter set uses
/// efficiency 0.9 at p = 0.05, giving β = 0.642243.
pub fn code_rate_for_efficiency(p: Prob, efficiency: f64) -> f64 {
    efficiency * (1.0 - binary_entropy(p))
}

/// Deterministic grid + coordinate-descent maximizer of
/// [`averaged_key_length`] — the oracle the analytic optimum is tested
/// against. Degenerate cells where the formula errors count as −∞.
///
/// The coarse grid covers r0 ∈ [1/n, 1/2] log-spaced (60 points),
/// r1 ∈ [0, 0.98] and r2 ∈ [0.02, 1] linear (50 points each); local
/// refinement then shrinks steps geometrically (r0 multiplicatively,
/// r1/r2 additively) until they fall below 10⁻⁹. When h(p2) > h(p1) the
/// search runs on the swapped orientation — whose optimum lies inside
/// the canonical r0 ≤ 1/2 domain — and the argmax is mapped back
/// (r0 → 1−r0, r1 ↔ r2), which leaves the value invariant.
pub fn numeric_optimize(params: RateParams) -> (Ratios, f64) {
    let swapped = binary_entropy(params.p2()) > binary_entropy(params.p1());
    let canonical = if swapped {
        RateParams::new(params.p2(), params.p1(), params.eps(), params.beta(), params.n())
            .expect("swapping error rates preserves validity")
    } else {
        params
    };

    let value_at = |r0: f64, r1: f64, r2: f64| -> f64 {
        match Ratios::new(r0, r1, r2) {
            Ok(r) => averaged_key_length(canonical, r).unwrap_or(f64::NEG_INFINITY),
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let n = canonical.n() as f64;
    let r0_lo = (1.0 / n).min(0.5);
    let r0_hi = 0.5;
    let r0_pts = 60usize;
    let r0_factor = (r0_hi / r0_lo).powf(1.0 / (r0_pts - 1) as f64);

    let mut best = (r0_lo, 0.0, 1.0);
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..r0_pts {
        let r0 = (r0_lo * r0_factor.powi(i as i32)).min(r0_hi);
        for j in 0..50 {
            let r1 = j as f64 * 0.02; // 0, 0.02, …, 0.98
            for k in 0..50 {
                let r2 = (k + 1) as f64 * 0.02; // 0.02, …, 1.0
                let v = value_at(r0, r1, r2);
                if v > best_val {
                    best_val = v;
                    best = (r0, r1, r2);
                }
            }
        }
    }

    // Coordinate descent: probe each axis both ways, keep improvements,
    // shrink the steps when a sweep stalls.
    let (mut r0, mut r1, mut r2) = best;
    let mut f0 = r0_factor; // multiplicative step for r0
    let mut lin = 0.02_f64; // additive step for r1, r2
    for _ in 0..200 {
        let mut improved = false;
        for (c0, c1, c2) in [
            ((r0 * f0).min(r0_hi), r1, r2),
            ((r0 / f0).max(r0_lo), r1, r2),
            (r0, (r1 + lin).min(0.999_999), r2),
            (r0, (r1 - lin).max(0.0), r2),
            (r0, r1, (r2 + lin).min(1.0)),
            (r0, r1, (r2 - lin).max(1e-9)),
        ] {
            let v = value_at(c0, c1, c2);
            if v > best_val {
                best_val = v;
                (r0, r1, r2) = (c0, c1, c2);
                improved = true;
            }
        }
        if !improved {
            f0 = f0.sqrt();
            lin *= 0.5;
            if f0 < 1.0 + 1e-9 && lin < 1e-9 {
                break;
            }
        }
    }

    let ratios = if swapped {
        Ratios::new(1.0 - r0, r2, r1)
    } else {
        Ratios::new(r0, r1, r2)
    }
    .expect("search stays inside the unit cube");
    (ratios, best_val)
}

/// Exposes the Φ⁻¹ quantile a caller needs to reproduce B by hand —
/// kept here so downstream reporting does not re-wrap the math module.
pub fn quantile_for(eps: SecurityLevel) -> f64 {
    gaussian_upper_tail_inverse(eps.epsilon_du())
        .expect("eps_du in (0,1) is inside the quantile domain")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prob(p: f64) -> Prob {
        Prob::new(p).unwrap()
    }

    fn sec(e: f64) -> SecurityLevel {
        SecurityLevel::new(e).unwrap()
    }

    fn headline_params(n: u64) -> RateParams {
        let p = prob(0.05);
        let beta = code_rate_for_efficiency(p, 0.9);
        RateParams::new(p, p, sec(1e-2), beta, n).unwrap()
    }

    fn assert_rel(actual: f64, expected: f64, tol: f64) {
        let rel = ((actual - expected) / expected).abs();
        assert!(
            rel <= tol,
            "expected {expected}, got {actual} (rel diff {rel:.3e})"
        );
    }

    #[test]
    fn params_validation() {
        let p = prob(0.05);
        let e = sec(1e-2);
        assert!(RateParams::new(p, p, e, 0.6, 1000).is_ok());
        assert!(matches!(
            RateParams::new(p, p, e, 0.0, 1000),
            Err(RateError::BetaOutOfRange(_))
        ));
        assert!(matches!(
            RateParams::new(p, p, e, 1.1, 1000),
            Err(RateError::BetaOutOfRange(_))
        ));
        assert!(matches!(RateParams::new(p, p, e, 0.6, 0), Err(RateError::EmptyBlock)));
        assert!(matches!(
            RateParams::new(prob(0.5001), p, e, 0.6, 10),
            Err(RateError::ErrorRateTooLarge { name: "p1", .. })
        ));
    }

    #[test]
    fn ratios_validation() {
        assert!(Ratios::new(0.0, 0.0, 0.0).is_ok());
        assert!(Ratios::new(1.0, 1.0, 1.0).is_ok());
        assert!(matches!(
            Ratios::new(-0.1, 0.0, 1.0),
            Err(RateError::RatioOutOfRange { name: "r0", .. })
        ));
        assert!(matches!(
            Ratios::new(0.1, 1.5, 1.0),
            Err(RateError::RatioOutOfRange { name: "r1", .. })
        ));
        assert!(Ratios::new(0.1, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
        assert_eq!(ceil_log2(1_000_000), 20);
        assert_eq!(ceil_log2(2_000_000), 21);
    }

    #[test]
    fn partition_rounds_and_bumps() {
        // Plain rounding.
        let p = plan_partition(1000, 500, 0.1, 0.5).unwrap();
        assert_eq!(p, Partition { checks1: 100, keep1: 900, checks2: 250, keep2: 250 });
        // r2 = 0 but bit side generates keys: phase checks bumped to 1.
        let p = plan_partition(1000, 500, 0.0, 0.0).unwrap();
        assert_eq!(p.checks2, 1);
        assert_eq!(p.keep2, 499);
        // bump then triggers the mirror bump for the now-keyed phase side.
        assert_eq!(p.checks1, 1);
        assert_eq!(p.keep1, 999);
        // Bit keys requested with an empty phase basis: unestimable.
        assert!(matches!(
            plan_partition(1000, 0, 0.0, 1.0),
            Err(RateError::UnestimableSide { side: "bit" })
        ));
        // r2 = 1 consumes the whole phase basis; nothing needs bumping.
        let p = plan_partition(1000, 500, 0.0, 1.0).unwrap();
        assert_eq!(p, Partition { checks1: 0, keep1: 1000, checks2: 500, keep2: 0 });
    }

    #[test]
    fn sacrificed_bit_side_example() {
        // n1=1e6, n2=1e4, r1=0, r2=1, p2=0.05, ε=1e-2. mpmath:
        // δ = 8.1458347e-3, h(0.0581458…) = 0.32004017…, m1 = 320041.
        let m1 =
            sacrificed_length_bit_side(1_000_000, 10_000, 0.0, 1.0, prob(0.05), sec(1e-2))
                .unwrap();
        assert_eq!(m1, 320_041);
    }

    #[test]
    fn sacrificed_doubling_stays_sublinear() {
        // Doubling the keeps (checks fixed) or both samples scales m1 by
        // slightly UNDER 2: δ shrinks, but h grows sublinearly. mpmath:
        // 320041 → 639919 (keeps only, ratio 1.99949) and → 620757 (both
        // samples, ratio 1.93962).
        let e = sec(1e-2);
        let base =
            sacrificed_length_bit_side(1_000_000, 10_000, 0.0, 1.0, prob(0.05), e).unwrap();
        let keeps_doubled =
            sacrificed_length_bit_side(2_000_000, 10_000, 0.0, 1.0, prob(0.05), e).unwrap();
        let both_doubled =
            sacrificed_length_bit_side(2_000_000, 20_000, 0.0, 1.0, prob(0.05), e).unwrap();
        assert_eq!(keeps_doubled, 639_919);
        assert_eq!(both_doubled, 620_757);
        for m in [keeps_doubled, both_doubled] {
            let ratio = m as f64 / base as f64;
            assert!(ratio > 1.9 && ratio < 2.0, "ratio {ratio}");
        }
    }

    #[test]
    fn sacrificed_delta_to_zero_limit() {
        // Both samples → ∞ drives δ → 0, so m1/keep → h(p2).
        let m1 = sacrificed_length_bit_side(
            1_000_000_000_000,
            1_000_000_000_000,
            0.0,
            1.0,
            prob(0.05),
            sec(1e-2),
        )
        .unwrap();
        let per_bit = m1 as f64 / 1e12;
        assert_rel(per_bit, 0.28639695711595613, 1e-4);
    }

    #[test]
    fn sacrificed_phase_side_example_and_degenerate() {
        // r2 = 1: no phase-side keys, nothing to sacrifice.
        assert_eq!(
            sacrificed_length_phase_side(1_000_000, 10_000, 0.0, 1.0, prob(0.05), sec(1e-2))
                .unwrap(),
            0
        );
        // n1=n2=1e5, r1=r2=0.1, p1=0.03, ε=1e-2: keeps 9e4, checks 1e4.
        // mpmath: δ = 6.68734e-3, h(0.0366873…) = 0.22689193, m2 = 20421.
        let m2 = sacrificed_length_phase_side(100_000, 100_000, 0.1, 0.1, prob(0.03), sec(1e-2))
            .unwrap();
        assert_eq!(m2, 20_421);
    }

    #[test]
    fn sacrificed_sides_are_mirrors() {
        // phase_side(n1, n2, r1, r2, p) = bit_side(n2, n1, r2, r1, p).
        let e = sec(1e-2);
        for &(n1, n2, r1, r2, p) in &[
            (100_000u64, 50_000u64, 0.1, 0.25, 0.03),
            (10_000, 10_000, 0.5, 0.5, 0.11),
            (77_777, 33_333, 0.3, 0.4, 0.07),
        ] {
            let phase = sacrificed_length_phase_side(n1, n2, r1, r2, prob(p), e).unwrap();
            let bit = sacrificed_length_bit_side(n2, n1, r2, r1, prob(p), e).unwrap();
            assert_eq!(phase, bit);
        }
    }

    #[test]
    fn sacrificed_estimation_impossible() {
        // r2·n2 < 1: no check sample to estimate from.
        assert!(matches!(
            sacrificed_length_bit_side(1000, 10_000, 0.0, 0.0, prob(0.05), sec(1e-2)),
            Err(RateError::Math(MathError::SampleTooSmall(..)))
        ));
    }

    #[test]
    fn sacrificed_inconclusive_when_widened_estimate_saturates() {
        // Tiny samples at a high rate push p + δ past 1.
        assert!(matches!(
            sacrificed_length_bit_side(2, 1, 0.0, 1.0, prob(0.49), sec(1e-10)),
            Err(RateError::InconclusiveEstimate(_))
        ));
    }

    #[test]
    fn finite_key_length_expected_counts_example() {
        // n=1e6 split at r0=0.022: counts (956484, 484), r1=0, r2=1,
        // p2=0.05, β=0.642243, ε=1e-2. mpmath: m1=407342, reconciled
        // 614295, m3=20, single bit-side key of 206933.
        let report = finite_key_length(
            1_000_000,
            SiftedCounts { n1: 956_484, n2: 484 },
            Ratios::new(0.022, 0.0, 1.0).unwrap(),
            None,
            Some(0.05),
            sec(1e-2),
            0.642243,
        )
        .unwrap();
        assert_eq!(report.sacrificed1, 407_342);
        assert_eq!(report.sacrificed2, 0);
        assert_eq!(report.verification_bits, 20);
        assert_eq!(report.reconciled1, 614_295);
        assert_eq!(report.length_bit_side, 206_933);
        assert_eq!(report.length_phase_side, 0);
        assert_eq!(report.total, 206_933);
    }

    #[test]
    fn finite_key_length_doubling_more_than_doubles_total() {
        // Doubling all counts shrinks δ, so the sacrificed share falls
        // and the total grows by MORE than 2× (the subtracted penalty is
        // what shrinks relatively). mpmath: 206933 → 486077, ratio 2.349.
        let e = sec(1e-2);
        let r = Ratios::new(0.022, 0.0, 1.0).unwrap();
        let base = finite_key_length(
            1_000_000,
            SiftedCounts { n1: 956_484, n2: 484 },
            r,
            None,
            Some(0.05),
            e,
            0.642243,
        )
        .unwrap();
        let doubled = finite_key_length(
            2_000_000,
            SiftedCounts { n1: 2 * 956_484, n2: 2 * 484 },
            r,
            None,
            Some(0.05),
            e,
            0.642243,
        )
        .unwrap();
        assert_eq!(doubled.total, 486_077);
        let ratio = doubled.total as f64 / base.total as f64;
        assert!(ratio > 2.0 && ratio < 2.5, "ratio {ratio}");
    }

    #[test]
    fn finite_key_length_floors_at_zero() {
        // β below h(p̂2+δ): the side cannot pay its sacrifice.
        let report = finite_key_length(
            1_000_000,
            SiftedCounts { n1: 956_484, n2: 484 },
            Ratios::new(0.022, 0.0, 1.0).unwrap(),
            None,
            Some(0.05),
            sec(1e-2),
            0.3,
        )
        .unwrap();
        assert_eq!(report.length_bit_side, 0);
        assert_eq!(report.total, 0);
    }

    #[test]
    fn finite_key_length_missing_estimate_errors() {
        assert!(matches!(
            finite_key_length(
                1_000_000,
                SiftedCounts { n1: 956_484, n2: 484 },
                Ratios::new(0.022, 0.0, 1.0).unwrap(),
                None,
                None, // bit side generates keys but p̂2 is absent
                sec(1e-2),
                0.642243,
            ),
            Err(RateError::UnestimableSide { side: "bit" })
        ));
    }

    #[test]
    fn finite_key_length_rejects_inconsistent_counts() {
        assert!(matches!(
            finite_key_length(
                100,
                SiftedCounts { n1: 90, n2: 20 },
                Ratios::new(0.5, 0.1, 0.5).unwrap(),
                Some(0.0),
                Some(0.0),
                sec(1e-2),
                0.642243,
            ),
            Err(RateError::CountsExceedBlock(110, 100))
        ));
    }

    #[test]
    fn averaged_symmetric_allocation_fixtures() {
        // r0 = r1 = r2 = 1/2, n = 1e8. mpmath fixtures (40 digits):
        // p1 = p2 = 0.05           → 8861713.3491546558
        // p1 = 0.03, p2 = 0.05     → 10013084.843211314
        let r = Ratios::new(0.5, 0.5, 0.5).unwrap();
        let v1 = averaged_key_length(headline_params(100_000_000), r).unwrap();
        assert_rel(v1, 8_861_713.3491546558, 1e-12);

        let beta = code_rate_for_efficiency(prob(0.05), 0.9);
        let params =
            RateParams::new(prob(0.03), prob(0.05), sec(1e-2), beta, 100_000_000).unwrap();
        let v2 = averaged_key_length(params, r).unwrap();
        assert_rel(v2, 10_013_084.843211314, 1e-12);
    }

    #[test]
    fn averaged_pairs_each_side_with_conjugate_coefficients() {
        // Asymmetric ratios make the A-pairing observable: bit-side keys
        // (fraction g1) carry A(p2)/B(p2), phase-side keys A(p1)/B(p1).
        // mpmath: 15094514.164506319. (Pairing each side with its own
        // basis' A instead would give 18452700.29 — far outside the
        // tolerance, and inconsistent with finite_key_length's m1(p̂2).)
        let beta = code_rate_for_efficiency(prob(0.05), 0.9);
        let params =
            RateParams::new(prob(0.03), prob(0.05), sec(1e-2), beta, 100_000_000).unwrap();
        let v = averaged_key_length(params, Ratios::new(0.3, 0.2, 0.7).unwrap()).unwrap();
        assert_rel(v, 15_094_514.164506319, 1e-12);
    }

    #[test]
    fn averaged_single_sided_reduction() {
        // r1 = 0, r2 = 1 collapses to
        // n·A(p2)(1−r0)² − √n·B(p2)·(1−r0)·√((1−r0)²+r0²)/r0.
        let params = headline_params(1_000_000);
        let a = coef_a(params.p2(), params.beta());
        let b = coef_b(params.p2(), params.eps()).unwrap();
        for &r0 in &[0.01, 0.069553, 0.3, 0.5] {
            let v =
                averaged_key_length(params, Ratios::new(r0, 0.0, 1.0).unwrap()).unwrap();
            let n = params.n() as f64;
            let closed = n * a * (1.0 - r0) * (1.0 - r0)
                - n.sqrt() * b * (1.0 - r0) * ((1.0 - r0) * (1.0 - r0) + r0 * r0).sqrt() / r0;
            assert_rel(v, closed, 1e-12);
        }
    }

    #[test]
    fn averaged_degenerate_terms_skip_dead_denominators() {
        // r1 = 1 and r2 = 0 simultaneously: the bit side generates
        // nothing (g1 = 0), so its vanished denominator e1 = 0 must never
        // be touched; the phase side is estimable through e2 > 0.
        let params = headline_params(1_000_000);
        let v = averaged_key_length(params, Ratios::new(0.3, 1.0, 0.0).unwrap()).unwrap();
        let a = coef_a(params.p1(), params.beta());
        let b = coef_b(params.p1(), params.eps()).unwrap();
        let (g2, e2) = (0.09, 0.49);
        let n = params.n() as f64;
        let closed = n * a * g2 - n.sqrt() * b * (g2 * (g2 + e2) / e2).sqrt();
        assert_rel(v, closed, 1e-12);
    }

    #[test]
    fn averaged_unestimable_side_errors() {
        // Phase side generates keys (r2 < 1) but r1 = 0 leaves no bit
        // checks to estimate p1 with.
        let params = headline_params(1_000_000);
        assert!(matches!(
            averaged_key_length(params, Ratios::new(0.3, 0.0, 0.5).unwrap()),
            Err(RateError::UnestimableSide { side: "phase" })
        ));
        // Mirror: bit side generates keys but r2 = 0 kills its estimate.
        assert!(matches!(
            averaged_key_length(params, Ratios::new(0.3, 0.5, 0.0).unwrap()),
            Err(RateError::UnestimableSide { side: "bit" })
        ));
    }

    #[test]
    fn averaged_large_n_dominated_by_first_order() {
        let r = Ratios::new(0.25, 0.1, 0.6).unwrap();
        let params = headline_params(1_000_000_000_000_000);
        let v = averaged_key_length(params, r).unwrap();
        let a = coef_a(params.p2(), params.beta());
        let g1 = 0.75 * 0.75 * 0.9;
        let g2 = 0.25 * 0.25 * 0.4;
        let first = a * (g1 + g2); // p1 = p2 here
        assert_rel(v / params.n() as f64, first, 1e-4);
    }

    #[test]
    fn optimal_ratios_headline_values() {
        // n = 1e8: r0 = √(B/(2A))·10⁻². mpmath: 0.021995310348745590.
        let opt = optimal_ratios(headline_params(100_000_000)).unwrap();
        assert_rel(opt.ratios.r0(), 0.021995310348745590, 1e-12);
        assert_eq!(opt.ratios.r1(), 0.0);
        assert_eq!(opt.ratios.r2(), 1.0);
        assert!(!opt.clamped);
        assert!(!opt.swapped);
        // n = 1e6 (the simulator's block length). mpmath: 0.069555278544.
        let opt = optimal_ratios(headline_params(1_000_000)).unwrap();
        assert_rel(opt.ratios.r0(), 0.0695552785443085, 1e-12);
    }

    #[test]
    fn optimal_ratios_shrink_with_n() {
        let r_small = optimal_ratios(headline_params(100_000_000)).unwrap().ratios.r0();
        let r_large = optimal_ratios(headline_params(10_000_000_000_000_000)).unwrap().ratios.r0();
        assert!(r_large < r_small);
        assert!(r_large > 0.0);
    }

    #[test]
    fn optimal_ratios_clamp_at_small_n() {
        // n = 16: raw r0 = √(B/2A)/2 ≈ 1.1 > 1/2 → clamped to 1/2.
        let opt = optimal_ratios(headline_params(16)).unwrap();
        assert!(opt.clamped);
        assert_eq!(opt.ratios.r0(), 0.5);
    }

    #[test]
    fn optimal_ratios_swap_orientation() {
        // h(p2) > h(p1): keys move to the phase basis.
        let beta = 0.9;
        let params = RateParams::new(prob(0.01), prob(0.05), sec(1e-2), beta, 100_000_000)
            .unwrap();
        let opt = optimal_ratios(params).unwrap();
        assert!(opt.swapped);
        assert_eq!(opt.ratios.r1(), 1.0);
        assert_eq!(opt.ratios.r2(), 0.0);
        // r0 mirrors the canonical value built from the p1 coefficients.
        let a = coef_a(prob(0.01), beta);
        let b = coef_b(prob(0.01), sec(1e-2)).unwrap();
        let canonical = (b / (2.0 * a)).sqrt() * 1e-2;
        assert_rel(opt.ratios.r0(), 1.0 - canonical, 1e-12);
    }

    #[test]
    fn optimal_ratios_zero_rate() {
        // β = h(p2) makes A = 0: nothing extractable.
        let p = prob(0.05);
        let beta = binary_entropy(p);
        let params = RateParams::new(p, p, sec(1e-2), beta, 1_000_000).unwrap();
        assert!(matches!(optimal_ratios(params), Err(RateError::ZeroRate(_))));
        assert!(matches!(max_key_length(params), Err(RateError::ZeroRate(_))));
    }

    #[test]
    fn max_key_length_frozen_value_and_rate_form() {
        // mpmath: 3459454004.9982874 at n = 1e10 (headline parameters).
        let params = headline_params(10_000_000_000);
        let max = max_key_length(params).unwrap();
        assert_rel(max, 3_459_454_004.9982874, 1e-12);
        // Division by n reproduces the rate form A(1 − n^{−1/4}·2√(2B/A)).
        let a = coef_a(params.p2(), params.beta());
        let b = coef_b(params.p2(), params.eps()).unwrap();
        let n = params.n() as f64;
        let rate_form = a * (1.0 - n.powf(-0.25) * 2.0 * (2.0 * b / a).sqrt());
        assert_rel(max / n, rate_form, 1e-12);
    }

    #[test]
    fn max_key_length_approaches_averaged_at_optimum() {
        // max is the second-order expansion of averaged at the analytic
        // optimum; their per-n gap vanishes as n grows.
        let mut prev_gap = f64::INFINITY;
        for &n in &[100_000_000u64, 10_000_000_000, 1_000_000_000_000] {
            let params = headline_params(n);
            let avg = averaged_key_length(params, optimal_ratios(params).unwrap().ratios)
                .unwrap();
            let max = max_key_length(params).unwrap();
            let gap = (avg - max).abs() / n as f64;
            assert!(gap < prev_gap, "per-n gap should shrink: {gap} vs {prev_gap}");
            prev_gap = gap;
        }
    }

    #[test]
    fn finite_agrees_with_averaged_to_log_terms() {
        // At expected counts the integer accounting tracks the smooth
        // expectation within c·√n·log n; fit c on small n and hold the
        // larger ones to 1.5×. (Analytically the gap is O(log n): the
        // √-terms match exactly at expected counts.)
        let r = Ratios::new(0.1, 0.05, 0.5).unwrap();
        let gap_at = |n: u64| -> f64 {
            let params = headline_params(n);
            let nf = n as f64;
            let counts = SiftedCounts {
                n1: (nf * 0.9 * 0.9).round() as u64,
                n2: (nf * 0.1 * 0.1).round() as u64,
            };
            let fin = finite_key_length(n, counts, r, Some(0.05), Some(0.05), params.eps(), params.beta())
                .unwrap();
            let avg = averaged_key_length(params, r).unwrap();
            (fin.total as f64 - avg).abs()
        };
        let scale = |n: u64| (n as f64).sqrt() * (n as f64).log2();
        let mut c: f64 = 0.0;
        for &n in &[100_000u64, 1_000_000, 10_000_000] {
            c = c.max(gap_at(n) / scale(n));
        }
        assert!(c > 0.0);
        for &n in &[100_000_000u64, 1_000_000_000] {
            assert!(
                gap_at(n) <= 1.5 * c * scale(n),
                "gap at n={n} breaks the √n·log n scaling: {} vs fitted {}",
                gap_at(n),
                1.5 * c * scale(n)
            );
        }
    }

    #[test]
    fn numeric_optimize_agrees_with_analytic() {
        let params = headline_params(100_000_000);
        let (ratios, value) = numeric_optimize(params);
        // The optimizer finds the r1 = 0, r2 = 1 face and the analytic r0.
        assert!(ratios.r1() <= 0.01, "r1 = {}", ratios.r1());
        assert!(ratios.r2() >= 0.99, "r2 = {}", ratios.r2());
        let analytic = optimal_ratios(params).unwrap().ratios;
        let rel = (ratios.r0() - analytic.r0()).abs() / analytic.r0();
        assert!(rel <= 0.2, "r0 {} vs analytic {}", ratios.r0(), analytic.r0());
        // Argmax dominates the analytic point, but only barely.
        let at_analytic = averaged_key_length(params, analytic).unwrap();
        assert!(value >= at_analytic);
        assert!((value - at_analytic) / at_analytic <= 1e-3);
    }

    #[test]
    fn numeric_optimize_swap_invariance() {
        // Exchanging (p1, p2) relabels the bases; the optimum value must
        // be invariant and the argmax must map through r0 → 1−r0, r1 ↔ r2.
        let beta = 0.8;
        let a = RateParams::new(prob(0.03), prob(0.05), sec(1e-2), beta, 100_000_000).unwrap();
        let b = RateParams::new(prob(0.05), prob(0.03), sec(1e-2), beta, 100_000_000).unwrap();
        let (ra, va) = numeric_optimize(a);
        let (rb, vb) = numeric_optimize(b);
        assert_rel(va, vb, 1e-6);
        assert!((ra.r0() - (1.0 - rb.r0())).abs() <= 1e-6);
        assert!((ra.r1() - rb.r2()).abs() <= 1e-6);
        assert!((ra.r2() - rb.r1()).abs() <= 1e-6);
    }

    #[test]
    fn numeric_optimize_dominates_clamped_point() {
        // When clamping triggers, the reported max still dominates the
        // value at the clamped analytic ratios.
        let params = headline_params(100);
        let opt = optimal_ratios(params).unwrap();
        assert!(opt.clamped);
        let at_clamped = averaged_key_length(params, opt.ratios).unwrap();
        let (_, value) = numeric_optimize(params);
        assert!(value >= at_clamped);
    }

    #[test]
    fn rate_curve_shape() {
        let p2 = prob(0.05);
        let beta = code_rate_for_efficiency(p2, 0.9);
        let eps: Vec<SecurityLevel> =
            [1e-2, 1e-4, 1e-6, 1e-8, 1e-10].iter().map(|&e| sec(e)).collect();
        let grid: Vec<f64> = (0..=80).map(|i| 10f64.powf((40 + i) as f64 / 10.0)).collect();
        let curve = rate_curve(p2, &eps, beta, &grid).unwrap();
        assert_rel(curve.asymptote, 0.35584578147968336, 1e-12);

        // Strictly increasing in n within each series; bounded by A.
        for s in &curve.series {
            for w in s.points.windows(2) {
                assert!(w[1].1 > w[0].1);
            }
            assert!(s.points.iter().all(|&(_, r)| r < curve.asymptote));
        }
        // Strict ε-ordering at every grid point.
        for i in 0..grid.len() {
            for w in curve.series.windows(2) {
                assert!(w[0].points[i].1 > w[1].points[i].1);
            }
        }
        // Below its knee (n ≈ 10^4.57 at ε=1e-10) a series is negative:
        // emitted unclipped by design so the orderings above stay strict.
        let tightest = curve.series.last().unwrap();
        assert!(tightest.points[0].1 < 0.0);
        // The headline point: rate(n=1e10, ε=1e-2) — mpmath 0.34594540049982874.
        let pt = curve.series[0].points.iter().find(|&&(n, _)| n == 1e10).unwrap();
        assert_rel(pt.1, 0.34594540049982874, 1e-12);
    }

    #[test]
    fn code_rate_rule_headline_value() {
        let beta = code_rate_for_efficiency(prob(0.05), 0.9);
        assert_rel(beta, 0.64224273859563948, 1e-12);
    }
}
