//! Scalar mathematics for second-order key-rate analysis.
//!
//! Everything downstream reduces to a handful of real functions: the binary
//! entropy `h` and its derivative, the standard-normal upper tail Φ and its
//! inverse, the per-basis coefficients `A(p) = β − h(p)` and
//! `B(p, ε) = h′(p)·√(p(1−p))·Φ⁻¹(ε²)`, and the parameter-estimation
//! deviation `δ`. They are implemented here from scratch because their
//! accuracy budgets gate every number the crate produces: Φ and Φ⁻¹ are
//! required to round-trip to 10⁻¹⁰ relative accuracy across the security
//! levels of interest (ε down to 10⁻¹⁰, so tail arguments down to 10⁻²⁰).
//!
//! Φ is computed from Cody's rational-Chebyshev erfc approximation, which
//! keeps *relative* accuracy in the far tail where a naive `1 − CDF`
//! evaluation would cancel catastrophically. Φ⁻¹ starts from Acklam's
//! rational estimate (≈1.15·10⁻⁹ relative) and polishes with Newton steps
//! against the high-accuracy Φ, falling back to bisection in the (never
//! yet observed) event Newton stalls.

use thiserror::Error;

/// Errors from constructing domain-restricted values or evaluating
/// functions outside their domain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MathError {
    /// A probability parameter was outside the open interval (0, 1).
    #[error("probability must lie strictly between 0 and 1, got {0}")]
    ProbOutOfRange(f64),
    /// A security parameter ε was outside the open interval (0, 1).
    #[error("security level must lie strictly between 0 and 1, got {0}")]
    EpsilonOutOfRange(f64),
    /// An error-rate argument was outside the closed interval [0, 1].
    #[error("error rate must lie in [0, 1], got {0}")]
    RateOutOfRange(f64),
    /// A tail-probability argument was outside the open interval (0, 1).
    #[error("tail probability must lie strictly between 0 and 1, got {0}")]
    QuantileOutOfRange(f64),
    /// B(p, ε) requires p < 1/2 so that h′(p) > 0.
    #[error("B(p, eps) requires p < 1/2 so that h'(p) > 0, got p = {0}")]
    CoefficientRequiresSmallP(f64),
    /// B(p, ε) requires ε² < 1/2 so that Φ⁻¹(ε²) > 0.
    #[error("B(p, eps) requires eps^2 < 1/2 so that the quantile is positive, got eps = {0}")]
    CoefficientRequiresSmallEps(f64),
    /// δ(p, ε, m₁, m₂) requires both sample sizes to be at least 1.
    #[error("delta requires both sample sizes >= 1, got m1 = {0} and m2 = {1}")]
    SampleTooSmall(f64, f64),
}

/// A probability strictly inside (0, 1).
///
/// Most rate formulas are singular or undefined at the endpoints (h′
/// diverges, Φ⁻¹ diverges), so the type excludes them once at construction
/// instead of every call site re-checking.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Prob(f64);

impl Prob {
    /// Wraps `value`, rejecting anything not strictly inside (0, 1).
    pub fn new(value: f64) -> Result<Self, MathError> {
        if value > 0.0 && value < 1.0 {
            Ok(Prob(value))
        } else {
            Err(MathError::ProbOutOfRange(value))
        }
    }

    /// The wrapped value.
    pub fn get(self) -> f64 {
        self.0
    }
}

/// A security level ε ∈ (0, 1), with the derived parameter ε_du = ε².
///
/// The composable-security accounting spends ε twice (once per estimation
/// direction), so the quantile argument that actually enters B and δ is ε².
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SecurityLevel {
    epsilon: f64,
}

impl SecurityLevel {
    /// Wraps `epsilon`, rejecting anything not strictly inside (0, 1).
    pub fn new(epsilon: f64) -> Result<Self, MathError> {
        if epsilon > 0.0 && epsilon < 1.0 {
            Ok(SecurityLevel { epsilon })
        } else {
            Err(MathError::EpsilonOutOfRange(epsilon))
        }
    }

    /// The security parameter ε itself.
    pub fn epsilon(self) -> f64 {
        self.epsilon
    }

    /// The derived parameter ε_du = ε² used inside Φ⁻¹.
    pub fn epsilon_du(self) -> f64 {
        self.epsilon * self.epsilon
    }
}

/// The pair (A(p), B(p, ε)) entering the second-order rate formula
/// n·A − √n·B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    /// First-order coefficient A(p) = β − h(p).
    pub a: f64,
    /// Second-order coefficient B(p, ε) = h′(p)·√(p(1−p))·Φ⁻¹(ε²).
    pub b: f64,
}

impl Coefficients {
    /// Evaluates both coefficients at error rate `p`, reconciliation
    /// efficiency `beta`, and security level `eps`.
    pub fn evaluate(p: Prob, beta: f64, eps: SecurityLevel) -> Result<Self, MathError> {
        Ok(Coefficients {
            a: coef_a(p, beta),
            b: coef_b(p, eps)?,
        })
    }
}

/// Binary entropy h(p) = −p·log₂(p) − (1−p)·log₂(1−p) for p ∈ (0, 1).
pub fn binary_entropy(p: Prob) -> f64 {
    binary_entropy_total(p.get())
}

/// Binary entropy extended to the closed interval [0, 1] by continuity,
/// with h(0) = h(1) = 0.
///
/// Used where an *empirical* rate may legitimately hit an endpoint (a
/// noiseless sample, or a sample that is all errors).
pub fn binary_entropy_total(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p), "entropy argument {p} outside [0, 1]");
    let q = 1.0 - p;
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(q)
}

/// Derivative of binary entropy, h′(p) = log₂((1−p)/p).
///
/// Positive for p < 1/2, zero at 1/2, and antisymmetric about 1/2 in the
/// sense h′(1−p) = −h′(p).
pub fn binary_entropy_derivative(p: Prob) -> f64 {
    let p = p.get();
    ((1.0 - p) / p).log2()
}

/// Inverse of binary entropy on the increasing branch: the unique
/// p ∈ [0, 1/2] with h(p) = y, for y ∈ [0, 1].
///
/// Solved by bisection (h is strictly increasing on [0, 1/2]); the result
/// is accurate to ~10⁻¹⁵ absolute. Out-of-range `y` is an error.
pub fn binary_entropy_inverse(y: f64) -> Result<f64, MathError> {
    if !(0.0..=1.0).contains(&y) {
        return Err(MathError::RateOutOfRange(y));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    // 80 halvings take the bracket below 10⁻²⁴; the midpoint stops moving
    // well before that and the loop exits on the width test.
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy_total(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Standard-normal upper tail Φ(x) = P[N(0,1) > x] = erfc(x/√2)/2.
///
/// Relative accuracy is a few ulp across the whole double range, in
/// particular in the deep tail (Φ(x) down to ~10⁻³⁰⁰) where the key-rate
/// quantiles live.
pub fn gaussian_upper_tail(x: f64) -> f64 {
    0.5 * erfc_cody(x / std::f64::consts::SQRT_2)
}

/// Inverse of the upper tail: the x with Φ(x) = q, for q ∈ (0, 1).
///
/// Acklam's rational approximation supplies the starting point; Newton
/// steps against [`gaussian_upper_tail`] polish it until
/// |Φ(x) − q| ≤ 10⁻¹² · q (two steps in practice). If Newton ever failed
/// to converge the routine would fall back to bisection rather than
/// return an unpolished value.
pub fn gaussian_upper_tail_inverse(q: f64) -> Result<f64, MathError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(MathError::QuantileOutOfRange(q));
    }
    // Work on the small-tail half: Φ(x) = q ≤ 1/2 has x ≥ 0, and the
    // reflection Φ(−x) = 1 − Φ(x) handles the other half exactly.
    if q > 0.5 {
        return Ok(-upper_tail_inverse_half(1.0 - q));
    }
    Ok(upper_tail_inverse_half(q))
}

/// Φ⁻¹ restricted to q ∈ (0, 1/2], where the result is ≥ 0.
fn upper_tail_inverse_half(q: f64) -> f64 {
    debug_assert!(q > 0.0 && q <= 0.5);
    let mut x = -acklam_lower_quantile(q); // lower quantile of q is −Φ⁻¹(q)
    // Newton on f(x) = Φ(x) − q: x ← x + (Φ(x) − q)/φ(x). Converges
    // quadratically from Acklam's ~1e-9 start; 4 steps is far more than
    // double precision can use.
    for _ in 0..4 {
        let err = gaussian_upper_tail(x) - q;
        if err.abs() <= 1e-12 * q {
            return x;
        }
        x += err / normal_pdf(x);
    }
    if (gaussian_upper_tail(x) - q).abs() <= 1e-12 * q {
        return x;
    }
    // Bisection fallback; Φ(0) = 1/2 ≥ q and Φ(40) < 10⁻³⁴⁸ < q bracket
    // every representable q in (0, 1/2].
    let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gaussian_upper_tail(mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard-normal density φ(x) = exp(−x²/2)/√(2π).
fn normal_pdf(x: f64) -> f64 {
    const SQRT_TWO_PI: f64 = 2.5066282746310005;
    (-0.5 * x * x).exp() / SQRT_TWO_PI
}

/// Acklam's rational approximation to the standard-normal *lower*
/// quantile (the x with P[N(0,1) ≤ x] = p), ~1.15·10⁻⁹ peak relative
/// error. Only the p ≤ 1/2 half is ever called here.
fn acklam_lower_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p <= 0.5);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        // Tail region: expand in r = √(−2 ln p).
        let r = (-2.0 * p.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else {
        // Central region: expand in r = (p − 1/2)².
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Complementary error function after W. J. Cody's rational-Chebyshev
/// fits (SPECFUN's CALERF), with the exp(−x²) split trick that preserves
/// relative accuracy in the far tail. Max error is a few ulp.
fn erfc_cody(x: f64) -> f64 {
    let y = x.abs();
    let result = if y <= 0.46875 {
        1.0 - erf_cody_small(x)
    } else if y <= 4.0 {
        erfc_cody_mid(y)
    } else {
        erfc_cody_far(y)
    };
    if x < -0.46875 {
        2.0 - result
    } else {
        result
    }
}

/// erf(x) for |x| ≤ 0.46875 (so erfc = 1 − erf has no cancellation).
fn erf_cody_small(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560e+00,
        1.13864154151050156e+02,
        3.77485237685302021e+02,
        3.20937758913846947e+03,
        1.85777706184603153e-01,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e+01,
        2.44024637934444173e+02,
        1.28261652607737228e+03,
        2.84423683343917062e+03,
    ];
    let z = x * x;
    let mut num = A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + A[i]) * z;
        den = (den + B[i]) * z;
    }
    x * (num + A[3]) / (den + B[3])
}

/// erfc(y) for 0.46875 < y ≤ 4.
fn erfc_cody_mid(y: f64) -> f64 {
    const C: [f64; 9] = [
        5.64188496988670089e-01,
        8.88314979438837594e+00,
        6.61191906371416295e+01,
        2.98635138197400131e+02,
        8.81952221241769090e+02,
        1.71204761263407058e+03,
        2.05107837782607147e+03,
        1.23033935479799725e+03,
        2.15311535474403846e-08,
    ];
    const D: [f64; 8] = [
        1.57449261107098347e+01,
        1.17693950891312499e+02,
        5.37181101862009858e+02,
        1.62138957456669019e+03,
        3.29079923573345963e+03,
        4.36261909014324716e+03,
        3.43936767414372164e+03,
        1.23033935480374942e+03,
    ];
    let mut num = C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + C[i]) * y;
        den = (den + D[i]) * y;
    }
    exp_neg_square(y) * (num + C[7]) / (den + D[7])
}

/// erfc(y) for y > 4, via the asymptotic-form rational fit.
fn erfc_cody_far(y: f64) -> f64 {
    const P: [f64; 6] = [
        3.05326634961232344e-01,
        3.60344899949804439e-01,
        1.25781726111229246e-01,
        1.60837851487422766e-02,
        6.58749161529837803e-04,
        1.63153871373020978e-02,
    ];
    const Q: [f64; 5] = [
        2.56852019228982242e+00,
        1.87295284992346047e+00,
        5.27905102951428412e-01,
        6.05183413124413191e-02,
        2.33520497626869185e-03,
    ];
    const ONE_OVER_SQRT_PI: f64 = 5.641895835477562869e-01;
    let z = 1.0 / (y * y);
    let mut num = P[5] * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + P[i]) * z;
        den = (den + Q[i]) * z;
    }
    let r = z * (num + P[4]) / (den + Q[4]);
    exp_neg_square(y) * (ONE_OVER_SQRT_PI - r) / y
}

/// exp(−y²) computed as exp(−ŷ²)·exp(−(y−ŷ)(y+ŷ)) with ŷ = y rounded to
/// 1/16, so the large argument is exactly representable and the residual
/// exponent is tiny — the standard trick to avoid amplifying the ulp
/// error of y² by y² in relative terms.
fn exp_neg_square(y: f64) -> f64 {
    let y_hat = (y * 16.0).trunc() / 16.0;
    let del = (y - y_hat) * (y + y_hat);
    (-y_hat * y_hat).exp() * (-del).exp()
}

/// First-order coefficient A(p) = β − h(p): the asymptotic key bits per
/// sifted bit at error rate `p` under reconciliation efficiency `beta`.
pub fn coef_a(p: Prob, beta: f64) -> f64 {
    beta - binary_entropy(p)
}

/// Second-order coefficient B(p, ε) = h′(p)·√(p(1−p))·Φ⁻¹(ε²): the √n
/// penalty per sifted bit from estimating `p` on a finite sample.
///
/// Requires p < 1/2 (so h′ > 0) and ε² < 1/2 (so the quantile is
/// positive); the second-order expansion is only meaningful there.
pub fn coef_b(p: Prob, eps: SecurityLevel) -> Result<f64, MathError> {
    if p.get() >= 0.5 {
        return Err(MathError::CoefficientRequiresSmallP(p.get()));
    }
    let eps_du = eps.epsilon_du();
    if eps_du >= 0.5 {
        return Err(MathError::CoefficientRequiresSmallEps(eps.epsilon()));
    }
    let quantile = gaussian_upper_tail_inverse(eps_du)
        .expect("eps_du in (0, 1/2) is inside the quantile domain");
    let p = p.get();
    Ok(binary_entropy_derivative(Prob::new(p).expect("Prob is already validated"))
        * (p * (1.0 - p)).sqrt()
        * quantile)
}

/// Parameter-estimation deviation
/// δ(p, ε, m₁, m₂) = √(p(1−p)(m₁+m₂)/(m₁·m₂)) · Φ⁻¹(ε²):
/// the one-sided confidence-interval width when an error rate observed on
/// a check sample of `m2` bits is transferred to a key sample of `m1`
/// bits.
///
/// `p` is accepted on the closed interval [0, 1] because it is typically
/// an *empirical* rate, and a noiseless sample legitimately yields p̂ = 0
/// (whence δ = 0). Sample sizes are reals ≥ 1: effective sample sizes
/// like (1−r₁)·n₁ are generally not integers, and exact counts embed in
/// f64 losslessly far beyond any block length used here (also, m₁·m₂
/// would overflow u64 for blocks around 10¹⁰).
pub fn delta(p: f64, eps: SecurityLevel, m1: f64, m2: f64) -> Result<f64, MathError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(MathError::RateOutOfRange(p));
    }
    if !(m1 >= 1.0 && m2 >= 1.0 && m1.is_finite() && m2.is_finite()) {
        return Err(MathError::SampleTooSmall(m1, m2));
    }
    let quantile = gaussian_upper_tail_inverse(eps.epsilon_du())
        .expect("eps_du in (0, 1) is inside the quantile domain");
    Ok((p * (1.0 - p)).sqrt() * ((m1 + m2) / (m1 * m2)).sqrt() * quantile)
}
