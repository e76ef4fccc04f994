//! Finite-length key rates for asymmetric-basis BB84, to second order.
//!
//! The toolkit has four layers, each usable on its own:
//!
//! * [`math`] — scalar building blocks: binary entropy and its derivative,
//!   the Gaussian upper tail Φ and its inverse, the coefficients A(p) and
//!   B(p, ε), and the estimation-error statistic δ.
//! * [`rate`] — finite-length key-length accounting, the second-order
//!   averaged/maximum key-length formulas, the analytic optimal basis
//!   ratios, and a deterministic grid+refinement optimizer used as an
//!   independent oracle against the analytic optimum.
//! * [`gf2`] — bit vectors and modified Toeplitz matrices (I, T(S)) over
//!   GF(2): the universal₂ hash family used for privacy amplification and
//!   error verification, with exhaustive collision-bound checking at small
//!   sizes.
//! * [`sim`] — a deterministic-seed Monte-Carlo simulator of the five-step
//!   asymmetric BB84 protocol over a classical i.i.d. flip channel,
//!   used to validate the rate formulas empirically.
//!
//! The simulator validates the *statistics* of the formulas (sifting
//! counts, estimator spread, realized key lengths); it does not simulate
//! quantum states or an eavesdropper.

pub mod gf2;
pub mod math;
pub mod rate;
pub mod sim;

pub use gf2::{BitVector, HashError, ToeplitzHash};
pub use math::{Coefficients, MathError, Prob, SecurityLevel};
pub use rate::{KeyLengthReport, RateError, RateParams, Ratios, SiftedCounts};
pub use sim::{ChannelModel, ProtocolConfig, ProtocolOutcome, SimError};
