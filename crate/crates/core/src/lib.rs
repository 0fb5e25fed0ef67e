//! Simulation of a single-atom conditional scheme that leaves two separated
//! high-Q cavities in a Bell state.
//!
//! A three-level atom prepared in `|2⟩` crosses cavity 1 and cavity 2, each
//! holding `p` photons, then a Ramsey zone mixing `|0⟩` and `|2⟩`. Detecting
//! the atom in `|2⟩` or `|0⟩` heralds `(|p,p⟩ ∓ e^{iχ}|p+1,p+1⟩)/√2`.
//! Interaction times fluctuate as Gaussians with relative spread `γ`; the
//! crate averages over them numerically and checks the result against the
//! closed-form fidelity and success probability.
//!
//! Modules, bottom up:
//! - [`hilbert`]: state vectors, density matrices, partial traces.
//! - [`dynamics`]: analytic Jaynes-Cummings passages, Ramsey rotation,
//!   and an eigendecomposition propagator used as a cross-check.
//! - [`jitter`]: Gauss-Hermite and Monte Carlo averaging over the jitter.
//! - [`protocol`]: the full scheme, closed forms, residual check, γ sweep.
//! - [`probe`]: probe-atom readout of the field state.
//! - [`feasibility`]: duration versus damping-time estimate.

pub mod dynamics;
pub mod error;
pub mod feasibility;
pub mod hilbert;
pub mod jitter;
pub mod probe;
pub mod protocol;

pub use error::{Error, Result};
pub use hilbert::{AtomLevel, DensityMatrix, HilbertLayout, StateVector, Subsystem};
pub use jitter::{Averaging, JitterModel, MCConfig, QuadratureScheme};
pub use protocol::{run_protocol, ProtocolParams, ProtocolResult};
