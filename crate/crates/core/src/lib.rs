//! Guided local Hamiltonian tooling: classically evaluatable guiding states,
//! spectral amplification by sign polynomials, small-penalty clock
//! constructions and learning Hamiltonians from few-query verifiers.

pub mod amplify;
pub mod circuit;
pub mod clockred;
pub mod error;
pub mod exactsim;
pub mod hamiltonian;
pub mod linalg;
pub mod qcpcp;
pub mod signpoly;
pub mod states;

pub use amplify::{decide, DecideOptions, DecisionInstance, DecisionReport, Engine, Verdict};
pub use circuit::{Circuit, Gate};
pub use error::{Error, Result};
pub use exactsim::{Spectrum, StateVector};
pub use hamiltonian::{DiagonalHamiltonian, LocalHamiltonian, LocalTerm};
pub use linalg::{CMat, C64};
pub use signpoly::SignPolynomial;
pub use states::{EvaluatableState, StateFile};
