//! Shared fixtures for the benchmarks.

use vortexlines::dynamics::VortexDynamics;
use vortexlines::exterior::Form;
use vortexlines::systems::{hamiltonian_sigma, nambu_sigma, HamiltonianSpec, NambuSpec};
use vortexlines::wellposed::SamplingSpec;

pub const COUPLED: &str = "(p1^2 + p2^2)/2 + (q1^2 + 2*q2^2)/2 + 0.1*q1^2*q2^2";
pub const TOP: [&str; 2] = ["(x^2 + y^2 + z^2)/2", "x^2/2 + y^2/3 + z^2/5"];

pub fn coupled_sigma() -> Form {
    hamiltonian_sigma(&HamiltonianSpec::parse(2, COUPLED).expect("fixed text parses")).expect("valid spec")
}

pub fn top_sigma() -> Form {
    nambu_sigma(&NambuSpec::parse(3, &TOP).expect("fixed text parses")).expect("valid spec")
}

pub fn dynamics(sigma: &Form) -> VortexDynamics {
    VortexDynamics::from_sigma(sigma, &SamplingSpec::default_for(sigma.space().n())).expect("well posed")
}
