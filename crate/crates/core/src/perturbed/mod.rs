//! The perturbed operator: `K(λ)χ`, the cutoff resolvent `χR(λ)χ` of
//! `−c²Δ − λ²`, its gradient, and discrete checks of the resolvent
//! identities.

mod gradient;
mod identities;
mod lattice;
mod solve;

pub use gradient::gradient_cutoff_resolvent;
pub use identities::{verify_identities, IdentityReport};
pub use lattice::{LatticeFreeResolvent, LatticeResolvent};
pub use solve::{
    assemble_k, cutoff_resolvent_rows, solve_cutoff_resolvent, solve_from_free, solve_problem, CutoffProblem, Method,
    SolveOptions, SolveReport,
};

#[cfg(test)]
mod tests;
