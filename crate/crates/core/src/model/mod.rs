//! Grids, wavespeed profiles, initial data and the discrete norms of the
//! energy space `H = Ḣ¹ ⊕ L²_c`.

mod data;
mod grid;
mod mask;
mod norms;
mod poincare;
mod profile;

pub use data::{CauchyData, DataPreset};
pub use grid::{build_grid, Grid, Node};
pub use mask::SmoothCutoff;
pub use norms::{
    apply_b, apply_b_power, gradient_energy_density, graph_norm, h1dot_seminorm,
    h1dot_seminorm_complex, h_inner_product, h_norm, laplacian, weighted_inner_product, FieldPair,
};
pub use poincare::{poincare_constant, PoincareOptions};
pub use profile::{make_wavespeed, ProfileSpec, WavespeedProfile};
