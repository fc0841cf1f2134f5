//! Ground-state solvers.

pub mod diagnostics;
pub mod exact;
pub mod finite_rank;
pub mod pekar;

pub use diagnostics::hoffmann_ostenhof_check;
pub use exact::{exact_ground_state, ground_state, hvz_table, sector_ground_state, HvzTable, SpectralResult};
pub use finite_rank::{finite_rank_chain, finite_rank_minimize, hartree_fock_scf, FiniteRankOptions, FiniteRankResult, ScfOptions};
pub use pekar::{binding_scan, pekar_energy, pekar_minimize, BindingCurve, PekarOptions, PekarProblem, PolaronResult};
