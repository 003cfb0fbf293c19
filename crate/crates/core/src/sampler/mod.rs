//! p-bit Gibbs dynamics and reproducible random streams.

mod stream;
mod update;

pub use stream::{derive_seed, lfsr_next, mix64, Lfsr, RandomStream, StreamKind, LFSR32_TAPS};
pub(crate) use update::sweep_slice;
pub use update::{chromatic_sweep, local_field, pbit_update, GibbsChain, SamplerConfig};
