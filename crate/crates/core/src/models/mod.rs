//! Concrete model constructors. Canonical names: "shell", "ns2d", "ou".

pub mod linear_ou;
pub mod shell;
pub mod spectral_ns;

pub use linear_ou::{make_linear_ou, LinearOuParams};
pub use shell::{make_shell_model, ShellNoise, ShellParams, ShellReaction};
pub use spectral_ns::{make_spectral_ns, spectral_geometry, SpectralGeometry, SpectralNsParams};
