//! Characteristic functions, their zeros, and checks of their asymptotics.

mod charset;
pub mod contour;
mod mapping;
mod oracle;
pub mod roots;
mod spectrum;

pub use charset::{char_components, char_delta, CharacteristicSet};
pub use contour::{winding_number, Contour, ContourOptions, Rect, Winding};
pub use oracle::{even_odd_delta, oracle_spectrum};
pub use mapping::{spectral_mapping_blocks, SpectralMappingBlocks};
pub use roots::{Root, RootOptions};
pub use spectrum::{count_in_disk, find_eigenvalues, first_n, Spectrum};
