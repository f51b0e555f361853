//! File formats: mesh reader/writer, field checkpoints, run configuration,
//! VTK and CSV emitters.
//!
//! All text output uses shortest round-trip float formatting, so writing,
//! reading back, and writing again is byte-identical and nodal values
//! survive checkpoints exactly.

mod checkpoint;
mod config;
mod csv;
mod meshio;
mod vtk;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use config::{load_config, parse_config_str, OutputConfig, RunConfig};
pub use csv::{write_diagnostics_csv, write_energy_log};
pub use meshio::{mesh_content_hash, read_gmsh, read_mesh, write_mesh, write_mesh_string};
pub use vtk::{write_isosurface_vtk, write_vtk};

/// FNV-1a 64-bit hash, used to key checkpoints to their mesh.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
