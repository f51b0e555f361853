//! Field checkpoints: per-node rows `s n₁ .. n_d`, keyed to the mesh by
//! node count and content hash. Values round-trip exactly.

use super::meshio::mesh_content_hash;
use crate::error::{Error, Result};
use crate::fields::{make_state, DirectorField, DiscreteState, ScalarField};
use crate::mesh::SimplicialMesh;
use std::fmt::Write as _;
use std::path::Path;

pub fn write_checkpoint(mesh: &SimplicialMesh, state: &DiscreteState, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "checkpoint {} {} {:016x}",
        mesh.n_nodes(),
        mesh.dim(),
        mesh_content_hash(mesh)
    );
    for i in 0..mesh.n_nodes() {
        let _ = write!(out, "{}", state.s.0[i]);
        for q in 0..mesh.dim() {
            let _ = write!(out, " {}", state.n.0[i][q]);
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_checkpoint(mesh: &SimplicialMesh, path: &Path) -> Result<DiscreteState> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Field(format!("cannot read checkpoint {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Field("empty checkpoint".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != "checkpoint" {
        return Err(Error::Field("bad checkpoint header".into()));
    }
    let n_nodes: usize = tokens[1]
        .parse()
        .map_err(|_| Error::Field("bad node count in checkpoint".into()))?;
    let dim: usize = tokens[2]
        .parse()
        .map_err(|_| Error::Field("bad dim in checkpoint".into()))?;
    let hash = u64::from_str_radix(tokens[3], 16)
        .map_err(|_| Error::Field("bad mesh hash in checkpoint".into()))?;
    if n_nodes != mesh.n_nodes() || dim != mesh.dim() {
        return Err(Error::Field(format!(
            "checkpoint does not match the mesh: {n_nodes} nodes / dim {dim} vs {} / {}",
            mesh.n_nodes(),
            mesh.dim()
        )));
    }
    if hash != mesh_content_hash(mesh) {
        return Err(Error::Field(
            "checkpoint mesh hash does not match the loaded mesh".into(),
        ));
    }

    let mut s = Vec::with_capacity(n_nodes);
    let mut n = Vec::with_capacity(n_nodes);
    for (k, line) in lines.enumerate() {
        if k >= n_nodes {
            break;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Field(format!("bad checkpoint value on data line {}", k + 1)))?;
        if vals.len() != dim + 1 {
            return Err(Error::Field(format!(
                "checkpoint data line {} has {} fields, expected {}",
                k + 1,
                vals.len(),
                dim + 1
            )));
        }
        s.push(vals[0]);
        let mut dir = [0.0; 3];
        dir[..dim].copy_from_slice(&vals[1..]);
        n.push(dir);
    }
    if s.len() != n_nodes {
        return Err(Error::Field("checkpoint truncated".into()));
    }
    make_state(mesh, ScalarField(s), DirectorField(n))
}
