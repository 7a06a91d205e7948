//! Serialization of run histories: the per-iteration CSV table and legacy
//! VTK snapshots of solved states.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use avem::{IterationRecord, MeshForest, NodeId};
use serde::{Deserialize, Serialize};

/// One CSV row. Field order pins the column order; field names pin the
/// header. `h1err` is empty when the problem has no error gauge.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct Row {
    iter: usize,
    ndofs: usize,
    ncells: usize,
    h1err: Option<f64>,
    eta: f64,
    stab: f64,
    lambda_max: u32,
    n_marked: usize,
    n_refined: usize,
    cg_iters: usize,
}

impl Row {
    fn of(r: &IterationRecord) -> Self {
        Row {
            iter: r.iter,
            ndofs: r.ndofs,
            ncells: r.ncells,
            h1err: r.h1_err,
            eta: r.eta,
            stab: r.stab,
            lambda_max: r.lambda_max,
            n_marked: r.n_marked,
            n_refined: r.n_refined,
            cg_iters: r.cg_iters,
        }
    }

    fn into_record(self) -> IterationRecord {
        IterationRecord {
            iter: self.iter,
            ndofs: self.ndofs,
            ncells: self.ncells,
            h1_err: self.h1err,
            eta: self.eta,
            stab: self.stab,
            lambda_max: self.lambda_max,
            n_marked: self.n_marked,
            n_refined: self.n_refined,
            cg_iters: self.cg_iters,
            qo_residual: None,
        }
    }
}

/// A row of the joined table written by `compare`, one run per method label.
#[derive(Debug, Serialize)]
struct LabeledRow<'a> {
    method: &'a str,
    iter: usize,
    ndofs: usize,
    ncells: usize,
    h1err: Option<f64>,
    eta: f64,
    stab: f64,
    lambda_max: u32,
    n_marked: usize,
    n_refined: usize,
    cg_iters: usize,
}

/// Write one run's history, one row per iteration.
pub fn write_csv(path: &Path, records: &[IterationRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(Row::of(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a history back; the quasi-orthogonality diagnostic is not part of
/// the table and comes back as `None`.
pub fn read_csv(path: &Path) -> csv::Result<Vec<IterationRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rd.deserialize::<Row>() {
        out.push(row?.into_record());
    }
    Ok(out)
}

/// Write the joined long-format table of several labeled runs.
pub fn write_labeled_csv(path: &Path, runs: &[(&str, &[IterationRecord])]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (method, records) in runs {
        for r in *records {
            let row = Row::of(r);
            w.serialize(LabeledRow {
                method,
                iter: row.iter,
                ndofs: row.ndofs,
                ncells: row.ncells,
                h1err: row.h1err,
                eta: row.eta,
                stab: row.stab,
                lambda_max: row.lambda_max,
                n_marked: row.n_marked,
                n_refined: row.n_refined,
                cg_iters: row.cg_iters,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write a solved state as a legacy ASCII unstructured grid: every mesh
/// node as a point carrying the solution value, every leaf as a 4-node
/// tetrahedron carrying its squared indicator and the largest global index
/// among its vertices.
pub fn write_vtk(
    path: &Path,
    mesh: &MeshForest,
    solution: &[f64],
    eta_sq: &[f64],
    title: &str,
) -> io::Result<()> {
    let leaves = mesh.leaf_ids();
    assert_eq!(solution.len(), mesh.n_nodes());
    assert_eq!(eta_sq.len(), leaves.len());
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_nodes())?;
    for i in 0..mesh.n_nodes() as u32 {
        let p = mesh.node_pos(NodeId(i));
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    writeln!(w, "CELLS {} {}", leaves.len(), 5 * leaves.len())?;
    for &t in &leaves {
        let v = mesh.tet(t).verts;
        writeln!(w, "4 {} {} {} {}", v[0].idx(), v[1].idx(), v[2].idx(), v[3].idx())?;
    }
    writeln!(w, "CELL_TYPES {}", leaves.len())?;
    for _ in &leaves {
        writeln!(w, "10")?;
    }
    writeln!(w, "POINT_DATA {}", mesh.n_nodes())?;
    writeln!(w, "SCALARS solution double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in solution {
        writeln!(w, "{v}")?;
    }
    writeln!(w, "CELL_DATA {}", leaves.len())?;
    writeln!(w, "SCALARS eta_sq double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in eta_sq {
        writeln!(w, "{v}")?;
    }
    writeln!(w, "SCALARS lambda int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &t in &leaves {
        let l = mesh.tet(t).verts.iter().map(|&n| mesh.node(n).lambda).max().unwrap();
        writeln!(w, "{l}")?;
    }
    w.flush()
}
