//! Class-grouped dictionaries and proxy planes.
//!
//! Atoms of one class occupy a contiguous rectangular block of a 2-D
//! plane, so convolutions and block-average pooling line up with class
//! structure. The dictionary carries the raw atoms Phi (d x n), the
//! reduced dictionary D = A Phi (m x n, re-normalized), and the ridge
//! denoiser B (n x m).

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::{
    normalize_columns, pca_apply, ridge_denoiser, Matrix, ProjectionMatrix,
};
use crate::pipeline::dataset::FeatureDataset;
use crate::rng::{derive_seed, rng_from_seed};

/// Geometry of the 2-D class-block plane.
///
/// Each class gets a `block_rows x block_cols` rectangle; class blocks
/// pack row-major into a near-square grid. Cells with no atom (trailing
/// cells of a non-rectangular class, or whole unused grid slots) are
/// dead and always read as zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassLayout {
    pub class_count: usize,
    pub atoms_per_class: usize,
    pub block_rows: usize,
    pub block_cols: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub plane_rows: usize,
    pub plane_cols: usize,
}

impl ClassLayout {
    /// Total atom count n = c * atoms_per_class.
    pub fn atom_count(&self) -> usize {
        self.class_count * self.atoms_per_class
    }

    /// Top-left plane cell of class `class`'s block.
    pub fn class_block_origin(&self, class: usize) -> (usize, usize) {
        let gr = class / self.grid_cols;
        let gc = class % self.grid_cols;
        (gr * self.block_rows, gc * self.block_cols)
    }

    /// Plane cell of atom `atom` (row-major fill inside its class block).
    pub fn atom_cell(&self, atom: usize) -> (usize, usize) {
        debug_assert!(atom < self.atom_count());
        let class = atom / self.atoms_per_class;
        let local = atom % self.atoms_per_class;
        let (r0, c0) = self.class_block_origin(class);
        (r0 + local / self.block_cols, c0 + local % self.block_cols)
    }

    /// Atom at a plane cell, or `None` for dead cells.
    pub fn cell_atom(&self, row: usize, col: usize) -> Option<usize> {
        if row >= self.plane_rows || col >= self.plane_cols {
            return None;
        }
        let gr = row / self.block_rows;
        let gc = col / self.block_cols;
        let class = gr * self.grid_cols + gc;
        if class >= self.class_count {
            return None;
        }
        let local = (row % self.block_rows) * self.block_cols + (col % self.block_cols);
        if local >= self.atoms_per_class {
            return None;
        }
        Some(class * self.atoms_per_class + local)
    }

    /// Class owning atom `atom`.
    pub fn atom_class(&self, atom: usize) -> usize {
        atom / self.atoms_per_class
    }

    /// Flat index range [start, end) of class `class`'s atoms.
    pub fn class_atom_range(&self, class: usize) -> std::ops::Range<usize> {
        class * self.atoms_per_class..(class + 1) * self.atoms_per_class
    }
}

/// Builds the plane geometry for `c` classes with `atoms_per_class`
/// atoms each. Blocks are as square as ceil arithmetic allows and the
/// class grid has `ceil(sqrt(c))` columns.
pub fn build_layout(c: usize, atoms_per_class: usize) -> Result<ClassLayout> {
    if c < 2 {
        return Err(Error::Parameter(format!("need at least 2 classes, got {c}")));
    }
    if atoms_per_class < 1 {
        return Err(Error::Parameter("atoms_per_class must be at least 1".into()));
    }
    let block_rows = (atoms_per_class as f64).sqrt().ceil() as usize;
    let block_cols = atoms_per_class.div_ceil(block_rows);
    let grid_cols = (c as f64).sqrt().ceil() as usize;
    let grid_rows = c.div_ceil(grid_cols);
    Ok(ClassLayout {
        class_count: c,
        atoms_per_class,
        block_rows,
        block_cols,
        grid_rows,
        grid_cols,
        plane_rows: grid_rows * block_rows,
        plane_cols: grid_cols * block_cols,
    })
}

/// How proxy coefficients are computed from a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProxyMode {
    /// `B y` with the ridge denoiser (the default).
    #[default]
    Ridge,
    /// Plain correlation `D^T y`.
    Correlation,
}

/// Class-grouped dictionary with its reduced form and denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    /// Raw atoms, d x n, unit columns.
    pub phi: Matrix,
    /// Reduced dictionary A*Phi, m x n, re-normalized to unit columns.
    pub d: Matrix,
    /// Ridge denoiser, n x m.
    pub b: Matrix,
    pub layout: ClassLayout,
    pub lambda: f64,
    pub class_names: Vec<String>,
}

impl Dictionary {
    pub fn atom_count(&self) -> usize {
        self.layout.atom_count()
    }

    pub fn class_count(&self) -> usize {
        self.layout.class_count
    }

    pub fn reduced_dim(&self) -> usize {
        self.d.rows()
    }
}

/// A proxy coefficient plane plus its flat view, consistent with the
/// layout (dead cells are zero in the plane and absent from the flat).
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyPlane {
    pub plane: Matrix,
    pub flat: Vec<f64>,
}

/// Builds a dictionary from (already standardized) training features.
///
/// Returns the dictionary together with the dataset indices of the
/// selected atoms so callers can train on the remainder.
pub fn build_dictionary_selection(
    train: &FeatureDataset,
    atoms_per_class: usize,
    projection: &ProjectionMatrix,
    lambda: f64,
    seed: u64,
) -> Result<(Dictionary, Vec<usize>)> {
    let c = train.class_count();
    let layout = build_layout(c, atoms_per_class)?;
    let n = layout.atom_count();
    let d_in = train.dim();
    if projection.d() != d_in {
        return Err(Error::Dimension(format!(
            "projection expects dimension {}, dataset has {d_in}",
            projection.d()
        )));
    }

    // seeded atom selection, class by class
    let mut rng = rng_from_seed(derive_seed(seed, 0x21));
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for class in 0..c {
        let mut idx = train.class_indices(class);
        if idx.len() < atoms_per_class {
            return Err(Error::Data(format!(
                "class '{}' has {} samples, needs {atoms_per_class} atoms",
                train.class_names[class],
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        chosen.extend_from_slice(&idx[..atoms_per_class]);
    }

    // Phi: atoms as columns, unit-normalized
    let mut phi = Matrix::zeros(d_in, n);
    for (col, &sample) in chosen.iter().enumerate() {
        for (row, &v) in train.features.row(sample).iter().enumerate() {
            phi.set(row, col, v);
        }
    }
    let phi = normalize_columns(&phi)?;

    // D: raw atoms through the same affine map as queries, then unit
    // columns. Normalizing before the map would fight the centering on
    // non-centered data; on centered data the orders coincide.
    let m = projection.m();
    let mut reduced = Matrix::zeros(m, n);
    for (col, &sample) in chosen.iter().enumerate() {
        let y = pca_apply(projection, train.features.row(sample))?;
        for (row, v) in y.into_iter().enumerate() {
            reduced.set(row, col, v);
        }
    }
    let reduced = normalize_columns(&reduced)
        .map_err(|_| Error::Numeric("an atom projected to zero under PCA".into()))?;

    let b = ridge_denoiser(&reduced, lambda)?;
    Ok((
        Dictionary {
            phi,
            d: reduced,
            b,
            layout,
            lambda,
            class_names: train.class_names.clone(),
        },
        chosen,
    ))
}

/// [`build_dictionary_selection`] without the atom provenance.
pub fn build_dictionary(
    train: &FeatureDataset,
    atoms_per_class: usize,
    projection: &ProjectionMatrix,
    lambda: f64,
    seed: u64,
) -> Result<Dictionary> {
    build_dictionary_selection(train, atoms_per_class, projection, lambda, seed).map(|(d, _)| d)
}

/// Computes the proxy plane for a reduced query `y`.
pub fn proxy(dict: &Dictionary, y: &[f64], mode: ProxyMode) -> Result<ProxyPlane> {
    if y.len() != dict.reduced_dim() {
        return Err(Error::Dimension(format!(
            "query length {} does not match reduced dimension {}",
            y.len(),
            dict.reduced_dim()
        )));
    }
    let flat = match mode {
        ProxyMode::Ridge => dict.b.matvec(y)?,
        ProxyMode::Correlation => dict.d.matvec_t(y)?,
    };
    let plane = plane_from_flat(&flat, &dict.layout)?;
    Ok(ProxyPlane { plane, flat })
}

/// Reshapes a flat coefficient vector onto the plane; dead cells zero.
pub fn plane_from_flat(flat: &[f64], layout: &ClassLayout) -> Result<Matrix> {
    if flat.len() != layout.atom_count() {
        return Err(Error::Dimension(format!(
            "flat length {} does not match atom count {}",
            flat.len(),
            layout.atom_count()
        )));
    }
    let mut plane = Matrix::zeros(layout.plane_rows, layout.plane_cols);
    for (atom, &v) in flat.iter().enumerate() {
        let (r, c) = layout.atom_cell(atom);
        plane.set(r, c, v);
    }
    Ok(plane)
}

/// Inverse of the reshape: reads live cells back into atom order.
pub fn plane_flatten(plane: &Matrix, layout: &ClassLayout) -> Result<Vec<f64>> {
    if plane.rows() != layout.plane_rows || plane.cols() != layout.plane_cols {
        return Err(Error::Dimension(format!(
            "plane is {}x{}, layout wants {}x{}",
            plane.rows(),
            plane.cols(),
            layout.plane_rows,
            layout.plane_cols
        )));
    }
    let mut flat = vec![0.0; layout.atom_count()];
    for (atom, v) in flat.iter_mut().enumerate() {
        let (r, c) = layout.atom_cell(atom);
        *v = plane.get(r, c);
    }
    Ok(flat)
}
