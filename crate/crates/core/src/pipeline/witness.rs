//! Stored operator inequalities `operand ≼ factor·left⊗right`.
//!
//! Each operator is kept in the dump format. Diagonal operators are stored as
//! a d×1 column of their diagonal, which is unambiguous because every stored
//! operator is square. The hash covers the three records followed by the
//! factor as f64 little endian.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::dump::{read_matrices, to_bytes};
use crate::linalg::{product_domination_margin, BipartiteCut, ComplexMatrix};

/// Largest dense (non-diagonal) dimension for which operators are stored.
pub const WITNESS_DENSE_LIMIT: usize = 1024;

#[derive(Clone, Debug)]
pub enum WitnessMatrix {
    Diagonal(ComplexMatrix),
    Dense(ComplexMatrix),
    Omitted { dim: usize },
}

impl WitnessMatrix {
    pub fn compact(m: &ComplexMatrix) -> Self {
        if m.is_diagonal() {
            WitnessMatrix::Diagonal(ComplexMatrix::column_vector(&m.diagonal()))
        } else if m.rows() <= WITNESS_DENSE_LIMIT {
            WitnessMatrix::Dense(m.clone())
        } else {
            WitnessMatrix::Omitted { dim: m.rows() }
        }
    }

    /// Inverse of the stored form: a d×1 record is a diagonal.
    pub fn from_stored(m: ComplexMatrix) -> Self {
        if m.cols() == 1 && m.rows() > 1 {
            WitnessMatrix::Diagonal(m)
        } else {
            WitnessMatrix::Dense(m)
        }
    }

    fn stored(&self) -> Option<&ComplexMatrix> {
        match self {
            WitnessMatrix::Diagonal(m) | WitnessMatrix::Dense(m) => Some(m),
            WitnessMatrix::Omitted { .. } => None,
        }
    }

    pub fn expand(&self) -> Option<ComplexMatrix> {
        match self {
            WitnessMatrix::Diagonal(c) => Some(ComplexMatrix::from_diag(c.col(0))),
            WitnessMatrix::Dense(m) => Some(m.clone()),
            WitnessMatrix::Omitted { .. } => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub label: String,
    pub factor: f64,
    /// λ_min(factor·left⊗right − operand) at creation.
    pub margin: f64,
    pub cut: BipartiteCut,
    pub operand: WitnessMatrix,
    pub left: WitnessMatrix,
    pub right: WitnessMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub label: String,
    pub factor: f64,
    pub margin: f64,
    pub d_l: usize,
    pub d_r: usize,
    /// Hex SHA-256 of the stored bytes; absent when the operand was too large to store.
    pub sha256: Option<String>,
}

impl Witness {
    /// Computes the margin and fails unless it is at least −tol·max(factor, 1).
    pub fn new(
        label: impl Into<String>,
        operand: &ComplexMatrix,
        left: &ComplexMatrix,
        right: &ComplexMatrix,
        factor: f64,
        cut: &BipartiteCut,
        tol: f64,
    ) -> Result<Self> {
        let label = label.into();
        let margin = product_domination_margin(operand, left, right, factor, cut)?;
        if !(margin >= -tol * factor.max(1.0)) {
            return Err(Error::contract_psd(format!("witness '{label}' failed"), margin));
        }
        Ok(Self {
            label,
            factor,
            margin,
            cut: cut.clone(),
            operand: WitnessMatrix::compact(operand),
            left: WitnessMatrix::compact(left),
            right: WitnessMatrix::compact(right),
        })
    }

    /// The stored bytes: three dump records, or `None` when something was omitted.
    pub fn bytes(&self) -> Option<Vec<u8>> {
        let parts = [self.operand.stored()?, self.left.stored()?, self.right.stored()?];
        Some(to_bytes(&parts))
    }

    pub fn sha256(&self) -> Option<String> {
        let mut bytes = self.bytes()?;
        bytes.extend_from_slice(&self.factor.to_le_bytes());
        Some(hex::encode(Sha256::digest(&bytes)))
    }

    pub fn record(&self) -> WitnessRecord {
        WitnessRecord {
            label: self.label.clone(),
            factor: self.factor,
            margin: self.margin,
            d_l: self.cut.d_l,
            d_r: self.cut.d_r,
            sha256: self.sha256(),
        }
    }

    /// Recomputes the margin from the stored operators.
    pub fn recheck(&self) -> Result<f64> {
        let missing = || Error::Resource(format!("witness '{}' was not stored", self.label));
        let op = self.operand.expand().ok_or_else(missing)?;
        let l = self.left.expand().ok_or_else(missing)?;
        let r = self.right.expand().ok_or_else(missing)?;
        product_domination_margin(&op, &l, &r, self.factor, &self.cut)
    }

    /// Rebuilds a witness from its record and the three stored matrices.
    pub fn restore(record: &WitnessRecord, mats: [ComplexMatrix; 3]) -> Result<Self> {
        let cut = BipartiteCut::new(record.d_l, record.d_r)?;
        let [o, l, r] = mats;
        let w = Self {
            label: record.label.clone(),
            factor: record.factor,
            margin: record.margin,
            cut,
            operand: WitnessMatrix::from_stored(o),
            left: WitnessMatrix::from_stored(l),
            right: WitnessMatrix::from_stored(r),
        };
        if w.sha256() != record.sha256 {
            return Err(Error::contract(format!("witness '{}' does not match its recorded hash", record.label)));
        }
        Ok(w)
    }
}

pub const BUNDLE_MATRICES: &str = "witnesses.awmx";
pub const BUNDLE_RECORDS: &str = "witnesses.json";

/// Writes `witnesses.json` (all records) and `witnesses.awmx` (three dump
/// records per stored witness, in the same order).
pub fn write_bundle(dir: &Path, witnesses: &[Witness]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut bytes = Vec::new();
    for w in witnesses {
        if let Some(b) = w.bytes() {
            bytes.extend_from_slice(&b);
        }
    }
    std::fs::write(dir.join(BUNDLE_MATRICES), bytes)?;
    let records: Vec<WitnessRecord> = witnesses.iter().map(Witness::record).collect();
    let json = serde_json::to_string_pretty(&records).expect("witness records serialize");
    std::fs::write(dir.join(BUNDLE_RECORDS), json)?;
    Ok(())
}

/// Reads a bundle back. Records without a hash were never stored and come
/// back as `None`.
pub fn read_bundle(dir: &Path) -> Result<Vec<(WitnessRecord, Option<Witness>)>> {
    let text = std::fs::read_to_string(dir.join(BUNDLE_RECORDS))?;
    let records: Vec<WitnessRecord> =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{BUNDLE_RECORDS}: {e}")))?;
    let file = std::fs::File::open(dir.join(BUNDLE_MATRICES))?;
    let mut mats = read_matrices(std::io::BufReader::new(file))?.into_iter();
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let w = if rec.sha256.is_some() {
            let (Some(o), Some(l), Some(r)) = (mats.next(), mats.next(), mats.next()) else {
                return Err(Error::Shape(format!("{BUNDLE_MATRICES} ends before witness '{}'", rec.label)));
            };
            Some(Witness::restore(&rec, [o, l, r])?)
        } else {
            None
        };
        out.push((rec, w));
    }
    if mats.next().is_some() {
        return Err(Error::Shape(format!("{BUNDLE_MATRICES} has trailing records")));
    }
    Ok(out)
}
