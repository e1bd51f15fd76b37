use std::collections::HashSet;
use std::io::Write;

use crate::config::Experiment;
use crate::CliError;

/// Identifies a row. `index` is the iteration, eigen-index or 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub matrix: String,
    pub family: String,
    pub k: usize,
    pub s: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub key: RowKey,
    /// One cell per column; `None` is written as an empty cell.
    pub values: Vec<Option<f64>>,
    pub seed: u64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub experiment: Experiment,
    /// File stem of the CSV.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<ResultRow>,
}

/// The `# config_hash=…, seed=…, version=…` line heading every CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Metadata {
    pub fn line(&self) -> String {
        format!("# config_hash={}, seed={}, version={}", self.config_hash, self.seed, self.version)
    }
}

impl ResultTable {
    pub fn new(experiment: Experiment, columns: &[&str]) -> Self {
        Self {
            experiment,
            name: experiment.as_str().to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Value of `name` in `row`, if the column exists and the cell is filled.
    pub fn value(&self, row: &ResultRow, name: &str) -> Option<f64> {
        self.column(name).and_then(|i| row.values[i])
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut seen = HashSet::new();
        for row in &self.rows {
            if row.values.len() != self.columns.len() {
                return Err(CliError::Table(format!("row {:?} has {} cells for {} columns", row.key, row.values.len(), self.columns.len())));
            }
            if !seen.insert(&row.key) {
                return Err(CliError::Table(format!("duplicate key {:?}", row.key)));
            }
            for (c, v) in self.columns.iter().zip(&row.values) {
                if let Some(v) = v {
                    if !v.is_finite() {
                        return Err(CliError::Table(format!("non-finite {c} = {v} at {:?}", row.key)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn header(&self) -> String {
        let mut h = String::from("experiment,matrix,family,k,s,index");
        for c in &self.columns {
            h.push(',');
            h.push_str(c);
        }
        h.push_str(",seed,trials");
        h
    }

    pub fn write_csv<W: Write>(&self, w: &mut W, meta: &Metadata) -> Result<(), CliError> {
        self.validate()?;
        writeln!(w, "{}", meta.line())?;
        writeln!(w, "{}", self.header())?;
        for row in &self.rows {
            let k = &row.key;
            write!(w, "{},{},{},{},{},{}", self.experiment, k.matrix, k.family, k.k, k.s, k.index)?;
            for v in &row.values {
                match v {
                    Some(v) => write!(w, ",{v:e}")?,
                    None => write!(w, ",")?,
                }
            }
            writeln!(w, ",{},{}", row.seed, row.trials)?;
        }
        Ok(())
    }
}
