//! JSON documents and CSV exports for operators, spectra, perturbation
//! sequences and certificates.
//!
//! Floats are written in shortest round-trip form, so reading a document
//! back reproduces every field bit for bit.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::types::{OperatorSpec, PerturbationSeq, Potential, RobinAngles, SpectralDatum, SpectrumTable};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDocument {
    pub grid_nodes: usize,
    pub potential: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralRecord {
    pub n: usize,
    pub mu: f64,
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub phi_end: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientRecord {
    pub n: usize,
    pub c: f64,
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path.is_empty() || path == "." {
            "<document>".to_string()
        } else {
            path
        };
        Error::schema(field, e.into_inner().to_string())
    })
}

fn render<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents contain only finite floats");
    s.push('\n');
    s
}

impl OperatorSpec {
    pub fn to_document(&self) -> OperatorDocument {
        OperatorDocument {
            grid_nodes: self.grid().intervals(),
            potential: self.potential.values().to_vec(),
            alpha: self.alpha(),
            beta: self.beta(),
        }
    }

    pub fn from_document(doc: OperatorDocument) -> Result<Self> {
        let grid = Grid::new(doc.grid_nodes)
            .map_err(|e| Error::schema("grid_nodes", e.to_string()))?;
        let potential = Potential::new(grid, doc.potential)?;
        let angles = RobinAngles::new(doc.alpha, doc.beta)?;
        Ok(OperatorSpec::new(potential, angles))
    }

    pub fn to_json(&self) -> String {
        render(&self.to_document())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(parse(text)?)
    }

    /// `x,q` table with one row per node.
    pub fn write_potential_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "q"])?;
        for (x, q) in self.grid().nodes().zip(self.potential.values()) {
            w.write_record([fmt_float(x), fmt_float(*q)])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl From<&SpectralDatum> for SpectralRecord {
    fn from(d: &SpectralDatum) -> Self {
        Self {
            n: d.n,
            mu: d.mu,
            a: d.a,
            b: d.b,
            phi_end: d.phi_end,
            kappa: d.kappa,
        }
    }
}

impl SpectrumTable {
    pub fn to_records(&self) -> Vec<SpectralRecord> {
        self.data().iter().map(SpectralRecord::from).collect()
    }

    pub fn from_records(records: Vec<SpectralRecord>) -> Result<Self> {
        let data = records
            .into_iter()
            .map(|r| SpectralDatum {
                n: r.n,
                mu: r.mu,
                a: r.a,
                b: r.b,
                phi_end: r.phi_end,
                kappa: r.kappa,
            })
            .collect();
        SpectrumTable::new(data)
    }

    pub fn to_json(&self) -> String {
        render(&self.to_records())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_records(parse(text)?)
    }

    /// `n,mu,a,b,kappa` table; `b` is left empty when absent.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "mu", "a", "b", "kappa"])?;
        for d in self.data() {
            w.write_record([
                d.n.to_string(),
                fmt_float(d.mu),
                fmt_float(d.a),
                d.b.map(fmt_float).unwrap_or_default(),
                fmt_float(d.kappa),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl PerturbationSeq {
    pub fn to_records(&self) -> Vec<CoefficientRecord> {
        self.coeffs()
            .iter()
            .enumerate()
            .map(|(n, &c)| CoefficientRecord { n, c })
            .collect()
    }

    pub fn from_records(records: Vec<CoefficientRecord>) -> Result<Self> {
        let mut coeffs = Vec::new();
        for (i, r) in records.iter().enumerate() {
            if !r.c.is_finite() {
                return Err(Error::schema(format!("[{i}].c"), "not finite"));
            }
            if r.n < coeffs.len() && coeffs[r.n] != 0.0 {
                return Err(Error::schema(format!("[{i}].n"), format!("index {} repeated", r.n)));
            }
            if r.n >= coeffs.len() {
                coeffs.resize(r.n + 1, 0.0);
            }
            coeffs[r.n] = r.c;
        }
        PerturbationSeq::new(coeffs)
    }

    pub fn to_json(&self) -> String {
        render(&self.to_records())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_records(parse(text)?)
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

pub(crate) fn to_pretty_json<T: Serialize>(value: &T) -> String {
    render(value)
}

pub(crate) fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    parse(text)
}
