use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClientFunction, Family, GeneratorParams, LogisticClient, PolyhedronClient, ProblemInstance, QuadraticClient};
use crate::error::{Error, Result};

pub const PROBLEM_EXTENSION: &str = ".problem.json";

/// Raw per-client arrays, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientData {
    Quadratic { a: Vec<f64>, b: Vec<f64> },
    Polyhedron { rows: Vec<f64>, b: Vec<f64>, scale: f64 },
    Logreg { features: Vec<f64>, labels: Vec<f64>, scale: f64, reg: f64 },
}

/// On-disk form of a [`ProblemInstance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub family: Family,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    #[serde(default)]
    pub generator_params: Option<GeneratorParams>,
    pub clients: Vec<ClientData>,
    #[serde(default)]
    pub x_star: Option<Vec<f64>>,
    #[serde(default)]
    pub f_star: Option<f64>,
}

impl ProblemDocument {
    pub fn from_instance(p: &ProblemInstance) -> Self {
        let clients = p
            .clients
            .iter()
            .map(|c| match c {
                ClientFunction::Quadratic(q) => ClientData::Quadratic { a: q.a().to_vec(), b: q.b().to_vec() },
                ClientFunction::Polyhedron(h) => {
                    ClientData::Polyhedron { rows: h.rows().to_vec(), b: h.offsets().to_vec(), scale: h.scale() }
                }
                ClientFunction::Logistic(l) => ClientData::Logreg {
                    features: l.features().to_vec(),
                    labels: l.labels().to_vec(),
                    scale: l.scale(),
                    reg: l.reg(),
                },
            })
            .collect();
        ProblemDocument {
            family: p.family,
            n: p.n(),
            d: p.d,
            seed: p.seed,
            generator_params: p.provenance.clone(),
            clients,
            x_star: p.x_star.clone(),
            f_star: p.f_star,
        }
    }

    pub fn into_instance(self) -> Result<ProblemInstance> {
        if self.clients.len() != self.n {
            return Err(Error::Config(format!("document declares n={} but holds {} clients", self.n, self.clients.len())));
        }
        let d = self.d;
        let clients = self
            .clients
            .into_iter()
            .map(|c| match c {
                ClientData::Quadratic { a, b } => QuadraticClient::new(d, a, b).map(ClientFunction::Quadratic),
                ClientData::Polyhedron { rows, b, scale } => {
                    PolyhedronClient::new(d, rows, b, scale).map(ClientFunction::Polyhedron)
                }
                ClientData::Logreg { features, labels, scale, reg } => {
                    LogisticClient::new(d, features, labels, scale, reg).map(ClientFunction::Logistic)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = ProblemInstance::from_clients(clients)?;
        if p.family != self.family || p.d != d {
            return Err(Error::Config("client data disagrees with the declared family or dimension".into()));
        }
        if let Some(x) = &self.x_star {
            crate::error::check_dim(d, x.len())?;
        }
        p.seed = self.seed;
        p.provenance = self.generator_params;
        p.x_star = self.x_star;
        p.f_star = self.f_star;
        Ok(p)
    }
}

impl ProblemInstance {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ProblemDocument::from_instance(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ProblemDocument>(s)?.into_instance()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
