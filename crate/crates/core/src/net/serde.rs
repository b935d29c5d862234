//! JSON documents for networks. Scalars are stored as strings: shortest
//! round-trip decimals for binary64, `p/q` for rationals and hex mantissas for
//! bigfloats, so every kind round-trips bit for bit.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Layer, Network};
use crate::error::{Error, Result};
use crate::scalar::{BigFloat, Real, ScalarKind};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerDoc {
    #[serde(rename = "W")]
    pub w: Vec<Vec<Value>>,
    pub v: Vec<Value>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub scalar: String,
    pub dims: Vec<usize>,
    pub layers: Vec<LayerDoc>,
}

fn scalar_from_value<T: Real>(v: &Value, kind: ScalarKind) -> Result<T> {
    match v {
        Value::String(s) => T::parse_text(s, kind),
        Value::Number(n) => {
            let text = n.to_string();
            T::parse_text(&text, kind).or_else(|_| {
                let f = n.as_f64().ok_or_else(|| Error::ScalarParse(text.clone()))?;
                T::from_f64(f, kind)
            })
        }
        other => Err(Error::ScalarParse(other.to_string())),
    }
}

impl<T: Real> Network<T> {
    pub fn to_doc(&self) -> NetworkDoc {
        let layers = self
            .layers()
            .iter()
            .map(|l| LayerDoc {
                w: (0..l.rows)
                    .map(|i| l.row(i).iter().map(|x| Value::String(x.to_text())).collect())
                    .collect(),
                v: l.v.iter().map(|x| Value::String(x.to_text())).collect(),
            })
            .collect();
        NetworkDoc {
            scalar: self.kind().to_string(),
            dims: self.dims().to_vec(),
            layers,
        }
    }

    pub fn from_doc(doc: &NetworkDoc) -> Result<Self> {
        let kind: ScalarKind = doc.scalar.parse()?;
        if doc.dims.len() != doc.layers.len() + 1 {
            return Err(Error::Schema(format!(
                "dims lists {} widths for {} layers",
                doc.dims.len(),
                doc.layers.len()
            )));
        }
        let mut layers = Vec::with_capacity(doc.layers.len());
        for (i, ld) in doc.layers.iter().enumerate() {
            let (rows, cols) = (doc.dims[i + 1], doc.dims[i]);
            if ld.w.len() != rows || ld.v.len() != rows || ld.w.iter().any(|r| r.len() != cols) {
                return Err(Error::Schema(format!(
                    "layer {i} does not have shape {rows}x{cols} declared by dims"
                )));
            }
            let mut w = Vec::with_capacity(rows * cols);
            for row in &ld.w {
                for x in row {
                    w.push(scalar_from_value::<T>(x, kind)?);
                }
            }
            let v = ld
                .v
                .iter()
                .map(|x| scalar_from_value::<T>(x, kind))
                .collect::<Result<Vec<T>>>()?;
            layers.push(Layer::new(rows, cols, w, v)?);
        }
        Network::new(layers, kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("network documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDoc =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_doc(&doc)
    }
}

/// A network whose scalar type is chosen at run time.
#[derive(Clone, Debug)]
pub enum AnyNetwork {
    F64(Network<f64>),
    BigFloat(Network<BigFloat>),
    Rational(Network<BigRational>),
}

impl AnyNetwork {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDoc =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let kind: ScalarKind = doc.scalar.parse()?;
        Ok(match kind {
            ScalarKind::F64 => AnyNetwork::F64(Network::from_doc(&doc)?),
            ScalarKind::BigFloat { .. } => AnyNetwork::BigFloat(Network::from_doc(&doc)?),
            ScalarKind::Rational => AnyNetwork::Rational(Network::from_doc(&doc)?),
        })
    }

    pub fn from_rational(net: &Network<BigRational>, kind: ScalarKind) -> Result<Self> {
        Ok(match kind {
            ScalarKind::F64 => AnyNetwork::F64(net.cast(kind)?),
            ScalarKind::BigFloat { .. } => AnyNetwork::BigFloat(net.cast(kind)?),
            ScalarKind::Rational => AnyNetwork::Rational(net.clone()),
        })
    }

    pub fn to_json(&self) -> String {
        match self {
            AnyNetwork::F64(n) => n.to_json(),
            AnyNetwork::BigFloat(n) => n.to_json(),
            AnyNetwork::Rational(n) => n.to_json(),
        }
    }

    pub fn kind(&self) -> ScalarKind {
        match self {
            AnyNetwork::F64(n) => n.kind(),
            AnyNetwork::BigFloat(n) => n.kind(),
            AnyNetwork::Rational(n) => n.kind(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            AnyNetwork::F64(n) => n.input_dim(),
            AnyNetwork::BigFloat(n) => n.input_dim(),
            AnyNetwork::Rational(n) => n.input_dim(),
        }
    }

    pub fn size_report(&self) -> super::SizeReport {
        match self {
            AnyNetwork::F64(n) => n.size_report(),
            AnyNetwork::BigFloat(n) => n.size_report(),
            AnyNetwork::Rational(n) => n.size_report(),
        }
    }

    /// Evaluates on exact rational inputs in the network's own arithmetic and
    /// returns text-formatted outputs.
    pub fn evaluate_text(&self, x: &[BigRational]) -> Result<Vec<String>> {
        fn run<T: Real>(n: &Network<T>, x: &[BigRational]) -> Result<Vec<String>> {
            let xs: Vec<T> = x.iter().map(|q| T::from_rational(q, n.kind())).collect();
            Ok(n.evaluate(&xs)?.iter().map(Real::to_text).collect())
        }
        match self {
            AnyNetwork::F64(n) => run(n, x),
            AnyNetwork::BigFloat(n) => run(n, x),
            AnyNetwork::Rational(n) => run(n, x),
        }
    }

    /// Evaluates and converts the outputs to binary64.
    pub fn evaluate_f64(&self, x: &[BigRational]) -> Result<Vec<f64>> {
        fn run<T: Real>(n: &Network<T>, x: &[BigRational]) -> Result<Vec<f64>> {
            let xs: Vec<T> = x.iter().map(|q| T::from_rational(q, n.kind())).collect();
            Ok(n.evaluate(&xs)?.iter().map(Real::to_f64).collect())
        }
        match self {
            AnyNetwork::F64(n) => run(n, x),
            AnyNetwork::BigFloat(n) => run(n, x),
            AnyNetwork::Rational(n) => run(n, x),
        }
    }
}
