//! JSON file format for states, POVMs, channels and instruments.
//!
//! ```json
//! {"kind":"povm","dim":2,"data":[{"label":"0","effect":[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[0.0,0.0]]]}]}
//! ```
//!
//! A complex entry is `[re, im]` and a matrix is a list of rows. Kinds with
//! different input and output spaces carry `"dims": [in, out]` instead of
//! `"dim"`. Floats are written with 17 significant digits so that reading a
//! file back reproduces every bit.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use serde_json::Value;

use qinstrument::matkit::{from_rows, to_rows, Matrix};
use qinstrument::measure::{Effect, Instrument, Povm};
use qinstrument::{DensityOperator, KrausChannel, LinearMap, Superoperator, Tolerance};

type Rows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown kind '{0}'")]
    UnknownKind(String),
    #[error("kind '{kind}' needs field '{field}'")]
    MissingField { kind: String, field: &'static str },
    #[error("{what}: expected {expected}, found {found}")]
    Shape {
        what: String,
        expected: String,
        found: String,
    },
    #[error("{0}")]
    Matrix(#[from] qinstrument::Error),
}

/// A parsed file. Shapes are checked; physical invariants are not.
#[derive(Debug, Clone, PartialEq)]
pub enum Object {
    Density(Matrix),
    Povm {
        dim: usize,
        effects: Vec<(String, Matrix)>,
    },
    KrausChannel {
        d_in: usize,
        d_out: usize,
        kraus: Vec<Matrix>,
    },
    Superoperator {
        d_in: usize,
        d_out: usize,
        mat: Matrix,
    },
    Instrument {
        d_in: usize,
        d_out: usize,
        outcomes: Vec<(String, Vec<Matrix>)>,
    },
}

#[derive(Deserialize)]
struct Header {
    kind: String,
    dim: Option<usize>,
    dims: Option<[usize; 2]>,
    data: Value,
}

#[derive(Serialize, Deserialize)]
struct LabeledEffect {
    label: String,
    effect: Rows,
}

#[derive(Serialize, Deserialize)]
struct LabeledKraus {
    label: String,
    kraus: Vec<Rows>,
}

#[derive(Serialize)]
struct File<'a, T> {
    kind: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dims: Option<[usize; 2]>,
    data: T,
}

fn matrix(rows: &Rows, shape: (usize, usize), what: impl Into<String>) -> Result<Matrix, FormatError> {
    let m = from_rows(rows)?;
    if m.shape() != shape {
        return Err(FormatError::Shape {
            what: what.into(),
            expected: format!("{}x{}", shape.0, shape.1),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(m)
}

impl Object {
    pub fn kind(&self) -> &'static str {
        match self {
            Object::Density(_) => "density",
            Object::Povm { .. } => "povm",
            Object::KrausChannel { .. } => "kraus_channel",
            Object::Superoperator { .. } => "superoperator",
            Object::Instrument { .. } => "instrument",
        }
    }

    pub fn parse(text: &str) -> Result<Object, FormatError> {
        let h: Header = serde_json::from_str(text)?;
        let kind = h.kind.clone();
        let dim = || h.dim.ok_or(FormatError::MissingField { kind: kind.clone(), field: "dim" });
        let dims = || h.dims.ok_or(FormatError::MissingField { kind: kind.clone(), field: "dims" });
        match h.kind.as_str() {
            "density" => {
                let d = dim()?;
                let rows: Rows = serde_json::from_value(h.data)?;
                Ok(Object::Density(matrix(&rows, (d, d), "density matrix")?))
            }
            "povm" => {
                let d = dim()?;
                let items: Vec<LabeledEffect> = serde_json::from_value(h.data)?;
                let effects = items
                    .into_iter()
                    .map(|e| {
                        let m = matrix(&e.effect, (d, d), format!("effect '{}'", e.label))?;
                        Ok((e.label, m))
                    })
                    .collect::<Result<_, FormatError>>()?;
                Ok(Object::Povm { dim: d, effects })
            }
            "kraus_channel" => {
                let [d_in, d_out] = dims()?;
                let items: Vec<Rows> = serde_json::from_value(h.data)?;
                let kraus = items
                    .iter()
                    .enumerate()
                    .map(|(i, k)| matrix(k, (d_out, d_in), format!("Kraus operator {i}")))
                    .collect::<Result<_, _>>()?;
                Ok(Object::KrausChannel { d_in, d_out, kraus })
            }
            "superoperator" => {
                let [d_in, d_out] = dims()?;
                let rows: Rows = serde_json::from_value(h.data)?;
                let mat = matrix(&rows, (d_out * d_out, d_in * d_in), "superoperator matrix")?;
                Ok(Object::Superoperator { d_in, d_out, mat })
            }
            "instrument" => {
                let [d_in, d_out] = dims()?;
                let items: Vec<LabeledKraus> = serde_json::from_value(h.data)?;
                let outcomes = items
                    .into_iter()
                    .map(|o| {
                        let kraus = o
                            .kraus
                            .iter()
                            .enumerate()
                            .map(|(i, k)| matrix(k, (d_out, d_in), format!("outcome '{}' Kraus operator {i}", o.label)))
                            .collect::<Result<_, _>>()?;
                        Ok((o.label, kraus))
                    })
                    .collect::<Result<_, FormatError>>()?;
                Ok(Object::Instrument { d_in, d_out, outcomes })
            }
            other => Err(FormatError::UnknownKind(other.to_string())),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            Object::Density(m) => write(&File {
                kind: self.kind(),
                dim: Some(m.nrows()),
                dims: None,
                data: to_rows(m),
            }),
            Object::Povm { dim, effects } => write(&File {
                kind: self.kind(),
                dim: Some(*dim),
                dims: None,
                data: effects
                    .iter()
                    .map(|(l, m)| LabeledEffect {
                        label: l.clone(),
                        effect: to_rows(m),
                    })
                    .collect::<Vec<_>>(),
            }),
            Object::KrausChannel { d_in, d_out, kraus } => write(&File {
                kind: self.kind(),
                dim: None,
                dims: Some([*d_in, *d_out]),
                data: kraus.iter().map(to_rows).collect::<Vec<_>>(),
            }),
            Object::Superoperator { d_in, d_out, mat } => write(&File {
                kind: self.kind(),
                dim: None,
                dims: Some([*d_in, *d_out]),
                data: to_rows(mat),
            }),
            Object::Instrument { d_in, d_out, outcomes } => write(&File {
                kind: self.kind(),
                dim: None,
                dims: Some([*d_in, *d_out]),
                data: outcomes
                    .iter()
                    .map(|(l, ks)| LabeledKraus {
                        label: l.clone(),
                        kraus: ks.iter().map(to_rows).collect(),
                    })
                    .collect::<Vec<_>>(),
            }),
        }
    }

    pub fn from_density(rho: &DensityOperator) -> Self {
        Object::Density(rho.matrix().clone())
    }

    pub fn from_povm(povm: &Povm) -> Self {
        Object::Povm {
            dim: povm.dim(),
            effects: povm
                .outcomes()
                .iter()
                .map(|(l, e)| (l.clone(), e.matrix().clone()))
                .collect(),
        }
    }

    pub fn from_kraus(channel: &KrausChannel) -> Self {
        Object::KrausChannel {
            d_in: channel.d_in(),
            d_out: channel.d_out(),
            kraus: channel.kraus().to_vec(),
        }
    }

    pub fn from_superoperator(s: &Superoperator) -> Self {
        Object::Superoperator {
            d_in: s.d_in(),
            d_out: s.d_out(),
            mat: s.matrix().clone(),
        }
    }

    pub fn from_instrument(inst: &Instrument) -> Self {
        Object::Instrument {
            d_in: inst.d_in(),
            d_out: inst.d_out(),
            outcomes: inst
                .outcomes()
                .iter()
                .map(|(l, b)| (l.clone(), b.kraus().to_vec()))
                .collect(),
        }
    }

    pub fn to_density(&self, tol: &Tolerance) -> qinstrument::Result<DensityOperator> {
        match self {
            Object::Density(m) => DensityOperator::new(m.clone(), tol),
            _ => Err(self.wrong_kind("density")),
        }
    }

    pub fn to_povm(&self, tol: &Tolerance) -> qinstrument::Result<Povm> {
        match self {
            Object::Povm { effects, .. } => {
                let outcomes = effects
                    .iter()
                    .map(|(l, m)| Ok((l.clone(), Effect::new(m.clone(), tol)?)))
                    .collect::<qinstrument::Result<Vec<_>>>()?;
                Povm::new(outcomes, tol)
            }
            _ => Err(self.wrong_kind("povm")),
        }
    }

    pub fn to_kraus(&self) -> qinstrument::Result<KrausChannel> {
        match self {
            Object::KrausChannel { d_in, d_out, kraus } => KrausChannel::new(*d_in, *d_out, kraus.clone()),
            _ => Err(self.wrong_kind("kraus_channel")),
        }
    }

    pub fn to_superoperator(&self) -> qinstrument::Result<Superoperator> {
        match self {
            Object::Superoperator { d_in, d_out, mat } => Superoperator::new(*d_in, *d_out, mat.clone()),
            _ => Err(self.wrong_kind("superoperator")),
        }
    }

    pub fn to_instrument(&self, tol: &Tolerance) -> qinstrument::Result<Instrument> {
        match self {
            Object::Instrument { d_in, d_out, outcomes } => {
                let maps = outcomes
                    .iter()
                    .map(|(l, ks)| Ok((l.clone(), KrausChannel::new(*d_in, *d_out, ks.clone())?)))
                    .collect::<qinstrument::Result<Vec<_>>>()?;
                Instrument::new(maps, tol)
            }
            _ => Err(self.wrong_kind("instrument")),
        }
    }

    fn wrong_kind(&self, wanted: &str) -> qinstrument::Error {
        qinstrument::Error::InvalidState(format!("expected a {wanted} file, found {}", self.kind()))
    }
}

/// Compact JSON with every float printed as `{:.16e}`.
struct ExactFloats;

impl Formatter for ExactFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

fn write<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use qinstrument::harness::{atom_demo, random};
    use qinstrument::matkit::{c, diag};

    fn round_trip(obj: &Object) {
        let first = obj.to_json();
        let back = Object::parse(&first).unwrap();
        assert_eq!(&back, obj);
        assert_eq!(back.to_json(), first);
    }

    #[test]
    fn every_kind_round_trips_bit_exactly() {
        let mut rng = random::rng_for(9);
        let t = Tolerance::default();
        round_trip(&Object::from_density(&random::density(&mut rng, 3)));
        round_trip(&Object::from_povm(&random::povm(&mut rng, 2, 3, &t)));
        round_trip(&Object::from_kraus(&random::cptp(&mut rng, 2, 3, 2)));
        round_trip(&Object::from_superoperator(&random::cptp(&mut rng, 3, 2, 2).to_superoperator()));
        round_trip(&Object::from_instrument(&random::instrument(&mut rng, 2, 2, 3, 2, &t)));
        round_trip(&Object::from_instrument(&atom_demo()));
    }

    #[test]
    fn awkward_floats_survive() {
        let m = Matrix::from_row_slice(2, 2, &[c(0.1, -0.0), c(1e-300, 5e-324), c(-1.0 / 3.0, f64::MAX), c(2.0, 0.0)]);
        round_trip(&Object::Density(m));
    }

    #[test]
    fn integers_are_accepted_on_input() {
        let obj = Object::parse(r#"{"kind":"density","dim":2,"data":[[[1,0],[0,0]],[[0,0],[0,0]]]}"#).unwrap();
        assert_eq!(obj, Object::Density(diag(&[1.0, 0.0])));
    }

    #[test]
    fn shape_errors() {
        let bad = r#"{"kind":"kraus_channel","dims":[2,2],"data":[[[[1,0],[0,0],[0,0],[0,0]]]]}"#;
        assert!(matches!(Object::parse(bad), Err(FormatError::Shape { .. })));
        let ragged = r#"{"kind":"density","dim":2,"data":[[[1,0]],[[0,0],[0,0]]]}"#;
        assert!(Object::parse(ragged).is_err());
        assert!(matches!(
            Object::parse(r#"{"kind":"density","data":[]}"#),
            Err(FormatError::MissingField { .. })
        ));
        assert!(matches!(
            Object::parse(r#"{"kind":"blob","dim":1,"data":[]}"#),
            Err(FormatError::UnknownKind(_))
        ));
    }
}
