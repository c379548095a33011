//! Text model format. One header line
//!
//! ```text
//! ELMV1 <activation> <hidden> <inputs> <outputs> <ridge> <variant>
//! ```
//!
//! followed by blank-line-separated sections, each a `name rows cols` line
//! and one line per row of space-separated decimal values: `A`, `d`, `W`,
//! and — unless the model was saved light — the incremental state (`Q` for
//! the inverse variant, `L` and `D` for the factored variant).
//!
//! Values are written as the shortest decimal that parses back to the same
//! 64-bit float, so save/load/save round-trips are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Activation, ElmModel};
use crate::session::{EngineState, Session, StoredState, Variant};

/// Incremental state carried by a model file.
#[derive(Debug, Clone)]
pub enum PersistedState {
    /// Deployment save: parameters and weights only.
    Light,
    GramInverse(Matrix),
    Factors { triangular: Matrix, diagonal: Vec<f64> },
}

/// In-memory image of a model file.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub activation: Activation,
    pub ridge: f64,
    pub variant: Variant,
    pub input_weights: Matrix,
    pub biases: Vec<f64>,
    pub output_weights: Matrix,
    pub state: PersistedState,
}

impl ModelFile {
    pub fn from_session(session: &Session, light: bool) -> ModelFile {
        let state = if light {
            PersistedState::Light
        } else {
            match session.engine() {
                EngineState::Q(s) => PersistedState::GramInverse(s.gram_inv().clone()),
                EngineState::Ldl(s) => PersistedState::Factors {
                    triangular: s.factors().triangular().clone(),
                    diagonal: s.factors().diagonal().to_vec(),
                },
            }
        };
        ModelFile {
            activation: session.model().activation,
            ridge: session.ridge(),
            variant: session.variant(),
            input_weights: session.model().input_weights.clone(),
            biases: session.model().biases.clone(),
            output_weights: session.engine().weights().clone(),
            state,
        }
    }

    pub fn hidden_count(&self) -> usize {
        self.input_weights.rows()
    }

    pub fn is_light(&self) -> bool {
        matches!(self.state, PersistedState::Light)
    }

    pub fn to_model(&self) -> ElmModel {
        ElmModel {
            input_weights: self.input_weights.clone(),
            biases: self.biases.clone(),
            activation: self.activation,
            output_weights: Some(self.output_weights.clone()),
        }
    }

    /// The stored incremental state, or a state error for light saves.
    pub fn stored_state(&self) -> Result<StoredState> {
        match &self.state {
            PersistedState::Light => Err(Error::State(
                "model was saved light (no incremental state); retrain to grow or prune".into(),
            )),
            PersistedState::GramInverse(q) => Ok(StoredState::GramInverse(q.clone())),
            PersistedState::Factors {
                triangular,
                diagonal,
            } => Ok(StoredState::Factors {
                triangular: triangular.clone(),
                diagonal: diagonal.clone(),
            }),
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let l = self.hidden_count();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "ELMV1 {} {} {} {} {} {}",
            self.activation,
            l,
            self.input_weights.cols(),
            self.output_weights.rows(),
            fmt_value(self.ridge)?,
            self.variant
        );
        write_section(&mut out, "A", &self.input_weights)?;
        write_vector_section(&mut out, "d", &self.biases)?;
        write_section(&mut out, "W", &self.output_weights)?;
        match &self.state {
            PersistedState::Light => {}
            PersistedState::GramInverse(q) => write_section(&mut out, "Q", q)?,
            PersistedState::Factors {
                triangular,
                diagonal,
            } => {
                write_section(&mut out, "L", triangular)?;
                write_vector_section(&mut out, "D", diagonal)?;
            }
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<ModelFile> {
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty model file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 || fields[0] != "ELMV1" {
            return Err(Error::Parse(
                "model file must start with an ELMV1 header of 7 fields".into(),
            ));
        }
        let activation: Activation = fields[1].parse()?;
        let hidden: usize = parse_count(fields[2])?;
        let inputs: usize = parse_count(fields[3])?;
        let outputs: usize = parse_count(fields[4])?;
        let ridge = parse_value(fields[5])?;
        let variant: Variant = fields[6].parse()?;
        if ridge < 0.0 {
            return Err(Error::Parse("negative regularization factor".into()));
        }

        let rest: Vec<&str> = lines.collect();
        let mut cursor = 0usize;
        let input_weights = read_section(&rest, &mut cursor, "A", hidden, inputs)?;
        let biases = read_section(&rest, &mut cursor, "d", hidden, 1)?;
        let output_weights = read_section(&rest, &mut cursor, "W", outputs, hidden)?;

        // skip trailing blank lines to detect a light save
        let mut probe = cursor;
        while probe < rest.len() && rest[probe].trim().is_empty() {
            probe += 1;
        }
        let state = if probe >= rest.len() {
            PersistedState::Light
        } else {
            match variant {
                Variant::Q => {
                    let q = read_section(&rest, &mut cursor, "Q", hidden, hidden)?;
                    PersistedState::GramInverse(q)
                }
                Variant::Ldl => {
                    let tri = read_section(&rest, &mut cursor, "L", hidden, hidden)?;
                    let diag = read_section(&rest, &mut cursor, "D", hidden, 1)?;
                    PersistedState::Factors {
                        triangular: tri,
                        diagonal: diag.data().to_vec(),
                    }
                }
            }
        };

        Ok(ModelFile {
            activation,
            ridge,
            variant,
            input_weights,
            biases: biases.data().to_vec(),
            output_weights,
            state,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path)?;
        ModelFile::parse(&text)
    }
}

fn fmt_value(v: f64) -> Result<String> {
    if !v.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "cannot serialize non-finite value {}",
            v
        )));
    }
    Ok(format!("{}", v))
}

fn parse_count(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad count '{}'", s)))
}

fn parse_value(s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad number '{}'", s)))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite number '{}'", s)));
    }
    Ok(v)
}

fn write_section(out: &mut String, name: &str, m: &Matrix) -> Result<()> {
    let _ = writeln!(out);
    let _ = writeln!(out, "{} {} {}", name, m.rows(), m.cols());
    for i in 0..m.rows() {
        let mut first = true;
        for v in m.row(i) {
            if !first {
                out.push(' ');
            }
            out.push_str(&fmt_value(*v)?);
            first = false;
        }
        out.push('\n');
    }
    Ok(())
}

fn write_vector_section(out: &mut String, name: &str, v: &[f64]) -> Result<()> {
    let _ = writeln!(out);
    let _ = writeln!(out, "{} {} 1", name, v.len());
    for x in v {
        out.push_str(&fmt_value(*x)?);
        out.push('\n');
    }
    Ok(())
}

fn read_section(
    lines: &[&str],
    cursor: &mut usize,
    name: &str,
    rows: usize,
    cols: usize,
) -> Result<Matrix> {
    while *cursor < lines.len() && lines[*cursor].trim().is_empty() {
        *cursor += 1;
    }
    let head = lines
        .get(*cursor)
        .ok_or_else(|| Error::Parse(format!("missing section '{}'", name)))?;
    let fields: Vec<&str> = head.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != name {
        return Err(Error::Parse(format!(
            "expected section header '{} {} {}', found '{}'",
            name, rows, cols, head
        )));
    }
    let r = parse_count(fields[1])?;
    let c = parse_count(fields[2])?;
    if r != rows || c != cols {
        return Err(Error::Parse(format!(
            "section '{}' is {}x{}, header promises {}x{}",
            name, r, c, rows, cols
        )));
    }
    *cursor += 1;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let line = lines
            .get(*cursor)
            .ok_or_else(|| Error::Parse(format!("section '{}' is truncated", name)))?;
        let mut count = 0;
        for tok in line.split_whitespace() {
            data.push(parse_value(tok)?);
            count += 1;
        }
        if count != cols {
            return Err(Error::Parse(format!(
                "row in section '{}' has {} values, expected {}",
                name, count, cols
            )));
        }
        *cursor += 1;
    }
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dataset;
    use crate::session::SessionConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained_session(variant: Variant) -> Session {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::from_fn(3, 20, |_, _| rng.gen_range(-1.0..=1.0));
        let y = Matrix::from_fn(2, 20, |_, _| rng.gen_range(-1.0..=1.0));
        let data = Dataset::new(x, y).unwrap();
        Session::init(
            data,
            &SessionConfig {
                initial_nodes: 5,
                ridge: 0.75,
                variant,
                seed: 1,
                activation: Activation::Tanh,
                allow_zero_ridge: false,
            },
        )
        .unwrap()
    }

    #[test]
    fn text_round_trip_is_byte_identical() {
        for variant in [Variant::Q, Variant::Ldl] {
            for light in [false, true] {
                let file = ModelFile::from_session(&trained_session(variant), light);
                let text = file.to_text().unwrap();
                let reparsed = ModelFile::parse(&text).unwrap();
                assert_eq!(reparsed.to_text().unwrap(), text);
                assert_eq!(reparsed.is_light(), light);
            }
        }
    }

    #[test]
    fn parsed_values_are_bit_exact() {
        let session = trained_session(Variant::Ldl);
        let file = ModelFile::from_session(&session, false);
        let reparsed = ModelFile::parse(&file.to_text().unwrap()).unwrap();
        assert_eq!(reparsed.input_weights, file.input_weights);
        assert_eq!(reparsed.biases, file.biases);
        assert_eq!(reparsed.output_weights, file.output_weights);
        match (&reparsed.state, &file.state) {
            (
                PersistedState::Factors {
                    triangular: a,
                    diagonal: da,
                },
                PersistedState::Factors {
                    triangular: b,
                    diagonal: db,
                },
            ) => {
                assert_eq!(a, b);
                assert_eq!(da, db);
            }
            _ => panic!("state kind changed in round trip"),
        }
    }

    #[test]
    fn awkward_floats_survive_round_trip() {
        let mut file = ModelFile::from_session(&trained_session(Variant::Q), true);
        file.input_weights[(0, 0)] = -0.0;
        file.input_weights[(0, 1)] = 1e300;
        file.input_weights[(1, 0)] = 5e-324; // smallest subnormal
        file.input_weights[(1, 1)] = std::f64::consts::PI;
        let reparsed = ModelFile::parse(&file.to_text().unwrap()).unwrap();
        for (a, b) in reparsed
            .input_weights
            .data()
            .iter()
            .zip(file.input_weights.data())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(ModelFile::parse("").is_err());
        assert!(ModelFile::parse("BOGUS sigmoid 1 1 1 1 q").is_err());
        let session = trained_session(Variant::Q);
        let good = ModelFile::from_session(&session, false).to_text().unwrap();
        // corrupt a dimension line
        let bad = good.replace("A 5 3", "A 5 4");
        assert!(ModelFile::parse(&bad).is_err());
        // inject a non-finite value
        let bad = good.replace("W 2 5\n", "W 2 5\nnan nan nan nan nan\n");
        assert!(ModelFile::parse(&bad).is_err());
    }

    #[test]
    fn light_saves_refuse_to_yield_state() {
        let file = ModelFile::from_session(&trained_session(Variant::Ldl), true);
        assert!(matches!(file.stored_state(), Err(Error::State(_))));
    }
}
