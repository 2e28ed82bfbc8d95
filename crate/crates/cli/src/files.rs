//! On-disk formats: matrix files, utility files and the vertex list.

use std::fmt;
use std::path::Path;

use dp_polytope::{Mechanism, PrivacyParameter, RMatrix, Rational};
use serde::{Deserialize, Serialize};

pub const MATRIX_SCHEMA: &str = "dp-polytope/matrix@1";
pub const UTILITY_SCHEMA: &str = "dp-polytope/utility@1";
pub const VERTICES_SCHEMA: &str = "dp-polytope/vertices@1";

/// A matrix entry as written in a file: a rational string, or a bare integer.
#[derive(Deserialize)]
#[serde(untagged)]
enum Cell {
    Text(String),
    Int(i64),
}

#[derive(Deserialize)]
struct RawMatrixFile {
    schema: Option<String>,
    n: Option<usize>,
    t: Option<Cell>,
    matrix: Vec<Vec<Cell>>,
}

#[derive(Deserialize)]
struct RawUtilityFile {
    schema: Option<String>,
    n: Option<usize>,
    weights: Vec<Vec<Cell>>,
}

/// Parsed contents of a matrix file. The matrix is square but not
/// necessarily stochastic.
#[derive(Clone, Debug)]
pub struct MatrixFile {
    pub t: Option<PrivacyParameter>,
    pub matrix: RMatrix,
}

#[derive(Clone, Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn parse_cell(cell: &Cell, at: impl FnOnce() -> String) -> Result<Rational, InputError> {
    match cell {
        Cell::Int(v) => Ok(Rational::from_integer(*v)),
        Cell::Text(s) => s.trim().parse().map_err(|e| InputError(format!("{}: {e} in {s:?}", at()))),
    }
}

fn parse_grid(field: &str, grid: &[Vec<Cell>], n: Option<usize>) -> Result<RMatrix, InputError> {
    let rows = grid.len();
    if let Some(n) = n {
        if n != rows {
            return Err(InputError(format!("{field}: has {rows} rows but n = {n}")));
        }
    }
    if rows == 0 {
        return Err(InputError(format!("{field}: empty")));
    }
    let mut out = Vec::with_capacity(rows);
    for (i, row) in grid.iter().enumerate() {
        if row.len() != rows {
            return Err(InputError(format!("{field}[{i}]: has {} entries, expected {rows}", row.len())));
        }
        let parsed = row
            .iter()
            .enumerate()
            .map(|(j, c)| parse_cell(c, || format!("{field}[{i}][{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(parsed);
    }
    Ok(RMatrix::from_rows(out).expect("rows checked to be square"))
}

fn check_schema(found: Option<&str>, expected: &str) -> Result<(), InputError> {
    match found {
        Some(s) if s != expected => Err(InputError(format!("schema: expected {expected:?}, found {s:?}"))),
        _ => Ok(()),
    }
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn from_json<'a, T: Deserialize<'a>>(text: &'a str, path: &Path) -> Result<T, InputError> {
    serde_json::from_str(text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

pub fn parse_matrix_file(text: &str, path: &Path) -> Result<MatrixFile, InputError> {
    let raw: RawMatrixFile = from_json(text, path)?;
    check_schema(raw.schema.as_deref(), MATRIX_SCHEMA)?;
    let matrix = parse_grid("matrix", &raw.matrix, raw.n)?;
    let t = match &raw.t {
        None => None,
        Some(cell) => {
            let value = parse_cell(cell, || "t".into())?;
            Some(PrivacyParameter::new(value).map_err(|e| InputError(format!("t: {e}")))?)
        }
    };
    Ok(MatrixFile { t, matrix })
}

pub fn read_matrix_file(path: &Path) -> Result<MatrixFile, InputError> {
    parse_matrix_file(&read(path)?, path)
}

pub fn read_utility_file(path: &Path) -> Result<RMatrix, InputError> {
    let text = read(path)?;
    let raw: RawUtilityFile = from_json(&text, path)?;
    check_schema(raw.schema.as_deref(), UTILITY_SCHEMA)?;
    parse_grid("weights", &raw.weights, raw.n)
}

/// A matrix in the on-disk schema. Extra fields let vertex records carry
/// their provenance while staying readable as plain matrix files.
#[derive(Serialize)]
pub struct MatrixRecord<'a, X: Serialize = ()> {
    pub schema: &'static str,
    pub n: usize,
    pub t: &'a PrivacyParameter,
    pub matrix: &'a RMatrix,
    #[serde(flatten)]
    pub extra: X,
}

impl<'a> MatrixRecord<'a> {
    pub fn new(t: &'a PrivacyParameter, a: &'a Mechanism) -> Self {
        MatrixRecord::with(t, a, ())
    }
}

impl<'a, X: Serialize> MatrixRecord<'a, X> {
    pub fn with(t: &'a PrivacyParameter, a: &'a Mechanism, extra: X) -> Self {
        MatrixRecord {
            schema: MATRIX_SCHEMA,
            n: a.n(),
            t,
            matrix: a.matrix(),
            extra,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<MatrixFile, InputError> {
        parse_matrix_file(text, Path::new("in.json"))
    }

    #[test]
    fn accepts_strings_and_integers() {
        let f = parse(r#"{"n":2,"t":"3/2","matrix":[["1/2","1/2"],[0,1]]}"#).unwrap();
        assert_eq!(f.t.unwrap().value(), &Rational::new(3, 2));
        assert_eq!(f.matrix.get(1, 1), &Rational::one());
    }

    #[test]
    fn reports_cell_position() {
        let err = parse(r#"{"t":"2","matrix":[["1","0"],["1/0","1"]]}"#).unwrap_err();
        assert!(err.0.starts_with("matrix[1][0]:"), "{}", err.0);
    }

    #[test]
    fn rejects_ragged_rows_and_wrong_schema() {
        assert!(parse(r#"{"matrix":[["1","0"],["1"]]}"#).unwrap_err().0.starts_with("matrix[1]"));
        assert!(parse(r#"{"schema":"other","matrix":[["1"]]}"#).unwrap_err().0.starts_with("schema"));
        assert!(parse(r#"{"n":3,"matrix":[["1"]]}"#).is_err());
    }

    #[test]
    fn record_round_trips() {
        let t = PrivacyParameter::new(Rational::from_integer(2)).unwrap();
        let a = Mechanism::uniform(3);
        let text = serde_json::to_string(&MatrixRecord::new(&t, &a)).unwrap();
        let back = parse(&text).unwrap();
        assert_eq!(back.matrix, *a.matrix());
        assert_eq!(back.t, Some(t));
    }
}
