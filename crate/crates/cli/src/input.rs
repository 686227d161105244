use std::fmt;
use std::path::Path;

use tvhom::tv::{InstanceFile, Pmf, ProductInstance};

/// A malformed instance file, located by line/column for syntax errors and
/// by field for semantic ones.
#[derive(Debug)]
pub struct InputParseError {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for InputParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path)?;
        if let (Some(line), Some(col)) = (self.line, self.column) {
            write!(f, ":{line}:{col}")?;
        }
        if let Some(field) = &self.field {
            write!(f, ": field {field}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for InputParseError {}

impl InputParseError {
    fn new(path: &Path, message: impl Into<String>) -> Self {
        Self {
            path: path.display().to_string(),
            line: None,
            column: None,
            field: None,
            message: message.into(),
        }
    }
}

pub fn read_instance(path: &Path, delta: Option<f64>) -> Result<ProductInstance, InputParseError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| InputParseError::new(path, e.to_string()))?;
    parse_instance(path, &text, delta)
}

pub fn parse_instance(
    path: &Path,
    text: &str,
    delta: Option<f64>,
) -> Result<ProductInstance, InputParseError> {
    let mut file: InstanceFile = serde_json::from_str(text).map_err(|e| InputParseError {
        line: Some(e.line()),
        column: Some(e.column()),
        ..InputParseError::new(path, e.to_string())
    })?;
    if let Some(delta) = delta {
        for (name, rows) in [("P", &mut file.p), ("Q", &mut file.q)] {
            for (i, row) in rows.iter_mut().enumerate() {
                let smoothed = Pmf::smooth(row, delta).map_err(|e| InputParseError {
                    field: Some(format!("{name}[{i}]")),
                    ..InputParseError::new(path, e.to_string())
                })?;
                *row = smoothed.probs().to_vec();
            }
        }
    }
    // Shape and pmf errors already name their field.
    ProductInstance::try_from(file).map_err(|e| InputParseError::new(path, e.to_string()))
}
