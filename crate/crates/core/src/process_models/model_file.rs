//! TOML model definitions.
//!
//! ```toml
//! name = "spatially IID AR(1)"
//! nt = 2
//! mean = [1.0, 0.0]                     # complex entries: 0.5 or [re, im]
//! ar_coefficients = [                   # A_1, A_2, ... (optional)
//!   [[0.5, 0.0], [0.0, 0.5]],
//! ]
//! innovation_covariance = [[0.75, 0.0], [0.0, 0.75]]
//!
//! [innovation_mixture]                  # optional: non-Gaussian innovations
//! weights = [0.5, 0.5]
//! scales = [0.5, 1.5]
//! ```

use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;
use toml::Spanned;

use super::{FadingProcess, GaussianVectorProcess, GeneralFadingProcess, MixtureInnovationProcess};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(&self) -> Complex64 {
        match *self {
            Entry::Real(re) => Complex64::new(re, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMixture {
    weights: Vec<f64>,
    scales: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default)]
    name: Option<String>,
    nt: Spanned<i64>,
    mean: Spanned<Vec<Entry>>,
    #[serde(default)]
    ar_coefficients: Option<Spanned<Vec<Vec<Vec<Entry>>>>>,
    innovation_covariance: Spanned<Vec<Vec<Entry>>>,
    #[serde(default)]
    innovation_mixture: Option<Spanned<RawMixture>>,
}

/// A validated model file.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub name: Option<String>,
    /// Second-order (Gaussian) description; exact for Gaussian models.
    pub gaussian: GaussianVectorProcess,
    /// The law used by bound evaluators.
    pub process: FadingProcess,
}

struct Locator<'a> {
    path: &'a str,
    text: &'a str,
}

impl Locator<'_> {
    fn error(&self, span: Option<Range<usize>>, message: impl Into<String>) -> Error {
        let (line, column) = match span {
            Some(r) => line_column(self.text, r.start),
            None => (1, 1),
        };
        Error::ModelFile {
            path: self.path.to_string(),
            line,
            column,
            message: message.into(),
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}

fn matrix(
    rows: &[Vec<Entry>],
    nt: usize,
    what: &str,
    span: Range<usize>,
    loc: &Locator<'_>,
) -> Result<CMatrix> {
    if rows.len() != nt || rows.iter().any(|r| r.len() != nt) {
        return Err(loc.error(Some(span), format!("{what} must be a {nt}x{nt} matrix")));
    }
    Ok(CMatrix::from_fn(nt, nt, |i, j| rows[i][j].value()))
}

/// Parses and validates a model definition. `path` is only used in error messages.
pub fn parse_model(text: &str, path: &str) -> Result<ModelSpec> {
    let loc = Locator { path, text };
    let raw: RawModel = toml::from_str(text).map_err(|e| {
        let message = e.message().replace(
            "data did not match any variant of untagged enum Entry",
            "expected a number or a [re, im] pair",
        );
        loc.error(e.span(), message)
    })?;

    let nt_value = *raw.nt.get_ref();
    if !(1..=64).contains(&nt_value) {
        return Err(loc.error(Some(raw.nt.span()), "nt must be an integer in 1..=64"));
    }
    let nt = nt_value as usize;

    if raw.mean.get_ref().len() != nt {
        return Err(loc.error(
            Some(raw.mean.span()),
            format!("mean must have nt = {nt} entries, found {}", raw.mean.get_ref().len()),
        ));
    }
    let mean = CVector::from_iterator(nt, raw.mean.get_ref().iter().map(Entry::value));

    let mut ar = Vec::new();
    if let Some(coeffs) = &raw.ar_coefficients {
        for (i, m) in coeffs.get_ref().iter().enumerate() {
            ar.push(matrix(m, nt, &format!("ar_coefficients[{i}]"), coeffs.span(), &loc)?);
        }
    }
    let q = matrix(
        raw.innovation_covariance.get_ref(),
        nt,
        "innovation_covariance",
        raw.innovation_covariance.span(),
        &loc,
    )?;

    let gaussian = GaussianVectorProcess::new(mean, ar, q).map_err(|e| {
        let span = match &e {
            Error::Model(m) if m.contains("stationary") && raw.ar_coefficients.is_some() => {
                raw.ar_coefficients.as_ref().map(|s| s.span())
            }
            _ => Some(raw.innovation_covariance.span()),
        };
        loc.error(span, e.to_string())
    })?;

    let process = match &raw.innovation_mixture {
        None => FadingProcess::Gaussian(gaussian.clone()),
        Some(mix) => {
            let m = mix.get_ref();
            let sampler = MixtureInnovationProcess::new(gaussian.clone(), &m.weights, &m.scales)
                .map_err(|e| loc.error(Some(mix.span()), e.to_string()))?;
            FadingProcess::General(GeneralFadingProcess::regular(Arc::new(sampler)))
        }
    };

    Ok(ModelSpec {
        name: raw.name,
        gaussian,
        process,
    })
}

/// Reads and parses a model file.
pub fn load_model_file(path: &Path) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::ModelFile {
        path: path.display().to_string(),
        line: 0,
        column: 0,
        message: format!("cannot read model file: {e}"),
    })?;
    parse_model(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const IID: &str = r#"
name = "iid ar1"
nt = 2
mean = [1.0, 0.0]
ar_coefficients = [[[0.5, 0.0], [0.0, 0.5]]]
innovation_covariance = [[0.75, 0.0], [0.0, 0.75]]
"#;

    #[test]
    fn parses_real_and_complex_entries() {
        let spec = parse_model(IID, "iid.toml").unwrap();
        assert_eq!(spec.gaussian.nt(), 2);
        assert!((spec.gaussian.stationary_covariance()[(0, 0)].re - 1.0).abs() < 1e-13);
        assert!(matches!(spec.process, FadingProcess::Gaussian(_)));

        let text = r#"
nt = 2
mean = [[1.0, 1.0], 0]
innovation_covariance = [[[2, 0], [0.5, 0.5]], [[0.5, -0.5], [1, 0]]]
"#;
        let spec = parse_model(text, "c.toml").unwrap();
        assert_eq!(spec.gaussian.mean()[0], Complex64::new(1.0, 1.0));
        assert_eq!(spec.gaussian.innovation_covariance()[(0, 1)], Complex64::new(0.5, 0.5));
    }

    #[test]
    fn mixture_yields_general_process() {
        let text = format!("{IID}\n[innovation_mixture]\nweights = [0.5, 0.5]\nscales = [0.5, 1.5]\n");
        let spec = parse_model(&text, "m.toml").unwrap();
        assert!(matches!(spec.process, FadingProcess::General(_)));
    }

    fn location(err: Error) -> (usize, usize, String) {
        match err {
            Error::ModelFile { line, column, message, .. } => (line, column, message),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn reports_positions_of_shape_errors() {
        let text = "nt = 2\nmean = [1.0]\ninnovation_covariance = [[1, 0], [0, 1]]\n";
        let (line, col, msg) = location(parse_model(text, "bad.toml").unwrap_err());
        assert_eq!((line, col), (2, 8));
        assert!(msg.contains("mean"));
    }

    #[test]
    fn reports_positions_of_syntax_errors() {
        let text = "nt = 2\nmean = [1.0, 0.0\ninnovation_covariance = [[1, 0], [0, 1]]\n";
        let (line, _, _) = location(parse_model(text, "bad.toml").unwrap_err());
        assert!(line >= 2);
    }

    #[test]
    fn rejects_unknown_fields_and_nonstationary() {
        let text = format!("{IID}\nextra = 1\n");
        assert!(parse_model(&text, "x.toml").is_err());
        let text = "nt = 1\nmean = [0]\nar_coefficients = [[[1.2]]]\ninnovation_covariance = [[1]]\n";
        let (line, _, msg) = location(parse_model(text, "ns.toml").unwrap_err());
        assert_eq!(line, 3);
        assert!(msg.contains("stationary"));
        let text = "nt = 2\nmean = [0, 0]\ninnovation_covariance = [[1, 2], [2, 1]]\n";
        let (line, _, msg) = location(parse_model(text, "pd.toml").unwrap_err());
        assert_eq!(line, 3);
        assert!(msg.contains("positive definite"));
    }

    #[test]
    fn line_column_mapping() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }
}
