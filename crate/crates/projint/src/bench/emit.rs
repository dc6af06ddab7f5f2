//! Deterministic CSV/JSON emission of experiment results.

use crate::bench::experiment::ExperimentResult;
use crate::error::Error;
use crate::Result;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
}

impl std::str::FromStr for EmitFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(EmitFormat::Csv),
            "json" => Ok(EmitFormat::Json),
            other => Err(Error::Config(format!("unknown format '{other}' (csv|json)"))),
        }
    }
}

/// 17 significant digits: enough to round-trip any f64.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a result to a string. CSV columns are exactly
/// `scheme,abscissa,error,dev_max,n_macro,micro_evals`, one row per grid
/// point per scheme, fits and exclusions appended as trailing `#` comment
/// rows; diverged points leave the error field empty. Output is bytewise
/// deterministic for identical inputs.
pub fn render(result: &ExperimentResult, format: EmitFormat) -> Result<String> {
    match format {
        EmitFormat::Json => {
            let mut s = serde_json::to_string_pretty(result)?;
            s.push('\n');
            Ok(s)
        }
        EmitFormat::Csv => {
            let mut out = String::from("scheme,abscissa,error,dev_max,n_macro,micro_evals\n");
            for series in &result.series {
                for p in &series.points {
                    let err = p.error.map(num).unwrap_or_default();
                    let dev = if p.dev_max.is_finite() {
                        num(p.dev_max)
                    } else {
                        String::new()
                    };
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        series.scheme,
                        num(p.abscissa),
                        err,
                        dev,
                        p.n_macro,
                        p.micro_evals
                    ));
                }
            }
            for series in &result.series {
                if let Some(fit) = &series.fit {
                    out.push_str(&format!(
                        "# {} fit slope={} intercept={} r2={} points={}\n",
                        series.scheme,
                        num(fit.slope),
                        num(fit.intercept),
                        num(fit.r2),
                        fit.used
                            .iter()
                            .map(|i| i.to_string())
                            .collect::<Vec<_>>()
                            .join(";")
                    ));
                    for (idx, reason) in &fit.excluded {
                        out.push_str(&format!("# {} excluded idx={idx} reason={reason}\n", series.scheme));
                    }
                }
                if let Some(p) = &series.plateau {
                    out.push_str(&format!(
                        "# {} plateau level={} max_local_slope={} points={}\n",
                        series.scheme,
                        num(p.level),
                        num(p.max_local_slope),
                        p.points
                            .iter()
                            .map(|i| i.to_string())
                            .collect::<Vec<_>>()
                            .join(";")
                    ));
                }
                for p in &series.points {
                    if let Some(msg) = &p.diverged {
                        out.push_str(&format!(
                            "# {} diverged abscissa={} {}\n",
                            series.scheme,
                            num(p.abscissa),
                            msg
                        ));
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Writes a rendered result to `path`.
pub fn emit(result: &ExperimentResult, format: EmitFormat, path: &Path) -> Result<()> {
    let s = render(result, format)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(s.as_bytes())?;
    Ok(())
}
