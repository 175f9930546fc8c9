//! JSON and CSV artifacts.
//!
//! Floating-point numbers are written with 17 significant digits
//! (`{:.16e}`), enough to round-trip every `f64` bit-exactly.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::asymptotics::{SweepFlags, SweepReport, SweepRow};
use crate::error::{Result, SpsError};
use crate::functionals::{EnergyBreakdown, ProblemParams};
use crate::radial::{fmt17, RadialFunction};
use crate::solver::{GridSpec, Residuals, Solution};

pub const VERSION: &str = concat!("sps-lab ", env!("CARGO_PKG_VERSION"));

struct SigDigits;

impl Formatter for SigDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt17(value).as_bytes())
    }
}

/// Serializes `value` as compact JSON with 17-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits);
    value.serialize(&mut ser).expect("serializable document");
    out.push(b'\n');
    String::from_utf8(out).expect("utf-8 json")
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| SpsError::Parse {
        location: format!("{what}: line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub params: ProblemParams,
    pub grid: GridSpec,
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    pub breakdown: EnergyBreakdown,
    pub m: f64,
    pub residuals: Residuals,
    pub iters: usize,
    pub converged: bool,
    #[serde(default)]
    pub min_m_functional: Option<f64>,
}

impl SolutionDoc {
    pub fn from_solution(sol: &Solution, config: Option<serde_json::Value>) -> Self {
        let g = sol.grid();
        SolutionDoc {
            version: VERSION.to_string(),
            config,
            params: sol.params,
            grid: GridSpec {
                n: g.n(),
                r_max: g.r_max(),
                stretch: g.stretch(),
            },
            u: sol.u.values().to_vec(),
            phi: sol.phi.values().to_vec(),
            breakdown: sol.bd,
            m: sol.m,
            residuals: sol.residuals,
            iters: sol.iters,
            converged: sol.converged,
            min_m_functional: Some(sol.min_m_functional),
        }
    }

    pub fn into_solution(self) -> Result<Solution> {
        self.params.validate()?;
        let grid = self.grid.build()?;
        let u = RadialFunction::new(grid.clone(), self.u)?;
        let phi = RadialFunction::new(grid, self.phi)?;
        let bd = EnergyBreakdown {
            p: self.params.p,
            ..self.breakdown
        };
        Ok(Solution {
            params: self.params,
            u,
            phi,
            bd,
            m: self.m,
            residuals: self.residuals,
            iters: self.iters,
            converged: self.converged,
            min_m_functional: self.min_m_functional.unwrap_or(f64::NAN),
        })
    }
}

pub fn solution_to_json(sol: &Solution, config: Option<serde_json::Value>) -> String {
    to_json(&SolutionDoc::from_solution(sol, config))
}

pub fn solution_from_json(text: &str) -> Result<Solution> {
    parse_json::<SolutionDoc>(text, "solution")?.into_solution()
}

pub fn read_solution(path: &Path) -> Result<Solution> {
    let text = std::fs::read_to_string(path)?;
    parse_json::<SolutionDoc>(&text, &path.display().to_string())?.into_solution()
}

/// Loads `(r, u)` samples from a solution JSON (by extension) or an
/// `r,value` CSV on any increasing mesh.
pub fn read_profile_file(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let sol = parse_json::<SolutionDoc>(&text, &path.display().to_string())?.into_solution()?;
        return Ok((sol.grid().nodes().to_vec(), sol.u.into_values()));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',').map(|c| c.trim().parse::<f64>());
        match (cols.next(), cols.next()) {
            (Some(Ok(r)), Some(Ok(v))) => {
                if x.last().is_some_and(|&last| r <= last) {
                    return Err(SpsError::Parse {
                        location: format!("{}: line {}", path.display(), ln + 1),
                        message: "radii must increase".into(),
                    });
                }
                x.push(r);
                y.push(v);
            }
            _ => {
                return Err(SpsError::Parse {
                    location: format!("{}: line {}", path.display(), ln + 1),
                    message: "expected two numeric columns".into(),
                })
            }
        }
    }
    if x.len() < 2 {
        return Err(SpsError::Parse {
            location: path.display().to_string(),
            message: "profile needs at least two rows".into(),
        });
    }
    Ok((x, y))
}

/// Column order of the sweep CSV.
pub const SWEEP_HEADER: &str = "eps,lambda,m_eps,gap,eps_times_B,t_proj,e_dist,decay_rate";

/// One parsed line of a sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCsvRow {
    pub eps: f64,
    pub lambda: Option<f64>,
    pub m_eps: f64,
    pub gap: f64,
    pub eps_times_b: f64,
    pub t_proj: f64,
    pub e_dist: f64,
    pub decay_rate: f64,
}

fn csv_num(x: f64) -> String {
    if x.is_finite() {
        fmt17(x)
    } else {
        "nan".into()
    }
}

pub fn sweep_to_csv(report: &SweepReport) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in &report.rows {
        let cols = [
            csv_num(r.eps),
            r.lambda.map(csv_num).unwrap_or_default(),
            csv_num(r.m_eps),
            csv_num(r.gap),
            csv_num(r.eps_times_b),
            csv_num(r.t_proj),
            csv_num(r.e_dist),
            csv_num(r.decay_rate),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_sweep_csv(text: &str, what: &str) -> Result<Vec<SweepCsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SWEEP_HEADER => {}
        _ => {
            return Err(SpsError::Parse {
                location: format!("{what}: line 1"),
                message: format!("expected header `{SWEEP_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| SpsError::Parse {
            location: format!("{what}: line {}", ln + 1),
            message,
        };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 8 {
            return Err(bad(format!("expected 8 columns, found {}", cols.len())));
        }
        let num = |k: usize| -> Result<f64> {
            cols[k]
                .parse::<f64>()
                .map_err(|_| bad(format!("column {} is not a number: `{}`", k + 1, cols[k])))
        };
        rows.push(SweepCsvRow {
            eps: num(0)?,
            lambda: if cols[1].is_empty() { None } else { Some(num(1)?) },
            m_eps: num(2)?,
            gap: num(3)?,
            eps_times_b: num(4)?,
            t_proj: num(5)?,
            e_dist: num(6)?,
            decay_rate: num(7)?,
        });
    }
    if rows.is_empty() {
        return Err(SpsError::Parse {
            location: what.to_string(),
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

/// Summary of the zero-mass reference solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceDoc {
    pub m: f64,
    pub breakdown: EnergyBreakdown,
    pub residuals: Residuals,
    pub iters: usize,
    pub converged: bool,
}

/// Companion document of a sweep CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SweepDoc<'a> {
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub p: f64,
    pub m_inf: f64,
    pub slope: Option<f64>,
    pub eta: f64,
    pub partial: bool,
    pub pass: bool,
    pub flags: SweepFlags,
    pub reference: ReferenceDoc,
    pub rows: &'a [SweepRow],
}

pub fn sweep_to_json(report: &SweepReport, config: Option<serde_json::Value>) -> String {
    let r = &report.reference;
    to_json(&SweepDoc {
        version: VERSION,
        config,
        p: report.p,
        m_inf: report.m_inf,
        slope: report.slope,
        eta: report.eta,
        partial: report.partial,
        pass: report.flags.all(),
        flags: report.flags,
        reference: ReferenceDoc {
            m: r.m,
            breakdown: r.bd,
            residuals: r.residuals,
            iters: r.iters,
            converged: r.converged,
        },
        rows: &report.rows,
    })
}
