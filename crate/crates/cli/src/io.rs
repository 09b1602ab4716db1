//! File formats: series CSV ingestion, parameter and report JSON with a
//! stable float encoding so saved files round-trip byte-identically.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use nhmsar::gaussian_ar::{GaussianArParams, SetarFit};
use nhmsar::rainfall::RainfallNhmmParams;

use crate::CliError;

/// A parsed series file: strictly increasing index, a value column, and
/// optional covariate (z*) and station (r*) columns.
#[derive(Debug, Clone)]
pub struct SeriesFile {
    pub index: Vec<String>,
    pub value: Vec<f64>,
    pub covariates: Vec<Array1<f64>>,
    pub rainfall: Vec<Array1<f64>>,
    pub covariate_names: Vec<String>,
    pub station_names: Vec<String>,
}

pub fn read_series(path: &Path) -> Result<SeriesFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::parse(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    if cols.len() < 2 || cols[0] != "index" || cols[1] != "value" {
        return Err(CliError::parse(format!(
            "{}: header must start with `index,value`, got `{header}`",
            path.display()
        )));
    }
    let mut z_cols = Vec::new();
    let mut r_cols = Vec::new();
    for (i, c) in cols.iter().enumerate().skip(2) {
        if c.starts_with('z') {
            z_cols.push((i, c.to_string()));
        } else if c.starts_with('r') {
            r_cols.push((i, c.to_string()));
        } else {
            return Err(CliError::parse(format!(
                "{}: unknown column `{c}` (expected z* or r*)",
                path.display()
            )));
        }
    }

    let mut out = SeriesFile {
        index: Vec::new(),
        value: Vec::new(),
        covariates: Vec::new(),
        rainfall: Vec::new(),
        covariate_names: z_cols.iter().map(|(_, n)| n.clone()).collect(),
        station_names: r_cols.iter().map(|(_, n)| n.clone()).collect(),
    };
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if fields.len() != cols.len() {
            return Err(CliError::parse(format!(
                "{}:{}: expected {} fields, got {}",
                path.display(),
                line_no + 1,
                cols.len(),
                fields.len()
            )));
        }
        let parse = |i: usize| -> Result<f64, CliError> {
            let v: f64 = fields[i].parse().map_err(|_| {
                CliError::parse(format!(
                    "{}:{}: `{}` is not a number",
                    path.display(),
                    line_no + 1,
                    fields[i]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::parse(format!(
                    "{}:{}: missing or non-finite value",
                    path.display(),
                    line_no + 1
                )));
            }
            Ok(v)
        };
        out.index.push(fields[0].to_string());
        out.value.push(parse(1)?);
        if !z_cols.is_empty() {
            let z: Result<Vec<f64>, _> = z_cols.iter().map(|(i, _)| parse(*i)).collect();
            out.covariates.push(Array1::from_vec(z?));
        }
        if !r_cols.is_empty() {
            let r: Result<Vec<f64>, _> = r_cols.iter().map(|(i, _)| parse(*i)).collect();
            out.rainfall.push(Array1::from_vec(r?));
        }
    }
    if out.value.is_empty() {
        return Err(CliError::parse(format!("{}: no data rows", path.display())));
    }
    check_strictly_increasing(&out.index, path)?;
    Ok(out)
}

fn check_strictly_increasing(index: &[String], path: &Path) -> Result<(), CliError> {
    let numeric: Option<Vec<f64>> = index.iter().map(|s| s.parse::<f64>().ok()).collect();
    let ok = match &numeric {
        Some(nums) => nums.windows(2).all(|w| w[0] < w[1]),
        None => index.windows(2).all(|w| w[0] < w[1]),
    };
    if !ok {
        return Err(CliError::parse(format!(
            "{}: index column must be strictly increasing",
            path.display()
        )));
    }
    Ok(())
}

/// JSON float formatter: every f64 is written as a 17-significant-digit
/// scientific literal, which parses back to the identical bits, so
/// load-then-save reproduces the file exactly.
struct StableFloats;

impl serde_json::ser::Formatter for StableFloats {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn to_stable_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, StableFloats);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::parse(format!("serialize: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_stable_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let bytes = to_stable_json(value)?;
    fs::write(path, bytes).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Versioned on-disk parameter / fit-report file. Handwritten parameter
/// files may omit the config and fit sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsFile {
    pub schema: String,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<crate::commands::FitConfigJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianArParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setar: Option<SetarFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rainfall: Option<RainfallJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<crate::commands::FitMetaJson>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Nhmsar,
    Msar,
    Setar,
    Rainfall,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Nhmsar => "nhmsar",
            Family::Msar => "msar",
            Family::Setar => "setar",
            Family::Rainfall => "rainfall",
        };
        write!(f, "{s}")
    }
}

/// Flat JSON image of the rainfall parameters (nested arrays for the
/// matrices), kept separate from the in-memory ndarray layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RainfallJson {
    pub num_regimes: usize,
    pub num_stations: usize,
    pub covariate_dim: usize,
    pub q: Vec<Vec<f64>>,
    pub mu: Vec<Vec<Vec<f64>>>,
    pub sigma_mat: Vec<Vec<f64>>,
    pub pi_rain: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta_gamma: Vec<Vec<f64>>,
}

impl From<&RainfallNhmmParams> for RainfallJson {
    fn from(p: &RainfallNhmmParams) -> Self {
        let (m, l, d) = (p.num_regimes, p.num_stations, p.covariate_dim);
        RainfallJson {
            num_regimes: m,
            num_stations: l,
            covariate_dim: d,
            q: (0..m).map(|i| (0..m).map(|j| p.q[(i, j)]).collect()).collect(),
            mu: (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| (0..d).map(|k| p.mu[(i, j, k)]).collect())
                        .collect()
                })
                .collect(),
            sigma_mat: (0..d)
                .map(|i| (0..d).map(|j| p.sigma_mat[(i, j)]).collect())
                .collect(),
            pi_rain: (0..m)
                .map(|i| (0..l).map(|j| p.pi_rain[(i, j)]).collect())
                .collect(),
            alpha: (0..m)
                .map(|i| (0..l).map(|j| p.alpha[(i, j)]).collect())
                .collect(),
            beta_gamma: (0..m)
                .map(|i| (0..l).map(|j| p.beta_gamma[(i, j)]).collect())
                .collect(),
        }
    }
}

impl RainfallJson {
    pub fn to_params(&self) -> Result<RainfallNhmmParams, CliError> {
        let (m, l, d) = (self.num_regimes, self.num_stations, self.covariate_dim);
        let flat2 = |v: &Vec<Vec<f64>>, rows: usize, cols: usize, what: &str| {
            let data: Vec<f64> = v.iter().flatten().cloned().collect();
            Array2::from_shape_vec((rows, cols), data)
                .map_err(|_| CliError::parse(format!("{what}: wrong shape")))
        };
        let mu_data: Vec<f64> = self.mu.iter().flatten().flatten().cloned().collect();
        let mu = Array3::from_shape_vec((m, m, d), mu_data)
            .map_err(|_| CliError::parse("mu: wrong shape".to_string()))?;
        Ok(RainfallNhmmParams {
            num_regimes: m,
            num_stations: l,
            covariate_dim: d,
            q: flat2(&self.q, m, m, "q")?,
            mu,
            sigma_mat: flat2(&self.sigma_mat, d, d, "sigma_mat")?,
            pi_rain: flat2(&self.pi_rain, m, l, "pi_rain")?,
            alpha: flat2(&self.alpha, m, l, "alpha")?,
            beta_gamma: flat2(&self.beta_gamma, m, l, "beta_gamma")?,
        })
    }
}

pub const SCHEMA: &str = "nhmsar/1";

pub fn read_params(path: &Path) -> Result<ParamsFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::missing_params(format!("{}: {e}", path.display()))
    })?;
    let file: ParamsFile = serde_json::from_str(&text)
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    if file.schema != SCHEMA {
        return Err(CliError::parse(format!(
            "{}: unsupported schema `{}` (expected `{SCHEMA}`)",
            path.display(),
            file.schema
        )));
    }
    Ok(file)
}

/// Write a plot-ready CSV of smoothed regime probabilities.
pub fn write_probs_csv(
    path: &Path,
    index: &[String],
    gamma: &Array2<f64>,
) -> Result<(), CliError> {
    let mut f = fs::File::create(path)
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let m = gamma.ncols();
    let header: Vec<String> = (0..m).map(|x| format!("p_regime{x}")).collect();
    writeln!(f, "index,{}", header.join(",")).map_err(io_err)?;
    for (k, idx) in index.iter().enumerate() {
        let row: Vec<String> = (0..m).map(|x| format!("{:.17e}", gamma[(k, x)])).collect();
        writeln!(f, "{idx},{}", row.join(",")).map_err(io_err)?;
    }
    Ok(())
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::parse(format!("write: {e}"))
}
