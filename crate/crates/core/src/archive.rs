//! On-disk fit archive: one directory of CSV tables plus `metadata.toml`.
//!
//! Floats are written in Rust's shortest round-trip form, so reading an
//! archive and writing it again reproduces every file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::FitConfig;
use crate::inference::LincombSummary;
use crate::spde::Lattice;
use crate::{Error, Result};

pub const METADATA_FILE: &str = "metadata.toml";
pub const FORMAT_VERSION: u32 = 1;
const Z: f64 = 1.96;

/// One posterior summary row; the 95% limits are implied by `mean` and `sd`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: String,
    pub mean: f64,
    pub sd: f64,
}

impl SummaryRow {
    pub fn new(key: impl Into<String>, mean: f64, sd: f64) -> Self {
        Self {
            key: key.into(),
            mean,
            sd,
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - Z * self.sd
    }

    pub fn upper(&self) -> f64 {
        self.mean + Z * self.sd
    }
}

/// A keyed table of posterior summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    /// header of the key column
    pub key: String,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn new(key: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            rows: Vec::new(),
        }
    }

    /// Rows keyed `1..=n` from linear-combination summaries.
    pub fn numbered(key: impl Into<String>, values: &[LincombSummary]) -> Self {
        Self {
            key: key.into(),
            rows: values
                .iter()
                .enumerate()
                .map(|(i, v)| SummaryRow::new((i + 1).to_string(), v.mean, v.sd))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn means(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([self.key.as_str(), "mean", "sd", "q2.5", "q97.5"])?;
        for r in &self.rows {
            w.write_record([
                r.key.clone(),
                r.mean.to_string(),
                r.sd.to_string(),
                r.lower().to_string(),
                r.upper().to_string(),
            ])?;
        }
        finish(w)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers()?.clone();
        let expected = ["mean", "sd", "q2.5", "q97.5"];
        if headers.len() != 5 || headers.iter().skip(1).ne(expected) {
            return Err(Error::Parse(format!("unexpected summary header {headers:?}")));
        }
        let mut table = Self::new(&headers[0]);
        for record in r.records() {
            let record = record?;
            table.rows.push(SummaryRow::new(&record[0], number(&record[1])?, number(&record[2])?));
        }
        Ok(table)
    }
}

fn number(field: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Parse(format!("`{field}` is not a number")))
}

fn optional(field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        number(field).map(Some)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Posterior mean and sd of the spatial effect on a regular lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialLattice {
    pub mean: Lattice,
    pub sd: Lattice,
}

impl SpatialLattice {
    fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "y", "mean", "sd"])?;
        let show = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for j in 0..self.mean.ny {
            for i in 0..self.mean.nx {
                let [x, y] = self.mean.cell_centre(i, j);
                w.write_record([x.to_string(), y.to_string(), show(self.mean.get(i, j)), show(self.sd.get(i, j))])?;
            }
        }
        finish(w)
    }

    fn from_csv(text: &str, grid: &LatticeGrid) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let (mut mean, mut sd) = (Vec::new(), Vec::new());
        for record in r.records() {
            let record = record?;
            if record.len() != 4 {
                return Err(Error::Parse("spatial lattice rows need x, y, mean, sd".into()));
            }
            mean.push(optional(&record[2])?);
            sd.push(optional(&record[3])?);
        }
        if mean.len() != grid.nx * grid.ny {
            return Err(Error::Parse(format!(
                "spatial lattice has {} cells, metadata says {}x{}",
                mean.len(),
                grid.nx,
                grid.ny
            )));
        }
        let lattice = |values| Lattice {
            nx: grid.nx,
            ny: grid.ny,
            lower: grid.lower,
            upper: grid.upper,
            values,
        };
        Ok(Self {
            mean: lattice(mean),
            sd: lattice(sd),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeGrid {
    pub nx: usize,
    pub ny: usize,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub extra_diag: f64,
    pub evaluations: usize,
    pub objective: f64,
    pub converged: bool,
    pub not_positive_definite: usize,
}

/// Scalar results and the configuration echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMetadata {
    pub format_version: u32,
    pub converged: bool,
    pub n_obs: usize,
    pub dropped_rows: usize,
    pub latent_dim: usize,
    pub log_marginal_likelihood: f64,
    pub log_posterior: f64,
    /// site ids in the order of the per-site tables
    pub sites: Vec<i64>,
    pub site_tables: bool,
    pub stages: Vec<StageSummary>,
    pub lattice: Option<LatticeGrid>,
    pub config: FitConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitArchive {
    pub metadata: ArchiveMetadata,
    pub hyperparameters: SummaryTable,
    /// every latent coordinate, keyed `component:index`
    pub latent: SummaryTable,
    pub trend_all: SummaryTable,
    pub trend_sites: Vec<SummaryTable>,
    pub dow_all: SummaryTable,
    pub dow_sites: Vec<SummaryTable>,
    pub annual: SummaryTable,
    pub fitted: SummaryTable,
    pub spatial: Option<SpatialLattice>,
}

fn site_file(prefix: &str, site: i64) -> String {
    format!("{prefix}_site_{site}.csv")
}

impl FitArchive {
    /// File names and contents, in a fixed order.
    pub fn files(&self) -> Result<Vec<(String, String)>> {
        let mut meta = toml::to_string(&self.metadata).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if !meta.ends_with('\n') {
            meta.push('\n');
        }
        let mut files = vec![
            (METADATA_FILE.to_string(), meta),
            ("hyperparameters.csv".into(), self.hyperparameters.to_csv()?),
            ("latent.csv".into(), self.latent.to_csv()?),
            ("trend_all.csv".into(), self.trend_all.to_csv()?),
            ("dow_all.csv".into(), self.dow_all.to_csv()?),
            ("annual.csv".into(), self.annual.to_csv()?),
            ("fitted.csv".into(), self.fitted.to_csv()?),
        ];
        if self.metadata.site_tables {
            let sites = &self.metadata.sites;
            if sites.len() != self.trend_sites.len() || sites.len() != self.dow_sites.len() {
                return Err(Error::InvalidSpec("per-site tables do not match the site list".into()));
            }
            for ((site, trend), dow) in sites.iter().zip(&self.trend_sites).zip(&self.dow_sites) {
                files.push((site_file("trend", *site), trend.to_csv()?));
                files.push((site_file("dow", *site), dow.to_csv()?));
            }
        }
        if let Some(spatial) = &self.spatial {
            files.push(("spatial_lattice.csv".into(), spatial.to_csv()?));
        }
        Ok(files)
    }

    /// Writes the archive into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        self.files()?
            .into_iter()
            .map(|(name, text)| {
                let path = dir.join(name);
                fs::write(&path, text)?;
                Ok(path)
            })
            .collect()
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = |name: &str| -> Result<String> {
            fs::read_to_string(dir.join(name)).map_err(|e| {
                Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.join(name).display())))
            })
        };
        let table = |name: &str| SummaryTable::from_csv(&text(name)?);
        let metadata: ArchiveMetadata =
            toml::from_str(&text(METADATA_FILE)?).map_err(|e| Error::Parse(e.to_string()))?;
        if metadata.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "archive format {} is not supported",
                metadata.format_version
            )));
        }
        let (mut trend_sites, mut dow_sites) = (Vec::new(), Vec::new());
        if metadata.site_tables {
            for &site in &metadata.sites {
                trend_sites.push(table(&site_file("trend", site))?);
                dow_sites.push(table(&site_file("dow", site))?);
            }
        }
        let spatial = match &metadata.lattice {
            Some(grid) => Some(SpatialLattice::from_csv(&text("spatial_lattice.csv")?, grid)?),
            None => None,
        };
        Ok(Self {
            hyperparameters: table("hyperparameters.csv")?,
            latent: table("latent.csv")?,
            trend_all: table("trend_all.csv")?,
            dow_all: table("dow_all.csv")?,
            annual: table("annual.csv")?,
            fitted: table("fitted.csv")?,
            trend_sites,
            dow_sites,
            spatial,
            metadata,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_csv_round_trip() {
        let mut t = SummaryTable::new("hrofweek");
        t.rows.push(SummaryRow::new("1", 0.1 + 0.2, 1.0 / 3.0));
        t.rows.push(SummaryRow::new("2", -0.0, 0.0));
        let text = t.to_csv().unwrap();
        assert!(text.starts_with("hrofweek,mean,sd,q2.5,q97.5\n1,0.30000000000000004,"));
        let back = SummaryTable::from_csv(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_csv().unwrap(), text);
    }

    #[test]
    fn quantiles_follow_mean_and_sd() {
        let r = SummaryRow::new("a", 2.0, 0.5);
        assert!((r.lower() - 1.02).abs() < 1e-12);
        assert!((r.upper() - 2.98).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(SummaryTable::from_csv("k,mean,sd\n1,2,3\n").is_err());
    }
}
