//! Synthetic split-panel data with a known truth.

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::{hour_of_week, Observation, ObservationTable, DAYS_PER_YEAR};
use crate::penalty::{HOURS_PER_DAY, HOURS_PER_WEEK};
use crate::sparse::cholesky;
use crate::spde::{build_mesh, fem_matrices, kappa_for_range, spde_precision};
use crate::{Error, Result};

/// One monitoring window at one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteWindow {
    pub site: i64,
    pub location: [f64; 2],
    /// first day number (1-based; days past 365 wrap into the next year)
    pub start_day: u32,
    pub days: u32,
    /// co-located instruments recording the same hours
    #[serde(default = "one")]
    pub series: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub intercept: f64,
    /// amplitude of the first daily harmonic; the second has half of it
    pub daily_amplitude: f64,
    /// drop on Saturdays and Sundays
    pub weekend_dip: f64,
    pub annual_amplitude: f64,
    pub spatial_range: f64,
    pub spatial_sd: f64,
    /// mesh resolution of the simulated field
    pub spatial_max_edge: f64,
    pub noise_sd: f64,
    pub windows: Vec<SiteWindow>,
}

/// Sites on a golden-angle spiral of radius `radius` around `centre`.
fn spiral(n: usize, centre: [f64; 2], radius: f64) -> Vec<[f64; 2]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let r = radius * ((i as f64 + 0.5) / n as f64).sqrt();
            let t = golden * i as f64;
            // rounded so the coordinates survive a text round trip unchanged
            let round = |v: f64| (v * 1e6).round() / 1e6;
            [round(centre[0] + r * t.cos()), round(centre[1] + r * t.sin())]
        })
        .collect()
}

/// Ten sequential two-week campaigns with three co-located instruments each
/// plus three long-running stations.
pub fn split_panel_windows() -> Vec<SiteWindow> {
    let locations = spiral(13, [0.05, 0.05], 0.02);
    let short = (0..10).map(|i| SiteWindow {
        site: i as i64 + 1,
        location: locations[i],
        start_day: 1 + 36 * i as u32,
        days: 14,
        series: 3,
    });
    let long = (0..3).map(|i| SiteWindow {
        site: 11 + i as i64,
        location: locations[10 + i],
        start_day: 1 + 63 * i as u32,
        days: 240,
        series: 1,
    });
    short.chain(long).collect()
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            intercept: 8.8,
            daily_amplitude: 0.4,
            weekend_dip: 0.2,
            annual_amplitude: 0.15,
            spatial_range: 0.005,
            spatial_sd: 0.2,
            spatial_max_edge: 0.0025,
            noise_sd: 0.5,
            windows: split_panel_windows(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.windows.is_empty() {
            return bad("at least one site window is required");
        }
        if self.windows.iter().any(|w| w.days == 0 || w.series == 0 || w.start_day == 0) {
            return bad("windows need start_day >= 1, days >= 1 and series >= 1");
        }
        for w in &self.windows {
            let clash = self
                .windows
                .iter()
                .any(|o| o.site == w.site && o.location != w.location);
            if clash {
                return bad("a site id must keep one location");
            }
        }
        if !(self.noise_sd >= 0.0) || !(self.spatial_sd >= 0.0) {
            return bad("standard deviations must be non-negative");
        }
        if self.spatial_sd > 0.0 && !(self.spatial_range > 0.0 && self.spatial_max_edge > 0.0) {
            return bad("spatial_range and spatial_max_edge must be positive");
        }
        let values = [self.intercept, self.daily_amplitude, self.weekend_dip, self.annual_amplitude];
        if values.iter().any(|v| !v.is_finite()) {
            return bad("trend parameters must be finite");
        }
        Ok(())
    }

    /// Number of rows `simulate` produces.
    pub fn row_count(&self) -> usize {
        self.windows
            .iter()
            .map(|w| (w.days * w.series) as usize * HOURS_PER_DAY)
            .sum()
    }
}

/// Ground truth of a simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub intercept: f64,
    /// centered hour-of-week trend shared by all sites
    pub trend: Vec<f64>,
    /// annual effect on days 1..=365
    pub annual: Vec<f64>,
    /// spatial effect at every site, `(site, value)`
    pub spatial: Vec<(i64, f64)>,
    pub noise_sd: f64,
}

impl Truth {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Hour-of-week trend: two daily harmonics plus a weekend dip, centered.
pub fn true_trend(config: &SimConfig) -> Vec<f64> {
    let raw: Vec<f64> = (1..=HOURS_PER_WEEK as u32)
        .map(|h| {
            let day = (h - 1) / HOURS_PER_DAY as u32 + 1;
            let t = 2.0 * PI * ((h - 1) % HOURS_PER_DAY as u32) as f64 / HOURS_PER_DAY as f64;
            let daily = config.daily_amplitude * ((t - 0.5 * PI).sin() + 0.5 * (2.0 * t).sin());
            let weekend = if day == 1 || day == 7 { -config.weekend_dip } else { 0.0 };
            daily + weekend
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.into_iter().map(|v| v - mean).collect()
}

/// Annual effect with period equal to the cyclic basis domain `[1, 365]`.
pub fn true_annual(config: &SimConfig) -> Vec<f64> {
    (1..=DAYS_PER_YEAR)
        .map(|d| config.annual_amplitude * (2.0 * PI * (d - 1) as f64 / (DAYS_PER_YEAR - 1) as f64).sin())
        .collect()
}

/// Day of year for the running day counter `day` (1-based).
fn dayno(day: u32) -> u32 {
    (day - 1) % DAYS_PER_YEAR + 1
}

/// Sunday = 1 for day 1.
fn dayofweek(day: u32) -> u32 {
    (day - 1) % 7 + 1
}

/// Draws a data set. The same config and seed give the same rows.
pub fn simulate(config: &SimConfig, seed: u64) -> Result<(ObservationTable, Truth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trend = true_trend(config);
    let annual = true_annual(config);

    let mut sites: Vec<(i64, [f64; 2])> = config.windows.iter().map(|w| (w.site, w.location)).collect();
    sites.sort_by_key(|s| s.0);
    sites.dedup_by_key(|s| s.0);
    let spatial: Vec<(i64, f64)> = if config.spatial_sd > 0.0 {
        let locations: Vec<[f64; 2]> = sites.iter().map(|s| s.1).collect();
        let mesh = build_mesh(&locations, config.spatial_max_edge)?;
        let op = fem_matrices(&mesh);
        let kappa = kappa_for_range(config.spatial_range, op.alpha());
        let tau = op
            .tau_for_variance(kappa, config.spatial_sd.powi(2))
            .expect("default alpha is 2");
        let factor = cholesky(&spde_precision(&op, kappa, tau)?)?;
        let z: Vec<f64> = (0..mesh.n_vertices()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let field = factor.sample_transform(&z)?;
        sites
            .iter()
            .zip(mesh.loc_index())
            .map(|(s, &v)| (s.0, field[v]))
            .collect()
    } else {
        sites.iter().map(|s| (s.0, 0.0)).collect()
    };

    let mut rows = Vec::with_capacity(config.row_count());
    for w in &config.windows {
        let effect = spatial.iter().find(|s| s.0 == w.site).map_or(0.0, |s| s.1);
        for day in w.start_day..w.start_day + w.days {
            let (d, dow) = (dayno(day), dayofweek(day));
            for hour in 1..=HOURS_PER_DAY as u32 {
                let h = hour_of_week(dow, hour)? as usize;
                let signal = config.intercept + trend[h - 1] + annual[d as usize - 1] + effect;
                for _ in 0..w.series {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    rows.push(Observation {
                        response: signal + config.noise_sd * noise,
                        dayno: d,
                        hrofday: hour,
                        dayofweek: dow,
                        site: w.site,
                        location: w.location,
                    });
                }
            }
        }
    }
    let truth = Truth {
        intercept: config.intercept,
        trend,
        annual,
        spatial,
        noise_sd: config.noise_sd,
    };
    Ok((ObservationTable::new(rows)?, truth))
}
