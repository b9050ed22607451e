//! End-to-end fit: table and config in, archive out.

use std::path::Path;

use crate::archive::{
    ArchiveMetadata, FitArchive, LatticeGrid, SpatialLattice, StageSummary, SummaryRow, SummaryTable, FORMAT_VERSION,
};
use crate::config::FitConfig;
use crate::inference::{all_sites_trend, annual_curve, optimize_hyper, site_trend_lincombs, FitResult, SiteTrends};
use crate::model::{build_standard_model, ModelSpec, ObservationTable, SPATIAL};
use crate::spde::{build_mesh, project_many, TriMesh};
use crate::table::load_table;
use crate::Result;

/// Everything produced by one fit.
#[derive(Debug)]
pub struct FitOutput {
    pub mesh: TriMesh,
    pub spec: ModelSpec,
    pub result: FitResult,
    pub archive: FitArchive,
}

impl FitOutput {
    pub fn converged(&self) -> bool {
        self.result.converged
    }
}

/// Builds the standard model for `table`, fits it and summarizes the fit.
/// `dropped` is the number of input rows discarded while loading.
pub fn fit_table(table: &ObservationTable, dropped: usize, config: &FitConfig) -> Result<FitOutput> {
    config.validate()?;
    let mesh = build_mesh(&table.unique_locations(), config.model.max_edge)?;
    let spec = build_standard_model(table, &mesh, &config.model)?;
    let y = table.responses();
    let result = optimize_hyper(&spec, &y, &config.optimizer)?;
    let archive = summarize(&spec, &mesh, &result, dropped, config)?;
    Ok(FitOutput {
        mesh,
        spec,
        result,
        archive,
    })
}

/// Loads the data and optional config, fits, and writes the archive to
/// `out_dir`.
pub fn fit_command(data: &Path, config: Option<&Path>, out_dir: &Path) -> Result<FitOutput> {
    let config = match config {
        Some(path) => FitConfig::load(path)?,
        None => FitConfig::default(),
    };
    let loaded = load_table(data)?;
    let output = fit_table(&loaded.table, loaded.dropped, &config)?;
    output.archive.write(out_dir)?;
    Ok(output)
}

fn summarize(
    spec: &ModelSpec,
    mesh: &TriMesh,
    result: &FitResult,
    dropped: usize,
    config: &FitConfig,
) -> Result<FitArchive> {
    let post = &result.posterior;
    let mut hyperparameters = SummaryTable::new("name");
    for (name, &value) in result.hyper.names.iter().zip(&result.hyper.values) {
        hyperparameters.rows.push(SummaryRow::new(name, value, 0.0));
    }

    let mut latent = SummaryTable::new("key");
    let mut spatial_block = None;
    for (c, offset) in spec.components().iter().zip(spec.offsets()) {
        for i in 0..c.size() {
            let k = offset + i;
            latent
                .rows
                .push(SummaryRow::new(format!("{}:{}", c.name, i + 1), post.mean()[k], post.marginal_sd()[k]));
        }
        if c.name == SPATIAL {
            spatial_block = Some(offset..offset + c.size());
        }
    }

    let site_tables = config.site_tables && config.model.site_trends;
    let trends = if site_tables {
        site_trend_lincombs(spec, post)?
    } else {
        SiteTrends {
            all: all_sites_trend(spec, post)?,
            sites: Vec::new(),
        }
    };
    let annual = annual_curve(spec, post, &config.model)?;

    let mut fitted = SummaryTable::new("row");
    for (i, (m, s)) in result.fitted_mean.iter().zip(&result.fitted_sd).enumerate() {
        fitted.rows.push(SummaryRow::new((i + 1).to_string(), *m, *s));
    }

    let spatial = match spatial_block {
        Some(block) => {
            let mean = &post.mean()[block.clone()];
            let sd = &post.marginal_sd()[block];
            let mut maps = project_many(mesh, &[mean, sd], config.lattice_resolution)?;
            let sd = maps.pop().expect("two fields");
            let mean = maps.pop().expect("two fields");
            Some(SpatialLattice { mean, sd })
        }
        None => None,
    };
    let lattice = spatial.as_ref().map(|s| LatticeGrid {
        nx: s.mean.nx,
        ny: s.mean.ny,
        lower: s.mean.lower,
        upper: s.mean.upper,
    });

    let metadata = ArchiveMetadata {
        format_version: FORMAT_VERSION,
        converged: result.converged,
        n_obs: spec.n_obs(),
        dropped_rows: dropped,
        latent_dim: spec.latent_dim(),
        log_marginal_likelihood: result.log_marginal_likelihood,
        log_posterior: result.hyper.log_posterior,
        sites: trends.sites.iter().map(|s| s.0).collect(),
        site_tables,
        stages: result
            .stages
            .iter()
            .map(|s| StageSummary {
                extra_diag: s.extra_diag,
                evaluations: s.evaluations,
                objective: s.objective,
                converged: s.converged,
                not_positive_definite: s.not_positive_definite,
            })
            .collect(),
        lattice,
        config: config.clone(),
    };
    Ok(FitArchive {
        metadata,
        hyperparameters,
        latent,
        trend_all: SummaryTable::numbered("hrofweek", &trends.all.hours),
        dow_all: SummaryTable::numbered("dayofweek", &trends.all.days),
        trend_sites: trends
            .sites
            .iter()
            .map(|(_, t)| SummaryTable::numbered("hrofweek", &t.hours))
            .collect(),
        dow_sites: trends
            .sites
            .iter()
            .map(|(_, t)| SummaryTable::numbered("dayofweek", &t.days))
            .collect(),
        annual: SummaryTable::numbered("dayno", &annual),
        fitted,
        spatial,
    })
}
