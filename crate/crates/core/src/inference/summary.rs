use super::posterior::{covariance_block, lincomb_many, GaussianPosterior, LincombSummary};
use crate::model::{annual_basis, site_trend_name, ModelOptions, ModelSpec, ANNUAL, DAYS_PER_YEAR, TREND_ALL};
use crate::penalty::{DAYS_PER_WEEK, HOURS_PER_DAY, HOURS_PER_WEEK};
use crate::{Error, Result};

/// Median and 95% interval of `exp(x)` for `x ~ N(mean, sd²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalSummary {
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn lognormal_summary(mean: f64, sd: f64) -> Result<LognormalSummary> {
    if !(sd >= 0.0) {
        return Err(Error::RangeError(format!("sd must be non-negative, got {sd}")));
    }
    Ok(LognormalSummary {
        median: mean.exp(),
        lower: (mean - 1.96 * sd).exp(),
        upper: (mean + 1.96 * sd).exp(),
    })
}

/// Hour-of-week trend and its day-of-week averages.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendSummary {
    pub hours: Vec<LincombSummary>,
    pub days: Vec<LincombSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteTrends {
    pub all: TrendSummary,
    /// `(site id, all-sites trend + site-specific trend)` in block order
    pub sites: Vec<(i64, TrendSummary)>,
}

fn block_offset(spec: &ModelSpec, name: &str) -> Result<usize> {
    let (offset, c) = spec
        .component(name)
        .ok_or_else(|| Error::InvalidSpec(format!("model has no component {name}")))?;
    if c.size() != HOURS_PER_WEEK {
        return Err(Error::InvalidSpec(format!("component {name} is not an hour-of-week trend")));
    }
    Ok(offset)
}

/// Weights of the trend at every hour and of the seven day averages (1/24
/// each over the day's hours), summing the listed blocks.
fn trend_combos(offsets: &[usize]) -> Vec<Vec<(usize, f64)>> {
    let hours = (0..HOURS_PER_WEEK).map(|h| offsets.iter().map(|&o| (o + h, 1.0)).collect());
    let days = (0..DAYS_PER_WEEK).map(|d| {
        (0..HOURS_PER_DAY)
            .flat_map(|k| offsets.iter().map(move |&o| (o + HOURS_PER_DAY * d + k, 1.0 / HOURS_PER_DAY as f64)))
            .collect()
    });
    hours.chain(days).collect()
}

fn trend(post: &GaussianPosterior, offsets: &[usize]) -> Result<TrendSummary> {
    let mut all = lincomb_many(post, &trend_combos(offsets))?;
    let days = all.split_off(HOURS_PER_WEEK);
    Ok(TrendSummary { hours: all, days })
}

/// All-sites hour-of-week trend alone.
pub fn all_sites_trend(spec: &ModelSpec, post: &GaussianPosterior) -> Result<TrendSummary> {
    trend(post, &[block_offset(spec, TREND_ALL)?])
}

/// All-sites trend plus, for every site, the combined trend
/// `all-sites + site-specific` with day-of-week averages.
pub fn site_trend_lincombs(spec: &ModelSpec, post: &GaussianPosterior) -> Result<SiteTrends> {
    let all_offset = block_offset(spec, TREND_ALL)?;
    let all = trend(post, &[all_offset])?;
    let sites = spec
        .sites()
        .iter()
        .map(|&site| {
            let offset = block_offset(spec, &site_trend_name(site))?;
            Ok((site, trend(post, &[all_offset, offset])?))
        })
        .collect::<Result<_>>()?;
    Ok(SiteTrends { all, sites })
}

/// Annual effect on days `1..=365`.
pub fn annual_curve(spec: &ModelSpec, post: &GaussianPosterior, options: &ModelOptions) -> Result<Vec<LincombSummary>> {
    let (offset, c) = spec
        .component(ANNUAL)
        .ok_or_else(|| Error::InvalidSpec(format!("model has no component {ANNUAL}")))?;
    let days: Vec<u32> = (1..=DAYS_PER_YEAR).collect();
    let rows = annual_basis(options, &days)?;
    if rows.first().map(Vec::len) != Some(c.size()) {
        return Err(Error::InvalidSpec("annual basis does not match the model component".into()));
    }
    let p = c.size();
    let idx: Vec<usize> = (offset..offset + p).collect();
    let cov = covariance_block(post, &idx)?;
    let beta = &post.mean()[offset..offset + p];
    Ok(rows
        .iter()
        .map(|b| {
            let mean = b.iter().zip(beta).map(|(x, m)| x * m).sum();
            let var: f64 = (0..p).map(|i| (0..p).map(|j| b[i] * cov[i][j] * b[j]).sum::<f64>()).sum();
            LincombSummary {
                mean,
                sd: var.max(0.0).sqrt(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_summary() {
        let sd = (8.921 - 8.671) / (2.0 * 1.96);
        let s = lognormal_summary(8.796, sd).unwrap();
        assert_eq!(s.median.round(), 6608.0);
        assert_eq!(s.lower.round(), 5831.0);
        assert_eq!(s.upper.round(), 7488.0);
    }

    #[test]
    fn degenerate_and_monotone() {
        let s = lognormal_summary(0.0, 0.0).unwrap();
        assert_eq!((s.median, s.lower, s.upper), (1.0, 1.0, 1.0));
        let a = lognormal_summary(1.0, 0.1).unwrap();
        let b = lognormal_summary(1.0, 0.2).unwrap();
        assert!(b.lower < a.lower && b.upper > a.upper);
        assert!(lognormal_summary(0.0, -1.0).is_err());
    }

    #[test]
    fn day_combos_average_hours() {
        let combos = trend_combos(&[10]);
        assert_eq!(combos.len(), 175);
        assert_eq!(combos[HOURS_PER_WEEK].len(), 24);
        assert_eq!(combos[HOURS_PER_WEEK][0], (10, 1.0 / 24.0));
    }
}
