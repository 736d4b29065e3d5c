//! Parallel evaluation of randomization runs.

use eventlag_core::significance::{
    BrandEvents, RandomizationConfig, SignificancePlan, SignificanceReport,
};
use rayon::prelude::*;

use crate::Result;

/// Same report as the sequential test, with runs spread over the rayon pool.
pub fn run_significance_parallel(
    brands: &[BrandEvents],
    clusters: Option<usize>,
    cfg: &RandomizationConfig,
    horizon: u32,
) -> Result<SignificanceReport> {
    let plan = SignificancePlan::new(brands, clusters, cfg, horizon)?;
    let runs = (0..plan.runs())
        .into_par_iter()
        .map(|r| plan.run(r))
        .collect::<eventlag_core::Result<Vec<_>>>()?;
    Ok(plan.finish(runs)?)
}
