//! Distance measures and k-means clustering of event shapes.
//!
//! Three ways of comparing events are supported:
//!
//! * [`Distance::Euclidean`] over raw event values. Events of different
//!   lengths are first resampled to a common length by linear interpolation.
//! * [`Distance::Dtw`] over raw event values of any length, with medoid
//!   centroids in k-means.
//! * [`Distance::Slopes`]: Euclidean distance over per-strip slopes, where each
//!   event's time axis is cut into the same number of equal-width strips.

mod distance;
mod kmeans;
mod metrics;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use distance::{
    choose_strip_count, dist_dtw, dist_euclidean, dtw, euclidean, resample_linear,
    slopes_features,
};
pub use kmeans::{kmeans, Assignment, Centroid, ClusterModel, MAX_ITERATIONS};
pub use metrics::adjusted_rand_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Euclidean,
    Dtw,
    Slopes,
}

/// Feature vector for one event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeVector {
    pub event_ref: u32,
    pub features: Vec<f64>,
    /// Number of strips when `features` are slope features.
    pub strip_count: Option<usize>,
}

impl ShapeVector {
    /// Raw event values as features.
    pub fn raw(event_ref: u32, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyFeatures);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            event_ref,
            features: values,
            strip_count: None,
        })
    }

    /// Slope features over `strips` equal-width strips.
    pub fn slopes(event_ref: u32, values: &[f64], strips: usize) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            event_ref,
            features: slopes_features(values, strips)?,
            strip_count: Some(strips),
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// How event values are turned into features; stored with a fitted model so
/// new events can be projected the same way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeBasis {
    /// Raw values resampled to `len` points.
    Resampled { len: usize },
    /// Raw values as they are.
    Raw,
    /// Slopes over `strips` strips.
    Slopes { strips: usize },
}

impl ShapeBasis {
    /// Pick the basis for a pool of events with the given lengths. For slope
    /// features the strip count is a third of the mean length, capped so the
    /// shortest event still spans one day per strip. `None` when no event in
    /// the pool is long enough.
    pub fn for_pool(distance: Distance, lengths: &[usize]) -> Option<Self> {
        if lengths.is_empty() {
            return None;
        }
        match distance {
            Distance::Dtw => Some(ShapeBasis::Raw),
            Distance::Euclidean => {
                let mut sorted = lengths.to_vec();
                sorted.sort_unstable();
                // lower median keeps the length an observed one
                Some(ShapeBasis::Resampled {
                    len: sorted[(sorted.len() - 1) / 2].max(1),
                })
            }
            Distance::Slopes => {
                let usable: Vec<usize> = lengths.iter().copied().filter(|&n| n >= 2).collect();
                let shortest = *usable.iter().min()?;
                let strips = choose_strip_count(&usable).min(shortest - 1);
                Some(ShapeBasis::Slopes { strips })
            }
        }
    }

    pub fn shape(&self, event_ref: u32, values: &[f64]) -> Result<ShapeVector> {
        match *self {
            ShapeBasis::Raw => ShapeVector::raw(event_ref, values.to_vec()),
            ShapeBasis::Resampled { len } => {
                if values.is_empty() {
                    return Err(Error::EmptyFeatures);
                }
                ShapeVector::raw(event_ref, resample_linear(values, len))
            }
            ShapeBasis::Slopes { strips } => ShapeVector::slopes(event_ref, values, strips),
        }
    }
}
