//! Grouped observations: one group per tool, each an ordered list of
//! (sliding distance, roughness) pairs.
//!
//! Sliding distance is min–max scaled to `[0, 1]` over the whole dataset so
//! that unit-scale priors on slopes are weakly informative. Roughness stays
//! in raw micrometers. The raw distance is kept next to the scaled one so
//! that serialization never has to invert the scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One CSV row before grouping and scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub tool_id: String,
    pub sliding_distance: f64,
    pub roughness_ra: f64,
}

/// Affine map between raw sliding distance and the model's scaled input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XScaling {
    pub min: f64,
    pub range: f64,
}

impl XScaling {
    pub fn identity() -> Self {
        XScaling {
            min: 0.0,
            range: 1.0,
        }
    }

    /// Min–max scaling over `xs`. Fails when the values do not span a
    /// positive, finite range.
    pub fn fit(xs: impl IntoIterator<Item = f64>) -> Result<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in xs {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        let range = hi - lo;
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::Data(format!(
                "sliding distance must take at least two distinct finite values (min {lo}, max {hi})"
            )));
        }
        Ok(XScaling { min: lo, range })
    }

    #[inline]
    pub fn to_scaled(&self, raw: f64) -> f64 {
        (raw - self.min) / self.range
    }

    #[inline]
    pub fn to_raw(&self, scaled: f64) -> f64 {
        self.min + scaled * self.range
    }
}

impl Default for XScaling {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Scaled sliding distance (model input).
    pub x: f64,
    /// Roughness R_a in micrometers.
    pub y: f64,
    /// Sliding distance in the units it was recorded in.
    pub raw_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupData {
    pub label: String,
    pub obs: Vec<Observation>,
}

impl GroupData {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedDataset {
    pub groups: Vec<GroupData>,
    pub scaling: XScaling,
}

impl GroupedDataset {
    /// Groups records by tool (in order of first appearance) and min–max
    /// scales the sliding distance over all records.
    pub fn from_records(records: &[RawRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Data("no records".into()));
        }
        let scaling = XScaling::fit(records.iter().map(|r| r.sliding_distance))?;
        Self::from_records_with_scaling(records, scaling)
    }

    /// Groups records using a scaling fixed elsewhere (e.g. by the dataset
    /// a holdout was split from).
    pub fn from_records_with_scaling(records: &[RawRecord], scaling: XScaling) -> Result<Self> {
        let mut groups: Vec<GroupData> = Vec::new();
        for r in records {
            validate_record(r)?;
            let obs = Observation {
                x: scaling.to_scaled(r.sliding_distance),
                y: r.roughness_ra,
                raw_x: r.sliding_distance,
            };
            match groups.iter_mut().find(|g| g.label == r.tool_id) {
                Some(g) => g.obs.push(obs),
                None => groups.push(GroupData {
                    label: r.tool_id.clone(),
                    obs: vec![obs],
                }),
            }
        }
        Self::new(groups, scaling)
    }

    /// Validates the dataset invariants: at least one group, unique labels,
    /// finite values.
    pub fn new(groups: Vec<GroupData>, scaling: XScaling) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Data("dataset needs at least one group".into()));
        }
        for (i, g) in groups.iter().enumerate() {
            if groups[..i].iter().any(|h| h.label == g.label) {
                return Err(Error::Data(format!("duplicate tool label `{}`", g.label)));
            }
            for o in &g.obs {
                if !(o.x.is_finite() && o.y.is_finite() && o.raw_x.is_finite()) {
                    return Err(Error::Data(format!(
                        "non-finite observation in tool `{}`",
                        g.label
                    )));
                }
            }
        }
        Ok(GroupedDataset { groups, scaling })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_obs(&self) -> usize {
        self.groups.iter().map(GroupData::len).sum()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(GroupData::len).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.label.clone()).collect()
    }

    pub fn group_index(&self, label: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.label == label)
    }

    pub fn group(&self, label: &str) -> Option<&GroupData> {
        self.groups.iter().find(|g| g.label == label)
    }

    /// Same groups, no observations. Used for prior-only evaluation.
    pub fn emptied(&self) -> GroupedDataset {
        GroupedDataset {
            groups: self
                .groups
                .iter()
                .map(|g| GroupData {
                    label: g.label.clone(),
                    obs: Vec::new(),
                })
                .collect(),
            scaling: self.scaling,
        }
    }

    /// Flattens back to raw records, group by group.
    pub fn to_records(&self) -> Vec<RawRecord> {
        self.groups
            .iter()
            .flat_map(|g| {
                g.obs.iter().map(move |o| RawRecord {
                    tool_id: g.label.clone(),
                    sliding_distance: o.raw_x,
                    roughness_ra: o.y,
                })
            })
            .collect()
    }

    /// Appends `other`'s observations group-wise. Groups are matched by label;
    /// labels only present in `other` are appended at the end.
    pub fn merged(&self, other: &GroupedDataset) -> Result<GroupedDataset> {
        if self.scaling != other.scaling {
            return Err(Error::Structure(
                "cannot merge datasets with different x scaling".into(),
            ));
        }
        let mut groups = self.groups.clone();
        for g in &other.groups {
            match groups.iter_mut().find(|h| h.label == g.label) {
                Some(h) => h.obs.extend_from_slice(&g.obs),
                None => groups.push(g.clone()),
            }
        }
        GroupedDataset::new(groups, self.scaling)
    }
}

fn validate_record(r: &RawRecord) -> Result<()> {
    if r.tool_id.is_empty() {
        return Err(Error::Data("empty tool_id".into()));
    }
    if !r.sliding_distance.is_finite() || r.sliding_distance < 0.0 {
        return Err(Error::Data(format!(
            "sliding_distance must be finite and non-negative, got {}",
            r.sliding_distance
        )));
    }
    if !r.roughness_ra.is_finite() || r.roughness_ra < 0.0 {
        return Err(Error::Data(format!(
            "roughness_ra must be finite and non-negative, got {}",
            r.roughness_ra
        )));
    }
    Ok(())
}
