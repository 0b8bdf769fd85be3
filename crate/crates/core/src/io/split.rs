use crate::data::{GroupData, GroupedDataset};
use crate::error::{Error, Result};

/// Splits off the early-life data of `sparse` tools.
///
/// Every other tool goes to train in full. A sparse tool keeps its
/// `n_visible` smallest sliding distances in train and the rest go to the
/// holdout. Both outputs keep every group (possibly empty), the original
/// x scaling and the original within-group order.
pub fn split_sparse_tools(
    data: &GroupedDataset,
    sparse: &[String],
    n_visible: usize,
) -> Result<(GroupedDataset, GroupedDataset)> {
    for label in sparse {
        let g = data.group(label).ok_or_else(|| Error::UnknownTool(label.clone()))?;
        if g.len() <= n_visible {
            return Err(Error::Data(format!(
                "sparse tool `{label}` has {} observations; need more than {n_visible}",
                g.len()
            )));
        }
    }
    let mut train = Vec::with_capacity(data.n_groups());
    let mut holdout = Vec::with_capacity(data.n_groups());
    for g in &data.groups {
        if !sparse.contains(&g.label) {
            train.push(g.clone());
            holdout.push(GroupData {
                label: g.label.clone(),
                obs: Vec::new(),
            });
            continue;
        }
        let mut order: Vec<usize> = (0..g.len()).collect();
        order.sort_by(|&a, &b| g.obs[a].raw_x.total_cmp(&g.obs[b].raw_x));
        let mut visible = vec![false; g.len()];
        for &i in &order[..n_visible] {
            visible[i] = true;
        }
        let (seen, hidden): (Vec<_>, Vec<_>) = g.obs.iter().zip(&visible).partition(|(_, &v)| v);
        train.push(GroupData {
            label: g.label.clone(),
            obs: seen.into_iter().map(|(o, _)| *o).collect(),
        });
        holdout.push(GroupData {
            label: g.label.clone(),
            obs: hidden.into_iter().map(|(o, _)| *o).collect(),
        });
    }
    Ok((
        GroupedDataset::new(train, data.scaling)?,
        GroupedDataset::new(holdout, data.scaling)?,
    ))
}
