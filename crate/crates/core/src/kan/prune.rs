use super::{FixedForm, KanLayer, KanNetwork};
use crate::error::{Error, Result};

/// Zeroes every edge whose mean |post-activation| over `samples` is below
/// `threshold`, then drops hidden nodes whose outgoing edges are all zero.
///
/// A dropped node cannot influence any output, so removal preserves the
/// network function. Input and output nodes are never removed.
pub fn prune(net: &KanNetwork, samples: &[Vec<f64>], threshold: f64) -> Result<KanNetwork> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "prune threshold must be non-negative, got {threshold}"
        )));
    }
    let mut pruned = net.clone();
    if threshold == 0.0 {
        return Ok(pruned);
    }
    let scores = net.edge_scores(samples)?;
    for (l, layer) in pruned.layers_mut().iter_mut().enumerate() {
        for (j, row) in layer.edges.iter_mut().enumerate() {
            for (i, edge) in row.iter_mut().enumerate() {
                if !edge.is_zero() && scores[l][j][i] < threshold {
                    edge.lock(FixedForm::ZERO);
                }
            }
        }
    }
    remove_dead_nodes(&mut pruned);

    let last = pruned.layers().last().unwrap();
    for (j, row) in last.edges.iter().enumerate() {
        if row.iter().all(|e| e.is_zero()) {
            return Err(Error::Structural(format!(
                "pruning at threshold {threshold} disconnects output {j}"
            )));
        }
    }
    Ok(pruned)
}

fn remove_dead_nodes(net: &mut KanNetwork) {
    let mut widths = net.widths().to_vec();
    let mut layers: Vec<KanLayer> = net.layers().to_vec();
    loop {
        let mut removed = false;
        // Hidden node `n` of width index `h` feeds layer `h` (column n) and is
        // fed by layer `h - 1` (row n).
        for h in (1..widths.len() - 1).rev() {
            let mut n = 0;
            while n < widths[h] {
                let dead = layers[h].edges.iter().all(|row| row[n].is_zero());
                if dead && widths[h] > 1 {
                    for row in layers[h].edges.iter_mut() {
                        row.remove(n);
                    }
                    layers[h].n_in -= 1;
                    layers[h - 1].edges.remove(n);
                    layers[h - 1].n_out -= 1;
                    widths[h] -= 1;
                    removed = true;
                } else {
                    n += 1;
                }
            }
        }
        if !removed {
            break;
        }
    }
    net.set_structure(widths, layers);
}
