//! Water-filling power allocation over parallel channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterfillResult {
    /// Power per channel, in input order.
    pub allocations: Vec<f64>,
    /// Common level `mu` with `p_i = max(0, mu - 1/g_i)`.
    pub water_level: f64,
    pub capacity_bits: f64,
}

/// Capacity-maximizing allocation of `total_power` over channels with gains
/// `g_i` (signal-to-noise ratio per unit power).
///
/// Solves the KKT conditions exactly: channels are sorted by decreasing gain
/// and the largest prefix whose weakest member still receives positive power
/// is the active set. Zero gains are never active.
pub fn water_fill(gains: &[f64], total_power: f64) -> Result<WaterfillResult> {
    if !(total_power.is_finite() && total_power > 0.0) {
        return Err(Error::domain(format!("total power must be positive, got {total_power}")));
    }
    if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::domain(format!("gains must be finite and nonnegative, got {g}")));
    }
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::domain("water filling needs at least one positive gain"));
    }
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));

    let mut inv_sum = 0.0;
    let mut water_level = 0.0;
    for (k, &i) in order.iter().enumerate() {
        let inv = 1.0 / gains[i];
        let level = (total_power + inv_sum + inv) / (k + 1) as f64;
        if level <= inv {
            break;
        }
        inv_sum += inv;
        water_level = level;
    }

    let allocations: Vec<f64> = gains
        .iter()
        .map(|&g| if g > 0.0 { (water_level - 1.0 / g).max(0.0) } else { 0.0 })
        .collect();
    let capacity_bits = gains
        .iter()
        .zip(&allocations)
        .map(|(g, p)| (g * p).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2;
    Ok(WaterfillResult {
        allocations,
        water_level,
        capacity_bits,
    })
}
