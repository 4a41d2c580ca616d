//! Central finite-difference check of [`MultiStreamNet::backward`].

use serde::Serialize;

use super::model::{cross_entropy, MultiStreamNet};
use crate::error::Result;
use crate::features::FeatureBundle;

/// Step used by the checks in this crate.
pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCheck {
    pub name: String,
    pub len: usize,
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`; 0 when both vanish.
    pub rel_error: f64,
    pub max_abs_error: f64,
}

/// Summed eval-mode loss over the batch.
fn total_loss(net: &MultiStreamNet, bundles: &[&FeatureBundle], labels: &[usize]) -> Result<f64> {
    let cache = net.forward(bundles, None)?;
    let mut sum = 0.0;
    for (p, &l) in cache.probs.iter().zip(labels) {
        sum += cross_entropy(p, l)?;
    }
    Ok(sum)
}

/// Compares analytic gradients of the summed eval-mode loss with central
/// differences of step `h`, group by group.
pub fn gradcheck(
    net: &MultiStreamNet,
    bundles: &[FeatureBundle],
    labels: &[usize],
    h: f64,
) -> Result<Vec<GroupCheck>> {
    let refs: Vec<&FeatureBundle> = bundles.iter().collect();
    let cache = net.forward(&refs, None)?;
    let mut analytic = net.params.zeros_like();
    net.backward(&cache, labels, &mut analytic)?;

    let mut probe = net.clone();
    let mut out = Vec::new();
    let names: Vec<String> = net.params.groups().into_iter().map(|(n, _)| n).collect();
    for (g, ((name, a), len)) in names
        .into_iter()
        .zip(analytic.groups().into_iter().map(|(_, v)| v.to_vec()))
        .zip(net.params.groups().into_iter().map(|(_, v)| v.len()))
        .enumerate()
    {
        let mut numeric = vec![0.0; len];
        for (i, n) in numeric.iter_mut().enumerate() {
            let orig = net.params.groups()[g].1[i];
            probe.params.groups_mut()[g][i] = orig + h;
            let plus = total_loss(&probe, &refs, labels)?;
            probe.params.groups_mut()[g][i] = orig - h;
            let minus = total_loss(&probe, &refs, labels)?;
            probe.params.groups_mut()[g][i] = orig;
            *n = (plus - minus) / (2.0 * h);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = a.iter().zip(&numeric).map(|(x, y)| x - y).collect();
        let scale = norm(&a).max(norm(&numeric));
        out.push(GroupCheck {
            name,
            len,
            rel_error: if scale == 0.0 { 0.0 } else { norm(&diff) / scale },
            max_abs_error: diff.iter().fold(0.0, |m, d| m.max(d.abs())),
        });
    }
    Ok(out)
}
