use std::cmp::Ordering;

/// Ranking order: higher score first, smaller id on ties. NaN sorts last.
#[inline]
pub fn rank_order(a: (f64, u32), b: (f64, u32)) -> Ordering {
    let (sa, sb) = (nan_low(a.0), nan_low(b.0));
    sb.total_cmp(&sa).then(a.1.cmp(&b.1))
}

#[inline]
fn nan_low(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x
    }
}

/// Positions of the best `k` entries of `keys` in ranking order.
pub(crate) fn top_k_positions(keys: &[(f64, u32)], k: usize) -> Vec<usize> {
    let mut pos: Vec<usize> = (0..keys.len()).collect();
    let cmp = |&a: &usize, &b: &usize| rank_order(keys[a], keys[b]);
    if k == 0 {
        return Vec::new();
    }
    if k < pos.len() {
        pos.select_nth_unstable_by(k - 1, cmp);
        pos.truncate(k);
    }
    pos.sort_unstable_by(cmp);
    pos
}

/// Picks `min(k, |ids|)` ids with the highest scores, ties broken by the
/// smaller id. The result is in ranking order.
pub fn top_k(ids: &[u32], scores: &[f64], k: usize) -> Vec<u32> {
    assert_eq!(ids.len(), scores.len(), "scores must align with ids");
    let keys: Vec<(f64, u32)> = scores.iter().copied().zip(ids.iter().copied()).collect();
    top_k_positions(&keys, k)
        .into_iter()
        .map(|p| keys[p].1)
        .collect()
}

/// [`top_k`] over entity ids `0..scores.len()`.
pub fn top_k_entities(scores: &[f64], k: usize) -> Vec<u32> {
    let keys: Vec<(f64, u32)> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i as u32))
        .collect();
    top_k_positions(&keys, k)
        .into_iter()
        .map(|p| keys[p].1)
        .collect()
}
