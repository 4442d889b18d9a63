use rand::seq::index::sample;
use rand::Rng;

/// Picks `min(k, m)` distinct event types for one training sentence.
///
/// With gold types present the first element is one positive, chosen
/// round-robin by `round` so that every gold type gets trained across
/// epochs. Then up to `k − 1` negatives are drawn uniformly without
/// replacement from the types absent from the sentence. If there are too
/// few negatives the remaining gold types fill the set. Without gold types
/// all `min(k, m)` picks are negatives.
pub fn sample_event_types(
    gold: &[usize],
    m: usize,
    k: usize,
    round: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let target = k.min(m);
    if target == 0 {
        return Vec::new();
    }
    let mut gold: Vec<usize> = gold.iter().copied().filter(|&t| t < m).collect();
    gold.sort_unstable();
    gold.dedup();
    let absent: Vec<usize> = (0..m).filter(|t| gold.binary_search(t).is_err()).collect();

    let mut chosen = Vec::with_capacity(target);
    if !gold.is_empty() {
        chosen.push(gold[round % gold.len()]);
    }
    let want_neg = (target - chosen.len()).min(absent.len());
    for idx in sample(rng, absent.len(), want_neg).into_iter() {
        chosen.push(absent[idx]);
    }
    let mut offset = 1;
    while chosen.len() < target {
        chosen.push(gold[(round + offset) % gold.len()]);
        offset += 1;
    }
    chosen
}
