#![allow(dead_code)]

use loopwatch_core::{load_network, Coordinate, WeightedDigraph};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub fn fixture_path(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> WeightedDigraph {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    load_network(&text, Coordinate::X).expect("fixture parses")
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random tree plus `extra` chords on `n` labelled vertices, weights drawn by
/// `weight`. Arc orientation is random.
pub fn random_network(
    rng: &mut StdRng,
    n: usize,
    extra: usize,
    mut weight: impl FnMut(&mut StdRng, usize, usize) -> f64,
) -> WeightedDigraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        pairs.push((parent, order[i]));
    }
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| !pairs.iter().any(|&(p, q)| (p == a && q == b) || (p == b && q == a)))
        .collect();
    candidates.shuffle(rng);
    pairs.extend(candidates.into_iter().take(extra));
    let triples: Vec<(String, String, f64)> = pairs
        .into_iter()
        .map(|(a, b)| {
            let (t, h) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
            let w = weight(rng, t, h);
            (format!("v{t}"), format!("v{h}"), w)
        })
        .collect();
    WeightedDigraph::from_triples(&triples).expect("valid random network")
}

/// Random network whose weights are small integers.
pub fn random_integer_network(rng: &mut StdRng, n: usize, extra: usize) -> WeightedDigraph {
    random_network(rng, n, extra, |r, _, _| f64::from(r.gen_range(-3i32..=3)))
}

/// Random network with real weights in `[-range, range]`.
pub fn random_real_network(rng: &mut StdRng, n: usize, extra: usize, range: f64) -> WeightedDigraph {
    random_network(rng, n, extra, move |r, _, _| r.gen_range(-range..=range))
}

/// Consistent network: every weight is a potential difference.
pub fn random_potential_network(rng: &mut StdRng, n: usize, extra: usize) -> WeightedDigraph {
    let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
    random_network(rng, n, extra, move |_, t, h| phi[h] - phi[t])
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
