#![allow(dead_code)]

use chaintorque::endo::FreeEndomorphism;
use chaintorque::graph::{parse_graph_map, GraphMap};
use chaintorque::word::{NameTable, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub fn load(name: &str) -> GraphMap {
    parse_graph_map(&data(name)).unwrap()
}

/// A positive automorphism of `F₂` built from random elementary moves,
/// realized on the two-petal rose with its inverse images.
pub fn random_positive_rose(seed: u64, moves: usize) -> GraphMap {
    let names = NameTable::standard(2);
    let w = |s: &str| names.parse_word(s).unwrap();
    let elementary = [
        (["x1 x2", "x2"], ["x1 x2^-1", "x2"]),
        (["x1", "x2 x1"], ["x1", "x2 x1^-1"]),
        (["x2 x1", "x2"], ["x2^-1 x1", "x2"]),
        (["x1", "x1 x2"], ["x1", "x1^-1 x2"]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = FreeEndomorphism::identity(2);
    for _ in 0..moves {
        let (img, inv) = elementary[rng.gen_range(0..elementary.len())];
        let s = FreeEndomorphism::new(2, img.iter().map(|t| w(t)).collect())
            .unwrap()
            .with_inverse(inv.iter().map(|t| w(t)).collect())
            .unwrap();
        phi = phi.compose(&s).unwrap();
    }
    let spell = |x: &Word| {
        x.letters()
            .iter()
            .map(|l| ["a", "b"][l.generator() - 1])
            .collect::<Vec<_>>()
            .join(" ")
    };
    let inv = phi.inverse_images().unwrap();
    let text = format!(
        "graph rand\nvertex *\nedge a * *\nedge b * *\nbasepoint *\ntree\nvmap * -> *\n\
         emap a -> {}\nemap b -> {}\ninvimages x1 -> {}\ninvimages x2 -> {}\n",
        spell(&phi.images()[0]),
        spell(&phi.images()[1]),
        names.format(&inv[0]),
        names.format(&inv[1]),
    );
    parse_graph_map(&text).unwrap()
}
