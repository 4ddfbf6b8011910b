//! Grid certification of the scalar inequalities.

use gswalk::inequalities::{cosh_grid, hoeffding_grid, lemma1_grid, lemma1_ratio_grid};

fn main() {
    let h = hoeffding_grid(3.0, 0.01);
    println!("two-point mgf: min gap {:.3e} over {} points", h.min_gap, h.points);

    let (a, b) = cosh_grid(10.0, 5.0, 0.01);
    println!("cosh chain: min gaps {:.3e}, {:.3e}", a.min_gap, b.min_gap);

    // Coarse grid; the unnormalized form already fails here.
    let raw = lemma1_grid(0.99, 3.0, 0.03);
    let ratio = lemma1_ratio_grid(0.99, 3.0, 0.03);
    println!("exponential inequality, unnormalized: min gap {:.4} at {:?}", raw.min_gap, raw.argmin);
    println!("exponential inequality, ratio form:   min gap {:.3e}", ratio.min_gap);
}
