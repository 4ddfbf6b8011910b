//! Enumerates every branch of the walk and evaluates the exact checks.

use gswalk::enumeration::{
    brute_force_min_discrepancy, conditional_increment_check, enumerate_walk_default, verify_martingale,
    verify_subgaussian,
};
use gswalk::{generate_instance, InstanceKind};

fn main() -> gswalk::Result<()> {
    let inst = generate_instance(InstanceKind::RandomInBall, 3, 6, 5)?;
    let dist = enumerate_walk_default(&inst)?;
    println!("{} leaves, total mass {:.15}", dist.leaves.len(), dist.total_probability());

    for i in 0..inst.d() {
        let mut e = vec![0.0; inst.d()];
        e[i] = 1.0;
        let mart = verify_martingale(&dist, &inst, &e);
        let moments: Vec<String> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&l| verify_subgaussian(&dist, &inst, &e, l).map(|m| format!("{m:.6}")))
            .collect::<Result<_, _>>()?;
        println!("e{}: |E<MX,e>| = {mart:.1e}, moments {}", i + 1, moments.join(" "));
    }

    let inc = conditional_increment_check(&dist);
    println!("increment law: {} nodes, worst deviation {:.1e}", inc.nodes, inc.max());

    let (opt, x) = brute_force_min_discrepancy(&inst)?;
    let walk_best = dist.leaves.iter().map(|l| inst.discrepancy(&l.x)).fold(f64::INFINITY, f64::min);
    println!("optimum {opt:.4} at {x:?}; best walk outcome {walk_best:.4}");
    Ok(())
}
