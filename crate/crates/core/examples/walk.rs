//! One seeded walk on a random instance, step by step.

use gswalk::rng::stream;
use gswalk::{generate_instance, run_walk, InstanceKind};

fn main() -> gswalk::Result<()> {
    let inst = generate_instance(InstanceKind::RandomUnitSphere, 3, 6, 11)?;
    let trace = run_walk(&inst, &mut stream(11, 0))?;

    for s in &trace.steps {
        println!(
            "t={} pivot={} delta-={:.4} delta+={:.4} chose {:+.4} (p={:.3}) froze {:?}",
            s.t, s.pivot, s.delta_minus, s.delta_plus, s.chosen_delta, s.choice_probability, s.frozen
        );
    }
    let x: String = trace.final_x.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect();
    println!("coloring {x}, discrepancy {:.4}", inst.discrepancy(&trace.final_x));
    Ok(())
}
