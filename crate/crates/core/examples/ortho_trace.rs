//! Rebuilds the orthogonal decomposition behind a walk and prints the
//! per-coordinate variance proxies.

use gswalk::ortho::{coordinate_z, verify_direction_expansion};
use gswalk::rng::stream;
use gswalk::{generate_instance, run_walk, InstanceKind, OrthoTrace};

fn main() -> gswalk::Result<()> {
    for kind in [InstanceKind::RandomUnitSphere, InstanceKind::DuplicatedColumn] {
        let inst = generate_instance(kind, 3, 5, 2)?;
        let trace = run_walk(&inst, &mut stream(2, 0))?;
        let ortho = OrthoTrace::build(&inst, &trace)?;

        println!("{}: sigma {:?}", kind.as_str(), ortho.sigma);
        for (p, l) in ortho.pivots.iter().zip(&ortho.nontrivial) {
            println!("  pivot {} from step {}: {} blocks, {} nontrivial", p.pivot, p.start_step, p.blocks.len(), l);
        }
        let z = coordinate_z(&inst, &ortho);
        println!("  hatT {}  sum Z_ei {:.6}", ortho.hat_t, z.iter().sum::<f64>());
        println!("  expansion residual {:.2e}", verify_direction_expansion(&inst, &trace, &ortho));
    }
    Ok(())
}
