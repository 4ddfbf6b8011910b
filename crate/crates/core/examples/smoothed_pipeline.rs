//! Perturbed-instance pipeline: augmented walk, tilted law, outer estimate
//! and admissibility of the parameters.

use gswalk::enumeration::enumerate_walk_default;
use gswalk::smoothed::{
    admissibility_from_tilted, admissibility_with_bound, build_augmented, kappa_n, outer_success_estimate,
    tilt_distribution, SmoothedConfig,
};
use gswalk::{generate_instance, InstanceKind};

fn main() -> gswalk::Result<()> {
    let inst = generate_instance(InstanceKind::RandomUnitSphere, 3, 6, 8)?;
    let leaves = enumerate_walk_default(&build_augmented(&inst))?;
    let tilted = tilt_distribution(&leaves, &inst, 1.0, 4.0)?;
    println!(
        "support {} points, V = {:.4}, P(B) = {:.4}, W = {:.4}",
        tilted.support.len(),
        tilted.v,
        tilted.cutoff_set_mass,
        tilted.w
    );

    for eps in [0.25, 0.5, 1.0, 2.0] {
        let config = SmoothedConfig::new(1.0, 32.0, 4.0, eps, 400, 8, 1.0)?;
        let est = outer_success_estimate(&inst, &tilted, &config)?;
        println!(
            "eps {eps:<4}: {}/{} perturbations hit, 95% CI [{:.3}, {:.3}]",
            est.successes, est.trials, est.wilson_low, est.wilson_high
        );
    }

    let config = SmoothedConfig::new(1.0, 32.0, 4.0, 0.5, 400, 8, 1.0)?;
    print_report(&admissibility_from_tilted(&config, &inst, &tilted));

    let d = 8;
    let config = SmoothedConfig::for_dimension(d, 1.0, 32.0, 1, 0)?;
    print_report(&admissibility_with_bound(&config, d, kappa_n(d, 32.0)));
    Ok(())
}

fn print_report(r: &gswalk::smoothed::AdmissibilityReport) {
    println!("d={} n={} eps={:.4} admissible eps in [{:.4}, {:.4}]", r.d, r.n, r.epsilon, r.epsilon_low, r.epsilon_high);
    for c in &r.conditions {
        println!("  {:<22} margin {:+.4e} {}", c.name, c.margin, if c.holds { "ok" } else { "FAILS" });
    }
}
