//! Monte Carlo estimate of the discrepancy bound, written as JSON and CSV.

use gswalk::harness::{build_report, estimate_bound, run_experiment, write_report, InstanceDescriptor, ReportFormat};
use gswalk::{generate_instance, InstanceKind};

fn main() -> gswalk::Result<()> {
    let (d, n, seed) = (6, 12, 3);
    let inst = generate_instance(InstanceKind::RandomUnitSphere, d, n, seed)?;
    let stats = run_experiment(&inst, 5000, seed)?;

    let b = estimate_bound(&stats)?;
    println!(
        "E hatT ~ {:.3}, E max Z ~ {:.4}, bound {:.4}, best discrepancy {:.4}",
        b.mean_hat_t, b.mean_max_z, b.bound, b.min_discrepancy
    );

    let mut desc = InstanceDescriptor::of(&inst);
    desc.kind = Some(InstanceKind::RandomUnitSphere.as_str().to_string());
    desc.seed = Some(seed);
    let report = build_report(&inst, desc, &stats, seed)?;
    let dir = std::env::temp_dir();
    write_report(&report, dir.join("gsw_mc.json"), ReportFormat::Json)?;
    write_report(&report, dir.join("gsw_mc.csv"), ReportFormat::Csv)?;
    println!("reports in {}", dir.display());
    Ok(())
}
