//! Writes each instance family to disk and loads it back.

use gswalk::instance::{load_instance, save_instance};
use gswalk::{generate_instance, InstanceKind};

fn main() -> gswalk::Result<()> {
    let dir = std::env::temp_dir();
    for kind in InstanceKind::ALL {
        let inst = generate_instance(kind, 4, 4, 1)?;
        let path = dir.join(format!("gsw_{}.txt", kind.as_str()));
        save_instance(&inst, &path)?;
        let back = load_instance(&path)?;
        let err = inst.matrix().iter().zip(back.matrix().iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{:<20} rank {} round-trip error {err:.1e}  {}", kind.as_str(), back.rank(), path.display());
    }

    let bad = dir.join("gsw_bad.txt");
    std::fs::write(&bad, "2 2\n1 0\n0 3\n").map_err(|e| gswalk::GswError::InvalidArgument(e.to_string()))?;
    match load_instance(&bad) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
