//! Finite-difference check of every parameter group through a three-step
//! derivation (rule application, token with both generation and copy routes,
//! close), printed per group.
//!
//!     cargo run --release --example gradcheck

fn main() {
    let report = synforge::train::gradcheck(1);
    println!("seeds: {:?}", report.seeds);
    for group in &report.groups {
        println!("  {:<16} {:.3e}", group.name, group.max_rel_err);
    }
    println!(
        "max rel err {:.3e} (tolerance {:.0e}) -> {}",
        report.max_rel_err,
        report.tolerance,
        if report.pass { "PASS" } else { "FAIL" }
    );
    std::process::exit(if report.pass { 0 } else { 1 });
}
