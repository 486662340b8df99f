//! Runs every acceptance criterion on the default beam and prints one line
//! per criterion. Criteria listed as unattainable must fail; all others must
//! pass.

use smartbeam::acceptance::{run_all, KNOWN_UNATTAINABLE};
use smartbeam::materials::CompositeSpec;

fn main() {
    let results = run_all(&CompositeSpec::default());
    let mut unexpected = vec![];
    for r in &results {
        println!("{}", r.line());
        let known = KNOWN_UNATTAINABLE.contains(&r.id);
        if r.passed == known {
            unexpected.push(r.id);
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria pass; known unattainable: {KNOWN_UNATTAINABLE:?}", results.len());
    if !unexpected.is_empty() {
        println!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
