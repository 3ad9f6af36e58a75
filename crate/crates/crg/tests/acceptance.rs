//! Runs every acceptance criterion, prints one line per criterion, and asserts the
//! ones not listed as known-unattainable.

use crg::acceptance::{is_known_unattainable, run_all, KNOWN_UNATTAINABLE};
use std::io::Write;

#[test]
fn acceptance_criteria() {
    let results = run_all();
    // Written to the raw stderr handle so the report shows without --nocapture.
    let mut err = std::io::stderr().lock();
    writeln!(err).unwrap();
    for r in &results {
        writeln!(err, "{}", r.line()).unwrap();
    }
    for (id, why) in KNOWN_UNATTAINABLE {
        writeln!(err, "known unattainable: criterion {id:02}: {why}").unwrap();
    }
    let unexpected: Vec<u32> = results.iter().filter(|r| !r.pass && !is_known_unattainable(r.id)).map(|r| r.id).collect();
    assert_eq!(results.len(), 14);
    assert!(unexpected.is_empty(), "failing criteria: {unexpected:?}");
}
