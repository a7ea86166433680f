//! Small runner for checks that report a one-line verdict each.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

pub fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub check: fn() -> Verdict,
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

/// Runs the selected criteria (all when `selected` is empty), printing
/// `PASS`/`FAIL` lines. Returns the ids that failed. A panic counts as a failure.
pub fn run(criteria: &[Criterion], selected: &[u32]) -> Vec<u32> {
    let mut failed = Vec::new();
    for c in criteria {
        if !selected.is_empty() && !selected.contains(&c.id) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(c.check))
            .unwrap_or_else(|e| verdict(false, format!("panicked: {}", panic_message(e))));
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{:>2}] {}: {} ({:.1}s)", c.id, c.name, v.detail, start.elapsed().as_secs_f64());
        if !v.pass {
            failed.push(c.id);
        }
    }
    failed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_and_failures_are_collected() {
        let criteria = [
            Criterion { id: 1, name: "ok", check: || verdict(true, "fine") },
            Criterion { id: 2, name: "bad", check: || verdict(false, "off") },
            Criterion { id: 3, name: "boom", check: || panic!("nope") },
        ];
        assert_eq!(run(&criteria, &[]), vec![2, 3]);
        assert_eq!(run(&criteria, &[1]), Vec::<u32>::new());
    }
}
