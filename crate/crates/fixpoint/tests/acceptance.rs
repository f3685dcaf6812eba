//! Runs the full desk-check suite and prints one line per criterion.

use fixpoint::verify::run_all;

#[test]
fn acceptance_suite() {
    let start = std::time::Instant::now();
    let outcomes = run_all();
    let elapsed = start.elapsed();
    for o in &outcomes {
        println!("{}", o.line());
    }
    println!("suite ran in {:.2?}", elapsed);
    let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed).collect();
    assert!(
        failed.is_empty(),
        "{} criteria failed: {}",
        failed.len(),
        failed
            .iter()
            .map(|o| o.name)
            .collect::<Vec<_>>()
            .join(", ")
    );
    assert!(elapsed.as_secs() < 10, "suite exceeded 10 seconds");
}
