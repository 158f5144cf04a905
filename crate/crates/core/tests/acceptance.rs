//! Acceptance criteria 1 to 8, one line per criterion.

use billiards::dynamics::Tolerances;
use billiards::verify::{run_suite, Suite, DEFAULT_SEED};

fn main() {
    let results = run_suite(Suite::All, DEFAULT_SEED, &Tolerances::from_env());
    for c in &results {
        println!("{}", c.line());
    }
    let failed = results.iter().filter(|c| !c.passed()).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 || results.len() != 8 {
        std::process::exit(1);
    }
}
