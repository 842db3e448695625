//! Full-size acceptance suite: one PASS/FAIL line per criterion.

use qconsist::check::{run_check, Tier};
use qconsist::randkit::Seed;

fn main() {
    let report = match run_check(Tier::Full, Seed(0), None, &mut |o| println!("{}", o.line())) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL acceptance suite aborted: {e}");
            std::process::exit(1);
        }
    };
    let failed = report.outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {} failed", report.outcomes.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
