//! Prints the leakage table for a page with `n` static external links and
//! how many of them a script may request within a bit budget.
//!
//!     cargo run --example leakage_table -- 8 11

use xss_shield::leakage::{leakage_table, max_requests_within};

pub fn main() {
    run(std::env::args().skip(1));
}

pub fn run(mut args: impl Iterator<Item = String>) {
    let n: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(8);
    let budget: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(11);

    println!("{:>4}  {:>24}  {:>5}", "r", "distinct values", "bits");
    for row in leakage_table(n) {
        println!("{:>4}  {:>24}  {:>5}", row.requests, row.distinct_values, row.bits);
    }
    println!(
        "\nwith a {budget}-bit budget a page with {n} links may request {} of them",
        max_requests_within(n, budget)
    );
}
