//! Run the small benchmark plan shipped in plans/ and print the summary.
//!
//! cargo run --release --example benchmark_harness [plan] [out_dir]

use std::path::PathBuf;

use treeimpute::benchmark::{run_plan, summarize, write_records, write_summary, BenchmarkPlan};

fn main() -> treeimpute::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let plan_path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/plans/quick.plan")));
    let plan = BenchmarkPlan::load(&plan_path)?;
    let log = |line: &str| eprintln!("{line}");
    let records = run_plan(&plan, "NA", Some(&log))?;
    if let Some(dir) = args.next() {
        std::fs::create_dir_all(&dir).expect("create output directory");
        write_records(std::fs::File::create(format!("{dir}/records.csv")).expect("records.csv"), &records)?;
    }
    write_summary(std::io::stdout().lock(), &summarize(&plan, &records))?;
    Ok(())
}
