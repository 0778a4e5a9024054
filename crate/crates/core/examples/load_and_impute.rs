//! Load the German Credit table, blank 20% of it and impute with two presets.
//!
//! cargo run --release --example load_and_impute

use treeimpute::ampute::{ampute, AmputeConfig, Mechanism};
use treeimpute::imputer::{impute, LearnerSpec};
use treeimpute::io::load_csv;
use treeimpute::metrics::{pfc, EvalTriple};

fn main() -> treeimpute::error::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data");
    let truth = load_csv(format!("{dir}/german_credit.csv"), format!("{dir}/german_credit.schema"), "NA")?;
    println!("{} rows, {} columns", truth.n_rows(), truth.n_cols());

    let cfg = AmputeConfig { mechanism: Mechanism::McarExact, rate: 0.2, seed: 7 };
    let amputed = ampute(&truth, &cfg)?;
    println!("{} cells blanked", amputed.mask.count());

    for (name, spec) in [("missforest", LearnerSpec::missforest()), ("missboopf", LearnerSpec::missboopf().with_boosting(200, 0.01))] {
        let r = impute(&amputed.data, &spec.with_forest_trees(50), 10, 1)?;
        let err = pfc(&EvalTriple::new(&truth, &r.data, &amputed.mask)?)?;
        println!("{name:>10}: PFC {err:.4} after {} passes", r.iterations);
    }
    Ok(())
}
