//! Score imputations with NRMSE and PFC, then compare two methods with the
//! Brunner-Munzel test.

use treeimpute::error::Error;
use treeimpute::ampute::{ampute, AmputeConfig, Mechanism};
use treeimpute::imputer::{impute, LearnerSpec};
use treeimpute::metrics::{brunner_munzel, nrmse, stars, Alternative, EvalTriple};
use treeimpute::synthdata::{generate, Design, DesignSpec};

fn main() -> treeimpute::error::Result<()> {
    let (mut plain, mut kernel) = (Vec::new(), Vec::new());
    for run in 0..8 {
        let truth = generate(&DesignSpec { design: Design::D5, n: 150, seed: run })?;
        let a = ampute(&truth, &AmputeConfig { mechanism: Mechanism::Mar, rate: 0.3, seed: run })?;
        for (spec, out) in [(LearnerSpec::missforest(), &mut plain), (LearnerSpec::rf_kernel(), &mut kernel)] {
            let r = impute(&a.data, &spec.with_forest_trees(40), 5, run)?;
            out.push(nrmse(&EvalTriple::new(&truth, &r.data, &a.mask)?)?);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("missforest NRMSE {:.4}", mean(&plain));
    println!(" rf-kernel NRMSE {:.4}", mean(&kernel));
    match brunner_munzel(&kernel, &plain, Alternative::Less) {
        Ok(bm) => println!("relative effect {:.3}, p = {:.4} {}", bm.relative_effect, bm.p_value, stars(bm.p_value)),
        Err(Error::DegenerateTest { relative_effect }) => {
            println!("relative effect {relative_effect:.3}, samples fully separated")
        }
        Err(e) => return Err(e),
    }
    Ok(())
}
