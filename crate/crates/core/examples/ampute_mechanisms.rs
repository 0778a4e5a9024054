//! Apply each missingness mechanism to the same table and report per-column counts.

use treeimpute::ampute::{ampute, column_counts, AmputeConfig, Mechanism};
use treeimpute::synthdata::{generate, Design, DesignSpec};

fn main() -> treeimpute::error::Result<()> {
    let d = generate(&DesignSpec { design: Design::D5, n: 100, seed: 3 })?;
    for mechanism in [Mechanism::McarExact, Mechanism::McarBernoulli, Mechanism::Mar, Mechanism::Mnar] {
        let a = ampute(&d, &AmputeConfig { mechanism, rate: 0.3, seed: 5 })?;
        println!("{mechanism:>15}: {:>4} cells {:?}", a.mask.count(), column_counts(&a.mask));
        if let Some(chain) = a.chain {
            println!("{:>15}  column chain {chain:?}", "");
        }
    }
    Ok(())
}
