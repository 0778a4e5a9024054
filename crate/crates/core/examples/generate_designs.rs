//! Draw every simulation design and print per-column summaries.

use treeimpute::data::Cell;
use treeimpute::synthdata::{generate, Design, DesignSpec};

fn main() -> treeimpute::error::Result<()> {
    for design in Design::ALL.into_iter().chain([Design::D3Rho07]) {
        let d = generate(&DesignSpec { design, n: 2000, seed: 11 })?;
        let first: Vec<f64> = d.column(0).iter().filter_map(Cell::as_f64).collect();
        let mean = first.iter().sum::<f64>() / first.len() as f64;
        if design.is_categorical() {
            let mut freq = [0usize; 4];
            first.iter().for_each(|&l| freq[l as usize] += 1);
            println!("{design:>8}: {} columns, first column level counts {freq:?}", d.n_cols());
        } else {
            let var = first.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (first.len() - 1) as f64;
            println!("{design:>8}: {} columns, first column mean {mean:.3} variance {var:.3}", d.n_cols());
        }
    }
    Ok(())
}
