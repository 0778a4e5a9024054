//! Compare how the resampling schemes perturb one training table.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use treeimpute::resampling::{resample, BandwidthRule, ResamplerKind};
use treeimpute::tree::{FeatureKind, Response, TrainSet};

fn main() -> treeimpute::error::Result<()> {
    let x: Vec<f64> = (0..40).map(|i| i as f64 / 4.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 1.5 * v + (v * 3.0).sin()).collect();
    let ts = TrainSet::new(vec![FeatureKind::Continuous], vec![x], Response::Continuous(y))?;

    let kinds = [
        ResamplerKind::SimpleWithReplacement(None),
        ResamplerKind::SimpleWithoutReplacement(None),
        ResamplerKind::NormalParametric,
        ResamplerKind::KernelSmoothed(BandwidthRule::NormalScale),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for kind in kinds {
        let drawn = resample(&ts, kind, &mut rng)?;
        let xs = &drawn.columns()[0];
        let distinct = {
            let mut v = xs.clone();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len()
        };
        println!("{kind:?}: {} rows, {distinct} distinct covariate values", drawn.n_rows());
    }
    Ok(())
}
