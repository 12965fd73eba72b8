//! Shared fixtures for the benchmarks in `benches/`.

use berhu::simulation::{generate_design, generate_response};
use berhu::tuning::adaptive_weights;
use berhu::{fit_unpenalized, BlockModelSpec, Dataset, Loss, ModelSpec, Penalty, RngStream};

/// One draw of the block model `model` with `n` training rows.
pub fn block_data(model: u8, n: usize, seed: u64) -> Dataset {
    let spec = BlockModelSpec::model(model).expect("model id");
    let mut rng = RngStream::new(seed, 0);
    let (train, _) = generate_design(&spec, n, 1, &mut rng).expect("design");
    let y = generate_response(&train, &spec, &mut rng).expect("response");
    Dataset::new(train, y, None).expect("dataset")
}

/// Adaptive BerHu spec at `lambda`, weights from the unpenalized fit of `loss`.
pub fn berhu_spec(data: &Dataset, loss: Loss, lambda: f64) -> ModelSpec {
    let unpen = fit_unpenalized(data, loss).expect("pilot fit");
    let weights = adaptive_weights(&unpen.beta, 1.0, 1e-8);
    ModelSpec::new(
        loss,
        Penalty::AdaptiveBerHu {
            lambda,
            l: berhu::DEFAULT_BERHU_L,
            weights,
        },
    )
}
