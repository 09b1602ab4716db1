//! Trajectory simulation from a sampleable switching model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::filter::check_window;
use crate::model::SampleModel;

/// A simulated trajectory: the hidden regime path and the observations.
#[derive(Debug, Clone)]
pub struct Trajectory<O> {
    pub regimes: Vec<usize>,
    pub observations: Vec<O>,
}

/// Draw `t` steps from the joint law of the model, conditionally on
/// `X_0 = x0` and the `s` conditioning observations in `y_init`.
///
/// Deterministic given `seed`.
pub fn simulate<M: SampleModel>(
    model: &M,
    x0: usize,
    y_init: &[M::Obs],
    t: usize,
    seed: u64,
) -> Result<Trajectory<M::Obs>> {
    check_window(model, y_init)?;
    let s = model.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut full: Vec<M::Obs> = Vec::with_capacity(s + t);
    full.extend_from_slice(y_init);
    let mut regimes = Vec::with_capacity(t);
    let mut x = x0;
    for k in 0..t {
        let (window, _) = full.split_at(k + s);
        let window = &window[k..];
        x = model.sample_transition(x, window, &mut rng);
        let obs = model.sample_emission(x, window, &mut rng);
        regimes.push(x);
        full.push(obs);
    }
    let observations = full.split_off(s);
    Ok(Trajectory {
        regimes,
        observations,
    })
}
