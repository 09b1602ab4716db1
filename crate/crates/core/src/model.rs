//! The contract a concrete switching model fulfills so the generic engine
//! (filtering, smoothing, simulation) can drive it.

use rand::Rng;

/// A finite-regime switching model of memory order `s`.
///
/// The hidden regime lives in `{0, …, M-1}`. Conditionally on the regime path,
/// each observation depends on the current regime and the previous `s`
/// observations; the regime transition depends on the previous regime and the
/// same `s`-observation window.
///
/// Window convention: `window` always has length `order()` and is ordered
/// oldest first, i.e. `window[0] = y_{k-s}, …, window[s-1] = y_{k-1}` when the
/// model is queried about step `k`. The value `j` steps back is
/// `window[s - j]`.
pub trait RegimeModel {
    /// Observation type.
    type Obs: Clone;

    /// Number of regimes M (M >= 1; concrete parametric families require M >= 2).
    fn num_regimes(&self) -> usize;

    /// Memory order s >= 1.
    fn order(&self) -> usize;

    /// Natural-log transition density of `x_next` given `x_prev` and the window.
    ///
    /// For every fixed `(x_prev, window)` the exponentials must sum to 1 over
    /// `x_next`.
    fn transition_logpdf(&self, x_next: usize, x_prev: usize, window: &[Self::Obs]) -> f64;

    /// Natural-log emission density of `y` given the current regime and window.
    fn emission_logpdf(&self, y: &Self::Obs, x: usize, window: &[Self::Obs]) -> f64;

    /// Uniform transition density bounds `(lower, upper)` with
    /// `0 < lower <= upper < inf`, valid over all arguments the model accepts.
    fn transition_bounds(&self) -> (f64, f64);
}

/// A model that can also draw regimes and observations, enabling simulation.
pub trait SampleModel: RegimeModel {
    /// Draw the next regime given the previous one and the window.
    fn sample_transition<R: Rng + ?Sized>(
        &self,
        x_prev: usize,
        window: &[Self::Obs],
        rng: &mut R,
    ) -> usize;

    /// Draw an observation given the current regime and the window.
    fn sample_emission<R: Rng + ?Sized>(
        &self,
        x: usize,
        window: &[Self::Obs],
        rng: &mut R,
    ) -> Self::Obs;
}

/// Draw the index of a discrete distribution given by (not necessarily
/// normalized) non-negative weights.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}
