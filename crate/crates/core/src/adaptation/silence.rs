use crate::channel::NakagamiChannel;
use crate::search::scan_then_maximize;

/// `max_{x > 0} x^2 p(x)` for the channel density `p`.
pub fn q_max(ch: &NakagamiChannel) -> f64 {
    // The hump sits within a few means for any m >= 0.5; scan well past it.
    let upper = 50.0 * ch.mean_snr() * (1.0 / ch.m()).max(1.0);
    scan_then_maximize(|x| x * x * ch.pdf(x), 0.0, upper, 4000, 1e-12 * upper).value
}

/// Whether the last IR round is certainly silent at state `state`: the
/// stage objective `lambda P + F((2^(R-I) - 1)/P)` then has no stationary
/// point and increases with `P`.
pub fn radio_silence_condition_ir(ch: &NakagamiChannel, lambda: f64, rate: f64, state: f64) -> bool {
    let need = ((rate - state) * std::f64::consts::LN_2).exp_m1();
    lambda * need > q_max(ch)
}
