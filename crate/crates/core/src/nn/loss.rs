/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the loss.
pub const BCE_CLAMP: f64 = 1e-7;

/// Binary cross-entropy `-(y ln p + (1 - y) ln(1 - p))` on a clamped probability.
pub fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Derivative of [`bce`] of `sigmoid(logit)` with respect to the logit, given
/// `p = sigmoid(logit)`. Zero where the clamp is active.
pub fn bce_grad(p: f64, y: f64) -> f64 {
    if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&p) {
        0.0
    } else {
        p - y
    }
}
