//! Sample the structural hypotheses of every built-in model.
//!
//! For each model: positive definiteness margin of `A(ρ)ᵀs''(ρ)` against γ,
//! the reaction bound, the round trips `u(s'(ρ)) = ρ` and `s'(u(w)) = w`, the
//! chain rule `u'(w)s''(u(w)) = I`, and that `u(w)` lands in the open
//! admissible set even for extreme `w`.
//!
//! ```text
//! cargo run --release --example validate_models
//! ```

use entropy_ldg::models::{turing_coefficients, validate_model, ModelSpec};

fn main() -> entropy_ldg::Result<()> {
    let (a, b) = turing_coefficients();
    let models = [
        ModelSpec::porous_medium(2.0)?,
        ModelSpec::porous_medium(1.5)?,
        ModelSpec::skt(a, b, Some([6.0, 3.0]))?,
        ModelSpec::mixture(&[1.0, 3.0])?,
        ModelSpec::tumor(1.0, 1.0)?,
    ];
    let mut all = true;
    for m in &models {
        let r = validate_model(m, 20_000, 1);
        println!("== {} (C_f = {:.3}, gamma = {:.4})\n{r}\n", m.name(), m.c_f, m.gamma);
        all &= r.passed();
    }
    std::process::exit(if all { 0 } else { 1 });
}
