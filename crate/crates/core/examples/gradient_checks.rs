//! Verify the analytic loss gradients against finite differences, and check
//! that calibrated soft labels give an unbiased estimate of the gold-label
//! gradient while miscalibrated ones do not.

use pairdistill::student::{
    finite_difference_check, gradient_bias_check, unbiased_gradient_check, Architecture, GradientMutation, LossKind,
};

fn main() -> pairdistill::Result<()> {
    for arch in [Architecture::Linear, Architecture::Mlp1 { hidden: 4 }] {
        for loss in [LossKind::Pointwise, LossKind::Pairwise] {
            let report = finite_difference_check(arch, loss, 5, 100, 1, GradientMutation::None);
            println!(
                "{arch:?} {loss:?}: max relative error {:.2e} (instance {}, component {})",
                report.max_relative_error, report.worst_instance, report.worst_component
            );
        }
    }
    let broken = finite_difference_check(
        Architecture::Linear,
        LossKind::Pairwise,
        5,
        100,
        1,
        GradientMutation::FlipSign,
    );
    println!(
        "sign-flipped gradient: max relative error {:.2}",
        broken.max_relative_error
    );

    let calibrated = unbiased_gradient_check(4, 100_000, 2)?;
    let shifted = gradient_bias_check(4, 100_000, 2, 0.3)?;
    println!("\ncalibrated soft labels: max |z| = {:.2}", calibrated.max_abs_z);
    println!("scores shifted by 0.3:  max |z| = {:.2}", shifted.max_abs_z);
    Ok(())
}
