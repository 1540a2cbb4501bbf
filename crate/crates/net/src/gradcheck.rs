//! Full-network gradient checks against the finite-difference oracle.

use infoplane_core::{Matrix, Real, StreamRng};

use crate::diagnostics::finite_difference_check;
use crate::layer::{Activation, LayerSpec};
use crate::network::{Layer, Network};

const H: f64 = 1e-5;
const ABS_TOL: f64 = 1e-4;
const REL_TOL: f64 = 1e-3;

/// 2-16-8-3 stack exercising every layer kind.
fn fixture_spec() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { fan_in: 2, fan_out: 16 },
        LayerSpec::Activation(Activation::Softplus),
        LayerSpec::InfoDropout { alpha_max_sq: 0.81 },
        LayerSpec::Dense { fan_in: 16, fan_out: 8 },
        LayerSpec::Activation(Activation::Relu),
        LayerSpec::GaussianDropout { sigma_sq: 0.25 },
        LayerSpec::Dense { fan_in: 8, fan_out: 3 },
    ]
}

fn fixture_batch() -> (Matrix<f64>, Vec<u8>) {
    let mut rng = StreamRng::new(99, 0);
    let mut inputs = Matrix::zeros(8, 2);
    for v in inputs.data_mut() {
        *v = 0.6 * f64::standard_normal(&mut rng);
    }
    let labels = vec![0u8, 1, 2, 0, 1, 2, 0, 1];
    (inputs, labels)
}

/// The α head initializes with zero weights, which silences its
/// backward path into the layer input. Spread small mixed-sign weights
/// (α stays strictly inside the clamp, so the loss stays differentiable
/// under every ±H nudge) to keep that path under test.
fn jitter_alpha_head(net: &mut Network<f64>) {
    for layer in net.layers_mut() {
        if let Layer::InfoDropout { head, .. } = layer {
            for (k, w) in head.weight.data_mut().iter_mut().enumerate() {
                *w = 0.02 * ((k + 1) as f64).sin();
            }
        }
    }
}

#[test]
fn every_analytic_gradient_matches_central_differences() {
    let (inputs, labels) = fixture_batch();
    let mut net = Network::<f64>::new(&fixture_spec(), 31).unwrap();
    jitter_alpha_head(&mut net);
    assert_eq!(
        net.parameter_count(),
        (2 * 16 + 16) + (16 * 16 + 16) + (16 * 8 + 8) + (8 * 3 + 3)
    );

    let report =
        finite_difference_check(&net, &inputs, &labels, 2.0, 1234, 7, H, ABS_TOL, REL_TOL)
            .unwrap();
    assert_eq!(report.parameter_count, net.parameter_count());
    assert!(
        report.passed(),
        "{} of {} parameters disagree; first: {:?}",
        report.failures.len(),
        report.parameter_count,
        report.failures.first()
    );
}

#[test]
fn gradient_check_holds_without_the_kl_term() {
    let (inputs, labels) = fixture_batch();
    let mut net = Network::<f64>::new(&fixture_spec(), 32).unwrap();
    jitter_alpha_head(&mut net);
    let mut rng = StreamRng::new(1234, 7);
    let (loss, _) = net
        .loss_and_gradients(&inputs, &labels, 0.0, &mut rng)
        .unwrap();
    assert_eq!(loss.total, loss.cross_entropy);

    let report =
        finite_difference_check(&net, &inputs, &labels, 0.0, 1234, 7, H, ABS_TOL, REL_TOL)
            .unwrap();
    assert!(
        report.passed(),
        "{} of {} parameters disagree; first: {:?}",
        report.failures.len(),
        report.parameter_count,
        report.failures.first()
    );
}

#[test]
fn report_flags_a_deliberately_broken_gradient() {
    // Same check run with a far tighter threshold pair must flag the
    // stochastic rounding floor somewhere; this guards against the
    // report silently passing everything.
    let (inputs, labels) = fixture_batch();
    let mut net = Network::<f64>::new(&fixture_spec(), 33).unwrap();
    jitter_alpha_head(&mut net);
    let report =
        finite_difference_check(&net, &inputs, &labels, 2.0, 1234, 7, H, 1e-18, 1e-16).unwrap();
    assert!(!report.passed());
    assert!(report.max_abs_error > 0.0);
}
