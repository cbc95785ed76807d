use adavits::discriminators::{mcd_forward, msd_forward, DiscOutput};
use adavits::dsp::Waveform;
use adavits::{init_weights, ModelConfig};

fn sine(freq: f64, phase: f64, n: usize) -> Waveform {
    Waveform::new(
        (0..n)
            .map(|i| (0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0 + phase).sin()) as f32)
            .collect(),
    )
}

fn max_diff(a: &DiscOutput, b: &DiscOutput) -> f64 {
    a.scores
        .iter()
        .zip(&b.scores)
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max)
}

#[test]
fn complex_discriminator_sees_phase_magnitude_one_does_not() {
    let cfg = ModelConfig::default();
    let store = init_weights(&cfg, 7).unwrap();
    let a = sine(1000.0, 0.0, 4096);
    let b = sine(1000.0, 1.1, 4096);
    let msd = max_diff(
        &msd_forward(&a, &cfg, &store).unwrap(),
        &msd_forward(&b, &cfg, &store).unwrap(),
    );
    let mcd = max_diff(
        &mcd_forward(&a, &cfg, &store).unwrap(),
        &mcd_forward(&b, &cfg, &store).unwrap(),
    );
    assert!(msd < 1e-3, "msd diff {msd}");
    assert!(mcd > 1e-3, "mcd diff {mcd}");
}
