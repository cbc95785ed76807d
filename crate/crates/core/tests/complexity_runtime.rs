use adavits::complexity::{count_flops, module_macs, Convention, Scope};
use adavits::config::AttentionKind;
use adavits::discriminators::{mcd_forward, msd_forward};
use adavits::dsp::{linear_spectrogram, Waveform};
use adavits::numerics::{macs, rng_fill, Distribution, Rng, Tensor};
use adavits::ppg2wav::decoder::decode;
use adavits::ppg2wav::flow::{flow_forward, flow_inverse};
use adavits::ppg2wav::posterior::posterior_encode;
use adavits::ppg2wav::ppg_predictor::ppg_predict;
use adavits::ppg2wav::prior::prior_encode;
use adavits::ppg2wav::speaker_embedding;
use adavits::text2ppg::{text2ppg_forward, PhonemeSequence};
use adavits::weights::Module;
use adavits::{init_weights, ModelConfig};

fn configs() -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for kind in [AttentionKind::Linear, AttentionKind::ScaledDot] {
        for share in [true, false] {
            out.push(ModelConfig {
                attention_kind: kind,
                share_flow: share,
                ..ModelConfig::micro()
            });
        }
    }
    out
}

#[test]
fn inference_modules_match_counted_macs() {
    for cfg in configs() {
        let store = init_weights(&cfg, 3).unwrap();
        let ids: Vec<usize> = (0..7).map(|i| (i * 5 + 1) % cfg.vocab_size).collect();
        let seq = PhonemeSequence::new(ids.clone(), cfg.vocab_size).unwrap();

        let ((ppg, durations), t2p) = macs::measure(|| text2ppg_forward(&seq, &cfg, &store, None).unwrap());
        let frames: usize = durations.iter().sum();
        assert!(frames > 0);
        assert_eq!(t2p, module_macs(&cfg, Module::Text2Ppg, ids.len(), frames).macs);

        let speaker = speaker_embedding(&store, 1).unwrap();
        let (prior, p) = macs::measure(|| prior_encode(&ppg, &speaker, &cfg, &store).unwrap());
        assert_eq!(p, module_macs(&cfg, Module::PriorEncoder, ids.len(), frames).macs);

        let (z, f) = macs::measure(|| flow_inverse(&prior.mu, None, &cfg, &store).unwrap());
        assert_eq!(f, module_macs(&cfg, Module::Flow, ids.len(), frames).macs);
        let (_, f2) = macs::measure(|| flow_forward(&z, None, &cfg, &store).unwrap());
        assert_eq!(f2, f);

        let (wave, d) = macs::measure(|| decode(&z, &speaker, &cfg, &store).unwrap());
        assert_eq!(d, module_macs(&cfg, Module::Decoder, ids.len(), frames).macs);
        assert_eq!(wave.len(), frames * cfg.hop_length);
    }
}

#[test]
fn training_modules_match_counted_macs() {
    for cfg in configs() {
        let store = init_weights(&cfg, 5).unwrap();
        let frames = 12;
        let wave: Waveform = Waveform::new(
            rng_fill(
                &[frames * cfg.hop_length],
                6,
                Distribution::Uniform { lo: -0.5, hi: 0.5 },
            )
            .unwrap()
            .into_data(),
        );
        let spec = linear_spectrogram(wave.samples(), &cfg.stft()).unwrap();
        assert_eq!(spec.dim(1), frames + 1);
        let cropped = Tensor::from_fn(&[cfg.n_bins(), frames], |e| {
            spec.data()[(e / frames) * (frames + 1) + e % frames]
        });

        let mut rng = Rng::new(0);
        let ((z, _), p) = macs::measure(|| posterior_encode(&cropped, &cfg, &store, Some(&mut rng)).unwrap());
        assert_eq!(p, module_macs(&cfg, Module::PosteriorEncoder, 1, frames).macs);

        let (_, q) = macs::measure(|| ppg_predict(&z, &cfg, &store).unwrap());
        assert_eq!(q, module_macs(&cfg, Module::PpgPredictor, 1, frames).macs);

        let (_, m) = macs::measure(|| msd_forward(&wave, &cfg, &store).unwrap());
        assert_eq!(m, module_macs(&cfg, Module::Msd, 1, frames).macs);
        let (_, c) = macs::measure(|| mcd_forward(&wave, &cfg, &store).unwrap());
        assert_eq!(c, module_macs(&cfg, Module::Mcd, 1, frames).macs);
    }
}

#[test]
fn report_totals_follow_convention() {
    let cfg = ModelConfig::default();
    let two = count_flops(&cfg, 1.0, Scope::Inference, Convention::Mac2).unwrap();
    let one = count_flops(&cfg, 1.0, Scope::Inference, Convention::Mac1).unwrap();
    assert_eq!(two.total_macs, one.total_macs);
    let spectral: u64 = two.modules.iter().map(|m| m.spectral_flops).sum();
    assert_eq!(two.total_flops, 2.0 * two.total_macs as f64 + spectral as f64);
    assert_eq!(one.total_flops, one.total_macs as f64 + spectral as f64 / 2.0);
    assert_eq!((two.phonemes, two.frames), (12, 80));
}
