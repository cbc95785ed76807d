//! Fast invariant checks bundled into the binary.

use adavits::complexity::{count_params, flow_sharing_terms, module_macs, Scope};
use adavits::config::AttentionKind;
use adavits::discriminators::{mcd_forward, msd_forward, DiscOutput};
use adavits::dsp::{istft, stft, Waveform};
use adavits::io::{decode_tensors, encode_tensors};
use adavits::losses::grad_check::synthetic_example;
use adavits::losses::{directional_grad_check, total_losses, LossId, LossTerms, LossWeights};
use adavits::nn::{linear_attention, scaled_dot_attention, AttentionParams};
use adavits::numerics::{macs, rng_fill, Distribution, Tensor};
use adavits::ppg2wav::{decode, flow_forward, flow_inverse, prior_encode, speaker_embedding, synthesize};
use adavits::text2ppg::Ppg;
use adavits::weights::Module;
use adavits::{init_weights, ModelConfig};

type Check = fn() -> Result<String, String>;

const CHECKS: &[(&str, Check)] = &[
    ("stft_roundtrip", stft_roundtrip),
    ("flow_bijectivity", flow_bijectivity),
    ("attention_single_step", attention_single_step),
    ("loss_composites", loss_composites),
    ("grad_check", grad_check),
    ("synthesize_contract", synthesize_contract),
    ("phase_probe", phase_probe),
    ("sharing_identity", sharing_identity),
    ("analyzer_runtime_macs", analyzer_runtime_macs),
    ("container_roundtrip", container_roundtrip),
];

/// Runs matching checks; returns `(ran, failed)`.
pub fn run(filter: Option<&str>) -> (usize, usize) {
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in CHECKS {
        if filter.is_some_and(|f| !name.contains(f)) {
            continue;
        }
        ran += 1;
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    (ran, failed)
}

fn e(err: adavits::Error) -> String {
    err.to_string()
}

fn ensure(cond: bool, detail: String) -> Result<String, String> {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn stft_roundtrip() -> Result<String, String> {
    let cfg = ModelConfig::default().stft();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let x = rng_fill(&[16000], seed, Distribution::Uniform { lo: -1.0, hi: 1.0 })
            .map_err(e)?
            .cast::<f64>();
        let y = istft(&stft(x.data(), &cfg).map_err(e)?, Some(16000)).map_err(e)?;
        let num: f64 = x.data().iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = x.data().iter().map(|a| a * a).sum();
        worst = worst.max((num / den).sqrt());
    }
    let cola = cfg.cola_deviation();
    ensure(
        worst < 1e-6 && cola < 1e-6,
        format!("rel L2 {worst:.2e}, COLA deviation {cola:.2e}"),
    )
}

fn flow_bijectivity() -> Result<String, String> {
    let cfg = ModelConfig::micro();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let store = init_weights(&cfg, seed).map_err(e)?;
        let z = rng_fill(
            &[6, cfg.latent_dim],
            seed + 100,
            Distribution::Normal { mean: 0.0, std: 1.0 },
        )
        .map_err(e)?;
        let (fz, log_det) = flow_forward(&z, None, &cfg, &store).map_err(e)?;
        if log_det != 0.0 {
            return Err(format!("log_det {log_det}"));
        }
        worst = worst.max(flow_inverse(&fz, None, &cfg, &store).map_err(e)?.max_abs_diff(&z));
        let back = flow_forward(&flow_inverse(&z, None, &cfg, &store).map_err(e)?, None, &cfg, &store)
            .map_err(e)?
            .0;
        worst = worst.max(back.max_abs_diff(&z));
    }
    ensure(worst < 1e-5, format!("max round-trip error {worst:.2e}"))
}

fn attention_single_step() -> Result<String, String> {
    let d = 8;
    let w = |s| rng_fill(&[d, d], s, Distribution::Normal { mean: 0.0, std: 0.3 });
    let (q, k, v, o) = (w(1).map_err(e)?, w(2).map_err(e)?, w(3).map_err(e)?, w(4).map_err(e)?);
    let x = rng_fill(&[1, d], 5, Distribution::Normal { mean: 0.0, std: 1.0 }).map_err(e)?;
    let p = AttentionParams {
        w_q: &q,
        w_k: &k,
        w_v: &v,
        w_o: &o,
        n_heads: 2,
        kind: AttentionKind::Linear,
    };
    let diff = linear_attention(&x, &p, None)
        .map_err(e)?
        .max_abs_diff(&scaled_dot_attention(&x, &p, None).map_err(e)?);
    ensure(diff < 1e-6, format!("T=1 linear vs scaled-dot {diff:.2e}"))
}

fn loss_composites() -> Result<String, String> {
    let t = LossTerms {
        kl: 1.0,
        recon: 1.0,
        ppg: 1.0,
        adv_g: 2.0,
        adv_d: 0.5,
        fm: 3.0,
    };
    let r = total_losses(t, LossWeights::default());
    ensure(
        r.l_cvae == 56.0 && r.l_g == 64.0,
        format!("L_cvae {}, L_G {}", r.l_cvae, r.l_g),
    )
}

fn grad_check() -> Result<String, String> {
    let cfg = ModelConfig::micro();
    let store = init_weights(&cfg, 3).map_err(e)?;
    let ex = synthetic_example(&cfg, 12, 1, 4).map_err(e)?;
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for id in [LossId::Recon, LossId::Kl, LossId::Ppg, LossId::Fm] {
        let g = directional_grad_check(id, &store, &cfg, &ex, 9, 1e-4).map_err(e)?;
        worst = worst.max(g.rel_err);
        parts.push(format!("{id:?} {:.1e}", g.rel_err));
    }
    ensure(worst < 1e-3, parts.join(", "))
}

fn synthesize_contract() -> Result<String, String> {
    let cfg = ModelConfig::default();
    let store = init_weights(&cfg, 0).map_err(e)?;
    let ppg = Ppg::new(rng_fill(&[80, cfg.ppg_dim], 1, Distribution::Normal { mean: 0.0, std: 1.0 }).map_err(e)?)
        .map_err(e)?;
    let a = synthesize(&ppg, 0, &store, &cfg, 0.667, 5).map_err(e)?;
    let b = synthesize(&ppg, 0, &store, &cfg, 0.667, 5).map_err(e)?;
    ensure(
        a.len() == 16000 && a.is_finite() && a == b,
        format!(
            "{} samples, finite {}, deterministic {}",
            a.len(),
            a.is_finite(),
            a == b
        ),
    )
}

fn phase_probe() -> Result<String, String> {
    let cfg = ModelConfig::default();
    let store = init_weights(&cfg, 7).map_err(e)?;
    let sine = |phase: f64| {
        Waveform::new(
            (0..2560)
                .map(|i| (0.5 * (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16000.0 + phase).sin()) as f32)
                .collect(),
        )
    };
    let diff = |a: &DiscOutput, b: &DiscOutput| {
        a.scores
            .iter()
            .zip(&b.scores)
            .map(|(x, y)| x.max_abs_diff(y))
            .fold(0.0, f64::max)
    };
    let (a, b) = (sine(0.0), sine(1.1));
    let msd = diff(
        &msd_forward(&a, &cfg, &store).map_err(e)?,
        &msd_forward(&b, &cfg, &store).map_err(e)?,
    );
    let mcd = diff(
        &mcd_forward(&a, &cfg, &store).map_err(e)?,
        &mcd_forward(&b, &cfg, &store).map_err(e)?,
    );
    ensure(
        msd < 1e-3 && mcd > 1e-3,
        format!("MSD diff {msd:.2e}, MCD diff {mcd:.2e}"),
    )
}

fn sharing_identity() -> Result<String, String> {
    let cfg = ModelConfig::default();
    let shared = count_params(&cfg, Scope::Inference).map_err(e)?.total_params as i64;
    let unshared = count_params(
        &ModelConfig {
            share_flow: false,
            ..cfg.clone()
        },
        Scope::Inference,
    )
    .map_err(e)?
    .total_params as i64;
    let (coupling, fle) = flow_sharing_terms(&cfg).map_err(e)?;
    let want = (cfg.flow_couplings as i64 - 1) * coupling as i64 - fle as i64;
    ensure(
        unshared - shared == want,
        format!("delta {} vs identity {want}", unshared - shared),
    )
}

fn analyzer_runtime_macs() -> Result<String, String> {
    let cfg = ModelConfig::micro();
    let store = init_weights(&cfg, 2).map_err(e)?;
    let frames = 10;
    let ppg = Ppg::new(rng_fill(&[frames, cfg.ppg_dim], 1, Distribution::Normal { mean: 0.0, std: 1.0 }).map_err(e)?)
        .map_err(e)?;
    let speaker = speaker_embedding(&store, 0).map_err(e)?;
    let (prior, p) = macs::measure(|| prior_encode(&ppg, &speaker, &cfg, &store));
    let prior = prior.map_err(e)?;
    let (z, f) = macs::measure(|| flow_inverse(&prior.mu, None, &cfg, &store));
    let (_, d) = macs::measure(|| decode(&z.map_err(e)?, &speaker, &cfg, &store).map_err(e));
    let runtime = p + f + d;
    let analytic: u64 = [Module::PriorEncoder, Module::Flow, Module::Decoder]
        .iter()
        .map(|&m| module_macs(&cfg, m, 1, frames).macs)
        .sum();
    ensure(
        runtime == analytic,
        format!("runtime {runtime} MACs, analytic {analytic}"),
    )
}

fn container_roundtrip() -> Result<String, String> {
    let store = init_weights(&ModelConfig::micro(), 4).map_err(e)?;
    let bytes = encode_tensors(store.iter()).map_err(e)?;
    let back = decode_tensors(&bytes).map_err(e)?;
    let same = back.len() == store.len() && back.iter().zip(store.iter()).all(|((n, t), (m, u))| n == m && t == u);
    let reencoded = encode_tensors(back.iter().map(|(n, t): &(String, Tensor)| (n.as_str(), t))).map_err(e)?;
    ensure(
        same && reencoded == bytes,
        format!("{} tensors, {} bytes", back.len(), bytes.len()),
    )
}
