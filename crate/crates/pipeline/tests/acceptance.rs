//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shse_core::acoustics::{distance, estimate_t60, mix_at_snr, simulate_rir, RoomConfig};
use shse_core::array::{uniform_circular_array, ArrayGeometry, MicPosition};
use shse_core::features::{ModelInput, RealTensor, Variant};
use shse_core::metrics::{si_sdr, stoi, SI_SDR_CAP_DB};
use shse_core::signal::MultichannelSignal;
use shse_core::spectral::{StftConfig, StftProcessor};
use shse_core::spherical::{sht_forward, sht_quadrature, sph_harm, ShOrderIndex, SphDirection, SphereGrid};
use shse_core::Complex64;
use shse_enhancer::gradcheck::check_gradients;
use shse_enhancer::summary::REFERENCE_PARAMS;
use shse_enhancer::train::{train_step, Adam, DEFAULT_LEARNING_RATE};
use shse_enhancer::{count_params_flops, Enhancer, EnhancerConfig};
use shse_pipeline::eval::{cmd_eval, EvalReport};
use shse_pipeline::rir::Mode;
use shse_pipeline::train::{checkpoint_path, cmd_train};
use shse_pipeline::{features, mix, rir, synth, ExperimentConfig};
use tempfile::TempDir;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(limit: Duration, start: Instant, mut out: Outcome) -> Outcome {
    let took = start.elapsed();
    out.detail = format!("{} [{:.1} s, limit {} s]", out.detail, took.as_secs_f64(), limit.as_secs());
    out.pass &= took <= limit;
    out
}

fn sh_orthonormality() -> Outcome {
    let start = Instant::now();
    let grid = SphereGrid::new(64, 128).unwrap();
    let all: Vec<ShOrderIndex> = ShOrderIndex::all(4).collect();
    let mut worst: f64 = 0.0;
    for &a in &all {
        for &b in &all {
            let ip = grid.inner_product(|d| sph_harm(a, d), |d| sph_harm(b, d));
            let delta = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((ip - delta).norm());
        }
    }
    let out = Outcome::new(worst <= 1e-6, format!("max |<Y,Y'> - delta| = {worst:.2e} (<= 1e-6)"));
    within(Duration::from_secs(5), start, out)
}

/// `count` points of a Fibonacci lattice on the unit sphere.
fn fibonacci_sphere(count: usize) -> ArrayGeometry {
    let golden = PI * (1.0 + 5f64.sqrt());
    let mics = (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            MicPosition {
                radius: 1.0,
                theta: z.acos(),
                phi: (golden * (i as f64 + 0.5)).rem_euclid(2.0 * PI),
            }
        })
        .collect();
    ArrayGeometry::new(mics).unwrap()
}

fn discrete_vs_continuous_sht() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let order = 4;
    let coeffs: Vec<(ShOrderIndex, Complex64)> = ShOrderIndex::all(2)
        .map(|i| (i, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    let field = |d: SphDirection| -> Complex64 { coeffs.iter().map(|&(i, c)| c * sph_harm(i, d)).sum() };

    let points = fibonacci_sphere(1000);
    let samples: Vec<Complex64> = points.mics().iter().map(|m| field(m.direction())).collect();
    let discrete = sht_forward(&samples, &points, order).unwrap();
    let grid = SphereGrid::new(64, 128).unwrap();
    let (mut err, mut norm) = (0.0, 0.0);
    for i in ShOrderIndex::all(order) {
        let oracle = sht_quadrature(field, &grid, i).unwrap();
        err += (discrete.get(i) - oracle).norm_sqr();
        norm += oracle.norm_sqr();
    }
    let rel = (err / norm).sqrt();

    let uca = uniform_circular_array(9, 0.035).unwrap();
    let ones = vec![Complex64::new(1.0, 0.0); 9];
    let p = sht_forward(&ones, &uca, order).unwrap();
    let mut identity: f64 = 0.0;
    for i in ShOrderIndex::all(order) {
        let expected = if i.n() == 0 { (4.0 * PI).sqrt() } else { 0.0 };
        let checked = i.n() == 0 || (1..=4).contains(&i.m().abs()) || (i.m() == 0 && i.n() % 2 == 1);
        if checked {
            identity = identity.max((p.get(i) - expected).norm());
        }
    }
    Outcome::new(
        rel <= 1e-3 && identity <= 1e-12,
        format!("1000-point lattice rel err {rel:.2e} (<= 1e-3); UCA identities max err {identity:.1e} (<= 1e-12)"),
    )
}

fn stft_reconstruction() -> Outcome {
    let processor = StftProcessor::new(StftConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.gen_range(4000..20000);
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sig = MultichannelSignal::mono(16000, x.clone()).unwrap();
        let spec = processor.stft(&sig).unwrap();
        let y = processor.istft(&spec).unwrap();
        let range = processor.config().reconstructable_range(spec.frames());
        let (mut e, mut n) = (0.0, 0.0);
        for i in range {
            e += (y.channel(0)[i] - x[i]).powi(2);
            n += x[i].powi(2);
        }
        worst = worst.max((e / n).sqrt());
    }
    Outcome::new(worst <= 1e-6, format!("worst interior relative error {worst:.2e} over 100 signals (<= 1e-6)"))
}

fn rir_validity() -> Outcome {
    let start = Instant::now();
    let array = uniform_circular_array(9, 0.035).unwrap();
    let center = [2.3, 2.1, 1.4];
    let source = [3.1, 2.5, 1.8];
    let mut pass = true;
    let mut worst_offset = 0;
    let mut notes = Vec::new();
    for rt60 in [0.2, 0.4, 0.6] {
        let room = RoomConfig {
            dimensions: [6.0, 5.0, 4.0],
            rt60,
            source_pos: source,
            array_center: center,
            array: array.clone(),
            sample_rate: 16000,
            sound_speed: 343.0,
            max_order: None,
            rir_len: None,
        };
        let rirs = simulate_rir(&room).unwrap();
        for (h, off) in rirs.channels().iter().zip(array.positions()) {
            let mic = [0, 1, 2].map(|i| center[i] + off[i]);
            let expected = (distance(mic, source) / 343.0 * 16000.0).round() as i64;
            let first = h.iter().position(|&v| v != 0.0).unwrap() as i64;
            worst_offset = worst_offset.max((first - expected).abs());
        }
        let t60 = estimate_t60(rirs.channel(0), 16000).unwrap_or(f64::NAN);
        let ratio = t60 / rt60;
        pass &= (0.8..=1.2).contains(&ratio);
        notes.push(format!("{rt60:.1}->{t60:.3}"));
    }
    pass &= worst_offset <= 1;
    let out = Outcome::new(
        pass,
        format!(
            "direct-path index off by at most {worst_offset} sample(s) (<= 1); T60 target->estimate {} (within 20%)",
            notes.join(", ")
        ),
    );
    within(Duration::from_secs(60), start, out)
}

/// 32-point STFT for the 17-bin tiny configuration.
fn tiny_stft() -> StftProcessor {
    StftProcessor::new(StftConfig {
        frame_len: 32,
        hop: 16,
        fft_size: 32,
        sample_rate: 16000,
    })
    .unwrap()
}

fn tiny_batch(config: &EnhancerConfig, batch: usize, frames: usize, seed: u64) -> (Vec<ModelInput>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensor = |channels: usize| {
        let data = (0..frames * config.bins * channels).map(|_| rng.gen_range(-1.0..1.0)).collect();
        RealTensor::new(frames, config.bins, channels, data).unwrap()
    };
    let inputs: Vec<ModelInput> = (0..batch)
        .map(|_| ModelInput::Parallel {
            stft: tensor(config.stft_channels),
            sht: tensor(config.sht_channels),
        })
        .collect();
    let len = (frames - 1) * 16 + 32;
    let targets = (0..batch)
        .map(|_| {
            let (a, w, ph) = (rng.gen_range(0.2..0.5), rng.gen_range(0.1..0.8), rng.gen_range(0.0..6.0));
            (0..len).map(|n| a * (w * n as f64 + ph).sin()).collect()
        })
        .collect();
    (inputs, targets)
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let config = EnhancerConfig::tiny(Variant::Parallel);
    let (inputs, targets) = tiny_batch(&config, 2, 6, 11);
    let model = Enhancer::<f64>::new(config, 5).unwrap();
    let ins: Vec<&ModelInput> = inputs.iter().collect();
    let tgs: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let report = check_gradients(&model, &ins, &tgs, &tiny_stft(), 1e-6, 1e-7).unwrap();
    let out = Outcome::new(
        report.max_relative_error <= 1e-3 && report.checked == model.params().count(),
        format!(
            "{} parameters checked in f64, max relative error {:.2e} (<= 1e-3)",
            report.checked, report.max_relative_error
        ),
    );
    within(Duration::from_secs(120), start, out)
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let config = EnhancerConfig::tiny(Variant::Parallel);
    let (inputs, targets) = tiny_batch(&config, 2, 6, 21);
    let ins: Vec<&ModelInput> = inputs.iter().collect();
    let tgs: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
    let stft = tiny_stft();
    let mut model = Enhancer::<f32>::new(config, 1).unwrap();
    let mut adam = Adam::new(model.params());
    let mut losses = Vec::with_capacity(500);
    for _ in 0..500 {
        losses.push(train_step(&mut model, &ins, &tgs, &mut adam, DEFAULT_LEARNING_RATE, &stft).unwrap());
    }
    let (first, last) = (losses[0], losses[499]);
    let drop = 1.0 - last / first;
    let out = Outcome::new(
        drop >= 0.9,
        format!("loss {first:.3e} -> {last:.3e} after 500 steps, reduction {:.1}% (>= 90%)", 100.0 * drop),
    );
    within(Duration::from_secs(600), start, out)
}

fn parameter_accounting() -> Outcome {
    let config = EnhancerConfig::parallel();
    let analytic = count_params_flops(&config).params;
    let built = Enhancer::<f32>::new(config, 0).unwrap().params().count();
    let ratio = analytic as f64 / REFERENCE_PARAMS;
    let info = Command::new(env!("CARGO_BIN_EXE_shse")).arg("info").output().unwrap();
    let text = String::from_utf8_lossy(&info.stdout);
    let prints_both = info.status.success() && text.contains(&analytic.to_string()) && text.contains("1.82 M");
    Outcome::new(
        analytic == built && (0.8..=1.2).contains(&ratio) && prints_both,
        format!(
            "{analytic} params (built model {built}), {ratio:.3} x 1.82 M (within 0.8..1.2); info prints count and reference: {prints_both}"
        ),
    )
}

fn metric_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let speech = synth::speech_utterance(&mut rng, 16000, 3.0);
    let noise = synth::noise_recording(&mut rng, 16000);
    let identity = stoi(&speech, &speech, 16000).unwrap();

    let clean = MultichannelSignal::mono(16000, speech.clone()).unwrap();
    let noise = MultichannelSignal::mono(16000, noise).unwrap();
    let scores: Vec<f64> = [-5.0, 0.0, 5.0]
        .iter()
        .map(|&snr| {
            let (mix, _) = mix_at_snr(&clean, &noise, snr, 0).unwrap();
            stoi(&speech, mix.channel(0), 16000).unwrap()
        })
        .collect();
    let monotonic = scores.windows(2).all(|w| w[1] > w[0]);

    let estimate: Vec<f64> = speech
        .iter()
        .zip(clean.channel(0).iter().rev())
        .map(|(s, r)| s + 0.3 * r)
        .collect();
    let base = si_sdr(&speech, &estimate).unwrap();
    let mut invariance: f64 = 0.0;
    for gain in [0.01, 0.5, 3.0, 250.0] {
        let scaled: Vec<f64> = estimate.iter().map(|v| v * gain).collect();
        invariance = invariance.max((si_sdr(&speech, &scaled).unwrap() - base).abs());
    }
    Outcome::new(
        identity >= 0.999 && monotonic && invariance <= 1e-9 && base < SI_SDR_CAP_DB,
        format!(
            "stoi(x,x) = {identity:.6}; STOI at -5/0/5 dB = {:.4}/{:.4}/{:.4}; SI-SDR {base:.2} dB, max change under scaling {invariance:.1e} dB",
            scores[0], scores[1], scores[2]
        ),
    )
}

/// Default desk-scale configuration with the model of `variant`.
fn desk_config(variant: Variant) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.model = EnhancerConfig::desk(variant);
    config.train.epochs = DESK_EPOCHS;
    config
}

const DESK_EPOCHS: usize = 20;
const HELD_OUT_CELL: (f64, f64) = (0.0, 0.4);

fn generate(config: &ExperimentConfig, root: &Path) {
    synth::cmd_synth(config, &root.join("corpus")).unwrap();
    let (speech, noise) = (root.join("corpus/speech"), root.join("corpus/noise"));
    for (mode, name) in [(Mode::Train, "train"), (Mode::Eval, "eval")] {
        let rirs = root.join(format!("rir_{name}"));
        rir::cmd_rir(config, mode, &rirs).unwrap();
        mix::cmd_mix(config, &speech, &noise, &rirs, &root.join(name)).unwrap();
    }
    features::cmd_features(config, &root.join("train"), &root.join("train_feats")).unwrap();
}

fn train_and_eval(config: &ExperimentConfig, root: &Path, name: &str) -> (EvalReport, Duration) {
    let out = root.join(name);
    let start = Instant::now();
    cmd_train(config, &root.join("train"), &root.join("train_feats"), &out, None, &mut |r| {
        eprintln!("  {name} epoch {:>2} train {:.4e} valid {:.4e}", r.epoch + 1, r.train_loss, r.valid_loss.unwrap_or(f64::NAN));
    })
    .unwrap();
    let took = start.elapsed();
    let report = cmd_eval(config, Some(&checkpoint_path(&out)), &root.join("eval"), None).unwrap();
    (report, took)
}

fn desk_scale_end_to_end() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path();
    let parallel = desk_config(Variant::Parallel);
    generate(&parallel, root);
    let utterances = std::fs::read_dir(root.join("corpus/speech")).unwrap().count();

    let (par, par_time) = train_and_eval(&parallel, root, "parallel");
    let (ser, _) = train_and_eval(&desk_config(Variant::Serial), root, "serial");

    let cell = par
        .cells
        .iter()
        .find(|c| c.snr_db == HELD_OUT_CELL.0 && c.t60 == HELD_OUT_CELL.1)
        .unwrap();
    let cell_enh = cell.summary.enhanced_stoi.unwrap();
    let cell_unp = cell.summary.unprocessed_stoi;
    let par_mean = par.overall.enhanced_stoi.unwrap();
    let ser_mean = ser.overall.enhanced_stoi.unwrap();
    let a = cell_enh > cell_unp;
    let b = par_mean >= ser_mean;
    let budget = par_time <= Duration::from_secs(30 * 60);
    Outcome::new(
        utterances >= 50 && a && b && budget,
        format!(
            "{utterances} utterances; (a) cell {:+} dB/{} s STOI enhanced {:.4} vs unprocessed {:.4} [{}] (all cells: {:.4} vs {:.4}); \
             (b) parallel {par_mean:.4} vs serial {ser_mean:.4} [{}]; parallel training {:.0} s of 1800 s",
            HELD_OUT_CELL.0,
            HELD_OUT_CELL.1,
            cell_enh,
            cell_unp,
            if a { "ok" } else { "no" },
            par_mean,
            par.overall.unprocessed_stoi,
            if b { "ok" } else { "no" },
            par_time.as_secs_f64()
        ),
    )
}

fn pipeline_determinism() -> Outcome {
    let mut config = ExperimentConfig::default();
    config.seed = 77;
    config.data.synth_speech = 10;
    config.data.synth_noise = 2;
    config.data.utterance_seconds = 1.0;
    config.data.train_scenarios = 2;
    config.data.train_pairs = 4;
    config.data.train_rt60 = [0.2, 0.5];
    config.data.split_modulo = 3;
    let runs: Vec<TempDir> = (0..2)
        .map(|_| {
            let tmp = TempDir::new().unwrap();
            let root = tmp.path();
            synth::cmd_synth(&config, &root.join("corpus")).unwrap();
            let rirs = root.join("rirs");
            rir::cmd_rir(&config, Mode::Train, &rirs).unwrap();
            let (speech, noise) = (root.join("corpus/speech"), root.join("corpus/noise"));
            mix::cmd_mix(&config, &speech, &noise, &rirs, &root.join("data")).unwrap();
            features::cmd_features(&config, &root.join("data"), &root.join("feats")).unwrap();
            tmp
        })
        .collect();
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for sub in ["corpus/speech", "corpus/noise", "rirs", "data", "feats"] {
        let a = std::fs::read_dir(runs[0].path().join(sub)).unwrap();
        for entry in a {
            let name = entry.unwrap().file_name();
            let x = std::fs::read(runs[0].path().join(sub).join(&name)).unwrap();
            let y = std::fs::read(runs[1].path().join(sub).join(&name)).unwrap_or_default();
            compared += 1;
            if x != y {
                mismatched.push(format!("{sub}/{}", name.to_string_lossy()));
            }
        }
    }
    Outcome::new(
        mismatched.is_empty() && compared > 0,
        format!("{compared} files (manifests, WAVs, tensor files) compared across two runs, {} differ {:?}", mismatched.len(), mismatched),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("spherical-harmonic orthonormality", sh_orthonormality),
        ("discrete vs continuous SHT", discrete_vs_continuous_sht),
        ("STFT perfect reconstruction", stft_reconstruction),
        ("RIR validity", rir_validity),
        ("gradient correctness", gradient_check),
        ("overfit sanity", overfit),
        ("parameter accounting", parameter_accounting),
        ("metric sanity", metric_sanity),
        ("desk-scale end-to-end", desk_scale_end_to_end),
        ("pipeline determinism", pipeline_determinism),
    ];
    let only: Option<usize> = std::env::var("SHSE_ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if only.is_some_and(|n| n != number) {
            continue;
        }
        let outcome = std::panic::catch_unwind(run)
            .unwrap_or_else(|_| Outcome::new(false, "panicked (see message above)"));
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {number:>2} {verdict} {name}: {}", outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
