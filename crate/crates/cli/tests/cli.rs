use std::path::Path;
use std::process::Command;

use warpmask::mixer::{synth_noise, synth_speech_like, NoiseKind};
use warpmask::neural::{init_params, write_model, NetConfig};
use warpmask::{read_wav, write_wav, Waveform};
use warpmask_cli::run;

fn p(path: &Path) -> String {
    path.display().to_string()
}

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("warpmask").chain(args.iter().copied()))
}

/// A noisy input and an untrained desk-size model in `dir`.
fn fixture(dir: &Path) -> (String, String) {
    let clean = synth_speech_like(1.0, 1);
    let noise = synth_noise(NoiseKind::White, 1.0, 2);
    write_wav(dir.join("clean.wav"), &clean).unwrap();
    write_wav(dir.join("noise.wav"), &noise).unwrap();
    let model = dir.join("m.model");
    write_model(&model, &init_params(&NetConfig::desk(), 1.5, 3).unwrap()).unwrap();
    let noisy = dir.join("noisy.wav");
    assert_eq!(
        cli(&[
            "mix",
            "--clean",
            &p(&dir.join("clean.wav")),
            "--noise",
            &p(&dir.join("noise.wav")),
            "--snr",
            "0",
            "--seed",
            "4",
            "--out",
            &p(&noisy)
        ]),
        0
    );
    (p(&noisy), p(&model))
}

#[test]
fn task_preset_equals_explicit_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let (noisy, model) = fixture(dir.path());
    let a = p(&dir.path().join("asv.wav"));
    let b = p(&dir.path().join("g075.wav"));
    assert_eq!(
        cli(&["enhance", "--model", &model, "--in", &noisy, "--out", &a, "--task", "asv"]),
        0
    );
    assert_eq!(
        cli(&["enhance", "--model", &model, "--in", &noisy, "--out", &b, "--gamma", "0.75"]),
        0
    );
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn gamma_zero_returns_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let (noisy, model) = fixture(dir.path());
    let out = p(&dir.path().join("out.wav"));
    assert_eq!(
        cli(&["enhance", "--model", &model, "--in", &noisy, "--out", &out, "--gamma", "0"]),
        0
    );
    let (x, y): (Waveform, Waveform) = (read_wav(&noisy).unwrap(), read_wav(&out).unwrap());
    assert_eq!(x.len(), y.len());
    let worst = x
        .samples()
        .iter()
        .zip(y.samples())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(worst <= 1.0 / 32768.0, "{worst}");
}

#[test]
fn multiple_gammas_write_one_file_each() {
    let dir = tempfile::tempdir().unwrap();
    let (noisy, model) = fixture(dir.path());
    let out = dir.path().join("many");
    let single = p(&dir.path().join("single.wav"));
    assert_eq!(
        cli(&[
            "enhance",
            "--model",
            &model,
            "--in",
            &noisy,
            "--out",
            &p(&out),
            "--gammas",
            "0.75,1.5"
        ]),
        0
    );
    assert_eq!(
        cli(&["enhance", "--model", &model, "--in", &noisy, "--out", &single, "--gamma", "1.5"]),
        0
    );
    assert_eq!(
        std::fs::read(out.join("gamma_1p5.wav")).unwrap(),
        std::fs::read(&single).unwrap()
    );
    assert!(out.join("gamma_0p75.wav").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (noisy, model) = fixture(dir.path());
    let out = p(&dir.path().join("o.wav"));
    assert_eq!(cli(&["enhance", "--bogus"]), 1);
    assert_eq!(cli(&["frobnicate"]), 1);
    assert_eq!(
        cli(&[
            "enhance", "--model", &model, "--in", &noisy, "--out", &out, "--gamma", "1", "--task",
            "asv"
        ]),
        1
    );
    assert_eq!(cli(&["--help"]), 0);
    assert_eq!(
        cli(&[
            "enhance",
            "--model",
            &model,
            "--in",
            "/nonexistent.wav",
            "--out",
            &out
        ]),
        2
    );
    assert_eq!(
        cli(&["enhance", "--model", &model, "--in", &noisy, "--out", &out, "--task", "tts"]),
        2
    );
    assert_eq!(
        cli(&["enhance", "--model", &noisy, "--in", &noisy, "--out", &out]),
        2
    );

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "colour=red\n").unwrap();
    assert_eq!(
        cli(&[
            "--config",
            &p(&bad),
            "enhance",
            "--model",
            &model,
            "--in",
            &noisy,
            "--out",
            &out
        ]),
        2
    );

    let status = Command::new(env!("CARGO_BIN_EXE_warpmask"))
        .arg("--nope")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
}

#[test]
fn corpus_train_sweep_eval() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    assert_eq!(
        cli(&[
            "synth-corpus",
            "--out",
            &p(&corpus),
            "--num-clean",
            "3",
            "--clean-duration",
            "1",
            "--snrs",
            "0"
        ]),
        0
    );
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "fft_size=64\nhop=32\nhidden=2\ncontext=1\nlayers=1\nepochs=1\nminibatch=2\nsegment_s=0.5\n",
    )
    .unwrap();
    let model = dir.path().join("tiny.model");
    let manifest = corpus.join("manifest.tsv");
    assert_eq!(
        cli(&[
            "--config",
            &p(&cfg),
            "train",
            "--manifest",
            &p(&manifest),
            "--out",
            &p(&model),
            "--alpha",
            "1"
        ]),
        0
    );
    let csv = dir.path().join("sweep.csv");
    assert_eq!(
        cli(&[
            "sweep",
            "--model",
            &p(&model),
            "--manifest",
            &p(&manifest),
            "--gammas",
            "0,1",
            "--snrs",
            "-5,10",
            "--out",
            &p(&csv)
        ]),
        0
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "snr_db,gamma,seg_snr_db,si_sdr_db,lsd_db,mask_mse,n_utts"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("-5,0,") && lines[1].ends_with(",6"));

    let clean = p(&corpus.join("clean_000.wav"));
    assert_eq!(cli(&["eval", "--ref", &clean, "--in", &clean]), 0);
}
