use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mosaicgen::image::{load_image, partition_blocks, save_image};
use mosaicgen::synth::{exemplar_pool, reference_image, texture};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mosaicgen"));
    cmd.env_remove("MOSAICGEN_THREADS").env("RUST_LOG", "info");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small but complete inputs: 32×32 reference, 4×4 grid of 16×16 tiles.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    reference: PathBuf,
    pool: PathBuf,
    config: PathBuf,
}

const SMALL_CONFIG: &str = "\
level = 2
scale = 2
steps = 10
train_steps = 1000
beta_start = 0.0001
beta_end = 0.02
parameterization = v
cfg_scale = 7.5
w0 = 5000
gamma = 0.95
blur_sigma = auto
objective = rgb-mse
jacobian = stop-grad
redenoise_after_update = false
adain = true
adain_first = true
noise_mode = consistent
seed = 3
labels = dots
";

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let reference = root.join("reference.png");
    save_image(&reference_image(32, 32, 2), &reference).unwrap();
    let pool = root.join("pool");
    let exemplars = exemplar_pool(8, 16, 16, 4).unwrap();
    for (i, (img, label)) in exemplars.exemplars().iter().zip(exemplars.labels()).enumerate() {
        fs::create_dir_all(pool.join(label)).unwrap();
        save_image(img, pool.join(label).join(format!("{i}.png"))).unwrap();
    }
    let config = root.join("small.conf");
    fs::write(&config, SMALL_CONFIG).unwrap();
    Fixture {
        _dir: dir,
        root,
        reference,
        pool,
        config,
    }
}

fn generate(fx: &Fixture, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "generate",
        "--config",
        s(&fx.config),
        "--ref",
        s(&fx.reference),
        "--pool",
        s(&fx.pool),
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_writes_all_artifacts() {
    let fx = fixture();
    let out = fx.root.join("out");
    let res = generate(&fx, &out, &[]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert!(out.join("mosaic.png").exists());
    for k in 0..16 {
        assert!(out.join(format!("tiles/tile_{k:04}.png")).exists(), "tile {k}");
    }
    let metrics = json(&out.join("metrics.json"));
    for key in ["psnr_32", "ssim_256", "pyramid_e1", "pyramid_e4", "pyramid_sigma"] {
        assert!(metrics[key].is_number(), "{key}");
    }
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["config"]["master_seed"], 3);
    assert_eq!(manifest["config"]["steps"], 10);
    assert_eq!(manifest["seeds"]["tiles"].as_array().unwrap().len(), 16);
    assert_eq!(manifest["details"]["tiles"].as_array().unwrap().len(), 16);
    assert_eq!(load_image(out.join("mosaic.png")).unwrap().shape(), (3, 64, 64));
}

#[test]
fn seeds_reproduce_and_manifest_reruns() {
    let fx = fixture();
    let (a, b, c, d) = (fx.root.join("a"), fx.root.join("b"), fx.root.join("c"), fx.root.join("d"));
    assert_eq!(code(&generate(&fx, &a, &["--seed", "7"])), 0);
    assert_eq!(code(&generate(&fx, &b, &["--seed", "7", "--threads", "3"])), 0);
    assert_eq!(code(&generate(&fx, &c, &["--seed", "8"])), 0);
    let png = |dir: &Path| fs::read(dir.join("mosaic.png")).unwrap();
    assert_eq!(png(&a), png(&b));
    assert_ne!(png(&a), png(&c));

    let manifest = a.join("manifest.json");
    let rerun = run(&[
        "generate",
        "--config",
        s(&manifest),
        "--ref",
        s(&fx.reference),
        "--pool",
        s(&fx.pool),
        "--out",
        s(&d),
    ]);
    assert_eq!(code(&rerun), 0, "{}", stderr(&rerun));
    assert_eq!(png(&a), png(&d));
    // The resolved config written next to the manifest parses back too.
    let conf = a.join("config.conf");
    let again = fx.root.join("e");
    let res = run(&["generate", "--config", s(&conf), "--ref", s(&fx.reference), "--pool", s(&fx.pool), "--out", s(&again)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(png(&a), png(&again));
}

#[test]
fn threads_env_var_is_a_fallback() {
    let fx = fixture();
    let out = fx.root.join("env");
    let res = bin()
        .env("MOSAICGEN_THREADS", "2")
        .args(["generate", "--config", s(&fx.config), "--ref", s(&fx.reference), "--pool", s(&fx.pool), "--out", s(&out)])
        .output()
        .unwrap();
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(json(&out.join("manifest.json"))["details"]["threads"], 2);
}

#[test]
fn config_problems_exit_2() {
    let fx = fixture();
    let broken = fx.root.join("broken.conf");
    fs::write(&broken, SMALL_CONFIG.replace("gamma = 0.95\n", "")).unwrap();
    let res = run(&["generate", "--config", s(&broken), "--ref", s(&fx.reference), "--pool", s(&fx.pool), "--out", s(&fx.root.join("x"))]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("`gamma`"), "{}", stderr(&res));

    fs::write(&broken, SMALL_CONFIG.replace("labels = dots", "labels = clouds")).unwrap();
    let res = run(&["generate", "--config", s(&broken), "--ref", s(&fx.reference), "--pool", s(&fx.pool), "--out", s(&fx.root.join("x"))]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    assert!(stderr(&res).contains("clouds"));

    let res = generate(&fx, &fx.root.join("x"), &["--level", "6"]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    let res = generate(&fx, &fx.root.join("x"), &["--mode", "fuzzy"]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    let res = run(&["generate", "--ref", "/nonexistent.png", "--pool", s(&fx.pool), "--out", s(&fx.root.join("x"))]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    assert_eq!(code(&run(&["generate", "--bogus"])), 2);
}

#[test]
fn classic_self_pool_and_adjust_validation() {
    let dir = tempfile::tempdir().unwrap();
    let reference = reference_image(64, 64, 5);
    let ref_path = dir.path().join("ref.png");
    save_image(&reference, &ref_path).unwrap();
    let reference = load_image(&ref_path).unwrap();
    let pool = dir.path().join("self");
    fs::create_dir_all(&pool).unwrap();
    for (k, block) in partition_blocks(&reference, 2).unwrap().blocks.iter().enumerate() {
        save_image(block, pool.join(format!("b{k:02}.png"))).unwrap();
    }
    let out = dir.path().join("out");
    let res = run(&["classic", "--ref", s(&ref_path), "--pool", s(&pool), "--out", s(&out), "--level", "2", "--tile-size", "16"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(load_image(out.join("mosaic.png")).unwrap(), reference);

    for mode in ["none", "tone", "histogram"] {
        let res = run(&["classic", "--ref", s(&ref_path), "--pool", s(&pool), "--out", s(&out), "--level", "2", "--tile-size", "16", "--mode", mode]);
        assert_eq!(code(&res), 0, "{mode}: {}", stderr(&res));
    }
    let res = run(&["classic", "--ref", s(&ref_path), "--pool", s(&pool), "--out", s(&out), "--adjust", "sepia"]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
}

#[test]
fn classic_logs_every_match() {
    let dir = tempfile::tempdir().unwrap();
    let ref_path = dir.path().join("ref.png");
    save_image(&reference_image(128, 128, 9), &ref_path).unwrap();
    let pool = dir.path().join("pool");
    fs::create_dir_all(&pool).unwrap();
    for i in 0..64 {
        save_image(&texture(i % 4, 32, 32, i as u64), pool.join(format!("t{i:02}.png"))).unwrap();
    }
    let out = dir.path().join("out");
    let res = run(&["classic", "--ref", s(&ref_path), "--pool", s(&pool), "--out", s(&out), "--level", "3", "--tile-size", "32"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let logged = stderr(&res).lines().filter(|l| l.contains("<- pool")).count();
    assert_eq!(logged, 64);
    let manifest = json(&out.join("manifest.json"));
    let matches = manifest["details"]["matches"].as_array().unwrap();
    assert_eq!(matches.len(), 64);
    assert!(matches.iter().all(|m| m["distance"].as_f64().unwrap() >= 0.0 && m["index"].as_u64().unwrap() < 64));
    let uses: u64 = manifest["details"]["usage"].as_array().unwrap().iter().map(|u| u.as_u64().unwrap()).sum();
    assert_eq!(uses, 64);
}

#[test]
fn eval_pairs_and_batches() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    let big = dir.path().join("big.png");
    save_image(&reference_image(64, 64, 1), &a).unwrap();
    save_image(&reference_image(64, 64, 2), &b).unwrap();
    save_image(&reference_image(128, 128, 1), &big).unwrap();

    let out = dir.path().join("m.json");
    let res = run(&["eval", "--ref", s(&a), "--mosaic", s(&a), "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let m = json(&out);
    assert_eq!(m["psnr_64"], 99.0);
    assert!((m["ssim_32"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(m["pyramid_e1"], 0.0);

    let res = run(&["eval", "--ref", s(&a), "--mosaic", s(&big), "--out", s(&out)]);
    assert_eq!(code(&res), 2);
    let res = run(&["eval", "--ref", s(&a), "--mosaic", s(&big), "--out", s(&out), "--downscale"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let batch = dir.path().join("batch");
    fs::create_dir_all(batch.join("ref")).unwrap();
    fs::create_dir_all(batch.join("mosaic")).unwrap();
    for (name, r, m) in [("one.png", &a, &a), ("two.png", &a, &b)] {
        fs::copy(r, batch.join("ref").join(name)).unwrap();
        fs::copy(m, batch.join("mosaic").join(name)).unwrap();
    }
    let report = dir.path().join("batch.json");
    let res = run(&["eval", "--batch", s(&batch), "--out", s(&report)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let r = json(&report);
    assert_eq!(r["count"], 2);
    let pairs = r["pairs"].as_array().unwrap();
    let mean = (pairs[0]["metrics"]["pyramid_e2"].as_f64().unwrap() + pairs[1]["metrics"]["pyramid_e2"].as_f64().unwrap()) / 2.0;
    assert!((r["mean"]["pyramid_e2"].as_f64().unwrap() - mean).abs() < 1e-15);

    fs::copy(&a, batch.join("ref").join("three.png")).unwrap();
    assert_eq!(code(&run(&["eval", "--batch", s(&batch), "--out", s(&report)])), 2);
    assert_eq!(code(&run(&["eval", "--out", s(&report)])), 2);
}

#[test]
fn ablate_counts_rows_and_matches_generate() {
    let fx = fixture();
    let out = fx.root.join("ablate");
    let res = run(&[
        "ablate", "--config", s(&fx.config), "--ref", s(&fx.reference), "--pool", s(&fx.pool),
        "--out", s(&out), "--sweep", "0,5000", "--seeds", "1,2,3",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "w0,seed,e1,e2,e3,e4,psnr,ssim");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 8));
    assert_eq!(fs::read_dir(out.join("cells")).unwrap().count(), 6);

    let single = fx.root.join("single");
    let res = run(&[
        "ablate", "--config", s(&fx.config), "--ref", s(&fx.reference), "--pool", s(&fx.pool),
        "--out", s(&single), "--sweep", "0", "--seed", "4",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(fs::read_to_string(single.join("ablation.csv")).unwrap().lines().count(), 2);
    let gen = fx.root.join("gen");
    assert_eq!(code(&generate(&fx, &gen, &["--w0", "0", "--seed", "4"])), 0);
    assert_eq!(
        load_image(single.join("cells/w0_0_seed_4.png")).unwrap(),
        load_image(gen.join("mosaic.png")).unwrap()
    );
}

#[test]
fn noise_sidecar_and_identity_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("n");
    let res = run(&["noise", "--out", s(&out), "--height", "80", "--width", "80", "--scale", "4", "--seed", "5"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let stats = json(&out.join("stats.json"));
    assert!(stats["fine_pixels"].as_u64().unwrap() >= 100_000);
    assert!(stats["max_block_residual"].as_f64().unwrap() <= 1e-4);
    let var = stats["variance_estimate"].as_f64().unwrap();
    assert!((0.98..=1.02).contains(&var), "{var}");
    assert_eq!(load_image(out.join("fine.png")).unwrap().shape(), (1, 320, 320));

    let lit = dir.path().join("lit");
    assert_eq!(code(&run(&["noise", "--out", s(&lit), "--height", "80", "--width", "80", "--mode", "literal"])), 0);
    let stats = json(&lit.join("stats.json"));
    let raw = stats["raw_variance_estimate"].as_f64().unwrap();
    assert!((raw / (15.0 / 256.0) - 1.0).abs() < 0.02, "{raw}");

    let one = dir.path().join("one");
    assert_eq!(code(&run(&["noise", "--out", s(&one), "--scale", "1", "--channels", "3"])), 0);
    assert_eq!(fs::read(one.join("coarse.png")).unwrap(), fs::read(one.join("fine.png")).unwrap());
    assert_eq!(code(&run(&["noise", "--out", s(&one), "--mode", "exact"])), 2);
}
