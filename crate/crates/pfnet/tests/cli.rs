//! End-to-end exercises of the command-line surface (in-process).

use pfnet::experiment::cli::run_command;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["pfnet".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    run_command(argv)
}

fn tiny_config_toml(seed: u64) -> String {
    format!(
        r#"
epochs = 2
seed = {seed}
eval_every = 1

[filter]
num_filters = 8
kernel_len = 65
num_deform_points = 2
sample_rate = 2000.0

[head]
conv_layers = 1
conv_channels = 6
conv_kernel = 5
pool_width = 3
dense_layers = 1
dense_width = 24

[optimizer]
batch_size = 32

[data.synth]
n_classes = 4
utterances_per_class = 4
duration_range = [0.25, 0.4]
sample_rate = 2000.0
seed = 77
train_per_class = 3

[frames]
window_ms = 60.0
hop_ms = 30.0
"#
    )
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(run(&["train", "--definitely-not-a-flag"]), 2);
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(run(&["transmogrify"]), 2);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "epochs = \"many\"").unwrap();
    assert_eq!(run(&["train", "--config", cfg.to_str().unwrap()]), 2);
}

#[test]
fn invalid_front_end_exits_2() {
    assert_eq!(run(&["train", "--front-end", "wavelets"]), 2);
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, tiny_config_toml(5)).unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert_eq!(
        run(&[
            "gen-data",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_a.to_str().unwrap()
        ]),
        0
    );
    assert_eq!(
        run(&[
            "gen-data",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_b.to_str().unwrap()
        ]),
        0
    );
    let manifest_a = std::fs::read(out_a.join("manifest.csv")).unwrap();
    let manifest_b = std::fs::read(out_b.join("manifest.csv")).unwrap();
    assert_eq!(manifest_a, manifest_b);
    for entry in std::fs::read_dir(out_a.join("wav")).unwrap() {
        let name = entry.unwrap().file_name();
        let wa = std::fs::read(out_a.join("wav").join(&name)).unwrap();
        let wb = std::fs::read(out_b.join("wav").join(&name)).unwrap();
        assert_eq!(wa, wb, "wav {name:?} differs between runs");
    }
}

#[test]
fn train_zero_epochs_writes_init_checkpoint_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, tiny_config_toml(6)).unwrap();
    let out = dir.path().join("run");
    assert_eq!(
        run(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--epochs",
            "0",
            "--out",
            out.to_str().unwrap(),
        ]),
        0
    );
    assert!(out.join("checkpoint.bin").exists());
    let log = std::fs::read_to_string(out.join("metrics.log")).unwrap();
    assert!(log.starts_with("{\"epoch\":0,"), "log: {log}");
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, tiny_config_toml(7)).unwrap();
    let out = dir.path().join("run");
    assert_eq!(
        run(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let ckpt = out.join("checkpoint.bin");
    assert!(ckpt.exists());
    assert_eq!(
        run(&[
            "eval",
            "--config",
            cfg.to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
        ]),
        0
    );
}

#[test]
fn gradcheck_exits_0_on_correct_build() {
    assert_eq!(run(&["gradcheck"]), 0);
}

#[test]
fn export_filters_writes_both_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, tiny_config_toml(8)).unwrap();
    let out = dir.path().join("filters");
    assert_eq!(
        run(&[
            "export-filters",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--grid",
            "300",
        ]),
        0
    );
    let time_csv = std::fs::read_to_string(out.join("filters_time.csv")).unwrap();
    let freq_csv = std::fs::read_to_string(out.join("filters_freq.csv")).unwrap();
    assert!(time_csv.starts_with("filter_id,tap_index,value"));
    assert!(freq_csv.starts_with("filter_id,f_normalized,magnitude"));
    // 8 filters x 300 grid points + header
    assert_eq!(freq_csv.lines().count(), 8 * 300 + 1);
    // the versioned bank document parses back exactly
    let bank = std::fs::read_to_string(out.join("filterbank.txt")).unwrap();
    let (spec, params) = pfnet::filterbank::parse_filterbank_text(&bank).unwrap();
    assert_eq!(spec.num_filters, 8);
    assert_eq!(params.filters.len(), 8);
}

#[test]
fn toy_four_class_run_reaches_zero_cer() {
    // regression bound pinned from the first successful runs: the desk-scale
    // 4-class corpus reaches CER 0% well within 10 epochs (spec allows 50)
    use pfnet::data::synth::SynthSpec;
    use pfnet::experiment::config::ExperimentConfig;
    use pfnet::experiment::train::train_loop;

    let mut cfg = ExperimentConfig::default();
    cfg.epochs = 10;
    cfg.seed = 4;
    cfg.data.synth = Some(SynthSpec {
        n_classes: 4,
        utterances_per_class: 10,
        train_per_class: 8,
        seed: 4,
        ..SynthSpec::default()
    });
    let out = train_loop(&cfg).unwrap();
    let reached = out
        .record
        .reports
        .iter()
        .find(|r| r.cer_percent == 0.0)
        .map(|r| r.epoch);
    assert!(
        reached.is_some(),
        "CER never reached 0% within {} epochs: {:?}",
        cfg.epochs,
        out.record
            .reports
            .iter()
            .map(|r| (r.epoch, r.cer_percent))
            .collect::<Vec<_>>()
    );
}
