//! Closed-set speaker verification: train an identification model, score
//! each trial by the softmax posterior of the claimed identity (averaged
//! over the utterance's frames), and report the equal error rate.
//!
//!     cargo run --release --example speaker_verification

use pfnet::experiment::config::ExperimentConfig;
use pfnet::experiment::train::train_loop;

fn main() -> pfnet::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.epochs = 10;
    cfg.seed = 5;
    cfg.verification.nontargets_per_target = 5;

    let out = train_loop(&cfg)?;
    let last = out.record.final_report().expect("reports present");
    println!(
        "final FER {:.2}% | CER {:.2}%",
        last.fer_percent, last.cer_percent
    );
    match last.eer_percent {
        Some(eer) => {
            let trials = out.trials.as_ref().map(|t| t.trials.len()).unwrap_or(0);
            println!("EER over {trials} trials: {eer:.2}% (chance would sit near 50%)");
        }
        None => println!("no trial list was generated"),
    }
    Ok(())
}
