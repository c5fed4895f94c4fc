//! Pretrains a small encoder on a synthetic corpus, fine-tunes it and prints
//! test metrics next to the keyword baseline.
//!
//! ```text
//! CORPUS=planted|negation N=300 SEED=7 EPOCHS=3 LR=1e-3 BATCH=8 \
//!     cargo run --release -p triage-classifier --example desk
//! ```

use std::time::Instant;

use triage_classifier::{fine_tune_from, pretrain_encoder, NoProgress, PretrainConfig, TrainingConfig};
use triage_core::baseline::{train_baseline, BaselineConfig};
use triage_core::corpus::{oversample_minority, split_corpus};
use triage_core::synthetic::{negation_corpus, planted_keyword_corpus};
use triage_core::{evaluate_predictor, Predictor};

fn env<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() {
    let kind: String = env("CORPUS", "planted".to_string());
    let n: usize = env("N", 300);
    let seed: u64 = env("SEED", 7);
    let corpus = match kind.as_str() {
        "negation" => negation_corpus(n, seed),
        _ => planted_keyword_corpus(n, seed),
    };
    let split = split_corpus(corpus, 0.8, seed).unwrap();
    let (train, _) = oversample_minority(split.train.clone(), seed).unwrap();
    let max_len: usize = env("MAXLEN", 64);

    let pre = PretrainConfig {
        steps: env("PSTEPS", 600),
        max_sequence_length: max_len,
        seed,
        ..Default::default()
    };
    let texts: Vec<String> = split.train.iter().map(|e| e.text.clone()).collect();
    let t = Instant::now();
    let (base, report) = pretrain_encoder(&texts, &pre, &mut NoProgress).unwrap();
    println!("pretrain {:.1?}, loss {:?}", t.elapsed(), report.first_and_last());

    let cfg = TrainingConfig {
        epochs: env("EPOCHS", 3),
        learning_rate: env("LR", 1e-3),
        max_sequence_length: max_len,
        batch_size: env("BATCH", 8),
        base_encoder: "tiny".into(),
        seed,
        ..Default::default()
    };
    let t = Instant::now();
    let artifact = fine_tune_from(&train, &base, &cfg, &mut NoProgress).unwrap();
    println!("fine-tune {:.1?}, epoch losses {:?}", t.elapsed(), artifact.metrics().epoch_losses);
    println!("{}", evaluate_predictor(&artifact, &split.test).unwrap());
    let baseline = train_baseline(&train, &BaselineConfig::default()).unwrap();
    println!("{}", evaluate_predictor(&baseline, &split.test).unwrap());

    if env("SHOW", 0) == 1 {
        for e in &split.test {
            let p = artifact.predict(&e.text).unwrap();
            if p.labels != e.labels {
                println!("{} -> {} {:?} | {}", e.labels, p.labels, p.probabilities, e.text);
            }
        }
    }
}
