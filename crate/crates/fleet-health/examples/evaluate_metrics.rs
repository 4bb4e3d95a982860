//! ROC/AUC with threshold selection and the cumulative gain readouts used
//! to answer "how many failures do we catch if we inspect X% of cars?".
//!
//! Run with: cargo run --example evaluate_metrics

use anyhow::Result;
use fleet_health::metrics::{capture_at, gain_curve, roc_auc, select_threshold};
use rand::Rng;
use rand::SeedableRng;

fn main() -> Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let n = 500;

    // A noisy scorer: failures tend to score higher, with overlap.
    let mut scores = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let failed = rng.gen::<f64>() < 0.15;
        let score: f64 = if failed {
            0.55 + rng.gen_range(-0.35..0.35)
        } else {
            0.35 + rng.gen_range(-0.3..0.3)
        };
        scores.push(score.clamp(0.0, 1.0));
        labels.push(u8::from(failed));
    }

    let roc = roc_auc(&scores, &labels)?;
    println!("AUC: {:.3} over {} threshold groups", roc.auc, roc.points.len() - 1);

    let threshold = select_threshold(&roc);
    let point = roc
        .points
        .iter()
        .find(|p| p.threshold == threshold)
        .unwrap();
    println!(
        "Youden threshold {threshold:.3}: TPR {:.3}, FPR {:.3}",
        point.tpr, point.fpr
    );

    let gain = gain_curve(&scores, &labels)?;
    println!("cumulative gain:");
    for fraction in [0.1, 0.25, 0.5, 0.75] {
        println!(
            "  inspect top {:>3.0}% of the fleet -> capture {:>5.1}% of failures",
            fraction * 100.0,
            capture_at(&gain, fraction) * 100.0
        );
    }
    Ok(())
}
