//! Per-seed results, their aggregate, and the TSV / table renderings.

use std::fmt::Write as _;
use std::time::Duration;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub encode: Duration,
    /// Centroids, entropy report, augmentation and complementary labels.
    pub select: Duration,
    pub tune: Duration,
    pub predict: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedReport {
    pub seed: u64,
    /// `None` when test scoring was skipped (grid candidates).
    pub test_accuracy: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub pivot_layer: usize,
    pub layer_entropy: Vec<f64>,
    /// Fraction of test items whose complementary label is not their class.
    pub complementary_safety: Option<f64>,
    pub num_augmented: usize,
    pub best_step: usize,
    /// Total tuning loss per evaluated step.
    pub loss_curve: Vec<f64>,
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seeds: Vec<SeedReport>,
    pub mean_test_accuracy: Option<f64>,
    /// Sample standard deviation (n - 1); 0 for a single seed.
    pub std_test_accuracy: Option<f64>,
    pub mean_val_accuracy: Option<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    Some((xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

impl RunReport {
    pub fn from_seeds(seeds: Vec<SeedReport>) -> Self {
        let test: Vec<f64> = seeds.iter().filter_map(|s| s.test_accuracy).collect();
        let val: Vec<f64> = seeds.iter().filter_map(|s| s.val_accuracy).collect();
        let all_test = test.len() == seeds.len();
        let all_val = val.len() == seeds.len();
        RunReport {
            mean_test_accuracy: if all_test { mean(&test) } else { None },
            std_test_accuracy: if all_test { sample_std(&test) } else { None },
            mean_val_accuracy: if all_val { mean(&val) } else { None },
            seeds,
        }
    }

    pub fn to_tsv(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let mut out = String::from(
            "seed\ttest_acc\tval_acc\tpivot_layer\tcomp_safety\tnum_aug\tbest_step\tencode_ms\tselect_ms\ttune_ms\tpredict_ms\n",
        );
        for s in &self.seeds {
            let t = &s.timings;
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
                s.seed,
                opt(s.test_accuracy),
                opt(s.val_accuracy),
                s.pivot_layer,
                opt(s.complementary_safety),
                s.num_augmented,
                s.best_step,
                t.encode.as_secs_f64() * 1e3,
                t.select.as_secs_f64() * 1e3,
                t.tune.as_secs_f64() * 1e3,
                t.predict.as_secs_f64() * 1e3,
            )
            .unwrap();
        }
        writeln!(
            out,
            "mean\t{}\t{}\t\t\t\t\t\t\t\t",
            opt(self.mean_test_accuracy),
            opt(self.mean_val_accuracy)
        )
        .unwrap();
        writeln!(out, "std\t{}\t\t\t\t\t\t\t\t\t", opt(self.std_test_accuracy)).unwrap();
        out
    }

    pub fn to_table(&self) -> String {
        let pct = |x: Option<f64>| x.map_or_else(|| "   n/a".to_string(), |v| format!("{:6.2}", 100.0 * v));
        let mut out = String::new();
        writeln!(out, "seed   test%    val%  pivot  safety%  aug  best_step  tune_ms").unwrap();
        for s in &self.seeds {
            writeln!(
                out,
                "{:<4} {}  {}  {:>5}   {}  {:>3}  {:>9}  {:>7.1}",
                s.seed,
                pct(s.test_accuracy),
                pct(s.val_accuracy),
                s.pivot_layer,
                pct(s.complementary_safety),
                s.num_augmented,
                s.best_step,
                s.timings.tune.as_secs_f64() * 1e3,
            )
            .unwrap();
        }
        writeln!(
            out,
            "test accuracy: {} +/- {} (over {} seeds)",
            pct(self.mean_test_accuracy).trim(),
            pct(self.std_test_accuracy).trim(),
            self.seeds.len()
        )
        .unwrap();
        out
    }
}
