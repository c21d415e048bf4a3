//! Runs every shipped preset and prints one PASS/FAIL line per criterion.

use std::path::PathBuf;
use std::time::Instant;

use serde_json::Value;
use wignerlab::{execute, ExperimentConfig, RunOutput};

fn preset(name: &str) -> ExperimentConfig {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets").join(format!("{name}.json"));
    ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run_preset(name: &str) -> Result<RunOutput, String> {
    let cfg = preset(name);
    execute(&cfg, cfg.seed.unwrap_or(0)).map_err(|e| format!("{name}: {e}"))
}

struct Outcome {
    pass: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.pass &= ok;
        self.notes.push(if ok { note } else { format!("{note} [FAIL]") });
    }

    /// Summary verdict plus every row with a criterion.
    fn summary(&mut self, name: &str) -> Option<RunOutput> {
        match run_preset(name) {
            Ok(out) => {
                let failed: Vec<String> = out
                    .summary
                    .rows
                    .iter()
                    .filter(|r| r.verdict == Some(wignerlab_core::verify::Verdict::Fail))
                    .map(|r| format!("{} = {:.4e} vs {}", r.statistic, r.value, r.criterion))
                    .collect();
                let ok = out.summary.verdict.passed();
                let mut note = format!("{name} {}", out.summary.verdict);
                if !failed.is_empty() {
                    note = format!("{note} ({})", failed.join("; "));
                }
                self.check(ok, note);
                Some(out)
            }
            Err(e) => {
                self.check(false, e);
                None
            }
        }
    }
}

fn row(out: &RunOutput, statistic: &str) -> Option<f64> {
    out.summary.rows.iter().find(|r| r.statistic == statistic).map(|r| r.value)
}

fn c1() -> Outcome {
    let mut o = Outcome::new();
    if let Some(out) = o.summary("c01_energy_identity") {
        let worst = out.trial_stats.iter().filter(|s| s.statistic == "identity_residual").map(|s| s.value).fold(0.0, f64::max);
        o.check(worst <= 1e-9, format!("worst trial residual {worst:.3e}"));
    }
    o
}

fn c2() -> Outcome {
    let mut o = Outcome::new();
    for name in ["c02_equipartition_gue", "c02_equipartition_goe", "c02_equipartition_twisted"] {
        if let Some(out) = o.summary(name) {
            let (slope, r2) = (row(&out, "slope max deviation"), row(&out, "R² max deviation"));
            match (slope, r2) {
                (Some(s), Some(r2)) => o.check((s + 0.5).abs() <= 0.15 && r2 >= 0.95, format!("slope {s:.4}, R² {r2:.4}")),
                _ => o.check(false, format!("{name}: no fit")),
            }
        }
    }
    o
}

fn c3() -> Outcome {
    let mut o = Outcome::new();
    if let Some(out) = o.summary("c03_gaussian_lemma") {
        let d: &Value = &out.summary.details[0];
        let var = d["diagonal"]["variance"].as_f64().unwrap_or(f64::NAN);
        let ks = d["diagonal"]["ks_distance"].as_f64().unwrap_or(f64::NAN);
        let ks_crit = d["diagonal"]["ks_critical"].as_f64().unwrap_or(f64::NAN);
        let off = d["offdiag_mean"].as_f64().unwrap_or(f64::NAN);
        o.check((var - 1.0).abs() <= 0.05, format!("variance {var:.4}"));
        o.check(ks <= ks_crit, format!("KS {ks:.4} ≤ {ks_crit:.4}"));
        o.check((off - 1.0).abs() <= 0.05, format!("offdiag {off:.4}"));
    }
    o
}

fn single(name: &str) -> Outcome {
    let mut o = Outcome::new();
    o.summary(name);
    o
}

fn c7() -> Outcome {
    let mut o = Outcome::new();
    if let Some(out) = o.summary("c07_overlap") {
        if let Some(s) = out.summary.rows.iter().find(|r| r.statistic.starts_with("slope")) {
            o.check(s.value <= 0.2, format!("slope {:.4}", s.value));
        }
    }
    o
}

fn many(names: &[&str]) -> Outcome {
    let mut o = Outcome::new();
    for name in names {
        o.summary(name);
    }
    o
}

fn csv_bytes(out: &RunOutput) -> Vec<u8> {
    let mut buf = Vec::new();
    wignerlab::output::write_trials_csv(&mut buf, &out.trial_stats).unwrap();
    buf
}

fn c10() -> Outcome {
    let mut o = Outcome::new();
    let mut files = Vec::new();
    for workers in [1, 2, 1, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        match pool.install(|| run_preset("c10_reproducibility")) {
            Ok(out) => files.push(csv_bytes(&out)),
            Err(e) => o.check(false, e),
        }
    }
    let identical = files.len() == 4 && files.windows(2).all(|w| w[0] == w[1]);
    let bytes = files.first().map_or(0, Vec::len);
    o.check(identical, format!("{} runs at 1/2/1/4 workers, {bytes} CSV bytes each, identical: {identical}", files.len()));
    o
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 energy identity", c1),
        ("2 equipartition rate", c2),
        ("3 Gaussian lemma", c3),
        ("4 local law", || single("c04_local_law")),
        ("5 rigidity", || single("c05_rigidity")),
        ("6 observable expectation", || many(&["c06_observable_gue", "c06_observable_goe"])),
        ("7 overlap bound", c7),
        ("8 derivation identities", || many(&["c08_derivation_complex", "c08_derivation_real", "c08_derivation_twisted"])),
        ("9 cumulant identity", || many(&["c09_cumulant_gaussian", "c09_cumulant_rademacher"])),
        ("10 reproducibility", c10),
    ];
    let mut failures = 0;
    for (label, f) in criteria {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!("{} criterion {label} ({secs:.1} s): {}", if o.pass { "PASS" } else { "FAIL" }, o.notes.join(", "));
        if !o.pass {
            failures += 1;
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
