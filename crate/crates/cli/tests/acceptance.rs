//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use adtomo_core::ecosim::{build_world, profiles, run_simulation, SimConfig};
use adtomo_core::forest::{feature_importance, train_forest, train_tree, FeatureSubset, ForestParams, Sample};
use adtomo_core::pipeline::{run_pipeline, PipelineConfig};
use adtomo_core::rng::substream;
use adtomo_core::stattest::{chi_square_independence, mean_std, welch_t_test, StatConfig};
use adtomo_core::syncdetect::detect_cookie_sync;
use adtomo_core::tomography::{
    enumerate_blocking_configs, group_documents, h1_similarity_matrix, infer_relationships,
};
use adtomo_core::TrackerId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// independent numerical oracles

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = 64;
    let h = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            simpson(f, x0, x1, f0, fm, f1, (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1), 1e-15, 40)
        })
        .sum()
}

/// Two-sided Student t tail via x = sqrt(df) tan(theta).
fn t_oracle(t: f64, df: f64) -> f64 {
    let f = move |th: f64| th.cos().powf(df - 1.0);
    integrate(&f, (t.abs() / df.sqrt()).atan(), FRAC_PI_2) / integrate(&f, 0.0, FRAC_PI_2)
}

/// Chi-squared upper tail via u = v^2.
fn chi2_oracle(x: f64, k: f64) -> f64 {
    let f = move |v: f64| v.powf(k - 1.0) * (-0.5 * v * v).exp();
    let top = x.sqrt().max(k.sqrt()) + 40.0;
    integrate(&f, x.sqrt(), top) / integrate(&f, 0.0, top)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

// ---------------------------------------------------------------------------

fn statistical_oracles() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_t = 0.0f64;
    let mut worst_chi = 0.0f64;
    let mut stat_ok = true;
    for _ in 0..100 {
        let na = rng.random_range(6..40);
        let nb = rng.random_range(6..40);
        let shift = rng.random_range(-1.0..1.0);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| shift + rng.random_range(-1.0..1.0)).collect();
        let r = welch_t_test(&a, &b).unwrap();
        let var = |s: &[f64]| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            (m, s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (s.len() - 1) as f64)
        };
        let ((ma, va), (mb, vb)) = (var(&a), var(&b));
        let (sa, sb) = (va / na as f64, vb / nb as f64);
        let t = (ma - mb) / (sa + sb).sqrt();
        let df = (sa + sb).powi(2) / (sa * sa / (na - 1) as f64 + sb * sb / (nb - 1) as f64);
        stat_ok &= close(r.statistic, t, 1e-9) && close(r.df, df, 1e-9);
        worst_t = worst_t.max((r.p_value - t_oracle(t, df)).abs());
    }
    for _ in 0..100 {
        let k = rng.random_range(2..=6);
        let a: Vec<u64> = (0..k).map(|_| rng.random_range(30..150)).collect();
        let b: Vec<u64> = (0..k).map(|_| rng.random_range(30..150)).collect();
        let r = chi_square_independence([&a, &b], &StatConfig::default()).unwrap();
        let (ra, rb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
        let n = ra + rb;
        let stat: f64 = (0..k)
            .map(|c| {
                let col = (a[c] + b[c]) as f64;
                let (ea, eb) = (ra * col / n, rb * col / n);
                (a[c] as f64 - ea).powi(2) / ea + (b[c] as f64 - eb).powi(2) / eb
            })
            .sum();
        stat_ok &= close(r.statistic, stat, 1e-9);
        worst_chi = worst_chi.max((r.p_value - chi2_oracle(stat, (k - 1) as f64)).abs());
    }
    let fixture = chi_square_independence([&[50, 10], &[10, 50]], &StatConfig::default()).unwrap();
    let same = [0.3, 0.5, 0.9, 1.4];
    let p_same = welch_t_test(&same, &same).unwrap().p_value;
    let elapsed = start.elapsed();
    verdict(
        stat_ok
            && worst_t < 1e-9
            && worst_chi < 1e-9
            && (fixture.statistic - 53.33).abs() < 0.01
            && p_same == 1.0
            && elapsed < Duration::from_secs(10),
        format!(
            "max |dp| welch {worst_t:.1e}, chi2 {worst_chi:.1e}; fixture chi2 {:.4}; identical p {p_same}; {:.2?}",
            fixture.statistic, elapsed
        ),
    )
}

fn inference_rule_fixture() -> Verdict {
    let mut gains = vec![0.90];
    gains.extend([0.1 / 9.0; 9]);
    let (mean, std) = mean_std(&gains).unwrap();
    let cutoff = mean + std;
    // mean 0.1, population sd sqrt(0.64 / 9)
    let exact = 0.1 + (0.64f64 / 9.0).sqrt();
    let inferred = infer_relationships(&gains, 0.60, 0.60);
    verdict(
        inferred == vec![0] && (cutoff - exact).abs() < 1e-9 && (cutoff - 0.367).abs() < 5e-4,
        format!("cutoff {cutoff:.6}, inferred {inferred:?}"),
    )
}

fn pipeline_config(sim: SimConfig, seed: u64, out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::new(sim).with_seed(Some(seed));
    c.output_dir = Some(out.to_path_buf());
    c
}

fn planted_recovery() -> Verdict {
    let start = Instant::now();
    let (mut p, mut r) = (0.0, 0.0);
    let mut per_seed = Vec::new();
    let seeds = 1..=5u64;
    for seed in seeds.clone() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_pipeline(&pipeline_config(profiles::small(), seed, dir.path())).unwrap();
        p += s.metrics.precision;
        r += s.metrics.recall;
        per_seed.push(format!("{:.2}/{:.2}", s.metrics.precision, s.metrics.recall));
    }
    let n = seeds.count() as f64;
    let (p, r) = (p / n, r / n);
    let elapsed = start.elapsed();
    verdict(
        p >= 0.9 && r >= 0.75 && elapsed < Duration::from_secs(600),
        format!("mean precision {p:.3}, recall {r:.3} (per seed P/R {}); {elapsed:.2?}", per_seed.join(" ")),
    )
}

fn empty_graph_control() -> Verdict {
    let start = Instant::now();
    let mut total = 0usize;
    for seed in 1..=20u64 {
        let dir = tempfile::tempdir().unwrap();
        let s = run_pipeline(&pipeline_config(profiles::empty_graph(), seed, dir.path())).unwrap();
        total += s.metrics.false_positives;
    }
    let mean = total as f64 / 20.0;
    let elapsed = start.elapsed();
    verdict(
        mean <= 1.0 && elapsed < Duration::from_secs(600),
        format!("mean inferred edges per run {mean:.2} over 20 seeds; {elapsed:.2?}"),
    )
}

fn h1_replication() -> Verdict {
    let start = Instant::now();
    let cfg = profiles::three_groups();
    let world = build_world(&cfg, 0).unwrap();
    let personas = world.personas(&cfg.run.personas).unwrap();
    let out = run_simulation(&world, &personas, cfg.run.runs, 7).unwrap();
    let m = h1_similarity_matrix(&group_documents(&out.ad_log, &personas).unwrap()).unwrap();
    let n = m.groups.len();
    let mut ok = n == 3;
    let mut worst_p = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                ok &= m.mean[i][i] > m.mean[i][j];
                let p = m.tests[i][j].map(|t| t.p_value).unwrap_or(1.0);
                worst_p = worst_p.max(p);
            }
        }
    }
    let within: Vec<String> = (0..n).map(|i| format!("{:.3}", m.mean[i][i])).collect();
    let across = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| m.mean[i][j])
        .fold(f64::NEG_INFINITY, f64::max);
    let elapsed = start.elapsed();
    verdict(
        ok && worst_p < 0.05 && elapsed < Duration::from_secs(120),
        format!(
            "within {} vs max across {across:.3}; max p {worst_p:.1e}; {elapsed:.2?}",
            within.join("/")
        ),
    )
}

fn forest_correctness() -> Verdict {
    let params = |trees, depth, features| ForestParams {
        n_trees: trees,
        max_depth: depth,
        features_per_split: features,
        min_leaf: 1,
    };
    let separable = |n: usize, key: usize, seed: u64| -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let f: Vec<bool> = (0..6).map(|_| rng.random_bool(0.5)).collect();
                Sample::new(f.clone(), f[key], format!("p{i}"))
            })
            .collect()
    };

    let train = separable(128, 0, 1);
    let p = params(50, None, FeatureSubset::Sqrt);
    let deterministic = train_forest(&train, &p, 3).unwrap() == train_forest(&train, &p, 3).unwrap();
    let holdout = train_forest(&train, &p, 3).unwrap().accuracy(&separable(64, 0, 2)).unwrap();

    let xor: Vec<Sample> = (0..4)
        .flat_map(|i| (0..3).map(move |k| Sample::new(vec![i & 1 == 1, i & 2 == 2], (i & 1 == 1) ^ (i & 2 == 2), format!("p{i}{k}"))))
        .collect();
    let tree = train_tree(&xor, &params(1, Some(2), FeatureSubset::All), &mut substream(0, &[])).unwrap();
    let xor_ok = xor.iter().all(|s| tree.predict(&s.features).unwrap() == s.label);

    let mut tops = 0;
    let mut worst_sum = 0.0f64;
    for seed in 0..20u64 {
        let key = (seed % 6) as usize;
        let model = train_forest(&separable(96, key, 100 + seed), &p, seed).unwrap();
        let g = feature_importance(&model).gains;
        worst_sum = worst_sum.max((g.iter().sum::<f64>() - 1.0).abs());
        let top = (0..6).max_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap();
        tops += usize::from(top == key);
    }
    verdict(
        deterministic && holdout == 1.0 && xor_ok && worst_sum < 1e-9 && tops == 20,
        format!(
            "deterministic {deterministic}; separable holdout {holdout}; xor depth 2 {xor_ok}; \
             max |sum - 1| {worst_sum:.1e}; key feature on top {tops}/20"
        ),
    )
}

fn sync_oracle() -> Verdict {
    let mut exact = 0;
    for seed in 0..10u64 {
        let cfg = profiles::random_world(1000 + seed);
        let world = build_world(&cfg, seed).unwrap();
        let personas = world.personas(&cfg.run.personas).unwrap();
        let out = run_simulation(&world, &personas, cfg.run.runs, seed).unwrap();
        let expected: BTreeSet<(String, String)> = cfg
            .world
            .sync_pairs
            .iter()
            .map(|p| (p.initiator.clone(), p.receiver.clone()))
            .collect();
        exact += usize::from(detect_cookie_sync(&out.request_log).unwrap().pair_set() == expected);
    }
    verdict(exact == 10, format!("exact recovery on {exact}/10 random worlds"))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn combinatorics_and_determinism() -> Verdict {
    let trackers: Vec<TrackerId> = (0..10).map(|i| TrackerId::new(format!("t{i}"))).collect();
    let configs = enumerate_blocking_configs(&trackers);
    let distinct: BTreeSet<_> = configs.iter().collect();

    let bin = env!("CARGO_BIN_EXE_adtomo");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut ok_exit = true;
    for d in &dirs {
        let status = Command::new(bin)
            .args(["run", "--profile", "small", "--seed", "11", "--out"])
            .arg(d.path())
            .output()
            .unwrap()
            .status;
        ok_exit &= status.success();
    }
    let (a, b) = (files(dirs[0].path()), files(dirs[1].path()));
    let identical = a == b && !a.is_empty();
    verdict(
        configs.len() == 1024 && distinct.len() == 1024 && ok_exit && identical,
        format!(
            "{} configs ({} distinct); two runs exit ok {ok_exit}, {} artifacts byte-identical {identical}",
            configs.len(),
            distinct.len(),
            a.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("statistical oracle equivalence", statistical_oracles),
        ("inference-rule fixture", inference_rule_fixture),
        ("planted-graph recovery (small profile)", planted_recovery),
        ("empty-graph false-positive control", empty_graph_control),
        ("interest-similarity replication", h1_replication),
        ("forest correctness", forest_correctness),
        ("cookie-sync oracle", sync_oracle),
        ("combinatorics and determinism", combinatorics_and_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "criterion {}: {} {name}: {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
