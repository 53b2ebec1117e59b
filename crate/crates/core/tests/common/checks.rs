//! One function per acceptance criterion. Each returns a short summary on
//! success and the first counterexample on failure.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gazewheel_core::calibration::*;
use gazewheel_core::codec::decode_frame;
use gazewheel_core::engine::Engine;
use gazewheel_core::expression::IntentionSet;
use gazewheel_core::model::{BlendShapeVector, ScreenSize, BLENDSHAPE_NAMES};
use gazewheel_core::replay::{compare_golden, replay_text, Speed};

use super::oracle::{wukong_priority, naive_active, ols, raw_expressions};
use super::synth::{held_out, session};
use super::{wukong, data_dir, profile_path, scenario_model};

pub type Outcome = Result<String, String>;

pub fn random_blend(rng: &mut ChaCha8Rng) -> BlendShapeVector {
    let mut values = [0.0; BLENDSHAPE_NAMES.len()];
    values.iter_mut().for_each(|v| *v = rng.gen_range(0.0..=1.0));
    BlendShapeVector::from_array(values).unwrap()
}

pub fn evaluator_equivalence(vectors: usize, seed: u64) -> Outcome {
    let yaml = fs::read_to_string(profile_path("wukong.yaml")).unwrap();
    let raw = raw_expressions(&yaml);
    let profile = wukong();
    let engine = profile.expressions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    for k in 0..vectors {
        let blend = random_blend(&mut rng);
        let values: HashMap<&str, f64> = blend.iter().collect();
        let expected = naive_active(&raw, &values);
        let got: BTreeSet<String> = engine
            .names(engine.eval_intentions(&blend))
            .into_iter()
            .map(String::from)
            .collect();
        if got != expected {
            return Err(format!("vector {k}: engine {got:?}, oracle {expected:?}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 5.0 {
        return Err(format!("{vectors} vectors took {secs:.2} s"));
    }
    Ok(format!("{vectors}/{vectors} vectors agree in {secs:.2} s"))
}

pub fn priority_truth_table() -> Outcome {
    let profile = wukong();
    let engine = profile.expressions();
    let n = engine.len();
    let names: Vec<String> = (0..n as u8)
        .map(|i| engine.name(gazewheel_core::expression::IntentionId(i)).to_string())
        .collect();
    for mask in 0u64..(1 << n) {
        let set = IntentionSet(mask);
        let named: BTreeSet<String> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| names[i].clone()).collect();
        let once = engine.apply_priority_rules(set);
        let got: BTreeSet<String> = engine.names(once).into_iter().map(String::from).collect();
        let expected = wukong_priority(&named);
        if got != expected {
            return Err(format!("{named:?}: engine {got:?}, expected {expected:?}"));
        }
        if engine.apply_priority_rules(once) != once {
            return Err(format!("{named:?}: not idempotent"));
        }
    }
    Ok(format!("{} subsets agree, idempotent", 1u64 << n))
}

/// Random 27x6 regression problems with two informative features.
pub fn ols_problem(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..27).map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let y = rows
        .iter()
        .map(|r| 3.0 * r[0] - 2.0 * r[3] + 0.5 + rng.gen_range(-0.3..0.3))
        .collect();
    (rows, y)
}

pub fn standardized_matrix(rows: &[Vec<f64>]) -> DesignMatrix {
    let raw: Vec<DesignRow> = rows.iter().map(|r| r.clone().try_into().unwrap()).collect();
    let st = Standardization::fit(&raw);
    DesignMatrix::from_rows(&raw.iter().map(|r| st.apply(r)).collect::<Vec<_>>())
}

pub fn lasso_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let exact = LassoOptions { tolerance: 1e-12, max_sweeps: 100_000 };
    let mut worst_ols: f64 = 0.0;
    let mut non_monotone = 0;
    for p in 0..50 {
        let (rows, y) = ols_problem(&mut rng);
        let fit = fit_lasso(&DesignMatrix::from_rows(&rows), &y, 0.0, &exact).map_err(|e| e.to_string())?;
        let (w, b) = ols(&rows, &y);
        let err = (0..6)
            .map(|j| (fit.coefficients[j] - w[j]).abs())
            .fold((fit.intercept - b).abs(), f64::max);
        worst_ols = worst_ols.max(err);
        if err >= 1e-5 {
            return Err(format!("problem {p}: lambda=0 differs from OLS by {err:.2e}"));
        }
        let x = standardized_matrix(&rows);
        let counts: Vec<usize> = default_lambda_grid()
            .iter()
            .map(|&l| fit_lasso(&x, &y, l, &LassoOptions::default()).unwrap().nonzero_count())
            .collect();
        if counts.windows(2).any(|c| c[1] > c[0]) {
            non_monotone += 1;
            if non_monotone == 1 {
                eprintln!("  problem {p}: nonzero counts along grid {counts:?}");
            }
        }
    }
    let mut worst_soft: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(12..40);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let z: Vec<f64> = xs.iter().map(|v| (v - mean) / sd).collect();
        let slope = rng.gen_range(-5.0..5.0);
        let lambda = rng.gen_range(0.0..2.0);
        let y: Vec<f64> = z.iter().map(|v| slope * v + rng.gen_range(-1.0..1.0)).collect();
        let ybar = y.iter().sum::<f64>() / n as f64;
        let rho = z.iter().zip(&y).map(|(a, b)| a * (b - ybar)).sum::<f64>() / n as f64;
        let expected = rho.signum() * (rho.abs() - lambda).max(0.0);
        let fit = fit_lasso(&DesignMatrix::from_columns(vec![z]), &y, lambda, &LassoOptions::default()).unwrap();
        worst_soft = worst_soft.max((fit.coefficients[0] - expected).abs());
    }
    if worst_soft >= 1e-8 {
        return Err(format!("soft-threshold closed form off by {worst_soft:.2e}"));
    }
    if non_monotone > 0 {
        return Err(format!("nonzero count increased along the grid on {non_monotone}/50 problems"));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 10.0 {
        return Err(format!("took {secs:.2} s"));
    }
    Ok(format!(
        "OLS max diff {worst_ols:.1e}, soft-threshold max diff {worst_soft:.1e}, sparsity monotone on 50/50, {secs:.2} s"
    ))
}

pub fn session_error(seed: u64) -> f64 {
    let screen = ScreenSize::new(1920, 1080);
    let model = fit_calibration(&session(seed, 2.0)).unwrap();
    let test = held_out(seed, 200);
    test.iter()
        .map(|s| predict_gaze_point(&model, &s.gaze, &s.face_box, screen).distance(&s.target))
        .sum::<f64>()
        / test.len() as f64
}

pub fn calibration_generalization() -> Outcome {
    let errs: Vec<f64> = (0..50).map(session_error).collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let summary = format!("mean held-out error {mean:.1} px over 50 sessions (worst session {worst:.1} px)");
    if mean < 40.0 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

pub fn replay_scenario(name: &str) -> String {
    let trace = fs::read_to_string(data_dir().join(format!("{name}.jsonl"))).unwrap();
    let model = CalibrationModel::load(&data_dir().join("model.json")).unwrap();
    replay_text(&trace, &wukong(), Some(&model), Speed::Max, None).unwrap().to_text()
}

fn golden(name: &str) -> String {
    fs::read_to_string(data_dir().join(format!("{name}.log"))).unwrap()
}

pub fn eight_for_two() -> Outcome {
    let profile = wukong();
    let exprs = profile.expressions();
    let trace = fs::read_to_string(data_dir().join("eight_for_two.jsonl")).unwrap();
    let allowed: BTreeSet<&str> = ["num4", "num6"].into();
    let mut used = BTreeSet::new();
    for line in trace.lines() {
        if let Some(face) = decode_frame(line).unwrap().face {
            for name in exprs.names(exprs.evaluate(&face.blend)) {
                if !allowed.contains(name) {
                    return Err(format!("trace activates {name}"));
                }
                used.insert(name.to_string());
            }
        }
    }
    let log = replay_scenario("eight_for_two");
    let keys: BTreeSet<&str> = log
        .lines()
        .filter_map(|l| l.split('\t').collect::<Vec<_>>().get(1..3).map(|p| (p[0], p[1])))
        .filter(|(kind, _)| *kind == "key_press" || *kind == "key_down")
        .map(|(_, k)| k)
        .collect();
    let want = ["1", "2", "3", "4", "q", "r", "f", "t"];
    let missing: Vec<&str> = want.iter().copied().filter(|k| !keys.contains(k)).collect();
    if !missing.is_empty() {
        return Err(format!("missing keys {missing:?}"));
    }
    compare_golden(&log, &golden("eight_for_two")).map_err(|e| e.to_string())?;
    Ok(format!("intentions {used:?} produce all 8 keys, golden matches"))
}

pub const DETERMINISM_SCENARIOS: [&str; 4] = ["perspective_change", "cursor_select", "direct_triggers", "wheel_skill"];

pub fn replay_determinism() -> Outcome {
    for name in DETERMINISM_SCENARIOS {
        let first = replay_scenario(name);
        if first != replay_scenario(name) {
            return Err(format!("{name}: two runs differ"));
        }
        compare_golden(&first, &golden(name)).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok("4 scenarios byte-identical across runs and equal to goldens".into())
}

pub fn key_coverage() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_gazewheel"))
        .arg("check-config")
        .arg(profile_path("wukong.yaml"))
        .arg("--require-keys")
        .arg(profile_path("game_keys.txt"))
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let last = stdout.lines().last().unwrap_or("").to_string();
    if out.status.success() && last == "27/27 keys reachable" {
        Ok(last)
    } else {
        Err(format!("exit {:?}: {last}", out.status.code()))
    }
}

/// Random valid frames: runs of named expressions, head and gaze moves,
/// face dropouts, then truncated at a random point.
pub fn fuzz_trace(seed: u64, max_frames: usize) -> String {
    use gazewheel_core::codec::encode_frame;
    use gazewheel_core::model::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palette: [&[(&str, f64)]; 8] = [
        super::NONE,
        super::BROW,
        super::LIP_ROLL,
        super::MOUTH_LEFT,
        super::MOUTH_RIGHT,
        super::JAW_OPEN,
        super::JAW_LEFT,
        super::PUCKER,
    ];
    let mut frames = Vec::new();
    let mut k = 0u64;
    while frames.len() < max_frames {
        let run = rng.gen_range(1..20);
        let absent = rng.gen_bool(0.08);
        let blend = if rng.gen_bool(0.2) {
            random_blend(&mut rng)
        } else {
            BlendShapeVector::from_pairs(palette[rng.gen_range(0..palette.len())].iter().copied()).unwrap()
        };
        let head = HeadPose {
            yaw: rng.gen_range(-40.0..40.0),
            pitch: rng.gen_range(-30.0..35.0),
            roll: rng.gen_range(-30.0..30.0),
        };
        let gaze = GazeAngles {
            yaw: rng.gen_range(-30.0..30.0),
            pitch: rng.gen_range(-20.0..20.0),
        };
        for _ in 0..run {
            let t = k * 1000 / 30;
            k += 1;
            let frame = if absent {
                FeatureFrame::absent(t)
            } else {
                FeatureFrame::present(t, FaceSignals { blend, head, gaze, face_box: FaceBox::default() })
            };
            frames.push(encode_frame(&frame));
        }
    }
    let keep = rng.gen_range(1..=frames.len().min(max_frames));
    frames.truncate(keep);
    frames.iter().map(|l| format!("{l}\n")).collect()
}

/// Keys still down and wheels still open at the end of a rendered log.
pub fn dangling_state(log: &str) -> (BTreeMap<String, i32>, Option<String>) {
    let mut down: BTreeMap<String, i32> = BTreeMap::new();
    let mut open = None;
    for line in log.lines() {
        let parts: Vec<&str> = line.splitn(3, '\t').collect();
        match (parts[1], parts[2]) {
            ("key_down", k) => *down.entry(k.to_string()).or_default() += 1,
            ("key_up", k) => *down.entry(k.to_string()).or_default() -= 1,
            ("note", text) => {
                let words: Vec<&str> = text.split(' ').collect();
                match words[0] {
                    "wheel_open" => open = Some(words[1].to_string()),
                    "wheel_confirm" | "wheel_cancel" => open = None,
                    _ => {}
                }
            }
            _ => {}
        }
    }
    down.retain(|_, n| *n != 0);
    (down, open)
}

pub fn safety_fuzz(traces: u64) -> Outcome {
    let profile = wukong();
    let model = scenario_model();
    for seed in 0..traces {
        let trace = fuzz_trace(seed, 600);
        let log = replay_text(&trace, &profile, Some(&model), Speed::Max, None).unwrap().to_text();
        let (down, open) = dangling_state(&log);
        if !down.is_empty() || open.is_some() {
            return Err(format!("seed {seed}: held {down:?}, open wheel {open:?}"));
        }
    }
    Ok(format!("{traces} fuzzed traces end with no held keys and no open wheel"))
}

pub fn throughput() -> Outcome {
    let profile = wukong();
    let trace = fuzz_trace(0xfeed, 2000);
    let frames: Vec<_> = trace.lines().map(|l| decode_frame(l).unwrap()).collect();
    let mut frames = frames;
    let mut seed = 1;
    while frames.len() < 900 {
        let base = frames.last().map_or(0, |f| f.t_ms + 33);
        for l in fuzz_trace(seed, 900).lines() {
            let mut f = decode_frame(l).unwrap();
            f.t_ms += base;
            frames.push(f);
        }
        seed += 1;
    }
    frames.truncate(900);
    let mut engine = Engine::new(profile, Some(scenario_model()));
    let mut total = 0.0;
    for f in &frames {
        let start = Instant::now();
        std::hint::black_box(engine.step(f));
        total += start.elapsed().as_secs_f64();
    }
    let mean_ms = total * 1000.0 / frames.len() as f64;
    let summary = format!("900 frames, mean step {:.1} us", mean_ms * 1000.0);
    if mean_ms < 1.0 {
        Ok(summary)
    } else {
        Err(summary)
    }
}
