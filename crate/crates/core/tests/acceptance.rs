//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use armt_core::harness::{
    bench_weights, random_tokens, verify_weights, BenchMode, BenchOptions, Precision, VerifyOptions,
};
use armt_core::model::{container, dpfp, grouped_layer_forward, layer_forward, LayerMemory, SegmentActivation};
use armt_core::scheduler::{build_diagonal_schedule, min_groups_oracle, validate_schedule};
use armt_core::tensor::{gemm_into, grouped_gemm, GroupedBuffer, MatRef, Scalar, Tensor};
use armt_core::{run_diagonal, run_sequential, ExecOptions, GroupedWeights, ModelConfig};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

// `!(x <= tol)` is deliberate: NaN must fail.
macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure!(took < limit, "{what} took {took:.2?}, limit {limit:?}");
    Ok(took)
}

fn equivalence() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig::default();
    let w = ok(GroupedWeights::init(&cfg))?;
    let report = ok(verify_weights(&cfg, &w, &VerifyOptions::default()))?;
    let mut worst = (0.0f64, 0.0f64);
    for row in &report.rows {
        let (e32, e64) = (row.rel_error_f32.unwrap(), row.rel_error_f64.unwrap());
        ensure!(e64 <= 1e-12, "f64 error {e64:e} at {} segments", row.segments);
        ensure!(e32 <= 1e-3, "f32 error {e32:e} at {} segments", row.segments);
        if row.segments == 1 {
            ensure!(
                e32 == 0.0 && e64 == 0.0,
                "single segment error not exactly 0: {e32:e} / {e64:e}"
            );
        }
        worst = (worst.0.max(e32), worst.1.max(e64));
    }
    let segs: Vec<usize> = report.rows.iter().map(|r| r.segments).collect();
    ensure!(segs == [1, 2, 4, 8, 16, 32], "rows cover {segs:?}");
    let took = within(Duration::from_secs(60), start, "verify")?;
    Ok(format!(
        "L=8, segments 1..32: max rel error f32 {:e}, f64 {:e} ({took:.1?})",
        worst.0, worst.1
    ))
}

fn schedule_optimality() -> Outcome {
    let start = Instant::now();
    for s in 1..=16 {
        for l in 1..=16 {
            let sched = ok(build_diagonal_schedule(s, l))?;
            let oracle = ok(min_groups_oracle(s, l))?;
            ensure!(
                sched.len() == oracle && oracle == s + l - 1,
                "S={s} L={l}: {} groups, oracle {oracle}",
                sched.len()
            );
            for (g, group) in sched.groups.iter().enumerate() {
                ensure!(
                    group.iter().all(|n| n.segment + n.layer == g),
                    "S={s} L={l}: group {g} holds {group:?}"
                );
            }
            if let Err(v) = validate_schedule(&sched, s, l) {
                return Err(format!("S={s} L={l}: {}", v[0]));
            }
        }
    }
    let took = within(Duration::from_secs(5), start, "sweep")?;
    Ok(format!("256 grids, group count == longest path == S+L-1 ({took:.1?})"))
}

fn small_cfg(layers: usize) -> ModelConfig {
    ModelConfig {
        n_layers: layers,
        d_model: 32,
        n_heads: 4,
        d_ff: 64,
        vocab_size: 50,
        segment_size: 8,
        num_mem_tokens: 2,
        d_mem: 4,
        ..ModelConfig::default()
    }
}

fn step_counts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut seen = Vec::new();
    for _ in 0..6 {
        let (s, l) = (rng.random_range(1..=12), rng.random_range(1..=8));
        let cfg = small_cfg(l);
        let w = ok(GroupedWeights::init(&cfg))?.cast::<f32>();
        let tokens = random_tokens(cfg.vocab_size, s * cfg.segment_size, 1);
        let opts = ExecOptions::with_threads(2);
        let seq = ok(run_sequential(&cfg, &w, &tokens, &opts))?;
        let diag = ok(run_diagonal(&cfg, &w, &tokens, &opts))?;
        ensure!(
            seq.trace.step_count() == s * l,
            "S={s} L={l}: sequential {} steps",
            seq.trace.step_count()
        );
        ensure!(
            diag.trace.step_count() == s + l - 1,
            "S={s} L={l}: diagonal {} steps",
            diag.trace.step_count()
        );
        seen.push(format!("({s},{l})"));
    }
    Ok(format!("(S,L) in {}", seen.join(" ")))
}

/// A key whose feature map has exactly one nonzero entry, a power of two:
/// two adjacent same-sign components `±2^a, ±2^b` and zeros elsewhere.
fn sparse_key() -> impl Strategy<Value = Vec<f64>> {
    (0usize..3, any::<bool>(), -4i32..=4, -4i32..=4).prop_map(|(p, neg, a, b)| {
        let mut k = vec![0.0; 4];
        let sign = if neg { -1.0 } else { 1.0 };
        k[p] = sign * 2f64.powi(a);
        k[p + 1] = sign * 2f64.powi(b);
        k
    })
}

/// Values on a dyadic grid (multiples of 1/8 in [-16, 16]).
fn dyadic_values(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-128i32..=128).prop_map(|n| n as f64 / 8.0), d)
}

fn store_then_read<T: Scalar>(cfg: &ModelConfig, key: &[f64], v1: &[f64], v2: &[f64]) -> Result<(), String> {
    let cast = |x: &[f64]| x.iter().map(|&v| T::from_f64(v)).collect::<Vec<T>>();
    let (key, v1, v2) = (cast(key), cast(v1), cast(v2));
    let mut mem = LayerMemory::<T>::new(cfg);
    ensure!(mem.read_key(&key).iter().all(|&x| x == T::ZERO), "fresh read not zero");
    ok(mem.store(&key, &v1, T::ONE))?;
    ensure!(
        mem.read_key(&key) == v1,
        "first store read back {:?}",
        mem.read_key(&key)
    );
    ok(mem.store(&key, &v2, T::ONE))?;
    ensure!(mem.read_key(&key) == v2, "overwrite read back {:?}", mem.read_key(&key));
    Ok(())
}

fn delta_rule() -> Outcome {
    let cfg = ModelConfig {
        d_model: 8,
        n_heads: 2,
        d_mem: 4,
        dpfp_nu: 3,
        ..ModelConfig::default()
    };
    let weights = ok(GroupedWeights::init(&ModelConfig {
        n_layers: 1,
        ..cfg.clone()
    }))?;
    let lw = ok(weights.layer(0))?;
    let mut runner = TestRunner::new(Config {
        cases: 256,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (sparse_key(), dyadic_values(8), dyadic_values(8), any::<u64>());
    let result = runner.run(&strategy, |(key, v1, v2, seed)| {
        store_then_read::<f64>(&cfg, &key, &v1, &v2).map_err(TestCaseError::fail)?;
        store_then_read::<f32>(&cfg, &key, &v1, &v2).map_err(TestCaseError::fail)?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = Tensor::from_fn(vec![cfg.positions(), cfg.d_model], |_| rng.random_range(-2.0..2.0));
        let mut act = SegmentActivation::new(hidden.clone(), cfg.segment_size, 0).unwrap();
        LayerMemory::<f64>::new(&cfg).retrieve(&lw, &mut act).unwrap();
        prop_assert_eq!(act.hidden(), &hidden);
        Ok(())
    });
    ok(result)?;
    Ok("256 random key/value cases in f32 and f64: exact store, exact overwrite, identity fresh read".into())
}

fn random_member<T: Scalar>(
    cfg: &ModelConfig,
    rng: &mut ChaCha8Rng,
    layer: usize,
    segment: usize,
) -> SegmentActivation<T> {
    let hidden = Tensor::from_fn(vec![cfg.positions(), cfg.d_model], |_| {
        T::from_f64(rng.random_range(-1.0..1.0))
    });
    let mut act = SegmentActivation::new(hidden, cfg.segment_size, segment).unwrap();
    act.layer_cursor = layer;
    act
}

fn grouped_fidelity_in<T: Scalar>(cfg: &ModelConfig, weights: &GroupedWeights<T>) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let l_max = cfg.n_layers;
    for g in 1..=l_max {
        // Members sit at the g highest layers in reverse, like a diagonal.
        let members: Vec<(usize, SegmentActivation<T>)> = (0..g)
            .map(|m| {
                let l = l_max - 1 - m;
                (l, random_member(cfg, &mut rng, l, m))
            })
            .collect();

        let a: Vec<MatRef<T>> = members.iter().map(|(_, act)| act.as_mat()).collect();
        let b: Vec<MatRef<T>> = members
            .iter()
            .map(|&(l, _)| weights.w_gate.member(l).unwrap())
            .collect();
        let out = ok(grouped_gemm(
            &a,
            &b,
            ok(GroupedBuffer::zeros(g, vec![cfg.positions(), cfg.d_ff]))?,
        ))?;
        for m in 0..g {
            let mut want = vec![T::ZERO; cfg.positions() * cfg.d_ff];
            ok(gemm_into(a[m], b[m], &mut want))?;
            ensure!(
                out.member(m) == want.as_slice(),
                "grouped_gemm member {m} of {g} differs"
            );
        }

        let looped: Vec<SegmentActivation<T>> = members
            .iter()
            .map(|(l, act)| layer_forward(cfg, &weights.layer(*l).unwrap(), *l, act.clone()).unwrap())
            .collect();
        let grouped = ok(grouped_layer_forward(cfg, weights, members))?;
        ensure!(grouped == looped, "grouped_layer_forward differs at group size {g}");
    }
    Ok(())
}

fn grouped_fidelity() -> Outcome {
    let cfg = ModelConfig::default();
    let w64 = ok(GroupedWeights::init(&cfg))?;
    grouped_fidelity_in(&cfg, &w64)?;
    grouped_fidelity_in(&cfg, &w64.cast::<f32>())?;
    Ok(format!("group sizes 1..={}, f32 and f64, bitwise", cfg.n_layers))
}

fn determinism() -> Outcome {
    let cfg = ModelConfig::default();
    let w = ok(GroupedWeights::init(&cfg))?.cast::<f32>();
    let tokens = random_tokens(cfg.vocab_size, 12 * cfg.segment_size, 3);
    let base = ok(run_diagonal(&cfg, &w, &tokens, &ExecOptions::with_threads(1)))?;
    for threads in [2, 4, 8] {
        let run = ok(run_diagonal(&cfg, &w, &tokens, &ExecOptions::with_threads(threads)))?;
        ensure!(
            run.logits.data() == base.logits.data(),
            "logits differ at {threads} workers"
        );
    }
    for seed in 0..4 {
        let opts = ExecOptions {
            threads: 4,
            shuffle_seed: Some(seed),
        };
        let run = ok(run_diagonal(&cfg, &w, &tokens, &opts))?;
        ensure!(
            run.logits.data() == base.logits.data(),
            "logits differ under member shuffle {seed}"
        );
    }
    Ok("workers {1,2,4,8} and 4 member permutations: identical bits".into())
}

fn throughput() -> Outcome {
    let cfg = ModelConfig::default();
    let w = ok(GroupedWeights::init(&cfg))?.cast::<f32>();
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    let threads = hw.max(8);
    let opts = BenchOptions {
        seq_lens: vec![64 * cfg.segment_size],
        modes: vec![BenchMode::Sequential, BenchMode::Diagonal],
        threads: vec![threads],
        repeat: 5,
        precision: Precision::F32,
        token_seed: 0,
    };
    let report = ok(bench_weights(&cfg, &w, &opts))?;
    let wall = |mode| report.rows.iter().find(|r| r.mode == mode).unwrap().wall_seconds;
    let (seq, diag) = (wall(BenchMode::Sequential), wall(BenchMode::Diagonal));
    let detail = format!(
        "L=8, S=64, {threads} workers on {hw} hardware thread(s): sequential {seq:.3}s, diagonal {diag:.3}s, speedup {:.2}x",
        seq / diag
    );
    ensure!(diag < seq, "{detail}");
    Ok(detail)
}

fn dpfp_shape() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 300,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (prop::collection::vec(-10.0f64..10.0, 1..40), 1usize..=3);
    ok(runner.run(&strategy, |(x, nu)| {
        let phi = dpfp(&x, nu);
        prop_assert_eq!(phi.len(), 2 * nu * x.len());
        prop_assert!(phi.iter().all(|&v| v >= 0.0));
        let phi32 = dpfp(&x.iter().map(|&v| v as f32).collect::<Vec<_>>(), nu);
        prop_assert!(phi32.len() == phi.len() && phi32.iter().all(|&v| v >= 0.0));
        Ok(())
    }))?;
    let cfg = ModelConfig::default();
    ensure!(cfg.feature_dim() == 6 * cfg.d_mem, "feature_dim {}", cfg.feature_dim());
    Ok("300 random inputs, nu in 1..=3: length 2*nu*d, all components >= 0".into())
}

fn container_round_trip() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let mut files = Vec::new();
    for name in ["a.armt", "b.armt"] {
        let path = dir.path().join(name);
        let status = ok(Command::new(env!("CARGO_BIN_EXE_armt"))
            .args(["init-weights", "--seed", "9", "--out"])
            .arg(&path)
            .status())?;
        ensure!(status.success(), "init-weights exited with {status}");
        files.push(path);
    }
    let (a, b) = (ok(std::fs::read(&files[0]))?, ok(std::fs::read(&files[1]))?);
    ensure!(a == b, "same seed produced different files");

    let (cfg, loaded) = ok(container::load::<f64>(&files[0]))?;
    let fresh = ok(GroupedWeights::init(&cfg))?;
    for ((x, y), name) in loaded
        .tensors()
        .iter()
        .zip(fresh.tensors())
        .zip(armt_core::model::TENSOR_NAMES)
    {
        let same = x.shape() == y.shape() && x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits());
        ensure!(same, "{name} differs after load");
    }
    Ok(format!(
        "{} bytes, byte-identical twice, 16 tensors bitwise after load",
        a.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("1 executor equivalence", equivalence),
        ("2 schedule optimality", schedule_optimality),
        ("3 step counts", step_counts),
        ("4 delta-rule semantics", delta_rule),
        ("5 grouped-compute fidelity", grouped_fidelity),
        ("6 determinism", determinism),
        ("7 throughput direction", throughput),
        ("8 feature-map shape", dpfp_shape),
        ("9 weight-container round trip", container_round_trip),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
