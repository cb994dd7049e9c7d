use std::sync::Arc;

use super::*;
use crate::consensus::build_ring;
use crate::objectives::{make_synthetic_five, IsotropicQuadratic, LocalObjective};
use rand::Rng;

fn w1() -> ConsensusMatrix {
    build_ring(5, 0.2).unwrap()
}

fn w2() -> ConsensusMatrix {
    build_ring(5, 0.5).unwrap()
}

fn config(matrix: ConsensusMatrix, spec: CompressorSpec, alpha: f64, iterations: usize) -> RunConfig {
    let objective = make_synthetic_five(3, 7).unwrap();
    RunConfig { iterations, allow_infeasible: true, ..RunConfig::new(matrix, objective, spec, alpha) }
}

#[test]
fn init_sets_first_differential() {
    let cfg = config(w2(), CompressorSpec::Identity, 0.1, 1);
    let e = Engine::init(&cfg, 0).unwrap();
    for (i, node) in e.nodes().iter().enumerate() {
        let g = cfg.objective.local(i).grad(&[0.0; 3]);
        assert!(node.x.iter().chain(&node.y).all(|&v| v == 0.0));
        for (d, g) in node.d.iter().zip(&g) {
            assert_eq!(*d, -0.1 * g);
        }
        assert_eq!(node.z, node.d);
    }
}

#[test]
fn stationary_start_stays_put() {
    let locals: Vec<Arc<dyn LocalObjective>> =
        (0..5).map(|_| Arc::new(IsotropicQuadratic::new(vec![0.0; 2], 1.0)) as Arc<dyn LocalObjective>).collect();
    let obj = GlobalObjective::new(locals).unwrap();
    let cfg = RunConfig { iterations: 20, ..RunConfig::new(w2(), obj, CompressorSpec::sparsifier(0.9).unwrap(), 0.1) };
    let r = run(&cfg).unwrap();
    for row in &r.trials[0].metrics {
        assert!(row.mean_iterate.iter().all(|&v| v == 0.0));
        assert_eq!(row.gap, 0.0);
    }
}

#[test]
fn identity_matches_classic_dgd() {
    for schedule in [StepSchedule::Constant(0.05), StepSchedule::Sublinear { c2: 1e-3, cap: Some(0.05) }] {
        let mut cfg = config(w2(), CompressorSpec::Identity, 0.05, 100);
        cfg.schedule = schedule;
        let reference = classic_dgd(&cfg.matrix, &cfg.objective, schedule, 100);
        let mut e = Engine::init(&cfg, 0).unwrap();
        for (t, expected) in reference.iter().enumerate().skip(1) {
            e.step().unwrap().expect("no divergence");
            for (a, b) in e.stacked_x().iter().flatten().zip(expected.iter().flatten()) {
                assert!((a - b).abs() <= 1e-12, "t={t}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn one_identity_step_from_zero() {
    let cfg = config(w1(), CompressorSpec::Identity, 0.1, 1);
    let mut e = Engine::init(&cfg, 0).unwrap();
    e.step().unwrap();
    for (i, x) in e.stacked_x().iter().enumerate() {
        let g = cfg.objective.local(i).grad(&[0.0; 3]);
        for (a, b) in x.iter().zip(&g) {
            assert_eq!(*a, -0.1 * b);
        }
    }
}

#[test]
fn probes_hold_under_noise() {
    let specs = [
        CompressorSpec::Identity,
        CompressorSpec::sparsifier(0.5).unwrap(),
        CompressorSpec::Ternary,
        CompressorSpec::hybrid(2.0).unwrap(),
    ];
    for spec in specs {
        let mut cfg = config(w2(), spec, 0.02, 100);
        cfg.schedule = StepSchedule::Sublinear { c2: 1e-5, cap: Some(0.02) };
        let mut e = Engine::init(&cfg, 3).unwrap();
        assert!(e.y_consistency_probe().residual == 0.0);
        assert!(e.lyapunov_grad_probe().passes());
        for _ in 0..100 {
            if e.step().unwrap().is_none() {
                break;
            }
            assert!(e.y_consistency_probe().passes(), "{spec}: {:?}", e.y_consistency_probe());
            assert!(e.lyapunov_grad_probe().passes(), "{spec}: {:?}", e.lyapunov_grad_probe());
        }
    }
}

#[test]
fn broadcast_uses_one_realization() {
    let cfg = config(w2(), CompressorSpec::sparsifier(0.5).unwrap(), 0.05, 1);
    let mut e = Engine::init(&cfg, 1).unwrap();
    let before: Vec<NodeState> = e.nodes().to_vec();
    e.step().unwrap();
    let msgs = e.last_messages().to_vec();
    for (i, node) in e.nodes().iter().enumerate() {
        let expect_x: Vec<f64> = before[i].x.iter().zip(&msgs[i].decoded).map(|(a, c)| a + c).collect();
        assert_eq!(node.x, expect_x);
        let mut y = before[i].y.clone();
        for (j, w) in cfg.matrix.support(i) {
            for (yk, c) in y.iter_mut().zip(&msgs[j].decoded) {
                *yk += w * c;
            }
        }
        assert_eq!(node.y, y);
    }
}

#[test]
fn lyapunov_matches_dense_oracle() {
    let cfg = config(w1(), CompressorSpec::Identity, 0.1, 1);
    let mut rng = crate::rng::aux_stream(5, 9);
    let x: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    // dense (I − W ⊗ I_3) built entry by entry
    let n = 15;
    let flat: Vec<f64> = x.concat();
    let mut quad = 0.0;
    for r in 0..n {
        for c in 0..n {
            let (i, a) = (r / 3, r % 3);
            let (j, b) = (c / 3, c % 3);
            let kron = if a == b { cfg.matrix.get(i, j) } else { 0.0 };
            let m = f64::from(u8::from(r == c)) - kron;
            quad += flat[r] * m * flat[c];
        }
    }
    let expect = 0.5 * quad + 0.3 * cfg.objective.stacked_value(&x);
    let got = lyapunov(&x, 0.3, &cfg.matrix, &cfg.objective);
    assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0));

    let v = vec![0.4, -0.2, 0.9];
    let consensual = vec![v.clone(); 5];
    let on = lyapunov(&consensual, 0.1, &cfg.matrix, &cfg.objective);
    assert!((on - 0.1 * cfg.objective.value(&v)).abs() < 1e-12);
    let zero = vec![vec![0.0; 3]; 5];
    assert_eq!(lyapunov(&zero, 0.1, &cfg.matrix, &cfg.objective), 0.1 * cfg.objective.value(&[0.0; 3]));
}

#[test]
fn runs_are_deterministic() {
    let mut cfg = config(w1(), CompressorSpec::hybrid(2.0).unwrap(), 0.05, 60);
    cfg.trials = 4;
    cfg.master_seed = 42;
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a, b);
    let single = run_trial(&cfg, 2).unwrap();
    assert_eq!(single, a.trials[2]);
}

#[test]
fn cum_bits_accounting() {
    let mut cfg = config(w2(), CompressorSpec::Identity, 0.05, 3);
    let per_link = run(&cfg).unwrap();
    cfg.accounting = CostAccounting::BroadcastOnce;
    let once = run(&cfg).unwrap();
    // identity messages cost 32 d bits; the ring has degree 2
    let per_round = 5 * 32 * 3;
    for t in 0..=3u64 {
        assert_eq!(once.trials[0].metrics[t as usize].cum_bits, t * per_round);
        assert_eq!(per_link.trials[0].metrics[t as usize].cum_bits, 2 * t * per_round);
    }
}

#[test]
fn infeasible_snr_is_refused() {
    let mut cfg = config(w1(), CompressorSpec::sparsifier(0.5).unwrap(), 0.1, 10);
    cfg.allow_infeasible = false;
    let err = Engine::init(&cfg, 0).err().expect("refused");
    let msg = err.to_string();
    assert!(msg.contains("η > (1 − λ_N)/(1 + λ_N)"), "{msg}");
    cfg.compressor = CompressorSpec::Ternary;
    assert!(matches!(Engine::init(&cfg, 0), Err(EngineError::SnrInfeasible { .. })));
    cfg.compressor = CompressorSpec::sparsifier(0.8).unwrap();
    assert!(Engine::init(&cfg, 0).is_ok());
}

#[test]
fn node_count_must_match() {
    let cfg = config(build_ring(4, 0.5).unwrap(), CompressorSpec::Identity, 0.1, 1);
    assert!(matches!(cfg.validate(), Err(EngineError::NodeMismatch { matrix: 4, objective: 5 })));
}

#[test]
fn divergence_is_marked_and_padded() {
    let cfg = RunConfig { trials: 2, ..config(w1(), CompressorSpec::Identity, 5.0, 50) };
    let r = run(&cfg).unwrap();
    assert!(r.any_diverged());
    let trial = &r.trials[0];
    let at = trial.diverged_at.unwrap();
    assert_eq!(trial.metrics.len(), at);
    assert_eq!(r.summary.len(), 51);
    assert_eq!(r.last().gap.mean, trial.gap_ceiling);
}

#[test]
fn sublinear_schedule() {
    let s = StepSchedule::Sublinear { c2: 8.0, cap: Some(1.5) };
    assert_eq!(s.alpha(1), 1.5);
    assert!((s.alpha(8) - 1.0).abs() < 1e-15);
    let mut prev = f64::INFINITY;
    for t in 1..100 {
        assert!(s.alpha(t) > 0.0 && s.alpha(t) <= prev);
        prev = s.alpha(t);
    }
    assert!(StepSchedule::Constant(0.0).validate().is_err());
}
