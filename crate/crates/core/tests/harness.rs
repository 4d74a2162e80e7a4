use wmkv_core::harness::{
    run_limit_ladder, run_n_sweep, run_sweep, verify_outputs, write_ladder, write_sweep, Axis,
    ExperimentConfig, FunctionSpec, GammaChoice, Manifest, RuntimeInfo, L2_LABEL,
};
use wmkv_core::particles::WeightLaw;

fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.grid.n = 64;
    c.time.horizon = 0.2;
    c.time.dt = 5e-3;
    c.sweep.replications = 3;
    c.sweep.epsilon = 0.5;
    c.sweep.cutoff = 2.0;
    c.sweep.kappa = 8;
    c.sweep.n = 40;
    c.sweep.n_ref = 200;
    c.sweep.modes = 2;
    c.noise.m_ref = 8;
    c.sweep.axis = Axis::N;
    c.sweep.values = vec![20.0, 40.0];
    c.sweep.ladder.n = vec![20, 40];
    c.sweep.ladder.epsilon = vec![1.0, 0.5];
    c.sweep.ladder.cutoff = vec![1.0, 2.0];
    c.sweep.ladder.kappa = vec![4, 8];
    c.sweep.ladder.modes = vec![1, 2];
    c
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let c = small();
    let a = in_pool(1, || run_sweep(&c).unwrap());
    let b = in_pool(3, || run_sweep(&c).unwrap());
    assert_eq!(a.table.to_csv(), b.table.to_csv());
    assert_eq!(a.log, b.log);
    assert_eq!(a.observables, b.observables);
    let mut d = c.clone();
    d.sweep.seed += 1;
    assert_ne!(run_sweep(&d).unwrap().table.to_csv(), a.table.to_csv());
}

#[test]
fn single_n_sweep_has_one_value() {
    let mut c = small();
    c.sweep.values = vec![30.0];
    let r = run_n_sweep(&c).unwrap();
    let fns = c.sweep.test_functions.len();
    assert_eq!(r.table.rows.len(), fns);
    assert!(r.table.rows.iter().all(|row| row.axis_value == "30" && row.replications == 3));
    let again = run_n_sweep(&c).unwrap();
    assert_eq!(r.table.to_csv(), again.table.to_csv());
}

#[test]
fn test_function_order_permutes_columns() {
    let c = small();
    let mut d = c.clone();
    d.sweep.test_functions.reverse();
    let a = run_sweep(&c).unwrap().table;
    let b = run_sweep(&d).unwrap().table;
    assert_eq!(a.rows.len(), b.rows.len());
    for f in a.test_fns() {
        assert_eq!(a.series(&f), b.series(&f), "{f}");
    }
    assert_eq!(a.test_fns().into_iter().rev().collect::<Vec<_>>(), b.test_fns());
}

#[test]
fn unforced_ladder_collapses() {
    let mut c = small();
    c.potentials.q = FunctionSpec::named("zero");
    c.initial.weights = WeightLaw::Constant { value: 1.0 };
    // the reference ensemble is bypassed because no weight can reach the cutoff
    assert_eq!(c.sweep.gamma_source, GammaChoice::Ensemble);
    c.sweep.ladder.modes.clear();
    let r = run_limit_ladder(&c).unwrap();
    assert!(r.self_tolerance > 0.0);
    for t in &r.axes {
        if t.axis == "N" {
            continue;
        }
        for row in &t.rows {
            assert!(row.mean_gap < r.self_tolerance, "{} {} {}", t.axis, row.test_fn, row.mean_gap);
        }
    }
    for row in r.overall.rows.iter().filter(|r| !r.axis_value.starts_with("N_")) {
        assert!(row.mean_gap < r.self_tolerance, "{} {}", row.axis_value, row.mean_gap);
    }
    assert_eq!(r.coherence_violations, 0);
    assert!(r.axis(Axis::Modes).is_none());
    assert!(r.axis(Axis::Eps).unwrap().test_fns().contains(&L2_LABEL.to_string()));
}

#[test]
fn manifests_record_and_replay() {
    let c = small();
    let dir = tempfile::tempdir().unwrap();
    let rt = RuntimeInfo {
        threads: 1,
        wall_seconds: 0.0,
    };
    let r = run_sweep(&c).unwrap();
    let m = write_sweep(dir.path(), &c, &r, &rt).unwrap();
    assert!(verify_outputs(dir.path(), &m).is_empty());
    let back = Manifest::read(dir.path().join("manifest_simulate.txt")).unwrap();
    assert_eq!(back, m);
    let replayed = back.config().unwrap();
    assert_eq!(replayed, c);
    let dir2 = tempfile::tempdir().unwrap();
    let rt2 = RuntimeInfo {
        threads: 4,
        wall_seconds: 9.0,
    };
    let m2 = write_sweep(dir2.path(), &replayed, &run_sweep(&replayed).unwrap(), &rt2).unwrap();
    assert_eq!(m2.comparable(), m.comparable());
    assert_ne!(m2, m);
    std::fs::write(dir2.path().join("gaps.csv"), "tampered").unwrap();
    assert_eq!(verify_outputs(dir2.path(), &m), vec!["gaps.csv".to_string()]);

    let mut lc = c.clone();
    lc.sweep.ladder.n = vec![20];
    lc.sweep.replications = 2;
    let lr = run_limit_ladder(&lc).unwrap();
    let lm = write_ladder(dir.path(), &lc, &lr, &rt).unwrap();
    for key in ["self_tolerance", "coherence_violations", "config_hash"] {
        assert!(lm.get(key).is_some(), "{key}");
    }
    let residuals: Vec<f64> = lm
        .entries()
        .iter()
        .filter(|(k, _)| k.ends_with(".mass_residual"))
        .map(|(_, v)| v.parse().unwrap())
        .collect();
    assert!(!residuals.is_empty());
    assert!(residuals.iter().all(|&r| r <= 1e-10), "{residuals:?}");
    let gaps = std::fs::read_to_string(dir.path().join("gaps.csv")).unwrap();
    assert!(gaps.starts_with("axis,axis_value,test_fn,mean_gap,stderr,replications\n"));
    for a in ["N", "eps", "M", "kappa", "m"] {
        assert!(dir.path().join(format!("gaps_{a}.csv")).exists(), "{a}");
    }
}
