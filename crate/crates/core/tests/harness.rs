use std::fs;

use uav_aircomp::error::Error;
use uav_aircomp::harness::{evaluate, read_metrics, sweep, train, Checkpoint, RunConfig};
use uav_aircomp::sac::UpdateCadence;

/// A few short episodes, enough to exercise every update path.
fn tiny() -> RunConfig {
    let mut c = RunConfig::desk();
    c.scenario.num_slots = 10;
    c.scenario.mission_time = 10.0;
    c.scenario.area_side = 200.0;
    c.scenario.end = [150.0, 150.0];
    c.sac.episodes = 4;
    c.sac.batch_size = 8;
    c.sac.hidden = vec![16, 16];
    c
}

#[test]
fn table_one_defaults() {
    let c = RunConfig::table_one();
    assert_eq!(c.sac.gamma, 0.9);
    assert_eq!(c.sac.batch_size, 64);
    assert_eq!(c.sac.lr_q, 1e-4);
    assert_eq!(c.sac.lr_pi, 1e-4);
    assert_eq!(c.sac.buffer_capacity, 1_000_000);
    assert_eq!(c.sac.episodes, 4000);
    assert_eq!(c.solver.tol, 0.001);
    assert_eq!(c.solver.gamma, 0.015);
    assert_eq!(c.channel.noise_dbm, -95.0);
    assert_eq!(c.channel.params().noise_power, 10f64.powf(-12.5));
    assert_eq!(c.scenario.uav_altitude, 100.0);
    assert_eq!(c.scenario.v_max, 30.0);
    assert_eq!(c.scenario.mission_time, 60.0);
    assert_eq!(c.scenario.slot_length(), 1.0);
    assert_eq!((c.limits.p_max, c.limits.pb_max), (0.2, 0.05));
    assert_eq!(c.channel.carrier_freq_hz, 2e9);
    assert_eq!((c.channel.env_a, c.channel.env_b), (9.613, 0.158));
    assert_eq!((c.channel.loss_los_db, c.channel.loss_nlos_db), (1.0, 20.0));
    assert_eq!((c.scenario.num_users, c.scenario.num_sensors), (15, 36));
}

#[test]
fn desk_profile_shape() {
    let c = RunConfig::desk();
    assert_eq!((c.scenario.num_users, c.scenario.num_sensors, c.scenario.num_slots), (4, 6, 30));
    assert_eq!(c.sac.episodes, 500);
    assert_eq!(c.sac.buffer_capacity, 100_000);
    assert!(c.violations().is_empty());
    let env = c.env().unwrap();
    assert_eq!(env.state_dim(), 8);
    assert_eq!(env.action_dim(), 6);
}

#[test]
fn training_is_deterministic_and_writes_a_parseable_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let a = train(&cfg, &dir.path().join("a")).unwrap();
    let b = train(&cfg, &dir.path().join("b")).unwrap();
    for f in ["metrics.csv", "checkpoint.json", "config.json", "scenario.json"] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        let y = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    let rows = read_metrics(&dir.path().join("a/metrics.csv")).unwrap();
    assert_eq!(rows, a.metrics);
    assert_eq!(rows.len(), cfg.sac.episodes);
    assert!(rows.iter().any(|r| r.updates > 0));
    let text = fs::read_to_string(dir.path().join("a/metrics.csv")).unwrap();
    assert!(text.starts_with("episode,episode_return,sum_rate,"));
    assert_eq!(b.checkpoint, Checkpoint::load(&dir.path().join("b/checkpoint.json")).unwrap());
    assert_eq!(fs::read_to_string(dir.path().join("a/wall_time.csv")).unwrap().lines().count(), 5);

    let mut other = cfg.clone();
    other.seed = 1;
    let c = train(&other, &dir.path().join("c")).unwrap();
    assert_ne!(c.metrics, a.metrics);
}

#[test]
fn per_episode_cadence_updates_once_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.sac.cadence = UpdateCadence::PerEpisode;
    let r = train(&cfg, dir.path()).unwrap();
    assert!(r.metrics.iter().all(|m| m.updates <= 1));
    assert_eq!(r.metrics.last().unwrap().updates, 1);
}

#[test]
fn greedy_evaluation_is_repeatable_and_finite() {
    let dir = tempfile::tempdir().unwrap();
    let r = train(&tiny(), dir.path()).unwrap();
    let ck = Checkpoint::load(&dir.path().join("checkpoint.json")).unwrap();
    let (rep1, tr1) = evaluate(&ck, r.checkpoint.scenario.clone(), 2).unwrap();
    let (rep2, tr2) = evaluate(&ck, r.checkpoint.scenario.clone(), 2).unwrap();
    assert_eq!(tr1, tr2);
    assert_eq!(tr1[0], tr1[1]);
    assert_eq!(rep1, rep2);
    for v in [rep1.mean_sum_rate, rep1.mean_return, rep1.arrival_pct, rep1.fairness_pct] {
        assert!(v.is_finite());
    }
    assert!((0.0..=100.0).contains(&rep1.arrival_pct));
}

#[test]
fn evaluation_rejects_a_scenario_of_another_shape() {
    let dir = tempfile::tempdir().unwrap();
    let r = train(&tiny(), dir.path()).unwrap();
    let mut sc = tiny();
    sc.scenario.num_users = 5;
    let other = sc.scenario().unwrap();
    assert!(matches!(evaluate(&r.checkpoint, other, 1), Err(Error::Dimension(_))));
}

#[test]
fn aborted_training_keeps_the_finished_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.sac.episodes = 50;
    // Rewards near f64::MAX overflow the squared critic error.
    cfg.rewards.lambda1 = 1e300;
    let err = train(&cfg, dir.path()).unwrap_err();
    let Error::Step { episode, source, .. } = &err else {
        panic!("{err}");
    };
    assert!(matches!(**source, Error::NonFinite(_)), "{err}");
    let rows = read_metrics(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), episode - 1);
    assert!(!dir.path().join("checkpoint.json").exists());
}

#[test]
fn invalid_configs_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.sac.batch_size = 0;
    assert!(matches!(train(&cfg, dir.path()), Err(Error::Config(_))));
    assert!(RunConfig::from_json("{}").is_err());
}

#[test]
fn sweep_has_a_row_per_threshold_and_baseline() {
    let cfg = tiny();
    let gammas = [0.005, 0.01, 0.015, 0.02];
    let rows = sweep(&cfg, &gammas, None).unwrap();
    assert_eq!(rows.len(), gammas.len() * 4);
    for g in gammas {
        assert_eq!(rows.iter().filter(|r| r.gamma == g).count(), 4);
    }
    let line: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == "straight_line_nearest")
        .map(|r| r.sum_rate)
        .collect();
    for w in line.windows(2) {
        assert!(w[1] >= w[0] - 1e-6, "{line:?}");
    }
    assert!(sweep(&cfg, &[0.01], None).is_err());
}
