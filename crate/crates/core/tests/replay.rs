//! Rebuilds the per-cell option counts from a run's event log and checks
//! them against the simulator's own estimators.

use slicesub::config::ScenarioConfig;
use slicesub::grid::NUM_CELLS;
use slicesub::sim::{self, EventKind};

fn small(seed: u64) -> (ScenarioConfig, sim::SimResult) {
    let mut cfg = ScenarioConfig::default();
    cfg.network.users_per_cell = 12;
    cfg.run.warmup_s = 600.0;
    cfg.run.duration_s = 4_000.0;
    cfg.run.event_log = true;
    let r = sim::run(&cfg, seed).unwrap();
    (cfg, r)
}

#[test]
fn log_replay_reproduces_time_averages() {
    let (cfg, r) = small(11);
    let log = r.event_log.as_ref().unwrap();
    let options = cfg.num_nsts() + 1;
    let users = cfg.total_users();
    let mut state: Vec<Option<(usize, usize)>> = vec![None; users];
    let mut counts = vec![vec![0i64; options]; NUM_CELLS];
    let mut area = vec![vec![0.0; options]; NUM_CELLS];
    let (t0, t1) = (cfg.run.warmup_s, cfg.run.duration_s);
    let mut last = t0;
    for e in log {
        let now = e.time.clamp(t0, t1);
        if now > last {
            for (a, c) in area.iter_mut().zip(&counts) {
                for (ai, &ci) in a.iter_mut().zip(c) {
                    *ai += (now - last) * ci as f64;
                }
            }
            last = now;
        }
        if let Some((cell, opt)) = state[e.user as usize] {
            counts[cell][opt] -= 1;
        }
        let next = (e.cell.index(), e.option);
        counts[next.0][next.1] += 1;
        state[e.user as usize] = Some(next);
    }
    for (a, c) in area.iter_mut().zip(&counts) {
        for (ai, &ci) in a.iter_mut().zip(c) {
            *ai += (t1 - last) * ci as f64;
        }
    }
    assert!(state.iter().all(Option::is_some));
    for (cell, a) in r.cells.iter().zip(&area) {
        for (avg, integral) in cell.option_averages.iter().zip(a) {
            let batch = integral / (t1 - t0);
            assert!(
                (avg - batch).abs() < 1e-9 * batch.max(1.0),
                "cell {}: {avg} vs {batch}",
                cell.cell
            );
        }
    }
}

#[test]
fn log_is_consistent_with_event_counts() {
    let (_, r) = small(12);
    let log = r.event_log.unwrap();
    let count = |k| log.iter().filter(|e| e.kind == k).count() as u64;
    assert_eq!(count(EventKind::Handover), r.events.handovers);
    assert_eq!(count(EventKind::Measure), r.events.measurements);
    assert_eq!(count(EventKind::PhaseEnd), r.events.phase_ends);
    // the initial decisions are logged as subscriptions but are not events
    let initial = log.iter().filter(|e| e.time == 0.0).count() as u64;
    assert_eq!(log.len() as u64, r.events.total + initial);
    assert!(log.windows(2).all(|w| w[0].time <= w[1].time));
}

#[test]
fn handovers_move_users_between_adjacent_cells_only() {
    let (cfg, r) = small(13);
    let grid = slicesub::grid::Grid::new(cfg.network.isd_m).unwrap();
    let log = r.event_log.unwrap();
    let mut cell = vec![None; cfg.total_users()];
    let mut moves = 0;
    for e in &log {
        let u = e.user as usize;
        if e.kind == EventKind::Handover {
            let from = cell[u].expect("user seen before its first handover");
            assert_ne!(from, e.cell);
            // neighbouring cells are one cell diameter apart at most
            let a = grid.cell(from).center;
            let b = grid.cell(e.cell).center;
            let d = grid.wrapped_displacement(a, b).norm();
            assert!(d < 1.8 * grid.cell_radius(), "jump of {d} m");
            moves += 1;
        } else if let Some(c) = cell[u] {
            assert_eq!(c, e.cell, "user {u} changed cell without a handover");
        }
        cell[u] = Some(e.cell);
    }
    assert!(moves > 0);
}
