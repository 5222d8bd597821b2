//! The tracking backup from a spread of allowable starts.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rta_core::controllers::BackupTracker;
use rta_core::dynamics::{step_euler, RelativeState};
use rta_core::filters::FilterContext;
use rta_core::safety::{constraint_values, SafetyParameters};
use rta_core::sim::default_config;

fn allowable_starts(sp: &SafetyParameters, count: usize) -> Vec<RelativeState> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut out = Vec::new();
    while out.len() < count {
        let r = rng.gen_range(50.0..9500.0f64);
        let th = rng.gen_range(0.0..TAU);
        let z = rng.gen_range(-0.2..0.2) * r;
        let pos = [r * th.cos(), r * th.sin(), z];
        let speed = sp.speed_limit((r * r + z * z).sqrt()).min(9.0) * rng.gen_range(0.0..0.9);
        let dir = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize() * speed;
        let s = RelativeState::new(pos, dir.into());
        if constraint_values(&s, sp).all_nonnegative() {
            out.push(s);
        }
    }
    out
}

/// Smallest constraint value over `steps` steps, and whether handover happened.
fn run_backup(ctx: &FilterContext, start: RelativeState, steps: usize) -> (f64, bool) {
    let law = ctx.backup_law();
    let mut tracker = BackupTracker::new();
    let mut s = start;
    let mut min = constraint_values(&s, &ctx.safety).min();
    for _ in 0..steps {
        let u = law.control(&s, &mut tracker);
        assert!(u.within(ctx.params.u_max));
        s = step_euler(&s, &u, &ctx.params, ctx.dt);
        min = min.min(constraint_values(&s, &ctx.safety).min());
    }
    (min, tracker.handed_over())
}

#[test]
fn backup_stays_allowable_for_two_periods() {
    let config = default_config();
    let setup = config.setup().unwrap();
    let ctx = &*setup.context;
    let steps = (2.0 * TAU / ctx.params.mean_motion) as usize;
    let mut starts = allowable_starts(&ctx.safety, 60);
    starts.push(config.initial_state);
    for (i, s) in starts.into_iter().enumerate() {
        let (min, handed_over) = run_backup(ctx, s, steps);
        assert!(min >= 0.0, "start {i}: min φ {min}");
        assert!(handed_over, "start {i}: never reached its NMT");
    }
}

#[test]
fn backup_settles_on_its_nmt() {
    let config = default_config();
    let setup = config.setup().unwrap();
    let ctx = &*setup.context;
    let law = ctx.backup_law();
    let mut tracker = BackupTracker::new();
    let mut s = config.initial_state;
    for _ in 0..12_000 {
        let u = law.control(&s, &mut tracker);
        s = step_euler(&s, &u, &ctx.params, ctx.dt);
    }
    let t = tracker.target().unwrap();
    assert!((s.position() - t.state.position()).norm() < 5.0);
}
