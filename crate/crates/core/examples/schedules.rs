//! Checks learning-rate schedules against the convergence conditions.

use lq_explore::learner::{validate_schedules, Schedule, ScheduleSet, ValidationOptions};

fn report(name: &str, sch: &ScheduleSet) {
    let r = validate_schedules(sch, 1_000_000, ValidationOptions::default());
    println!("{name}: {}", if r.all_passed() { "all conditions hold" } else { "violations" });
    for c in &r.checks {
        println!("  {:5} {:36} {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
}

fn main() {
    report("theorem defaults", &ScheduleSet::theorem(1.0, 4.0, 2.0));

    let mut constant_b = ScheduleSet::theorem(1.0, 4.0, 2.0);
    constant_b.b = Schedule::Constant(5.0);
    report("constant b", &constant_b);

    let mut fast_rate = ScheduleSet::theorem(1.0, 4.0, 2.0);
    fast_rate.a_phi = Schedule::power(1.0, 1.0, -2.0);
    fast_rate.a_cov = Schedule::power(1.0, 1.0, -2.0);
    report("a = 1/n^2", &fast_rate);
}
