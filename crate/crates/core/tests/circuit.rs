use wallswarm_core::planner::{CircuitConfig, CircuitRunner, CircularRoute};
use wallswarm_core::sim::World;

#[test]
fn circuit_keeps_cycling_without_incident() {
    let mut w = World::with_seed(3);
    let route = CircularRoute::standard(&w, 0.33, 0.67, 250.0).unwrap();
    let mut runner = CircuitRunner::spawn(&mut w, route, CircuitConfig::default(), 3, 3).unwrap();
    let report = runner.run(&mut w, 240.0).unwrap();
    assert!(report.transitions_succeeded > 50, "{report:?}");
    assert_eq!(report.transition_failures, 0);
    assert_eq!(report.collisions, 0);
    assert_eq!(report.transitions_attempted, report.transitions_succeeded);
    assert!(w.overlapping_pairs().is_empty());
    // robots idle only on the tick a transition settles
    let full = 240.0 / 7200.0;
    for r in w.robots() {
        let used = 1.0 - r.battery;
        assert!(used <= full + 1e-9 && used > full * 0.99, "{used}");
    }
}
