//! Assembly sources bundled with the crate.

/// `addi x1, x0, 5` followed by the halting self-loop.
pub const DEMO: &str = include_str!("../programs/demo.s");

/// One instruction of each class (taken and untaken beq), then halt.
pub const TIMING: &str = include_str!("../programs/timing.s");

/// Demand-pacing control loop driving the stub peripherals.
pub const PACEMAKER: &str = include_str!("../programs/pacemaker.s");

/// `(name, source)` for every bundled program.
pub const ALL: [(&str, &str); 3] = [("demo", DEMO), ("timing", TIMING), ("pacemaker", PACEMAKER)];
