//! Benchmark fixtures shared by the criterion targets.

use std::f64::consts::PI;

use isospec_core::{Grid, OperatorSpec, Potential, RobinAngles};

pub fn neumann(intervals: usize) -> OperatorSpec {
    OperatorSpec::new(
        Potential::zero(Grid::new(intervals).unwrap()),
        RobinAngles::new(PI / 2.0, PI / 2.0).unwrap(),
    )
}

pub fn parabola(intervals: usize) -> OperatorSpec {
    OperatorSpec::new(
        Potential::from_fn(Grid::new(intervals).unwrap(), |x| x * (PI - x) / 5.0).unwrap(),
        RobinAngles::new(PI / 3.0, 2.0 * PI / 3.0).unwrap(),
    )
}
