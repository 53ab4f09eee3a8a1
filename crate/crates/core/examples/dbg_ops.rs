use freefield::domain::*;
use freefield::fields::{TestFn, TestFnKind};
use freefield::operators::*;

fn main() {
    let grid = build_grid(&DomainSpec::unit_square(), 32).unwrap();
    let q = TestFn::new(&grid, TestFnKind::Quadratic).unwrap();
    let cfg = OperatorConfig::classical(1.0 / 16.0, calibrated_constant(2, 1.0)).unwrap();
    println!("tau = {}", cfg.tau(2));
    match delta_eps(&q, &[0.4, 0.6], &cfg) {
        Ok(v) => println!("delta_eps |z|^2 = {v} (expect 4)"),
        Err(e) => println!("error: {e}"),
    }
    let lin = TestFn::new(&grid, TestFnKind::Coordinate { axis: 0 }).unwrap();
    println!("delta_eps z1 = {:?} (expect 0)", delta_eps(&lin, &[0.45, 0.55], &cfg));
}
