use freefield::domain::*;

fn main() {
    let spec = DomainSpec::unit_disk();
    let grid = build_grid(&spec, 64).unwrap();
    println!("disk raw sum = {} vs pi = {}", grid.raw_weight_sum, std::f64::consts::PI);
    println!("interior count = {}", grid.num_interior());
    let spec3 = DomainSpec::ball(3, 1.0).unwrap();
    let grid3 = build_grid(&spec3, 24).unwrap();
    println!("ball3 raw = {} vs {}", grid3.raw_weight_sum, 4.0*std::f64::consts::PI/3.0);
    let sq = build_grid(&DomainSpec::unit_square(), 32).unwrap();
    let basis = laplacian_eigenbasis(&sq, 8).unwrap();
    for m in &basis.modes { println!("{:?} mu={}", m.index, m.eigenvalue); }
}
