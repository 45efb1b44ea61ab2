//! Anti-entropy convergence on a lossy 16-cell mesh, one line per seed.

use smsc::scenarios::lossy_mesh;
use smsc::sim::Simulation;

fn main() {
    for seed in 1..=20 {
        let mut sim = Simulation::new(lossy_mesh(seed)).unwrap();
        let mut converged_at = None;
        while !sim.is_finished() {
            sim.step();
            let digests: Vec<_> = sim.cells().map(|c| c.digest()).collect();
            let origins = digests[0].len();
            if converged_at.is_none() && origins == 4 && digests.windows(2).all(|w| w[0] == w[1]) {
                converged_at = Some(sim.tick());
            }
        }
        let (report, log) = sim.run();
        println!(
            "seed {seed:2}: converged at tick {:>3}  drops {:>4}  passed {}",
            converged_at.map_or("-".to_string(), |t| t.to_string()),
            log.count("drop"),
            report.passed
        );
    }
}
