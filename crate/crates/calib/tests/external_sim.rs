//! Round-trip check of the external-executable CSV protocol against the
//! in-process toy simulator.

use std::path::PathBuf;

use calib::design_space::{latin_hypercube_unit, unscale};
use calib::eval_pool::{derive_seed, ExternalSimulator, Simulator};
use calib::sim::{generate_observed, loss_mse, toy_parameter_space, toy_simulator, ToySimConfig};

#[test]
fn external_toy_sim_matches_in_process() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ToySimConfig::default();
    let space = toy_parameter_space();
    let observed = generate_observed(&cfg).unwrap();
    let exe = PathBuf::from(env!("CARGO_BIN_EXE_toy-sim"));
    let ext = ExternalSimulator::new(exe, space.clone(), observed.clone(), tmp.path(), None).unwrap();
    let units = latin_hypercube_unit(5, 5, 123).unwrap();
    for (i, u) in units.iter().enumerate() {
        let theta = unscale(u, &space).unwrap();
        let seed = derive_seed(42, i as u64);
        let external = ext.evaluate(&theta, seed).unwrap();
        let series = toy_simulator(&theta, seed, &cfg).unwrap();
        let internal_loss = loss_mse(&observed, &series);
        assert_eq!(external.loss, internal_loss, "theta {i} differs");
    }
}
