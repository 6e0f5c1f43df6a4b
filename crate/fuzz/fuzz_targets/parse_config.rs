#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = qvi_cli::parse_config(text) {
        // building must report invalid input, never panic
        let p = cfg.problem.build();
        let _ = p.validate();
        let _ = cfg.grid.build();
        let _ = cfg.solver.build();
        let _ = cfg.sim.build(cfg.problem.gamma);
    }
});
