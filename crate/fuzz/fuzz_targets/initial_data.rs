#![no_main]

use libfuzzer_sys::fuzz_target;
use sktk::config::InitialSpec;
use sktk::grid::Grid;

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let m = 2 + usize::from(data[0] % 64);
    let n = 1 + usize::from(data[1] % 4);
    let Ok(spec) = serde_json::from_slice::<InitialSpec>(&data[2..]) else {
        return;
    };
    let Ok(grid) = Grid::new(m) else {
        return;
    };
    if let Ok(u) = spec.nodes(grid, n) {
        assert_eq!(u.dim(), (n, m));
        if spec.check_positive(m, n).is_ok() {
            assert!(u.iter().all(|&v| v > 0.0));
        }
    }
});
