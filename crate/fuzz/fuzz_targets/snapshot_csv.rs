#![no_main]

use libfuzzer_sys::fuzz_target;
use sktk::output::read_snapshots;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = read_snapshots(data) {
        assert!(table.rows.iter().all(|r| r.u.len() == table.n));
    }
});
