#![no_main]

use gridee::event_model::Schema;
use gridee::grid_codec::{decode, oracle_decode, RoleStrategy, ScoreGrid, ORACLE_MAX_N};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(grid) = ScoreGrid::from_json(text) else {
        return;
    };
    if grid.event_type > 64 || grid.n > 64 {
        return;
    }
    let Ok(schema) = Schema::numbered(grid.event_type + 1, grid.channels - 2) else {
        return;
    };
    let labels = grid.to_labels();
    for strategy in RoleStrategy::ALL {
        let events = decode(&grid, strategy, &schema);
        for e in &events {
            assert!(e.trigger.end < grid.n);
            assert!(e.arguments.iter().all(|a| a.span.end < grid.n));
        }
        if grid.n <= ORACLE_MAX_N.min(6) {
            let from_labels = decode(&labels, strategy, &schema);
            let oracle = oracle_decode(&labels, strategy, &schema).expect("small grid");
            assert_eq!(from_labels, oracle);
        }
    }
    let back = ScoreGrid::from_json(&grid.to_json()).expect("re-parse");
    assert_eq!(back, grid);
});
