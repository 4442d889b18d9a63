#![no_main]

use gridee::model::Model;
use gridee::neural::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(ckpt) = Checkpoint::from_json_str(text) else {
        return;
    };
    let again = Checkpoint::from_json_str(&ckpt.to_json_string()).expect("re-parse");
    assert_eq!(again.params.len(), ckpt.params.len());
    // Rebuilding a model must either fail cleanly or succeed.
    let _ = Model::from_checkpoint(&ckpt);
});
