#![no_main]

use gridee::event_model::{validate, Corpus};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(corpus) = Corpus::from_jsonl_str(text) {
        for s in &corpus.sentences {
            assert!(validate(s, &corpus.schema).is_empty());
        }
        let again = Corpus::from_jsonl_str(&corpus.to_jsonl_string()).expect("re-parse");
        assert_eq!(again, corpus);
    }
});
