#![no_main]

use dlfm::data::{parse_ratings_bytes, Delimiter};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // accepted records must satisfy the parser's own invariants
    if let Ok(triples) = parse_ratings_bytes(data, Delimiter::Tab) {
        for t in triples {
            assert!(t.user_id > 0 && t.item_id > 0);
            assert!((0.5..=5.0).contains(&t.rating));
        }
    }
});
