#![no_main]

use dlfm::data::{build_matrix, parse_ratings_bytes, Delimiter};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(triples) = parse_ratings_bytes(data, Delimiter::DoubleColon) {
        if let Ok((matrix, duplicates)) = build_matrix(&triples, None) {
            assert_eq!(matrix.observed_count() + duplicates, triples.len());
        }
    }
});
