#![no_main]

use dlfm::solver::Architecture;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(arch) = text.parse::<Architecture>() {
        assert!(arch.widths().windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(arch.to_string().parse::<Architecture>().unwrap(), arch);
    }
});
