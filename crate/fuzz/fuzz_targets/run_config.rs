#![no_main]

use dlfm::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = RunConfig::parse(text) {
        // the resolved form is itself a valid configuration with the same meaning
        let again = RunConfig::parse(&config.resolved()).expect("resolved config parses");
        assert_eq!(again.resolved(), config.resolved());
        let _ = config.validate();
    }
});
