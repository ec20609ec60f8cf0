#![no_main]

use jetfield::dsl::{parse_model, Model};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = parse_model(text) {
        let printed = file.to_string();
        assert_eq!(parse_model(&printed).expect("printed model reparses"), file);
        let _ = Model::build(file);
    }
});
