#![no_main]

use jetfield::expr::{parse_expr, parse_tree, Scope};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_tree(text);
    let scope = Scope::with_coords(["x", "y", "w", "lam"]).opaque("f", 2).opaque("g", 1);
    if let Ok(e) = parse_expr(text, &scope) {
        let again = parse_expr(&e.to_string(), &scope).expect("printed expression reparses");
        assert_eq!(again, e);
    }
});
