//! Inputs for the engine benchmarks.

/// A model with `groups` xor/or groups of `width` leaves each under one root,
/// alternating group kinds, plus a chain of implications between group heads.
pub fn grid_model(groups: usize, width: usize) -> String {
    let mut s = String::from("model grid\n\nroot R {\n");
    for g in 0..groups {
        s.push_str(&format!("  optional G{g} {{\n    {} {{\n", if g % 2 == 0 { "xor" } else { "or" }));
        for w in 0..width {
            s.push_str(&format!("      optional L{g}x{w}\n"));
        }
        s.push_str("    }\n  }\n");
    }
    s.push_str("}\n\n");
    for g in 1..groups {
        s.push_str(&format!("constraint K{g} : G{} implies G{g} or L{g}x0\n", g - 1));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parses() {
        let m = varsel_core::parse_model(&grid_model(3, 4)).unwrap();
        assert_eq!(m.len(), 1 + 3 * 5);
        assert_eq!(m.constraints().len(), 2);
    }
}
