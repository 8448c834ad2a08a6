//! Fixed atom-type universe: sixteen elements plus a reserved unknown type.

pub const ELEMENTS: [&str; 16] = [
    "H", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I", "B", "Si", "Se", "Na", "K", "Mg",
];

/// Type ID assigned to any symbol outside [`ELEMENTS`].
pub const UNK_TYPE: usize = ELEMENTS.len();

/// Number of atom types including UNK.
pub const NUM_ATOM_TYPES: usize = ELEMENTS.len() + 1;

pub const UNK_SYMBOL: &str = "X";

pub fn type_of_symbol(symbol: &str) -> usize {
    ELEMENTS
        .iter()
        .position(|e| e.eq_ignore_ascii_case(symbol))
        .unwrap_or(UNK_TYPE)
}

pub fn symbol_of_type(t: usize) -> &'static str {
    ELEMENTS.get(t).copied().unwrap_or(UNK_SYMBOL)
}
