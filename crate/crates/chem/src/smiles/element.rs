use std::collections::HashMap;
use std::fmt;
use std::sync::LazyLock;

/// Chemical element, identified by atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

const SYMBOLS: [&str; 84] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po",
];

static MASSES: LazyLock<HashMap<&'static str, f64>> = LazyLock::new(|| {
    let text = include_str!("../../data/atomic_masses.tsv");
    let mut masses = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(sym), Some(mass)) = (cols.next(), cols.next()) else {
            panic!("malformed atomic mass row: {line:?}");
        };
        let sym = SYMBOLS
            .iter()
            .find(|s| **s == sym)
            .unwrap_or_else(|| panic!("unknown element in mass table: {sym}"));
        masses.insert(*sym, mass.parse().expect("mass column must be numeric"));
    }
    masses
});

impl Element {
    pub const H: Element = Element(1);
    pub const B: Element = Element(5);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);
    pub const BR: Element = Element(35);
    pub const I: Element = Element(53);

    pub fn from_atomic_number(z: u8) -> Option<Element> {
        (1..=SYMBOLS.len() as u8).contains(&z).then_some(Element(z))
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        SYMBOLS
            .iter()
            .position(|s| *s == symbol)
            .map(|i| Element(i as u8 + 1))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        SYMBOLS[self.0 as usize - 1]
    }

    /// Standard atomic weight in daltons.
    pub fn mass(self) -> f64 {
        *MASSES.get(self.symbol()).expect("mass table covers every supported element")
    }

    /// Elements that may appear outside brackets.
    pub fn in_organic_subset(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 9 | 15 | 16 | 17 | 35 | 53)
    }

    /// Elements that have a lowercase aromatic spelling.
    pub fn can_be_aromatic(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 15 | 16 | 33 | 34 | 52)
    }

    /// (period, main-group column 1..=8) for s- and p-block elements through period 6.
    fn main_group(self) -> Option<(u8, u8)> {
        let z = self.0;
        let (period, start) = match z {
            1..=2 => (1, 1),
            3..=10 => (2, 3),
            11..=18 => (3, 11),
            19..=36 => (4, 19),
            37..=54 => (5, 37),
            55..=84 => (6, 55),
            _ => return None,
        };
        if period == 1 {
            return Some((1, if z == 1 { 1 } else { 8 }));
        }
        let offset = z - start;
        let column = match period {
            2 | 3 => offset + 1,
            4 | 5 => match offset {
                0 | 1 => offset + 1,
                2..=11 => return None,
                _ => offset - 9,
            },
            _ => match offset {
                0 | 1 => offset + 1,
                2..=25 => return None,
                _ => offset - 23,
            },
        };
        Some((period, column))
    }

    /// Allowed valences after the charge shifts the element to its isoelectronic
    /// neighbour in the same period. `None` means the element is not checked.
    pub fn allowed_valences(self, charge: i32) -> Option<&'static [u8]> {
        let (period, column) = self.main_group()?;
        let shifted = column as i32 - charge;
        if !(1..=8).contains(&shifted) {
            return Some(&[0]);
        }
        Some(match (shifted, period) {
            (1, _) => &[1],
            (2, _) => &[2],
            (3, _) => &[3],
            (4, _) => &[4],
            (5, 2) => &[3],
            (5, _) => &[3, 5],
            (6, 2) => &[2],
            (6, _) => &[2, 4, 6],
            (7, _) => &[1],
            _ => &[0],
        })
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
