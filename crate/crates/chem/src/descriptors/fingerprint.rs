use crate::smiles::MolGraph;

use super::DescriptorError;

pub const DEFAULT_WIDTH: usize = 2048;
pub const DEFAULT_RADIUS: u32 = 2;

/// Circular substructure fingerprint folded into a fixed-width bit vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    width: usize,
    radius: u32,
}

impl Fingerprint {
    pub fn empty(width: usize, radius: u32) -> Result<Self, DescriptorError> {
        if !width.is_power_of_two() {
            return Err(DescriptorError::InvalidWidth(width));
        }
        if radius > 4 {
            return Err(DescriptorError::InvalidRadius(radius));
        }
        Ok(Fingerprint { words: vec![0; width.div_ceil(64)], width, radius })
    }

    pub fn from_bits(width: usize, bits: impl IntoIterator<Item = usize>) -> Result<Self, DescriptorError> {
        let mut fp = Self::empty(width, 0)?;
        for b in bits {
            fp.set(b % width);
        }
        Ok(fp)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(|b| self.get(*b))
    }

    /// Little-endian byte image of the bit vector.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(FNV_OFFSET)
    }

    fn bytes(&mut self, data: &[u8]) -> &mut Self {
        for &b in data {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        self
    }

    fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }
}

/// Identifier of every atom environment, grouped by radius (index 0 = the atom alone).
pub(crate) fn environment_ids(g: &MolGraph, radius: u32) -> Vec<Vec<u64>> {
    let mut ids: Vec<u64> = (0..g.atom_count())
        .map(|a| {
            let atom = &g.atoms()[a];
            let mut h = Fnv::new();
            h.bytes(&[
                atom.element.atomic_number(),
                atom.charge as u8,
                g.heavy_degree(a) as u8,
                g.hydrogen_count(a) as u8,
                u8::from(atom.aromatic),
            ])
            .bytes(&atom.isotope.unwrap_or(0).to_le_bytes());
            h.0
        })
        .collect();
    let mut layers = vec![ids.clone()];
    for r in 1..=radius {
        ids = (0..g.atom_count())
            .map(|a| {
                let mut env: Vec<(u8, u64)> = g
                    .neighbors(a)
                    .iter()
                    .map(|&(n, b)| (g.bonds()[b].order.code(), ids[n]))
                    .collect();
                env.sort_unstable();
                let mut h = Fnv::new();
                h.u64(r as u64).u64(ids[a]);
                for (order, id) in env {
                    h.bytes(&[order]).u64(id);
                }
                h.0
            })
            .collect();
        layers.push(ids.clone());
    }
    layers
}

pub fn circular_fingerprint(g: &MolGraph, radius: u32, width: usize) -> Result<Fingerprint, DescriptorError> {
    let mut fp = Fingerprint::empty(width, radius)?;
    for layer in environment_ids(g, radius) {
        for id in layer {
            fp.set((id % width as u64) as usize);
        }
    }
    Ok(fp)
}

/// |a ∧ b| / |a ∨ b|, and 1 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, DescriptorError> {
    if a.width != b.width {
        return Err(DescriptorError::WidthMismatch(a.width, b.width));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    fn fp(s: &str) -> Fingerprint {
        circular_fingerprint(&parse(s).unwrap(), DEFAULT_RADIUS, DEFAULT_WIDTH).unwrap()
    }

    #[test]
    fn methane_sets_a_bit() {
        assert!(fp("C").count_ones() >= 1);
    }

    #[test]
    fn same_graph_same_bits() {
        assert_eq!(fp("CCO"), fp("OCC"));
        assert_eq!(fp("c1ccccc1O").to_bytes(), fp("Oc1ccccc1").to_bytes());
    }

    #[test]
    fn methane_and_benzene_atom_environments_disjoint() {
        // methane: one environment (C, degree 0, 4 H); benzene: one (aromatic c, degree 2, 1 H)
        let m = circular_fingerprint(&parse("C").unwrap(), 0, DEFAULT_WIDTH).unwrap();
        let b = circular_fingerprint(&parse("c1ccccc1").unwrap(), 0, DEFAULT_WIDTH).unwrap();
        assert_eq!(m.count_ones(), 1);
        assert_eq!(b.count_ones(), 1);
        assert_eq!(tanimoto(&m, &b).unwrap(), 0.0);
    }

    #[test]
    fn tanimoto_cases() {
        let x = fp("CC(=O)Nc1ccccc1");
        assert_eq!(tanimoto(&x, &x).unwrap(), 1.0);
        let a = Fingerprint::from_bits(64, [1, 2]).unwrap();
        let b = Fingerprint::from_bits(64, [2, 3]).unwrap();
        assert!((tanimoto(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let c = Fingerprint::from_bits(64, [10]).unwrap();
        assert_eq!(tanimoto(&a, &c).unwrap(), 0.0);
        let e = Fingerprint::empty(64, 0).unwrap();
        assert_eq!(tanimoto(&e, &e).unwrap(), 1.0);
        let w = Fingerprint::empty(128, 0).unwrap();
        assert_eq!(tanimoto(&a, &w), Err(DescriptorError::WidthMismatch(64, 128)));
    }

    #[test]
    fn parameter_checks() {
        let g = parse("C").unwrap();
        assert_eq!(circular_fingerprint(&g, 2, 1000), Err(DescriptorError::InvalidWidth(1000)));
        assert_eq!(circular_fingerprint(&g, 5, 1024), Err(DescriptorError::InvalidRadius(5)));
    }
}
