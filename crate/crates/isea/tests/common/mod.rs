//! Independent reference oracles for the acceptance suite.
//!
//! Everything here recomputes results from first principles, structured
//! differently from the engine: scope matching walks bits one at a time,
//! scope enumeration marks per-address bitmaps entry by entry, and the
//! error-code reference manipulates whole 12-bit codewords instead of
//! (byte, parity-nibble) pairs.

/// Masked equality, decided bit by bit: every bit outside the mask must
/// agree between the address and the base.
pub fn masked_match_oracle(addr: u32, base: u32, mask: u32) -> bool {
    for bit in 0..32 {
        let m = 1u32 << bit;
        if mask & m != 0 {
            continue;
        }
        if (addr & m) != (base & m) {
            return false;
        }
    }
    true
}

/// Interval matching with bounds built bit by bit: clearing every mask bit
/// gives the lower bound, setting every mask bit the upper bound.
pub fn range_match_oracle(addr: u32, base: u32, mask: u32) -> bool {
    let mut lo = base;
    let mut hi = base;
    for bit in 0..32 {
        let m = 1u32 << bit;
        if mask & m != 0 {
            lo &= !m;
            hi |= m;
        }
    }
    lo <= addr && addr <= hi
}

/// Per-address membership bitmap over a 16-bit toy address space.
pub struct Bitmap16(Vec<u64>);

impl Bitmap16 {
    pub fn new() -> Self {
        Bitmap16(vec![0; 1 << 10])
    }

    pub fn set(&mut self, addr: u16) {
        self.0[usize::from(addr) >> 6] |= 1 << (addr & 63);
    }

    pub fn get(&self, addr: u16) -> bool {
        self.0[usize::from(addr) >> 6] >> (addr & 63) & 1 == 1
    }
}

impl Default for Bitmap16 {
    fn default() -> Self {
        Self::new()
    }
}

/// Mark every address one (base, mask) scope matches under masked equality,
/// by enumerating the subsets of the mask bits.
pub fn mark_masked(bm: &mut Bitmap16, base: u16, mask: u16) {
    let fixed = base & !mask;
    let mut sub = mask;
    loop {
        bm.set(fixed | sub);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & mask;
    }
}

/// Mark every address one (base, mask) scope matches as an interval, by
/// walking the interval.
pub fn mark_range(bm: &mut Bitmap16, base: u16, mask: u16) {
    for addr in (base & !mask)..=(base | mask) {
        bm.set(addr);
    }
}

// Error-code reference: 12-bit codewords, positions 1..=12, parity bits at
// the power-of-two positions, data bits d0..d7 at the rest in order.
pub const CODE_BITS: u8 = 12;
const PARITY_POSITIONS: [u8; 4] = [1, 2, 4, 8];
const DATA_POSITIONS: [u8; 8] = [3, 5, 6, 7, 9, 10, 11, 12];

/// Build the full codeword for a byte; bit i-1 of the result is position i.
pub fn ref_codeword(byte: u8) -> u16 {
    let mut cw = 0u16;
    for (di, &pos) in DATA_POSITIONS.iter().enumerate() {
        if byte >> di & 1 == 1 {
            cw |= 1 << (pos - 1);
        }
    }
    for &pp in &PARITY_POSITIONS {
        let mut x = 0u16;
        for pos in 1..=CODE_BITS {
            if pos != pp && pos & pp != 0 {
                x ^= cw >> (pos - 1) & 1;
            }
        }
        cw |= x << (pp - 1);
    }
    cw
}

/// Syndrome of a possibly corrupted codeword: the XOR of the positions of
/// all set bits. Zero for every valid codeword; equal to the flipped
/// position after any single flip.
pub fn ref_syndrome(cw: u16) -> u8 {
    let mut s = 0u8;
    for pos in 1..=CODE_BITS {
        if cw >> (pos - 1) & 1 == 1 {
            s ^= pos;
        }
    }
    s
}

/// Split a codeword back into the stored (byte, parity nibble) form.
pub fn ref_split(cw: u16) -> (u8, u8) {
    let mut byte = 0u8;
    for (di, &pos) in DATA_POSITIONS.iter().enumerate() {
        byte |= ((cw >> (pos - 1) & 1) as u8) << di;
    }
    let mut nibble = 0u8;
    for (pi, &pos) in PARITY_POSITIONS.iter().enumerate() {
        nibble |= ((cw >> (pos - 1) & 1) as u8) << pi;
    }
    (byte, nibble)
}
