//! Word-addressed memory arrays with per-byte error-correcting codes and
//! taint tracking at 64-byte granularity.
//!
//! Each byte is protected by a Hamming(12,8) code: four parity bits computed
//! over the byte, stored alongside the data. The code has minimum distance 3,
//! so a single flipped bit (data or parity) is locatable and any two flipped
//! bits produce a nonzero syndrome. Two checking modes exist:
//!
//! * [`EccMode::DetectDouble`] — never correct; any nonzero syndrome is a
//!   fault. Guarantees detection of all single and double bit flips.
//! * [`EccMode::CorrectSingle`] — repair single-bit errors in place of the
//!   returned value (the stored word is left untouched); syndromes that name
//!   no valid code position are faults. A double flip may alias to a valid
//!   single-bit correction in this mode; that is inherent to the code.
//!
//! Taint marks survive until an explicit region clear, independent of later
//! writes to the same granule.

use serde::{Deserialize, Serialize};

/// Checking mode for the per-byte code.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EccMode {
    #[default]
    #[serde(rename = "detect")]
    DetectDouble,
    #[serde(rename = "correct")]
    CorrectSingle,
}

/// Outcome of checking one stored byte against its parity nibble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteCheck {
    Clean,
    Corrected(u8),
    Fault,
}

/// Outcome of checking one stored word (all four bytes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordCheck {
    Clean,
    Corrected(u32),
    Fault,
}

// Codeword positions 1..=12: parity bits sit at the power-of-two positions
// 1, 2, 4, 8; data bits d0..d7 fill positions 3, 5, 6, 7, 9, 10, 11, 12.
const DATA_POSITIONS: [u8; 8] = [3, 5, 6, 7, 9, 10, 11, 12];

/// Compute the 4-bit parity nibble for a byte (even parity per group).
pub fn ecc_encode(byte: u8) -> u8 {
    let mut nibble = 0u8;
    for (pi, pp) in [1u8, 2, 4, 8].iter().enumerate() {
        let mut parity = 0u8;
        for (di, dp) in DATA_POSITIONS.iter().enumerate() {
            if dp & pp != 0 {
                parity ^= (byte >> di) & 1;
            }
        }
        nibble |= parity << pi;
    }
    nibble
}

/// Check one byte against its stored parity nibble.
pub fn ecc_decode(byte: u8, parity: u8, mode: EccMode) -> ByteCheck {
    let syndrome = ecc_encode(byte) ^ (parity & 0xF);
    if syndrome == 0 {
        return ByteCheck::Clean;
    }
    match mode {
        EccMode::DetectDouble => ByteCheck::Fault,
        EccMode::CorrectSingle => {
            if let Some(di) = DATA_POSITIONS.iter().position(|&dp| dp == syndrome) {
                ByteCheck::Corrected(byte ^ (1 << di))
            } else if syndrome.is_power_of_two() {
                // The flip hit a parity bit; the data byte is intact.
                ByteCheck::Corrected(byte)
            } else {
                // 13, 14, 15 name no codeword position.
                ByteCheck::Fault
            }
        }
    }
}

/// Taint granule size in bytes.
pub const GRANULE_BYTES: u32 = 64;

/// Bit to flip when injecting a fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultTarget {
    /// One of the 32 data bits of the word.
    Data,
    /// One of the 16 stored parity bits (4 per byte, byte-major).
    Parity,
}

/// A flat array of 32-bit words with stored parity and taint marks.
///
/// Offsets are byte offsets from the start of the array and must be
/// word-aligned; sizes are fixed at construction.
#[derive(Debug, Clone)]
pub struct MemoryArray {
    words: Vec<u32>,
    /// One parity nibble per byte, packed 4 nibbles per word, byte-major
    /// from the least significant byte.
    parity: Vec<u16>,
    taint: Vec<bool>,
    size: u32,
}

impl MemoryArray {
    /// `size` in bytes; must be a positive multiple of the taint granule.
    pub fn new(size: u32) -> Self {
        assert!(size > 0 && size.is_multiple_of(GRANULE_BYTES));
        let words = size as usize / 4;
        Self {
            words: vec![0; words],
            parity: vec![0; words],
            taint: vec![false; size as usize / GRANULE_BYTES as usize],
            size,
        }
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    fn index(&self, offset: u32) -> usize {
        debug_assert!(offset.is_multiple_of(4), "unaligned offset {offset:#x}");
        debug_assert!(offset < self.size, "offset {offset:#x} out of bounds");
        offset as usize / 4
    }

    /// Store a word and its freshly computed parity.
    pub fn write_word(&mut self, offset: u32, word: u32) {
        let i = self.index(offset);
        self.words[i] = word;
        self.parity[i] = Self::encode_word(word);
    }

    fn encode_word(word: u32) -> u16 {
        let mut p = 0u16;
        for b in 0..4 {
            p |= (ecc_encode((word >> (8 * b)) as u8) as u16) << (4 * b);
        }
        p
    }

    /// Read the stored word with no integrity check.
    pub fn read_raw(&self, offset: u32) -> u32 {
        self.words[self.index(offset)]
    }

    /// Check the stored word byte by byte. Any faulty byte faults the word;
    /// otherwise corrections (if the mode makes any) are folded into the
    /// returned value. The stored word is never modified.
    pub fn check_word(&self, offset: u32, mode: EccMode) -> WordCheck {
        let i = self.index(offset);
        let word = self.words[i];
        let parity = self.parity[i];
        let mut out = 0u32;
        let mut corrected = false;
        for b in 0..4 {
            let byte = (word >> (8 * b)) as u8;
            let nibble = ((parity >> (4 * b)) & 0xF) as u8;
            match ecc_decode(byte, nibble, mode) {
                ByteCheck::Clean => out |= (byte as u32) << (8 * b),
                ByteCheck::Corrected(fixed) => {
                    out |= (fixed as u32) << (8 * b);
                    corrected = true;
                }
                ByteCheck::Fault => return WordCheck::Fault,
            }
        }
        if corrected {
            WordCheck::Corrected(out)
        } else {
            WordCheck::Clean
        }
    }

    /// Flip one stored bit without updating parity, as radiation or a glitch
    /// would.
    pub fn inject_fault(&mut self, offset: u32, target: FaultTarget, bit: u8) {
        let i = self.index(offset);
        match target {
            FaultTarget::Data => {
                assert!(bit < 32);
                self.words[i] ^= 1 << bit;
            }
            FaultTarget::Parity => {
                assert!(bit < 16);
                self.parity[i] ^= 1 << bit;
            }
        }
    }

    fn granule(offset: u32) -> usize {
        (offset / GRANULE_BYTES) as usize
    }

    /// Mark the granule containing `offset` as tainted.
    pub fn taint_mark(&mut self, offset: u32) {
        let g = Self::granule(offset);
        self.taint[g] = true;
    }

    pub fn is_tainted(&self, offset: u32) -> bool {
        self.taint[Self::granule(offset)]
    }

    pub fn tainted_granules(&self) -> usize {
        self.taint.iter().filter(|&&t| t).count()
    }

    /// Zero every word, restore parity to match, and clear all taint marks.
    pub fn clear(&mut self) {
        self.words.fill(0);
        self.parity.fill(0);
        self.taint.fill(false);
    }

    /// Zero the words in `[start, end]` and clear taint on every granule the
    /// range overlaps. Offsets are inclusive and word-aligned.
    pub fn clear_range(&mut self, start: u32, end: u32) {
        for off in (start..=end).step_by(4) {
            let i = self.index(off);
            self.words[i] = 0;
            self.parity[i] = 0;
        }
        self.clear_taint_range(start, end);
    }

    /// Clear only the taint marks of granules overlapping `[start, end]`.
    pub fn clear_taint_range(&mut self, start: u32, end: u32) {
        for g in Self::granule(start)..=Self::granule(end) {
            self.taint[g] = false;
        }
    }
}
