//! MSB-first bit I/O with Exp-Golomb codes.

use crate::error::{Error, Result};

#[derive(Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    nbits: u32,
    total: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `n` bits of `v` (n <= 32).
    pub fn put(&mut self, v: u32, n: u32) {
        debug_assert!(n <= 32);
        if n == 0 {
            return;
        }
        self.acc = (self.acc << n) | u64::from(v & (((1u64 << n) - 1) as u32));
        self.nbits += n;
        self.total += u64::from(n);
        while self.nbits >= 8 {
            self.nbits -= 8;
            self.bytes.push((self.acc >> self.nbits) as u8);
        }
        self.acc &= (1u64 << self.nbits) - 1;
    }

    /// Unsigned Exp-Golomb.
    pub fn put_ue(&mut self, v: u32) {
        let code = u64::from(v) + 1;
        let len = 64 - code.leading_zeros();
        self.put(0, len - 1);
        // `code` needs up to 33 bits; emit in two chunks.
        if len > 32 {
            self.put((code >> 32) as u32, len - 32);
            self.put(code as u32, 32);
        } else {
            self.put(code as u32, len);
        }
    }

    /// Signed Exp-Golomb: 0, 1, -1, 2, -2, ... map to 0, 1, 2, 3, 4, ...
    pub fn put_se(&mut self, v: i32) {
        let mapped = if v > 0 { 2 * v as u32 - 1 } else { 2 * v.unsigned_abs() };
        self.put_ue(mapped);
    }

    /// Bits written so far, excluding final padding.
    pub fn bit_len(&self) -> u64 {
        self.total
    }

    /// Pads with zero bits to a byte boundary.
    pub fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.put(0, pad);
        }
        self.bytes
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    fn bit(&mut self) -> Result<u32> {
        let byte = self
            .bytes
            .get(self.pos / 8)
            .ok_or_else(|| Error::CorruptPayload(format!("bitstream truncated at bit {}", self.pos)))?;
        let b = (byte >> (7 - self.pos % 8)) & 1;
        self.pos += 1;
        Ok(u32::from(b))
    }

    pub fn get(&mut self, n: u32) -> Result<u32> {
        let mut v = 0u32;
        for _ in 0..n {
            v = (v << 1) | self.bit()?;
        }
        Ok(v)
    }

    pub fn get_ue(&mut self) -> Result<u32> {
        let mut zeros = 0;
        while self.bit()? == 0 {
            zeros += 1;
            if zeros > 32 {
                return Err(Error::CorruptPayload("Exp-Golomb prefix longer than 32 bits".into()));
            }
        }
        let rest = u64::from(self.get(zeros.min(31))?);
        let rest = if zeros == 32 { (rest << 1) | u64::from(self.bit()?) } else { rest };
        let code = (1u64 << zeros) | rest;
        u32::try_from(code - 1).map_err(|_| Error::CorruptPayload("Exp-Golomb value overflow".into()))
    }

    pub fn get_se(&mut self) -> Result<i32> {
        let m = self.get_ue()?;
        let mag = m.div_ceil(2) as i32;
        Ok(if m % 2 == 1 { mag } else { -mag })
    }

    pub fn bit_pos(&self) -> usize {
        self.pos
    }
}
