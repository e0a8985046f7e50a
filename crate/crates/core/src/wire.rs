//! Canonical bit-exact wire codec.
//!
//! Every message payload is a dense bit stream, packed MSB-first into bytes.
//! The codec commits to one encoding per element kind so that measured bits
//! are reproducible:
//!
//! - unsigned integers: fixed-width fields; widths are declared by the
//!   protocol from public bounds and are not carried on the wire
//! - varints: little-endian base-128 groups, 8 bits per group
//! - index sets: varint count, then varint deltas of the sorted indices
//! - sparse vectors: varint count, varint index deltas, varint values
//! - real coordinates: 32-bit two's-complement fixed point with
//!   [`FRAC_BITS`] fractional bits, saturating at the format boundary
//!
//! The final byte of a payload is zero-padded; `bit_length` keeps the exact
//! count.

use crate::error::{Error, Result};

/// Fractional bits of the 32-bit fixed-point coordinate format.
pub const FRAC_BITS: u32 = 8;
/// Fixed-point representation of 1.0.
pub const FIXED_ONE: i64 = 1 << FRAC_BITS;

/// Quantizes a real to fixed point (round to nearest).
pub fn to_fixed(x: f64) -> i64 {
    (x * FIXED_ONE as f64).round() as i64
}

/// Reads a fixed-point value back as a real.
pub fn from_fixed(v: i64) -> f64 {
    v as f64 / FIXED_ONE as f64
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Bit width of a fixed field holding values up to `bound` inclusive.
pub fn width_for(bound: u64) -> u32 {
    64 - bound.max(1).leading_zeros()
}

/// Bit-level writer producing one message payload.
#[derive(Default)]
pub struct WireWriter {
    bytes: Vec<u8>,
    acc: u64,
    acc_bits: u32,
    bit_len: u64,
}

impl WireWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    fn put_bits(&mut self, v: u64, width: u32) {
        let mut rem = width;
        while rem > 0 {
            let take = rem.min(32);
            let chunk = (v >> (rem - take)) & mask(take);
            self.acc = (self.acc << take) | chunk;
            self.acc_bits += take;
            while self.acc_bits >= 8 {
                self.acc_bits -= 8;
                self.bytes.push((self.acc >> self.acc_bits) as u8);
            }
            self.acc &= mask(self.acc_bits);
            rem -= take;
        }
        self.bit_len += width as u64;
    }

    /// Fixed-width unsigned integer; `v` must fit in `width` bits.
    pub fn put_uint(&mut self, v: u64, width: u32) -> Result<()> {
        if width == 0 || width > 64 {
            return Err(Error::Wire(format!("bad field width {width}")));
        }
        if width < 64 && v > mask(width) {
            return Err(Error::Wire(format!("value {v} exceeds {width}-bit field")));
        }
        self.put_bits(v, width);
        Ok(())
    }

    pub fn put_uints(&mut self, vs: &[u64], width: u32) -> Result<()> {
        for &v in vs {
            self.put_uint(v, width)?;
        }
        Ok(())
    }

    /// Two's-complement signed integer in a fixed-width field.
    pub fn put_int(&mut self, v: i64, width: u32) -> Result<()> {
        if width == 0 || width > 64 {
            return Err(Error::Wire(format!("bad field width {width}")));
        }
        let lo = -(1i64 << (width - 1));
        let hi = (1i64 << (width - 1)) - 1;
        if width < 64 && (v < lo || v > hi) {
            return Err(Error::Wire(format!("value {v} exceeds {width}-bit field")));
        }
        self.put_bits((v as u64) & mask(width), width);
        Ok(())
    }

    /// LEB128 varint (8 bits per group).
    pub fn put_varint(&mut self, mut v: u64) {
        loop {
            let byte = (v & 0x7F) as u64;
            v >>= 7;
            if v == 0 {
                self.put_bits(byte, 8);
                break;
            }
            self.put_bits(byte | 0x80, 8);
        }
    }

    /// Delta-encoded index set; indices must be strictly increasing.
    pub fn put_index_set(&mut self, indices: &[usize]) -> Result<()> {
        self.put_varint(indices.len() as u64);
        let mut prev = 0usize;
        for (pos, &i) in indices.iter().enumerate() {
            if pos > 0 && i <= prev {
                return Err(Error::Wire("index set not strictly increasing".into()));
            }
            self.put_varint((i - prev) as u64);
            prev = i;
        }
        Ok(())
    }

    /// Sparse vector: count, index deltas, then the (nonzero) values.
    pub fn put_sparse_vec(&mut self, entries: &[(usize, u64)]) -> Result<()> {
        self.put_varint(entries.len() as u64);
        let mut prev = 0usize;
        for (pos, &(i, _)) in entries.iter().enumerate() {
            if pos > 0 && i <= prev {
                return Err(Error::Wire("sparse vector indices not increasing".into()));
            }
            self.put_varint((i - prev) as u64);
            prev = i;
        }
        for &(_, v) in entries {
            self.put_varint(v);
        }
        Ok(())
    }

    /// 32-bit fixed-point coordinate, saturating at the format range.
    pub fn put_fixed(&mut self, fp: i64) {
        let clamped = fp.clamp(i32::MIN as i64, i32::MAX as i64) as i32;
        self.put_bits((clamped as u32) as u64, 32);
    }

    pub fn put_fixeds(&mut self, fps: &[i64]) {
        for &fp in fps {
            self.put_fixed(fp);
        }
    }

    /// Finalizes the payload, zero-padding the last byte.
    pub(crate) fn finish(mut self) -> (Vec<u8>, u64) {
        if self.acc_bits > 0 {
            let pad = 8 - self.acc_bits;
            self.bytes.push((self.acc << pad) as u8);
            self.acc_bits = 0;
        }
        (self.bytes, self.bit_len)
    }
}

/// Bit-level reader over a received payload.
pub struct WireReader {
    bytes: Vec<u8>,
    pos: u64,
    bit_len: u64,
}

impl WireReader {
    pub fn new(bytes: Vec<u8>, bit_len: u64) -> Self {
        Self { bytes, pos: 0, bit_len }
    }

    pub fn remaining_bits(&self) -> u64 {
        self.bit_len - self.pos
    }

    fn get_bits(&mut self, width: u32) -> Result<u64> {
        if self.pos + width as u64 > self.bit_len {
            return Err(Error::Wire("read past end of message".into()));
        }
        let mut out = 0u64;
        let mut rem = width;
        while rem > 0 {
            let byte = self.bytes[(self.pos / 8) as usize];
            let avail = 8 - (self.pos % 8) as u32;
            let take = rem.min(avail);
            let shift = avail - take;
            let chunk = ((byte >> shift) as u64) & mask(take);
            out = (out << take) | chunk;
            self.pos += take as u64;
            rem -= take;
        }
        Ok(out)
    }

    pub fn get_uint(&mut self, width: u32) -> Result<u64> {
        if width == 0 || width > 64 {
            return Err(Error::Wire(format!("bad field width {width}")));
        }
        self.get_bits(width)
    }

    pub fn get_uints(&mut self, count: usize, width: u32) -> Result<Vec<u64>> {
        (0..count).map(|_| self.get_uint(width)).collect()
    }

    pub fn get_int(&mut self, width: u32) -> Result<i64> {
        let raw = self.get_bits(width)?;
        let sign_bit = 1u64 << (width - 1);
        if raw & sign_bit != 0 {
            Ok((raw | !mask(width)) as i64)
        } else {
            Ok(raw as i64)
        }
    }

    pub fn get_varint(&mut self) -> Result<u64> {
        let mut out = 0u64;
        let mut shift = 0u32;
        loop {
            let byte = self.get_bits(8)?;
            if shift >= 64 {
                return Err(Error::Wire("varint too long".into()));
            }
            out |= (byte & 0x7F) << shift;
            if byte & 0x80 == 0 {
                return Ok(out);
            }
            shift += 7;
        }
    }

    pub fn get_index_set(&mut self) -> Result<Vec<usize>> {
        let count = self.get_varint()? as usize;
        let mut out = Vec::with_capacity(count);
        let mut prev = 0usize;
        for pos in 0..count {
            let delta = self.get_varint()? as usize;
            if pos > 0 && delta == 0 {
                return Err(Error::Wire("zero delta in index set".into()));
            }
            prev += delta;
            out.push(prev);
        }
        Ok(out)
    }

    pub fn get_sparse_vec(&mut self) -> Result<Vec<(usize, u64)>> {
        let count = self.get_varint()? as usize;
        let mut idx = Vec::with_capacity(count);
        let mut prev = 0usize;
        for pos in 0..count {
            let delta = self.get_varint()? as usize;
            if pos > 0 && delta == 0 {
                return Err(Error::Wire("zero delta in sparse vector".into()));
            }
            prev += delta;
            idx.push(prev);
        }
        let mut out = Vec::with_capacity(count);
        for i in idx {
            out.push((i, self.get_varint()?));
        }
        Ok(out)
    }

    pub fn get_fixed(&mut self) -> Result<i64> {
        Ok(self.get_bits(32)? as u32 as i32 as i64)
    }

    pub fn get_fixeds(&mut self, count: usize) -> Result<Vec<i64>> {
        (0..count).map(|_| self.get_fixed()).collect()
    }
}
