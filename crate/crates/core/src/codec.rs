//! Wire format and cost accounting for compressed messages.
//!
//! Two figures are tracked for every message. The *model* cost is the
//! idealized count used to compare compressors: `c1` bits per transmitted
//! float, `c0` bits per sparsifier zero, `c0t` bits per ternary symbol, plus a
//! `⌈log₂(k+1)⌉`-bit group tag per non-float element of a hybrid message. The
//! *wire* cost is the exact length of the self-delimiting bitstream below.
//!
//! Layout (most significant bit first):
//!
//! ```text
//! tag:2  dim:16  body
//!   00 raw         d × value
//!   01 sparsifier  d × (flag:1 [value if flag])
//!   10 ternary     magnitude:value  d × symbol:2
//!   11 hybrid      k:16  k × (anchor_index:16 anchor_magnitude:value)
//!                  d × (group:⌈log₂(k+1)⌉  symbol:2 if group > 0
//!                                          flag:1 [value] if group = 0)
//! ```
//!
//! Symbols are `00 → 0`, `01 → +1`, `11 → −1`; `10` is invalid. Values are
//! IEEE-754 binary32 or binary64 depending on [`ValueWidth`].

use std::fmt::Write as _;

use thiserror::Error;

use crate::compress::{Anchor, CompressedMessage, HybridLayout, Scheme};

/// Largest dimension (and group count) representable in the 16-bit fields.
pub const MAX_DIM: usize = (1 << 16) - 1;

const HEADER_BITS: u64 = 2 + 16;

/// Encoding of transmitted real values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValueWidth {
    #[default]
    F32,
    F64,
}

impl ValueWidth {
    pub fn bits(self) -> u32 {
        match self {
            ValueWidth::F32 => 32,
            ValueWidth::F64 => 64,
        }
    }

    /// The value the receiver reconstructs after transmission.
    #[inline]
    pub fn round(self, v: f64) -> f64 {
        match self {
            ValueWidth::F32 => v as f32 as f64,
            ValueWidth::F64 => v,
        }
    }
}

/// Which per-zero cost the greedy group acceptance test charges the
/// sparsifier alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GreedyZeroCost {
    /// `c0t` bits per zero, as in the greedy acceptance comparison.
    #[default]
    TernarySymbol,
    /// `c0` bits per zero, as in the standalone sparsifier accounting.
    SparseFlag,
}

/// Idealized bit costs plus the wire value width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    /// Bits per floating value.
    pub c1: u32,
    /// Bits per sparsifier zero.
    pub c0: u32,
    /// Bits per ternary symbol.
    pub c0t: u32,
    pub greedy_zero: GreedyZeroCost,
    pub wire: ValueWidth,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { c1: 32, c0: 1, c0t: 2, greedy_zero: GreedyZeroCost::TernarySymbol, wire: ValueWidth::F32 }
    }
}

impl CostModel {
    pub fn with_wire(mut self, wire: ValueWidth) -> Self {
        self.wire = wire;
        self
    }

    /// Width of a hybrid group tag, `⌈log₂(k+1)⌉`.
    pub fn anchor_tag_bits(k: usize) -> u32 {
        usize::BITS - k.leading_zeros()
    }

    /// Expected sparsifier cost `d (c1 p + c0 (1 − p))`.
    pub fn sparsifier_expected(&self, d: usize, p: f64) -> f64 {
        d as f64 * (self.c1 as f64 * p + self.c0 as f64 * (1.0 - p))
    }

    /// Ternary cost `c1 + (d − 1) c0t`.
    pub fn ternary(&self, d: usize) -> u64 {
        self.c1 as u64 + (d as u64 - 1) * self.c0t as u64
    }

    /// Hybrid objective in expectation:
    /// `c1 [k + (d − S) p] + (c0t + ⌈log₂(k+1)⌉) [(S − k) + (d − S)(1 − p)]`
    /// with `S` the number of elements covered by the `k` ternary groups.
    pub fn hybrid_expected(&self, d: usize, k: usize, covered: usize, p: f64) -> f64 {
        let rest = (d - covered) as f64;
        let floats = k as f64 + rest * p;
        let symbols = (covered - k) as f64 + rest * (1.0 - p);
        self.c1 as f64 * floats + (self.c0t + Self::anchor_tag_bits(k)) as f64 * symbols
    }

    /// Cost of one ternary group of `s` elements in the greedy comparison.
    pub fn greedy_group_cost(&self, s: usize) -> f64 {
        self.c1 as f64 + self.c0t as f64 * (s as f64 - 1.0)
    }

    /// Cost of sparsifying the same `s` elements in the greedy comparison.
    pub fn greedy_sparse_cost(&self, s: usize, p: f64) -> f64 {
        let zero = match self.greedy_zero {
            GreedyZeroCost::TernarySymbol => self.c0t,
            GreedyZeroCost::SparseFlag => self.c0,
        } as f64;
        (self.c1 as f64 * p + zero * (1.0 - p)) * s as f64
    }
}

/// Realized model cost of a message.
pub fn paper_cost(scheme: Scheme, decoded: &[f64], layout: Option<&HybridLayout>, model: &CostModel) -> u64 {
    let d = decoded.len() as u64;
    let c1 = model.c1 as u64;
    match scheme {
        Scheme::Raw => d * c1,
        Scheme::Sparsifier => {
            let nnz = decoded.iter().filter(|v| **v != 0.0).count() as u64;
            nnz * c1 + (d - nnz) * model.c0 as u64
        }
        Scheme::Ternary => model.ternary(decoded.len()),
        Scheme::Hybrid => {
            let layout = layout.expect("hybrid message without layout");
            let k = layout.anchors.len() as u64;
            let covered = layout.tags.iter().filter(|&&g| g > 0).count() as u64;
            let sparse_nnz = layout.tags.iter().zip(decoded).filter(|(g, v)| **g == 0 && **v != 0.0).count() as u64;
            let sparse_zero = d - covered - sparse_nnz;
            let sym = (model.c0t + CostModel::anchor_tag_bits(k as usize)) as u64;
            c1 * (k + sparse_nnz) + sym * ((covered - k) + sparse_zero)
        }
    }
}

/// Exact encoded length of a message, without encoding it.
pub fn wire_length(scheme: Scheme, decoded: &[f64], layout: Option<&HybridLayout>, width: ValueWidth) -> u64 {
    let d = decoded.len() as u64;
    let w = width.bits() as u64;
    let nnz = |it: &mut dyn Iterator<Item = &f64>| it.filter(|v| **v != 0.0).count() as u64;
    HEADER_BITS
        + match scheme {
            Scheme::Raw => d * w,
            Scheme::Sparsifier => d + nnz(&mut decoded.iter()) * w,
            Scheme::Ternary => w + 2 * d,
            Scheme::Hybrid => {
                let layout = layout.expect("hybrid message without layout");
                let k = layout.anchors.len() as u64;
                let tag = CostModel::anchor_tag_bits(k as usize) as u64;
                let mut body = 16 + k * (16 + w) + d * tag;
                for (g, v) in layout.tags.iter().zip(decoded) {
                    body += if *g > 0 {
                        2
                    } else if *v != 0.0 {
                        1 + w
                    } else {
                        1
                    };
                }
                body
            }
        }
}

/// Ordered bit sequence, most significant bit first within each byte.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bitstream {
    bytes: Vec<u8>,
    len: u64,
}

impl Bitstream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn from_bytes(bytes: Vec<u8>, len: u64) -> Self {
        assert!(len <= bytes.len() as u64 * 8);
        Self { bytes, len }
    }

    pub fn bit(&self, i: u64) -> bool {
        (self.bytes[(i / 8) as usize] >> (7 - i % 8)) & 1 == 1
    }

    pub fn flip(&mut self, i: u64) {
        self.bytes[(i / 8) as usize] ^= 1 << (7 - i % 8);
    }

    /// Appends the low `width` bits of `value`, high bit first.
    pub fn push(&mut self, value: u64, width: u32) {
        for b in (0..width).rev() {
            let bit = (value >> b) & 1;
            if self.len.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if bit == 1 {
                let last = self.bytes.len() - 1;
                self.bytes[last] |= 1 << (7 - self.len % 8);
            }
            self.len += 1;
        }
    }

    /// Hex dump with the bit length, for fixtures and debugging.
    pub fn to_hex(&self) -> String {
        let mut out = format!("{} bits:", self.len);
        for (i, b) in self.bytes.iter().enumerate() {
            if i % 16 == 0 {
                out.push('\n');
            } else {
                out.push(' ');
            }
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

struct Reader<'a> {
    stream: &'a Bitstream,
    pos: u64,
}

impl Reader<'_> {
    fn read(&mut self, width: u32) -> Result<u64, DecodeError> {
        if self.pos + width as u64 > self.stream.len {
            return Err(DecodeError::Truncated { offset: self.pos, needed: width });
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.stream.bit(self.pos) as u64;
            self.pos += 1;
        }
        Ok(v)
    }

    fn value(&mut self, width: ValueWidth) -> Result<f64, DecodeError> {
        Ok(match width {
            ValueWidth::F32 => f32::from_bits(self.read(32)? as u32) as f64,
            ValueWidth::F64 => f64::from_bits(self.read(64)?),
        })
    }

    fn symbol(&mut self) -> Result<i8, DecodeError> {
        let offset = self.pos;
        match self.read(2)? {
            0b00 => Ok(0),
            0b01 => Ok(1),
            0b11 => Ok(-1),
            _ => Err(DecodeError::InvalidSymbol { offset }),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("dimension {0} exceeds the 16-bit limit")]
    DimTooLarge(usize),
    #[error("group count {0} exceeds the 16-bit limit")]
    TooManyGroups(usize),
    #[error("value {value} at index {index} is not representable in {bits} bits")]
    Lossy { index: usize, value: f64, bits: u32 },
    #[error("malformed message: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("stream truncated at bit {offset} (needed {needed} more bits)")]
    Truncated { offset: u64, needed: u32 },
    #[error("unknown scheme tag at bit {offset}")]
    UnknownScheme { offset: u64 },
    #[error("invalid ternary symbol at bit {offset}")]
    InvalidSymbol { offset: u64 },
    #[error("group tag {tag} out of range (k = {k}) at bit {offset}")]
    GroupOutOfRange { offset: u64, tag: u64, k: usize },
    #[error("anchor index {index} out of range at bit {offset}")]
    AnchorOutOfRange { offset: u64, index: u64 },
    #[error("{extra} trailing bits after message end at bit {offset}")]
    Trailing { offset: u64, extra: u64 },
}

fn scheme_tag(s: Scheme) -> u64 {
    match s {
        Scheme::Raw => 0b00,
        Scheme::Sparsifier => 0b01,
        Scheme::Ternary => 0b10,
        Scheme::Hybrid => 0b11,
    }
}

fn write_value(out: &mut Bitstream, index: usize, v: f64, width: ValueWidth) -> Result<(), EncodeError> {
    match width {
        ValueWidth::F32 => {
            let f = v as f32;
            if f as f64 != v && !(v.is_nan() && f.is_nan()) {
                return Err(EncodeError::Lossy { index, value: v, bits: 32 });
            }
            out.push(f.to_bits() as u64, 32);
        }
        ValueWidth::F64 => out.push(v.to_bits(), 64),
    }
    Ok(())
}

fn symbol_bits(v: f64, magnitude: f64, index: usize) -> Result<u64, EncodeError> {
    if v == 0.0 {
        Ok(0b00)
    } else if v == magnitude {
        Ok(0b01)
    } else if v == -magnitude {
        Ok(0b11)
    } else {
        Err(EncodeError::Malformed(format!("coordinate {index} = {v} is not 0 or ±{magnitude}")))
    }
}

/// Serializes a message in the layout documented at the module level, using
/// the message's own value width.
pub fn encode(msg: &CompressedMessage) -> Result<Bitstream, EncodeError> {
    let d = msg.decoded.len();
    if d > MAX_DIM {
        return Err(EncodeError::DimTooLarge(d));
    }
    if d != msg.dim {
        return Err(EncodeError::Malformed(format!("dim {} but {} values", msg.dim, d)));
    }
    let width = msg.width;
    let mut out = Bitstream::new();
    out.push(scheme_tag(msg.scheme), 2);
    out.push(d as u64, 16);
    match msg.scheme {
        Scheme::Raw => {
            for (i, &v) in msg.decoded.iter().enumerate() {
                write_value(&mut out, i, v, width)?;
            }
        }
        Scheme::Sparsifier => {
            for (i, &v) in msg.decoded.iter().enumerate() {
                if v == 0.0 {
                    out.push(0, 1);
                } else {
                    out.push(1, 1);
                    write_value(&mut out, i, v, width)?;
                }
            }
        }
        Scheme::Ternary => {
            let m = msg.decoded.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            write_value(&mut out, 0, m, width)?;
            for (i, &v) in msg.decoded.iter().enumerate() {
                out.push(symbol_bits(v, m, i)?, 2);
            }
        }
        Scheme::Hybrid => {
            let layout =
                msg.layout.as_ref().ok_or_else(|| EncodeError::Malformed("hybrid message without layout".into()))?;
            let k = layout.anchors.len();
            if k > MAX_DIM {
                return Err(EncodeError::TooManyGroups(k));
            }
            if layout.tags.len() != d {
                return Err(EncodeError::Malformed("group tags do not cover the vector".into()));
            }
            out.push(k as u64, 16);
            for a in &layout.anchors {
                if a.index >= d {
                    return Err(EncodeError::Malformed(format!("anchor index {} >= dim", a.index)));
                }
                out.push(a.index as u64, 16);
                write_value(&mut out, a.index, a.magnitude, width)?;
            }
            let tag_bits = CostModel::anchor_tag_bits(k);
            for (i, (&g, &v)) in layout.tags.iter().zip(&msg.decoded).enumerate() {
                if g > k {
                    return Err(EncodeError::Malformed(format!("group tag {g} > k = {k}")));
                }
                out.push(g as u64, tag_bits);
                if g > 0 {
                    out.push(symbol_bits(v, layout.anchors[g - 1].magnitude, i)?, 2);
                } else if v == 0.0 {
                    out.push(0, 1);
                } else {
                    out.push(1, 1);
                    write_value(&mut out, i, v, width)?;
                }
            }
        }
    }
    Ok(out)
}

/// Parses a bitstream produced by [`encode`]. The model supplies the value
/// width and the model-cost figures of the reconstructed message.
pub fn decode(bits: &Bitstream, model: &CostModel) -> Result<CompressedMessage, DecodeError> {
    let width = model.wire;
    let mut r = Reader { stream: bits, pos: 0 };
    let scheme = match r.read(2)? {
        0b00 => Scheme::Raw,
        0b01 => Scheme::Sparsifier,
        0b10 => Scheme::Ternary,
        _ => Scheme::Hybrid,
    };
    let d = r.read(16)? as usize;
    let mut decoded = Vec::with_capacity(d);
    let mut layout = None;
    match scheme {
        Scheme::Raw => {
            for _ in 0..d {
                decoded.push(r.value(width)?);
            }
        }
        Scheme::Sparsifier => {
            for _ in 0..d {
                decoded.push(if r.read(1)? == 1 { r.value(width)? } else { 0.0 });
            }
        }
        Scheme::Ternary => {
            let m = r.value(width)?;
            for _ in 0..d {
                decoded.push(signed(r.symbol()?, m));
            }
        }
        Scheme::Hybrid => {
            let k = r.read(16)? as usize;
            let mut anchors = Vec::with_capacity(k);
            for _ in 0..k {
                let offset = r.pos;
                let index = r.read(16)?;
                if index as usize >= d {
                    return Err(DecodeError::AnchorOutOfRange { offset, index });
                }
                anchors.push(Anchor { index: index as usize, magnitude: r.value(width)? });
            }
            let tag_bits = CostModel::anchor_tag_bits(k);
            let mut tags = Vec::with_capacity(d);
            for _ in 0..d {
                let offset = r.pos;
                let g = r.read(tag_bits)?;
                if g as usize > k {
                    return Err(DecodeError::GroupOutOfRange { offset, tag: g, k });
                }
                let g = g as usize;
                tags.push(g);
                decoded.push(if g > 0 {
                    signed(r.symbol()?, anchors[g - 1].magnitude)
                } else if r.read(1)? == 1 {
                    r.value(width)?
                } else {
                    0.0
                });
            }
            layout = Some(HybridLayout { anchors, tags });
        }
    }
    if r.pos != bits.len() {
        return Err(DecodeError::Trailing { offset: r.pos, extra: bits.len() - r.pos });
    }
    let paper_cost_bits = paper_cost(scheme, &decoded, layout.as_ref(), model);
    Ok(CompressedMessage {
        scheme,
        dim: d,
        decoded,
        width,
        layout,
        plan: None,
        paper_cost_bits,
        wire_cost_bits: bits.len(),
    })
}

fn signed(symbol: i8, m: f64) -> f64 {
    match symbol {
        0 => 0.0,
        1 => m,
        _ => -m,
    }
}
