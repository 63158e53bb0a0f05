//! Raster containers: semantic label masks and binary bitmaps.

use alloc::vec;
use alloc::vec::Vec;

use crate::class::{OutputClass, IGNORE, NUM_CLASSES};
use crate::{Error, Result};

/// Row-major grid of class ids (`0..=3`) or [`IGNORE`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl SemanticMask {
    pub fn filled(width: u32, height: u32, label: u8) -> Self {
        SemanticMask {
            width,
            height,
            data: vec![label; width as usize * height as usize],
        }
    }

    pub fn background(width: u32, height: u32) -> Self {
        Self::filled(width, height, OutputClass::Background.id())
    }

    /// Wraps raw label bytes, checking length and label validity.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidMask("length does not match dimensions"));
        }
        if data
            .iter()
            .any(|&v| v != IGNORE && OutputClass::from_id(v).is_none())
        {
            return Err(Error::InvalidMask("label outside the class taxonomy"));
        }
        Ok(SemanticMask {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, label: u8) {
        let i = self.index(x, y);
        self.data[i] = label;
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Per-class pixel counts plus the Ignore count.
    pub fn class_counts(&self) -> ([u64; NUM_CLASSES], u64) {
        let mut counts = [0u64; NUM_CLASSES];
        let mut ignore = 0u64;
        for &v in &self.data {
            match OutputClass::from_id(v) {
                Some(c) => counts[c.index()] += 1,
                None => ignore += 1,
            }
        }
        (counts, ignore)
    }

    /// Distinct labels present, ascending.
    pub fn labels_present(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &v in &self.data {
            seen[v as usize] = true;
        }
        (0..=255u8).filter(|&v| seen[v as usize]).collect()
    }

    pub fn has_ignore(&self) -> bool {
        self.data.contains(&IGNORE)
    }

    /// Binary bitmap of the pixels carrying `label`.
    pub fn class_bitmap(&self, label: u8) -> Bitmap {
        Bitmap {
            width: self.width,
            height: self.height,
            bits: self.data.iter().map(|&v| v == label).collect(),
        }
    }
}

/// Row-major binary grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitmap {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        Bitmap {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::InvalidMask("length does not match dimensions"));
        }
        Ok(Bitmap {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Bitmap {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        let i = y as usize * self.width as usize + x as usize;
        self.bits[i] = on;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}
