//! Run-length coding of binary masks used by the backend wire format.
//!
//! Counts alternate between off and on runs over the row-major pixel
//! sequence, starting with an off run (which may be zero).

use alloc::vec::Vec;

use crate::{Error, Result};

pub fn encode(bits: &[bool]) -> Vec<u32> {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for &b in bits {
        if b == current {
            run += 1;
        } else {
            counts.push(run);
            current = b;
            run = 1;
        }
    }
    counts.push(run);
    counts
}

pub fn decode(counts: &[u32], len: usize) -> Result<Vec<bool>> {
    let mut bits = Vec::with_capacity(len);
    let mut value = false;
    for &c in counts {
        if bits.len() + c as usize > len {
            return Err(Error::InvalidMask("run lengths exceed mask size"));
        }
        bits.extend(core::iter::repeat_n(value, c as usize));
        value = !value;
    }
    if bits.len() != len {
        return Err(Error::InvalidMask("run lengths do not cover the mask"));
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn leading_on_run() {
        assert_eq!(encode(&[true, true, false]), vec![0, 2, 1]);
        assert_eq!(encode(&[]), vec![0]);
        assert_eq!(decode(&[0, 2, 1], 3).unwrap(), vec![true, true, false]);
        assert!(decode(&[1, 1], 3).is_err());
        assert!(decode(&[4], 3).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(bits in proptest::collection::vec(any::<bool>(), 0..300)) {
            prop_assert_eq!(decode(&encode(&bits), bits.len()).unwrap(), bits);
        }
    }
}
