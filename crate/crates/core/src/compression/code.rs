use crate::error::{Error, Result};

/// Packed bit vector. Bit `j` lives in byte `j / 8` at position `7 - j % 8`
/// (most significant bit first); unused trailing bits are zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    bits: usize,
    payload: Vec<u8>,
}

pub fn payload_len(bits: usize) -> usize {
    bits.div_ceil(8)
}

impl BinaryCode {
    pub fn new(bits: usize, payload: Vec<u8>) -> Result<Self> {
        if bits == 0 {
            return Err(Error::argument("binary code needs at least one bit"));
        }
        if payload.len() != payload_len(bits) {
            return Err(Error::argument(format!(
                "{bits}-bit code needs {} payload bytes, got {}",
                payload_len(bits),
                payload.len()
            )));
        }
        let used = bits % 8;
        if used != 0 && payload[payload.len() - 1] & (0xFF >> used) != 0 {
            return Err(Error::argument("unused trailing bits must be zero"));
        }
        Ok(Self { bits, payload })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut payload = vec![0u8; payload_len(bits.len())];
        for (j, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            payload[j / 8] |= 0x80 >> (j % 8);
        }
        Self::new(bits.len(), payload)
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn bit(&self, j: usize) -> bool {
        self.payload[j / 8] & (0x80 >> (j % 8)) != 0
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.bits).map(|j| self.bit(j)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first_layout() {
        let c = BinaryCode::from_bits(&[true, false, true, true, false, false, true, false, true])
            .unwrap();
        assert_eq!(c.payload(), &[0b1011_0010, 0b1000_0000]);
        assert_eq!(c.bits(), 9);
        assert!(c.bit(8) && !c.bit(7));
        assert_eq!(c.to_bits().len(), 9);
    }

    #[test]
    fn rejects_dirty_padding_and_wrong_length() {
        assert!(BinaryCode::new(9, vec![0, 0x40]).is_err());
        assert!(BinaryCode::new(9, vec![0, 0x80]).is_ok());
        assert!(BinaryCode::new(8, vec![0, 0]).is_err());
        assert!(BinaryCode::new(0, vec![]).is_err());
    }

    #[test]
    fn footprint_is_ceil_bits_over_eight() {
        assert_eq!(payload_len(8), 1);
        assert_eq!(payload_len(9), 2);
        assert_eq!(payload_len(2048), 256);
    }
}
