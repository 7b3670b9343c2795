use super::{Axis, CircuitLayout, GateSlot};
use crate::error::{Error, Result};

/// Channels: RX, RY, RZ, CNOT control, CNOT target.
pub const IMAGE_CHANNELS: usize = 5;
const CONTROL: usize = 3;
const TARGET: usize = 4;

/// Binary image of a layout, stored channel-major (`[channel][qubit][column]`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CircuitImage {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl CircuitImage {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            pixels: vec![0; IMAGE_CHANNELS * height * width],
        }
    }

    /// Image from raw 0/1 pixels in channel-major order.
    pub fn from_pixels(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != IMAGE_CHANNELS * height * width {
            return Err(Error::Dimension(format!(
                "{} pixels for a {IMAGE_CHANNELS}x{height}x{width} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|&p| p > 1) {
            return Err(Error::Argument("pixels must be 0 or 1".into()));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    fn offset(&self, channel: usize, row: usize, col: usize) -> usize {
        (channel * self.height + row) * self.width + col
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> u8 {
        self.pixels[self.offset(channel, row, col)]
    }

    fn set(&mut self, channel: usize, row: usize, col: usize) {
        let i = self.offset(channel, row, col);
        self.pixels[i] = 1;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Flattened network input.
    pub fn to_input(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p)).collect()
    }

    /// Pixels packed MSB-first into bytes, hex encoded.
    pub fn to_hex_bits(&self) -> String {
        let bytes: Vec<u8> = self
            .pixels
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (k, &p)| acc | (p << (7 - k)))
            })
            .collect();
        hex::encode(bytes)
    }

    pub fn from_hex_bits(height: usize, width: usize, text: &str) -> Result<Self> {
        let bytes = hex::decode(text).map_err(|e| Error::Argument(format!("bad bitset: {e}")))?;
        let mut img = Self::zeros(height, width);
        if bytes.len() != img.pixels.len().div_ceil(8) {
            return Err(Error::Dimension(format!(
                "bitset of {} bytes for {} pixels",
                bytes.len(),
                img.pixels.len()
            )));
        }
        for (i, px) in img.pixels.iter_mut().enumerate() {
            *px = bytes[i / 8] >> (7 - i % 8) & 1;
        }
        Ok(img)
    }
}

/// Block `b` occupies rotation column `2b` and entangling column `2b+1`;
/// columns past the circuit stay zero.
pub fn encode_image(layout: &CircuitLayout, max_width: usize) -> Result<CircuitImage> {
    if layout.has_trainable_module() {
        return Err(Error::Argument(
            "layouts with trainable modules have no image encoding".into(),
        ));
    }
    let width = layout.natural_width();
    if width > max_width {
        return Err(Error::Capacity(format!(
            "layout width {width} exceeds image width {max_width}"
        )));
    }
    let n = layout.num_qubits();
    let mut img = CircuitImage::zeros(n, max_width);
    let mut block = 0;
    let mut rotations_seen = 0;
    for g in layout.gates() {
        match *g {
            GateSlot::Rotation { axis, qubit, .. } => {
                block = rotations_seen / n;
                rotations_seen += 1;
                let channel = match axis {
                    Axis::X => 0,
                    Axis::Y => 1,
                    Axis::Z => 2,
                };
                img.set(channel, qubit, 2 * block);
            }
            GateSlot::Cnot { control, target } => {
                img.set(CONTROL, control, 2 * block + 1);
                img.set(TARGET, target, 2 * block + 1);
            }
            GateSlot::Crz { .. } => unreachable!("rejected above"),
        }
    }
    Ok(img)
}
