//! Headset serial packet codec and raw-count to scalp-voltage conversion.
//!
//! ```text
//! 0xAA 0xAA LEN PAYLOAD[LEN] CHK
//! CHK = 0xFF - (sum(PAYLOAD) mod 256), 1 <= LEN <= 169
//! ```
//!
//! The payload is a sequence of data rows. Codes below 0x80 carry one value
//! byte; codes from 0x80 up carry a length byte followed by that many value
//! bytes. `0x55` bytes before a code are extended-code markers. The raw EEG
//! sample lives in row `0x80 0x02 hi lo` as a big-endian `i16`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SYNC: u8 = 0xAA;
pub const MAX_PAYLOAD: usize = 169;
pub const RAW_CODE: u8 = 0x80;
const EXCODE: u8 = 0x55;

pub const RAW_MIN: i32 = -2048;
pub const RAW_MAX: i32 = 2047;

/// Reference voltage of the ADC front end, volts.
pub const INPUT_VOLTAGE: f64 = 1.8;
/// Amplifier gain.
pub const GAIN: f64 = 2000.0;
/// Number of distinct ADC codes.
pub const VALUE_RANGE: f64 = 4096.0;

/// Scalp voltage for a raw count with no range check.
pub fn scalp_voltage(raw: f64) -> f64 {
    raw * (INPUT_VOLTAGE / VALUE_RANGE) / GAIN
}

pub fn scalp_microvolts(raw: f64) -> f64 {
    scalp_voltage(raw) * 1e6
}

/// Converts a raw ADC count to volts.
pub fn raw_to_voltage(raw: i32) -> Result<f64> {
    check_range(raw)?;
    Ok(scalp_voltage(f64::from(raw)))
}

fn check_range(raw: i32) -> Result<()> {
    if (RAW_MIN..=RAW_MAX).contains(&raw) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            value: raw.into(),
            min: RAW_MIN.into(),
            max: RAW_MAX.into(),
        })
    }
}

pub fn checksum(payload: &[u8]) -> u8 {
    let sum = payload.iter().fold(0u8, |acc, &b| acc.wrapping_add(b));
    0xFF - sum
}

/// Frames an arbitrary payload.
pub fn frame(payload: &[u8]) -> Result<Vec<u8>> {
    if payload.is_empty() || payload.len() > MAX_PAYLOAD {
        return Err(Error::Parameter(format!(
            "payload length {} outside 1..={MAX_PAYLOAD}",
            payload.len()
        )));
    }
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&[SYNC, SYNC, payload.len() as u8]);
    out.extend_from_slice(payload);
    out.push(checksum(payload));
    Ok(out)
}

/// Encodes one raw sample as a complete 8-byte frame.
pub fn encode_packet(raw: i32) -> Result<Vec<u8>> {
    check_range(raw)?;
    let [hi, lo] = (raw as i16).to_be_bytes();
    frame(&[RAW_CODE, 0x02, hi, lo])
}

/// A checksum-verified packet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPacket {
    pub payload: Vec<u8>,
    /// Raw sample carried by the payload, if it has a raw-value row.
    pub raw_value: Option<i16>,
    pub checksum_valid: bool,
}

impl RawPacket {
    fn from_payload(payload: &[u8]) -> Self {
        Self {
            payload: payload.to_vec(),
            raw_value: parse_raw_row(payload),
            checksum_valid: true,
        }
    }
}

/// Walks the data rows of a payload and returns the first raw sample.
fn parse_raw_row(payload: &[u8]) -> Option<i16> {
    let mut i = 0;
    while i < payload.len() {
        while i < payload.len() && payload[i] == EXCODE {
            i += 1;
        }
        let code = *payload.get(i)?;
        i += 1;
        if code < 0x80 {
            i += 1;
            continue;
        }
        let len = *payload.get(i)? as usize;
        i += 1;
        let value = payload.get(i..i + len)?;
        if code == RAW_CODE && len == 2 {
            return Some(i16::from_be_bytes([value[0], value[1]]));
        }
        i += len;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    SeekSync1,
    SeekSync2,
    ReadLen,
    ReadPayload,
    ReadChecksum,
}

/// Incremental parser state. Holds at most one partial frame in a fixed
/// buffer, so memory does not grow with the stream.
#[derive(Debug, Clone)]
pub struct ParserState {
    phase: Phase,
    len: usize,
    filled: usize,
    payload: [u8; MAX_PAYLOAD],
    /// Total corrupt frames seen over the life of this state.
    pub corrupt_total: u64,
}

impl Default for ParserState {
    fn default() -> Self {
        Self::new()
    }
}

/// Packets and diagnostics from one `decode_stream` call.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeOutput {
    pub packets: Vec<RawPacket>,
    /// Frames dropped during this call for bad length or checksum.
    pub corrupt_frames: usize,
}

impl ParserState {
    pub fn new() -> Self {
        Self {
            phase: Phase::SeekSync1,
            len: 0,
            filled: 0,
            payload: [0; MAX_PAYLOAD],
            corrupt_total: 0,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    fn reset(&mut self) {
        self.phase = Phase::SeekSync1;
        self.len = 0;
        self.filled = 0;
    }

    fn step(&mut self, byte: u8, out: &mut DecodeOutput) {
        match self.phase {
            Phase::SeekSync1 => {
                if byte == SYNC {
                    self.phase = Phase::SeekSync2;
                }
            }
            Phase::SeekSync2 => {
                self.phase = if byte == SYNC {
                    Phase::ReadLen
                } else {
                    Phase::SeekSync1
                };
            }
            Phase::ReadLen => {
                if byte == SYNC {
                    // extra sync bytes are legal padding
                } else if byte == 0 || byte as usize > MAX_PAYLOAD {
                    out.corrupt_frames += 1;
                    self.reset();
                } else {
                    self.len = byte as usize;
                    self.filled = 0;
                    self.phase = Phase::ReadPayload;
                }
            }
            Phase::ReadPayload => {
                self.payload[self.filled] = byte;
                self.filled += 1;
                if self.filled == self.len {
                    self.phase = Phase::ReadChecksum;
                }
            }
            Phase::ReadChecksum => {
                let payload = &self.payload[..self.len];
                if checksum(payload) == byte {
                    out.packets.push(RawPacket::from_payload(payload));
                    self.reset();
                } else {
                    out.corrupt_frames += 1;
                    // Rescan the rejected frame from just past its first sync
                    // byte so a real frame hidden behind a corrupted length
                    // byte is not lost.
                    let mut replay = [0u8; MAX_PAYLOAD + 3];
                    replay[0] = SYNC;
                    replay[1] = self.len as u8;
                    replay[2..2 + self.len].copy_from_slice(payload);
                    replay[2 + self.len] = byte;
                    let n = self.len + 3;
                    self.reset();
                    for &b in &replay[..n] {
                        self.step(b, out);
                    }
                }
            }
        }
    }
}

/// Feeds `bytes` through the parser. Partial frames carry over in `state`.
pub fn decode_stream(bytes: &[u8], state: &mut ParserState) -> DecodeOutput {
    let mut out = DecodeOutput::default();
    for &b in bytes {
        state.step(b, &mut out);
    }
    state.corrupt_total += out.corrupt_frames as u64;
    out
}
