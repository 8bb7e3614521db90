//! Control-chain emulation: host frames and seven 16-channel DAC banks.
//!
//! Wire format of one frame (all multi-octet fields big-endian):
//!
//! ```text
//! offset  size  field
//! 0       1     opcode: 0x01 SET_ONE, 0x02 SET_ALL, 0x03 READBACK
//! 1       1     entry count n (SET_ONE requires n = 1; others 1..=255)
//! 2       4n    entries: dac_id (u8), channel (u8), code (u16)
//! 2+4n    2     checksum: bitwise NOT of the 16-bit wrapping sum of octets [0, 2+4n)
//! ```
//!
//! A capture file is the 8-octet magic `RISCAP\0\x01` followed by records
//! of `length (u16) || frame octets`.

use std::io::{Read, Write};

use crate::error::{Result, RisError};
use crate::mapping::{decode_code, quantize_voltage, VoltagePlan};

pub const DAC_COUNT: usize = 7;
pub const CHANNELS_PER_DAC: usize = 16;
/// Cells wired to a DAC channel on the 10 x 10 board.
pub const POPULATED_CHANNELS: usize = 100;
const BOARD_ROWS: usize = 10;
const BOARD_COLS: usize = 10;

pub const CAPTURE_MAGIC: [u8; 8] = *b"RISCAP\x00\x01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelAddress {
    dac_id: u8,
    channel: u8,
}

impl ChannelAddress {
    pub fn new(dac_id: u8, channel: u8) -> Result<Self> {
        if usize::from(dac_id) >= DAC_COUNT || usize::from(channel) >= CHANNELS_PER_DAC {
            return Err(RisError::Frame(format!(
                "address (dac {dac_id}, channel {channel}) does not exist"
            )));
        }
        Ok(Self { dac_id, channel })
    }

    pub fn dac_id(&self) -> u8 {
        self.dac_id
    }

    pub fn channel(&self) -> u8 {
        self.channel
    }

    fn linear(&self) -> usize {
        usize::from(self.dac_id) * CHANNELS_PER_DAC + usize::from(self.channel)
    }

    pub fn is_populated(&self) -> bool {
        self.linear() < POPULATED_CHANNELS
    }

    /// Cell driven by this channel, if any.
    pub fn cell(&self) -> Option<(usize, usize)> {
        self.is_populated()
            .then(|| (self.linear() / BOARD_COLS, self.linear() % BOARD_COLS))
    }

    /// All 112 addresses in DAC-then-channel order.
    pub fn all() -> impl Iterator<Item = ChannelAddress> {
        (0..DAC_COUNT as u8).flat_map(|d| {
            (0..CHANNELS_PER_DAC as u8).map(move |c| ChannelAddress {
                dac_id: d,
                channel: c,
            })
        })
    }
}

/// Row-major wiring: cell `i = row * 10 + col` sits on DAC `i / 16`, channel `i % 16`.
pub fn channel_map(cell: (usize, usize), dims: (usize, usize)) -> Result<ChannelAddress> {
    let (row, col) = cell;
    if dims != (BOARD_ROWS, BOARD_COLS) {
        return Err(RisError::Validation(format!(
            "the control board drives a {BOARD_ROWS}x{BOARD_COLS} array, got {}x{}",
            dims.0, dims.1
        )));
    }
    if row >= BOARD_ROWS || col >= BOARD_COLS {
        return Err(RisError::IndexOutOfBounds {
            row,
            col,
            rows: BOARD_ROWS,
            cols: BOARD_COLS,
        });
    }
    let i = row * BOARD_COLS + col;
    ChannelAddress::new((i / CHANNELS_PER_DAC) as u8, (i % CHANNELS_PER_DAC) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    SetOne = 0x01,
    SetAll = 0x02,
    Readback = 0x03,
}

impl TryFrom<u8> for Opcode {
    type Error = RisError;

    fn try_from(b: u8) -> Result<Self> {
        match b {
            0x01 => Ok(Opcode::SetOne),
            0x02 => Ok(Opcode::SetAll),
            0x03 => Ok(Opcode::Readback),
            other => Err(RisError::Frame(format!("unknown opcode {other:#04x}"))),
        }
    }
}

/// Ones' complement of the 16-bit wrapping octet sum.
pub fn frame_checksum(octets: &[u8]) -> u16 {
    !octets
        .iter()
        .fold(0u16, |acc, &b| acc.wrapping_add(u16::from(b)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlFrame {
    pub opcode: Opcode,
    pub payload: Vec<(ChannelAddress, u16)>,
    pub checksum: u16,
}

impl ControlFrame {
    pub fn new(opcode: Opcode, payload: Vec<(ChannelAddress, u16)>) -> Result<Self> {
        check_count(opcode, payload.len())?;
        let mut frame = Self {
            opcode,
            payload,
            checksum: 0,
        };
        frame.checksum = frame_checksum(&frame.body());
        Ok(frame)
    }

    fn body(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + 4 * self.payload.len());
        out.push(self.opcode as u8);
        out.push(self.payload.len() as u8);
        for (addr, code) in &self.payload {
            out.push(addr.dac_id);
            out.push(addr.channel);
            out.extend_from_slice(&code.to_be_bytes());
        }
        out
    }

    pub fn expected_checksum(&self) -> u16 {
        frame_checksum(&self.body())
    }

    pub fn is_valid(&self) -> bool {
        check_count(self.opcode, self.payload.len()).is_ok()
            && self.checksum == self.expected_checksum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.body();
        out.extend_from_slice(&self.checksum.to_be_bytes());
        out
    }

    /// Parses and checksum-verifies one frame occupying all of `bytes`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(RisError::Frame(format!(
                "frame too short ({} octets)",
                bytes.len()
            )));
        }
        let n = usize::from(bytes[1]);
        let expected_len = 2 + 4 * n + 2;
        if bytes.len() != expected_len {
            return Err(RisError::Frame(format!(
                "frame declares {n} entries ({expected_len} octets) but has {} octets",
                bytes.len()
            )));
        }
        let body = &bytes[..expected_len - 2];
        let found = u16::from_be_bytes([bytes[expected_len - 2], bytes[expected_len - 1]]);
        let expected = frame_checksum(body);
        if found != expected {
            return Err(RisError::Checksum { expected, found });
        }
        let opcode = Opcode::try_from(bytes[0])?;
        check_count(opcode, n)?;
        let payload = body[2..]
            .chunks_exact(4)
            .map(|e| {
                Ok((
                    ChannelAddress::new(e[0], e[1])?,
                    u16::from_be_bytes([e[2], e[3]]),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            opcode,
            payload,
            checksum: found,
        })
    }
}

fn check_count(opcode: Opcode, n: usize) -> Result<()> {
    let ok = match opcode {
        Opcode::SetOne => n == 1,
        Opcode::SetAll | Opcode::Readback => (1..=255).contains(&n),
    };
    if ok {
        Ok(())
    } else {
        Err(RisError::Frame(format!(
            "{opcode:?} frame cannot carry {n} entries"
        )))
    }
}

/// Register contents of the seven DACs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DacBankState {
    codes: [[u16; CHANNELS_PER_DAC]; DAC_COUNT],
    dirty: [[bool; CHANNELS_PER_DAC]; DAC_COUNT],
    ignored_writes: u64,
}

impl DacBankState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn code(&self, addr: ChannelAddress) -> u16 {
        self.codes[usize::from(addr.dac_id)][usize::from(addr.channel)]
    }

    pub fn is_dirty(&self, addr: ChannelAddress) -> bool {
        self.dirty[usize::from(addr.dac_id)][usize::from(addr.channel)]
    }

    pub fn clear_dirty(&mut self) {
        self.dirty = Default::default();
    }

    /// Writes addressed to unwired channels; accepted but dropped.
    pub fn ignored_writes(&self) -> u64 {
        self.ignored_writes
    }

    pub fn populated_addresses(&self) -> usize {
        ChannelAddress::all().filter(|a| a.is_populated()).count()
    }

    /// Applies one frame. A frame that fails verification leaves the
    /// state untouched.
    pub fn apply_frame(&mut self, frame: &ControlFrame) -> Result<()> {
        check_count(frame.opcode, frame.payload.len())?;
        let expected = frame.expected_checksum();
        if frame.checksum != expected {
            return Err(RisError::Checksum {
                expected,
                found: frame.checksum,
            });
        }
        if frame.opcode == Opcode::Readback {
            return Ok(());
        }
        for &(addr, code) in &frame.payload {
            if !addr.is_populated() {
                self.ignored_writes += 1;
                continue;
            }
            let slot = &mut self.codes[usize::from(addr.dac_id)][usize::from(addr.channel)];
            if *slot != code {
                *slot = code;
                self.dirty[usize::from(addr.dac_id)][usize::from(addr.channel)] = true;
            }
        }
        Ok(())
    }

    /// Parses raw octets and applies them.
    pub fn apply_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let frame = ControlFrame::from_bytes(bytes)?;
        self.apply_frame(&frame)
    }

    /// Answers a READBACK request with the current codes.
    pub fn readback(&self, request: &ControlFrame) -> Result<ControlFrame> {
        if request.opcode != Opcode::Readback {
            return Err(RisError::Frame("readback requires a READBACK frame".into()));
        }
        if !request.is_valid() {
            return Err(RisError::Checksum {
                expected: request.expected_checksum(),
                found: request.checksum,
            });
        }
        let payload = request
            .payload
            .iter()
            .map(|&(addr, _)| (addr, self.code(addr)))
            .collect();
        ControlFrame::new(Opcode::Readback, payload)
    }

    /// Row-major code grid of the 100 wired cells.
    pub fn cell_codes(&self) -> Vec<u16> {
        (0..POPULATED_CHANNELS)
            .map(|i| self.codes[i / CHANNELS_PER_DAC][i % CHANNELS_PER_DAC])
            .collect()
    }

    /// Row-major output voltages of the 100 wired cells.
    pub fn cell_voltages(&self) -> Vec<f64> {
        self.cell_codes().into_iter().map(decode_code).collect()
    }
}

/// Applies frames in order to a copy of `state`; the first rejected frame
/// aborts with an error and the caller's state is left as it was.
pub fn apply_frames(frames: &[ControlFrame], state: &DacBankState) -> Result<DacBankState> {
    let mut next = state.clone();
    for frame in frames {
        next.apply_frame(frame)?;
    }
    Ok(next)
}

/// One SET_ALL frame per DAC covering its wired channels, row-major.
pub fn encode_plan(plan: &VoltagePlan) -> Result<Vec<ControlFrame>> {
    if (plan.rows, plan.cols) != (BOARD_ROWS, BOARD_COLS) {
        return Err(RisError::Validation(format!(
            "plan is {}x{}, the board drives {BOARD_ROWS}x{BOARD_COLS}",
            plan.rows, plan.cols
        )));
    }
    for (i, q) in plan.voltages.iter().enumerate() {
        let expected = quantize_voltage(q.volts())?;
        if expected != *q {
            return Err(RisError::Validation(format!(
                "cell {i}: code {} does not match {} V",
                q.code,
                q.volts()
            )));
        }
    }
    let mut frames = Vec::new();
    for chunk in (0..POPULATED_CHANNELS)
        .collect::<Vec<_>>()
        .chunks(CHANNELS_PER_DAC)
    {
        let payload = chunk
            .iter()
            .map(|&i| {
                let addr = channel_map((i / BOARD_COLS, i % BOARD_COLS), (BOARD_ROWS, BOARD_COLS))?;
                Ok((addr, plan.voltages[i].code))
            })
            .collect::<Result<Vec<_>>>()?;
        frames.push(ControlFrame::new(Opcode::SetAll, payload)?);
    }
    Ok(frames)
}

pub fn write_capture<W: Write>(frames: &[Vec<u8>], mut out: W) -> Result<()> {
    out.write_all(&CAPTURE_MAGIC)?;
    for f in frames {
        let len = u16::try_from(f.len())
            .map_err(|_| RisError::Frame(format!("frame of {} octets is too long", f.len())))?;
        out.write_all(&len.to_be_bytes())?;
        out.write_all(f)?;
    }
    Ok(())
}

/// Reads raw frame records; frames are not verified here so corrupted
/// captures can be replayed against a bank.
pub fn read_capture<R: Read>(mut input: R) -> Result<Vec<Vec<u8>>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < CAPTURE_MAGIC.len() || bytes[..CAPTURE_MAGIC.len()] != CAPTURE_MAGIC {
        return Err(RisError::Frame("not a frame capture (bad magic)".into()));
    }
    let mut rest = &bytes[CAPTURE_MAGIC.len()..];
    let mut frames = Vec::new();
    while !rest.is_empty() {
        if rest.len() < 2 {
            return Err(RisError::Frame("truncated record length".into()));
        }
        let len = usize::from(u16::from_be_bytes([rest[0], rest[1]]));
        if rest.len() < 2 + len {
            return Err(RisError::Frame("truncated record".into()));
        }
        frames.push(rest[2..2 + len].to_vec());
        rest = &rest[2 + len..];
    }
    Ok(frames)
}
