//! Simulated two-party channel with exact accounting of bits and rounds.
//!
//! A [`ProtocolSession`] records every message a protocol sends. Rounds are
//! counted by sender alternation: a maximal run of messages from one party is
//! one round. Shared randomness is derived from the 64-bit session seed; the
//! seed exchange is billed once (64 bits) to the session total on first use.
//! It does not occupy a message slot, so round counts reflect data messages
//! only.

use crate::error::{Error, Result};
use crate::matrix::HeavyHitterSet;
use crate::rng;
use crate::wire::{WireReader, WireWriter};
use rand_chacha::ChaCha20Rng;

const LABEL_DRAW: u64 = 0x4452_4157; // indexed draw_shared_randomness
const LABEL_SHARED: u64 = 0x5348_5244; // labelled shared streams
const LABEL_PRIVATE: u64 = 0x5052_4956; // party-local streams

/// One of the two protocol endpoints.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }

    fn idx(self) -> usize {
        match self {
            Party::Alice => 0,
            Party::Bob => 1,
        }
    }

    fn byte(self) -> u8 {
        self.idx() as u8
    }
}

/// A single transmitted message.
#[derive(Clone, Debug)]
pub struct Message {
    pub sender: Party,
    pub payload: Vec<u8>,
    /// Exact encoded length; `payload` is zero-padded to a whole byte.
    pub bit_length: u64,
}

/// Protocol output value.
#[derive(Clone, Debug, PartialEq)]
pub enum ResultValue {
    /// Point estimate of a scalar statistic.
    Scalar(f64),
    /// Sampled entry position of the product, with an optional witness index.
    Sample {
        row: usize,
        col: usize,
        witness: Option<usize>,
    },
    /// Heavy-hitter output set.
    Hitters(HeavyHitterSet),
    /// The queried statistic is empty (e.g. sampling from a zero product).
    Empty,
    /// Explicit failure (e.g. sampler did not verify); never a wrong answer.
    Failed,
}

impl ResultValue {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            ResultValue::Scalar(x) => Some(*x),
            _ => None,
        }
    }
}

/// Final protocol report with communication meters frozen at finish.
#[derive(Clone, Debug)]
pub struct EstimateReport {
    pub result: ResultValue,
    /// Oracle value, filled in by the caller when available.
    pub true_value: Option<f64>,
    pub bits_total: u64,
    pub rounds: u64,
    pub seed: u64,
}

impl EstimateReport {
    pub fn with_oracle(mut self, value: f64) -> Self {
        self.true_value = Some(value);
        self
    }
}

/// Metered transcript of one protocol execution.
pub struct ProtocolSession {
    seed: u64,
    messages: Vec<Message>,
    round_count: u64,
    bits_by_party: [u64; 2],
    rng_draws: [u64; 2],
    seed_billed: bool,
    cursor: [usize; 2],
    finished: bool,
}

impl ProtocolSession {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            messages: Vec::new(),
            round_count: 0,
            bits_by_party: [0, 0],
            rng_draws: [0, 0],
            seed_billed: false,
            cursor: [0, 0],
            finished: false,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rounds(&self) -> u64 {
        self.round_count
    }

    pub fn bits_by_party(&self, party: Party) -> u64 {
        self.bits_by_party[party.idx()]
    }

    /// Total bits: all message bits plus the 64-bit shared-seed exchange
    /// when shared randomness was used.
    pub fn bits_total(&self) -> u64 {
        let msg: u64 = self.bits_by_party.iter().sum();
        msg + if self.seed_billed { 64 } else { 0 }
    }

    pub fn shared_seed_billed(&self) -> bool {
        self.seed_billed
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Appends a message; a new round starts whenever the sender alternates.
    pub fn send(&mut self, sender: Party, writer: WireWriter) -> Result<()> {
        if self.finished {
            return Err(Error::ProtocolViolation("send after finish".into()));
        }
        let (payload, bit_length) = writer.finish();
        if self.messages.last().map(|m| m.sender) != Some(sender) {
            self.round_count += 1;
        }
        self.bits_by_party[sender.idx()] += bit_length;
        self.messages.push(Message {
            sender,
            payload,
            bit_length,
        });
        Ok(())
    }

    /// Delivers the next message addressed to `receiver` in send order.
    pub fn recv(&mut self, receiver: Party) -> Result<WireReader> {
        let want = receiver.other();
        let mut i = self.cursor[receiver.idx()];
        while i < self.messages.len() {
            if self.messages[i].sender == want {
                self.cursor[receiver.idx()] = i + 1;
                let m = &self.messages[i];
                return Ok(WireReader::new(m.payload.clone(), m.bit_length));
            }
            i += 1;
        }
        Err(Error::ProtocolViolation(format!(
            "no pending message for {receiver:?}"
        )))
    }

    /// Shared-randomness draw: both parties see identical bits for identical
    /// draw indices (each party keeps its own draw counter).
    pub fn draw_shared_randomness(&mut self, party: Party, n_bits: usize) -> Vec<u8> {
        self.seed_billed = true;
        let idx = self.rng_draws[party.idx()];
        self.rng_draws[party.idx()] += 1;
        let mut rng = rng::chacha(self.seed, LABEL_DRAW ^ idx.rotate_left(13));
        let mut out = vec![0u8; n_bits.div_ceil(8)];
        rand_core::Rng::fill_bytes(&mut rng, &mut out);
        if n_bits % 8 != 0 {
            let last = out.len() - 1;
            out[last] &= 0xFFu8 << (8 - (n_bits % 8) as u32);
        }
        out
    }

    /// Labelled shared stream; counts as use of the shared seed.
    pub fn shared_rng(&mut self, label: u64) -> ChaCha20Rng {
        self.seed_billed = true;
        rng::chacha(self.seed, LABEL_SHARED ^ label.rotate_left(7))
    }

    /// Labelled shared seed value; counts as use of the shared seed.
    pub fn shared_seed(&mut self, label: u64) -> u64 {
        self.seed_billed = true;
        rng::mix(self.seed, LABEL_SHARED ^ label.rotate_left(7))
    }

    /// Party-local stream. Billed nowhere: private coins are free. Derived
    /// from the session seed only so that reruns are reproducible.
    pub fn private_rng(&self, party: Party, label: u64) -> ChaCha20Rng {
        rng::chacha(
            self.seed,
            LABEL_PRIVATE ^ label.rotate_left(21) ^ (party.idx() as u64) << 1,
        )
    }

    /// Party-local seed value for stateless PRF use.
    pub fn private_seed(&self, party: Party, label: u64) -> u64 {
        rng::mix(
            self.seed,
            LABEL_PRIVATE ^ label.rotate_left(21) ^ (party.idx() as u64) << 1,
        )
    }

    /// Freezes the session into a report.
    pub fn finish(&mut self, result: ResultValue) -> Result<EstimateReport> {
        if self.finished {
            return Err(Error::ProtocolViolation("finish called twice".into()));
        }
        self.finished = true;
        Ok(EstimateReport {
            result,
            true_value: None,
            bits_total: self.bits_total(),
            rounds: self.round_count,
            seed: self.seed,
        })
    }

    /// Binary transcript dump: (sender byte, 4-byte LE payload length,
    /// payload) per message.
    pub fn transcript_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for m in &self.messages {
            out.push(m.sender.byte());
            out.extend_from_slice(&(m.payload.len() as u32).to_le_bytes());
            out.extend_from_slice(&m.payload);
        }
        out
    }
}
