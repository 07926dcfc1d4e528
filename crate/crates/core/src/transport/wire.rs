//! Binary framing. A frame is a 4-byte big-endian length `L`, then `L` bytes:
//! a 1-byte kind tag followed by the payload. Every payload starts with the
//! sender id as a big-endian u32; all integers are big-endian.

use super::message::{CandidateRef, Message, Outcome, SnapshotId, Summary};
use crate::error::{Error, Result};
use crate::model::AgentId;
use crate::search::{PackedState, Segment};
use std::io::Read;

/// Frames larger than this are rejected as corrupt.
pub const MAX_FRAME: usize = 64 << 20;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }
    fn u32s(&mut self, vs: &[u32]) {
        self.u32(vs.len() as u32);
        vs.iter().for_each(|&v| self.u32(v));
    }
    fn u64s(&mut self, vs: &[u64]) {
        self.u32(vs.len() as u32);
        vs.iter().for_each(|&v| self.u64(v));
    }
    fn ids(&mut self, vs: &[usize]) {
        self.u32(vs.len() as u32);
        vs.iter().for_each(|&v| self.u32(v as u32));
    }
    fn state(&mut self, s: &PackedState) {
        self.u32s(&s.public);
        self.u32(s.segments.len() as u32);
        for seg in s.segments.iter() {
            match seg {
                Segment::Plain(v) => {
                    self.u8(0);
                    self.u32s(v);
                }
                Segment::Token(t) => {
                    self.u8(1);
                    self.0.extend_from_slice(t);
                }
            }
        }
    }
    fn outcome(&mut self, o: &Outcome) {
        match o {
            Outcome::Solved {
                cost,
                plan,
                f_trace,
            } => {
                self.u8(0);
                self.u64(*cost);
                self.ids(plan);
                self.u64s(f_trace);
            }
            Outcome::Unsolvable => self.u8(1),
        }
    }
    fn snapshot_id(&mut self, id: &SnapshotId) {
        self.u32(id.initiator as u32);
        self.u32(id.seq);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Transport("truncated frame".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n.saturating_mul(elem) > self.buf.len() - self.pos {
            return Err(Error::Transport(format!("list length {n} exceeds frame")));
        }
        Ok(n)
    }
    fn u32s(&mut self) -> Result<Vec<u32>> {
        let n = self.len(4)?;
        (0..n).map(|_| self.u32()).collect()
    }
    fn u64s(&mut self) -> Result<Vec<u64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.u64()).collect()
    }
    fn ids(&mut self) -> Result<Vec<usize>> {
        Ok(self.u32s()?.into_iter().map(|v| v as usize).collect())
    }
    fn state(&mut self) -> Result<PackedState> {
        let public = self.u32s()?.into_boxed_slice();
        let n = self.len(1)?;
        let segments = (0..n)
            .map(|_| match self.u8()? {
                0 => Ok(Segment::Plain(self.u32s()?.into_boxed_slice())),
                1 => Ok(Segment::Token(self.take(16)?.try_into().unwrap())),
                t => Err(Error::Transport(format!("unknown segment tag {t}"))),
            })
            .collect::<Result<_>>()?;
        Ok(PackedState { public, segments })
    }
    fn outcome(&mut self) -> Result<Outcome> {
        match self.u8()? {
            0 => Ok(Outcome::Solved {
                cost: self.u64()?,
                plan: self.ids()?,
                f_trace: self.u64s()?,
            }),
            1 => Ok(Outcome::Unsolvable),
            t => Err(Error::Transport(format!("unknown outcome tag {t}"))),
        }
    }
    fn snapshot_id(&mut self) -> Result<SnapshotId> {
        Ok(SnapshotId {
            initiator: self.u32()? as AgentId,
            seq: self.u32()?,
        })
    }
}

/// Encodes a complete frame, length prefix included.
pub fn encode_frame(from: AgentId, msg: &Message) -> Vec<u8> {
    let mut w = Writer(vec![0, 0, 0, 0]);
    w.u8(msg.kind());
    w.u32(from as u32);
    match msg {
        Message::State {
            state,
            g,
            h,
            participants,
            node,
        } => {
            w.state(state);
            w.u64(*g);
            w.u64(*h);
            w.u64(*participants);
            w.u64(*node);
        }
        Message::GoalCandidate {
            state,
            g,
            participants,
            node,
        } => {
            w.state(state);
            w.u64(*g);
            w.u64(*participants);
            w.u64(*node);
        }
        Message::SnapshotMarker { id } => w.snapshot_id(id),
        Message::SnapshotReport { id, summary } => {
            w.snapshot_id(id);
            w.u64(summary.min_f);
            w.u64(summary.count);
            match summary.best {
                Some(c) => {
                    w.u8(1);
                    w.u64(c.cost);
                    w.u32(c.proposer as u32);
                    w.u64(c.node);
                }
                None => w.u8(0),
            }
        }
        Message::TracebackRequest {
            node,
            initiator,
            plan,
            f_trace,
        } => {
            w.u64(*node);
            w.u32(*initiator as u32);
            w.ids(plan);
            w.u64s(f_trace);
        }
        Message::TracebackSegment { plan, f_trace } => {
            w.ids(plan);
            w.u64s(f_trace);
        }
        Message::Terminate { outcome } => w.outcome(outcome),
        Message::FailureNotice { failed } => w.u32(*failed as u32),
        Message::CandidateAck { node, accept } => {
            w.u64(*node);
            w.u8(u8::from(*accept));
        }
    }
    let len = (w.0.len() - 4) as u32;
    w.0[..4].copy_from_slice(&len.to_be_bytes());
    w.0
}

/// Decodes a frame body (kind tag and payload, without the length prefix).
pub fn decode_body(body: &[u8]) -> Result<(AgentId, Message)> {
    let mut r = Reader { buf: body, pos: 0 };
    let kind = r.u8()?;
    let from = r.u32()? as AgentId;
    let msg = match kind {
        1 => Message::State {
            state: r.state()?,
            g: r.u64()?,
            h: r.u64()?,
            participants: r.u64()?,
            node: r.u64()?,
        },
        2 => Message::GoalCandidate {
            state: r.state()?,
            g: r.u64()?,
            participants: r.u64()?,
            node: r.u64()?,
        },
        3 => Message::SnapshotMarker {
            id: r.snapshot_id()?,
        },
        4 => {
            let id = r.snapshot_id()?;
            let min_f = r.u64()?;
            let count = r.u64()?;
            let best = match r.u8()? {
                0 => None,
                1 => Some(CandidateRef {
                    cost: r.u64()?,
                    proposer: r.u32()? as AgentId,
                    node: r.u64()?,
                }),
                t => return Err(Error::Transport(format!("unknown candidate tag {t}"))),
            };
            Message::SnapshotReport {
                id,
                summary: Summary { min_f, count, best },
            }
        }
        5 => Message::TracebackRequest {
            node: r.u64()?,
            initiator: r.u32()? as AgentId,
            plan: r.ids()?,
            f_trace: r.u64s()?,
        },
        6 => Message::TracebackSegment {
            plan: r.ids()?,
            f_trace: r.u64s()?,
        },
        7 => Message::Terminate {
            outcome: r.outcome()?,
        },
        8 => Message::FailureNotice {
            failed: r.u32()? as AgentId,
        },
        9 => Message::CandidateAck {
            node: r.u64()?,
            accept: match r.u8()? {
                0 => false,
                1 => true,
                t => return Err(Error::Transport(format!("bad ack flag {t}"))),
            },
        },
        k => return Err(Error::Transport(format!("unknown message kind {k}"))),
    };
    if r.pos != body.len() {
        return Err(Error::Transport(format!(
            "{} trailing bytes in frame",
            body.len() - r.pos
        )));
    }
    Ok((from, msg))
}

/// Decodes a complete frame, length prefix included.
pub fn decode_frame(frame: &[u8]) -> Result<(AgentId, Message)> {
    if frame.len() < 4 {
        return Err(Error::Transport("truncated frame".into()));
    }
    let len = u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize;
    if len != frame.len() - 4 {
        return Err(Error::Transport(format!(
            "length prefix {len} but {} body bytes",
            frame.len() - 4
        )));
    }
    decode_body(&frame[4..])
}

/// Reads one frame body; `Ok(None)` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len == 0 || len > MAX_FRAME {
        return Err(Error::Transport(format!("bad frame length {len}")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_state() -> PackedState {
        PackedState {
            public: vec![1, 2].into(),
            segments: vec![Segment::Plain(vec![3].into()), Segment::Token([7; 16])].into(),
        }
    }

    fn all_kinds() -> Vec<Message> {
        vec![
            Message::State {
                state: sample_state(),
                g: 4,
                h: u64::MAX,
                participants: 0b101,
                node: 9,
            },
            Message::GoalCandidate {
                state: sample_state(),
                g: 4,
                participants: 1,
                node: 2,
            },
            Message::SnapshotMarker {
                id: SnapshotId {
                    initiator: 2,
                    seq: 5,
                },
            },
            Message::SnapshotReport {
                id: SnapshotId {
                    initiator: 0,
                    seq: 1,
                },
                summary: Summary {
                    min_f: 3,
                    count: 2,
                    best: Some(CandidateRef {
                        cost: 3,
                        proposer: 1,
                        node: 8,
                    }),
                },
            },
            Message::SnapshotReport {
                id: SnapshotId {
                    initiator: 0,
                    seq: 1,
                },
                summary: Summary::default(),
            },
            Message::TracebackRequest {
                node: 1,
                initiator: 0,
                plan: vec![3, 1],
                f_trace: vec![5, 5, 4],
            },
            Message::TracebackSegment {
                plan: vec![],
                f_trace: vec![1],
            },
            Message::Terminate {
                outcome: Outcome::Solved {
                    cost: 2,
                    plan: vec![0, 1],
                    f_trace: vec![2, 2, 2],
                },
            },
            Message::Terminate {
                outcome: Outcome::Unsolvable,
            },
            Message::FailureNotice { failed: 3 },
            Message::CandidateAck {
                node: 4,
                accept: true,
            },
        ]
    }

    #[test]
    fn round_trip_every_kind() {
        for (i, m) in all_kinds().into_iter().enumerate() {
            let frame = encode_frame(i, &m);
            assert_eq!(frame[4], m.kind());
            assert_eq!(decode_frame(&frame).unwrap(), (i, m));
        }
    }

    #[test]
    fn documented_layout() {
        let frame = encode_frame(1, &Message::FailureNotice { failed: 2 });
        assert_eq!(frame, vec![0, 0, 0, 9, 8, 0, 0, 0, 1, 0, 0, 0, 2]);
        let frame = encode_frame(
            0,
            &Message::SnapshotMarker {
                id: SnapshotId {
                    initiator: 0,
                    seq: 3,
                },
            },
        );
        assert_eq!(
            frame,
            vec![0, 0, 0, 13, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 3]
        );
    }

    #[test]
    fn state_size_matches_wire_len() {
        let s = sample_state();
        let frame = encode_frame(
            0,
            &Message::State {
                state: s.clone(),
                g: 0,
                h: 0,
                participants: 0,
                node: 0,
            },
        );
        assert_eq!(frame.len(), 4 + 1 + 4 + s.wire_len() + 32);
    }

    #[test]
    fn corrupt_frames_rejected() {
        let mut frame = encode_frame(
            0,
            &Message::CandidateAck {
                node: 1,
                accept: true,
            },
        );
        *frame.last_mut().unwrap() = 7;
        assert!(decode_frame(&frame).is_err());
        let frame = encode_frame(0, &Message::FailureNotice { failed: 1 });
        assert!(decode_frame(&frame[..frame.len() - 1]).is_err());
        assert!(decode_body(&[42, 0, 0, 0, 0]).is_err());
    }

    #[test]
    fn stream_reading() {
        let mut bytes = encode_frame(0, &Message::FailureNotice { failed: 1 });
        bytes.extend(encode_frame(
            1,
            &Message::CandidateAck {
                node: 2,
                accept: false,
            },
        ));
        let mut cur = std::io::Cursor::new(bytes);
        let a = read_frame(&mut cur).unwrap().unwrap();
        let b = read_frame(&mut cur).unwrap().unwrap();
        assert!(read_frame(&mut cur).unwrap().is_none());
        assert_eq!(
            decode_body(&a).unwrap().1,
            Message::FailureNotice { failed: 1 }
        );
        assert_eq!(decode_body(&b).unwrap().0, 1);
    }
}
