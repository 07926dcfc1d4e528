//! Transport over TCP. Every agent listens on its own address and opens one
//! outgoing connection to every other agent; frames travel on the outgoing
//! connection and are read by a thread per incoming connection. A connection
//! that closes before `finish` is reported as a failure notice.

use super::message::Message;
use super::wire::{decode_body, encode_frame, read_frame};
use super::{TrafficStats, Transport};
use crate::error::{Error, Result};
use crate::model::AgentId;
use std::io::{BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::{Duration, Instant};

const MAGIC: &[u8; 4] = b"MAPL";

enum Event {
    Frame(AgentId, Message),
    Closed(AgentId),
    Failed(String),
}

pub struct TcpTransport {
    me: AgentId,
    n: usize,
    out: Vec<Option<TcpStream>>,
    rx: Receiver<Event>,
    stats: TrafficStats,
    closed: Vec<bool>,
    finishing: bool,
}

fn reader(stream: TcpStream, tx: Sender<Event>, n: usize) {
    let mut r = BufReader::new(stream);
    let mut hello = [0u8; 8];
    if r.read_exact(&mut hello).is_err() || &hello[..4] != MAGIC {
        let _ = tx.send(Event::Failed("bad handshake".into()));
        return;
    }
    let peer = u32::from_be_bytes(hello[4..].try_into().unwrap()) as AgentId;
    if peer >= n {
        let _ = tx.send(Event::Failed(format!(
            "handshake from unknown agent {peer}"
        )));
        return;
    }
    loop {
        match read_frame(&mut r) {
            Ok(Some(body)) => match decode_body(&body) {
                Ok((from, msg)) if from == peer => {
                    if tx.send(Event::Frame(from, msg)).is_err() {
                        return;
                    }
                }
                Ok((from, _)) => {
                    let _ = tx.send(Event::Failed(format!(
                        "agent {peer} sent a frame as agent {from}"
                    )));
                    return;
                }
                Err(e) => {
                    let _ = tx.send(Event::Failed(e.to_string()));
                    return;
                }
            },
            Ok(None) | Err(_) => {
                let _ = tx.send(Event::Closed(peer));
                return;
            }
        }
    }
}

impl TcpTransport {
    /// Connects agent `me` to every address in `addrs` (indexed by agent id),
    /// accepting the others' connections on `listener`.
    pub fn establish(
        me: AgentId,
        addrs: &[SocketAddr],
        listener: TcpListener,
        timeout: Duration,
    ) -> Result<Self> {
        let n = addrs.len();
        let (tx, rx) = channel();
        let acc_tx = tx.clone();
        thread::spawn(move || {
            for _ in 1..n {
                match listener.accept() {
                    Ok((s, _)) => {
                        let _ = s.set_nodelay(true);
                        let tx = acc_tx.clone();
                        thread::spawn(move || reader(s, tx, n));
                    }
                    Err(e) => {
                        let _ = acc_tx.send(Event::Failed(format!("accept: {e}")));
                        return;
                    }
                }
            }
        });
        let deadline = Instant::now() + timeout;
        let mut out = Vec::with_capacity(n);
        for (j, addr) in addrs.iter().enumerate() {
            if j == me {
                out.push(None);
                continue;
            }
            let mut s = loop {
                match TcpStream::connect(addr) {
                    Ok(s) => break s,
                    Err(e) if Instant::now() >= deadline => {
                        return Err(Error::Transport(format!(
                            "connect to agent {j} at {addr}: {e}"
                        )))
                    }
                    Err(_) => thread::sleep(Duration::from_millis(20)),
                }
            };
            s.set_nodelay(true)?;
            let mut hello = MAGIC.to_vec();
            hello.extend_from_slice(&(me as u32).to_be_bytes());
            s.write_all(&hello)?;
            out.push(Some(s));
        }
        Ok(TcpTransport {
            me,
            n,
            out,
            rx,
            stats: TrafficStats::default(),
            closed: vec![false; n],
            finishing: false,
        })
    }

    fn handle(&mut self, ev: Event, out: &mut Vec<(AgentId, Message)>) -> Result<()> {
        match ev {
            Event::Frame(from, msg) => {
                self.stats.messages_received += 1;
                out.push((from, msg));
            }
            Event::Closed(peer) => {
                self.closed[peer] = true;
                self.out[peer] = None;
                if !self.finishing {
                    out.push((peer, Message::FailureNotice { failed: peer }));
                }
            }
            Event::Failed(msg) => return Err(Error::Transport(msg)),
        }
        Ok(())
    }

    /// Like `poll`, but blocks up to `timeout` for the first message.
    pub fn wait(&mut self, timeout: Duration) -> Result<Vec<(AgentId, Message)>> {
        let mut out = Vec::new();
        match self.rx.recv_timeout(timeout) {
            Ok(ev) => self.handle(ev, &mut out)?,
            Err(RecvTimeoutError::Timeout) => return Ok(out),
            Err(RecvTimeoutError::Disconnected) => {}
        }
        out.extend(self.poll()?);
        Ok(out)
    }

    /// Closes the outgoing connections and waits up to `grace` for the peers
    /// to close theirs, so that nothing still in flight is cut off.
    pub fn finish(mut self, grace: Duration) {
        self.finishing = true;
        for s in self.out.iter().flatten() {
            let _ = s.shutdown(Shutdown::Write);
        }
        let deadline = Instant::now() + grace;
        while self
            .closed
            .iter()
            .enumerate()
            .any(|(j, &c)| j != self.me && !c)
        {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                break;
            }
            match self.rx.recv_timeout(left) {
                Ok(Event::Closed(p)) => self.closed[p] = true,
                Ok(_) => {}
                Err(_) => break,
            }
        }
    }
}

impl Transport for TcpTransport {
    fn me(&self) -> AgentId {
        self.me
    }

    fn num_agents(&self) -> usize {
        self.n
    }

    fn send(&mut self, to: AgentId, msg: &Message) -> Result<()> {
        let frame = encode_frame(self.me, msg);
        self.stats.messages_sent += 1;
        self.stats.bytes_sent += frame.len() as u64;
        if let Some(s) = self.out.get_mut(to).and_then(Option::as_mut) {
            // A write to a crashed peer is dropped; its reader reports it.
            if s.write_all(&frame).is_err() {
                self.out[to] = None;
            }
        }
        Ok(())
    }

    fn poll(&mut self) -> Result<Vec<(AgentId, Message)>> {
        let mut out = Vec::new();
        while let Ok(ev) = self.rx.try_recv() {
            self.handle(ev, &mut out)?;
        }
        Ok(out)
    }

    fn stats(&self) -> TrafficStats {
        self.stats
    }
}

/// Binds `n` listeners on ephemeral localhost ports.
pub fn local_listeners(n: usize) -> Result<(Vec<TcpListener>, Vec<SocketAddr>)> {
    let ls: Vec<TcpListener> = (0..n)
        .map(|_| TcpListener::bind("127.0.0.1:0"))
        .collect::<std::io::Result<_>>()?;
    let addrs = ls
        .iter()
        .map(|l| l.local_addr())
        .collect::<std::io::Result<_>>()?;
    Ok((ls, addrs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::SnapshotId;

    fn establish_all(n: usize) -> Vec<TcpTransport> {
        let (ls, addrs) = local_listeners(n).unwrap();
        let hs: Vec<_> = ls
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let addrs = addrs.clone();
                thread::spawn(move || {
                    TcpTransport::establish(i, &addrs, l, Duration::from_secs(5)).unwrap()
                })
            })
            .collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    }

    fn collect(t: &mut TcpTransport, want: usize) -> Vec<(AgentId, Message)> {
        let mut got = Vec::new();
        let deadline = Instant::now() + Duration::from_secs(5);
        while got.len() < want && Instant::now() < deadline {
            got.extend(t.wait(Duration::from_millis(50)).unwrap());
        }
        got
    }

    #[test]
    fn delivers_in_order_between_three_agents() {
        let mut ts = establish_all(3);
        for seq in 0..20 {
            let m = Message::SnapshotMarker {
                id: SnapshotId { initiator: 1, seq },
            };
            ts[1].send(0, &m).unwrap();
            ts[2].send(0, &m).unwrap();
        }
        let got = collect(&mut ts[0], 40);
        assert_eq!(got.len(), 40);
        for from in [1, 2] {
            let seqs: Vec<u32> = got
                .iter()
                .filter(|(f, _)| *f == from)
                .map(|(_, m)| match m {
                    Message::SnapshotMarker { id } => id.seq,
                    _ => unreachable!(),
                })
                .collect();
            assert_eq!(seqs, (0..20).collect::<Vec<_>>());
        }
        assert_eq!(ts[1].stats().messages_sent, 20);
        for t in ts {
            t.finish(Duration::from_millis(200));
        }
    }

    #[test]
    fn dropped_peer_becomes_failure_notice() {
        let mut ts = establish_all(2);
        let t1 = ts.pop().unwrap();
        drop(t1);
        let got = collect(&mut ts[0], 1);
        assert_eq!(got, vec![(1, Message::FailureNotice { failed: 1 })]);
    }
}
