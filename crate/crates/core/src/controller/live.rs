// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Socket demo: the controller on real local TCP sockets, clocked by wall
//! time.
//!
//! Every channel carries frames of a big-endian u32 length followed by the
//! body. The southbound channel speaks the OpenFlow-lite codec; a switch
//! opens its session with `Echo { nonce: device_id }` and the controller
//! echoes it back. The event channel takes one `key=value` subscription
//! body, answers with a confirmation body and then pushes envelope frames.
//! The northbound channel answers each `key=value` request with a reply body.
//!
//! All controller state sits behind one lock, so commands for a device are
//! written to its session in request order.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::text::{confirmation_to_kv, subscription_from_kv, Kv, NbReply, NbRequest};
use super::{Controller, SbCommand};
use crate::netproto::{decode_of, OfMessage};
use crate::time::SimTime;

/// Largest accepted frame body.
pub const MAX_FRAME: usize = 1 << 20;

pub fn write_frame(w: &mut impl Write, body: &[u8]) -> io::Result<()> {
    let len = u32::try_from(body.len())
        .ok()
        .filter(|&n| n as usize <= MAX_FRAME)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(body)?;
    w.flush()
}

/// `None` on a clean end of stream before a length prefix.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut body = vec![0; len];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

fn invalid(e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

struct Shared {
    ctl: Mutex<Controller>,
    published: Condvar,
    sessions: Mutex<BTreeMap<u64, TcpStream>>,
    epoch: Instant,
    stop: AtomicBool,
}

impl Shared {
    fn now(&self) -> SimTime {
        SimTime::from(self.epoch.elapsed())
    }

    fn ctl(&self) -> MutexGuard<'_, Controller> {
        self.ctl.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Writes queued southbound commands; call with the controller locked.
    fn flush_outbox(&self, cmds: Vec<SbCommand>) {
        let mut sessions = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        for cmd in cmds {
            let device = match &cmd.msg {
                OfMessage::FlowMod { device_id, .. } | OfMessage::PacketOut { device_id, .. } => *device_id,
                _ => continue,
            };
            let Ok(body) = cmd.msg.encode() else { continue };
            if let Some(s) = sessions.get_mut(&device) {
                if write_frame(s, &body).is_err() {
                    sessions.remove(&device);
                }
            }
        }
    }
}

pub struct LiveServer {
    listeners: [TcpListener; 3],
    shared: Arc<Shared>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiveAddrs {
    pub sb: SocketAddr,
    pub event: SocketAddr,
    pub nb: SocketAddr,
}

impl LiveServer {
    /// The controller should be in external mode with zero broker delay;
    /// its NB delays are ignored since the sockets supply real latency.
    pub fn bind(ctl: Controller, sb: impl ToSocketAddrs, event: impl ToSocketAddrs, nb: impl ToSocketAddrs) -> io::Result<Self> {
        Ok(LiveServer {
            listeners: [TcpListener::bind(sb)?, TcpListener::bind(event)?, TcpListener::bind(nb)?],
            shared: Arc::new(Shared {
                ctl: Mutex::new(ctl),
                published: Condvar::new(),
                sessions: Mutex::new(BTreeMap::new()),
                epoch: Instant::now(),
                stop: AtomicBool::new(false),
            }),
        })
    }

    pub fn addrs(&self) -> io::Result<LiveAddrs> {
        Ok(LiveAddrs {
            sb: self.listeners[0].local_addr()?,
            event: self.listeners[1].local_addr()?,
            nb: self.listeners[2].local_addr()?,
        })
    }

    pub fn spawn(self) -> io::Result<LiveHandle> {
        let addrs = self.addrs()?;
        let [sb, ev, nb] = self.listeners;
        let threads = vec![
            accept_loop(sb, Arc::clone(&self.shared), sb_session),
            accept_loop(ev, Arc::clone(&self.shared), event_session),
            accept_loop(nb, Arc::clone(&self.shared), nb_session),
        ];
        Ok(LiveHandle {
            addrs,
            shared: self.shared,
            threads,
        })
    }
}

pub struct LiveHandle {
    pub addrs: LiveAddrs,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl LiveHandle {
    /// Runs `f` against the controller under its lock.
    pub fn with_controller<T>(&self, f: impl FnOnce(&mut Controller) -> T) -> T {
        f(&mut self.shared.ctl())
    }

    /// Stops accepting and waits for the acceptors. Open sessions end when
    /// their peers disconnect.
    pub fn shutdown(self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        self.shared.published.notify_all();
        for a in [self.addrs.sb, self.addrs.event, self.addrs.nb] {
            let _ = TcpStream::connect_timeout(&a, Duration::from_secs(1));
        }
        for t in self.threads {
            let _ = t.join();
        }
    }

    /// Blocks until the acceptors exit.
    pub fn join(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }
}

fn accept_loop(l: TcpListener, shared: Arc<Shared>, handler: fn(TcpStream, &Shared) -> io::Result<()>) -> JoinHandle<()> {
    std::thread::spawn(move || {
        for conn in l.incoming() {
            if shared.stop.load(Ordering::SeqCst) {
                break;
            }
            let Ok(conn) = conn else { continue };
            let shared = Arc::clone(&shared);
            std::thread::spawn(move || {
                let _ = conn.set_nodelay(true);
                let _ = handler(conn, &shared);
            });
        }
    })
}

fn sb_session(mut conn: TcpStream, shared: &Shared) -> io::Result<()> {
    let hello = read_frame(&mut conn)?.ok_or_else(|| invalid("no hello"))?;
    let device_id = match decode_of(&hello).map_err(invalid)? {
        OfMessage::Echo { nonce } if nonce != 0 => nonce,
        _ => return Err(invalid("first message must be Echo{device_id}")),
    };
    write_frame(&mut conn, &hello)?;
    shared
        .sessions
        .lock()
        .unwrap_or_else(|p| p.into_inner())
        .insert(device_id, conn.try_clone()?);
    shared.ctl().register_device(device_id, Vec::new());
    while let Some(body) = read_frame(&mut conn)? {
        match decode_of(&body).map_err(invalid)? {
            OfMessage::PacketIn {
                in_port,
                buffer_id,
                frame,
                ..
            } => {
                let mut ctl = shared.ctl();
                let _ = ctl.on_packet_in(device_id, in_port, buffer_id, &frame, shared.now());
                let cmds = ctl.drain_outbox();
                shared.flush_outbox(cmds);
                shared.published.notify_all();
            }
            OfMessage::FlowRemoved { .. } => {
                let _ = shared.ctl().on_flow_removed(device_id);
            }
            OfMessage::Echo { .. } => write_frame(&mut conn, &body)?,
            _ => return Err(invalid("unexpected southbound message")),
        }
    }
    shared
        .sessions
        .lock()
        .unwrap_or_else(|p| p.into_inner())
        .remove(&device_id);
    Ok(())
}

fn read_kv(conn: &mut TcpStream) -> io::Result<Option<Kv>> {
    match read_frame(conn)? {
        None => Ok(None),
        Some(body) => {
            let s = String::from_utf8(body).map_err(invalid)?;
            Kv::parse(&s).map(Some).map_err(invalid)
        }
    }
}

fn event_session(mut conn: TcpStream, shared: &Shared) -> io::Result<()> {
    let kv = read_kv(&mut conn)?.ok_or_else(|| invalid("no subscription"))?;
    let req = subscription_from_kv(&kv).map_err(invalid)?;
    let conf = shared.ctl().handle_subscribe(&req);
    write_frame(&mut conn, confirmation_to_kv(&conf).to_string().as_bytes())?;
    if !conf.granted {
        return Ok(());
    }
    let mut ctl = shared.ctl();
    while !shared.stop.load(Ordering::SeqCst) {
        let now = shared.now();
        let records = ctl
            .broker_mut()
            .poll(&req.group_id, &req.app_id, 64, now)
            .map_err(invalid)?;
        if records.is_empty() {
            ctl = shared
                .published
                .wait_timeout(ctl, Duration::from_millis(50))
                .unwrap_or_else(|p| p.into_inner())
                .0;
            continue;
        }
        drop(ctl);
        for r in &records {
            write_frame(&mut conn, &r.value)?;
        }
        ctl = shared.ctl();
        for r in &records {
            ctl.broker_mut()
                .commit(&req.group_id, &r.topic_partition(), r.offset + 1)
                .map_err(invalid)?;
        }
    }
    Ok(())
}

fn nb_session(mut conn: TcpStream, shared: &Shared) -> io::Result<()> {
    while let Some(kv) = read_kv(&mut conn)? {
        let reply = match NbRequest::from_kv(&kv) {
            Err(e) => NbReply::Error(e.to_string()),
            Ok(req) => {
                let mut ctl = shared.ctl();
                let now = shared.now();
                let res = match req {
                    NbRequest::Install { device_id, rule } => ctl
                        .nb_install_flow(rule, device_id, now)
                        .map(|ack| NbReply::Installed { entry_id: ack.entry_id }),
                    NbRequest::PacketOut {
                        device_id,
                        in_port,
                        out,
                        frame,
                    } => ctl
                        .nb_packet_out(device_id, in_port, out, frame, now)
                        .map(|()| NbReply::Done),
                };
                let cmds = ctl.drain_outbox();
                shared.flush_outbox(cmds);
                res.unwrap_or_else(|e| NbReply::Error(e.to_string()))
            }
        };
        write_frame(&mut conn, reply.to_kv().to_string().as_bytes())?;
    }
    let _ = conn.shutdown(Shutdown::Both);
    Ok(())
}
