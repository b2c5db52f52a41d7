"""TCP full-mesh transport for multi-process runs.

Connection direction is deterministic: the lower LP id dials the higher
one. Every link starts with a HELLO exchange; version, LP count and global
seed must agree on both ends or the session aborts. Received frames are
timestamped and pushed to a single queue consumed by the LP's main loop
(per-peer FIFO order is preserved: one receiver thread per link).
"""

from __future__ import annotations

import logging
import queue
import socket
import struct
import threading
import time

from . import frames

log = logging.getLogger(__name__)


class MeshError(Exception):
    pass


class HandshakeError(MeshError):
    pass


def parse_addr(addr: str):
    host, _, port = addr.rpartition(":")
    if not host or not port:
        raise MeshError(f"peer address must be host:port, got {addr!r}")
    return host, int(port)


def _recv_exact(sock, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed the connection")
        buf.extend(chunk)
    return bytes(buf)


def read_frame(sock):
    head = _recv_exact(sock, 4)
    (length,) = struct.unpack(">I", head)
    frames.check_length(length)
    body = _recv_exact(sock, length)
    return frames.decode_body(body[0], body[1:])


class TcpMesh:
    """Connected full mesh for one LP."""

    def __init__(self, lp: int, num_lps: int, peers, seed: int,
                 connect_retries: int = 30, connect_delay_s: float = 1.0):
        self.lp = lp
        self.num_lps = num_lps
        self.peer_addrs = peers
        self.seed = seed
        self.connect_retries = connect_retries
        self.connect_delay_s = connect_delay_s
        self.socks = {}
        self.rx = queue.Queue()
        self._threads = []
        self._listener = None
        self._closed = False

    # -- session establishment -------------------------------------------

    def connect(self) -> "TcpMesh":
        if self.num_lps == 1:
            return self
        hello = frames.Hello(version=frames.PROTOCOL_VERSION, lp=self.lp,
                             num_lps=self.num_lps, seed=self.seed)
        host, port = parse_addr(self.peer_addrs[self.lp])
        listener = socket.create_server((host, port), reuse_port=False)
        listener.settimeout(1.0)
        self._listener = listener
        try:
            expect_inbound = set(range(self.lp))
            dial_targets = list(range(self.lp + 1, self.num_lps))
            deadline = time.monotonic() + self.connect_retries * self.connect_delay_s + 30
            for peer in dial_targets:
                self.socks[peer] = self._dial(peer, hello)
            while expect_inbound:
                if time.monotonic() > deadline:
                    raise MeshError(
                        f"LP {self.lp}: timed out waiting for LPs {sorted(expect_inbound)}")
                try:
                    sock, _ = listener.accept()
                except socket.timeout:
                    continue
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                sock.settimeout(10.0)
                peer_hello = read_frame(sock)
                self._validate_hello(peer_hello)
                peer = peer_hello.lp
                if peer not in expect_inbound:
                    raise HandshakeError(
                        f"LP {self.lp}: unexpected or duplicate HELLO from LP {peer}")
                sock.sendall(frames.encode_frame(hello))
                sock.settimeout(None)
                expect_inbound.discard(peer)
                self.socks[peer] = sock
        except Exception:
            self.close()
            raise
        finally:
            listener.close()
            self._listener = None
        for peer, sock in self.socks.items():
            th = threading.Thread(target=self._receiver, args=(peer, sock),
                                  name=f"rx-lp{self.lp}-from{peer}", daemon=True)
            th.start()
            self._threads.append(th)
        log.info("LP %d: mesh of %d sessions established", self.lp, len(self.socks))
        return self

    def _dial(self, peer: int, hello):
        host, port = parse_addr(self.peer_addrs[peer])
        last_err = None
        for _ in range(max(1, self.connect_retries)):
            try:
                sock = socket.create_connection((host, port), timeout=10.0)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                sock.sendall(frames.encode_frame(hello))
                peer_hello = read_frame(sock)
                self._validate_hello(peer_hello)
                if peer_hello.lp != peer:
                    raise HandshakeError(
                        f"LP {self.lp}: dialed LP {peer} but HELLO names LP {peer_hello.lp}")
                sock.settimeout(None)
                return sock
            except HandshakeError:
                raise
            except (OSError, frames.FrameError) as exc:
                last_err = exc
                time.sleep(self.connect_delay_s)
        raise MeshError(
            f"LP {self.lp}: cannot reach LP {peer} at {host}:{port} "
            f"after {self.connect_retries} attempts: {last_err}")

    def _validate_hello(self, hello) -> None:
        if not isinstance(hello, frames.Hello):
            raise HandshakeError(f"LP {self.lp}: first frame was {type(hello).__name__}, "
                                 "expected HELLO")
        if hello.version != frames.PROTOCOL_VERSION:
            raise HandshakeError(
                f"LP {self.lp}: protocol version mismatch: "
                f"local {frames.PROTOCOL_VERSION}, peer {hello.version}")
        if hello.num_lps != self.num_lps:
            raise HandshakeError(
                f"LP {self.lp}: LP count mismatch: local {self.num_lps}, "
                f"peer {hello.num_lps}")
        if hello.seed != self.seed:
            raise HandshakeError(
                f"LP {self.lp}: global seed mismatch: local {self.seed}, "
                f"peer {hello.seed}")
        if not 0 <= hello.lp < self.num_lps or hello.lp == self.lp:
            raise HandshakeError(f"LP {self.lp}: HELLO names invalid LP {hello.lp}")

    # -- runtime I/O -------------------------------------------------------

    def _receiver(self, peer: int, sock) -> None:
        try:
            while True:
                frame = read_frame(sock)
                self.rx.put((peer, time.monotonic_ns(), frame))
                if isinstance(frame, frames.Bye):
                    return
        except (ConnectionError, OSError, frames.FrameError) as exc:
            if not self._closed:
                log.debug("LP %d: link from %d closed: %s", self.lp, peer, exc)
            self.rx.put((peer, time.monotonic_ns(), None))

    def send(self, peer: int, frame) -> None:
        try:
            self.socks[peer].sendall(frames.encode_frame(frame))
        except OSError as exc:
            raise MeshError(f"LP {self.lp}: send to LP {peer} failed: {exc}") from exc

    def broadcast(self, frame) -> None:
        data = frames.encode_frame(frame)
        for peer in sorted(self.socks):
            try:
                self.socks[peer].sendall(data)
            except OSError as exc:
                raise MeshError(
                    f"LP {self.lp}: send to LP {peer} failed: {exc}") from exc

    def try_broadcast(self, frame) -> None:
        """Best-effort broadcast used on the abort path."""
        data = frames.encode_frame(frame)
        for sock in self.socks.values():
            try:
                sock.sendall(data)
            except OSError:
                pass

    def close(self) -> None:
        self._closed = True
        for sock in self.socks.values():
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                sock.close()
            except OSError:
                pass
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
