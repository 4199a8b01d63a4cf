"""DNS query decoding/encoding and classic pcap I/O.

Only the pieces the detector needs: the header and first question of a
DNS query, Ethernet/IPv4/UDP framing, and the libpcap file format.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator

DNS_HEADER_LEN = 12
MAX_LABEL_LEN = 63
MAX_NAME_LEN = 255
MAX_FRAME_LEN = 65535

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_SWAPPED = 0xD4C3B2A1
LINKTYPE_ETHERNET = 1

ETH_HEADER_LEN = 14
ETHERTYPE_IPV4 = 0x0800
IPPROTO_TCP = 6
IPPROTO_UDP = 17

QTYPES = {
    "A": 1, "NS": 2, "CNAME": 5, "SOA": 6, "NULL": 10, "PTR": 12, "MX": 15,
    "TXT": 16, "AAAA": 28, "SRV": 33, "HTTPS": 65,
}
QCLASS_IN = 1


class DnsWireError(ValueError):
    """Base class for wire-format errors."""


class TruncatedMessage(DnsWireError):
    pass


class MalformedName(DnsWireError):
    pass


class NotAQuery(DnsWireError):
    pass


class NoQuestion(DnsWireError):
    pass


class LabelTooLong(DnsWireError):
    pass


class NameTooLong(DnsWireError):
    pass


class PcapError(ValueError):
    pass


class BadMagic(PcapError):
    pass


class TruncatedRecord(PcapError):
    pass


class UnsupportedLinkType(PcapError):
    pass


class IoFailure(OSError):
    pass


@dataclass(frozen=True)
class DnsQuery:
    qname: str
    labels: tuple[str, ...]
    qtype: int
    qclass: int = QCLASS_IN
    txn_id: int = 0

    @classmethod
    def from_name(cls, qname: str, qtype: int = 1, qclass: int = QCLASS_IN,
                  txn_id: int = 0) -> "DnsQuery":
        name = qname.rstrip(".")
        labels = tuple(name.split(".")) if name else ()
        return cls(name, labels, qtype, qclass, txn_id)


@dataclass(frozen=True)
class PacketMeta:
    timestamp: tuple[int, int]  # (seconds, microseconds)
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    ip_total_length: int

    @property
    def ts(self) -> float:
        return self.timestamp[0] + self.timestamp[1] / 1e6


@dataclass(frozen=True)
class CapturedPacket:
    timestamp: tuple[int, int]
    frame: bytes
    orig_len: int | None = field(default=None, compare=False)


# -- DNS ---------------------------------------------------------------------

def decode_dns_query(payload: bytes) -> DnsQuery:
    """Decode the first question of a DNS query message.

    Raises a :class:`DnsWireError` subclass on anything that is not a
    well-formed query. Compression pointers are rejected in the qname.
    """
    n = len(payload)
    if n < DNS_HEADER_LEN:
        raise TruncatedMessage(f"{n} bytes, header needs {DNS_HEADER_LEN}")
    txn_id, flags, qdcount = struct.unpack_from("!HHH", payload, 0)
    if flags & 0x8000:
        raise NotAQuery("QR flag set")
    if qdcount == 0:
        raise NoQuestion("QDCOUNT is 0")

    labels = []
    pos = DNS_HEADER_LEN
    wire_len = 0
    while True:
        if pos >= n:
            raise TruncatedMessage("name runs past end of message")
        length = payload[pos]
        if length & 0xC0:
            raise MalformedName(f"label type 0x{length & 0xC0:02x} at offset {pos}")
        pos += 1
        wire_len += 1 + length
        if wire_len > MAX_NAME_LEN:
            raise MalformedName("name exceeds 255 bytes")
        if length == 0:
            break
        if pos + length > n:
            raise MalformedName("label length exceeds remaining bytes")
        labels.append(payload[pos:pos + length].decode("latin-1"))
        pos += length
    if pos + 4 > n:
        raise TruncatedMessage("question missing type/class")
    qtype, qclass = struct.unpack_from("!HH", payload, pos)
    return DnsQuery(".".join(labels), tuple(labels), qtype, qclass, txn_id)


def encode_name(labels: Iterable[str]) -> bytes:
    out = bytearray()
    for label in labels:
        raw = label.encode("latin-1")
        if not 1 <= len(raw) <= MAX_LABEL_LEN:
            raise LabelTooLong(f"label of {len(raw)} bytes: {label[:20]!r}")
        out.append(len(raw))
        out += raw
    out.append(0)
    if len(out) > MAX_NAME_LEN:
        raise NameTooLong(f"encoded name is {len(out)} bytes")
    return bytes(out)


def encode_dns_query(q: DnsQuery, txn_id: int | None = None) -> bytes:
    """Wire-encode ``q`` as a standard recursive query with one question."""
    tid = q.txn_id if txn_id is None else txn_id
    header = struct.pack("!HHHHHH", tid & 0xFFFF, 0x0100, 1, 0, 0, 0)
    return header + encode_name(q.labels) + struct.pack("!HH", q.qtype, q.qclass)


# -- frames ------------------------------------------------------------------

def _ip_checksum(header: bytes) -> int:
    total = sum(struct.unpack(f"!{len(header) // 2}H", header))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def build_ipv4_frame(src_ip: str, dst_ip: str, proto: int, l4: bytes,
                     ident: int = 0, ttl: int = 64,
                     src_mac: bytes = b"\x02\x00\x00\x00\x00\x01",
                     dst_mac: bytes = b"\x02\x00\x00\x00\x00\x02") -> bytes:
    total_length = 20 + len(l4)
    hdr = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total_length, ident & 0xFFFF, 0,
                      ttl, proto, 0, ipaddress.IPv4Address(src_ip).packed,
                      ipaddress.IPv4Address(dst_ip).packed)
    hdr = hdr[:10] + struct.pack("!H", _ip_checksum(hdr)) + hdr[12:]
    eth = dst_mac + src_mac + struct.pack("!H", ETHERTYPE_IPV4)
    return eth + hdr + l4


def build_udp_frame(src_ip: str, dst_ip: str, src_port: int, dst_port: int,
                    payload: bytes, ident: int = 0) -> bytes:
    """Ethernet II / IPv4 (no options) / UDP frame. UDP checksum left at 0."""
    udp = struct.pack("!HHHH", src_port, dst_port, 8 + len(payload), 0) + payload
    return build_ipv4_frame(src_ip, dst_ip, IPPROTO_UDP, udp, ident=ident)


def build_tcp_frame(src_ip: str, dst_ip: str, src_port: int, dst_port: int,
                    payload: bytes = b"", ident: int = 0) -> bytes:
    tcp = struct.pack("!HHIIBBHHH", src_port, dst_port, 0, 0, 5 << 4, 0x18,
                      65535, 0, 0) + payload
    return build_ipv4_frame(src_ip, dst_ip, IPPROTO_TCP, tcp, ident=ident)


def parse_udp_frame(pkt: CapturedPacket) -> tuple[PacketMeta, bytes] | None:
    """Return (meta, udp payload) for Ethernet/IPv4/UDP frames, else None."""
    frame = pkt.frame
    if len(frame) < ETH_HEADER_LEN + 28:
        return None
    if frame[12:14] != b"\x08\x00":
        return None
    ip = ETH_HEADER_LEN
    vihl = frame[ip]
    if vihl >> 4 != 4:
        return None
    ihl = (vihl & 0x0F) * 4
    if ihl < 20 or frame[ip + 9] != IPPROTO_UDP:
        return None
    total_length = struct.unpack_from("!H", frame, ip + 2)[0]
    frag = struct.unpack_from("!H", frame, ip + 6)[0]
    if frag & 0x3FFF:  # fragment: no UDP header of our own
        return None
    udp = ip + ihl
    if udp + 8 > len(frame) or total_length < ihl + 8:
        return None
    sport, dport, ulen = struct.unpack_from("!HHH", frame, udp)
    end = min(udp + max(ulen, 8), ip + total_length, len(frame))
    meta = PacketMeta(
        timestamp=pkt.timestamp,
        src_ip=str(ipaddress.IPv4Address(frame[ip + 12:ip + 16])),
        dst_ip=str(ipaddress.IPv4Address(frame[ip + 16:ip + 20])),
        src_port=sport,
        dst_port=dport,
        ip_total_length=total_length,
    )
    return meta, frame[udp + 8:end]


def dns_query_of(pkt: CapturedPacket) -> tuple[PacketMeta, DnsQuery] | None:
    """Dispatcher filter: a UDP/IPv4 query to port 53, or None."""
    parsed = parse_udp_frame(pkt)
    if parsed is None:
        return None
    meta, payload = parsed
    if meta.dst_port != 53:
        return None
    try:
        q = decode_dns_query(payload)
    except DnsWireError:
        return None
    if not q.qname:
        return None
    return meta, q


def extract_dns_packets(packets: Iterable[CapturedPacket]) -> list[tuple[PacketMeta, DnsQuery]]:
    out = []
    for pkt in packets:
        item = dns_query_of(pkt)
        if item is not None:
            out.append(item)
    return out


# -- pcap --------------------------------------------------------------------

def iter_pcap(stream: BinaryIO) -> Iterator[CapturedPacket]:
    head = stream.read(24)
    if len(head) < 24:
        raise BadMagic("missing global header")
    magic_le = struct.unpack("<I", head[:4])[0]
    if magic_le == PCAP_MAGIC:
        endian = "<"
    elif magic_le == PCAP_MAGIC_SWAPPED:
        endian = ">"
    else:
        raise BadMagic(f"magic 0x{magic_le:08x}")
    _, _, _, _, _, _, linktype = struct.unpack(endian + "IHHiIII", head)
    if linktype != LINKTYPE_ETHERNET:
        raise UnsupportedLinkType(f"linktype {linktype}")
    rec_fmt = endian + "IIII"
    while True:
        rec = stream.read(16)
        if not rec:
            return
        if len(rec) < 16:
            raise TruncatedRecord("partial record header")
        ts_sec, ts_usec, incl_len, orig_len = struct.unpack(rec_fmt, rec)
        if incl_len > MAX_FRAME_LEN:
            raise TruncatedRecord(f"record length {incl_len} exceeds snaplen")
        data = stream.read(incl_len)
        if len(data) < incl_len:
            raise TruncatedRecord(f"record wants {incl_len} bytes, got {len(data)}")
        yield CapturedPacket((ts_sec, ts_usec), data, orig_len)


def read_pcap(stream: BinaryIO) -> list[CapturedPacket]:
    return list(iter_pcap(stream))


def write_pcap(packets: Iterable[CapturedPacket], stream: BinaryIO,
               endian: str = "<") -> int:
    """Write classic pcap (microsecond timestamps, Ethernet). Returns bytes written."""
    chunks = [struct.pack(endian + "IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, MAX_FRAME_LEN,
                          LINKTYPE_ETHERNET)]
    for pkt in packets:
        if len(pkt.frame) > MAX_FRAME_LEN:
            raise ValueError(f"frame of {len(pkt.frame)} bytes")
        sec, usec = pkt.timestamp
        orig = pkt.orig_len if pkt.orig_len is not None else len(pkt.frame)
        chunks.append(struct.pack(endian + "IIII", sec, usec, len(pkt.frame), orig))
        chunks.append(pkt.frame)
    data = b"".join(chunks)
    try:
        stream.write(data)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return len(data)


def pcap_bytes(packets: Iterable[CapturedPacket]) -> bytes:
    import io

    buf = io.BytesIO()
    write_pcap(packets, buf)
    return buf.getvalue()
