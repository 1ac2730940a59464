"""Independent AIS reference decoder used as a test oracle.

Deliberately written as naive bit-string slicing (payload expanded to a
'0'/'1' character string, fields cut by index) so it shares no arithmetic
with the library's integer-shift decoder.  Only the fields the library
extracts are decoded.
"""

from __future__ import annotations


def checksum_ok(line: str) -> bool:
    if not line.startswith(("!", "$")) or "*" not in line:
        return False
    body, _, tail = line[1:].rpartition("*")
    value = 0
    for ch in body:
        value ^= ord(ch)
    try:
        return value == int(tail[:2], 16)
    except ValueError:
        return False


def payload_to_bitstring(payload: str, fill_bits: int = 0) -> str:
    bits = []
    for ch in payload:
        v = ord(ch) - 48
        if v > 40:
            v -= 8
        bits.append(format(v, "06b"))
    s = "".join(bits)
    return s[: len(s) - fill_bits] if fill_bits else s


def _u(bits: str, start: int, length: int) -> int:
    return int(bits[start : start + length], 2)


def _s(bits: str, start: int, length: int) -> int:
    raw = bits[start : start + length]
    value = int(raw, 2)
    if raw[0] == "1":
        value -= 1 << length
    return value


def decode_payload(bits: str) -> dict | None:
    """Decode one reassembled payload bitstring into a plain field dict."""
    msg_type = _u(bits, 0, 6)
    if msg_type in (1, 2, 3):
        fields = {
            "type": msg_type,
            "mmsi": _u(bits, 8, 30),
            "sog_raw": _u(bits, 50, 10),
            "lon_raw": _s(bits, 61, 28),
            "lat_raw": _s(bits, 89, 27),
            "cog_raw": _u(bits, 116, 12),
            "heading_raw": _u(bits, 128, 9),
        }
    elif msg_type == 18:
        fields = {
            "type": msg_type,
            "mmsi": _u(bits, 8, 30),
            "sog_raw": _u(bits, 46, 10),
            "lon_raw": _s(bits, 57, 28),
            "lat_raw": _s(bits, 85, 27),
            "cog_raw": _u(bits, 112, 12),
            "heading_raw": _u(bits, 124, 9),
        }
    elif msg_type == 5:
        return {
            "type": 5,
            "mmsi": _u(bits, 8, 30),
            "ship_type": _u(bits, 232, 8),
            "to_bow": _u(bits, 240, 9),
            "to_stern": _u(bits, 249, 9),
            "to_port": _u(bits, 258, 6),
            "to_starboard": _u(bits, 264, 6),
        }
    else:
        return None

    fields["longitude"] = fields["lon_raw"] / 600000.0
    fields["latitude"] = fields["lat_raw"] / 600000.0
    fields["sog"] = None if fields["sog_raw"] == 1023 else fields["sog_raw"] / 10.0
    fields["cog"] = None if fields["cog_raw"] >= 3600 else fields["cog_raw"] / 10.0
    fields["heading"] = None if fields["heading_raw"] == 511 else float(fields["heading_raw"])
    return fields


def decode_lines(lines) -> list[dict]:
    """Decode a full corpus the slow way: validate, reassemble, slice.

    Lines may carry a leading epoch-ms tag.  Returns one dict per decoded
    message (position or static), in input order, with raw sentinel values
    left in for the caller to interpret.
    """
    out = []
    fragments: dict[tuple[str, str], list[tuple[str, int]]] = {}
    for raw in lines:
        raw = raw.strip()
        if not raw:
            continue
        timestamp = None
        if not raw.startswith(("!", "$")):
            head, _, rest = raw.partition("!")
            raw = "!" + rest
            value = float(head.strip())
            timestamp = int(round(value * 1000.0)) if value < 1e11 else int(round(value))
        if not checksum_ok(raw):
            continue
        parts = raw[1 : raw.rindex("*")].split(",")
        frag_count, frag_index = int(parts[1]), int(parts[2])
        key = (parts[4], parts[3])
        payload, fill = parts[5], int(parts[6])
        if frag_count == 1:
            bits = payload_to_bitstring(payload, fill)
        else:
            fragments.setdefault(key, []).append((payload, fill))
            if len(fragments[key]) < frag_count:
                continue
            collected = fragments.pop(key)
            bits = payload_to_bitstring(
                "".join(p for p, _ in collected), collected[-1][1]
            )
        decoded = decode_payload(bits)
        if decoded is not None:
            decoded["timestamp_ms"] = timestamp
            out.append(decoded)
    return out
