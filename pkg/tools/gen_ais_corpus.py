#!/usr/bin/env python3
"""Generate the AIS test corpus (tests/data/ais_corpus.txt + expected JSON).

The corpus mixes well-known published sample sentences (kept only if their
checksums validate and they decode to their documented vessels) with
sentences encoded here from a Hamburg-harbor scenario.  Expected values
are produced by the independent reference decoder in tests/reference_ais.py,
never by the library under test.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
import reference_ais  # noqa: E402


class BitWriter:
    def __init__(self) -> None:
        self.bits: list[str] = []

    def u(self, value: int, length: int) -> "BitWriter":
        if value < 0 or value >= 1 << length:
            raise ValueError(f"{value} does not fit in {length} unsigned bits")
        self.bits.append(format(value, f"0{length}b"))
        return self

    def s(self, value: int, length: int) -> "BitWriter":
        if value < 0:
            value += 1 << length
        return self.u(value, length)

    def text(self, value: str, length: int) -> "BitWriter":
        """Six-bit ASCII, '@'-padded."""
        chars = value.upper().ljust(length // 6, "@")
        for ch in chars:
            code = ord(ch)
            self.u(code - 64 if 64 <= code < 96 else code, 6)
        return self

    def to_payload(self) -> tuple[str, int]:
        bits = "".join(self.bits)
        fill = (6 - len(bits) % 6) % 6
        bits += "0" * fill
        chars = []
        for i in range(0, len(bits), 6):
            v = int(bits[i : i + 6], 2)
            chars.append(chr(v + 48 if v < 40 else v + 56))
        return "".join(chars), fill


def frame(payload: str, fill: int, frag_count=1, frag_index=1, seq="", channel="A") -> str:
    body = f"AIVDM,{frag_count},{frag_index},{seq},{channel},{payload},{fill}"
    value = 0
    for ch in body:
        value ^= ord(ch)
    return f"!{body}*{value:02X}"


def position_type1(mmsi, lat, lon, sog, cog, heading, second=0) -> str:
    w = BitWriter()
    w.u(1, 6).u(0, 2).u(mmsi, 30)
    w.u(0, 4)  # nav status: under way
    w.s(-128, 8)  # rate of turn: not available
    w.u(1023 if sog is None else round(sog * 10), 10)
    w.u(0, 1)
    w.s(round(lon * 600000), 28)
    w.s(round(lat * 600000), 27)
    w.u(3600 if cog is None else round(cog * 10), 12)
    w.u(511 if heading is None else round(heading), 9)
    w.u(second, 6)
    w.u(0, 2).u(0, 3).u(0, 1).u(0, 19)
    payload, fill = w.to_payload()
    return frame(payload, fill)


def position_type18(mmsi, lat, lon, sog, cog, heading, second=0) -> str:
    w = BitWriter()
    w.u(18, 6).u(0, 2).u(mmsi, 30)
    w.u(0, 8)
    w.u(1023 if sog is None else round(sog * 10), 10)
    w.u(0, 1)
    w.s(round(lon * 600000), 28)
    w.s(round(lat * 600000), 27)
    w.u(3600 if cog is None else round(cog * 10), 12)
    w.u(511 if heading is None else round(heading), 9)
    w.u(second, 6)
    w.u(0, 2).u(1, 1).u(0, 1).u(0, 1).u(0, 1).u(0, 1).u(0, 1).u(0, 1).u(0, 20)
    payload, fill = w.to_payload()
    return frame(payload, fill, channel="B")


def static_type5(mmsi, ship_type, to_bow, to_stern, to_port, to_starboard,
                 name="TEST VESSEL", callsign="DA0001", seq="1") -> list[str]:
    w = BitWriter()
    w.u(5, 6).u(0, 2).u(mmsi, 30)
    w.u(0, 2)  # AIS version
    w.u(0, 30)  # IMO
    w.text(callsign, 42)
    w.text(name, 120)
    w.u(ship_type, 8)
    w.u(to_bow, 9).u(to_stern, 9).u(to_port, 6).u(to_starboard, 6)
    w.u(0, 4)  # EPFD
    w.u(0, 4).u(0, 5).u(0, 5).u(0, 6)  # ETA
    w.u(0, 8)  # draught
    w.text("HAMBURG", 120)
    w.u(0, 1).u(0, 1)
    payload, fill = w.to_payload()
    # Split across two fragments like real feeds do.
    head, tail = payload[:42], payload[42:]
    return [
        frame(head, 0, frag_count=2, frag_index=1, seq=seq, channel="B"),
        frame(tail, fill, frag_count=2, frag_index=2, seq=seq, channel="B"),
    ]


# Published sample sentences (widely circulated protocol-documentation
# examples).  Each is kept only if its checksum validates and the decoded
# MMSI matches the documented one.
DOCUMENTED = [
    ("!AIVDM,1,1,,B,177KQJ5000G?tO`K>RA1wUbN0TKH,0*5C", 477553000),
    ("!AIVDM,1,1,,A,14eG;o@034o8sd<L9i:a;WF>062D,0*7D", 316001245),
    ("!AIVDM,1,1,,B,B52K>;h00Fc>jpUlNV@ikwpUoP06,0*4C", 338087471),
]


def main() -> int:
    base_ms = 1642413600000  # 2022-01-17 10:00:00 UTC
    lines: list[str] = []

    kept_documented = []
    for sentence, mmsi in DOCUMENTED:
        if not reference_ais.checksum_ok(sentence):
            print(f"dropping documented sentence (bad checksum): {sentence}")
            continue
        parts = sentence[1 : sentence.rindex("*")].split(",")
        bits = reference_ais.payload_to_bitstring(parts[5], int(parts[6]))
        decoded = reference_ais.decode_payload(bits)
        if decoded is None or decoded["mmsi"] != mmsi:
            print(f"dropping documented sentence (decode mismatch): {sentence}")
            continue
        kept_documented.append(sentence)
    for i, sentence in enumerate(kept_documented):
        lines.append(f"{base_ms + 1000 * i} {sentence}")

    # Hamburg scenario: three vessels on the Elbe, types 1/18/5 mixed in.
    t = base_ms + 60_000
    scenario = [
        (211234560, 53.5432, 9.9351, 8.7, 271.4, 268.0),
        (211876540, 53.5420, 9.9490, 4.2, 95.0, 96.0),
        (265547250, 53.5455, 9.9255, 0.0, None, None),
    ]
    lines.extend(static_type5(211234560, 70, 20, 9, 4, 3, name="ELBE TRADER", seq="1"))
    lines.extend(static_type5(211876540, 52, 12, 6, 3, 2, name="HARBOUR TUG", seq="2"))
    for step in range(4):
        for i, (mmsi, lat, lon, sog, cog, heading) in enumerate(scenario):
            dlat = 0.0001 * step * (1 if i % 2 == 0 else -1)
            stamp = t + step * 10_000 + i * 300
            if i == 2:
                sentence = position_type18(mmsi, lat + dlat, lon, sog, cog, heading,
                                           second=(step * 10) % 60)
            else:
                sentence = position_type1(mmsi, lat + dlat, lon + 0.0004 * step, sog,
                                          cog, heading, second=(step * 10) % 60)
            lines.append(f"{stamp} {sentence}")

    # Edge lines the decoder must reject or skip (not counted as records):
    corrupted = lines[-1].split(" ", 1)[1][:-1] + ("0" if lines[-1][-1] != "0" else "1")
    lines.append(f"{t + 99_000} {corrupted}")  # checksum failure
    lines.append(f"{t + 99_500} " + position_type1(211000001, 91.0, 181.0, None, None, None))  # lat/lon n/a
    # unsupported type 4 (base station report): header only, zero-padded
    w = BitWriter()
    w.u(4, 6).u(0, 2).u(2113333, 30).u(0, 130)
    payload, fill = w.to_payload()
    lines.append(f"{t + 99_800} " + frame(payload, fill))

    expected = reference_ais.decode_lines(lines)

    data_dir = Path(__file__).resolve().parents[1] / "tests" / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    (data_dir / "ais_corpus.txt").write_text("\n".join(lines) + "\n", encoding="ascii")
    (data_dir / "ais_corpus_expected.json").write_text(
        json.dumps({"messages": expected}, indent=1) + "\n", encoding="utf-8"
    )
    n_pos = sum(1 for m in expected if m["type"] in (1, 2, 3, 18))
    n_static = sum(1 for m in expected if m["type"] == 5)
    print(f"{len(lines)} lines, {len(expected)} decoded ({n_pos} position, {n_static} static)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
