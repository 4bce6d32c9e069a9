"""EPC Gen2 CRC-16: polynomial x^16 + x^12 + x^5 + 1, preset 0xFFFF, complemented output."""

from __future__ import annotations

from dataclasses import dataclass


class MalformedInput(ValueError):
    pass


@dataclass(frozen=True)
class CrcParams:
    poly: int = 0x1021
    init: int = 0xFFFF
    xorout: int = 0xFFFF


GEN2 = CrcParams()
# plain polynomial remainder, no preset and no complement
BARE = CrcParams(init=0x0000, xorout=0x0000)


def crc16_compute(data: bytes, params: CrcParams = GEN2) -> int:
    reg = params.init
    for byte in data:
        for i in range(7, -1, -1):
            top = (reg >> 15) ^ (byte >> i)
            reg = (reg << 1) & 0xFFFF
            if top & 1:
                reg ^= params.poly
    return reg ^ params.xorout


def crc16_append(payload: bytes, params: CrcParams = GEN2) -> bytes:
    return bytes(payload) + crc16_compute(payload, params).to_bytes(2, "big")


def crc16_verify(data_with_crc: bytes, params: CrcParams = GEN2) -> bool:
    if len(data_with_crc) < 2:
        raise MalformedInput("need at least the 2 trailing CRC bytes")
    payload, tail = data_with_crc[:-2], data_with_crc[-2:]
    return crc16_compute(payload, params) == int.from_bytes(tail, "big")
