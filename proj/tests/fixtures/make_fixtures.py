#!/usr/bin/env python3
"""Writes the frozen wire and IDX fixtures with plain struct packing.

Independent of the C++ codec: byte layouts are spelled out here by hand.
Run from any directory; outputs land next to this script.
"""
import os
import struct

HERE = os.path.dirname(os.path.abspath(__file__))


def frame(tag, payload):
    return b"UAFG" + struct.pack("<BBQ", 1, tag, len(payload)) + payload


def matrix(rows):
    r, c = len(rows), len(rows[0]) if rows else 0
    out = struct.pack("<QQ", r, c)
    for row in rows:
        out += b"".join(struct.pack("<d", v) for v in row)
    return out


def syn_batch(rnd, batch_id, samples, labels=None):
    p = struct.pack("<QQ", rnd, batch_id) + matrix(samples)
    if labels is None:
        p += struct.pack("<B", 0)
    else:
        p += struct.pack("<BQ", 1, len(labels)) + b"".join(struct.pack("<q", y) for y in labels)
    return frame(1, p)


def feedback(rnd, batch_id, site, preds, grads, disc_loss):
    p = struct.pack("<QQQ", rnd, batch_id, site)
    p += struct.pack("<Q", len(preds)) + b"".join(struct.pack("<d", v) for v in preds)
    p += matrix(grads) + struct.pack("<d", disc_loss)
    return frame(2, p)


def round_control(rnd, directive):
    return frame(3, struct.pack("<QB", rnd, directive))


def site_hello(site, n, counts):
    p = struct.pack("<QQQ", site, n, len(counts))
    for label in sorted(counts):
        p += struct.pack("<QQ", label, counts[label])
    return frame(4, p)


WIRE = {
    "round_control_begin": round_control(0, 0),
    "round_control_shutdown": round_control(42, 2),
    "syn_batch": syn_batch(3, 7, [[1.5, -2.0], [0.25, 1e-3]]),
    "syn_batch_labels": syn_batch(3, 8, [[0.5, 0.5], [-1.0, 4.0]], [1, 0]),
    "feedback": feedback(3, 7, 2, [0.25, 0.75], [[0.5, -0.5], [1.0, 2.0]], 1.375),
    "site_hello": site_hello(1, 2500, {}),
    "site_hello_counts": site_hello(0, 15, {0: 10, 3: 5}),
}


def write_idx():
    # Three 2x3 images; pixel values chosen to hit 0, 255 and the midpoint.
    pixels = [
        [0, 255, 128, 1, 2, 3],
        [10, 20, 30, 40, 50, 60],
        [255, 255, 0, 0, 127, 128],
    ]
    with open(os.path.join(HERE, "idx", "images.idx"), "wb") as f:
        f.write(struct.pack(">IIII", 0x803, 3, 2, 3))
        for img in pixels:
            f.write(bytes(img))
    with open(os.path.join(HERE, "idx", "labels.idx"), "wb") as f:
        f.write(struct.pack(">II", 0x801, 3))
        f.write(bytes([7, 0, 9]))
    with open(os.path.join(HERE, "idx", "labels_short.idx"), "wb") as f:
        f.write(struct.pack(">II", 0x801, 2))
        f.write(bytes([7, 0]))


def main():
    for name, data in WIRE.items():
        with open(os.path.join(HERE, "wire", name + ".hex"), "w") as f:
            f.write(data.hex() + "\n")
    write_idx()


if __name__ == "__main__":
    main()
