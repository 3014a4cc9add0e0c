"""Independent reference computations; plain loops over bit strings, no engine calls."""
import itertools

import numpy as np

R = 1 / (2 * np.sqrt(2))
S = 1 / np.sqrt(2)

# literal ket tables, qubits (A1, A2, B1, B2, C)
BROWN = {"00101": R, "00110": -R, "01000": R, "01011": -R, "10001": R, "10010": R, "11100": R, "11111": R}
TRANSFORMED = {"11101": -R, "11110": R, "00000": R, "00011": -R, "01001": R, "01010": R, "10100": R, "10111": R}

BELL = {
    1: {"00": S, "11": S},
    2: {"00": S, "11": -S},
    3: {"01": S, "10": S},
    4: {"01": S, "10": -S},
}


def system_amplitudes(a, b):
    """dict bits(a b A1 A2 B1 B2 C) -> amplitude, after Alice's unitary."""
    out = {}
    for xa, xb in itertools.product("01", repeat=2):
        for chan, amp in TRANSFORMED.items():
            out[xa + xb + chan] = a[int(xa)] * b[int(xb)] * amp
    return out


def residual_a2_b1_c(a, b, i, j):
    """Unnormalized <bell_i|_{a A1} <bell_j|_{B2 b} |psi>; dict bits(A2 B1 C) -> amplitude."""
    res = {}
    for bits, amp in system_amplitudes(a, b).items():
        xa, xb, a1, a2, b1, b2, c = bits
        w = np.conj(BELL[i].get(xa + a1, 0)) * np.conj(BELL[j].get(b2 + xb, 0))
        if w:
            key = a2 + b1 + c
            res[key] = res.get(key, 0) + w * amp
    return res


def outcome_probability(a, b, i, j, k):
    """Born probability via an explicit 128x128 projector."""
    psi = np.zeros(128, dtype=complex)
    for bits, amp in system_amplitudes(a, b).items():
        psi[int(bits, 2)] = amp
    proj = np.zeros((128, 128), dtype=complex)
    for x in range(128):
        bx = format(x, "07b")
        for y in range(128):
            by = format(y, "07b")
            # identity on A2 (3) and B1 (4); |k><k| on C (6)
            if bx[3] != by[3] or bx[4] != by[4] or bx[6] != str(k) or by[6] != str(k):
                continue
            pa = BELL[i].get(bx[0] + bx[2], 0) * np.conj(BELL[i].get(by[0] + by[2], 0))
            pb = BELL[j].get(bx[5] + bx[1], 0) * np.conj(BELL[j].get(by[5] + by[1], 0))
            proj[x, y] = pa * pb
    return float(np.vdot(psi, proj @ psi).real), proj
