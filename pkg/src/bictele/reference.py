"""Literal ket expansions used as golden values by ``bictele verify``.

Signs of the nonzero terms; every term has magnitude 1/(2 sqrt 2). Qubit
order is (A1, A2, B1, B2, C).
"""
import numpy as np

TERM_MAGNITUDE = 1 / (2 * np.sqrt(2))

BROWN_EXPANSION = {
    "00101": +1,
    "00110": -1,
    "01000": +1,
    "01011": -1,
    "10001": +1,
    "10010": +1,
    "11100": +1,
    "11111": +1,
}

# Brown state after Alice's unitary on (A1, A2)
TRANSFORMED_EXPANSION = {
    "11101": -1,
    "11110": +1,
    "00000": +1,
    "00011": -1,
    "01001": +1,
    "01010": +1,
    "10100": +1,
    "10111": +1,
}


def expansion_vector(terms: dict) -> np.ndarray:
    vec = np.zeros(32, dtype=complex)
    for bits, sign in terms.items():
        vec[int(bits, 2)] = sign * TERM_MAGNITUDE
    return vec


def max_amplitude_error(amplitudes: np.ndarray, terms: dict) -> float:
    return float(np.max(np.abs(np.asarray(amplitudes) - expansion_vector(terms))))
