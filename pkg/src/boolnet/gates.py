"""The sixteen two-input Boolean gates and their real-valued relaxations.

Each gate has a fixed opcode in [0, 15].  The opcode equals the gate's
truth table read as a 4-bit big-endian number over the input order
(0,0), (0,1), (1,0), (1,1) -- e.g. AND outputs 0,0,0,1 -> 0b0001 -> 1.
This numbering is part of the serialized model and netlist formats and
must never change.

Every gate's relaxation on [0,1]^2 is bilinear,

    h(a, b) = c0 + ca*a + cb*b + cab*a*b,

so the whole table is captured by one 16x4 coefficient matrix.  The
relaxation reproduces the truth table exactly on {0,1}^2, and its
partial derivatives are (ca + cab*b, cb + cab*a).
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class Op(IntEnum):
    FALSE = 0
    AND = 1
    ANOTB = 2       # a AND NOT b
    A = 3
    NOTAB = 4       # NOT a AND b
    B = 5
    XOR = 6
    OR = 7
    NOR = 8
    XNOR = 9
    NOTB = 10
    AORNOTB = 11    # a OR NOT b
    NOTA = 12
    IMPLY = 13      # NOT a OR b
    NAND = 14
    TRUE = 15


OP_COUNT = 16

OP_NAMES = tuple(op.name for op in Op)
OP_BY_NAME = {name: Op(i) for i, name in enumerate(OP_NAMES)}

# Rows ordered by opcode; columns are outputs at (a,b) = (0,0),(0,1),(1,0),(1,1).
TRUTH_TABLES = np.array(
    [[(i >> (3 - k)) & 1 for k in range(4)] for i in range(OP_COUNT)],
    dtype=np.uint8,
)

# Bilinear relaxation coefficients (c0, ca, cb, cab) per opcode.
BILINEAR = np.array(
    [
        [0, 0, 0, 0],    # FALSE    0
        [0, 0, 0, 1],    # AND      a*b
        [0, 1, 0, -1],   # ANOTB    a - a*b
        [0, 1, 0, 0],    # A        a
        [0, 0, 1, -1],   # NOTAB    b - a*b
        [0, 0, 1, 0],    # B        b
        [0, 1, 1, -2],   # XOR      a + b - 2*a*b
        [0, 1, 1, -1],   # OR       a + b - a*b
        [1, -1, -1, 1],  # NOR      1 - (a + b - a*b)
        [1, -1, -1, 2],  # XNOR     1 - (a + b - 2*a*b)
        [1, 0, -1, 0],   # NOTB     1 - b
        [1, 0, -1, 1],   # AORNOTB  1 - b + a*b
        [1, -1, 0, 0],   # NOTA     1 - a
        [1, -1, 0, 1],   # IMPLY    1 - a + a*b
        [1, 0, 0, -1],   # NAND     1 - a*b
        [1, 0, 0, 0],    # TRUE     1
    ],
    dtype=np.float64,
)

# Connectives eligible for skip connections; "learned" is handled by the
# network layer as a per-position mixture instead of a fixed opcode.
SKIP_CONNECTIVES = {
    "and": Op.AND,
    "or": Op.OR,
    "xnor": Op.XNOR,
    "not_b": Op.NOTB,
    "implication": Op.IMPLY,
}
LEARNED_CONNECTIVE = "learned"
DEFAULT_CONNECTIVE = "implication"


def eval_hard(op, a, b):
    """Evaluate gate `op` on bit inputs.  Accepts scalars or arrays."""
    return TRUTH_TABLES[op, 2 * np.asarray(a, dtype=np.intp) + np.asarray(b, dtype=np.intp)]


def eval_soft(op, a, b):
    """Evaluate the bilinear relaxation of `op` on [0,1] inputs."""
    c0, ca, cb, cab = BILINEAR[op]
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return c0 + ca * a + cb * b + cab * a * b


def grad_soft(op, a, b):
    """Exact partials (d/da, d/db) of the relaxation of `op` at (a, b)."""
    _, ca, cb, cab = BILINEAR[op]
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return ca + cab * b, cb + cab * a


def _negation_tables():
    # op'(a,b) = op(1-a, b): rows (0,.) and (1,.) of the table swap, i.e.
    # big-endian bits (w,x,y,z) -> (y,z,w,x).  Negating b swaps within
    # each row: (w,x,y,z) -> (x,w,z,y).
    neg_a = np.empty(OP_COUNT, dtype=np.uint8)
    neg_b = np.empty(OP_COUNT, dtype=np.uint8)
    for i in range(OP_COUNT):
        w, x, y, z = TRUTH_TABLES[i]
        neg_a[i] = (y << 3) | (z << 2) | (w << 1) | x
        neg_b[i] = (x << 3) | (w << 2) | (z << 1) | y
    return neg_a, neg_b


NEGATE_A_TABLE, NEGATE_B_TABLE = _negation_tables()


def negate_input_opcode(op, which):
    """Opcode op' with op'(a,b) = op(NOT a, b) for which='a' (or b-side).

    A bijection on the 16 opcodes; applying it twice restores `op`.
    """
    if which == "a":
        return Op(int(NEGATE_A_TABLE[op]))
    if which == "b":
        return Op(int(NEGATE_B_TABLE[op]))
    raise ValueError(f"which must be 'a' or 'b', got {which!r}")
