"""SDPA sparse format (``.dat-s``).

The objective matrix ``F_0`` of the file is read as ``A_0`` of the
minimisation problem, ``F_k`` as ``A_k`` and the cost vector as ``b``.
Several blocks are laid out along the diagonal of one ``n x n`` block;
negative block sizes denote diagonal blocks.
"""

import re

import numpy as np

from .errors import ParseError, SdpaIndexError
from .problem import SdpProblem, SymMatrix

_SEP = re.compile(r"[,(){}]")


def _header_tokens(line):
    return _SEP.sub(" ", line).split()


def _as_int(tok, lineno, what):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(lineno, f"expected {what}, got {tok!r}") from None
    if v != int(v):
        raise ParseError(lineno, f"expected integer {what}, got {tok!r}")
    return int(v)


def _as_float(tok, lineno):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(lineno, f"expected a number, got {tok!r}") from None


def read_sdpa_sparse(text, name=None):
    """Parse ``.dat-s`` text; the first comment line becomes the name unless ``name`` is given."""
    lines = text.splitlines()
    pos = 0
    comment = None
    while pos < len(lines) and (not lines[pos].strip() or lines[pos].lstrip()[0] in "\"*"):
        if comment is None and lines[pos].strip():
            comment = lines[pos].strip()[1:].strip()
        pos += 1
    if name is None:
        name = comment or ""

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise ParseError(pos + 1, "unexpected end of file in header")
        pos += 1
        return pos, lines[pos - 1]

    ln, line = next_line()
    toks = _header_tokens(line)
    if not toks:
        raise ParseError(ln, "missing constraint count")
    m = _as_int(toks[0], ln, "constraint count")
    if m < 1:
        raise ParseError(ln, "constraint count must be positive")
    ln, line = next_line()
    toks = _header_tokens(line)
    if not toks:
        raise ParseError(ln, "missing block count")
    nblocks = _as_int(toks[0], ln, "block count")
    if nblocks < 1:
        raise ParseError(ln, "block count must be positive")

    sizes = []
    while len(sizes) < nblocks:
        ln, line = next_line()
        for tok in _header_tokens(line):
            if len(sizes) == nblocks:
                break
            s = _as_int(tok, ln, "block size")
            if s == 0:
                raise ParseError(ln, "block size must be nonzero")
            sizes.append(s)
    b = []
    while len(b) < m:
        ln, line = next_line()
        for tok in _header_tokens(line):
            if len(b) == m:
                break
            b.append(_as_float(tok, ln))

    offsets = np.concatenate([[0], np.cumsum(np.abs(sizes))]).astype(int)
    n = int(offsets[-1])
    trip = [([], [], []) for _ in range(m + 1)]
    seen = set()
    for idx in range(pos, len(lines)):
        ln = idx + 1
        toks = lines[idx].split()
        if not toks:
            continue
        if len(toks) < 5:
            raise ParseError(ln, "entry line needs 'k block i j value'")
        k = _as_int(toks[0], ln, "matrix number")
        blk = _as_int(toks[1], ln, "block number")
        i = _as_int(toks[2], ln, "row index")
        j = _as_int(toks[3], ln, "column index")
        v = _as_float(toks[4], ln)
        if not 0 <= k <= m:
            raise SdpaIndexError(ln, f"matrix number {k} outside 0..{m}")
        if not 1 <= blk <= nblocks:
            raise SdpaIndexError(ln, f"block number {blk} outside 1..{nblocks}")
        size = sizes[blk - 1]
        if not (1 <= i <= abs(size) and 1 <= j <= abs(size)):
            raise SdpaIndexError(ln, f"index ({i}, {j}) outside block of size {abs(size)}")
        if i > j:
            raise ParseError(ln, f"entry ({i}, {j}) is below the diagonal; expected i <= j")
        if size < 0 and i != j:
            raise ParseError(ln, f"off-diagonal entry ({i}, {j}) in a diagonal block")
        gi, gj = offsets[blk - 1] + i - 1, offsets[blk - 1] + j - 1
        if (k, gi, gj) in seen:
            raise ParseError(ln, f"duplicate entry for matrix {k} at ({i}, {j})")
        seen.add((k, gi, gj))
        t = trip[k]
        t[0].append(gj)
        t[1].append(gi)
        t[2].append(v)
    A = [SymMatrix.from_entries(n, r, c, v) for r, c, v in trip]
    return SdpProblem(n, A, np.array(b), name=name)


def write_sdpa_sparse(problem, comment=None):
    """Canonical single-block text: 17 significant digits, entries sorted by ``(k, i, j)``."""
    out = [f"* {comment or problem.name or 'sdp'}".rstrip()]
    out.append(str(problem.m))
    out.append("1")
    out.append(str(problem.n))
    out.append(" ".join(f"{v:.17g}" for v in problem.b))
    for k, a in enumerate(problem.A):
        # lower (row, col) -> upper (i, j) = (col, row); canonical order is already (col, row)
        for r, c, v in zip(a.rows.tolist(), a.cols.tolist(), a.vals.tolist()):
            out.append(f"{k} 1 {c + 1} {r + 1} {v:.17g}")
    return "\n".join(out) + "\n"


def load(path):
    with open(path) as fh:
        return read_sdpa_sparse(fh.read())


def save(problem, path):
    with open(path, "w") as fh:
        fh.write(write_sdpa_sparse(problem))
