"""Explicit hit/leave polyhedron of the path selection event.

For every step ``l <= k`` the event "the first ``k`` entries are
``(j_1, s_1), ..., (j_k, s_k)``" is written with dense direction vectors on
the centred design:

* chain rows        ``c_{l+1}(j_{l+1}, s_{l+1})^T y <= c_l(j_l, s_l)^T y``
* hitting envelope  ``c_{l+1}(j, s)^T y <= c_l(j_l, s_l)^T y`` for
  competitors with ``c_l(j,s)^T c_l(j_l,s_l) < ||c_l(j_l,s_l)||^2``
* leaving envelope  ``c_l(j_l, s_l)^T y <= c_{l+1}(j, s)^T y`` for
  competitors with ``c_l(j,s)^T c_l(j_l,s_l) > ||c_l(j_l,s_l)||^2``
* flat rows         ``s (I - P_A) x_j^T y <= 0`` for competitors whose
  denominator ``s - w_j`` vanishes (they cannot enter during that step)
* neutral rows      ``c_l(j, s)^T y <= c_l(j_l, s_l)^T y`` for competitors
  with ``c_l(j,s)^T c_l(j_l,s_l) = ||c_l(j_l,s_l)||^2``; they do not involve
  the tested statistic and only enter the ``nu_zero`` check
* nonnegativity     ``c_k(j_k, s_k)^T y >= 0``

The truncation limits of ``eta^T y`` then follow from the generic polyhedral
lemma. None of this uses the segment shortcuts of :mod:`fused_spacing.path`,
so it serves as an independent check of the closed-form pivot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ValidationError
from .path import DENSE_MAX_N, FusedPath, ReparamSystem
from .selective import DEGENERATE_DENOM, _active_basis
from .truncnorm import tail_probability

ZERO_AC_RTOL = 1e-10
NEUTRAL_ATOL = 1e-9


@dataclass(frozen=True)
class PolyhedralLimits:
    nu_minus: float
    nu_plus: float
    nu_zero: float
    lower_rows: tuple[int, ...]
    upper_rows: tuple[int, ...]

    @property
    def nu_zero_ok(self) -> bool:
        return self.nu_zero >= -1e-9


def _row_limits(A: np.ndarray, b: np.ndarray, c: np.ndarray, z: np.ndarray, atol: float, norms=None):
    Ac = A @ c
    slack = b - A @ z
    if norms is None:
        norms = np.linalg.norm(A, axis=1)
    scale = norms * np.linalg.norm(c)
    zero = np.abs(Ac) <= ZERO_AC_RTOL * np.maximum(scale, 1e-300)
    neg = (Ac < 0) & ~zero
    pos = (Ac > 0) & ~zero
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = slack / Ac
    nu_minus = float(bound[neg].max()) if neg.any() else -math.inf
    nu_plus = float(bound[pos].min()) if pos.any() else math.inf
    nu_zero = float(slack[zero].min()) if zero.any() else math.inf
    lower = np.flatnonzero(neg & (bound >= nu_minus - atol))
    upper = np.flatnonzero(pos & (bound <= nu_plus + atol))
    return nu_minus, nu_plus, nu_zero, lower, upper


def _combine(parts, atol: float) -> PolyhedralLimits:
    """Merge per-block limits; ``parts`` holds ``(offset, limits...)`` tuples."""
    nu_minus = max((p[1] for p in parts), default=-math.inf)
    nu_plus = min((p[2] for p in parts), default=math.inf)
    nu_zero = min((p[3] for p in parts), default=math.inf)
    lower, upper = [], []
    for off, lo_b, up_b, _, lo_i, up_i in parts:
        if lo_b >= nu_minus - atol:
            lower.extend((lo_i + off).tolist())
        if up_b <= nu_plus + atol:
            upper.extend((up_i + off).tolist())
    return PolyhedralLimits(nu_minus, nu_plus, nu_zero, tuple(lower), tuple(upper))


def polyhedral_limits(A: np.ndarray, b: np.ndarray, eta: np.ndarray, y: np.ndarray, *, atol: float = 1e-12) -> PolyhedralLimits:
    """Truncation limits of ``eta^T y`` on ``{A y <= b}`` given ``z = (I - c eta^T) y``.

    ``nu_zero`` is the smallest slack among rows orthogonal to ``eta``; the
    event requires it to be nonnegative. ``lower_rows`` / ``upper_rows`` list
    the rows attaining ``nu_minus`` / ``nu_plus`` within ``atol``.
    """
    eta = np.asarray(eta, dtype=float)
    y = np.asarray(y, dtype=float)
    c = eta / float(eta @ eta)
    z = y - c * float(eta @ y)
    return _combine([(0, *_row_limits(A, b, c, z, atol))], atol)


@dataclass(frozen=True)
class PolyhedralSystem:
    """Rows ``A y <= b`` with a provenance tag per row."""

    A: np.ndarray
    b: np.ndarray
    tags: tuple[tuple, ...]
    step: int
    eta: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    s_plus: tuple[tuple[tuple[int, int], ...], ...] = ()
    s_minus: tuple[tuple[tuple[int, int], ...], ...] = ()

    def __len__(self) -> int:
        return self.A.shape[0]

    def satisfied(self, y=None, rtol: float = 1e-10) -> bool:
        y = self.y if y is None else np.asarray(y, dtype=float)
        lhs = self.A @ y
        tol = rtol * (1.0 + np.abs(self.A) @ np.abs(y))
        return bool(np.all(lhs <= self.b + tol))

    def limits(self) -> PolyhedralLimits:
        return polyhedral_limits(self.A, self.b, self.eta, self.y)

    def rows_tagged(self, kind: str) -> np.ndarray:
        return np.array([i for i, t in enumerate(self.tags) if t[0] == kind], dtype=int)

    def reduced(self) -> PolyhedralSystem:
        """Chain, nonnegativity, the binding lower row of the last step, and
        every leaving row."""
        keep = [i for i, t in enumerate(self.tags) if t[0] in ("chain", "nonneg", "leave")]
        last = [
            i for i, t in enumerate(self.tags)
            if t[0] in ("hit", "flat") and t[1] == self.step
        ]
        if last:
            lim = polyhedral_limits(self.A[last], self.b[last], self.eta, self.y)
            if lim.lower_rows:
                keep.append(last[lim.lower_rows[0]])
        keep.sort()
        return PolyhedralSystem(
            A=self.A[keep],
            b=self.b[keep],
            tags=tuple(self.tags[i] for i in keep),
            step=self.step,
            eta=self.eta,
            y=self.y,
            s_plus=self.s_plus,
            s_minus=self.s_minus,
        )

    @property
    def leave_count(self) -> int:
        return sum(1 for t in self.tags if t[0] == "leave")


@dataclass(frozen=True)
class _Directions:
    """All candidate directions ``c_l(j, s)`` at one step."""

    pairs: tuple[tuple[int, int], ...]
    C: np.ndarray  # n x len(pairs)
    flat_pairs: tuple[tuple[int, int], ...] = ()
    flat: np.ndarray | None = None  # s (I - P_A) x_j for each flat pair

    def index(self) -> dict[tuple[int, int], int]:
        return {p: i for i, p in enumerate(self.pairs)}


class HitLeaveOracle:
    """Builds and caches the per-step directions of a path on the dense design."""

    def __init__(self, path: FusedPath, system: ReparamSystem):
        if system.n != path.n:
            raise ValidationError("path and system disagree on n")
        if system.n > DENSE_MAX_N:
            raise ValidationError(f"polyhedral oracle limited to n <= {DENSE_MAX_N}")
        self.path = path
        self.system = system
        self.y = np.asarray(system.y_centered, dtype=float)
        self._dirs: dict[int, _Directions] = {}
        self._blocks: dict[int, tuple] = {}
        self._eta: dict[int, np.ndarray] = {}
        self._classes: dict[int, tuple] = {}
        self._prefix = np.empty((0, system.n))
        self._prefix_norms = np.empty(0)
        self._prefix_len = [0]  # rows contributed by steps < k, indexed by k - 1
        self.skipped: dict[int, int] = {}

    def directions(self, l: int) -> _Directions:
        """Directions of every inactive ``(j, s)`` after ``l - 1`` entries."""
        if l in self._dirs:
            return self._dirs[l]
        if not 1 <= l <= len(self.path) + 1:
            raise ValidationError(f"step {l} outside 1..{len(self.path) + 1}")
        active = self.path.active(l - 1)
        X = self.system.design
        cols = [j for j, _ in active]
        if cols:
            # least-squares coefficients of every column on the active ones,
            # refined once so residuals are formed against the exact design
            Q, R = _active_basis(self.system, cols)
            XA = X[:, [j - 1 for j in cols]]
            B = solve_triangular(R, Q.T @ X)
            B += solve_triangular(R, Q.T @ (X - XA @ B))
            Pperp = X - XA @ B
            w = np.array([s for _, s in active], dtype=float) @ B
        else:
            Pperp = X
            w = np.zeros(X.shape[1])
        taken = set(cols)
        pairs, vecs, flat_pairs, flat = [], [], [], []
        for j in range(1, self.system.n):
            if j in taken:
                continue
            for s in (1, -1):
                denom = s - w[j - 1]
                if abs(denom) < DEGENERATE_DENOM:
                    flat_pairs.append((j, s))
                    flat.append(s * Pperp[:, j - 1])
                    continue
                pairs.append((j, s))
                vecs.append(Pperp[:, j - 1] / denom)
        n = self.system.n
        C = np.column_stack(vecs) if vecs else np.zeros((n, 0))
        F = np.column_stack(flat) if flat else np.zeros((n, 0))
        out = _Directions(tuple(pairs), C, tuple(flat_pairs), F)
        self._dirs[l] = out
        self.skipped[l] = len(flat_pairs)
        return out

    def eta(self, l: int) -> np.ndarray:
        if l not in self._eta:
            st = self.path.step(l)
            d = self.directions(l)
            self._eta[l] = d.C[:, d.index()[(st.j, st.s)]]
        return self._eta[l]

    def _classify(self, l: int):
        """Split the competitors at step ``l`` into ``S_l^+``, ``S_l^-`` and the
        neutral pairs whose ``a`` equals 1 up to ``NEUTRAL_ATOL``."""
        if l in self._classes:
            return self._classes[l]
        st = self.path.step(l)
        eta = self.eta(l)
        nn = float(eta @ eta)
        u = float(eta @ self.y)
        d = self.directions(l)
        a = (d.C.T @ eta) / nn
        vals = d.C.T @ self.y
        tol = 1e-12 * max(1.0, abs(u))
        plus, minus, neutral = [], [], []
        for i, p in enumerate(d.pairs):
            if p[0] == st.j or vals[i] > u + tol:
                continue
            if a[i] < 1 - NEUTRAL_ATOL:
                plus.append(p)
            elif a[i] > 1 + NEUTRAL_ATOL:
                minus.append(p)
            else:
                neutral.append(p)
        self._classes[l] = (plus, minus, neutral)
        return self._classes[l]

    def envelope_sets(self, l: int):
        """``S_l^+`` and ``S_l^-`` as lists of ``(j, s)``."""
        plus, minus, _ = self._classify(l)
        return plus, minus

    def neutral_set(self, l: int):
        """Competitors whose constraint at step ``l`` does not involve ``eta_l^T y``."""
        return self._classify(l)[2]

    def hit_identity_gap(self, l: int) -> float:
        """Largest ``|c_l^T z_l / (1 - a) - c_{l+1}^T y|`` over ``S_l^+``.

        ``z_l`` is ``y`` with its ``eta_l`` component removed; the identity says
        each competitor's next hitting time is its projected value rescaled.
        """
        eta = self.eta(l)
        nn = float(eta @ eta)
        z = self.y - eta * float(eta @ self.y) / nn
        cur, nxt = self.directions(l), self.directions(l + 1)
        ci, ni = cur.index(), nxt.index()
        plus, _ = self.envelope_sets(l)
        gap = 0.0
        for p in plus:
            if p not in ni:
                continue
            c = cur.C[:, ci[p]]
            a = float(c @ eta) / nn
            lhs = float(c @ z) / (1.0 - a)
            rhs = float(nxt.C[:, ni[p]] @ self.y)
            gap = max(gap, abs(lhs - rhs))
        return gap

    def _block(self, l: int):
        """Hit, leave and flat rows contributed by step ``l`` (cached).

        Returns the rows, their tags, the row index of the next entrant
        (``None`` past the end of the path) and the envelope sets.
        """
        if l in self._blocks:
            return self._blocks[l]
        eta_l = self.eta(l)
        plus, minus, neutral = self._classify(l)
        cur, nxt = self.directions(l), self.directions(l + 1)
        idx = nxt.index()
        entrant = None
        if l < len(self.path):
            st = self.path.step(l + 1)
            entrant = (st.j, st.s)
        rows, tags, entrant_row = [], [], None
        for p in plus:
            if p not in idx:
                continue
            if p == entrant:
                entrant_row = len(rows)
            rows.append(nxt.C[:, idx[p]] - eta_l)
            tags.append(("hit", l, *p))
        for p in minus:
            if p not in idx:
                continue
            rows.append(eta_l - nxt.C[:, idx[p]])
            tags.append(("leave", l, *p))
        for i, p in enumerate(cur.flat_pairs):
            if p == entrant:
                entrant_row = len(rows)
            rows.append(cur.flat[:, i])
            tags.append(("flat", l, *p))
        cur_idx = cur.index()
        for p in neutral:
            rows.append(cur.C[:, cur_idx[p]] - eta_l)
            tags.append(("neutral", l, *p))
        A = np.vstack(rows) if rows else np.zeros((0, self.system.n))
        out = (A, tags, entrant_row, tuple(plus), tuple(minus))
        self._blocks[l] = out
        return out

    def polyhedron(self, k: int) -> PolyhedralSystem:
        """Selection event of the first ``k`` steps.

        For ``l < k`` the next entrant's hitting row coincides with the chain
        row and is represented by the latter only.
        """
        self.path.step(k)
        blocks, tags = [], []
        s_plus, s_minus = [], []
        for l in range(1, k + 1):
            A_l, tags_l, entrant_row, plus, minus = self._block(l)
            s_plus.append(plus)
            s_minus.append(minus)
            if l < k:
                blocks.append((self.eta(l + 1) - self.eta(l))[None, :])
                tags.append(("chain", l))
                if entrant_row is not None:
                    keep = np.ones(len(tags_l), dtype=bool)
                    keep[entrant_row] = False
                    A_l = A_l[keep]
                    tags_l = [t for t, kk in zip(tags_l, keep) if kk]
            blocks.append(A_l)
            tags.extend(tags_l)
        eta_k = self.eta(k)
        blocks.append(-eta_k[None, :])
        tags.append(("nonneg", k))
        A = np.vstack(blocks)
        return PolyhedralSystem(
            A=A,
            b=np.zeros(A.shape[0]),
            tags=tuple(tags),
            step=k,
            eta=eta_k,
            y=self.y,
            s_plus=tuple(s_plus),
            s_minus=tuple(s_minus),
        )

    def _extend_prefix(self, k: int) -> int:
        """Grow the stacked rows of steps ``l < k``; returns their count."""
        while len(self._prefix_len) < k:
            l = len(self._prefix_len)
            A_l, _, entrant_row, _, _ = self._block(l)
            if entrant_row is not None:
                A_l = np.delete(A_l, entrant_row, axis=0)
            new = np.vstack([(self.eta(l + 1) - self.eta(l))[None, :], A_l])
            used = self._prefix_len[-1]
            need = used + new.shape[0]
            if need > self._prefix.shape[0]:
                grown = np.empty((max(need, 2 * self._prefix.shape[0]), self.system.n))
                grown[:used] = self._prefix[:used]
                self._prefix = grown
                norms = np.empty(grown.shape[0])
                norms[:used] = self._prefix_norms[:used]
                self._prefix_norms = norms
            self._prefix[used:need] = new
            self._prefix_norms[used:need] = np.linalg.norm(new, axis=1)
            self._prefix_len.append(need)
        return self._prefix_len[k - 1]

    def unexplained_upper_rows(self, k: int, lim: PolyhedralLimits | None = None) -> list[tuple]:
        """Tags of rows attaining ``nu_plus`` other than the chain row.

        Rows that belong to the step-``k`` entrant itself (for instance flat
        rows from steps where its denominator vanished) restate the chain
        condition and are not reported.
        """
        if k < 2:
            lim = lim or self.limits(k)
            return [] if not lim.upper_rows else [("row", i) for i in lim.upper_rows]
        lim = lim or self.limits(k)
        st = self.path.step(k)
        tags = self.row_tags(k)
        chain = self.chain_row(k)
        out = []
        for i in lim.upper_rows:
            t = tags[i]
            if i == chain or (t[0] != "chain" and t[0] != "nonneg" and tuple(t[2:]) == (st.j, st.s)):
                continue
            out.append(t)
        return out

    def row_tags(self, k: int) -> list[tuple]:
        """Tags of :meth:`polyhedron` ``(k)`` without stacking the rows."""
        tags = []
        for l in range(1, k + 1):
            _, tags_l, entrant_row, _, _ = self._block(l)
            if l < k:
                tags.append(("chain", l))
                if entrant_row is not None:
                    tags_l = tags_l[:entrant_row] + tags_l[entrant_row + 1:]
            tags.extend(tags_l)
        tags.append(("nonneg", k))
        return tags

    def chain_row(self, k: int) -> int:
        """Row index of the chain row ``c_k^T y <= c_{k-1}^T y`` in ``polyhedron(k)``."""
        if k < 2:
            raise ValidationError("step 1 has no chain row")
        self._extend_prefix(k)
        return self._prefix_len[k - 2]

    def limits(self, k: int, atol: float = 1e-12) -> PolyhedralLimits:
        """Same as ``self.polyhedron(k).limits()`` without rebuilding the rows.

        Row indices refer to the row order of :meth:`polyhedron`.
        """
        self.path.step(k)
        eta = self.eta(k)
        c = eta / float(eta @ eta)
        z = self.y - c * float(eta @ self.y)
        m = self._extend_prefix(k)
        parts = []
        if m:
            P = self._prefix[:m]
            parts.append((0, *_row_limits(P, np.zeros(m), c, z, atol, self._prefix_norms[:m])))
        A_k = self._block(k)[0]
        if A_k.shape[0]:
            parts.append((m, *_row_limits(A_k, np.zeros(A_k.shape[0]), c, z, atol)))
        parts.append((m + A_k.shape[0], *_row_limits(-eta[None, :], np.zeros(1), c, z, atol)))
        return _combine(parts, atol)

    def pivot(self, k: int, sigma: float) -> tuple[float, PolyhedralLimits]:
        """Upper-tail pivot of ``eta_k^T y`` on the polyhedral interval."""
        lim = self.limits(k)
        eta = self.eta(k)
        u = float(eta @ self.y)
        sd = sigma * float(np.linalg.norm(eta))
        T = tail_probability(u, 0.0, sd, lim.nu_minus, lim.nu_plus)
        return T, lim


def hit_leave_polyhedron(path: FusedPath, system: ReparamSystem, k: int) -> PolyhedralSystem:
    return HitLeaveOracle(path, system).polyhedron(k)
