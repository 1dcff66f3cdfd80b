"""Real-valued polynomials in (z, zbar) with exact Wirtinger derivatives.

A polynomial is a map ``(powers_z, powers_zbar) -> complex coefficient``.
Evaluation is vectorised over leading axes of the point array: every
derivative table is expressed over one shared monomial basis, so a single
pass computes the monomials and the outputs are matrix products.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

Key = tuple[tuple[int, ...], tuple[int, ...]]


def _add_term(terms: dict, key: Key, c: complex) -> None:
    terms[key] = terms.get(key, 0.0) + c


def _mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for (a1, b1), c1 in p.items():
        for (a2, b2), c2 in q.items():
            key = (tuple(x + y for x, y in zip(a1, a2)), tuple(x + y for x, y in zip(b1, b2)))
            _add_term(out, key, c1 * c2)
    return out


def _pow(p: dict, k: int, n: int) -> dict:
    out = {((0,) * n, (0,) * n): 1.0 + 0j}
    for _ in range(k):
        out = _mul(out, p)
    return out


@dataclass(frozen=True)
class Polynomial:
    """Sparse polynomial ``sum c * z**a * conj(z)**b`` in ``n`` variables."""

    n: int
    terms: Mapping[Key, complex]

    @classmethod
    def from_monomials(cls, n: int, monomials: Iterable[dict]) -> "Polynomial":
        terms: dict = {}
        for m in monomials:
            a = tuple(int(x) for x in m["powers_z"])
            b = tuple(int(x) for x in m["powers_zbar"])
            if len(a) != n or len(b) != n:
                raise ValueError(f"monomial powers must have length {n}")
            if min(a + b) < 0:
                raise ValueError("negative exponent")
            _add_term(terms, (a, b), complex(m.get("coeff_re", 0.0), m.get("coeff_im", 0.0)))
        return cls(n, terms)

    def to_monomials(self) -> list[dict]:
        return [
            {
                "powers_z": list(a),
                "powers_zbar": list(b),
                "coeff_re": float(np.real(c)),
                "coeff_im": float(np.imag(c)),
            }
            for (a, b), c in sorted(self.terms.items())
            if c != 0
        ]

    @property
    def degree(self) -> int:
        return max((sum(a) + sum(b) for (a, b) in self.terms), default=0)

    def hermitian_defect(self) -> float:
        """Largest |c(a,b) - conj(c(b,a))|; zero iff the polynomial is real-valued."""
        worst = 0.0
        for (a, b), c in self.terms.items():
            worst = max(worst, abs(c - np.conj(self.terms.get((b, a), 0.0))))
        return worst

    def d_z(self, j: int) -> "Polynomial":
        out: dict = {}
        for (a, b), c in self.terms.items():
            if a[j] > 0:
                a2 = a[:j] + (a[j] - 1,) + a[j + 1:]
                _add_term(out, (a2, b), c * a[j])
        return Polynomial(self.n, out)

    def d_zbar(self, j: int) -> "Polynomial":
        out: dict = {}
        for (a, b), c in self.terms.items():
            if b[j] > 0:
                b2 = b[:j] + (b[j] - 1,) + b[j + 1:]
                _add_term(out, (a, b2), c * b[j])
        return Polynomial(self.n, out)

    def compose_affine(self, base: np.ndarray, frame: np.ndarray) -> "Polynomial":
        """Return ``w -> self(base + frame @ w)`` as a polynomial in ``m`` variables.

        ``frame`` has shape ``(n, m)``.
        """
        base = np.asarray(base, dtype=complex)
        frame = np.asarray(frame, dtype=complex)
        n, m = frame.shape
        zero = (0,) * m
        lin_z, lin_zbar = [], []
        for j in range(n):
            pz = {(zero, zero): base[j]}
            pzb = {(zero, zero): np.conj(base[j])}
            for k in range(m):
                e = tuple(int(i == k) for i in range(m))
                if frame[j, k] != 0:
                    _add_term(pz, (e, zero), frame[j, k])
                    _add_term(pzb, (zero, e), np.conj(frame[j, k]))
            lin_z.append(pz)
            lin_zbar.append(pzb)
        out: dict = {}
        cache: dict = {}
        for (a, b), c in self.terms.items():
            acc = {(zero, zero): complex(c)}
            for j in range(n):
                for k, lin, tag in ((a[j], lin_z[j], "z"), (b[j], lin_zbar[j], "b")):
                    if k:
                        key = (tag, j, k)
                        if key not in cache:
                            cache[key] = _pow(lin, k, m)
                        acc = _mul(acc, cache[key])
            for key, val in acc.items():
                _add_term(out, key, val)
        out = {k: v for k, v in out.items() if abs(v) > 1e-15}
        return Polynomial(m, out)


class _PowerCache:
    """Integer powers of an array by repeated squaring, memoised."""

    def __init__(self, x: np.ndarray):
        self.x = x
        self.cache = {1: x}
        self.acache: dict = {}

    def __call__(self, k: int) -> np.ndarray:
        if k not in self.cache:
            half = self(k // 2)
            sq = half * half
            self.cache[k] = sq * self.x if k % 2 else sq
        return self.cache[k]

    def abs2(self, k: int) -> np.ndarray:
        if k not in self.acache:
            if k == 1:
                self.acache[k] = self.x.real**2 + self.x.imag**2
            else:
                half = self.abs2(k // 2)
                sq = half * half
                self.acache[k] = sq * self.abs2(1) if k % 2 else sq
        return self.acache[k]


class CompiledPolynomial:
    """Evaluator for a real polynomial and its first and second Wirtinger derivatives.

    ``grad_z`` returns ``d rho / d z_j``; ``hess_holo`` returns
    ``d^2 rho / dz_j dz_k``; ``levi_matrix`` returns ``d^2 rho / dz_j dzbar_k``.
    Inputs have shape ``(..., n)``.
    """

    def __init__(self, poly: Polynomial):
        self.poly = poly
        n = self.n = poly.n
        value = poly
        grad = [poly.d_z(j) for j in range(n)]
        hess = [[grad[j].d_z(k) for k in range(n)] for j in range(n)]
        levi = [[grad[j].d_zbar(k) for k in range(n)] for j in range(n)]

        basis: dict[Key, int] = {}
        for p in [value, *grad, *(h for row in hess for h in row), *(h for row in levi for h in row)]:
            for key in p.terms:
                basis.setdefault(key, len(basis))
        if not basis:
            basis[((0,) * n, (0,) * n)] = 0
        keys = list(basis)
        self._A = np.array([k[0] for k in keys], dtype=int).reshape(len(keys), n)
        self._B = np.array([k[1] for k in keys], dtype=int).reshape(len(keys), n)
        self._maxpow = int(max(self._A.max(initial=0), self._B.max(initial=0)))

        def table(p: Polynomial) -> np.ndarray:
            col = np.zeros(len(keys), dtype=complex)
            for key, c in p.terms.items():
                col[basis[key]] += c
            return col

        self._cval = table(value)
        self._cgrad = np.stack([table(g) for g in grad], axis=-1)
        self._chess = np.stack([np.stack([table(h) for h in row], axis=-1) for row in hess], axis=-2)
        self._clevi = np.stack([np.stack([table(h) for h in row], axis=-1) for row in levi], axis=-2)
        # value-only fast path: restrict to monomials that appear in rho itself
        used = np.flatnonzero(self._cval != 0)
        if used.size == 0:
            used = np.array([0])
        self._vA, self._vB, self._vc = self._A[used], self._B[used], self._cval[used]

    @staticmethod
    def _monomials(z: np.ndarray, A: np.ndarray, B: np.ndarray, maxpow: int) -> np.ndarray:
        n = z.shape[-1]
        mono = np.ones(z.shape[:-1] + (A.shape[0],), dtype=complex)
        for j in range(n):
            zj = z[..., j]
            pw = _PowerCache(zj)
            pwc = _PowerCache(np.conj(zj))
            for i in range(A.shape[0]):
                a, b = A[i, j], B[i, j]
                if a == b and a:
                    # |z|^(2a) is real; avoids complex round-off in high powers
                    mono[..., i] *= pw.abs2(a)
                else:
                    if a:
                        mono[..., i] *= pw(a)
                    if b:
                        mono[..., i] *= pwc(b)
        return mono

    def eval(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        mono = self._monomials(z, self._vA, self._vB, self._maxpow)
        return np.real(mono @ self._vc)

    def eval_complex(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return self._monomials(z, self._vA, self._vB, self._maxpow) @ self._vc

    def all_derivatives(self, z):
        """(value, grad_z, hess_holo, levi_matrix) from one monomial pass."""
        z = np.asarray(z, dtype=complex)
        mono = self._monomials(z, self._A, self._B, self._maxpow)
        val = np.real(mono @ self._cval)
        grad = mono @ self._cgrad
        hess = np.einsum("...m,mjk->...jk", mono, self._chess)
        levi = np.einsum("...m,mjk->...jk", mono, self._clevi)
        return val, grad, hess, levi

    def grad_z(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return self._monomials(z, self._A, self._B, self._maxpow) @ self._cgrad

    def value_and_grad(self, z):
        z = np.asarray(z, dtype=complex)
        mono = self._monomials(z, self._A, self._B, self._maxpow)
        return np.real(mono @ self._cval), mono @ self._cgrad

    def hess_holo(self, z) -> np.ndarray:
        return self.all_derivatives(z)[2]

    def levi_matrix(self, z) -> np.ndarray:
        return self.all_derivatives(z)[3]


def real_hessian(hess: np.ndarray, levi: np.ndarray) -> np.ndarray:
    """Real Hessian in coordinates (x_1..x_n, y_1..y_n) from Wirtinger blocks."""
    A, B = hess, levi
    xx = 2 * np.real(A + B)
    yy = 2 * np.real(B - A)
    xy = 2 * np.imag(B - A)
    top = np.concatenate([xx, xy], axis=-1)
    bottom = np.concatenate([np.swapaxes(xy, -1, -2), yy], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def to_complex(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * x[..., n:]


def monomial(n: int, a: Iterable[int], b: Iterable[int], c: complex = 1.0) -> dict:
    return {"powers_z": list(a), "powers_zbar": list(b), "coeff_re": float(np.real(c)), "coeff_im": float(np.imag(c))}


def abs_power(n: int, j: int, k: int, c: float = 1.0) -> dict:
    """Monomial ``c * |z_j|**(2k)``."""
    e = [0] * n
    e[j] = k
    return monomial(n, e, e, c)

