"""Matrix-valued fields over (x, t, y) with exact or finite-difference calculus.

Three representations are provided:

* :class:`ExpSum` -- finite sums ``C_i x**p_i exp(k_i x + omega_i t + eta_i y)``
  with constant matrix amplitudes. Closed under +, *, d/dx, d/dt, d/dy and
  the x-antiderivative, so every operation on it is exact.
* :class:`GridField` -- samples on a uniform tensor grid; derivatives use
  fourth-order finite differences, the antiderivative composite Simpson.
* :class:`AnalyticField` -- a user callable returning partial derivatives.

Sums, products, inverses and derivatives of mixed fields are represented
lazily by closure nodes. All fields evaluate on arrays of points and return
arrays of shape ``points.shape + (m, m)``; derivatives of closures are
assembled with the Leibniz rule at evaluation time.

Fields are immutable. ``*`` is the (noncommutative) matrix product.
"""
from __future__ import annotations

import csv
import io
import json
import math
from functools import reduce
from itertools import product as iproduct
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import CapabilityError, DomainError, ShapeError, SingularityError

INF = 10**9  # "unbounded" derivative order
_AXES = "xty"

Order = tuple[int, int, int]


def _as_order(order) -> Order:
    o = tuple(int(v) for v in order)
    if len(o) != 3 or min(o) < 0:
        raise ValueError(f"derivative order must be three non-negative ints, got {order!r}")
    return o


def _add_orders(a: Order, b: Order) -> Order:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


class Points:
    """A batch of evaluation points with a per-batch memo of computed partials."""

    def __init__(self, x, t=0.0, y=0.0):
        x, t, y = np.broadcast_arrays(
            np.asarray(x, dtype=float), np.asarray(t, dtype=float), np.asarray(y, dtype=float)
        )
        self.x, self.t, self.y = x, t, y
        self.shape = x.shape
        self.cache: dict = {}
        self._restricted: dict = {}

    def at_x(self, x0: float) -> "Points":
        if x0 not in self._restricted:
            self._restricted[x0] = Points(np.full(self.shape, float(x0)), self.t, self.y)
        return self._restricted[x0]

    def describe(self, index) -> str:
        return f"(x={self.x[index]:.6g}, t={self.t[index]:.6g}, y={self.y[index]:.6g})"


class MatrixField:
    """Base class. Subclasses implement :meth:`_values` and set ``dim``."""

    dim: int
    max_order: Order = (INF, INF, INF)

    # -- evaluation -------------------------------------------------------
    def values(self, pts: Points, order: Order = (0, 0, 0)) -> np.ndarray:
        key = (self, order)
        hit = pts.cache.get(key)
        if hit is None:
            for ax, (o, mo) in enumerate(zip(order, self.max_order)):
                if o > mo:
                    raise CapabilityError(
                        f"{type(self).__name__} supplies {_AXES[ax]}-derivatives up to order {mo}, "
                        f"order {o} requested"
                    )
            hit = self._values(pts, order)
            pts.cache[key] = hit
        return hit

    def _values(self, pts: Points, order: Order) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, x, t=0.0, y=0.0) -> np.ndarray:
        return self.values(Points(x, t, y))

    # -- structural facts used for simplification and antiderivatives ---------
    @property
    def is_zero(self) -> bool:
        return False

    @property
    def x_independent(self) -> bool:
        return False

    # -- calculus ---------------------------------------------------------
    def partial(self, order) -> "MatrixField":
        order = _as_order(order)
        if order == (0, 0, 0):
            return self
        for ax, (o, mo) in enumerate(zip(order, self.max_order)):
            if o > mo:
                raise CapabilityError(
                    f"{type(self).__name__} supplies {_AXES[ax]}-derivatives up to order {mo}, "
                    f"order {o} requested"
                )
        if self.is_zero or (order[0] > 0 and self.x_independent):
            return zeros(self.dim)
        return self._partial(order)

    def _partial(self, order: Order) -> "MatrixField":
        return DerivativeField(self, order)

    def antideriv_x(self, x0: float) -> "MatrixField":
        if self.is_zero:
            return self
        return self._antideriv_x(float(x0))

    def _antideriv_x(self, x0: float) -> "MatrixField":
        raise CapabilityError(f"{type(self).__name__} has no x-antiderivative")

    # -- ring operations --------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(-1.0, other, dim=self.dim))

    def __rsub__(self, other):
        return add(other, mul(-1.0, self))

    def __neg__(self):
        return mul(-1.0, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)


# ---------------------------------------------------------------------------
# exponential sums
# ---------------------------------------------------------------------------


class ExpSum(MatrixField):
    """``sum_i C_i x**p_i exp(k_i x + omega_i t + eta_i y)``.

    Terms sharing (k, omega, eta, p) are merged; terms with an exactly zero
    amplitude are dropped, so structural zeros are detected exactly.
    """

    def __init__(self, dim: int, terms: Iterable[tuple] = ()):
        if dim < 1:
            raise ShapeError("dim must be positive")
        self.dim = int(dim)
        merged: dict[tuple, np.ndarray] = {}
        for term in terms:
            C, k, omega, eta, p = _unpack_term(term, self.dim)
            key = (k, omega, eta, p)
            merged[key] = merged[key] + C if key in merged else C
        keys = [key for key, C in merged.items() if np.any(C != 0)]
        self._keys = keys
        m = self.dim
        self.C = np.array([merged[key] for key in keys], dtype=complex).reshape(len(keys), m, m)
        self.k = np.array([key[0] for key in keys], dtype=complex)
        self.omega = np.array([key[1] for key in keys], dtype=complex)
        self.eta = np.array([key[2] for key in keys], dtype=complex)
        self.power = np.array([key[3] for key in keys], dtype=int)
        self._derived: dict[Order, ExpSum] = {}

    def __repr__(self):
        return f"ExpSum(dim={self.dim}, n_terms={len(self._keys)})"

    @property
    def terms(self) -> list[tuple]:
        """List of ``(C, k, omega, eta, p)`` tuples."""
        return [(self.C[i].copy(), *self._keys[i]) for i in range(len(self._keys))]

    @property
    def is_zero(self) -> bool:
        return not self._keys

    @property
    def x_independent(self) -> bool:
        return bool(np.all(self.k == 0) and np.all(self.power == 0))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.k == 0) and np.all(self.omega == 0)
                    and np.all(self.eta == 0) and np.all(self.power == 0))

    def constant_value(self) -> np.ndarray:
        if not self.is_constant:
            raise ValueError("field is not constant")
        return self.C.sum(axis=0) if self._keys else np.zeros((self.dim, self.dim), complex)

    def _d_once(self, axis: int) -> "ExpSum":
        out = []
        for C, k, omega, eta, p in self.terms:
            if axis == 0:
                if p > 0:
                    out.append((p * C, k, omega, eta, p - 1))
                if k != 0:
                    out.append((k * C, k, omega, eta, p))
            else:
                rate = omega if axis == 1 else eta
                if rate != 0:
                    out.append((rate * C, k, omega, eta, p))
        return ExpSum(self.dim, out)

    def _partial(self, order: Order) -> "ExpSum":
        hit = self._derived.get(order)
        if hit is None:
            hit = self
            for axis, n in enumerate(order):
                for _ in range(n):
                    hit = hit._d_once(axis)
            self._derived[order] = hit
        return hit

    def _antideriv_x(self, x0: float) -> "ExpSum":
        out = []
        for C, k, omega, eta, p in self.terms:
            if k == 0:
                out.append((C / (p + 1), 0j, omega, eta, p + 1))
                out.append((-C * x0 ** (p + 1) / (p + 1), 0j, omega, eta, 0))
                continue
            # int x^p e^{kx} = e^{kx} sum_j (-1)^j p!/(p-j)! x^(p-j) / k^(j+1)
            at_x0 = 0j
            for j in range(p + 1):
                coef = (-1) ** j * math.factorial(p) / math.factorial(p - j) / k ** (j + 1)
                out.append((coef * C, k, omega, eta, p - j))
                at_x0 += coef * x0 ** (p - j)
            out.append((-at_x0 * np.exp(k * x0) * C, 0j, omega, eta, 0))
        return ExpSum(self.dim, out)

    def _values(self, pts: Points, order: Order) -> np.ndarray:
        f = self._partial(order) if order != (0, 0, 0) else self
        m = self.dim
        if f.is_zero:
            return np.zeros(pts.shape + (m, m), dtype=complex)
        expand = (slice(None),) + (None,) * len(pts.shape)
        phase = (f.k[expand] * pts.x + f.omega[expand] * pts.t + f.eta[expand] * pts.y)
        scal = np.exp(phase)
        if np.any(f.power):
            scal = scal * pts.x[None] ** f.power[expand]
        return np.einsum("t...,tij->...ij", scal, f.C)

    # -- exact arithmetic -------------------------------------------------
    def _add(self, other: "ExpSum") -> "ExpSum":
        return ExpSum(self.dim, self.terms + other.terms)

    def _mul(self, other: "ExpSum") -> "ExpSum":
        out = [
            (Ca @ Cb, ka + kb, wa + wb, ea + eb, pa + pb)
            for (Ca, ka, wa, ea, pa), (Cb, kb, wb, eb, pb) in iproduct(self.terms, other.terms)
        ]
        return ExpSum(self.dim, out)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        terms = []
        for C, k, omega, eta, p in self.terms:
            entry = {
                "k": [k.real, k.imag],
                "omega": [omega.real, omega.imag],
                "C": [[[z.real, z.imag] for z in row] for row in C],
            }
            if eta != 0:
                entry["eta"] = [eta.real, eta.imag]
            if p:
                entry["p"] = p
            terms.append(entry)
        return {"dim": self.dim, "terms": terms}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExpSum":
        dim = int(doc["dim"])
        terms = []
        for entry in doc["terms"]:
            C = np.array([[complex(*z) for z in row] for row in entry["C"]], dtype=complex)
            if C.shape != (dim, dim):
                raise ShapeError(f"term amplitude has shape {C.shape}, expected {(dim, dim)}")
            terms.append((
                C,
                complex(*entry["k"]),
                complex(*entry.get("omega", (0.0, 0.0))),
                complex(*entry.get("eta", (0.0, 0.0))),
                int(entry.get("p", 0)),
            ))
        return cls(dim, terms)

    @classmethod
    def from_json(cls, text: str) -> "ExpSum":
        return cls.from_dict(json.loads(text))


def _unpack_term(term, dim):
    C, k, *rest = term
    omega = rest[0] if len(rest) > 0 else 0.0
    eta = rest[1] if len(rest) > 1 else 0.0
    p = int(rest[2]) if len(rest) > 2 else 0
    C = np.asarray(C, dtype=complex)
    if C.ndim == 0:
        C = C * np.eye(dim)
    if C.shape != (dim, dim):
        raise ShapeError(f"term amplitude has shape {C.shape}, expected {(dim, dim)}")
    if p < 0:
        raise ValueError("x-power of a term must be non-negative")
    return C, complex(k), complex(omega), complex(eta), p


def exp_term(C, k=0.0, omega=0.0, eta=0.0, power: int = 0, dim: int | None = None) -> ExpSum:
    """Single term ``C x**power exp(k x + omega t + eta y)``; scalar C gives C*identity."""
    C = np.asarray(C, dtype=complex)
    if dim is None:
        dim = C.shape[0] if C.ndim == 2 else 1
    return ExpSum(dim, [(C, k, omega, eta, power)])


def constant(value, dim: int | None = None) -> ExpSum:
    value = np.asarray(value, dtype=complex)
    if value.ndim == 2:
        return exp_term(value)
    return exp_term(value, dim=dim or 1)


def identity(dim: int = 1) -> ExpSum:
    return constant(1.0, dim)


def zeros(dim: int = 1) -> ExpSum:
    return ExpSum(dim)


def coordinate(axis: str = "x", dim: int = 1) -> ExpSum:
    """The field equal to one coordinate (times identity); exact as an ExpSum."""
    if axis == "x":
        return exp_term(1.0, power=1, dim=dim)
    raise ValueError("only the x coordinate is polynomial in this representation")


# ---------------------------------------------------------------------------
# uniform grids
# ---------------------------------------------------------------------------


def fd_weights(offsets: Sequence[float], order: int) -> np.ndarray:
    """Weights w with sum_j w_j f(s_j) ~ f^(order)(0) for unit spacing."""
    s = np.asarray(offsets, dtype=float)
    n = len(s)
    V = np.vander(s, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def fd_derivative(samples: np.ndarray, axis: int, order: int, h: float) -> np.ndarray:
    """Fourth-order accurate finite-difference derivative along ``axis``.

    Central stencils in the interior, one-sided stencils of the same order at
    the ends.
    """
    if order == 0:
        return samples
    if not 1 <= order <= 4:
        raise CapabilityError(f"grid derivatives are limited to order 4, got {order}")
    a = np.moveaxis(samples, axis, 0)
    n = a.shape[0]
    r = (order + 1) // 2 + 1  # half-width of the central stencil
    n_side = order + 4
    if n < max(2 * r + 1, n_side):
        raise CapabilityError(f"need at least {max(2 * r + 1, n_side)} nodes for order {order}, have {n}")
    out = np.zeros_like(a, dtype=complex)
    wc = fd_weights(np.arange(-r, r + 1), order)
    for j, w in zip(range(-r, r + 1), wc):
        out[r:n - r] += w * a[r + j:n - r + j]
    for i in list(range(r)) + list(range(n - r, n)):
        start = 0 if i < r else n - n_side
        idx = np.arange(start, start + n_side)
        w = fd_weights(idx - i, order)
        out[i] = np.tensordot(w, a[idx], axes=(0, 0))
    return np.moveaxis(out / h**order, 0, axis)


class GridField(MatrixField):
    """Samples on a uniform tensor grid ``xs x ts x ys``.

    ``samples`` has shape ``(len(xs), len(ts), len(ys), m, m)``. An axis of
    length one means the field does not depend on that variable: it may be
    evaluated at any coordinate and its derivative along it is zero.
    Evaluation returns the nearest sample (no interpolation).
    """

    max_order = (4, 4, 4)

    def __init__(self, samples, xs, ts=(0.0,), ys=(0.0,)):
        axes = [np.atleast_1d(np.asarray(a, dtype=float)) for a in (xs, ts, ys)]
        samples = np.asarray(samples, dtype=complex)
        if samples.ndim == 3:  # scalar field samples (nx, nt, ny)
            samples = samples[..., None, None]
        if samples.ndim != 5 or samples.shape[:3] != tuple(len(a) for a in axes):
            raise ShapeError(f"samples shape {samples.shape} does not match grid axes")
        if samples.shape[3] != samples.shape[4]:
            raise ShapeError("samples must hold square matrices")
        steps = []
        for name, a in zip(_AXES, axes):
            if len(a) > 1:
                d = np.diff(a)
                if np.any(d <= 0) or np.ptp(d) > 1e-9 * abs(d[0]) * len(a):
                    raise ShapeError(f"{name}-axis must be uniform and increasing")
                steps.append(float((a[-1] - a[0]) / (len(a) - 1)))
            else:
                steps.append(0.0)
        self.axes = tuple(axes)
        self.steps = tuple(steps)
        self.samples = samples
        self.dim = samples.shape[3]
        self._fd_cache: dict[Order, np.ndarray] = {}

    def __repr__(self):
        return f"GridField(dim={self.dim}, shape={self.samples.shape[:3]})"

    @classmethod
    def sample(cls, f: MatrixField, xs, ts=(0.0,), ys=(0.0,)) -> "GridField":
        xs, ts, ys = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (xs, ts, ys))
        X, T, Y = np.meshgrid(xs, ts, ys, indexing="ij")
        return cls(f(X, T, Y), xs, ts, ys)

    @classmethod
    def from_function(cls, fn: Callable, xs, ts=(0.0,), ys=(0.0,), dim: int = 1) -> "GridField":
        xs, ts, ys = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (xs, ts, ys))
        X, T, Y = np.meshgrid(xs, ts, ys, indexing="ij")
        vals = np.asarray(fn(X, T, Y), dtype=complex)
        return cls(np.broadcast_to(_as_matrix_values(vals, X.shape, dim), X.shape + (dim, dim)), xs, ts, ys)

    def same_grid(self, other: "GridField") -> bool:
        return all(a.shape == b.shape and np.allclose(a, b, rtol=0, atol=1e-12)
                   for a, b in zip(self.axes, other.axes))

    @property
    def x_independent(self) -> bool:
        return len(self.axes[0]) == 1

    def _derivative_samples(self, order: Order) -> np.ndarray:
        hit = self._fd_cache.get(order)
        if hit is None:
            hit = self.samples
            for axis, n in enumerate(order):
                if n == 0:
                    continue
                if len(self.axes[axis]) == 1:
                    hit = np.zeros_like(hit)
                else:
                    hit = fd_derivative(hit, axis, n, self.steps[axis])
            self._fd_cache[order] = hit
        return hit

    def _partial(self, order: Order) -> "GridField":
        return GridField(self._derivative_samples(order), *self.axes)

    def _antideriv_x(self, x0: float) -> "GridField":
        xs = self.axes[0]
        if len(xs) == 1:
            raise CapabilityError("grid has no x extent to integrate over")
        i0 = self._index(0, np.asarray(x0))
        # cumulative_simpson drops imaginary parts
        F = (cumulative_simpson(self.samples.real, dx=self.steps[0], axis=0, initial=0)
             + 1j * cumulative_simpson(self.samples.imag, dx=self.steps[0], axis=0, initial=0))
        return GridField(F - F[int(i0)], *self.axes)

    def _index(self, axis: int, v: np.ndarray) -> np.ndarray:
        a = self.axes[axis]
        if len(a) == 1:
            return np.zeros(np.shape(v), dtype=int)
        h = self.steps[axis]
        idx = np.rint((v - a[0]) / h).astype(int)
        bad = (idx < 0) | (idx >= len(a))
        if np.any(bad):
            vb = np.asarray(v)[bad].ravel()[0]
            raise DomainError(f"{_AXES[axis]}={vb:.6g} outside grid [{a[0]:.6g}, {a[-1]:.6g}]")
        return idx

    def _values(self, pts: Points, order: Order) -> np.ndarray:
        data = self._derivative_samples(order)
        ix = self._index(0, pts.x)
        it = self._index(1, pts.t)
        iy = self._index(2, pts.y)
        return data[ix, it, iy]

    # -- arithmetic on identical grids --------------------------------------
    def _binary(self, other: "GridField", op) -> "GridField":
        if not self.same_grid(other):
            raise ShapeError("grid fields must share an identical grid")
        return GridField(op(self.samples, other.samples), *self.axes)

    # -- serialization ----------------------------------------------------
    def to_csv(self) -> str:
        """CSV with columns x, t[, y], then e{i}{j}_re, e{i}{j}_im per entry."""
        with_y = len(self.axes[2]) > 1
        m = self.dim
        header = ["x", "t"] + (["y"] if with_y else [])
        for i in range(m):
            for j in range(m):
                header += [f"e{i}{j}_re", f"e{i}{j}_im"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        xs, ts, ys = self.axes
        for a, b, c in iproduct(range(len(xs)), range(len(ts)), range(len(ys))):
            row = [repr(float(xs[a])), repr(float(ts[b]))] + ([repr(float(ys[c]))] if with_y else [])
            for z in self.samples[a, b, c].ravel():
                row += [repr(float(z.real)), repr(float(z.imag))]
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridField":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        with_y = "y" in header
        ncoord = 3 if with_y else 2
        m = int(round(math.sqrt((len(header) - ncoord) / 2)))
        xs = np.unique(body[:, 0])
        ts = np.unique(body[:, 1])
        ys = np.unique(body[:, 2]) if with_y else np.array([0.0])
        vals = body[:, ncoord::2] + 1j * body[:, ncoord + 1::2]
        samples = vals.reshape(len(xs), len(ts), len(ys), m, m)
        return cls(samples, xs, ts, ys)


def _as_matrix_values(vals: np.ndarray, shape: tuple, dim: int) -> np.ndarray:
    vals = np.asarray(vals, dtype=complex)
    if dim == 1 and not (vals.ndim == len(shape) + 2 and vals.shape[-2:] == (1, 1)):
        vals = vals[..., None, None]
    return np.broadcast_to(vals, shape + (dim, dim))


# ---------------------------------------------------------------------------
# user-supplied analytic closures
# ---------------------------------------------------------------------------


class AnalyticField(MatrixField):
    """Field given by ``fn(x, t, y, nx, nt, ny)`` returning that partial derivative.

    ``max_order`` bounds the per-variable orders ``fn`` can supply. For
    ``dim == 1`` ``fn`` may return plain scalars/arrays.
    """

    def __init__(self, fn: Callable, dim: int = 1, max_order=(INF, INF, INF),
                 x_independent: bool = False, antiderivative: Callable | None = None):
        self.fn = fn
        self.dim = int(dim)
        self.max_order = _as_order(max_order)
        self._x_independent = x_independent
        self._antiderivative = antiderivative

    @property
    def x_independent(self) -> bool:
        return self._x_independent

    def _values(self, pts: Points, order: Order) -> np.ndarray:
        vals = self.fn(pts.x, pts.t, pts.y, *order)
        return np.array(_as_matrix_values(vals, pts.shape, self.dim))

    def _antideriv_x(self, x0: float) -> MatrixField:
        if self._antiderivative is None:
            raise CapabilityError("analytic field was built without an antiderivative")
        F = AnalyticField(self._antiderivative, self.dim, self.max_order)
        return F - SliceField(F, x0)


# ---------------------------------------------------------------------------
# closure nodes
# ---------------------------------------------------------------------------


def _min_order(*fields: MatrixField) -> Order:
    return tuple(min(f.max_order[a] for f in fields) for a in range(3))


class SumField(MatrixField):
    def __init__(self, *parts: MatrixField):
        self.parts = parts
        self.dim = parts[0].dim
        self.max_order = _min_order(*parts)

    @property
    def x_independent(self) -> bool:
        return all(p.x_independent for p in self.parts)

    def _values(self, pts, order):
        return reduce(np.add, (p.values(pts, order) for p in self.parts))

    def _antideriv_x(self, x0):
        return reduce(add, (p.antideriv_x(x0) for p in self.parts))


class ProductField(MatrixField):
    """Matrix product ``left * right``; derivatives by the Leibniz rule."""

    def __init__(self, left: MatrixField, right: MatrixField):
        self.left, self.right = left, right
        self.dim = left.dim
        self.max_order = _min_order(left, right)

    @property
    def x_independent(self) -> bool:
        return self.left.x_independent and self.right.x_independent

    def _values(self, pts, order):
        total = None
        for beta in iproduct(*(range(o + 1) for o in order)):
            rest = (order[0] - beta[0], order[1] - beta[1], order[2] - beta[2])
            c = math.comb(order[0], beta[0]) * math.comb(order[1], beta[1]) * math.comb(order[2], beta[2])
            term = self.left.values(pts, beta) @ self.right.values(pts, rest)
            total = c * term if total is None else total + c * term
        return total

    def _antideriv_x(self, x0):
        if self.left.x_independent:
            return mul(self.left, self.right.antideriv_x(x0))
        if self.right.x_independent:
            return mul(self.left.antideriv_x(x0), self.right)
        raise CapabilityError("antiderivative of a product needs an x-independent factor")


class InverseField(MatrixField):
    """Pointwise matrix inverse; derivatives from differentiating ``f f^-1 = 1``."""

    def __init__(self, f: MatrixField, cond_limit: float = 1e13):
        self.f = f
        self.dim = f.dim
        self.max_order = f.max_order
        self.cond_limit = cond_limit

    @property
    def x_independent(self) -> bool:
        return self.f.x_independent

    def _values(self, pts, order):
        if order == (0, 0, 0):
            return _checked_inverse(self.f.values(pts), pts, self.cond_limit)
        q = self.values(pts, (0, 0, 0))
        acc = None
        for beta in iproduct(*(range(o + 1) for o in order)):
            if beta == order:
                continue
            rest = (order[0] - beta[0], order[1] - beta[1], order[2] - beta[2])
            c = math.comb(order[0], beta[0]) * math.comb(order[1], beta[1]) * math.comb(order[2], beta[2])
            term = c * (self.f.values(pts, rest) @ self.values(pts, beta))
            acc = term if acc is None else acc + term
        return -(q @ acc)


def _checked_inverse(vals: np.ndarray, pts: Points, cond_limit: float) -> np.ndarray:
    m = vals.shape[-1]
    if m == 1:
        # scalars have no scale-free conditioning; flag zeros and overflow only
        mag = np.abs(vals[..., 0, 0])
        bad = ~np.isfinite(mag) | (mag < np.finfo(float).tiny)
        if np.any(bad):
            idx = tuple(np.argwhere(bad)[0])
            raise SingularityError(f"field vanishes at {pts.describe(idx)}")
        return 1.0 / vals
    cond = np.linalg.cond(vals)
    bad = ~np.isfinite(cond) | (cond > cond_limit)
    if np.any(bad):
        idx = tuple(np.argwhere(bad)[0])
        raise SingularityError(f"matrix is singular at {pts.describe(idx)}")
    return np.linalg.inv(vals)


class DerivativeField(MatrixField):
    def __init__(self, f: MatrixField, order: Order):
        if isinstance(f, DerivativeField):
            order = _add_orders(order, f.order)
            f = f.f
        self.f = f
        self.order = order
        self.dim = f.dim
        self.max_order = tuple(mo - o if mo < INF else INF for mo, o in zip(f.max_order, order))

    @property
    def x_independent(self) -> bool:
        return self.f.x_independent

    def _values(self, pts, order):
        return self.f.values(pts, _add_orders(order, self.order))

    def _antideriv_x(self, x0):
        nx, nt, ny = self.order
        if nx >= 1:
            lower = self.f.partial((nx - 1, nt, ny))
            return add(lower, mul(-1.0, SliceField(lower, x0)))
        return self.f.antideriv_x(x0).partial(self.order)


class SliceField(MatrixField):
    """``f`` frozen at ``x = x0``; an x-independent field of (t, y)."""

    def __init__(self, f: MatrixField, x0: float):
        self.f = f
        self.x0 = float(x0)
        self.dim = f.dim
        self.max_order = (INF, f.max_order[1], f.max_order[2])

    @property
    def x_independent(self) -> bool:
        return True

    def _values(self, pts, order):
        if order[0] > 0:
            return np.zeros(pts.shape + (self.dim, self.dim), dtype=complex)
        return self.f.values(pts.at_x(self.x0), order)


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def as_field(value, dim: int | None = None) -> MatrixField:
    if isinstance(value, MatrixField):
        if dim is not None and value.dim != dim:
            raise ShapeError(f"field has dim {value.dim}, expected {dim}")
        return value
    return constant(value, dim)


def _coerce_pair(f, g, dim=None):
    if isinstance(f, MatrixField):
        dim = f.dim
    elif isinstance(g, MatrixField):
        dim = g.dim
    f, g = as_field(f, dim), as_field(g, dim)
    if f.dim != g.dim:
        raise ShapeError(f"dimension mismatch: {f.dim} vs {g.dim}")
    if isinstance(f, GridField) and not isinstance(g, GridField):
        g = GridField.sample(g, *f.axes)
    elif isinstance(g, GridField) and not isinstance(f, GridField):
        f = GridField.sample(f, *g.axes)
    return f, g


def eval_field(f: MatrixField, x, t=0.0, y=0.0) -> np.ndarray:
    """Value(s) of ``f``; shape ``broadcast(x, t, y).shape + (m, m)``."""
    return f(x, t, y)


def add(f, g, dim: int | None = None) -> MatrixField:
    f, g = _coerce_pair(f, g, dim)
    if f.is_zero:
        return g
    if g.is_zero:
        return f
    if isinstance(f, ExpSum) and isinstance(g, ExpSum):
        return f._add(g)
    if isinstance(f, GridField):
        return f._binary(g, np.add)
    return SumField(f, g)


def mul(f, g, dim: int | None = None) -> MatrixField:
    f, g = _coerce_pair(f, g, dim)
    if f.is_zero:
        return f
    if g.is_zero:
        return g
    if isinstance(f, ExpSum) and isinstance(g, ExpSum):
        return f._mul(g)
    if isinstance(f, GridField):
        return f._binary(g, np.matmul)
    return ProductField(f, g)


def commutator(f, g) -> MatrixField:
    """``f*g - g*f``; identically zero (structurally) for ``f is g``."""
    if f is g:
        return zeros(as_field(f).dim)
    return mul(f, g) - mul(g, f)


def inverse(f: MatrixField) -> MatrixField:
    if isinstance(f, ExpSum) and f.is_constant:
        return constant(np.linalg.inv(f.constant_value()))
    if isinstance(f, GridField):
        pts = Points(*np.meshgrid(*f.axes, indexing="ij"))
        return GridField(_checked_inverse(f.samples, pts, 1e13), *f.axes)
    return InverseField(f)


def deriv_x(f: MatrixField, order: int = 1) -> MatrixField:
    return f.partial((order, 0, 0))


def deriv_t(f: MatrixField, order: int = 1) -> MatrixField:
    return f.partial((0, order, 0))


def deriv_y(f: MatrixField, order: int = 1) -> MatrixField:
    return f.partial((0, 0, order))


def antideriv_x(f: MatrixField, x0: float) -> MatrixField:
    """x-antiderivative ``F`` with ``F(x0, t, y) = 0``."""
    return f.antideriv_x(x0)


def sup_norm(f: MatrixField, x, t=0.0, y=0.0) -> float:
    """Largest entrywise modulus of ``f`` over the given points."""
    vals = f(x, t, y)
    return float(np.max(np.abs(vals))) if vals.size else 0.0
