"""Parameterized Hermitian families, gauge-fixed eigensystems and gap detection.

Everything else in the package consumes the objects defined here.  A
:class:`HamiltonianFamily` maps a parameter point ``R`` to a Hermitian matrix;
:func:`eigendecompose` returns ascending energies together with eigenvectors
whose free phase is fixed by a deterministic rule (largest-modulus entry real
and positive, lowest index on ties).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DegeneracyError, DomainError, GeometryError, ModelError, NumericalError

GAUGE_TAG = "max-modulus-real-positive"

# relative tolerances
HERMITICITY_TOL = 1e-12
DEGENERACY_TOL = 1e-9  # gap < tol * spectral range -> degenerate
TIE_TOL = 1e-12  # entries this close in modulus count as tied for the pivot

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def spin_matrices(s: float) -> np.ndarray:
    """Return (Sx, Sy, Sz) for spin ``s`` in the basis m = s, s-1, ..., -s."""
    dim = int(round(2 * s + 1))
    m = s - np.arange(dim)
    sp = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        # S+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>
        sp[k - 1, k] = np.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    sx = 0.5 * (sp + sp.conj().T)
    sy = -0.5j * (sp - sp.conj().T)
    sz = np.diag(m).astype(complex)
    return np.array([sx, sy, sz])


# ---------------------------------------------------------------------------
# geometry containers


@dataclass(frozen=True)
class ParameterLoop:
    """Ordered parameter points; a closed loop repeats its first point at the end.

    ``func`` optionally maps s in [0, 1] to a point so that refinement can
    resample the exact curve instead of inserting chord midpoints.
    """

    points: np.ndarray
    closed: bool = True
    func: Callable[[float], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 3:
            raise GeometryError("a parameter loop needs at least 3 points")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("loop points must be finite")
        if self.closed and not np.array_equal(pts[0], pts[-1]):
            raise GeometryError("closed loop must repeat its first point as the last one")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_function(cls, func: Callable[[float], Sequence[float]], n: int, closed: bool = True) -> "ParameterLoop":
        s = np.linspace(0.0, 1.0, n + 1) if closed else np.linspace(0.0, 1.0, n)
        pts = np.array([np.asarray(func(x), dtype=float) for x in s])
        if closed:
            pts[-1] = pts[0]
        return cls(pts, closed, func)

    @property
    def n_segments(self) -> int:
        return self.points.shape[0] - 1

    def refined(self) -> "ParameterLoop":
        """Double the number of segments."""
        if self.func is not None:
            return ParameterLoop.from_function(self.func, 2 * self.n_segments, self.closed)
        mids = 0.5 * (self.points[:-1] + self.points[1:])
        pts = np.empty((2 * self.n_segments + 1, self.points.shape[1]))
        pts[0::2] = self.points
        pts[1::2] = mids
        return ParameterLoop(pts, self.closed)

    def reversed(self) -> "ParameterLoop":
        f = None if self.func is None else (lambda s, g=self.func: g(1.0 - s))
        return ParameterLoop(self.points[::-1].copy(), self.closed, f)


def circle_loop(center, radius: float, normal=(0.0, 0.0, 1.0), n: int = 64) -> ParameterLoop:
    """Counterclockwise circle (seen from the tip of ``normal``)."""
    c = np.asarray(center, float)
    nz = np.asarray(normal, float)
    nz = nz / np.linalg.norm(nz)
    trial = np.array([1.0, 0, 0]) if abs(nz[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = trial - nz * (trial @ nz)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(nz, e1)

    def f(s):
        a = 2 * np.pi * s
        return c + radius * (np.cos(a) * e1 + np.sin(a) * e2)

    return ParameterLoop.from_function(f, n)


def colatitude_loop(theta0: float, radius: float = 1.0, n: int = 400) -> ParameterLoop:
    """Circle of constant polar angle on a sphere of given radius, counterclockwise about +z."""

    def f(s):
        phi = 2 * np.pi * s
        return radius * np.array([np.sin(theta0) * np.cos(phi), np.sin(theta0) * np.sin(phi), np.cos(theta0)])

    return ParameterLoop.from_function(f, n)


@dataclass(frozen=True)
class ParameterSurface:
    """Closed oriented triangulated surface (outward normals by right-hand rule)."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=int)
        if t.ndim != 2 or t.shape[1] != 3:
            raise GeometryError("triangles must be index triples")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        self.check_watertight()

    def check_watertight(self) -> None:
        edges: dict[tuple[int, int], int] = {}
        for a, b, c in self.triangles:
            for e in ((a, b), (b, c), (c, a)):
                edges[e] = edges.get(e, 0) + 1
        for (a, b), cnt in edges.items():
            if cnt != 1 or edges.get((b, a), 0) != 1:
                raise GeometryError(f"surface not watertight/consistently oriented at edge ({a}, {b})")

    def quadrisected(self, project: Callable[[np.ndarray], np.ndarray] | None = None) -> "ParameterSurface":
        verts = [*self.vertices]
        cache: dict[tuple[int, int], int] = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                p = 0.5 * (self.vertices[i] + self.vertices[j])
                if project is not None:
                    p = project(p)
                cache[key] = len(verts)
                verts.append(p)
            return cache[key]

        tris = []
        for a, b, c in self.triangles:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        return ParameterSurface(np.array(verts), np.array(tris))

    def area_vectors(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)


def icosphere(radius: float = 1.0, center=(0.0, 0.0, 0.0), subdivisions: int = 2) -> ParameterSurface:
    """Geodesic sphere with outward orientation."""
    g = (1 + 5**0.5) / 2
    v = np.array(
        [[-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0], [0, -1, g], [0, 1, g],
         [0, -1, -g], [0, 1, -g], [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1]],
        dtype=float,
    )
    v /= np.linalg.norm(v, axis=1)[:, None]
    f = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
         [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
         [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    )
    c = np.asarray(center, float)
    surf = ParameterSurface(c + radius * v, f)

    def proj(p):
        d = p - c
        return c + radius * d / np.linalg.norm(d)

    for _ in range(subdivisions):
        surf = surf.quadrisected(proj)
    return surf


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class HamiltonianFamily:
    """Rule R -> Hermitian ``dim`` x ``dim`` matrix.

    ``splitter`` optionally returns a Hermitian operator used to resolve
    degenerate multiplets into a canonical frame (see :mod:`holab.nonabelian`).
    """

    name: str
    dim: int
    func: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    param_dim: int = 3
    params: tuple = ()
    splitter: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __call__(self, R) -> np.ndarray:
        return self.evaluate(R)

    def evaluate(self, R) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        if R.shape != (self.param_dim,):
            raise DomainError(f"family {self.name!r} expects a {self.param_dim}-vector, got shape {R.shape}")
        if not np.all(np.isfinite(R)):
            raise DomainError("parameter point must be finite")
        H = np.asarray(self.func(R), dtype=complex)
        if H.shape != (self.dim, self.dim):
            raise ModelError(f"family {self.name!r} returned shape {H.shape}, expected {(self.dim, self.dim)}")
        if not np.all(np.isfinite(H)):
            raise ModelError(f"family {self.name!r} returned non-finite entries at R={R.tolist()}")
        scale = np.abs(H).max()
        if np.abs(H - H.conj().T).max() > HERMITICITY_TOL * max(scale, 1e-300):
            raise ModelError(f"family {self.name!r} is not Hermitian at R={R.tolist()}")
        return H


@dataclass(frozen=True)
class GaugedEigensystem:
    energies: np.ndarray
    states: np.ndarray  # columns
    gauge: str = GAUGE_TAG

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.energies)

    @property
    def spectral_range(self) -> float:
        return float(self.energies[-1] - self.energies[0])

    def level_gap(self, n: int) -> float:
        e = self.energies
        below = e[n] - e[n - 1] if n > 0 else np.inf
        above = e[n + 1] - e[n] if n < len(e) - 1 else np.inf
        return float(min(below, above))

    def is_degenerate(self, n: int) -> bool:
        return self.level_gap(n) < DEGENERACY_TOL * self.spectral_range or self.spectral_range == 0.0

    def state(self, n: int) -> np.ndarray:
        return self.states[:, n]


def _pivot(v: np.ndarray) -> int:
    mod = np.abs(v)
    top = mod.max()
    return int(np.flatnonzero(mod >= top * (1 - TIE_TOL))[0])


def fix_gauge(state, pivot: int | None = None) -> np.ndarray:
    """Rotate ``state`` by a unit scalar so its largest entry is real positive.

    With ``pivot`` given, that entry is used instead (smooth continuation of a
    gauge chosen at a nearby point).
    """
    v = np.asarray(state, dtype=complex)
    if not np.any(v):
        raise DomainError("cannot fix the gauge of the zero vector")
    k = _pivot(v) if pivot is None else pivot
    c = v[k]
    if c == 0:
        raise DomainError("pivot entry vanishes")
    out = v * (abs(c) / c)
    out[k] = abs(c)
    return out


def _lexkey(v: np.ndarray) -> tuple:
    return tuple(np.round(np.column_stack([v.real, v.imag]).ravel(), 12))


def eigendecompose(family: HamiltonianFamily, R, pivots: Sequence[int] | None = None) -> GaugedEigensystem:
    """Ascending energies and gauge-fixed eigenvectors of ``family`` at ``R``."""
    H = family.evaluate(R)
    return eigendecompose_matrix(H, pivots)


def eigendecompose_matrix(H: np.ndarray, pivots: Sequence[int] | None = None) -> GaugedEigensystem:
    Hs = 0.5 * (H + H.conj().T)
    try:
        w, v = np.linalg.eigh(Hs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    cols = [fix_gauge(v[:, j], None if pivots is None else pivots[j]) for j in range(len(w))]
    states = np.column_stack(cols)
    # ties: reorder exactly degenerate clusters lexicographically
    rng = w[-1] - w[0]
    order = list(range(len(w)))
    start = 0
    for j in range(1, len(w) + 1):
        if j == len(w) or w[j] - w[j - 1] > DEGENERACY_TOL * rng:
            if j - start > 1:
                block = sorted(range(start, j), key=lambda i: _lexkey(states[:, i]))
                order[start:j] = block
            start = j
    return GaugedEigensystem(w.copy(), states[:, order].copy())


def gap(family: HamiltonianFamily, R, n: int) -> float:
    """Distance from level ``n`` to its nearest neighbour level (one-sided at band edges)."""
    if not 0 <= n < family.dim:
        raise DomainError(f"level index {n} out of range for dim {family.dim}")
    return eigendecompose(family, R).level_gap(n)


def require_nondegenerate(es: GaugedEigensystem, n: int) -> None:
    if es.is_degenerate(n):
        g = es.level_gap(n)
        raise DegeneracyError(f"level {n} is degenerate (gap {g:.3e}, range {es.spectral_range:.3e})", gap=g)


# ---------------------------------------------------------------------------
# built-in catalog


def zeeman(mu: float = 1.0) -> HamiltonianFamily:
    """Spin-1/2 in a field: H = (mu/2) R.sigma (hbar = 1)."""
    def f(R):
        return 0.5 * mu * np.einsum("i,ijk->jk", R, SIGMA)

    return HamiltonianFamily("zeeman", 2, f, params=(("mu", mu),))


def two_state_linear(matrix=None, offset=(0.0, 0.0, 0.0), energy: float = 0.0) -> HamiltonianFamily:
    """H = energy + F(R).sigma with F(R) = matrix @ R + offset."""
    M = np.eye(3) if matrix is None else np.asarray(matrix, float)
    c = np.asarray(offset, float)

    def f(R):
        F = M @ R + c
        return energy * np.eye(2) + np.einsum("i,ijk->jk", F, SIGMA)

    return HamiltonianFamily("two-state-linear", 2, f, params=(("matrix", tuple(map(tuple, M))), ("offset", tuple(c))))


def two_state(F: Callable[[np.ndarray], np.ndarray], energy: Callable[[np.ndarray], float] | None = None,
              name: str = "two-state") -> HamiltonianFamily:
    """General two-state family H = E(R) + F(R).sigma."""
    def f(R):
        e = 0.0 if energy is None else energy(R)
        return e * np.eye(2) + np.einsum("i,ijk->jk", np.asarray(F(R), float), SIGMA)

    return HamiltonianFamily(name, 2, f)


def quadrupole(omega_q: float = 1.0) -> HamiltonianFamily:
    """Spin-3/2 quadrupole H = omega_q (S.n)^2 with n = R/|R|; levels omega_q m^2."""
    S = spin_matrices(1.5)

    def n_hat(R):
        r = np.linalg.norm(R)
        if r == 0:
            raise DomainError("quadrupole axis undefined at R = 0")
        return R / r

    def f(R):
        Sn = np.einsum("i,ijk->jk", n_hat(R), S)
        return omega_q * Sn @ Sn

    def split(R):
        return np.einsum("i,ijk->jk", n_hat(R), S)

    return HamiltonianFamily("quadrupole", 4, f, params=(("omega_q", omega_q),), splitter=split)


def nmr_rotating(gamma: float = 1.0, omega: float = 0.0) -> HamiltonianFamily:
    """Rotating-frame spin-1/2: H = (gamma/2) (Bx, By, Bz - omega/gamma).sigma with R = B."""
    shift = np.array([0.0, 0.0, omega / gamma])

    def f(R):
        return 0.5 * gamma * np.einsum("i,ijk->jk", R - shift, SIGMA)

    return HamiltonianFamily("nmr-rotating", 2, f, params=(("gamma", gamma), ("omega", omega)))


def real_planar(scale: float = 1.0) -> HamiltonianFamily:
    """Real symmetric two-level family H = X sigma_x + Y sigma_z (+ Z identity).

    Degenerate on the line X = Y = 0; eigenvectors can be chosen real.
    """
    def f(R):
        X, Y, Z = R
        return scale * np.array([[Y + Z, X], [X, -Y + Z]], dtype=complex)

    return HamiltonianFamily("real-planar", 2, f, params=(("scale", scale),))


def coefficient_family(name: str, dim: int, terms: Iterable[tuple[Sequence[int], np.ndarray]],
                       param_dim: int = 3) -> HamiltonianFamily:
    """H(R) = sum_terms prod_a R_a^monomial_a * C_term."""
    tl = [(np.asarray(m, dtype=int), np.asarray(C, dtype=complex)) for m, C in terms]
    for m, C in tl:
        if m.shape != (param_dim,) or np.any(m < 0):
            raise ModelError(f"bad monomial {m.tolist()}")
        if C.shape != (dim, dim):
            raise ModelError(f"coefficient matrix has shape {C.shape}, expected {(dim, dim)}")
        if np.abs(C - C.conj().T).max() > HERMITICITY_TOL * max(np.abs(C).max(), 1e-300):
            raise ModelError(f"coefficient for monomial {m.tolist()} is not Hermitian")
    monos = np.array([m for m, _ in tl])
    mats = np.array([C for _, C in tl])

    def f(R):
        w = np.prod(R[None, :] ** monos, axis=1)
        return np.tensordot(w, mats, axes=1)

    return HamiltonianFamily(name, dim, f, param_dim=param_dim)


def random_family(dim: int, seed: int, quadratic: bool = True, real: bool = False) -> HamiltonianFamily:
    """Seeded random polynomial family (constant + linear + optional quadratic terms)."""
    rng = np.random.default_rng(seed)

    def herm():
        A = rng.normal(size=(dim, dim))
        if not real:
            A = A + 1j * rng.normal(size=(dim, dim))
        return 0.5 * (A + A.conj().T)

    monos = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]
    if quadratic:
        monos += [(2, 0, 0), (1, 1, 0), (0, 1, 1), (0, 0, 2)]
    terms = []
    for m in monos:
        C = herm() * (0.3 if sum(m) == 2 else 1.0)
        terms.append((m, C))
    return coefficient_family(f"random-{dim}-{seed}{'-real' if real else ''}", dim, terms)


def load_coefficient_table(path) -> HamiltonianFamily:
    """Load a user family from a TOML (or JSON) coefficient table.

    Layout::

        name = "my-family"
        dim = 2
        param_dim = 3          # optional, default 3
        [[term]]
        monomial = [1, 0, 0]   # exponents of (X, Y, Z)
        real = [[0, 1], [1, 0]]
        imag = [[0, 0], [0, 0]]   # optional
    """
    from .config import load_structured

    doc = load_structured(path)
    allowed = {"name", "dim", "param_dim", "term"}
    extra = set(doc) - allowed
    if extra:
        raise ModelError(f"unknown keys in coefficient table: {sorted(extra)}")
    dim = int(doc["dim"])
    pdim = int(doc.get("param_dim", 3))
    terms = []
    for t in doc.get("term", []):
        bad = set(t) - {"monomial", "real", "imag"}
        if bad:
            raise ModelError(f"unknown keys in term: {sorted(bad)}")
        C = np.asarray(t["real"], float) + 1j * np.asarray(t.get("imag", np.zeros((dim, dim))), float)
        terms.append((t["monomial"], C))
    if not terms:
        raise ModelError("coefficient table has no terms")
    return coefficient_family(str(doc.get("name", "user")), dim, terms, param_dim=pdim)


BUILTINS: dict[str, Callable[..., HamiltonianFamily]] = {
    "zeeman": zeeman,
    "two-state-linear": two_state_linear,
    "quadrupole": quadrupole,
    "nmr-rotating": nmr_rotating,
    "real-planar": real_planar,
    "random": random_family,
}


def get_family(name: str, **params) -> HamiltonianFamily:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise DomainError(f"unknown family {name!r}; known: {sorted(BUILTINS)}") from None
    return factory(**params)
