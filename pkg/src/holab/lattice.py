"""Magnetic Bloch bands of the Harper model at rational flux.

The q x q Bloch matrix uses the Landau gauge along x with the magnetic cell
q sites long; the bond that closes the cell carries the phase e^{i q kx}, so
H(k) is strictly periodic over the magnetic zone [0, 2 pi/q) x [0, 2 pi).
Chern numbers come from plaquette products of normalized overlaps; the
Kubo curvature sum and the Diophantine gap labels serve as cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

from .errors import DegeneracyError, DomainError, LabelError, NumericalError

GAP_TOL = 1e-6


@dataclass(frozen=True)
class FluxRational:
    p: int
    q: int

    def __post_init__(self):
        if self.q < 1 or self.p < 0:
            raise DomainError("flux needs q >= 1 and p >= 0")
        if gcd(self.p, self.q) != 1:
            raise DomainError(f"p/q = {self.p}/{self.q} is not in lowest terms")

    @property
    def alpha(self) -> float:
        return self.p / self.q


def _flux(f) -> FluxRational:
    if isinstance(f, FluxRational):
        return f
    p, q = f
    return FluxRational(int(p), int(q))


def harper_hamiltonian(flux, k, hopping=(1.0, 1.0)) -> np.ndarray:
    """q x q Bloch matrix at k = (kx, ky).

    Diagonal 2 ty cos(ky + 2 pi (p/q) j); bonds j -> j+1 of strength tx,
    with the cell-closing bond (q-1 -> 0) carrying e^{i q kx}.
    """
    f = _flux(flux)
    return harper_batch(f, np.atleast_2d(np.asarray(k, float)), hopping)[0]


def harper_batch(flux, ks: np.ndarray, hopping=(1.0, 1.0)) -> np.ndarray:
    f = _flux(flux)
    q = f.q
    tx, ty = hopping
    ks = np.asarray(ks, float)
    n = len(ks)
    H = np.zeros((n, q, q), complex)
    j = np.arange(q)
    H[:, j, j] = 2 * ty * np.cos(ks[:, 1:2] + 2 * np.pi * f.alpha * j[None, :])
    for a in range(q):
        b = (a + 1) % q
        ph = np.exp(1j * q * ks[:, 0]) if a == q - 1 else np.ones(n)
        H[:, b, a] += tx * ph
        H[:, a, b] += tx * np.conj(ph)
    return H


def harper_derivatives(flux, ks: np.ndarray, hopping=(1.0, 1.0)) -> tuple[np.ndarray, np.ndarray]:
    """Exact dH/dkx and dH/dky for each k."""
    f = _flux(flux)
    q = f.q
    tx, ty = hopping
    ks = np.asarray(ks, float)
    n = len(ks)
    Hx = np.zeros((n, q, q), complex)
    Hy = np.zeros((n, q, q), complex)
    j = np.arange(q)
    Hy[:, j, j] = -2 * ty * np.sin(ks[:, 1:2] + 2 * np.pi * f.alpha * j[None, :])
    ph = 1j * q * np.exp(1j * q * ks[:, 0])
    Hx[:, 0, q - 1] += tx * ph
    Hx[:, q - 1, 0] += tx * np.conj(ph)
    return Hx, Hy


@dataclass
class BandGrid:
    flux: FluxRational
    nk: int
    kx: np.ndarray
    ky: np.ndarray
    energies: np.ndarray  # (nk, nk, q)
    states: np.ndarray  # (nk, nk, q, q), columns are bands
    residual: float


def band_grid(flux, nk: int, hopping=(1.0, 1.0)) -> BandGrid:
    f = _flux(flux)
    kx = 2 * np.pi / f.q * np.arange(nk) / nk
    ky = 2 * np.pi * np.arange(nk) / nk
    K = np.stack(np.meshgrid(kx, ky, indexing="ij"), -1).reshape(-1, 2)
    H = harper_batch(f, K, hopping)
    E, U = np.linalg.eigh(H)
    res = float(np.abs(H @ U - U * E[:, None, :]).max())
    if res > 1e-10:
        raise NumericalError(f"eigen residual {res:.2e}")
    return BandGrid(f, nk, kx, ky, E.reshape(nk, nk, f.q), U.reshape(nk, nk, f.q, f.q), res)


@dataclass
class ChernReport:
    flux: FluxRational
    nk: int
    per_band: list  # int or None for bands that touch a neighbour
    raw: list
    gaps: list  # minimal direct gap above band n (n = 0..q-2)
    touching: list  # pairs (n, n+1) with a closed gap
    groups: list  # (first band, last band, chern) for isolated band groups
    total: int

    def to_record(self) -> dict:
        return {"p": self.flux.p, "q": self.flux.q, "nk": self.nk, "per_band": self.per_band,
                "raw": [float(x) for x in self.raw], "gaps": [float(x) for x in self.gaps],
                "touching": [list(t) for t in self.touching],
                "groups": [[a, b, c] for a, b, c in self.groups], "total": self.total}


def plaquette_field(states: np.ndarray, bands) -> np.ndarray:
    """Lattice field strength for a band group (determinant of overlap blocks on each link)."""
    u = states[..., list(bands)]  # (nk, nk, q, m)

    def link(v, axis):
        w = np.roll(v, -1, axis=axis)
        M = np.einsum("xyim,xyin->xymn", np.conj(v), w)
        d = np.linalg.det(M)
        return d / np.abs(d)

    U1 = link(u, 0)
    U2 = link(u, 1)
    F = np.angle(U1 * np.roll(U2, -1, axis=0) * np.conj(np.roll(U1, -1, axis=1)) * np.conj(U2))
    return F


def band_chern(flux, nk: int = 24, hopping=(1.0, 1.0), redecorate: np.random.Generator | None = None) -> ChernReport:
    """Per-band Chern numbers by the plaquette link-variable method.

    Bands whose direct gap to a neighbour falls below 1e-6 on the mesh are
    flagged and only the Chern number of the touching group is reported.
    ``redecorate`` multiplies every eigenvector by a random phase first.
    """
    f = _flux(flux)
    g = band_grid(f, nk, hopping)
    states = g.states
    if redecorate is not None:
        ph = np.exp(2j * np.pi * redecorate.random(states.shape[:2] + (1, f.q)))
        states = states * ph
    q = f.q
    gaps = [float((g.energies[..., n + 1] - g.energies[..., n]).min()) for n in range(q - 1)]
    touching = [(n, n + 1) for n in range(q - 1) if gaps[n] <= GAP_TOL]
    raw = []
    per_band: list = []
    for n in range(q):
        c = plaquette_field(states, [n]).sum() / (2 * np.pi)
        raw.append(float(c))
    groups = []
    start = 0
    for n in range(q):
        if n == q - 1 or gaps[n] > GAP_TOL:
            bands = list(range(start, n + 1))
            c = plaquette_field(states, bands).sum() / (2 * np.pi)
            ci = int(np.rint(c))
            if abs(c - ci) >= 0.5 - 1e-9:
                raise NumericalError(f"plaquette sum {c:.4f} not near an integer; refine the mesh")
            groups.append((start, n, ci))
            start = n + 1
    for a, b, c in groups:
        for n in range(a, b + 1):
            per_band.append(int(np.rint(raw[n])) if a == b else None)
    total = int(sum(c for _, _, c in groups))
    return ChernReport(f, nk, per_band, raw, gaps, touching, groups, total)


# ---------------------------------------------------------------------------
# Diophantine labels


def gap_label(flux, r: int) -> int:
    """t_r solving r = q s + p t with |t| <= q/2 (t_0 = t_q = 0)."""
    f = _flux(flux)
    p, q = f.p, f.q
    if not 0 <= r <= q:
        raise LabelError(f"gap index {r} outside 0..{q}")
    if r in (0, q):
        return 0
    sols = [t for t in range(-(q // 2), q // 2 + 1) if (r - p * t) % q == 0]
    if len(sols) != 1:
        raise LabelError(f"gap {r} at flux {p}/{q} has {len(sols)} admissible labels")
    return sols[0]


def diophantine_chern(flux, band: int) -> int:
    """Chern number of band ``band`` (1-based): t_band - t_{band-1}."""
    return gap_label(flux, band) - gap_label(flux, band - 1)


# ---------------------------------------------------------------------------
# Kubo formula


def kubo_curvature(flux, nk: int, hopping=(1.0, 1.0)) -> np.ndarray:
    """Per-band curvature integrals (1/2 pi) sum V_n dkx dky from the perturbation sum.

    V_n = 2 Im sum_{m != n} <n|dH/dkx|m><m|dH/dky|n> / (E_n - E_m)^2, the curl of
    Im<n|grad n>; same orientation as the plaquette field.
    """
    f = _flux(flux)
    g = band_grid(f, nk, hopping)
    K = np.stack(np.meshgrid(g.kx, g.ky, indexing="ij"), -1).reshape(-1, 2)
    Hx, Hy = harper_derivatives(f, K, hopping)
    U = g.states.reshape(-1, f.q, f.q)
    E = g.energies.reshape(-1, f.q)
    X = np.einsum("kia,kij,kjb->kab", np.conj(U), Hx, U)
    Y = np.einsum("kia,kij,kjb->kab", np.conj(U), Hy, U)
    dE = E[:, :, None] - E[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = 1.0 / dE**2
    idx = np.arange(f.q)
    w[:, idx, idx] = 0.0
    if not np.all(np.isfinite(w)):
        raise DegeneracyError("band touching on the mesh; Kubo sum undefined")
    V = 2 * np.imag(np.einsum("kab,kba,kab->ka", X, Y, w))
    dA = (2 * np.pi / f.q / nk) * (2 * np.pi / nk)
    return V.sum(0) * dA / (2 * np.pi)


@dataclass(frozen=True)
class KuboResult:
    sigma: float
    per_band: np.ndarray
    nk: int
    refinement_change: float


def kubo_converged(flux, nk: int = 24, hopping=(1.0, 1.0), tol: float = 1e-9, max_nk: int = 768) -> KuboResult:
    """Kubo curvature integrals with the mesh doubled until the change is below ``tol``."""
    cur = kubo_curvature(flux, nk, hopping)
    while nk < max_nk:
        nk *= 2
        nxt = kubo_curvature(flux, nk, hopping)
        change = float(np.abs(nxt - cur).max())
        cur = nxt
        if change < tol:
            return KuboResult(float(cur.sum()), cur, nk, change)
    raise NumericalError(f"Kubo sum not converged at nk = {nk}")


def kubo_sigma(flux, nk: int, fermi_index: int, hopping=(1.0, 1.0), tol: float = 1e-9) -> float:
    """Hall conductance in units of e^2/h with the lowest ``fermi_index`` bands filled.

    Starts from an nk x nk mesh and doubles it until converged to ``tol``.
    """
    f = _flux(flux)
    if not 0 <= fermi_index <= f.q:
        raise DomainError("Fermi index outside 0..q")
    if fermi_index == 0:
        return 0.0
    if fermi_index < f.q:
        g = band_grid(f, nk, hopping)
        gap = float((g.energies[..., fermi_index] - g.energies[..., fermi_index - 1]).min())
        if gap <= GAP_TOL:
            raise DegeneracyError(f"Fermi level at index {fermi_index} lies inside a band (gap {gap:.2e})")
    elif f.q == 1:
        return 0.0
    res = kubo_converged(f, nk, hopping, tol)
    return float(res.per_band[:fermi_index].sum())


# ---------------------------------------------------------------------------
# butterfly


def coprime_fluxes(q_max: int) -> list[FluxRational]:
    out = []
    for q in range(1, q_max + 1):
        for p in range(0, q + 1):
            if gcd(p, q) == 1:
                out.append(FluxRational(p, q))
    return sorted(out, key=lambda f: (f.alpha, f.q))


def butterfly(q_max: int, nk: int = 4, hopping=(1.0, 1.0)) -> np.ndarray:
    """Rows (flux, energy) over coprime p/q with q <= q_max on an nk x nk zone mesh."""
    rows = []
    for f in coprime_fluxes(q_max):
        g = band_grid(f, nk, hopping)
        for e in np.sort(g.energies.ravel()):
            rows.append((f.alpha, float(e)))
    return np.array(rows)
