"""Closed-form machinery for bosonic function approximation.

Covers target polynomials F*(alpha) = sum_nm W_nm conj(alpha)^n alpha^m, the
unbiased-estimator coefficient solver for the linear phase-preserving
amplifier, the nonlinear-amplifier estimator statistics, expected-MSE
evaluation, Gaussian sampling of estimator instances, and the classical
Gaussian-random-variable baseline estimators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from math import comb, factorial

import numpy as np

HERMITIAN_TOL = 1e-12
CONDITION_LIMIT = 1e12


class SolverError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Coefficient matrices
# ---------------------------------------------------------------------------


@dataclass
class HermitianCoeffMatrix:
    """(D+1)x(D+1) complex matrix with conjugate-transpose symmetry."""

    entries: np.ndarray
    role: str = "target-W"

    def __post_init__(self):
        ent = np.asarray(self.entries, dtype=np.complex128)
        if ent.ndim != 2 or ent.shape[0] != ent.shape[1]:
            raise ValueError("coefficient matrix must be square")
        dev = np.abs(ent - ent.conj().T).max()
        if dev > HERMITIAN_TOL:
            raise ValueError(f"coefficient matrix not Hermitian-symmetric (deviation {dev:.2e})")
        self.entries = ent

    @property
    def degree(self) -> int:
        return self.entries.shape[0] - 1

    def target(self, alpha: np.ndarray) -> np.ndarray:
        """F(alpha) = sum_nm W_nm conj(alpha)^n alpha^m (real for Hermitian W)."""
        alpha = np.asarray(alpha, dtype=np.complex128)
        d = self.degree
        powers = alpha[..., None] ** np.arange(d + 1)
        val = np.einsum("nm,...n,...m->...", self.entries, powers.conj(), powers)
        return val.real

    def to_document(self) -> dict:
        return {
            "degree": self.degree,
            "role": self.role,
            "entries": [[z.real, z.imag] for z in self.entries.ravel()],
        }

    @classmethod
    def from_document(cls, doc: dict) -> "HermitianCoeffMatrix":
        d = doc["degree"]
        flat = np.array([complex(re, im) for re, im in doc["entries"]])
        return cls(flat.reshape(d + 1, d + 1), role=doc.get("role", "target-W"))


@dataclass(frozen=True)
class AmplifierConfig:
    gain: float = 2.0  # linear amplifier gain G > 1 (sqrt(G) = cosh chi)
    g: float = 10.0  # nonlinear coupling > 0
    large_gain: bool = False

    def __post_init__(self):
        if self.gain <= 1:
            raise ValueError("linear amplifier gain must exceed 1")
        if self.g <= 0:
            raise ValueError("nonlinear coupling must be positive")

    @property
    def chi(self) -> float:
        return float(np.arccosh(np.sqrt(self.gain)))


@dataclass
class EstimatorReport:
    mean: np.ndarray
    variance: np.ndarray
    expected_mse: float
    normalization: float
    domain: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Linear phase-preserving amplifier (conventional QS)
# ---------------------------------------------------------------------------


def antinormal_moment(n: int, m: int, alpha: complex, gain: float) -> complex:
    """<b^m b^dag n> of the amplifier readout mode for sensed displacement alpha.

    The guarded binomial vanishes for k < m - n, so the formula holds for
    arbitrary n, m >= 0.
    """
    if n < 0 or m < 0:
        raise ValueError("moment orders must be non-negative")
    if gain <= 1:
        raise ValueError("gain must exceed 1")
    rm1 = np.sqrt(gain - 1.0)
    rg = np.sqrt(gain)
    ac = np.conj(alpha)
    total = 0.0 + 0.0j
    for k in range(max(0, m - n), m + 1):
        term = (
            factorial(m)
            / factorial(k)
            * comb(n, n - m + k)
            * rm1 ** (n - m + 2 * k)
            * rg ** (2 * m - 2 * k)
        )
        total += term * ac**k * alpha ** (n - m + k)
    return complex(total)


def antinormal_moment_scaled(n: int, m: int, alpha: complex) -> complex:
    """Large-gain limit of <b^m b^dag n> / G^((n+m)/2)."""
    ac = np.conj(alpha)
    total = 0.0 + 0.0j
    for k in range(max(0, m - n), m + 1):
        total += factorial(m) / factorial(k) * comb(n, n - m + k) * ac**k * alpha ** (n - m + k)
    return complex(total)


def _monomial_matrix(degree: int, gain: float | None) -> np.ndarray:
    """System matrix mapping vec(C) to monomial coefficients of E[F_QS].

    Row (a, b) collects the coefficient of conj(alpha)^a alpha^b; column
    (n, m) is the contribution of C_nm through <b^m b^dag n>.  With
    gain=None the system is the scaled large-gain one, whose solution is
    C_nm (G - 1)^((n+m)/2) in the G -> infinity limit.
    """
    d1 = degree + 1
    mat = np.zeros((d1 * d1, d1 * d1))
    for n in range(d1):
        for m in range(d1):
            col = n * d1 + m
            for k in range(max(0, m - n), m + 1):
                a, b = k, n - m + k
                coeff = factorial(m) / factorial(k) * comb(n, n - m + k)
                if gain is not None:
                    coeff *= np.sqrt(gain - 1.0) ** (a + b) * gain ** (m - k)
                mat[a * d1 + b, col] += coeff
    return mat


def solve_qs_coefficients(w: HermitianCoeffMatrix, gain: float) -> HermitianCoeffMatrix:
    """Postprocessing coefficients C with E[sum C_nm beta*^n beta^m] = F*.

    Assembled by equating monomial coefficients of the anti-normal moment
    expansion against the target polynomial, then solved as one linear
    system after two-sided diagonal equilibration (the raw monomial basis
    is badly scaled at high degree); the output is symmetrized so
    C_nm = conj(C_mn) exactly.
    """
    mat = _monomial_matrix(w.degree, gain)
    row = 1.0 / np.abs(mat).max(axis=1)
    col = 1.0 / np.abs(mat * row[:, None]).max(axis=0)
    scaled = mat * row[:, None] * col[None, :]
    cond = np.linalg.cond(scaled)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SolverError(f"coefficient system badly conditioned (cond = {cond:.3e})")
    c = col * np.linalg.solve(scaled, row * w.entries.ravel())
    c = c.reshape(w.entries.shape)
    c = (c + c.conj().T) / 2
    return HermitianCoeffMatrix(c, role="postproc-C")


def solve_qs_coefficients_scaled(w: HermitianCoeffMatrix) -> HermitianCoeffMatrix:
    """Large-gain solution in the scaled variable C_nm (G-1)^((n+m)/2)."""
    mat = _monomial_matrix(w.degree, None)
    c = np.linalg.solve(mat, w.entries.ravel()).reshape(w.entries.shape)
    return HermitianCoeffMatrix((c + c.conj().T) / 2, role="postproc-C")


def qs_estimator_stats(
    c: HermitianCoeffMatrix | None,
    w: HermitianCoeffMatrix,
    gain: float,
    alpha: complex,
    large_gain: bool = False,
    check_unbiased: bool = True,
) -> tuple[float, float]:
    """(mean, variance) of the linear-amplifier estimator at one alpha.

    With large_gain the variance is the exact G -> infinity leading form,
    computed from the scaled coefficient system and scaled moments (c may
    then be omitted).
    """
    d = w.degree
    target = float(w.target(np.array(alpha)))
    if large_gain:
        cs = solve_qs_coefficients_scaled(w).entries
        moments = np.array(
            [
                [antinormal_moment_scaled(n, m, alpha) for m in range(2 * d + 1)]
                for n in range(2 * d + 1)
            ]
        )
        idx = np.arange(d + 1)
        nr = idx[:, None, None, None] + idx[None, None, :, None]
        ms = idx[None, :, None, None] + idx[None, None, None, :]
        second = np.einsum("nm,rs,nmrs->", cs, cs, moments[nr, ms])
        return target, float(second.real - target**2)
    moments = np.array(
        [[antinormal_moment(n, m, alpha, gain) for m in range(2 * d + 1)] for n in range(2 * d + 1)]
    )
    mean = complex(np.einsum("nm,nm->", c.entries, moments[: d + 1, : d + 1]))
    if check_unbiased and abs(mean - target) > 1e-9 * max(1.0, abs(target)):
        raise SolverError(
            f"estimator mean {mean} deviates from target {target} (solver bug upstream)"
        )
    # E[F^2] = sum C_nm C_rs <b^{m+s} b^dag{n+r}>
    cg = c.entries
    idx = np.arange(d + 1)
    nr = idx[:, None, None, None] + idx[None, None, :, None]  # n + r
    ms = idx[None, :, None, None] + idx[None, None, None, :]  # m + s
    second = np.einsum("nm,rs,nmrs->", cg, cg, moments[nr, ms])
    return float(mean.real), float(second.real - mean.real**2)


def qcs_estimator_stats(
    w: HermitianCoeffMatrix, g: float, alpha: complex, large_gain: bool = False
) -> tuple[float, float]:
    """(mean, variance) of the nonlinear-amplifier estimator at one alpha.

    Q_nm = W_nm; the readout adds 1/(2 g^2) of vacuum noise on top of the
    quantum fluctuations of f-hat in the coherent state |alpha>.
    """
    if g <= 0:
        raise ValueError("nonlinear coupling must be positive")
    d = w.degree
    ac = np.conj(alpha)
    powers = np.asarray(alpha, dtype=complex) ** np.arange(2 * d + 1)
    cpowers = np.asarray(ac, dtype=complex) ** np.arange(2 * d + 1)
    mean = complex(
        np.einsum("nm,n,m->", w.entries, cpowers[: d + 1], powers[: d + 1])
    )
    # <f^2> via normal ordering of a^m a^dag r
    f2 = 0.0 + 0.0j
    wm = w.entries
    for n in range(d + 1):
        for m in range(d + 1):
            if wm[n, m] == 0:
                continue
            for r in range(d + 1):
                for s in range(d + 1):
                    if wm[r, s] == 0:
                        continue
                    acc = 0.0 + 0.0j
                    for l in range(min(m, r) + 1):
                        acc += (
                            factorial(m)
                            * factorial(r)
                            / (factorial(l) * factorial(m - l) * factorial(r - l))
                            * cpowers[n + r - l]
                            * powers[m + s - l]
                        )
                    f2 += wm[n, m] * wm[r, s] * acc
    var = f2.real - mean.real**2
    if not large_gain:
        var += 1.0 / (2.0 * g**2)
    return float(mean.real), float(var)


def sample_estimator(
    mean: np.ndarray, variance: np.ndarray, rng: np.random.Generator, shots: int = 1
) -> np.ndarray:
    """Gaussian draws with the analytic estimator mean/variance."""
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ValueError("estimator variance must be non-negative")
    shape = (shots,) + mean.shape if shots > 1 else mean.shape
    return mean + np.sqrt(variance) * rng.standard_normal(shape)


def antinormal_moment_statevector(
    n: int, m: int, alpha: complex, gain: float, fock: int = 40
) -> complex:
    """Truncated-space oracle for <b^m b^dag n>: displace mode a, apply the
    two-mode squeezer with cosh(chi) = sqrt(G), then contract b^dag ladders."""
    from . import gates as Gt

    tms = _tms_unitary_cached(float(gain), int(fock))
    psi = Gt.displacement_matrix(alpha, fock)[:, 0]  # D|0> on mode a
    psi = np.kron(psi, _vacuum(fock))
    psi = tms @ psi
    bdag = np.kron(np.eye(fock), Gt.annihilator(fock).conj().T)
    left, right = psi, psi
    for _ in range(m):
        left = bdag @ left
    for _ in range(n):
        right = bdag @ right
    return complex(np.vdot(left, right))


def _vacuum(fock: int) -> np.ndarray:
    v = np.zeros(fock, dtype=complex)
    v[0] = 1.0
    return v


_TMS_CACHE: dict = {}


def _tms_unitary_cached(gain: float, fock: int) -> np.ndarray:
    key = (gain, fock)
    if key not in _TMS_CACHE:
        from . import gates as Gt

        chi = float(np.arccosh(np.sqrt(gain)))
        _TMS_CACHE.clear()  # keep at most one (they are large)
        _TMS_CACHE[key] = Gt.two_mode_squeeze_matrix(chi, fock)
    return _TMS_CACHE[key]


# ---------------------------------------------------------------------------
# Expected MSE over a domain
# ---------------------------------------------------------------------------


def domain_grid_1d(lo: float = -1.0, hi: float = 1.0, points: int = 401) -> dict:
    x = np.linspace(lo, hi, points)
    return {"kind": "grid1d", "alphas": x.astype(complex), "x": x}


def domain_grid_2d(radius: float = 1.0, points: int = 41) -> dict:
    x = np.linspace(-radius, radius, points)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    return {"kind": "grid2d", "alphas": (xx + 1j * yy).ravel(), "x": x}


def domain_points(alphas: np.ndarray) -> dict:
    return {"kind": "points", "alphas": np.asarray(alphas, dtype=complex)}


def _integrate(values: np.ndarray, domain: dict) -> float:
    """Trapezoid quadrature on grids; uniform average scaled by measure on points."""
    if domain["kind"] == "grid1d":
        return float(np.trapezoid(values, domain["x"]))
    if domain["kind"] == "grid2d":
        n = domain["x"].size
        grid = values.reshape(n, n)
        inner = np.trapezoid(grid, domain["x"], axis=1)
        return float(np.trapezoid(inner, domain["x"]))
    return float(np.mean(values))


def expected_mse(variance: np.ndarray, target: np.ndarray, domain: dict) -> float:
    """(1/f) integral of Var over the domain, with f = integral of (F*)^2."""
    f = _integrate(np.asarray(target, dtype=float) ** 2, domain)
    if f <= 0:
        raise ValueError("degenerate target: f = integral (F*)^2 must be positive")
    return _integrate(np.asarray(variance, dtype=float), domain) / f


def estimator_report(
    w: HermitianCoeffMatrix, config: AmplifierConfig, domain: dict, which: str
) -> EstimatorReport:
    """Tabulated mean/variance and expected MSE for 'qs' or 'qcs' estimators."""
    alphas = domain["alphas"]
    if which == "qs":
        c = solve_qs_coefficients(w, config.gain)
        stats = [
            qs_estimator_stats(c, w, config.gain, a, large_gain=config.large_gain)
            for a in alphas
        ]
    elif which == "qcs":
        stats = [qcs_estimator_stats(w, config.g, a, large_gain=config.large_gain) for a in alphas]
    else:
        raise ValueError("which must be 'qs' or 'qcs'")
    mean = np.array([s[0] for s in stats])
    var = np.array([s[1] for s in stats])
    target = w.target(alphas)
    mse = expected_mse(var, target, domain)
    f = _integrate(target**2, domain)
    return EstimatorReport(mean, var, mse, f, {"kind": domain["kind"], "n": alphas.size})


# ---------------------------------------------------------------------------
# Target construction
# ---------------------------------------------------------------------------


def monomial_1d_target(m: int) -> HermitianCoeffMatrix:
    """W for F* = alpha_x^m restricted to real alpha: alpha_x^m = 2^-m sum_k C(m,k) a*^k a^(m-k)."""
    w = np.zeros((m + 1, m + 1), dtype=complex)
    for k in range(m + 1):
        w[k, m - k] += comb(m, k) / 2.0**m
    return HermitianCoeffMatrix(w)


def xor_target() -> HermitianCoeffMatrix:
    """F* = -i alpha^2 + i alpha*^2 = 4 alpha_x alpha_y."""
    w = np.zeros((3, 3), dtype=complex)
    w[0, 2] = -1j
    w[2, 0] = 1j
    return HermitianCoeffMatrix(w)


def fit_target_coefficients(
    alphas: np.ndarray, values: np.ndarray, degree: int, ridge: float = 1e-6
) -> HermitianCoeffMatrix:
    """Supervised fit of W by ridge least squares on real regression targets
    (pass -1/+1 labels for classification tasks).

    Real feature map: |alpha|^(2n) for diagonal entries; 2 Re and -2 Im of
    conj(alpha)^n alpha^m for each off-diagonal pair n < m.
    """
    alphas = np.asarray(alphas, dtype=complex)
    y = np.asarray(values, dtype=float)
    cols = []
    index = []
    powers = alphas[:, None] ** np.arange(degree + 1)
    for n in range(degree + 1):
        cols.append((powers[:, n].conj() * powers[:, n]).real)
        index.append((n, n, "re"))
        for m in range(n + 1, degree + 1):
            z = powers[:, n].conj() * powers[:, m]
            cols.append(2 * z.real)
            index.append((n, m, "re"))
            cols.append(-2 * z.imag)
            index.append((n, m, "im"))
    feats = np.stack(cols, axis=1)
    gram = feats.T @ feats + ridge * np.eye(feats.shape[1])
    coef = np.linalg.solve(gram, feats.T @ y)
    w = np.zeros((degree + 1, degree + 1), dtype=complex)
    for c, (n, m, part) in zip(coef, index):
        if n == m:
            w[n, n] += c
        elif part == "re":
            w[n, m] += c
            w[m, n] += c
        else:
            w[n, m] += 1j * c
            w[m, n] += -1j * c
    return HermitianCoeffMatrix(w)


# ---------------------------------------------------------------------------
# Classical Gaussian-random-variable baseline
# ---------------------------------------------------------------------------


def _central_moment_factor(j: int) -> Fraction:
    """I_j = j! / (2^(j/2) (j/2)!) for even j, else 0."""
    if j % 2:
        return Fraction(0)
    return Fraction(factorial(j), 2 ** (j // 2) * factorial(j // 2))


def gaussian_coefficients_symbolic(m: int) -> list[dict[int, Fraction]]:
    """Unbiased-estimator coefficients as exact polynomials in v = sigma^2/S.

    Returns coefficients C_n for n = 0..m, each a {power: Fraction} mapping,
    satisfying E[sum_n C_n Zbar^n] = z^m for Zbar ~ Normal(z, v).
    """
    if m > 10:
        raise ValueError("degree capped at 10 (factorial growth)")

    def poly_sub(a: dict, b: dict) -> dict:
        out = dict(a)
        for p, c in b.items():
            out[p] = out.get(p, Fraction(0)) - c
            if out[p] == 0:
                del out[p]
        return out

    def poly_scale(a: dict, s: Fraction, shift: int) -> dict:
        return {p + shift: c * s for p, c in a.items() if c != 0}

    coeffs: list[dict[int, Fraction]] = [dict() for _ in range(m + 1)]
    coeffs[m] = {0: Fraction(1)}
    for j in range(m - 1, -1, -1):
        acc: dict[int, Fraction] = {}
        for n in range(j + 1, m + 1):
            if (n - j) % 2:
                continue
            factor = Fraction(comb(n, j)) * _central_moment_factor(n - j)
            acc = poly_sub(acc, poly_scale(coeffs[n], -factor, (n - j) // 2))
        coeffs[j] = poly_sub({}, acc)
    return coeffs


def gaussian_baseline_coefficients(m: int, sigma2: float, shots: int) -> np.ndarray:
    """Numeric coefficients of the unbiased z^m estimator from shot-averaged draws."""
    v = sigma2 / shots
    sym = gaussian_coefficients_symbolic(m)
    return np.array([sum(float(c) * v**p for p, c in poly.items()) for poly in sym])


def gaussian_moment(n: int, z: float, v: float) -> float:
    """E[Zbar^n] for Zbar ~ Normal(z, v)."""
    total = 0.0
    for j in range(n + 1):
        i = _central_moment_factor(n - j)
        if i:
            total += comb(n, j) * float(i) * v ** ((n - j) // 2) * z**j
    return total


def gaussian_estimator_variance(coeffs: np.ndarray, z: float, sigma2: float, shots: int) -> float:
    """Analytic Var[F_m] = sum_np C_n C_p (E[Z^(n+p)] - E[Z^n] E[Z^p])."""
    v = sigma2 / shots
    m = len(coeffs) - 1
    mom = np.array([gaussian_moment(n, z, v) for n in range(2 * m + 1)])
    var = 0.0
    for n in range(m + 1):
        for p in range(m + 1):
            var += coeffs[n] * coeffs[p] * (mom[n + p] - mom[n] * mom[p])
    return float(var)


# ---------------------------------------------------------------------------
# Fixture tables
# ---------------------------------------------------------------------------


def load_fixture(name: str) -> dict:
    text = resources.files("qcslab.fixtures").joinpath(name).read_text()
    return json.loads(text)


def fixture_matrix(name: str) -> HermitianCoeffMatrix:
    return HermitianCoeffMatrix.from_document(load_fixture(name))


def spirals_qs_table(gain: float) -> np.ndarray:
    """Printed postprocessing coefficients for the Spirals task, evaluated at G.

    Entries are stored as numerator polynomials in G over half-integer powers
    of (G - 1); only the upper triangle is stored, the rest follows from
    Hermitian symmetry.
    """
    doc = load_fixture("spirals_postproc_C.json")
    d = doc["degree"]
    c = np.zeros((d + 1, d + 1), dtype=complex)
    for entry in doc["entries"]:
        n, m = entry["n"], entry["m"]
        num = sum(complex(re, im) * gain**p for re, im, p in entry["num"])
        val = num / (gain - 1.0) ** (entry["den_half"] / 2.0)
        c[n, m] = val
        c[m, n] = np.conj(val)
    return c
