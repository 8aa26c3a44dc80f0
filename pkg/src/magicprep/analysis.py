"""Estimators over shot records.

Post-selection statistics, logical tomography, the per-round decay fit, and
detection event fractions with pairwise correlations. Count-based results
carry ``merge`` so partial results from separate workers combine exactly.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import sqrtm
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin

from .circuit import Circuit, build_prep_circuit, append_syndrome_rounds, logical_measurement_bases
from .detectors.model import DetectorModel
from .layout import SurfaceCodeLayout, bloch_vector
from .stabsim.tableau import run_tableau

# cited reference lines for plots, not computed here
DISTILLATION_REFERENCE = {
    "h_type_fidelity_threshold": 0.859,
    "t_type_fidelity_threshold": 0.827,
    "h_type_15_to_1_error_threshold": 0.141,
}

POST_SELECTION_MODES = {"PREP_ROUND": 1, "TWO_ROUNDS": 2}
CORRELATION_ESTIMATOR = "p_ij = 1/2 - 1/2 sqrt(1 - 4 cov_ij / (1 - 2<x_i> - 2<x_j> + 4<x_i x_j>)), clipped at 0"


class EmptyRetainedError(ValueError):
    """Post-selection kept no shots, so the post-selected error is undefined."""


class InsufficientShotsError(ValueError):
    pass


class FitError(RuntimeError):
    pass


class DegenerateDenominatorError(ValueError):
    pass


# ------------------------------------------------------------------ post-selection


def _binom_se(k: int, n: int) -> float:
    if n == 0:
        return math.nan
    p = k / n
    return math.sqrt(max(p * (1 - p), 0.0) / n)


@dataclass(frozen=True)
class PostSelectionResult:
    total: int
    retained: int
    raw_errors: int
    det_errors: int
    mode: str = "PREP_ROUND"

    @property
    def retained_fraction(self) -> float:
        return self.retained / self.total if self.total else math.nan

    @property
    def eps_raw(self) -> float:
        return self.raw_errors / self.total if self.total else math.nan

    @property
    def eps_det(self) -> float:
        if self.retained == 0:
            raise EmptyRetainedError("post-selection kept no shots")
        return self.det_errors / self.retained

    @property
    def ratio(self) -> float:
        return self.eps_raw / self.eps_det if self.det_errors else math.inf

    @property
    def retained_fraction_se(self) -> float:
        return _binom_se(self.retained, self.total)

    @property
    def eps_raw_se(self) -> float:
        return _binom_se(self.raw_errors, self.total)

    @property
    def eps_det_se(self) -> float:
        return _binom_se(self.det_errors, self.retained)

    @property
    def ratio_se(self) -> float:
        """Delta-method standard error of eps_raw / eps_det."""
        if not self.det_errors or not self.raw_errors:
            return math.inf
        r = self.ratio
        return r * math.hypot(self.eps_raw_se / self.eps_raw, self.eps_det_se / self.eps_det)

    def merge(self, other: "PostSelectionResult") -> "PostSelectionResult":
        if other.mode != self.mode:
            raise ValueError("cannot merge results from different post-selection modes")
        return PostSelectionResult(
            self.total + other.total,
            self.retained + other.retained,
            self.raw_errors + other.raw_errors,
            self.det_errors + other.det_errors,
            self.mode,
        )

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "total": self.total,
            "retained": self.retained,
            "raw_errors": self.raw_errors,
            "det_errors": self.det_errors,
            "retained_fraction": self.retained_fraction,
            "retained_fraction_se": self.retained_fraction_se,
            "eps_raw": self.eps_raw,
            "eps_raw_se": self.eps_raw_se,
        }
        if self.retained:
            out.update(eps_det=self.eps_det, eps_det_se=self.eps_det_se, ratio=self.ratio, ratio_se=self.ratio_se)
        else:
            out.update(eps_det=None, empty_retained=True)
        return out


def post_selection_mask(events: np.ndarray, model: DetectorModel, mode: str = "PREP_ROUND") -> np.ndarray:
    """True for shots with no detection event in the rounds ``mode`` covers."""
    if mode not in POST_SELECTION_MODES:
        raise ValueError(f"unknown post-selection mode {mode!r}; expected one of {sorted(POST_SELECTION_MODES)}")
    last = POST_SELECTION_MODES[mode]
    rounds = int(model.metadata.get("rounds", last))
    if last > rounds:
        raise ValueError(f"mode {mode} needs {last} extraction rounds, circuit has {rounds}")
    idx = model.detectors_up_to_round(last)
    events = np.atleast_2d(events)
    if len(idx) == 0:
        return np.ones(events.shape[0], bool)
    return ~events[:, idx].any(axis=1)


def post_select(
    bits: np.ndarray,
    model: DetectorModel,
    ideal: Sequence[int] | np.ndarray,
    mode: str = "PREP_ROUND",
    observable: int = 0,
    predicted_flips: np.ndarray | None = None,
) -> PostSelectionResult:
    """Post-selection statistics for one block of shots.

    ``ideal`` holds the noiseless observable bits. ``predicted_flips``
    (decoder output) is XORed onto the observables before scoring.
    """
    bits = np.atleast_2d(np.asarray(bits, np.uint8))
    events = model.detector_bits(bits)
    keep = post_selection_mask(events, model, mode)
    obs = model.observable_bits(bits)
    if predicted_flips is not None:
        obs = obs ^ np.asarray(predicted_flips, np.uint8)
    wrong = obs[:, observable] != np.uint8(np.asarray(ideal)[observable])
    return PostSelectionResult(len(bits), int(keep.sum()), int(wrong.sum()), int((wrong & keep).sum()), mode)


def ideal_observables(circuit: Circuit, layout: SurfaceCodeLayout, model: DetectorModel) -> np.ndarray:
    """Noiseless value of each observable bit; raises if one is random."""
    basis = circuit.metadata.get("final_basis")
    if basis is None:
        raise ValueError("circuit has no logical measurement")
    ins = circuit.instructions
    first_data = min(i for i, op in enumerate(ins) if op.tag and op.tag[0] == "data")
    prefix = Circuit(ins[:first_data], circuit.metadata)
    tab = run_tableau(prefix).tableau
    bases = logical_measurement_bases(layout, basis)
    data_of = {circuit.tag_index[("data", q)]: q for q in layout.data_qubits}
    out = []
    for ob in model.observables:
        e = tab.expectation({data_of[o]: bases[data_of[o]] for o in ob.ordinals})
        if e == 0:
            raise ValueError(f"observable {ob.name} is not deterministic for this state")
        out.append(0 if e == 1 else 1)
    return np.array(out, np.uint8)


# ----------------------------------------------------------------------- tomography


def target_state(theta: float, phi: float) -> np.ndarray:
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)], dtype=complex)


_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def density_from_bloch(r: Sequence[float]) -> np.ndarray:
    rho = 0.5 * np.eye(2, dtype=complex)
    for k, b in zip(r, "XYZ"):
        rho = rho + 0.5 * k * _PAULI[b]
    return rho


def project_psd(rho: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalise to trace one."""
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise ValueError("estimate has no positive part")
    w = w / w.sum()
    return (v * w) @ v.conj().T


def state_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``."""
    s = sqrtm(rho)
    val = np.trace(sqrtm(s @ sigma @ s)).real ** 2
    return float(min(max(val, 0.0), 1.0))


@dataclass(frozen=True)
class LogicalTomography:
    expectations: Mapping[str, float]
    stderr: Mapping[str, float]
    rho: np.ndarray
    fidelity: float
    target: tuple[float, float]
    shots: Mapping[str, int] = field(default_factory=dict)

    @property
    def bloch(self) -> np.ndarray:
        return np.array([np.trace(self.rho @ _PAULI[b]).real for b in "XYZ"])

    def to_dict(self) -> dict:
        return {
            "expectations": dict(self.expectations),
            "stderr": dict(self.stderr),
            "rho_real": self.rho.real.tolist(),
            "rho_imag": self.rho.imag.tolist(),
            "fidelity": self.fidelity,
            "target_theta": self.target[0],
            "target_phi": self.target[1],
            "shots": dict(self.shots),
            "estimator": "linear inversion, eigenvalue truncation",
        }


def tomography_from_expectations(
    expectations: Mapping[str, float], theta: float, phi: float, stderr: Mapping[str, float] | None = None
) -> LogicalTomography:
    r = [float(expectations[b]) for b in "XYZ"]
    rho = project_psd(density_from_bloch(r))
    psi = target_state(theta, phi)
    fid = state_fidelity(rho, np.outer(psi, psi.conj()))
    return LogicalTomography(dict(zip("XYZ", r)), dict(stderr or {b: 0.0 for b in "XYZ"}), rho, fid, (theta, phi))


def tomography(outcomes: Mapping[str, np.ndarray], theta: float, phi: float, min_shots: int = 100) -> LogicalTomography:
    """Estimate the logical state from per-basis logical outcome bits.

    ``outcomes[b]`` holds 0/1 bits for basis ``b`` in X, Y, Z, with 0 meaning
    the +1 eigenvalue.
    """
    ex, se, shots = {}, {}, {}
    for b in "XYZ":
        if b not in outcomes:
            raise ValueError(f"missing outcomes for basis {b}")
        bits = np.asarray(outcomes[b], np.uint8).ravel()
        if len(bits) < min_shots:
            raise InsufficientShotsError(f"basis {b} has {len(bits)} shots; need at least {min_shots}")
        m = 1.0 - 2.0 * bits.mean()
        ex[b] = m
        se[b] = math.sqrt(max(1.0 - m * m, 0.0) / len(bits))
        shots[b] = len(bits)
    t = tomography_from_expectations(ex, theta, phi, se)
    return LogicalTomography(t.expectations, t.stderr, t.rho, t.fidelity, t.target, shots)


def logical_paulis(layout: SurfaceCodeLayout) -> dict[str, dict[int, str]]:
    """X_L on the column, Z_L on the row, Y_L = i X_L Z_L."""
    x = {q: "X" for q in layout.logical_x}
    z = {q: "Z" for q in layout.logical_z}
    y = {**x, **z, layout.center: "Y"}
    return {"X": x, "Y": y, "Z": z}


def exact_logical_expectations(
    layout: SurfaceCodeLayout, theta: float, phi: float, gate_set: str = "CNOT", rounds: int = 1
) -> dict[str, int]:
    """Noiseless <X_L>, <Y_L>, <Z_L> from the tableau (cardinal angles only)."""
    c = append_syndrome_rounds(build_prep_circuit(layout, theta, phi, gate_set), layout, rounds - 1)
    tab = run_tableau(c).tableau
    return {b: tab.expectation(p) for b, p in logical_paulis(layout).items()}


def ideal_expectations(theta: float, phi: float) -> dict[str, float]:
    return dict(zip("XYZ", bloch_vector(theta, phi)))


# ------------------------------------------------------------------ decay fit


def decay_model(k, eps, k0):
    """``F_L(k) = (1 + (1 - 2 eps)^(k - k0)) / 2``."""
    return 0.5 * (1.0 + np.power(1.0 - 2.0 * eps, np.asarray(k, float) - k0))


@dataclass(frozen=True)
class DecayFit:
    eps: float
    k0: float
    covariance: np.ndarray

    @property
    def eps_stderr(self) -> float:
        return float(math.sqrt(max(self.covariance[0, 0], 0.0)))

    def to_dict(self) -> dict:
        return {"eps_L": self.eps, "k0": self.k0, "eps_L_se": self.eps_stderr, "covariance": self.covariance.tolist()}


_EPS_MAX = 0.5 - 1e-12


def fit_error_per_round(
    rounds: Sequence[float], fidelities: Sequence[float], sigma: Sequence[float] | None = None
) -> DecayFit:
    """Least-squares fit of ``eps_L`` and ``k0`` to a fidelity series."""
    k = np.asarray(rounds, float)
    f = np.asarray(fidelities, float)
    if k.shape != f.shape or k.ndim != 1:
        raise ValueError("rounds and fidelities must be 1-d and the same length")
    if len(k) < 3:
        raise ValueError("need at least 3 rounds to fit")
    w = np.ones_like(f) if sigma is None else 1.0 / np.maximum(np.asarray(sigma, float), 1e-12)

    # start from a straight-line fit of log(2F - 1)
    y = np.log(np.clip(2 * f - 1, 1e-12, None))
    slope, icpt = np.polyfit(k, y, 1)
    eps0 = float(np.clip((1 - math.exp(min(slope, 0.0))) / 2, 0.0, 0.49))
    k00 = float(-icpt / slope) if abs(slope) > 1e-12 else 0.0
    if not math.isfinite(k00) or abs(k00) > 1e6:
        k00 = 0.0

    def resid(p):
        return w * (decay_model(k, p[0], p[1]) - f)

    res = least_squares(
        resid, [eps0, k00], bounds=([0.0, -np.inf], [_EPS_MAX, np.inf]), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10000
    )
    if res.status <= 0:
        raise FitError(f"decay fit did not converge: {res.message}")
    eps, k0 = map(float, res.x)
    jtj = res.jac.T @ res.jac
    dof = max(len(k) - 2, 1)
    scale = 1.0 if sigma is not None else float(res.fun @ res.fun) / dof
    cov = np.linalg.pinv(jtj) * scale
    return DecayFit(eps, k0, cov)


class ErrorPerRoundFit(RegressorMixin, BaseEstimator):
    """Estimator wrapper: ``fit(rounds, fidelities)`` then ``predict(rounds)``."""

    def __init__(self, absolute_sigma: bool = True):
        self.absolute_sigma = absolute_sigma

    def fit(self, X, y, sigma=None):
        k = np.asarray(X, float).reshape(-1)
        res = fit_error_per_round(k, np.asarray(y, float), sigma if self.absolute_sigma else None)
        self.eps_, self.k0_, self.covariance_ = res.eps, res.k0, res.covariance
        self.result_ = res
        return self

    def predict(self, X):
        return decay_model(np.asarray(X, float).reshape(-1), self.eps_, self.k0_)


# ------------------------------------------------------ detection events, correlations


@dataclass
class DetectionStats:
    """Running sums for detection fractions and pair correlations."""

    n: int = 0
    s1: np.ndarray | None = None
    s2: np.ndarray | None = None

    def update(self, events: np.ndarray) -> "DetectionStats":
        e = np.asarray(events, np.float64)
        if self.s1 is None:
            self.s1 = np.zeros(e.shape[1])
            self.s2 = np.zeros((e.shape[1], e.shape[1]))
        self.n += e.shape[0]
        self.s1 += e.sum(axis=0)
        self.s2 += e.T @ e
        return self

    def merge(self, other: "DetectionStats") -> "DetectionStats":
        if other.s1 is None:
            return DetectionStats(self.n, None if self.s1 is None else self.s1.copy(), None if self.s2 is None else self.s2.copy())
        if self.s1 is None:
            return DetectionStats(other.n, other.s1.copy(), other.s2.copy())
        return DetectionStats(self.n + other.n, self.s1 + other.s1, self.s2 + other.s2)


@dataclass(frozen=True)
class DefMatrix:
    """Detection fraction per stabilizer (rows) and round (columns).

    The last column holds detectors built from the data readout; rounds
    without a detector for a stabilizer are NaN.
    """

    values: np.ndarray
    labels: tuple[str, ...]
    per_detector: np.ndarray
    final_column_from_data: bool = True


@dataclass(frozen=True)
class CorrMatrix:
    values: np.ndarray
    labels: tuple[str, ...]
    estimator: str = CORRELATION_ESTIMATOR


def correlation_matrix(mean: np.ndarray, pair: np.ndarray) -> np.ndarray:
    xi = mean[:, None]
    xj = mean[None, :]
    den = 1.0 - 2.0 * xi - 2.0 * xj + 4.0 * pair
    off = ~np.eye(len(mean), dtype=bool)
    if np.any(np.abs(den[off]) < 1e-12):
        raise DegenerateDenominatorError("correlation denominator vanishes for some detector pair")
    cov = pair - xi * xj
    arg = np.clip(1.0 - 4.0 * cov / np.where(off, den, 1.0), 0.0, None)
    p = 0.5 - 0.5 * np.sqrt(arg)
    p = np.clip(p, 0.0, None)
    np.fill_diagonal(p, 0.0)
    return p


def def_and_correlation(
    events: np.ndarray | DetectionStats, model: DetectorModel, min_shots: int = 10_000
) -> tuple[DefMatrix, CorrMatrix]:
    stats = events if isinstance(events, DetectionStats) else DetectionStats().update(events)
    if stats.n < min_shots:
        raise InsufficientShotsError(f"{stats.n} shots; need at least {min_shots}")
    mean = stats.s1 / stats.n
    pair = stats.s2 / stats.n
    rounds = int(model.metadata.get("rounds", 1))
    stabs = sorted({d.stabilizer for d in model.detectors})
    table = np.full((max(stabs, default=-1) + 1, rounds + 1), np.nan)
    for i, d in enumerate(model.detectors):
        table[d.stabilizer, d.round - 1] = mean[i]
    labels = tuple(d.name for d in model.detectors)
    return DefMatrix(table, labels, mean), CorrMatrix(correlation_matrix(mean, pair), labels)


def matrix_csv(values: np.ndarray, row_labels: Sequence[str], col_labels: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + list(col_labels))
    for lab, row in zip(row_labels, values):
        w.writerow([lab] + ["" if not np.isfinite(v) else repr(float(v)) for v in row])
    return buf.getvalue()


def def_csv(m: DefMatrix, stabilizer_names: Sequence[str]) -> str:
    cols = [f"round{r + 1}" for r in range(m.values.shape[1] - 1)] + ["final(data)"]
    return matrix_csv(m.values, stabilizer_names[: m.values.shape[0]], cols)


def corr_csv(m: CorrMatrix) -> str:
    return matrix_csv(m.values, m.labels, m.labels)
