"""Two-outcome Pauli measurement models for qubits, with optional visibility.

Three model families share one likelihood,
``Pr(+/-1 | x, eta, sigma_k) = eta (1 +/- x_k) / 2 + (1 - eta) / 2``:

* ``qubit``    -- q qubits, parameters are the ``4**q - 1`` Pauli expectations
                  ``x_k = Tr(rho sigma_k)``, ``k = k_1 + 4 k_2 + ...``.
* ``rebit``    -- one qubit confined to the X-Y plane of the Bloch ball;
                  parameters ``(x_X, x_Y)``, measured with X or Y.
* ``diagonal`` -- ``rho = p|0><0| + (1 - p)|1><1|``; parameter ``p``,
                  measured with Z only.

When the visibility is estimated it is appended as the last parameter.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "Model",
    "Datum",
    "ModelError",
    "PAULI_LABELS",
    "pauli_matrix",
    "pauli_basis",
    "likelihood",
    "is_valid",
    "sample_prior",
    "simulate_outcome",
    "random_control",
    "reconstruct_density",
    "pauli_expectations",
    "qubit_model",
    "rebit_model",
    "diagonal_model",
]

PSD_TOL = 1e-9
PAULI_LABELS = "IXYZ"
_KINDS = ("qubit", "rebit", "diagonal")

_SIGMA = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class ModelError(ValueError):
    pass


class Datum(NamedTuple):
    outcome: int  # +1 or -1
    control: int  # Pauli index k


@dataclass(frozen=True)
class Model:
    """Immutable model descriptor.

    ``visibility`` fixes eta; ``visibility_interval`` makes eta a parameter
    with a uniform prior on that interval. With neither set the
    measurements are noiseless (eta = 1).
    """

    kind: str = "qubit"
    qubits: int = 1
    visibility: float | None = None
    visibility_interval: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}; expected one of {_KINDS}")
        if self.qubits < 1:
            raise ModelError("qubits must be >= 1")
        if self.kind != "qubit" and self.qubits != 1:
            raise ModelError(f"{self.kind} model is single-qubit")
        if self.visibility is not None and self.visibility_interval is not None:
            raise ModelError("set either a fixed visibility or a visibility interval, not both")
        if self.visibility is not None and not 0.0 <= self.visibility <= 1.0:
            raise ModelError(f"visibility {self.visibility} outside [0, 1]")
        if self.visibility_interval is not None:
            lo, hi = self.visibility_interval
            if not 0.0 <= lo < hi <= 1.0:
                raise ModelError(f"visibility interval {self.visibility_interval} is not inside [0, 1]")
            object.__setattr__(self, "visibility_interval", (float(lo), float(hi)))

    @property
    def has_visibility(self) -> bool:
        return self.visibility is not None or self.visibility_interval is not None

    @property
    def estimates_visibility(self) -> bool:
        return self.visibility_interval is not None

    @property
    def dim_state(self) -> int:
        if self.kind == "qubit":
            return 4**self.qubits - 1
        return 2 if self.kind == "rebit" else 1

    @property
    def dim(self) -> int:
        return self.dim_state + int(self.estimates_visibility)

    @property
    def n_controls(self) -> int:
        return 4**self.qubits - 1

    @property
    def state_coords(self) -> list[int]:
        return list(range(self.dim_state))

    @property
    def visibility_coords(self) -> list[int]:
        return [self.dim_state] if self.estimates_visibility else []

    @property
    def labels(self) -> list[str]:
        if self.kind == "qubit":
            names = [f"x_{pauli_string(k, self.qubits)}" for k in range(1, 4**self.qubits)]
        elif self.kind == "rebit":
            names = ["x_X", "x_Y"]
        else:
            names = ["p"]
        return names + (["eta"] if self.estimates_visibility else [])


def qubit_model(qubits: int = 1, **kw) -> Model:
    return Model("qubit", qubits, **kw)


def rebit_model(**kw) -> Model:
    return Model("rebit", 1, **kw)


def diagonal_model(**kw) -> Model:
    return Model("diagonal", 1, **kw)


# ---------------------------------------------------------------------------
# Pauli algebra


def pauli_string(k: int, qubits: int) -> str:
    digits = [(k // 4**i) % 4 for i in range(qubits)]
    return "".join(PAULI_LABELS[j] for j in digits)


def pauli_matrix(k: int, qubits: int) -> np.ndarray:
    """``sigma_{k_1} (x) sigma_{k_2} (x) ...`` with ``k_1`` the lowest base-4 digit."""
    out = np.ones((1, 1), dtype=complex)
    for i in range(qubits):
        out = np.kron(out, _SIGMA[(k // 4**i) % 4])
    return out


@functools.lru_cache(maxsize=None)
def pauli_basis(qubits: int) -> np.ndarray:
    """All ``4**q`` Pauli matrices, index ``k`` along the first axis."""
    basis = np.array([pauli_matrix(k, qubits) for k in range(4**qubits)])
    basis.setflags(write=False)
    return basis


def _bloch_coords(model: Model, params: np.ndarray) -> np.ndarray:
    """Full Pauli-expectation vector (without x_0) for each row of params."""
    p = params[..., : model.dim_state]
    if model.kind == "qubit":
        return p
    if model.kind == "rebit":
        return np.concatenate([p, np.zeros(p.shape[:-1] + (1,))], axis=-1)
    z = 2.0 * p - 1.0
    zeros = np.zeros(p.shape[:-1] + (2,))
    return np.concatenate([zeros, z], axis=-1)


def reconstruct_density(model: Model, x) -> np.ndarray:
    """``rho = 2^{-q} sum_k x_k sigma_k`` with ``x_0 = 1``; batched over leading axes."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] not in (model.dim_state, model.dim):
        raise ModelError(f"expected {model.dim_state} state parameters, got {x.shape[-1]}")
    full = _bloch_coords(model, x)
    basis = pauli_basis(model.qubits)
    rho = np.tensordot(full, basis[1:], axes=([-1], [0])) + basis[0]
    return rho / 2**model.qubits


def pauli_expectations(rho, qubits: int) -> np.ndarray:
    """``Tr(rho sigma_k)`` for ``k = 1 .. 4**q - 1``; batched over leading axes."""
    basis = pauli_basis(qubits)[1:]
    return np.einsum("...ij,kji->...k", np.asarray(rho), basis).real


# ---------------------------------------------------------------------------
# likelihood and validity


def _eta(model: Model, params: np.ndarray):
    if model.estimates_visibility:
        return params[..., -1]
    return 1.0 if model.visibility is None else model.visibility


def _check_params(model: Model, params) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.shape[-1] != model.dim:
        raise ModelError(f"expected {model.dim} parameters, got {params.shape[-1]}")
    return params


def _check_control(model: Model, control: int) -> int:
    k = int(control)
    if not 1 <= k <= model.n_controls:
        raise ModelError(f"control index {control} out of range 1..{model.n_controls}")
    return k


def expectation(model: Model, params, control: int) -> np.ndarray:
    """``x_k`` of the state part of ``params`` for Pauli ``k = control``."""
    params = _check_params(model, params)
    k = _check_control(model, control)
    if model.kind == "qubit":
        return params[..., k - 1]
    if model.kind == "rebit":
        return params[..., k - 1] if k < 3 else np.zeros(params.shape[:-1])
    if k == 3:
        return 2.0 * params[..., 0] - 1.0
    return np.zeros(params.shape[:-1])


def likelihood(model: Model, params, datum: Datum) -> np.ndarray | float:
    """Probability of ``datum.outcome`` for each parameter row."""
    params = _check_params(model, params)
    if datum.outcome not in (1, -1):
        raise ModelError(f"outcome must be +1 or -1, got {datum.outcome}")
    xk = expectation(model, params, datum.control)
    out = 0.5 + 0.5 * datum.outcome * _eta(model, params) * xk
    return float(out) if np.ndim(out) == 0 else out


def is_valid(model: Model, params) -> np.ndarray | bool:
    params = _check_params(model, params)
    single = params.ndim == 1
    p = np.atleast_2d(params)
    ok = np.all(np.isfinite(p), axis=1)
    state = np.where(ok[:, None], p[:, : model.dim_state], 0.0)
    if model.kind == "diagonal":
        ok &= (state[:, 0] >= 0.0) & (state[:, 0] <= 1.0)
    elif model.kind == "rebit" or model.qubits == 1:
        # eigenvalues of a qubit state are (1 +/- |x|) / 2
        ok &= np.linalg.norm(state, axis=1) <= 1.0 + 2.0 * PSD_TOL
    else:
        eig = np.linalg.eigvalsh(reconstruct_density(model, state))
        ok &= eig[:, 0] >= -PSD_TOL
    if model.estimates_visibility:
        lo, hi = model.visibility_interval
        eta = p[:, -1]
        ok &= (eta >= lo) & (eta <= hi)
    return bool(ok[0]) if single else ok


# ---------------------------------------------------------------------------
# sampling


def _ginibre_states(qubits: int, size: int, rng: np.random.Generator) -> np.ndarray:
    dim = 2**qubits
    g = rng.standard_normal((size, dim, dim)) + 1j * rng.standard_normal((size, dim, dim))
    rho = g @ np.conj(np.swapaxes(g, -1, -2))
    rho /= np.trace(rho, axis1=-2, axis2=-1).real[:, None, None]
    return pauli_expectations(rho, qubits)


def _real_ginibre_disk(size: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((size, 2, 2))
    rho = g @ np.swapaxes(g, -1, -2)
    rho /= np.trace(rho, axis1=-2, axis2=-1)[:, None, None]
    x = pauli_expectations(rho.astype(complex), 1)
    # real states live in the X-Z disk; the measure is rotation invariant,
    # so relabel Z as Y to put the disk in the X-Y plane
    return x[:, [0, 2]]


def sample_prior(model: Model, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Hilbert-Schmidt prior on states, uniform on p and on the eta interval."""
    n = 1 if size is None else int(size)
    if model.kind == "qubit":
        state = _ginibre_states(model.qubits, n, rng)
    elif model.kind == "rebit":
        state = _real_ginibre_disk(n, rng)
    else:
        state = rng.uniform(0.0, 1.0, size=(n, 1))
    if model.estimates_visibility:
        lo, hi = model.visibility_interval
        state = np.hstack([state, rng.uniform(lo, hi, size=(n, 1))])
    return state[0] if size is None else state


def random_control(model: Model, rng: np.random.Generator) -> int:
    if model.kind == "diagonal":
        return 3
    if model.kind == "rebit":
        return int(rng.integers(1, 3))
    return int(rng.integers(1, 4**model.qubits))


def simulate_outcome(model: Model, truth, control: int, rng: np.random.Generator) -> Datum:
    p_plus = likelihood(model, truth, Datum(1, control))
    return Datum(1 if rng.uniform() < p_plus else -1, int(control))


def all_controls(model: Model) -> list[int]:
    if model.kind == "diagonal":
        return [3]
    if model.kind == "rebit":
        return [1, 2]
    return list(range(1, 4**model.qubits))

