"""Dense statevector simulator with a small fixed gate set.

Conventions (bit-exact, relied on by every other module):
- qubit 0 is the leftmost tensor factor, i.e. the most significant bit of
  the amplitude index; amplitude index bit k addresses qubit k.
- RX/RY/RZ(theta) = exp(-i theta/2 P).
- ZZRot(theta) = exp(-i theta/2 Z(i)Z(j)), so the parameter-shift rule has
  the same +-pi/2 form for every shiftable gate.
- HeisenbergCoupler(J, t) = exp(-i t H) with H = -J (XX + YY + ZZ),
  evaluated in closed form from the triplet/singlet eigenstructure.

All gate kernels act on amplitude arrays of shape (batch, 2**n) so that
many states evolve through the same circuit structure at once; the public
single-state API wraps a batch of one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class SimulationError(ValueError):
    """Structural misuse of the simulator (bad indices, bad lengths)."""


class UnsupportedGeneratorError(SimulationError):
    """Parameter-shift requested on a gate without a single Pauli generator."""


@dataclass(frozen=True)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if not (1 <= self.n_qubits <= 8):
            raise SimulationError(f"n_qubits must be in 1..8, got {self.n_qubits}")
        if amps.shape != (2**self.n_qubits,):
            raise SimulationError(
                f"amplitude length {amps.shape} != 2**{self.n_qubits}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class GateOp:
    """Tagged gate description; angles in radians.

    kind in {"rx", "ry", "rz", "cnot", "pauli_vec_rot", "heisenberg", "zzrot"}.
    """

    kind: str
    qubits: tuple
    angle: float = 0.0           # rx / ry / rz / zzrot
    vec: tuple = ()              # pauli_vec_rot: exp(-i/2 <scale*vec, sigma>)
    scale: float = 1.0           # pauli_vec_rot multiplier (FD-differentiable)
    coupling: float = 1.0        # heisenberg J
    time: float = 0.0            # heisenberg t

    @classmethod
    def rx(cls, qubit: int, angle: float) -> "GateOp":
        return cls("rx", (qubit,), angle=angle)

    @classmethod
    def ry(cls, qubit: int, angle: float) -> "GateOp":
        return cls("ry", (qubit,), angle=angle)

    @classmethod
    def rz(cls, qubit: int, angle: float) -> "GateOp":
        return cls("rz", (qubit,), angle=angle)

    @classmethod
    def cnot(cls, control: int, target: int) -> "GateOp":
        if control == target:
            raise SimulationError("CNOT control must differ from target")
        return cls("cnot", (control, target))

    @classmethod
    def pauli_vec_rot(cls, qubit: int, vec, scale: float = 1.0) -> "GateOp":
        vec = tuple(float(v) for v in vec)
        if len(vec) != 3 or not all(math.isfinite(v) for v in vec):
            raise SimulationError("pauli_vec_rot needs a finite 3-vector")
        return cls("pauli_vec_rot", (qubit,), vec=vec, scale=scale)

    @classmethod
    def heisenberg(cls, qubit_i: int, qubit_j: int, coupling: float, time: float) -> "GateOp":
        if qubit_i == qubit_j:
            raise SimulationError("heisenberg coupler needs two distinct qubits")
        return cls("heisenberg", (qubit_i, qubit_j), coupling=coupling, time=time)

    @classmethod
    def zzrot(cls, qubit_i: int, qubit_j: int, angle: float) -> "GateOp":
        if qubit_i == qubit_j:
            raise SimulationError("zzrot needs two distinct qubits")
        return cls("zzrot", (qubit_i, qubit_j), angle=angle)

    def adjoint(self) -> "GateOp":
        if self.kind in ("rx", "ry", "rz", "zzrot"):
            return GateOp(self.kind, self.qubits, angle=-self.angle)
        if self.kind == "cnot":
            return self
        if self.kind == "pauli_vec_rot":
            return GateOp(self.kind, self.qubits, vec=self.vec, scale=-self.scale)
        if self.kind == "heisenberg":
            return GateOp(self.kind, self.qubits, coupling=self.coupling, time=-self.time)
        raise SimulationError(f"unknown gate kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Matrix builders (closed form, double precision)

def rotation_matrix_1q(kind: str, angle) -> np.ndarray:
    """2x2 matrix for rx/ry/rz; `angle` may be scalar or a batch array."""
    a = np.asarray(angle, dtype=float)
    c, s = np.cos(a / 2), np.sin(a / 2)
    if kind == "rx":
        m = np.array([[c, -1j * s], [-1j * s, c]])
    elif kind == "ry":
        m = np.array([[c, -s], [s, c]])
    elif kind == "rz":
        m = np.array([[c - 1j * s, np.zeros_like(c)], [np.zeros_like(c), c + 1j * s]])
    else:
        raise SimulationError(f"not a 1q rotation: {kind!r}")
    return np.moveaxis(m, (0, 1), (-2, -1)) if a.ndim else m.astype(complex)


def pauli_vec_rot_matrix(vec, scale=1.0) -> np.ndarray:
    """exp(-i/2 <scale*vec, sigma>); vec (3,) or (B, 3), scale scalar or (B,)."""
    v = np.asarray(vec, dtype=float) * np.asarray(scale, dtype=float)[..., None] \
        if np.ndim(scale) else np.asarray(vec, dtype=float) * scale
    r = np.linalg.norm(v, axis=-1)
    # unit direction; the limit r -> 0 is the identity, guard the division
    safe = np.where(r > 0, r, 1.0)
    n = v / safe[..., None]
    c, s = np.cos(r / 2), np.sin(r / 2)
    nx, ny, nz = n[..., 0], n[..., 1], n[..., 2]
    m = np.array([
        [c - 1j * s * nz, -1j * s * nx - s * ny],
        [-1j * s * nx + s * ny, c + 1j * s * nz],
    ])
    return np.moveaxis(m, (0, 1), (-2, -1)) if np.ndim(r) else m.astype(complex)


_SINGLET_PROJ = np.array(
    [[0, 0, 0, 0], [0, 0.5, -0.5, 0], [0, -0.5, 0.5, 0], [0, 0, 0, 0]],
    dtype=complex,
)
_TRIPLET_PROJ = np.eye(4, dtype=complex) - _SINGLET_PROJ


def heisenberg_matrix(coupling, time) -> np.ndarray:
    """exp(-i t H), H = -J (XX+YY+ZZ), via S = XX+YY+ZZ = P_t - 3 P_s.

    `coupling` and `time` may be scalars or broadcastable arrays; the
    result has shape (..., 4, 4)."""
    j = np.asarray(coupling, dtype=float)
    t = np.asarray(time, dtype=float)
    # eigenvalues of -J*S: -J on triplet, +3J on singlet
    phase_t = np.exp(1j * t * j)[..., None, None]
    phase_s = np.exp(-3j * t * j)[..., None, None]
    return phase_t * _TRIPLET_PROJ + phase_s * _SINGLET_PROJ


# ---------------------------------------------------------------------------
# Batched kernels: amps has shape (B, 2**n)

def _apply_1q(amps: np.ndarray, mat: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """mat is 2x2 (shared) or (B, 2, 2) (per batch element).

    Moving the acted qubit to the last axis turns the update into one
    (batched) matmul, which is much faster than strided broadcasting."""
    b = amps.shape[0]
    d1, d2 = 2**qubit, 2 ** (n - qubit - 1)
    a = amps.reshape(b, d1, 2, d2).transpose(0, 1, 3, 2).reshape(b, d1 * d2, 2)
    mat_t = np.swapaxes(mat, -2, -1)
    out = a @ mat_t if mat.ndim == 2 else np.matmul(a, mat_t)
    return out.reshape(b, d1, d2, 2).transpose(0, 1, 3, 2).reshape(b, -1)


def _apply_2q(amps: np.ndarray, mat4: np.ndarray, qi: int, qj: int, n: int) -> np.ndarray:
    """Apply a 4x4 (or batched (B,4,4)) matrix given in (qi, qj) bit order."""
    if qi > qj:
        perm = [0, 2, 1, 3]
        mat4 = mat4[..., perm, :][..., :, perm]
        qi, qj = qj, qi
    b = amps.shape[0]
    d1, d2, d3 = 2**qi, 2 ** (qj - qi - 1), 2 ** (n - qj - 1)
    a = amps.reshape(b, d1, 2, d2, 2, d3)
    sub = [a[:, :, r >> 1, :, r & 1, :] for r in range(4)]
    out = np.empty_like(a)
    batched = mat4.ndim == 3
    for r in range(4):
        if batched:
            acc = mat4[:, r, 0, None, None, None] * sub[0]
            for c in range(1, 4):
                acc += mat4[:, r, c, None, None, None] * sub[c]
        else:
            acc = None
            for c in range(4):
                if mat4[r, c] != 0:
                    term = mat4[r, c] * sub[c]
                    acc = term if acc is None else acc + term
            if acc is None:
                acc = 0.0
        out[:, :, r >> 1, :, r & 1, :] = acc
    return out.reshape(b, -1)


def _apply_cnot(amps: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    b = amps.shape[0]
    a = amps.reshape((b,) + (2,) * n)
    out = a.copy()
    idx1 = [slice(None)] * (n + 1)
    idx1[control + 1] = 1
    sub = out[tuple(idx1)]
    out[tuple(idx1)] = np.flip(sub, axis=target + 1 if target < control else target)
    return out.reshape(b, -1)


def _zz_signs(qi: int, qj: int, n: int) -> np.ndarray:
    idx = np.arange(2**n)
    bi = (idx >> (n - 1 - qi)) & 1
    bj = (idx >> (n - 1 - qj)) & 1
    return np.where(bi == bj, 1.0, -1.0)


def _apply_zzrot(amps: np.ndarray, angle, qi: int, qj: int, n: int) -> np.ndarray:
    signs = _zz_signs(qi, qj, n)
    theta = np.asarray(angle, dtype=float)
    phases = np.exp(-0.5j * theta[..., None] * signs) if theta.ndim else np.exp(-0.5j * theta * signs)
    return amps * phases


def apply_gate_batch(amps: np.ndarray, op: GateOp, n: int,
                     angle=None, vecs=None, scale=None) -> np.ndarray:
    """Apply `op` to a (B, 2**n) amplitude block.

    `angle` / `vecs` / `scale` optionally override the op's own parameters
    with per-batch arrays (data-dependent gates in a shared circuit layout).
    """
    for q in op.qubits:
        if not 0 <= q < n:
            raise SimulationError(f"qubit index {q} out of range for {n} qubits")
    if op.kind in ("rx", "ry", "rz"):
        theta = op.angle if angle is None else angle
        return _apply_1q(amps, rotation_matrix_1q(op.kind, theta), op.qubits[0], n)
    if op.kind == "pauli_vec_rot":
        v = np.asarray(op.vec) if vecs is None else vecs
        s = op.scale if scale is None else scale
        return _apply_1q(amps, pauli_vec_rot_matrix(v, s), op.qubits[0], n)
    if op.kind == "cnot":
        return _apply_cnot(amps, op.qubits[0], op.qubits[1], n)
    if op.kind == "zzrot":
        theta = op.angle if angle is None else angle
        return _apply_zzrot(amps, theta, op.qubits[0], op.qubits[1], n)
    if op.kind == "heisenberg":
        mat = heisenberg_matrix(op.coupling, op.time)
        return _apply_2q(amps, mat, op.qubits[0], op.qubits[1], n)
    raise SimulationError(f"unknown gate kind {op.kind!r}")


def apply_gate(state: Statevector, op: GateOp) -> Statevector:
    amps = apply_gate_batch(state.amplitudes[None, :], op, state.n_qubits)
    return Statevector(state.n_qubits, amps[0])


# ---------------------------------------------------------------------------
# Circuits

@dataclass
class Circuit:
    """Ordered gate list with trainable-parameter slots.

    slots[k] = (op position, field); binding a parameter vector writes each
    value into the referenced field ("angle", "time" or "scale").
    """

    n_qubits: int
    ops: list = field(default_factory=list)
    slots: list = field(default_factory=list)

    _BINDABLE = {"angle", "time", "scale"}

    def add(self, op: GateOp, param_field: str | None = None) -> None:
        if param_field is not None:
            if param_field not in self._BINDABLE:
                raise SimulationError(f"cannot bind field {param_field!r}")
            self.slots.append((len(self.ops), param_field))
        self.ops.append(op)

    @property
    def n_params(self) -> int:
        return len(self.slots)

    def bind(self, params) -> list:
        params = np.asarray(params, dtype=float)
        if params.shape != (len(self.slots),):
            raise SimulationError(
                f"expected {len(self.slots)} parameters, got {params.shape}"
            )
        bound = list(self.ops)
        for value, (pos, fld) in zip(params, self.slots):
            if not 0 <= pos < len(bound):
                raise SimulationError(f"slot references op {pos} out of bounds")
            op = bound[pos]
            kwargs = {
                "angle": op.angle, "vec": op.vec, "scale": op.scale,
                "coupling": op.coupling, "time": op.time,
            }
            kwargs[fld] = float(value)
            bound[pos] = GateOp(op.kind, op.qubits, **kwargs)
        return bound


def run(circuit: Circuit, params, initial: Statevector) -> Statevector:
    if initial.n_qubits != circuit.n_qubits:
        raise SimulationError("initial state size does not match circuit")
    amps = initial.amplitudes[None, :]
    for op in circuit.bind(params):
        amps = apply_gate_batch(amps, op, circuit.n_qubits)
    return Statevector(circuit.n_qubits, amps[0])


# ---------------------------------------------------------------------------
# Observables

@dataclass(frozen=True)
class PauliObservable:
    """Weighted sum of Pauli strings, e.g. [(1.0, "XXI"), (0.5, "ZZI")]."""

    terms: tuple

    def __init__(self, terms):
        norm_terms = []
        for coef, string in terms:
            string = str(string).upper()
            if any(ch not in "IXYZ" for ch in string):
                raise SimulationError(f"bad Pauli string {string!r}")
            norm_terms.append((float(coef), string))
        object.__setattr__(self, "terms", tuple(norm_terms))

    @property
    def n_qubits(self) -> int:
        return len(self.terms[0][1]) if self.terms else 0

    def matrix(self) -> np.ndarray:
        """Dense matrix via Kronecker products (test oracle; <= 8 qubits)."""
        dim = 2**self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for coef, string in self.terms:
            m = np.array([[1.0 + 0j]])
            for ch in string:
                m = np.kron(m, PAULI[ch])
            out += coef * m
        return out


def _apply_pauli_string(amps: np.ndarray, string: str, n: int) -> np.ndarray:
    out = amps
    for q, ch in enumerate(string):
        if ch != "I":
            out = _apply_1q(out, PAULI[ch], q, n)
    return out


_OBS_MATRIX_CACHE: dict = {}


def expectation_batch(amps: np.ndarray, obs: PauliObservable, n: int) -> np.ndarray:
    if obs.n_qubits != n:
        raise SimulationError("observable qubit count does not match state")
    # dense Hermitian matrix, cached per observable: one matmul beats
    # per-term Pauli-string application for the small state sizes here
    mat = _OBS_MATRIX_CACHE.get(obs.terms)
    if mat is None:
        mat = obs.matrix()
        _OBS_MATRIX_CACHE[obs.terms] = mat
    return np.einsum("bi,bi->b", amps.conj(), amps @ mat.T).real


def expectation(state: Statevector, obs: PauliObservable) -> float:
    return float(expectation_batch(state.amplitudes[None, :], obs, state.n_qubits)[0])


# ---------------------------------------------------------------------------
# Gradients

_SHIFTABLE = {"rx", "ry", "rz", "zzrot"}


def grad_param_shift(circuit: Circuit, params, obs: PauliObservable,
                     initial: Statevector) -> np.ndarray:
    """Exact gradient d<obs>/d theta_k = (E(+pi/2) - E(-pi/2)) / 2."""
    params = np.asarray(params, dtype=float)
    for pos, fld in circuit.slots:
        op = circuit.ops[pos]
        if op.kind not in _SHIFTABLE or fld != "angle":
            raise UnsupportedGeneratorError(
                f"parameter-shift unsupported for {op.kind}.{fld}; use grad_fd"
            )
    grad = np.empty(len(params))
    for k in range(len(params)):
        shifted = params.copy()
        shifted[k] = params[k] + math.pi / 2
        e_plus = expectation(run(circuit, shifted, initial), obs)
        shifted[k] = params[k] - math.pi / 2
        e_minus = expectation(run(circuit, shifted, initial), obs)
        grad[k] = 0.5 * (e_plus - e_minus)
    return grad


def grad_fd(evaluate, point, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of a real vector."""
    if h <= 0:
        raise SimulationError("finite-difference step must be positive")
    point = np.asarray(point, dtype=float)
    grad = np.empty(point.shape[0])
    for k in range(point.shape[0]):
        stepped = point.copy()
        stepped[k] = point[k] + h
        f_plus = evaluate(stepped)
        stepped[k] = point[k] - h
        f_minus = evaluate(stepped)
        grad[k] = (f_plus - f_minus) / (2 * h)
    return grad
