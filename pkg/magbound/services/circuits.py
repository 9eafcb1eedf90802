"""
Programmable gadget circuits for state preparation and measurement.

A gadget on n qubits is n+1 layers of single-qubit rotations
R = exp(-i(ax X + ay Y + az Z)) interleaved with n CNOT fans; fan t follows
layer t, uses qubit t as control and targets every other qubit in ascending
order. Switch bits turn gates on or off: per_gate keeps n(n+1) rotation bits
and n(n-1) CNOT bits, per_layer keeps one bit per rotation layer and per fan.

A genome holds a preparation half and a measurement half. Each half acts on a
copy block of two qubits (repeated on every copy) or globally on all 2k
qubits. The encoding channel sits between the halves, and the measurement
half is followed by a computational-basis readout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from magbound.errors import DimensionError
from magbound.models.encoding import WORKING_POINT, build_model, kcopy_model
from magbound.schemas import (
    DEConfig,
    GadgetDocument,
    GadgetScope,
    GAConfig,
    GenomeDocument,
    GradientDescentConfig,
    PSOConfig,
    SwitchEncoding,
)
from magbound.services.fisher import Measurement, cfi_matrix, crb_or_penalty, outcome_distribution
from magbound.services.optimizers import (
    Individual,
    OptimizationResult,
    SearchSpace,
    de_minimize,
    genetic_gradient_minimize,
    gradient_descent,
    pso_minimize,
)
from magbound.utils.linalg import MAX_QUBITS, PAULI_X, PAULI_Y, PAULI_Z, cnot, herm_exp, kron_all

logger = logging.getLogger(__name__)

QUBITS_PER_COPY = 2


def rotation_gate(ax: float, ay: float, az: float) -> np.ndarray:
    return herm_exp(ax * PAULI_X + ay * PAULI_Y + az * PAULI_Z, -1.0)


@dataclass(frozen=True, eq=False)
class Gadget:
    n_qubits: int
    rotation_switches: np.ndarray  # (n+1, n) bool
    cnot_switches: np.ndarray  # (n, n-1) bool, fan t targets the other qubits ascending
    angles: np.ndarray  # (n+1, n, 3)

    def __post_init__(self) -> None:
        n = self.n_qubits
        rot = np.asarray(self.rotation_switches, dtype=bool)
        cx = np.asarray(self.cnot_switches, dtype=bool).reshape(n, max(n - 1, 0))
        angles = np.asarray(self.angles, dtype=float)
        if rot.shape != (n + 1, n) or angles.shape != (n + 1, n, 3):
            raise ValueError(f"Malformed gadget on {n} qubits: switches {rot.shape}, angles {angles.shape}")
        object.__setattr__(self, "rotation_switches", rot)
        object.__setattr__(self, "cnot_switches", cx)
        object.__setattr__(self, "angles", angles)

    @classmethod
    def off(cls, n_qubits: int) -> "Gadget":
        n = n_qubits
        return cls(n, np.zeros((n + 1, n), bool), np.zeros((n, n - 1), bool), np.zeros((n + 1, n, 3)))

    @classmethod
    def from_layer_bits(cls, n_qubits: int, layer_bits: np.ndarray, angles: np.ndarray) -> "Gadget":
        """2n+1 bits: n+1 rotation layers then n fans."""
        n = n_qubits
        bits = np.asarray(layer_bits, dtype=bool)
        if bits.size != 2 * n + 1:
            raise ValueError(f"per_layer gadget on {n} qubits needs {2 * n + 1} bits, got {bits.size}")
        rot = np.repeat(bits[: n + 1, None], n, axis=1)
        cx = np.repeat(bits[n + 1 :, None], n - 1, axis=1)
        return cls(n, rot, cx, angles)

    def layer_bits(self) -> np.ndarray:
        """Per-layer view; a layer or fan counts as on if any of its gates is on."""
        return np.concatenate([self.rotation_switches.any(axis=1), self.cnot_switches.any(axis=1)]).astype(int)

    @staticmethod
    def fan_targets(n_qubits: int, control: int) -> Tuple[int, ...]:
        return tuple(q for q in range(n_qubits) if q != control)

    def rotation_layer(self, t: int) -> np.ndarray:
        return kron_all(
            rotation_gate(*self.angles[t, q]) if self.rotation_switches[t, q] else np.eye(2, dtype=complex)
            for q in range(self.n_qubits)
        )

    def unitary(self) -> np.ndarray:
        n = self.n_qubits
        u = np.eye(2**n, dtype=complex)
        for t in range(n + 1):
            if self.rotation_switches[t].any():
                u = self.rotation_layer(t) @ u
            if t < n:
                for slot, target in enumerate(self.fan_targets(n, t)):
                    if self.cnot_switches[t, slot]:
                        u = cnot(n, t, target) @ u
        return u


@dataclass(frozen=True, eq=False)
class CircuitGenome:
    prep: Tuple[Gadget, ...]
    meas: Tuple[Gadget, ...]
    encoding: SwitchEncoding = "per_gate"
    k_copies: int = 1
    prep_scope: GadgetScope = "copy"
    meas_scope: GadgetScope = "global"

    def __post_init__(self) -> None:
        object.__setattr__(self, "prep", tuple(self.prep))
        object.__setattr__(self, "meas", tuple(self.meas))
        if QUBITS_PER_COPY * self.k_copies > MAX_QUBITS:
            raise DimensionError(f"{self.k_copies} copies exceed {MAX_QUBITS} qubits")
        for half, scope in (("prep", self.prep_scope), ("meas", self.meas_scope)):
            expected = self.gadget_qubits(scope)
            for gadget in getattr(self, half):
                if gadget.n_qubits != expected:
                    raise ValueError(f"{half} gadget acts on {gadget.n_qubits} qubits, scope {scope} needs {expected}")

    @property
    def n_qubits(self) -> int:
        return QUBITS_PER_COPY * self.k_copies

    def gadget_qubits(self, scope: GadgetScope) -> int:
        return QUBITS_PER_COPY if scope == "copy" else self.n_qubits

    @property
    def layout(self) -> tuple:
        return (self.encoding, self.k_copies, self.prep_scope, self.meas_scope, len(self.prep), len(self.meas))


@dataclass(frozen=True, eq=False)
class CompiledCircuit:
    prep_unitary: np.ndarray  # on the copy block or all qubits, per prep_scope
    meas_unitary: np.ndarray  # on all 2k qubits
    n_qubits: int
    k_copies: int
    prep_scope: GadgetScope


def _half_unitary(gadgets: Tuple[Gadget, ...], n_qubits: int) -> np.ndarray:
    u = np.eye(2**n_qubits, dtype=complex)
    for gadget in gadgets:
        u = gadget.unitary() @ u
    return u


def compile_genome(genome: CircuitGenome) -> CompiledCircuit:
    prep = _half_unitary(genome.prep, genome.gadget_qubits(genome.prep_scope))
    meas = _half_unitary(genome.meas, genome.gadget_qubits(genome.meas_scope))
    if genome.meas_scope == "copy":
        meas = kron_all([meas] * genome.k_copies)
    return CompiledCircuit(
        prep_unitary=prep,
        meas_unitary=meas,
        n_qubits=genome.n_qubits,
        k_copies=genome.k_copies,
        prep_scope=genome.prep_scope,
    )


def simulate(genome: CircuitGenome, gamma: float, phi=WORKING_POINT):
    """Model of the encoded prepared state and the measurement the circuit implements."""
    circuit = compile_genome(genome)
    psi0 = circuit.prep_unitary[:, 0]
    if circuit.prep_scope == "copy":
        model = kcopy_model(build_model(psi0, gamma, phi), circuit.k_copies)
    else:
        model = build_model(psi0, gamma, phi)
    return model, Measurement.projective(circuit.meas_unitary.conj().T)


def circuit_objective(genome: CircuitGenome, gamma: float, phi=WORKING_POINT) -> float:
    """k Tr F^-1 of the circuit's outcome distribution, SINGULAR_PENALTY when F is singular."""
    model, measurement = simulate(genome, gamma, phi)
    p, dp = outcome_distribution(model, measurement)
    return crb_or_penalty(cfi_matrix(p, dp), genome.k_copies)


def grow(genome: CircuitGenome, probability: float, rng: np.random.Generator) -> CircuitGenome:
    if not 0.0 <= probability <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    if rng.random() >= probability:
        return genome
    if rng.random() < 0.5:
        extra = Gadget.off(genome.gadget_qubits(genome.prep_scope))
        return replace(genome, prep=genome.prep + (extra,))
    extra = Gadget.off(genome.gadget_qubits(genome.meas_scope))
    return replace(genome, meas=genome.meas + (extra,))


# ---------------------------------------------------------------------------
# Flat encoding for the optimizers
# ---------------------------------------------------------------------------


def _gadget_bits(gadget: Gadget, encoding: SwitchEncoding) -> np.ndarray:
    if encoding == "per_layer":
        return gadget.layer_bits()
    return np.concatenate([gadget.rotation_switches.ravel(), gadget.cnot_switches.ravel()]).astype(int)


def _gadget_sizes(n: int, encoding: SwitchEncoding) -> Tuple[int, int]:
    bits = 2 * n + 1 if encoding == "per_layer" else n * (n + 1) + n * (n - 1)
    return bits, 3 * n * (n + 1)


def _gadget_from_flat(n: int, bits: np.ndarray, angles: np.ndarray, encoding: SwitchEncoding) -> Gadget:
    angles = angles.reshape(n + 1, n, 3)
    if encoding == "per_layer":
        return Gadget.from_layer_bits(n, bits, angles)
    n_rot = n * (n + 1)
    return Gadget(n, bits[:n_rot].reshape(n + 1, n), bits[n_rot:].reshape(n, n - 1), angles)


def genome_to_flat(genome: CircuitGenome) -> Tuple[np.ndarray, np.ndarray, tuple]:
    gadgets = genome.prep + genome.meas
    bits = np.concatenate([_gadget_bits(g, genome.encoding) for g in gadgets]) if gadgets else np.zeros(0, int)
    angles = np.concatenate([g.angles.ravel() for g in gadgets]) if gadgets else np.zeros(0)
    return bits, angles, genome.layout


def genome_from_flat(bits: np.ndarray, angles: np.ndarray, layout: tuple) -> CircuitGenome:
    encoding, k, prep_scope, meas_scope, n_prep, n_meas = layout
    shell = CircuitGenome((), (), encoding, k, prep_scope, meas_scope)
    halves = {"prep": [], "meas": []}
    b_pos = a_pos = 0
    for half, count, scope in (("prep", n_prep, prep_scope), ("meas", n_meas, meas_scope)):
        n = shell.gadget_qubits(scope)
        n_bits, n_angles = _gadget_sizes(n, encoding)
        for _ in range(count):
            halves[half].append(
                _gadget_from_flat(n, bits[b_pos : b_pos + n_bits], angles[a_pos : a_pos + n_angles], encoding)
            )
            b_pos += n_bits
            a_pos += n_angles
    if b_pos != len(bits) or a_pos != len(angles):
        raise ValueError("Flat genome length does not match its layout")
    return replace(shell, prep=tuple(halves["prep"]), meas=tuple(halves["meas"]))


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------


def _bitstring(bits: np.ndarray) -> str:
    return "".join(str(int(b)) for b in np.asarray(bits).ravel())


def genome_to_document(genome: CircuitGenome) -> GenomeDocument:
    def gadget_doc(g: Gadget) -> GadgetDocument:
        if genome.encoding == "per_layer":
            layer = g.layer_bits()
            rot, cx = layer[: g.n_qubits + 1], layer[g.n_qubits + 1 :]
        else:
            rot, cx = g.rotation_switches, g.cnot_switches
        return GadgetDocument(
            n_qubits=g.n_qubits,
            rotation_switches=_bitstring(rot),
            cnot_switches=_bitstring(cx),
            angles=g.angles.tolist(),
        )

    return GenomeDocument(
        encoding=genome.encoding,
        k_copies=genome.k_copies,
        prep_scope=genome.prep_scope,
        meas_scope=genome.meas_scope,
        prep=[gadget_doc(g) for g in genome.prep],
        meas=[gadget_doc(g) for g in genome.meas],
    )


def genome_from_document(doc: GenomeDocument) -> CircuitGenome:
    def gadget(d: GadgetDocument) -> Gadget:
        n = d.n_qubits
        rot = np.array([int(c) for c in d.rotation_switches], dtype=int)
        cx = np.array([int(c) for c in d.cnot_switches], dtype=int)
        angles = np.asarray(d.angles, dtype=float)
        if doc.encoding == "per_layer":
            return Gadget.from_layer_bits(n, np.concatenate([rot, cx]), angles)
        return Gadget(n, rot.reshape(n + 1, n), cx.reshape(n, max(n - 1, 0)), angles)

    return CircuitGenome(
        prep=tuple(gadget(d) for d in doc.prep),
        meas=tuple(gadget(d) for d in doc.meas),
        encoding=doc.encoding,
        k_copies=doc.k_copies,
        prep_scope=doc.prep_scope,
        meas_scope=doc.meas_scope,
    )


def genome_to_json(genome: CircuitGenome) -> str:
    return genome_to_document(genome).model_dump_json(indent=2)


def genome_from_json(text: str) -> CircuitGenome:
    return genome_from_document(GenomeDocument.model_validate_json(text))


# ---------------------------------------------------------------------------
# Presets and random genomes
# ---------------------------------------------------------------------------


def noiseless_preset(angles: Optional[np.ndarray] = None) -> CircuitGenome:
    """
    One-copy noiseless circuit: rotation layer, CNOT(0->1), channel,
    rotation layer, CNOT(1->0), rotation layer, readout.
    """
    prep = Gadget.off(2)
    prep_rot = prep.rotation_switches.copy()
    prep_rot[0] = True
    prep_cx = np.array([[True], [False]])
    meas_rot = np.zeros((3, 2), bool)
    meas_rot[0] = meas_rot[2] = True
    meas_cx = np.array([[False], [True]])
    prep_angles, meas_angles = (np.zeros((3, 2, 3)), np.zeros((3, 2, 3))) if angles is None else angles
    return CircuitGenome(
        prep=(Gadget(2, prep_rot, prep_cx, prep_angles),),
        meas=(Gadget(2, meas_rot, meas_cx, meas_angles),),
        encoding="per_gate",
        k_copies=1,
        prep_scope="copy",
        meas_scope="global",
    )


def random_genome(
    rng: np.random.Generator,
    k_copies: int = 1,
    encoding: SwitchEncoding = "per_gate",
    prep_scope: GadgetScope = "copy",
    meas_scope: GadgetScope = "global",
    n_prep: int = 1,
    n_meas: int = 1,
) -> CircuitGenome:
    shell = CircuitGenome((), (), encoding, k_copies, prep_scope, meas_scope)
    n_bits = n_angles = 0
    for count, scope in ((n_prep, prep_scope), (n_meas, meas_scope)):
        b, a = _gadget_sizes(shell.gadget_qubits(scope), encoding)
        n_bits += count * b
        n_angles += count * a
    return genome_from_flat(
        rng.integers(0, 2, size=n_bits),
        rng.uniform(0.0, 2.0 * np.pi, size=n_angles),
        shell.layout[:4] + (n_prep, n_meas),
    )


# ---------------------------------------------------------------------------
# Circuit optimizers
# ---------------------------------------------------------------------------


def _active_angle_mask(genome: CircuitGenome) -> np.ndarray:
    gadgets = genome.prep + genome.meas
    return np.concatenate([np.repeat(g.rotation_switches[..., None], 3, axis=2).ravel() for g in gadgets])


def optimize_circuit_angles(
    genome: CircuitGenome,
    gamma: float,
    pso_cfg: Optional[PSOConfig] = None,
    gd_cfg: Optional[GradientDescentConfig] = None,
    seed: Optional[int] = None,
) -> Tuple[CircuitGenome, OptimizationResult]:
    """PSO over the angles of switched-on rotations, then a gradient-descent polish."""
    bits, angles, layout = genome_to_flat(genome)
    mask = _active_angle_mask(genome)

    def objective(active: np.ndarray) -> float:
        full = angles.copy()
        full[mask] = active
        return circuit_objective(genome_from_flat(bits, full, layout), gamma)

    space = SearchSpace.angles(int(mask.sum()))
    swarm = pso_minimize(objective, space, pso_cfg, seed=seed, x0=angles[mask])
    polished = gradient_descent(objective, swarm.x, gd_cfg, space)
    best = polished if polished.value <= swarm.value else swarm
    final = angles.copy()
    final[mask] = best.x
    result = OptimizationResult(
        x=final,
        value=best.value,
        trace=swarm.trace + polished.trace,
        iterations=swarm.iterations + polished.iterations,
        evaluations=swarm.evaluations + polished.evaluations,
        bits=bits,
        layout=layout,
    )
    return genome_from_flat(bits, final, layout), result


def de_optimize_circuit(
    gamma: float,
    k_copies: int,
    cfg: Optional[DEConfig] = None,
    seed: Optional[int] = None,
    prep_scope: GadgetScope = "copy",
    meas_scope: GadgetScope = "global",
    n_prep: int = 1,
    n_meas: int = 1,
) -> Tuple[CircuitGenome, OptimizationResult]:
    """DE over the per-layer switch bits and every rotation angle."""
    template = random_genome(np.random.default_rng(0), k_copies, "per_layer", prep_scope, meas_scope, n_prep, n_meas)
    bits, angles, layout = genome_to_flat(template)
    space = SearchSpace.angles(angles.size, discrete_bits=bits.size)
    result = de_minimize(
        lambda x, b: circuit_objective(genome_from_flat(b, x, layout), gamma),
        space,
        cfg,
        seed=seed,
    )
    result.layout = layout
    logger.info("de circuit: gamma=%.3f k=%d best=%.8f", gamma, k_copies, result.value)
    return genome_from_flat(result.bits, result.x, layout), result


def genetic_optimize_circuit(
    gamma: float,
    k_copies: int,
    cfg: Optional[GAConfig] = None,
    seed: Optional[int] = None,
    prep_scope: GadgetScope = "copy",
    meas_scope: GadgetScope = "global",
) -> Tuple[CircuitGenome, OptimizationResult]:
    """Genetic-gradient search over per-gate genomes that may grow extra gadgets."""
    cfg = cfg or GAConfig()
    rng = np.random.default_rng(seed)
    initial = []
    for _ in range(cfg.pop_size):
        bits, angles, layout = genome_to_flat(random_genome(rng, k_copies, "per_gate", prep_scope, meas_scope))
        initial.append(Individual(bits=bits, angles=angles, layout=layout))

    def objective(bits: np.ndarray, angles: np.ndarray, layout: tuple) -> float:
        return circuit_objective(genome_from_flat(bits, angles, layout), gamma)

    def grow_individual(ind: Individual, child_rng: np.random.Generator) -> Individual:
        genome = genome_from_flat(ind.bits, ind.angles, ind.layout)
        grown = grow(genome, cfg.growth_probability, child_rng)
        if grown is genome:
            return ind
        bits, angles, layout = genome_to_flat(grown)
        return Individual(bits=bits, angles=angles, layout=layout)

    result = genetic_gradient_minimize(objective, initial, cfg, seed=int(rng.integers(2**32)), grow=grow_individual)
    logger.info("genetic circuit: gamma=%.3f k=%d best=%.8f", gamma, k_copies, result.value)
    return genome_from_flat(result.bits, result.x, result.layout), result
