"""Load panel ingestion and synthetic panel generation.

Panels hold real-power meter readings, one column per node, at a fixed
sampling interval. The synthetic generator runs a planted vector
autoregression so that causal ground truth is known exactly, and models
DER placement as attenuation of every coupling incident to the placed
nodes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateNodeId,
    MissingValue,
    RaggedRows,
    TooShort,
    UnknownNode,
    UnparseableNumber,
    UnstableSpec,
)

DEFAULT_INTERVAL_S = 60.0
STATIONARITY_MIN_SAMPLES = 64
MEAN_SHIFT_SE_FACTOR = 3.0
VARIANCE_RATIO_BOUND = 4.0
WARMUP_FACTOR = 10


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Aligned multivariate load series, rows = time steps, columns = nodes."""

    node_ids: tuple[str, ...]
    samples: np.ndarray
    interval_s: float = DEFAULT_INTERVAL_S

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            raise ValueError("samples must be a 2-D array (steps x nodes)")
        if samples.shape[1] != len(self.node_ids):
            raise ValueError(
                f"{samples.shape[1]} columns but {len(self.node_ids)} node ids"
            )
        if len(set(self.node_ids)) != len(self.node_ids):
            raise DuplicateNodeId("panel node ids are not unique")
        if not np.all(np.isfinite(samples)):
            raise MissingValue(*_first_nonfinite(samples, self.node_ids))
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "node_ids", tuple(self.node_ids))

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.samples.shape[1]

    def index(self, node: str) -> int:
        try:
            return self.node_ids.index(node)
        except ValueError:
            raise UnknownNode(f"node {node!r} not in panel") from None

    def column(self, node: str) -> np.ndarray:
        return self.samples[:, self.index(node)]

    def select(self, nodes: Sequence[str]) -> "TimeSeriesPanel":
        """Sub-panel with the given nodes, in the given order."""
        idx = [self.index(n) for n in nodes]
        return TimeSeriesPanel(tuple(nodes), self.samples[:, idx], self.interval_s)


def _first_nonfinite(samples: np.ndarray, node_ids: Sequence[str]) -> tuple[int, str]:
    rows, cols = np.nonzero(~np.isfinite(samples))
    return int(rows[0]), node_ids[int(cols[0])]


@dataclass(frozen=True)
class SynthSpec:
    """Planted-VAR generator specification.

    ``coupling_edges`` are (source, target, coefficient, lag) tuples; the
    target node receives ``coefficient * source(t - lag)``. Nodes listed in
    ``der_nodes`` have every incident coupling multiplied by ``der_gamma``.
    """

    n_nodes: int
    n_steps: int
    coupling_edges: tuple[tuple[str, str, float, int], ...] = ()
    noise_sigma: float | tuple[float, ...] = 1.0
    base_ar: float | tuple[float, ...] = 0.0
    der_nodes: frozenset[str] = frozenset()
    der_gamma: float = 1.0
    seed: int = 0
    node_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(
            self,
            "coupling_edges",
            tuple((str(s), str(t), float(c), int(l)) for s, t, c, l in self.coupling_edges),
        )
        object.__setattr__(self, "der_nodes", frozenset(self.der_nodes))
        if self.node_ids is not None:
            object.__setattr__(self, "node_ids", tuple(self.node_ids))
        self.validate()

    def validate(self) -> None:
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        if not 0.0 <= self.der_gamma <= 1.0:
            raise ValueError("der_gamma must lie in [0, 1]")
        ids = self.resolved_node_ids()
        if len(ids) != self.n_nodes:
            raise ValueError("node_ids length must equal n_nodes")
        if len(set(ids)) != len(ids):
            raise DuplicateNodeId("spec node ids are not unique")
        known = set(ids)
        for src, tgt, coeff, lag in self.coupling_edges:
            if src not in known:
                raise UnknownNode(f"coupling source {src!r} not a spec node")
            if tgt not in known:
                raise UnknownNode(f"coupling target {tgt!r} not a spec node")
            if lag < 1:
                raise ValueError(f"coupling lag must be >= 1, got {lag}")
            if not math.isfinite(coeff):
                raise ValueError("coupling coefficient must be finite")
        for node in self.der_nodes:
            if node not in known:
                raise UnknownNode(f"DER node {node!r} not a spec node")
        for sigma in self.sigmas():
            if sigma < 0:
                raise ValueError("noise_sigma must be >= 0")

    def resolved_node_ids(self) -> tuple[str, ...]:
        if self.node_ids is not None:
            return self.node_ids
        width = len(str(self.n_nodes))
        return tuple(f"Meter-{i + 1:0{width}d}" for i in range(self.n_nodes))

    def sigmas(self) -> np.ndarray:
        return _per_node(self.noise_sigma, self.n_nodes, "noise_sigma")

    def ar_coeffs(self) -> np.ndarray:
        return _per_node(self.base_ar, self.n_nodes, "base_ar")

    @property
    def max_lag(self) -> int:
        lags = [lag for *_, lag in self.coupling_edges]
        return max(lags, default=1)

    def coefficient_tensor(self) -> np.ndarray:
        """Effective lag coefficients, shape (max_lag, n, n), DER attenuation applied."""
        ids = self.resolved_node_ids()
        pos = {node: i for i, node in enumerate(ids)}
        phi = np.zeros((self.max_lag, self.n_nodes, self.n_nodes))
        phi[0][np.diag_indices(self.n_nodes)] = self.ar_coeffs()
        for src, tgt, coeff, lag in self.coupling_edges:
            if src in self.der_nodes or tgt in self.der_nodes:
                coeff = coeff * self.der_gamma
            phi[lag - 1, pos[tgt], pos[src]] += coeff
        return phi

    def spectral_radius(self) -> float:
        """Spectral radius of the companion matrix of the effective process."""
        phi = self.coefficient_tensor()
        lag, n, _ = phi.shape
        companion = np.zeros((n * lag, n * lag))
        companion[:n, :] = np.concatenate(list(phi), axis=1)
        if lag > 1:
            companion[n:, : n * (lag - 1)] = np.eye(n * (lag - 1))
        return float(np.max(np.abs(np.linalg.eigvals(companion))))

    def with_der(self, placement: Iterable[str], der_gamma: float | None = None) -> "SynthSpec":
        gamma = self.der_gamma if der_gamma is None else der_gamma
        return replace(self, der_nodes=frozenset(placement), der_gamma=gamma)

    def to_json(self) -> str:
        payload = {
            "n_nodes": self.n_nodes,
            "n_steps": self.n_steps,
            "coupling_edges": [list(e) for e in self.coupling_edges],
            "noise_sigma": _scalar_or_list(self.noise_sigma),
            "base_ar": _scalar_or_list(self.base_ar),
            "der_nodes": sorted(self.der_nodes),
            "der_gamma": self.der_gamma,
            "seed": self.seed,
            "node_ids": list(self.node_ids) if self.node_ids is not None else None,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        raw = json.loads(text)
        return cls(
            n_nodes=raw["n_nodes"],
            n_steps=raw["n_steps"],
            coupling_edges=tuple(tuple(e) for e in raw.get("coupling_edges", [])),
            noise_sigma=_from_scalar_or_list(raw.get("noise_sigma", 1.0)),
            base_ar=_from_scalar_or_list(raw.get("base_ar", 0.0)),
            der_nodes=frozenset(raw.get("der_nodes", [])),
            der_gamma=raw.get("der_gamma", 1.0),
            seed=raw.get("seed", 0),
            node_ids=tuple(raw["node_ids"]) if raw.get("node_ids") else None,
        )


def _per_node(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must be a scalar or a length-{n} sequence")
    return arr


def _scalar_or_list(value):
    if np.ndim(value) == 0:
        return float(value)
    return [float(v) for v in value]


def _from_scalar_or_list(value):
    if isinstance(value, list):
        return tuple(value)
    return value


def synthesize(spec: SynthSpec) -> TimeSeriesPanel:
    """Generate a panel from a planted VAR process.

    Deterministic for a given spec: the innovation draw depends only on the
    seed and the panel dimensions, so two specs differing only in couplings
    (e.g. a DER what-if) share identical noise.
    """
    radius = spec.spectral_radius()
    if radius >= 1.0:
        raise UnstableSpec(f"companion spectral radius {radius:.4f} >= 1")
    phi = spec.coefficient_tensor()
    max_lag = spec.max_lag
    warmup = WARMUP_FACTOR * max_lag
    total = warmup + spec.n_steps
    rng = np.random.default_rng(spec.seed)
    eps = rng.standard_normal((total, spec.n_nodes)) * spec.sigmas()
    x = np.zeros((total + max_lag, spec.n_nodes))
    for t in range(total):
        row = eps[t]
        for l in range(max_lag):
            row = row + phi[l] @ x[t + max_lag - 1 - l]
        x[t + max_lag] = row
    samples = x[max_lag + warmup :]
    return TimeSeriesPanel(spec.resolved_node_ids(), samples)


def load_panel(path: str | Path) -> TimeSeriesPanel:
    """Read a panel from CSV: header ``timestamp,<node>,...``, one row per step.

    The first column may hold ISO-8601 timestamps (interval inferred from the
    first two rows) or integer step indices (interval defaults to 60 s).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RaggedRows(f"{path}: empty file") from None
        if len(header) < 2:
            raise RaggedRows(f"{path}: header must name a timestamp and at least one node")
        node_ids = [h.strip() for h in header[1:]]
        if len(set(node_ids)) != len(node_ids):
            dupes = sorted({n for n in node_ids if node_ids.count(n) > 1})
            raise DuplicateNodeId(f"{path}: duplicate node column(s) {dupes}")
        rows: list[list[float]] = []
        stamps: list[str] = []
        for lineno, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != len(header):
                raise RaggedRows(f"{path}: row {lineno} has {len(record)} fields, expected {len(header)}")
            stamps.append(record[0].strip())
            parsed = []
            for col, cell in zip(node_ids, record[1:]):
                cell = cell.strip()
                if not cell:
                    raise MissingValue(lineno, col)
                try:
                    value = float(cell)
                except ValueError:
                    raise UnparseableNumber(lineno, col, cell) from None
                if not math.isfinite(value):
                    raise UnparseableNumber(lineno, col, cell)
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise TooShort(f"{path}: no data rows")
    interval = _infer_interval(stamps)
    return TimeSeriesPanel(tuple(node_ids), np.array(rows, dtype=float), interval)


def _infer_interval(stamps: list[str]) -> float:
    if len(stamps) < 2:
        return DEFAULT_INTERVAL_S
    try:
        t0 = datetime.fromisoformat(stamps[0])
        t1 = datetime.fromisoformat(stamps[1])
    except ValueError:
        return DEFAULT_INTERVAL_S
    delta = (t1 - t0).total_seconds()
    return delta if delta > 0 else DEFAULT_INTERVAL_S


@dataclass(frozen=True)
class StationarityReport:
    """Split-half diagnostics for one node."""

    stationary: bool
    mean_first: float
    mean_second: float
    mean_shift_se: float
    var_first: float
    var_second: float
    var_ratio: float

    @property
    def detail(self) -> str:
        return (
            f"mean shift {abs(self.mean_first - self.mean_second):.4g} "
            f"(limit {MEAN_SHIFT_SE_FACTOR}*SE = {MEAN_SHIFT_SE_FACTOR * self.mean_shift_se:.4g}), "
            f"variance ratio {self.var_ratio:.4g} "
            f"(limits [{1 / VARIANCE_RATIO_BOUND}, {VARIANCE_RATIO_BOUND}])"
        )


def stationarity_check(panel: TimeSeriesPanel) -> dict[str, StationarityReport]:
    """Split-half mean and variance screen for covariance stationarity.

    Each series is split in two; a node is flagged non-stationary when the
    half-means differ by more than 3 pooled standard errors or the variance
    ratio falls outside [1/4, 4]. Constant halves count as ratio 1.
    """
    if panel.n_steps < STATIONARITY_MIN_SAMPLES:
        raise TooShort(
            f"stationarity check needs >= {STATIONARITY_MIN_SAMPLES} samples, got {panel.n_steps}"
        )
    out = {}
    half = panel.n_steps // 2
    for node in panel.node_ids:
        x = panel.column(node)
        a, b = x[:half], x[half:]
        va = float(np.var(a))
        vb = float(np.var(b))
        se = math.sqrt(va / len(a) + vb / len(b))
        mean_shift = abs(float(np.mean(a)) - float(np.mean(b)))
        mean_ok = mean_shift <= MEAN_SHIFT_SE_FACTOR * se if se > 0 else mean_shift == 0
        if va == 0 and vb == 0:
            ratio = 1.0
        elif vb == 0 or va == 0:
            ratio = math.inf
        else:
            ratio = va / vb
        var_ok = 1 / VARIANCE_RATIO_BOUND <= ratio <= VARIANCE_RATIO_BOUND
        out[node] = StationarityReport(
            stationary=bool(mean_ok and var_ok),
            mean_first=float(np.mean(a)),
            mean_second=float(np.mean(b)),
            mean_shift_se=se,
            var_first=va,
            var_second=vb,
            var_ratio=ratio,
        )
    return out


def difference(panel: TimeSeriesPanel, order: int = 1) -> TimeSeriesPanel:
    """Order-th forward difference of every column; drops ``order`` steps."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if panel.n_steps <= order:
        raise TooShort(f"cannot difference {panel.n_steps} steps at order {order}")
    return TimeSeriesPanel(
        panel.node_ids, np.diff(panel.samples, n=order, axis=0), panel.interval_s
    )


# --------------------------------------------------------------------------
# Built-in planted specs
# --------------------------------------------------------------------------
#
# The default region couples nodes in three tiers:
#   * a positive "backbone" of weak mutual couplings among the non-driver
#     nodes, giving every pair of them a reliably positive correlation;
#   * four driver nodes, each pushing one of its targets up and the others
#     down, so the mixed-sign common drive holds selected target pairs
#     *below* zero correlation while the drivers dominate causal out-strength;
#   * no couplings among drivers.
#
# Placing DERs at the drivers (attenuation) releases the suppressed pairs
# back to the backbone's positive correlation, which densifies the
# positive-threshold correlation graph and raises its percolation threshold.
# Random placements usually land on backbone nodes and cut their positive
# couplings instead, so the contrast between the two placements is built in.

REGION_DRIVER_COUNT = 4
REGION_TARGETS_PER_DRIVER = 3


def default_region_spec(
    seed: int = 0,
    n_steps: int = 10_000,
    der_nodes: Iterable[str] = (),
    der_gamma: float = 1.0,
) -> SynthSpec:
    """16-node single-region spec: 4 dominant drivers over a 12-node backbone."""
    edges, _, _ = _region_edges(prefix="Meter", offset=0)
    return SynthSpec(
        n_nodes=16,
        n_steps=n_steps,
        coupling_edges=tuple(edges),
        noise_sigma=1.0,
        base_ar=0.2,
        der_nodes=frozenset(der_nodes),
        der_gamma=der_gamma,
        seed=seed,
    )


def _region_edges(prefix: str, offset: int, total: int | None = None):
    """Coupling edges for one 16-node region starting at node ``offset + 1``."""
    total = total if total is not None else offset + 16
    width = len(str(total))
    name = lambda i: f"{prefix}-{i:0{width}d}"
    drivers = [name(offset + i + 1) for i in range(REGION_DRIVER_COUNT)]
    targets = [name(offset + i + 1) for i in range(REGION_DRIVER_COUNT, 16)]
    edges: list[tuple[str, str, float, int]] = []
    # Backbone: weak symmetric positive coupling among all target pairs.
    for i, u in enumerate(targets):
        for v in targets[i + 1 :]:
            edges.append((u, v, 0.045, 1))
            edges.append((v, u, 0.045, 1))
    # Drivers: one positive leg, two negative legs, disjoint target triples.
    depths = (0.55, 0.65, 0.75, 0.85)
    for k, d in enumerate(drivers):
        t_plus = targets[3 * k]
        t_minus = targets[3 * k + 1 : 3 * k + 3]
        edges.append((d, t_plus, 0.50, 1))
        for t in t_minus:
            edges.append((d, t, -depths[k], 1))
    return edges, drivers, targets


def region_driver_ids(offset: int = 0, total: int = 16, prefix: str = "Meter") -> list[str]:
    width = len(str(total))
    return [f"{prefix}-{i:0{width}d}" for i in range(offset + 1, offset + 1 + REGION_DRIVER_COUNT)]


def demo_spec(seed: int = 0, n_steps: int = 4_000) -> SynthSpec:
    """36-node demo: two 16-node regions plus four bridge meters.

    Regions occupy meters 1-16 and 17-32; meters 33-36 ride the backbone of
    region II. A weak exchangeable anti-coupling between the regions keeps
    cross-region correlations negative so the two microgrid candidates are
    cleanly separable.
    """
    edges_a, _, targets_a = _region_edges(prefix="Meter", offset=0, total=36)
    edges_b, _, targets_b = _region_edges(prefix="Meter", offset=16, total=36)
    extras = [f"Meter-{i}" for i in range(33, 37)]
    edges = edges_a + edges_b
    for x in extras:
        for t in targets_b:
            edges.append((x, t, 0.040, 1))
            edges.append((t, x, 0.040, 1))
        for i, y in enumerate(extras):
            if y != x:
                edges.append((x, y, 0.040, 1))
    block_a = [f"Meter-{i:02d}" for i in range(1, 17)]
    block_b = [f"Meter-{i}" for i in range(17, 37)]
    for u in block_a:
        for v in block_b:
            edges.append((u, v, -0.004, 1))
            edges.append((v, u, -0.004, 1))
    return SynthSpec(
        n_nodes=36,
        n_steps=n_steps,
        coupling_edges=tuple(edges),
        noise_sigma=1.0,
        base_ar=0.2,
        seed=seed,
    )
