"""Graph growth by the three-event process with homophily rejection.

Edge ``(a, b)`` means ``b`` follows ``a``: the source gains an out-degree
(follower), the target an in-degree (followee). Node sampling is O(1) via the
edge/node mixture in :func:`dmpa._pykernel.pick`.

The hot loop lives in a compiled kernel when available and in
``dmpa._pykernel`` otherwise. Set ``DMPA_BACKEND=python`` to force the
fallback. Both backends read the same uniform stream, so results do not depend
on which one runs.
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _pykernel
from ._io import atomic_write_text, fmt_num
from .errors import GraphFormatError, InvalidInitialGraph, RejectionLimitExceeded
from .model import Color, ModelParams, ThetaPair, acceptance_table, validate_params

try:
    if os.environ.get("DMPA_BACKEND", "").lower() == "python":
        raise ImportError("pure-Python backend requested")
    from . import _ckernel
except ImportError:
    _ckernel = None

BACKEND = "cython" if _ckernel is not None else "python"
DEFAULT_MAX_REJECTIONS = 100_000
DEFAULT_SNAPSHOTS = 50

_K = _pykernel  # slot names are shared by both kernels


def available_backends():
    return ("cython", "python") if _ckernel is not None else ("python",)


# -- graph --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GrowthGraph:
    """Finished graph. Arrays are numpy; aggregates are cached at construction."""

    colors: np.ndarray
    in_degree: np.ndarray
    out_degree: np.ndarray
    sources: np.ndarray
    targets: np.ndarray
    d_in_red: int = field(default=None)
    d_out_red: int = field(default=None)
    n_red: int = field(default=None)

    def __post_init__(self):
        red = self.colors == 1
        if self.d_in_red is None:
            object.__setattr__(self, "d_in_red", int(self.in_degree[red].sum()))
        if self.d_out_red is None:
            object.__setattr__(self, "d_out_red", int(self.out_degree[red].sum()))
        if self.n_red is None:
            object.__setattr__(self, "n_red", int(red.sum()))

    @classmethod
    def from_edges(cls, colors, edges) -> "GrowthGraph":
        colors = np.asarray(colors, dtype=np.int8)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        n = len(colors)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise InvalidInitialGraph("edge endpoint outside node range")
        src, dst = e[:, 0].copy(), e[:, 1].copy()
        return cls(
            colors,
            np.bincount(dst, minlength=n).astype(np.int64),
            np.bincount(src, minlength=n).astype(np.int64),
            src,
            dst,
        )

    @property
    def n_nodes(self) -> int:
        return len(self.colors)

    @property
    def n_edges(self) -> int:
        return len(self.sources)

    @property
    def n_blue(self) -> int:
        return self.n_nodes - self.n_red

    def theta(self) -> ThetaPair:
        m = self.n_edges
        return ThetaPair(self.d_in_red / m, self.d_out_red / m)

    def color_swapped(self) -> "GrowthGraph":
        return GrowthGraph(
            (1 - self.colors).astype(np.int8), self.in_degree, self.out_degree,
            self.sources, self.targets,
        )

    def check_invariants(self) -> None:
        n, m = self.n_nodes, self.n_edges
        problems = []
        if not (len(self.in_degree) == len(self.out_degree) == n):
            problems.append("degree arrays do not match node count")
        if len(self.targets) != m:
            problems.append("source/target arrays differ in length")
        if m and (min(self.sources.min(), self.targets.min()) < 0
                  or max(self.sources.max(), self.targets.max()) >= n):
            problems.append("edge endpoint outside node range")
        if not problems:
            if not np.array_equal(np.bincount(self.targets, minlength=n), self.in_degree):
                problems.append("in-degrees disagree with edge list")
            if not np.array_equal(np.bincount(self.sources, minlength=n), self.out_degree):
                problems.append("out-degrees disagree with edge list")
            red = self.colors == 1
            if int(self.in_degree[red].sum()) != self.d_in_red:
                problems.append("red in-degree aggregate is stale")
            if int(self.out_degree[red].sum()) != self.d_out_red:
                problems.append("red out-degree aggregate is stale")
            if int(red.sum()) != self.n_red:
                problems.append("red node count is stale")
            if not np.isin(self.colors, (0, 1)).all():
                problems.append("colour outside {0, 1}")
        if problems:
            raise InvalidInitialGraph("; ".join(problems))


def default_initial_graph() -> GrowthGraph:
    """One red and one blue node following each other."""
    return GrowthGraph.from_edges([Color.RED, Color.BLUE], [(0, 1), (1, 0)])


# -- edge-list format ---------------------------------------------------------


def graph_to_text(graph: GrowthGraph) -> str:
    buf = io.StringIO()
    buf.write(f"# dmpa v1 nodes={graph.n_nodes} edges={graph.n_edges}\n")
    letters = np.array(["N {} B\n", "N {} R\n"])
    buf.write("".join(letters[c].format(i) for i, c in enumerate(graph.colors.tolist())))
    buf.write("".join(f"E {a} {b}\n" for a, b in zip(graph.sources.tolist(), graph.targets.tolist())))
    return buf.getvalue()


def export_graph(graph: GrowthGraph, sink) -> None:
    """Write the edge list to a path (atomically) or a text stream."""
    text = graph_to_text(graph)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        atomic_write_text(sink, text)


def graph_from_text(text: str) -> GrowthGraph:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# dmpa v1 "):
        raise GraphFormatError("missing '# dmpa v1' header")
    try:
        header = dict(kv.split("=", 1) for kv in lines[0][len("# dmpa v1 "):].split())
        n_decl, m_decl = int(header["nodes"]), int(header["edges"])
    except (KeyError, ValueError):
        raise GraphFormatError(f"bad header: {lines[0]!r}") from None
    colors, edges = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "N" and len(parts) == 3:
                if int(parts[1]) != len(colors):
                    raise GraphFormatError(f"line {lineno}: node ids must be dense and ordered")
                colors.append(Color.from_letter(parts[2]))
            elif parts[0] == "E" and len(parts) == 3:
                edges.append((int(parts[1]), int(parts[2])))
            else:
                raise GraphFormatError(f"line {lineno}: unrecognised record {line!r}")
        except ValueError as exc:
            raise GraphFormatError(f"line {lineno}: {exc}") from None
    if len(colors) != n_decl or len(edges) != m_decl:
        raise GraphFormatError(
            f"header declares {n_decl} nodes / {m_decl} edges, found {len(colors)} / {len(edges)}"
        )
    try:
        return GrowthGraph.from_edges(colors, edges)
    except InvalidInitialGraph as exc:
        raise GraphFormatError(str(exc)) from None


def import_graph(source) -> GrowthGraph:
    if hasattr(source, "read"):
        return graph_from_text(source.read())
    with open(source, encoding="utf-8") as fh:
        return graph_from_text(fh.read())


# -- simulation ---------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    seed: int = 0
    steps: int = 0
    initial_graph: GrowthGraph | None = None
    max_rejections: int = DEFAULT_MAX_REJECTIONS

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.max_rejections < 1:
            raise ValueError("max_rejections must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class EventRecord:
    event_kind: int
    new_node: int | None
    new_color: Color | None
    source: int
    target: int
    rejections: int
    resamples: int = 0


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    frac_red_nodes: list = field(default_factory=list)
    rejections_cum: list = field(default_factory=list)
    event_counts: list = field(default_factory=list)
    resamples_cum: list = field(default_factory=list)

    COLUMNS = ("t", "theta_in", "theta_out", "frac_red_nodes", "rejections_cum")

    def to_csv(self) -> str:
        rows = [",".join(self.COLUMNS)]
        for t, th, f, rej in zip(self.times, self.theta, self.frac_red_nodes, self.rejections_cum):
            rows.append(",".join(fmt_num(x) for x in (t, th.theta_in, th.theta_out, f, rej)))
        return "\n".join(rows) + "\n"

    def write_csv(self, path) -> None:
        atomic_write_text(path, self.to_csv())


def geometric_schedule(T: int, points: int = DEFAULT_SNAPSHOTS) -> list:
    """Up to ``points`` distinct integer times in ``[1, T]``, geometrically spaced, ending at T."""
    if T <= 0:
        return []
    ts = np.unique(np.round(np.geomspace(1, T, max(points, 1))).astype(np.int64))
    out = [int(t) for t in ts if 1 <= t <= T]
    if not out or out[-1] != T:
        out.append(int(T))
    return out


class _Storage:
    """Growable arrays in the representation the chosen kernel wants."""

    def __init__(self, graph: GrowthGraph, numpy_backed: bool):
        self.numpy = numpy_backed
        n, m = graph.n_nodes, graph.n_edges
        if numpy_backed:
            self.color = graph.colors.astype(np.int8).copy()
            self.din = graph.in_degree.astype(np.int64).copy()
            self.dout = graph.out_degree.astype(np.int64).copy()
            self.esrc = graph.sources.astype(np.int64).copy()
            self.edst = graph.targets.astype(np.int64).copy()
        else:
            self.color = graph.colors.tolist()
            self.din = graph.in_degree.tolist()
            self.dout = graph.out_degree.tolist()
            self.esrc = graph.sources.tolist()
            self.edst = graph.targets.tolist()
        self.n_cap, self.m_cap = n, m

    def reserve(self, n_needed: int, m_needed: int) -> None:
        if n_needed > self.n_cap:
            cap = max(n_needed, 2 * self.n_cap, 16)
            self.color = self._grow(self.color, cap)
            self.din = self._grow(self.din, cap)
            self.dout = self._grow(self.dout, cap)
            self.n_cap = cap
        if m_needed > self.m_cap:
            cap = max(m_needed, 2 * self.m_cap, 16)
            self.esrc = self._grow(self.esrc, cap)
            self.edst = self._grow(self.edst, cap)
            self.m_cap = cap

    def _grow(self, arr, cap):
        if self.numpy:
            out = np.zeros(cap, dtype=arr.dtype)
            out[: len(arr)] = arr
            return out
        return arr + [0] * (cap - len(arr))


class Simulation:
    """Single-owner mutable growth state."""

    MIN_CHUNK = 1 << 12
    MAX_CHUNK = 1 << 22

    def __init__(self, config: SimConfig, backend: str | None = None):
        validate_params(config.params)
        backend = backend or BACKEND
        if backend == "cython" and _ckernel is None:
            raise RuntimeError("compiled kernel not available")
        if backend not in ("cython", "python"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self._kernel = _ckernel if backend == "cython" else _pykernel
        self.config = config
        self.params = config.params

        g0 = config.initial_graph if config.initial_graph is not None else default_initial_graph()
        g0.check_invariants()
        if g0.n_nodes == 0:
            raise InvalidInitialGraph("initial graph has no nodes; every event samples an existing node")

        numpy_backed = backend == "cython"
        self._s = _Storage(g0, numpy_backed)
        counters = [0] * _K.N_COUNTERS
        counters[_K.NODES] = g0.n_nodes
        counters[_K.EDGES] = g0.n_edges
        counters[_K.RED] = g0.n_red
        counters[_K.DIN_RED] = g0.d_in_red
        counters[_K.DOUT_RED] = g0.d_out_red
        P = self.params
        kparams = [P.r, P.p, P.q, P.delta_in, P.delta_out]
        acc = acceptance_table(P)
        if numpy_backed:
            self._ctr = np.array(counters, dtype=np.int64)
            self._kparams = np.array(kparams, dtype=np.float64)
            self._acc = np.array(acc, dtype=np.float64)
            self._last = np.zeros(_K.N_LAST, dtype=np.int64)
        else:
            self._ctr = counters
            self._kparams = [float(x) for x in kparams]
            self._acc = [float(x) for x in acc]
            self._last = [0] * _K.N_LAST

        self._rng = np.random.Generator(np.random.PCG64(config.seed))
        self._chunk = self.MIN_CHUNK
        self._u = np.empty(0) if numpy_backed else []
        self._pos = 0
        self.t = 0
        self._debug = os.environ.get("DMPA_DEBUG", "") not in ("", "0")

    # uniforms -----------------------------------------------------------------

    def _refill(self) -> None:
        fresh = self._rng.random(self._chunk)
        if self._s.numpy:
            self._u = np.concatenate([self._u[self._pos:], fresh])
        else:
            self._u = self._u[self._pos:] + fresh.tolist()
        self._pos = 0
        self._chunk = min(self._chunk * 2, self.MAX_CHUNK)

    def _take(self, k: int):
        while len(self._u) - self._pos < k:
            self._refill()
        out = self._u[self._pos:self._pos + k]
        self._pos += k
        return np.asarray(out, dtype=np.float64)

    # counters -----------------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return int(self._ctr[_K.NODES])

    @property
    def n_edges(self) -> int:
        return int(self._ctr[_K.EDGES])

    @property
    def n_red(self) -> int:
        return int(self._ctr[_K.RED])

    @property
    def rejections(self) -> int:
        return int(self._ctr[_K.REJ])

    @property
    def resamples(self) -> int:
        return int(self._ctr[_K.RESAMPLE])

    @property
    def event_counts(self) -> tuple:
        return tuple(int(self._ctr[i]) for i in (_K.EV1, _K.EV2, _K.EV3))

    def theta(self) -> ThetaPair:
        m = self.n_edges
        if m == 0:
            return ThetaPair(math.nan, math.nan)
        return ThetaPair(int(self._ctr[_K.DIN_RED]) / m, int(self._ctr[_K.DOUT_RED]) / m)

    @property
    def graph(self) -> GrowthGraph:
        n, m, s = self.n_nodes, self.n_edges, self._s
        return GrowthGraph(
            np.array(s.color[:n], dtype=np.int8),
            np.array(s.din[:n], dtype=np.int64),
            np.array(s.dout[:n], dtype=np.int64),
            np.array(s.esrc[:m], dtype=np.int64),
            np.array(s.edst[:m], dtype=np.int64),
            int(self._ctr[_K.DIN_RED]),
            int(self._ctr[_K.DOUT_RED]),
            self.n_red,
        )

    # sampling -----------------------------------------------------------------

    def sample_by_in_degree(self) -> int:
        """Node drawn with probability ``(d_in + delta_in) / (d_t + n*delta_in)``."""
        return int(self.sample_in_batch(1)[0])

    def sample_by_out_degree(self) -> int:
        return int(self.sample_out_batch(1)[0])

    def sample_in_batch(self, k: int) -> np.ndarray:
        return self._batch(k, self._s.edst, self.params.delta_in)

    def sample_out_batch(self, k: int) -> np.ndarray:
        return self._batch(k, self._s.esrc, self.params.delta_out)

    def _batch(self, k, ends, delta):
        if self.n_nodes < 1:
            raise InvalidInitialGraph("cannot sample from an empty graph")
        u = self._take(k)
        out = np.empty(k, dtype=np.int64)
        if self.backend == "cython":
            self._kernel.sample_batch(u, ends, self.n_edges, self.n_nodes, float(delta), out)
        else:
            tmp = [0] * k
            _pykernel.sample_batch(u.tolist(), ends, self.n_edges, self.n_nodes, float(delta), tmp)
            out[:] = tmp
        return out

    # stepping -----------------------------------------------------------------

    def _advance(self, n_steps: int) -> None:
        if self._debug and n_steps > 1:
            for _ in range(n_steps):
                self._advance(1)
            return
        s = self._s
        s.reserve(self.n_nodes + n_steps, self.n_edges + n_steps)
        remaining = n_steps
        while remaining > 0:
            status, done, pos = self._kernel.run_steps(
                remaining, self._u, self._pos, s.color, s.din, s.dout, s.esrc, s.edst,
                self._ctr, self._kparams, self._acc, self.config.max_rejections, self._last,
            )
            self._pos = pos
            self.t += done
            remaining -= done
            if status == _K.NEED_MORE:
                self._refill()
            elif status == _K.DEGENERATE:
                event = int(self._last[_K.L_EVENT])
                detail = ("zero acceptance mass for every candidate"
                          if int(self._last[_K.L_ATTEMPTS]) == 0 else "acceptance loop exhausted")
                raise RejectionLimitExceeded(
                    event, self.config.max_rejections,
                    f"{detail}; {self.config.max_rejections} consecutive event draws failed",
                )
        if self._debug:
            self.graph.check_invariants()

    def step(self) -> EventRecord:
        """One successful event (failed draws are resampled inside the kernel)."""
        self._advance(1)
        L = self._last
        new = int(L[_K.L_NEW])
        return EventRecord(
            event_kind=int(L[_K.L_EVENT]),
            new_node=None if new < 0 else new,
            new_color=None if new < 0 else Color(int(self._s.color[new])),
            source=int(L[_K.L_SRC]),
            target=int(L[_K.L_DST]),
            rejections=int(L[_K.L_REJ]),
            resamples=int(L[_K.L_STEP_RESAMPLE]),
        )

    def run(self, T: int, schedule=None, trajectory: Trajectory | None = None):
        """Execute ``T`` steps, snapshotting at the absolute times in ``schedule``."""
        if T < 0:
            raise ValueError("T must be >= 0")
        t0 = self.t
        end = t0 + T
        if schedule is None:
            schedule = [t0 + k for k in geometric_schedule(T)]
        traj = trajectory if trajectory is not None else Trajectory()
        for ts in sorted(set(int(x) for x in schedule if t0 < x <= end)):
            self._advance(ts - self.t)
            self._snapshot(traj)
        if self.t < end:
            self._advance(end - self.t)
        return self.graph, traj

    def _snapshot(self, traj: Trajectory) -> None:
        if traj.times and self.t <= traj.times[-1]:
            return
        traj.times.append(self.t)
        traj.theta.append(self.theta())
        traj.frac_red_nodes.append(self.n_red / self.t if self.t > 0 else math.nan)
        traj.rejections_cum.append(self.rejections)
        traj.event_counts.append(self.event_counts)
        traj.resamples_cum.append(self.resamples)


def simulate(params: ModelParams, steps: int, seed: int = 0, *, initial_graph=None,
             max_rejections: int = DEFAULT_MAX_REJECTIONS, schedule=None, backend=None):
    """Convenience wrapper: build, run and return ``(graph, trajectory, simulation)``."""
    sim = Simulation(SimConfig(params, seed, steps, initial_graph, max_rejections), backend)
    graph, traj = sim.run(steps, schedule)
    return graph, traj, sim


__all__ = [
    "BACKEND", "available_backends", "GrowthGraph", "default_initial_graph",
    "graph_to_text", "graph_from_text", "export_graph", "import_graph",
    "SimConfig", "EventRecord", "Trajectory", "geometric_schedule", "Simulation", "simulate",
]
