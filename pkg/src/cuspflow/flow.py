"""Flow-space contraction machinery on sampled geodesics: thick-thin
segmentation, boundary-flag estimates, the E1+E2+E3 splitting, the
three-piece norm field on thin excursions, and the kappa contraction ratio.

Time is discrete (graph vertices). A vertex is thin iff its horoball depth
is >= 2; excursions are maximal thin runs. On a thin excursion of (closed)
length T entered at a thick anchor Q_in and exited at Q_out, the norm is

    first  third:  Q_t(Y,Y) = sum_j exp(+alpha (j-2) t)     Q_in (pi_j Y, pi_j Y)
    last   third:  Q_t(Y,Y) = sum_j exp(+alpha (2-j) (T-t)) Q_out(pi_j Y, pi_j Y)
    middle third:  geodesic interpolation f(Q_{T/3}, Q_{2T/3}) (3t/T - 1)

so the scale factors act on squared norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import exact, linalg
from .cusped import CuspedGraph, GeodesicPath
from .envelopes import fit_upper_envelope
from .groups import MatrixRep


class FlagEstimateError(RuntimeError):
    pass


class TransversalityError(ValueError):
    def __init__(self, sigma_min, floor, pair):
        self.sigma_min = sigma_min
        self.pair = pair
        super().__init__(
            f"splitting transversality {sigma_min:.3e} below floor {floor:.3e} ({pair})")


# ---------------------------------------------------------------------------
# Thick-thin segmentation
# ---------------------------------------------------------------------------


@dataclass
class Excursion:
    start: int               # first thin time
    stop: int                # last thin time (inclusive)
    coset: int
    entry: int | None        # thick time just before, None if truncated
    exit: int | None         # thick time just after, None if truncated

    @property
    def truncated(self) -> bool:
        return self.entry is None or self.exit is None

    @property
    def span(self):
        """(t0, T): excursion-local clock origin and closed length."""
        if self.entry is not None and self.exit is not None:
            return self.entry, self.exit - self.entry
        if self.entry is not None:
            return self.entry, None
        return self.stop + 1, None  # descent-only, clock measured from exit side


@dataclass
class ThickThinSegmentation:
    labels: list             # "thick" or ("thin", coset id) per path time
    excursions: list

    def is_thick(self, t: int) -> bool:
        return self.labels[t] == "thick"


def segment_thick_thin(graph: CuspedGraph, path: GeodesicPath) -> ThickThinSegmentation:
    labels = []
    for vid in path.vids:
        if graph.vertex_level(vid) >= 2:
            labels.append(("thin", graph.vertex_coset(vid)))
        else:
            labels.append("thick")
    excursions = []
    t = 0
    n = len(labels)
    while t < n:
        if labels[t] == "thick":
            t += 1
            continue
        start = t
        coset = labels[t][1]
        while t + 1 < n and labels[t + 1] != "thick":
            t += 1
        stop = t
        excursions.append(Excursion(
            start=start, stop=stop, coset=coset,
            entry=start - 1 if start > 0 else None,
            exit=stop + 1 if stop + 1 < n else None,
        ))
        t += 1
    return ThickThinSegmentation(labels=labels, excursions=excursions)


# ---------------------------------------------------------------------------
# Boundary flags and the splitting
# ---------------------------------------------------------------------------


@dataclass
class FlagEstimate:
    subspace: linalg.Subspace
    final_increment: float
    increments: list
    converged: bool


def estimate_boundary_flag(graph: CuspedGraph, path: GeodesicPath, rep: MatrixRep,
                           direction: str, k: int, cauchy_tol: float = 1e-3,
                           window: int = 8) -> FlagEstimate:
    """Limit estimate of U_k along the path's group elements toward one end.

    The Cauchy tail (last `window` Grassmannian increments) must fall below
    cauchy_tol, otherwise the estimate abstains.
    """
    vids = path.vids if direction == "+" else tuple(reversed(path.vids))
    tail = vids[-(window + 1):]
    subs = []
    for vid in tail:
        g = graph.elements[graph.vertex_element(vid)]
        m = exact.to_float(rep.evaluate(g.word))
        try:
            subs.append(linalg.u_subspace(m, k))
        except linalg.IllDefinedSubspaceError as err:
            raise FlagEstimateError(f"gap collapsed on the {direction} tail: {err}") from err
    incs = [linalg.grassmannian_distance(a, b) for a, b in zip(subs, subs[1:])]
    converged = bool(max(incs) <= cauchy_tol) if incs else False
    return FlagEstimate(subspace=subs[-1], final_increment=incs[-1] if incs else float("nan"),
                        increments=[float(x) for x in incs], converged=converged)


@dataclass
class SplittingFrame:
    """E1 = xi^k(sigma+), E2 = xi^(d-k)(sigma+) ^ xi^(d-k)(sigma-),
    E3 = xi^k(sigma-), with the induced projections."""

    e1: linalg.Subspace
    e2: linalg.Subspace
    e3: linalg.Subspace
    projections: tuple
    basis: np.ndarray

    @property
    def dims(self):
        return (self.e1.dim, self.e2.dim, self.e3.dim)


def build_splitting_from_subspaces(e1: linalg.Subspace, e2: linalg.Subspace,
                                   e3: linalg.Subspace, floor: float = 1e-6) -> SplittingFrame:
    d = e1.ambient
    blocks = [e1.basis, e2.basis, e3.basis]
    b = np.hstack(blocks)
    if b.shape[1] != d:
        raise ValueError(f"splitting dimensions {[x.shape[1] for x in blocks]} do not fill {d}")
    smin = float(np.linalg.svd(b, compute_uv=False)[-1])
    if smin < floor:
        raise TransversalityError(smin, floor, "E1|E2|E3")
    binv = np.linalg.inv(b)
    projections = []
    offset = 0
    for blk in blocks:
        width = blk.shape[1]
        projections.append(blk @ binv[offset:offset + width, :])
        offset += width
    return SplittingFrame(e1=e1, e2=e2, e3=e3, projections=tuple(projections), basis=b)


def build_splitting(graph: CuspedGraph, path: GeodesicPath, rep: MatrixRep, k: int,
                    cauchy_tol: float = 1e-3, floor: float = 1e-6,
                    require_converged: bool = True) -> SplittingFrame:
    d = rep.dim
    flags = {}
    for direction in "+-":
        for dim in (k, d - k):
            est = estimate_boundary_flag(graph, path, rep, direction, dim,
                                         cauchy_tol=cauchy_tol)
            if require_converged and not est.converged:
                raise FlagEstimateError(
                    f"boundary flag ({direction}, {dim}) not Cauchy: "
                    f"increments {est.increments}")
            flags[(direction, dim)] = est.subspace
    e1 = flags[("+", k)]
    e3 = flags[("-", k)]
    if d - 2 * k > 0:
        e2 = linalg.intersect_subspaces(flags[("+", d - k)], flags[("-", d - k)])
        if e2.dim != d - 2 * k:
            raise TransversalityError(0.0, floor,
                                      f"xi^(d-k) intersection has dim {e2.dim} != {d - 2 * k}")
    else:
        e2 = linalg.Subspace(basis=np.zeros((d, 0)), pluecker=np.array([1.0]))
    return build_splitting_from_subspaces(e1, e2, e3, floor=floor)


# ---------------------------------------------------------------------------
# Norm field
# ---------------------------------------------------------------------------


def frame_anchor_gram(frame: SplittingFrame) -> np.ndarray:
    """The inner product making the orthonormalized frame blocks orthonormal."""
    b = np.hstack([linalg.orthonormalize(blk.basis) if blk.dim else blk.basis
                   for blk in (frame.e1, frame.e2, frame.e3)])
    binv = np.linalg.inv(b)
    g = binv.T @ binv
    return (g + g.T) / 2


def equivariant_anchor_gram(frame: SplittingFrame, rep_matrix: np.ndarray) -> np.ndarray:
    """Anchor at a thick vertex g: transport the canonical anchor of the
    rho(g)^-1-translated frame back through rho(g)."""
    minv = np.linalg.inv(rep_matrix)
    translated = [linalg.subspace_from_columns(minv @ blk.basis) if blk.dim else blk
                  for blk in (frame.e1, frame.e2, frame.e3)]
    tframe = build_splitting_from_subspaces(*translated, floor=1e-12)
    g0 = frame_anchor_gram(tframe)
    g = minv.T @ g0 @ minv
    return (g + g.T) / 2


@dataclass
class NormField:
    """Gram matrix per integer path time; three-piece recipe on excursions."""

    path: GeodesicPath
    frame: SplittingFrame
    alpha: float
    segmentation: ThickThinSegmentation
    grams: list = field(default_factory=list)
    truncated_excursions: int = 0

    def gram(self, t: int) -> np.ndarray:
        return self.grams[t]

    def inner_product(self, t: int) -> linalg.InnerProduct:
        return linalg.InnerProduct(gram=self.grams[t])


def _scaled_gram(base: np.ndarray, projections, alpha: float, factors) -> np.ndarray:
    g = np.zeros_like(base)
    for pj, f in zip(projections, factors):
        if pj.shape[0]:
            g += f * (pj.T @ base @ pj)
    return (g + g.T) / 2


def excursion_gram(frame: SplittingFrame, alpha: float, t: float, T: float | None,
                   gram_in: np.ndarray | None, gram_out: np.ndarray | None) -> np.ndarray:
    """Recipe value at excursion-local time t in [0, T]; T None means the
    matching end is truncated and that piece extends indefinitely."""
    pj = frame.projections
    if T is None:
        if gram_in is not None:
            factors = [np.exp(alpha * (j - 2) * t) for j in (1, 2, 3)]
            return _scaled_gram(gram_in, pj, alpha, factors)
        raise ValueError("excursion with no usable anchor")
    if t <= T / 3 and gram_in is not None:
        factors = [np.exp(alpha * (j - 2) * t) for j in (1, 2, 3)]
        return _scaled_gram(gram_in, pj, alpha, factors)
    if t >= 2 * T / 3 and gram_out is not None:
        factors = [np.exp(alpha * (2 - j) * (T - t)) for j in (1, 2, 3)]
        return _scaled_gram(gram_out, pj, alpha, factors)
    if gram_in is None or gram_out is None:
        # one-sided excursion: extend the available piece across the interval
        if gram_out is None:
            factors = [np.exp(alpha * (j - 2) * t) for j in (1, 2, 3)]
            return _scaled_gram(gram_in, pj, alpha, factors)
        factors = [np.exp(alpha * (2 - j) * (T - t)) for j in (1, 2, 3)]
        return _scaled_gram(gram_out, pj, alpha, factors)
    q0 = linalg.InnerProduct(gram=excursion_gram(frame, alpha, T / 3, T, gram_in, gram_out))
    q1 = linalg.InnerProduct(gram=excursion_gram(frame, alpha, 2 * T / 3, T, gram_in, gram_out))
    return interpolated_gram(q0, q1, 3.0 * t / T - 1.0)


def interpolated_gram(q0: linalg.InnerProduct, q1: linalg.InnerProduct, s: float) -> np.ndarray:
    return linalg.interpolate_inner_products(q0, q1, s).gram


def build_norm_field(graph: CuspedGraph, path: GeodesicPath, frame: SplittingFrame,
                     rep: MatrixRep, alpha: float) -> NormField:
    """Anchors on thick vertices, three-piece recipe inside thin excursions."""
    seg = segment_thick_thin(graph, path)
    n = len(path.vids)
    grams: list = [None] * n
    for t in range(n):
        if seg.is_thick(t):
            g = graph.elements[graph.vertex_element(path.vids[t])]
            m = exact.to_float(rep.evaluate(g.word))
            grams[t] = equivariant_anchor_gram(frame, m)
    truncated = 0
    for exc in seg.excursions:
        if exc.truncated:
            truncated += 1
        gram_in = grams[exc.entry] if exc.entry is not None else None
        gram_out = grams[exc.exit] if exc.exit is not None else None
        if gram_in is None and gram_out is None:
            raise ValueError("excursion with no thick anchor on either side")
        if exc.entry is not None and exc.exit is not None:
            t0, T = exc.entry, exc.exit - exc.entry
        elif exc.entry is not None:
            t0, T = exc.entry, None
        else:
            t0, T = exc.stop + 1, None
        for t in range(exc.start, exc.stop + 1):
            if T is None and exc.entry is None:
                # descent-only clock: local time measured backward from exit
                tau = t0 - t
                factors = [np.exp(alpha * (2 - j) * tau) for j in (1, 2, 3)]
                grams[t] = _scaled_gram(gram_out, frame.projections, alpha, factors)
            else:
                grams[t] = excursion_gram(frame, alpha, t - t0, T, gram_in, gram_out)
    return NormField(path=path, frame=frame, alpha=alpha, segmentation=seg,
                     grams=grams, truncated_excursions=truncated)


# ---------------------------------------------------------------------------
# kappa and the contraction certificate
# ---------------------------------------------------------------------------


def _pencil_extremes(basis: np.ndarray, g_from: np.ndarray, g_to: np.ndarray):
    import scipy.linalg
    a = basis.T @ g_to @ basis
    b = basis.T @ g_from @ basis
    w = scipy.linalg.eigh((a + a.T) / 2, (b + b.T) / 2, eigvals_only=True)
    return float(w[0]), float(w[-1])


def kappa(nf: NormField, s: int, t: int) -> float:
    """Max growth over unit E1 vectors divided by min growth over unit
    E2+E3 vectors between path times s and s+t. kappa(s, 0) = 1 exactly."""
    if t == 0:
        return 1.0
    g_from = nf.gram(s)
    g_to = nf.gram(s + t)
    frame = nf.frame
    _, top = _pencil_extremes(frame.e1.basis, g_from, g_to)
    e23 = np.hstack([frame.e2.basis, frame.e3.basis])
    bottom, _ = _pencil_extremes(e23, g_from, g_to)
    return float(np.sqrt(top) / np.sqrt(bottom))


@dataclass
class PathFlowResult:
    path: GeodesicPath
    norm_field: NormField
    kappa_table: list        # kappa(0, t) for t = 0..t_max


def run_path_pipeline(graph: CuspedGraph, path: GeodesicPath, rep: MatrixRep, k: int,
                      alpha: float, t_max: int, cauchy_tol: float = 1e-3,
                      floor: float = 1e-6) -> PathFlowResult:
    frame = build_splitting(graph, path, rep, k, cauchy_tol=cauchy_tol, floor=floor)
    nf = build_norm_field(graph, path, frame, rep, alpha)
    tmax = min(t_max, len(path.vids) - 1)
    table = [kappa(nf, 0, t) for t in range(tmax + 1)]
    return PathFlowResult(path=path, norm_field=nf, kappa_table=table)


def contraction_certificate(results, slack: float = 1e-8) -> dict:
    """Fit kappa(0,t) <= C exp(-c t) by the upper LP envelope of (t, log kappa)
    and report the time beyond which every sampled kappa is <= 1/2."""
    points_t, points_log = [], []
    for res in results:
        for t, val in enumerate(res.kappa_table):
            points_t.append(t)
            points_log.append(np.log(val))
    if not points_t:
        return {"status": "failure", "reason": "no kappa data"}
    fit = fit_upper_envelope(points_t, points_log)
    c = -fit.alpha
    big_c = float(np.exp(fit.beta))
    worst = None
    threshold_time = None
    tmax = max(points_t)
    for T in range(tmax + 1):
        if all(val <= 0.5 for res in results
               for t, val in enumerate(res.kappa_table) if t >= T):
            threshold_time = T
            break
    if c <= 0:
        for res in results:
            for t, val in enumerate(res.kappa_table):
                if t > 0 and (worst is None or np.log(val) / t > worst[2]):
                    worst = (res.path.vids[:2], t, np.log(val) / t)
        return {"status": "failure", "reason": "no positive contraction rate on the sample",
                "c": c, "C": big_c, "worst": worst, "points": len(points_t)}
    return {"status": "ok", "c": float(c), "C": big_c,
            "threshold_time_half": threshold_time, "points": len(points_t),
            "fit": fit}


def run_flow_battery(graph: CuspedGraph, rep: MatrixRep, k: int, alpha: float,
                     n_paths: int = 100, min_length: int = 12, t_max: int = 40,
                     seed: int = 0, cauchy_tol: float = 1e-3,
                     floor: float = 1e-6) -> dict:
    """The full per-path pipeline plus the contraction certificate.

    Per-path failures (flag abstention, transversality below floor) are
    recorded and propagate to an overall failure when nothing survives.
    """
    paths, flagged = graph.sample_geodesics(n_paths, min_length, seed=seed,
                                            endpoints="cayley")
    results, failures = [], []
    for path in paths:
        try:
            results.append(run_path_pipeline(graph, path, rep, k, alpha, t_max,
                                             cauchy_tol=cauchy_tol, floor=floor))
        except (FlagEstimateError, TransversalityError, ValueError) as err:
            failures.append({"path_head": list(path.vids[:3]), "error": str(err)})
    report = {
        "paths_requested": n_paths, "paths_sampled": len(paths),
        "paths_succeeded": len(results), "paths_failed": len(failures),
        "failures": failures[:10], "sampling_flagged": flagged,
        "alpha": alpha, "k": k, "t_max": t_max,
        "caveat": "kappa values cover finitely many sampled geodesics; "
                  "sampling density is a parameter, not a uniform certificate",
    }
    if not results:
        report["status"] = "failure"
        report["reason"] = "all sampled paths failed upstream (flags/transversality)"
        return report
    cert = contraction_certificate(results)
    report.update(cert)
    report["kappa_at_zero_all_one"] = all(res.kappa_table[0] == 1.0 for res in results)
    report["results"] = results
    return report
