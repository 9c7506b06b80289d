"""Representation-level test battery: weak unipotence, divergence trends, gap
profiles and envelope fits, limit-set sampling, dynamics probes, translation
lengths, Morse regularity, and weakly-unipotent growth laws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy

from . import exact, linalg
from .envelopes import FitResult, fit_lower_envelope, fit_upper_envelope
from .groups import Group, GroupElement, MatrixRep
from .cusped import CuspedGraph
from .words import free_reduce, invert_word

NUMERIC_UNIPOTENT_TOL = 1e-8
ALPHA_ZERO_TOL = 0.05
GROWTH_MARGIN = 0.25
STABLE_MARGIN = 0.05


# ---------------------------------------------------------------------------
# Weak unipotence
# ---------------------------------------------------------------------------


def _cyclotomic_certificate(poly_coeffs) -> dict:
    """Factor a monic integer polynomial and match factors to cyclotomics."""
    x = sympy.Symbol("x")
    poly = sum(int(c) * x ** (len(poly_coeffs) - 1 - i) for i, c in enumerate(poly_coeffs))
    factors = sympy.factor_list(sympy.Poly(poly, x))[1]
    matched = []
    for fac, mult in factors:
        fac = sympy.Poly(fac, x)
        deg = fac.degree()
        hit = None
        for n in range(1, 2 * deg * deg + 2):
            if sympy.totient(n) == deg and fac == sympy.Poly(sympy.cyclotomic_poly(n, x), x):
                hit = n
                break
        if hit is None:
            return {"cyclotomic": False, "factors": [(str(f.as_expr()), m) for f, m in factors]}
        matched.append((hit, mult))
    return {"cyclotomic": True, "cyclotomic_indices": matched}


def weakly_unipotent_check(matrices, tol: float = NUMERIC_UNIPOTENT_TOL) -> dict:
    """True iff every matrix has all eigenvalue moduli equal to 1.

    Numeric route always runs; for exact integer matrices a cyclotomic
    factorization of the characteristic polynomial certifies the answer
    exactly (Kronecker: an integer matrix has all |lambda| = 1 iff its
    characteristic polynomial is a product of cyclotomics).
    """
    certs = []
    verdict = True
    for m in matrices:
        if isinstance(m, tuple):
            fm = exact.to_float(m)
            exact_m = m
        else:
            fm = np.asarray(m, dtype=float)
            exact_m = None
        lam = np.abs(np.linalg.eigvals(fm))
        numeric = bool(np.max(np.abs(lam - 1.0)) <= tol)
        cert = {"numeric": numeric}
        if exact_m is not None and exact.is_integer_matrix(exact_m):
            cp = exact.char_poly(exact_m)
            cert["exact"] = _cyclotomic_certificate(cp)
            cert["agrees"] = cert["exact"]["cyclotomic"] == numeric
        else:
            cert["exact"] = None
        verdict = verdict and numeric
        certs.append(cert)
    return {"weakly_unipotent": verdict, "certificates": certs}


# ---------------------------------------------------------------------------
# Divergence monitoring
# ---------------------------------------------------------------------------


def power_schedule(n_max: int, per_octave: int = 4) -> list:
    ns = {1, n_max}
    i = 0
    while True:
        n = round(2 ** (i / per_octave))
        if n > n_max:
            break
        ns.add(int(n))
        i += 1
    return sorted(ns)


@dataclass
class TrendReport:
    ns: list
    gaps: list
    verdict: str
    n_range: tuple
    growth_last_octave: float
    thresholds_exceeded: list
    note: str = ""

    def as_dict(self):
        return {
            "ns": list(self.ns), "gaps": [float(g) for g in self.gaps],
            "verdict": self.verdict, "n_range": list(self.n_range),
            "growth_last_octave": float(self.growth_last_octave),
            "thresholds_exceeded": self.thresholds_exceeded, "note": self.note,
        }


def divergence_monitor(gap_at, ns, k: int) -> TrendReport:
    """Trend verdict for the gap sequence along an escaping schedule.

    gap_at: callable n -> mu-gap at k (may return None once a float route
    saturates; the verdict is then range-qualified to the reliable prefix).
    Verdicts are claims about the tested range only, never about limits.
    """
    gaps, used = [], []
    note = ""
    for n in ns:
        g = gap_at(n)
        if g is None:
            note = f"float route saturated at n={n}; range truncated"
            break
        used.append(n)
        gaps.append(float(g))
    if not used:
        return TrendReport([], [], "inconclusive", (0, 0), 0.0, [], "no data")
    env = np.maximum.accumulate(gaps)
    half_n = used[-1] / 2
    half_idx = max(i for i, n in enumerate(used) if n <= half_n) if used[-1] > 1 else 0
    growth = float(env[-1] - env[half_idx])
    thresholds = [t for t in (1.0, 2.0, 4.0, 8.0, 16.0) if env[-1] >= t]
    if growth >= GROWTH_MARGIN:
        verdict = "unbounded"
    elif growth <= STABLE_MARGIN:
        verdict = "bounded"
    else:
        verdict = "inconclusive"
    return TrendReport(used, gaps, verdict, (used[0], used[-1]), growth, thresholds, note)


def power_gap_fn(matrix, k: int):
    """gap(n) for powers of one exact matrix.

    Weakly unipotent matrices get exact binary powers (entries grow
    polynomially); other matrices use float scaled powers and surrender once
    the needed singular values fall below float precision.
    """
    m = exact.mat(matrix) if isinstance(matrix, (tuple, list)) else matrix
    unipotent = weakly_unipotent_check([m])["weakly_unipotent"]
    if unipotent:
        def gap_at(n):
            p = exact.mat_pow(m, n)
            return linalg.mu_gap(exact.to_float(p), k)
        return gap_at

    fm = exact.to_float(m)

    def gap_at(n):
        # the gap is scale-invariant, so renormalize freely instead of
        # tracking log scales; surrender once mu_{k+1} hits float noise
        body = np.eye(fm.shape[0])
        base, e = fm.copy(), n
        while e:
            if e & 1:
                body = body @ base
                body /= np.linalg.norm(body)
            base = base @ base
            base /= np.linalg.norm(base)
            e >>= 1
        mu = np.linalg.svd(body, compute_uv=False)
        if mu[k] < mu[0] * 1e-13:
            return None
        return float(np.log(mu[k - 1]) - np.log(mu[k]))

    return gap_at


# ---------------------------------------------------------------------------
# Gap profiles
# ---------------------------------------------------------------------------


@dataclass
class GapProfile:
    ids: list                 # word strings
    lengths: np.ndarray
    dx: np.ndarray
    spread: np.ndarray        # log mu_1/mu_d
    symdist: np.ndarray       # symmetric-space distance to the identity coset
    mu_gaps: np.ndarray       # shape (n, d-1)
    lambda_gaps: np.ndarray
    dim: int
    skipped: int
    peripheral_mask: np.ndarray | None = None

    def __len__(self):
        return len(self.ids)

    def rows(self):
        for i in range(len(self.ids)):
            yield {
                "id": self.ids[i], "length": int(self.lengths[i]), "dx": int(self.dx[i]),
                "spread": float(self.spread[i]), "symdist": float(self.symdist[i]),
                "mu_gaps": self.mu_gaps[i].tolist(),
                "lambda_gaps": self.lambda_gaps[i].tolist(),
            }

    def to_csv(self, path):
        d = self.dim
        header = (["id", "length", "dx", "spread", "symdist"]
                  + [f"mu_gap_{k}" for k in range(1, d)]
                  + [f"lambda_gap_{k}" for k in range(1, d)])
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(len(self.ids)):
                row = ([self.ids[i] or "e", str(int(self.lengths[i])), str(int(self.dx[i])),
                        repr(float(self.spread[i])), repr(float(self.symdist[i]))]
                       + [repr(float(x)) for x in self.mu_gaps[i]]
                       + [repr(float(x)) for x in self.lambda_gaps[i]])
                fh.write(",".join(row) + "\n")


def evaluate_rep_on_elements(rep: MatrixRep, elements) -> list:
    """Exact rep matrices for canonically ordered elements, incrementally."""
    cache = {(): exact.identity(rep.dim)}
    out = []
    for g in elements:
        w = g.word
        if w not in cache:
            prefix = cache.get(w[:-1])
            if prefix is None:
                cache[w] = rep.evaluate(w)
            else:
                cache[w] = exact.mat_mul(prefix, rep.image(w[-1]))
        out.append(cache[w])
    return out


def build_gap_profile(graph: CuspedGraph, rep: MatrixRep, group: Group | None = None) -> GapProfile:
    """One row per graph element with distances and all spectral gaps."""
    group = group or graph.group
    dists = graph.distances_from_basepoint()
    mats = evaluate_rep_on_elements(rep, graph.elements)
    d = rep.dim
    peripherals = group.peripherals
    ids, lengths, dx, spread, symdist = [], [], [], [], []
    mu_gaps, lambda_gaps, peri = [], [], []
    skipped = 0
    for g, m in zip(graph.elements, mats):
        try:
            vid = graph.element_vertex(g)
        except Exception:
            skipped += 1
            continue
        fm = exact.to_float(m)
        s = linalg.spectral(fm)
        ids.append(group.gens.format_word(g.word))
        lengths.append(g.length)
        dx.append(int(dists[vid]))
        spread.append(float(s.log_mu[0] - s.log_mu[-1]))
        symdist.append(float(np.sqrt(np.sum(s.log_mu ** 2))))
        mu_gaps.append(np.diff(s.log_mu) * -1)
        lambda_gaps.append(np.diff(s.log_lambda) * -1)
        peri.append(any(group.peripheral_membership(g, p) for p in peripherals))
    return GapProfile(
        ids=ids, lengths=np.array(lengths), dx=np.array(dx),
        spread=np.array(spread), symdist=np.array(symdist),
        mu_gaps=np.vstack(mu_gaps) if mu_gaps else np.zeros((0, d - 1)),
        lambda_gaps=np.vstack(lambda_gaps) if lambda_gaps else np.zeros((0, d - 1)),
        dim=d, skipped=skipped, peripheral_mask=np.array(peri, dtype=bool),
    )


def fit_profile_lower(profile: GapProfile, k: int, peripheral_only: bool = False) -> FitResult:
    mask = profile.peripheral_mask if peripheral_only else np.ones(len(profile), dtype=bool)
    return fit_lower_envelope(profile.dx[mask], profile.mu_gaps[mask][:, k - 1])


def fit_profile_upper(profile: GapProfile) -> FitResult:
    return fit_upper_envelope(profile.dx, profile.spread)


def morse_regularity(profile: GapProfile, k: int) -> FitResult:
    """Max alpha with mu_gap_k >= alpha * (log mu_1/mu_d) - beta over all rows."""
    return fit_lower_envelope(profile.spread, profile.mu_gaps[:, k - 1])


def quasi_isometry_check(profile: GapProfile) -> dict:
    lower = fit_lower_envelope(profile.dx, profile.symdist)
    upper = fit_upper_envelope(profile.dx, profile.symdist)
    d = profile.dim
    cauchy_schwarz_ok = bool(np.all(profile.spread <= math.sqrt(d) * profile.symdist + 1e-9))
    return {
        "lower": lower,
        "upper": upper,
        "multiplicative": max(upper.alpha, 1.0 / lower.alpha) if lower.alpha > 0 else float("inf"),
        "additive": max(abs(lower.beta), abs(upper.beta)),
        "spread_le_sqrtd_symdist": cauchy_schwarz_ok,
        "rows": len(profile),
    }


# ---------------------------------------------------------------------------
# Limit set sampling and transversality
# ---------------------------------------------------------------------------


@dataclass
class LimitSample:
    element_id: str
    attracting: linalg.Subspace
    repelling: linalg.Subspace
    gap_fwd: float
    gap_bwd: float
    flag_fwd: tuple             # (U_k(g), U_{d-k}(g))
    flag_bwd: tuple             # (U_k(g^-1), U_{d-k}(g^-1))


def limit_set_sample(elements, rep: MatrixRep, k: int, group: Group,
                     gap_tol: float = 10 * linalg.DEFAULT_GAP_TOL,
                     eps_flag: float = 1e-3, max_samples: int = 250,
                     seed: int = 0) -> dict:
    """Attracting/repelling subspaces over a shell plus a transversality report.

    Transversality = min singular value of [attracting_i | repelling_j] over
    sampled ordered pairs whose boundary flags are distinct beyond eps_flag.
    """
    rng = np.random.default_rng(seed)
    elements = list(elements)
    if len(elements) > max_samples:
        idx = rng.choice(len(elements), size=max_samples, replace=False)
        elements = [elements[i] for i in sorted(idx)]
    d = rep.dim
    samples, skipped = [], 0
    for g in elements:
        m = exact.to_float(rep.evaluate(g.word))
        minv = np.linalg.inv(m)
        try:
            att = linalg.u_subspace(m, k, tol=gap_tol)
            rep_sub = linalg.u_subspace(minv, d - k, tol=gap_tol)
            f_fwd = (att, linalg.u_subspace(m, d - k, tol=gap_tol))
            f_bwd = (linalg.u_subspace(minv, k, tol=gap_tol), rep_sub)
        except linalg.IllDefinedSubspaceError:
            skipped += 1
            continue
        samples.append(LimitSample(
            element_id=group.gens.format_word(g.word),
            attracting=att, repelling=rep_sub,
            gap_fwd=linalg.mu_gap(m, k), gap_bwd=linalg.mu_gap(minv, d - k),
            flag_fwd=f_fwd, flag_bwd=f_bwd,
        ))
    if not samples:
        return {"samples": [], "skipped": skipped, "min_transversality": None,
                "diagnostic": "all gaps below tolerance"}
    n = len(samples)
    min_t, argmin, checked, exempt = None, None, 0, 0
    for i in range(n):
        for j in range(n):
            si, sj = samples[i], samples[j]
            flag_dist = max(
                linalg.grassmannian_distance(si.flag_fwd[0], sj.flag_bwd[0]),
                linalg.grassmannian_distance(si.flag_fwd[1], sj.flag_bwd[1]),
            )
            if flag_dist <= eps_flag:
                exempt += 1
                continue
            checked += 1
            t = linalg.transversality(si.attracting, sj.repelling)
            if min_t is None or t < min_t:
                min_t, argmin = t, (si.element_id, sj.element_id)
    return {
        "samples": samples, "skipped": skipped, "pairs_checked": checked,
        "pairs_exempt": exempt, "min_transversality": min_t, "argmin": argmin,
        "eps_flag": eps_flag, "sample_count": n,
    }


def strong_dynamics_probe(matrices, k: int, trials: int = 20, seed: int = 0,
                          trans_floor: float = 0.05, tol: float = 1e-2,
                          cauchy_tol: float = 1e-3) -> dict:
    """Transport random k-planes along an escaping sequence and compare with
    the attracting limit. Abstains when the repelling estimate is unstable."""
    rng = np.random.default_rng(seed)
    ms = [np.asarray(m, dtype=float) for m in matrices]
    d = ms[0].shape[0]
    try:
        w_tail = [linalg.u_subspace(np.linalg.inv(m), d - k) for m in ms[-3:]]
        v_tail = [linalg.u_subspace(m, k) for m in ms[-3:]]
    except linalg.IllDefinedSubspaceError as err:
        return {"verdict": "abstain", "reason": f"gap collapsed: {err}"}
    w_incr = [linalg.grassmannian_distance(a, b) for a, b in zip(w_tail, w_tail[1:])]
    if max(w_incr) > cauchy_tol:
        return {"verdict": "abstain", "reason": "repelling estimate not converged",
                "increments": w_incr}
    w_limit, v_limit = w_tail[-1], v_tail[-1]
    planes = []
    while len(planes) < trials:
        v = linalg.subspace_from_columns(rng.standard_normal((d, k)))
        if linalg.transversality(v, w_limit) >= trans_floor:
            planes.append(v)
    dists_per_n = []
    for m in ms:
        dn = max(linalg.grassmannian_distance(linalg.apply_to_subspace(m, v), v_limit)
                 for v in planes)
        dists_per_n.append(float(dn))
    verdict = "consistent" if dists_per_n[-1] <= tol else "inconsistent"
    return {"verdict": verdict, "max_distance_per_n": dists_per_n,
            "trials": trials, "trans_floor": trans_floor, "tol": tol}


# ---------------------------------------------------------------------------
# Translation length
# ---------------------------------------------------------------------------


def translation_length(g: GroupElement, graph: CuspedGraph, group: Group,
                       rep: MatrixRep, k: int, fitted_alpha: float,
                       n_max: int = 32) -> dict:
    """Cesaro estimate of the stable translation length plus the lambda-gap
    bound check, reported with an error bar (never pass/fail)."""
    ratios, ns = [], []
    flagged = False
    for n in range(1, n_max + 1):
        gn = group.power(g, n)
        try:
            dn = graph.cusp_distance(gn)
        except Exception:
            flagged = True
            break
        ns.append(n)
        ratios.append(dn / n)
    if not ns:
        raise ValueError("no power of g lies inside the built graph")
    estimate = ratios[-1]
    error_bar = abs(ratios[-1] - ratios[-2]) if len(ratios) >= 2 else float("nan")
    lam_gap = linalg.lambda_gap(exact.to_float(rep.evaluate(g.word)), k)
    return {
        "ns": ns, "ratios": [float(r) for r in ratios], "estimate": float(estimate),
        "error_bar": float(error_bar), "flagged_ball_exceeded": flagged,
        "lambda_gap": float(lam_gap), "alpha_times_length": float(fitted_alpha * estimate),
        "bound_margin": float(lam_gap - fitted_alpha * estimate),
    }


# ---------------------------------------------------------------------------
# Weakly unipotent growth laws
# ---------------------------------------------------------------------------


def _random_reduced_word(symbols, length, rng):
    word = []
    while len(word) < length:
        s = symbols[rng.integers(0, len(symbols))]
        if word and word[-1] == -s:
            continue
        word.append(int(s))
    return tuple(word)


def unipotent_growth_laws(generators: dict, n_max: int, k: int,
                          words_per_length: int = 6, calibration_n: int = 100,
                          seed: int = 0, witness_sequences=None) -> dict:
    """Upper law spread <= log C + 2(d-1) log N (C frozen from short words)
    and, when the tested range exhibits P_k-divergence, a fitted lower law
    gap_k >= alpha log N + beta with alpha > 0."""
    rng = np.random.default_rng(seed)
    names = sorted(generators)
    mats = {i + 1: exact.mat(generators[n]) for i, n in enumerate(names)}
    for i in list(mats):
        mats[-i] = exact.mat_inv(mats[i])
    check = weakly_unipotent_check([mats[i + 1] for i in range(len(names))])
    if not check["weakly_unipotent"]:
        raise ValueError("peripheral image is not weakly unipotent")
    d = len(next(iter(mats.values())))
    symbols = sorted(mats)

    def word_matrix(word):
        m = exact.identity(d)
        for s in word:
            m = exact.mat_mul(m, mats[s])
        return exact.to_float(m)

    schedule = [n for n in power_schedule(n_max) if n >= 2]
    rows = []
    for n in schedule:
        for _ in range(words_per_length):
            w = _random_reduced_word(symbols, n, rng)
            s = linalg.spectral(word_matrix(w))
            rows.append((n, float(s.log_mu[0] - s.log_mu[-1]),
                         float(s.log_mu[k - 1] - s.log_mu[k])))
    ns = np.array([r[0] for r in rows])
    spreads = np.array([r[1] for r in rows])
    gaps = np.array([r[2] for r in rows])

    calib = ns <= calibration_n
    log_c = float(np.max(spreads[calib] - 2 * (d - 1) * np.log(ns[calib])))
    upper_violations = int(np.sum(spreads > log_c + 2 * (d - 1) * np.log(ns) + 1e-9))

    # divergence witness over the tested range: random words plus any
    # designated structured sequences
    env = [float(np.max(gaps[ns <= n])) for n in schedule]
    growth = env[-1] - env[max(0, len(env) // 2 - 1)]
    divergent = growth >= GROWTH_MARGIN
    witness_failed = None
    for name, seq in (witness_sequences or {}).items():
        wgaps = [linalg.mu_gap(np.asarray(m, dtype=float), k) for m in seq]
        wenv = np.maximum.accumulate(wgaps)
        if wenv[-1] - wenv[len(wenv) // 2] < STABLE_MARGIN:
            divergent = False
            witness_failed = {"name": name, "gaps": [float(x) for x in wgaps]}
            break

    report = {
        "dim": d, "k": k, "n_range": (int(schedule[0]), int(schedule[-1])),
        "log_c_frozen": log_c, "upper_exponent": 2 * (d - 1),
        "upper_violations": upper_violations,
        "divergent_on_range": bool(divergent),
    }
    if divergent:
        fit = fit_lower_envelope(np.log(ns), gaps)
        report["lower_fit"] = fit
        report["lower_alpha_positive"] = bool(fit.alpha > ALPHA_ZERO_TOL)
    else:
        report["lower_law"] = "not applicable"
        report["witness"] = witness_failed
    return report


# ---------------------------------------------------------------------------
# Rational growth probe
# ---------------------------------------------------------------------------


def _exp_nilpotent(y: np.ndarray) -> np.ndarray:
    d = y.shape[0]
    term = np.eye(d)
    out = np.eye(d)
    for i in range(1, d):
        term = term @ y / i
        out = out + term
    return out


def rational_growth_probe(basis, k: int, samples: int = 24, seed: int = 0,
                          norm_range=(1.0, 1e6)) -> dict:
    """Evaluate the rational singular-gap proxy R along log-spaced rays.

    R_raw(Y) = ||w^k e^Y||_F^4 / (||w^(k+1) e^Y||_F^2 ||w^(k-1) e^Y||_F^2);
    the report carries R = R_raw / R_raw(0) so that R(0) = 1.
    Checks: sqrt(R_raw) tracks mu_k/mu_{k+1}(e^Y) within a fitted constant,
    and a fitted power law R >= C' ||Y||^delta when the sample diverges.
    """
    basis = [np.asarray(b, dtype=float) for b in basis]
    d = basis[0].shape[0]
    for b in basis:
        if np.any(np.abs(np.tril(b)) > 0):
            raise ValueError("basis must be strictly upper triangular (nilpotent)")
    if not 1 <= k < d:
        raise ValueError("need 1 <= k < d")

    def frob2_wedge(m, ell):
        if ell == 0:
            return 1.0
        return float(np.sum(linalg.wedge_power(m, ell) ** 2))

    def r_raw(m):
        return frob2_wedge(m, k) ** 2 / (frob2_wedge(m, k + 1) * frob2_wedge(m, k - 1))

    r0 = r_raw(np.eye(d))
    rng = np.random.default_rng(seed)
    lo, hi = norm_range
    radii = np.exp(np.linspace(np.log(lo), np.log(hi), samples))
    rows = []
    for r in radii:
        coeffs = rng.standard_normal(len(basis))
        y = sum(c * b for c, b in zip(coeffs, basis))
        y = y * (r / np.linalg.norm(y))
        m = _exp_nilpotent(y)
        gap_ratio = float(np.exp(linalg.mu_gap(m, k)))
        rr = r_raw(m)
        rows.append((float(r), rr, gap_ratio))
    ratios = np.array([row[2] / math.sqrt(row[1]) for row in rows])
    c_fitted = float(max(ratios.max(), (1.0 / ratios).max()))
    violations = int(np.sum((ratios > c_fitted + 1e-9) | (1.0 / ratios > c_fitted + 1e-9)))

    rnorms = np.array([row[0] for row in rows])
    rvals = np.array([row[1] / r0 for row in rows])
    env = np.maximum.accumulate(np.log(np.array([row[2] for row in rows])))
    divergent = bool(env[-1] - env[len(env) // 2] >= GROWTH_MARGIN)
    report = {
        "r0_raw": float(r0), "c_fitted": c_fitted, "violations": violations,
        "samples": len(rows), "norm_range": [float(lo), float(hi)],
        "divergent_on_sample": divergent,
    }
    if divergent:
        fit = fit_lower_envelope(np.log(rnorms), np.log(rvals))
        report["power_law"] = fit
        report["delta_positive"] = bool(fit.alpha > 0)
    return report


def rational_r_normalized(basis, k: int, y_coeffs) -> float:
    """R(Y)/R(0) at an explicit algebra element (for ray studies)."""
    basis = [np.asarray(b, dtype=float) for b in basis]
    d = basis[0].shape[0]
    y = sum(c * b for c, b in zip(y_coeffs, basis))
    m = _exp_nilpotent(y)

    def frob2_wedge(mm, ell):
        if ell == 0:
            return 1.0
        return float(np.sum(linalg.wedge_power(mm, ell) ** 2))

    def r_raw(mm):
        return frob2_wedge(mm, k) ** 2 / (frob2_wedge(mm, k + 1) * frob2_wedge(mm, k - 1))

    return r_raw(m) / r_raw(np.eye(d))


# ---------------------------------------------------------------------------
# Perturbation re-run
# ---------------------------------------------------------------------------


def _mat_rank(m) -> int:
    rows = [list(r) for r in m]
    n, cols = len(rows), len(rows[0])
    rank, row = 0, 0
    for col in range(cols):
        piv = next((r for r in range(row, n) if rows[r][col] != 0), None)
        if piv is None:
            continue
        rows[row], rows[piv] = rows[piv], rows[row]
        inv = 1 / rows[row][col]
        rows[row] = [x * inv for x in rows[row]]
        for r in range(n):
            if r != row and rows[r][col]:
                f = rows[r][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[row])]
        row += 1
        rank += 1
    return rank


def check_peripheral_conjugacy(group: Group, rep0: MatrixRep, rep1: MatrixRep,
                               conjugators: dict) -> dict:
    """Exact check that rep1|_P = U rep0|_P U^-1 for each peripheral P."""
    failures = []
    for p in group.peripherals:
        u = conjugators.get(p.id)
        if u is None:
            failures.append({"peripheral": p.id, "reason": "no conjugator supplied"})
            continue
        u = exact.mat(u)
        uinv = exact.mat_inv(u)
        for name in p.marked:
            s = group.gens.names.index(name) + 1
            lhs = rep1.image(s)
            rhs = exact.mat_mul(exact.mat_mul(u, rep0.image(s)), uinv)
            if lhs != rhs:
                d = rep0.dim
                eye = exact.identity(d)
                sub0 = tuple(tuple(rep0.image(s)[i][j] - eye[i][j] for j in range(d))
                             for i in range(d))
                sub1 = tuple(tuple(rep1.image(s)[i][j] - eye[i][j] for j in range(d))
                             for i in range(d))
                failures.append({
                    "peripheral": p.id, "generator": name,
                    "reason": "images not conjugate by the supplied conjugator",
                    "rank_rho0_minus_id": _mat_rank(sub0),
                    "rank_rho1_minus_id": _mat_rank(sub1),
                })
    return {"ok": not failures, "failures": failures}
