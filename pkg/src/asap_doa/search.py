"""DOA search strategies over the SRP-PHAT objective.

* :func:`full_grid_search` -- exhaustive scan of a hemisphere icosphere.
* :func:`cfrc_search` -- coarse-to-fine region contraction with spherical caps.
* :func:`asap_search` -- strip-constrained contraction to lock the azimuth,
  then a one-dimensional refinement, either along the meridian (``"MC"``) or
  along the great circle between the two best candidates (``"BP"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geom import (
    Direction,
    StripSet,
    build_icosphere,
    caps_mask,
    dir_to_unit,
    dirs_to_units,
    mean_edge_angle,
    slerp,
    unit_to_dir,
)


class SearchConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SearchResult:
    direction: Direction
    unit: np.ndarray = field(repr=False)
    score: float
    evaluations: int
    stage1_evals: int
    stage2_evals: int = 0


def _result(u, score, stage1, stage2=0):
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    return SearchResult(unit_to_dir(u), u, float(score), stage1 + stage2, stage1, stage2)


@dataclass(frozen=True)
class CfrcConfig:
    """Region-contraction settings.

    The cap half-angle used after scoring level ``i`` is ``cap_scale`` times
    the mean edge length of the level-``i`` mesh, unless `cap_angles_deg`
    lists explicit angles for levels ``start_level .. max_level - 1``.
    """

    start_level: int = 1
    max_level: int = 5
    top_n: int = 4
    cap_scale: float = 2.0
    cap_angles_deg: tuple | None = None

    def __post_init__(self):
        if not 1 <= self.start_level <= self.max_level <= 7:
            raise SearchConfigError("need 1 <= start_level <= max_level <= 7")
        if self.top_n < 1:
            raise SearchConfigError("top_n must be at least 1")
        if self.cap_angles_deg is not None:
            angles = tuple(float(a) for a in self.cap_angles_deg)
            if len(angles) != self.max_level - self.start_level:
                raise SearchConfigError(
                    "cap_angles_deg needs one angle per contraction step "
                    f"({self.max_level - self.start_level}), got {len(angles)}"
                )
            object.__setattr__(self, "cap_angles_deg", angles)
        elif not self.cap_scale > 0:
            raise SearchConfigError("cap_scale must be positive")
        alphas = [self.cap_angle(i) for i in range(self.start_level, self.max_level)]
        if any(not 0 < a <= math.pi for a in alphas):
            raise SearchConfigError("cap angles must lie in (0, 180] degrees")
        if any(b > a for a, b in zip(alphas, alphas[1:])):
            raise SearchConfigError("cap angles must not grow with level")

    def cap_angle(self, level):
        """Cap half-angle in radians formed after scoring `level`."""
        if self.cap_angles_deg is not None:
            return math.radians(self.cap_angles_deg[level - self.start_level])
        return min(math.pi, self.cap_scale * mean_edge_angle(level))


@dataclass(frozen=True)
class AsapConfig:
    strips: StripSet = StripSet((10.0, 35.0, 60.0, 85.0), 10.0)
    cfrc: CfrcConfig = CfrcConfig()
    variant: str = "BP"
    mc_half_window: float = 15.0
    mc_step: float = 1.0
    bp_step: float = 0.5
    quad_refine: bool = True
    stage2_window: float | None = None

    def __post_init__(self):
        variant = str(self.variant).upper()
        if variant not in ("MC", "BP"):
            raise SearchConfigError(f"variant must be 'MC' or 'BP', got {self.variant!r}")
        object.__setattr__(self, "variant", variant)
        if self.stage2_window is None:
            object.__setattr__(self, "stage2_window", float(self.mc_half_window))
        for name in ("mc_half_window", "mc_step", "bp_step", "stage2_window"):
            if not getattr(self, name) > 0:
                raise SearchConfigError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# exhaustive and contraction searches

def full_grid_search(ev, level):
    grid = build_icosphere(level, hemisphere_only=True)
    scores = ev.power_batch(grid.vertices)
    best = int(np.argmax(scores))  # first maximum -> lowest index
    return _result(grid.vertices[best], scores[best], len(scores))


def _top(scores, n):
    order = np.argsort(-scores, kind="stable")
    return order[:n]


def _contract(ev, cfg, strips=None):
    """Shared level loop of CFRC and strip-constrained CFRC.

    Returns the candidates and scores of the last scored set, sorted by
    decreasing score, plus the number of evaluations spent.
    """
    grid = build_icosphere(cfg.start_level, hemisphere_only=True)
    cand = grid.vertices
    if strips is not None:
        cand = cand[strips.mask(cand)]
        if len(cand) == 0:
            raise SearchConfigError(
                f"no level-{cfg.start_level} grid point falls inside the strips"
            )
    scores = ev.power_batch(cand)
    evals = len(cand)
    best_u, best_s = cand[int(np.argmax(scores))], float(scores.max())

    for level in range(cfg.start_level, cfg.max_level):
        keep = _top(scores, cfg.top_n)
        centers = cand[keep]
        nxt = build_icosphere(level + 1, hemisphere_only=True).vertices
        mask = caps_mask(centers, cfg.cap_angle(level), nxt)
        if strips is not None:
            mask &= strips.mask(nxt)
        if not mask.any():
            cand, scores = centers, scores[keep]
            break
        cand = nxt[mask]
        scores = ev.power_batch(cand)
        evals += len(cand)
        i = int(np.argmax(scores))
        if scores[i] > best_s:
            best_u, best_s = cand[i], float(scores[i])

    order = _top(scores, len(scores))
    cand, scores = cand[order], scores[order]
    if best_s > scores[0]:
        # the running best dropped out of the last scored set; keep it first
        cand = np.vstack([best_u, cand])
        scores = np.concatenate([[best_s], scores])
    return cand, scores, evals


def cfrc_search(ev, cfg=CfrcConfig()):
    cand, scores, evals = _contract(ev, cfg)
    return _result(cand[0], scores[0], evals)


# ---------------------------------------------------------------------------
# two-stage search

def asap_stage1(ev, cfg):
    """Strip-constrained contraction.

    Returns ``(azimuth_deg, top_vectors, top_scores, evals)`` where the top
    vectors (one for MC, two for BP) are ordered by decreasing score.
    """
    cand, scores, evals = _contract(ev, cfg.cfrc, cfg.strips)
    k = 1 if cfg.variant == "MC" else 2
    top = cand[:k]
    return unit_to_dir(top[0]).azimuth, top, scores[:k], evals


def quad_interp_peak(p_minus, p_0, p_plus, step):
    """Offset of the vertex of the parabola through three equally spaced samples."""
    denom = p_minus - 2.0 * p_0 + p_plus
    if abs(denom) < 1e-12 * max(1.0, abs(p_0)):
        return 0.0
    offset = 0.5 * step * (p_minus - p_plus) / denom
    return float(min(step, max(-step, offset)))


def _window_grid(lo, hi, step):
    n = int(math.floor((hi - lo) / step + 1e-9))
    pts = lo + step * np.arange(n + 1)
    if hi - pts[-1] > 1e-9 * max(1.0, step):
        pts = np.append(pts, hi)
    else:
        pts[-1] = hi
    return pts


def mc_refine(ev, azimuth, elevation, half_window, step, quad=True):
    """Meridian-centred elevation scan at a fixed azimuth.

    Returns ``(azimuth, elevation, score, evals)``; `score` is the best sampled
    value.
    """
    lo = max(0.0, elevation - half_window)
    hi = min(90.0, elevation + half_window)
    thetas = _window_grid(lo, hi, step)
    scores = ev.power_batch(dirs_to_units(np.full_like(thetas, azimuth), thetas))
    j = int(np.argmax(scores))
    theta = float(thetas[j])
    if quad and 0 < j < len(thetas) - 1:
        # skip a shortened last interval
        if abs((thetas[j + 1] - thetas[j]) - step) < 1e-9 * max(1.0, step):
            theta += quad_interp_peak(scores[j - 1], scores[j], scores[j + 1], step)
    theta = min(90.0, max(0.0, theta))
    return azimuth, theta, float(scores[j]), len(thetas)


def bp_arc_samples(u1, u2, step_deg):
    """SLERP samples between u1 and u2 at spacing of at most `step_deg`."""
    alpha = math.acos(min(1.0, max(-1.0, float(np.dot(u1, u2)))))
    n = int(math.ceil(math.degrees(alpha) / step_deg)) + 1
    t = np.linspace(0.0, 1.0, n)
    return t, slerp(u1, u2, t), alpha


def bp_refine(ev, u1, u2, step, quad=True):
    """Great-circle refinement between the two best Stage-1 vectors.

    Returns ``(unit, score, evals)``.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    alpha = math.acos(min(1.0, max(-1.0, float(np.dot(u1, u2)))))
    if alpha < 1e-6:
        return u1, ev.power(u1), 1
    t, arc, alpha = bp_arc_samples(u1, u2, step)
    scores = ev.power_batch(arc)
    j = int(np.argmax(scores))
    u = arc[j]
    if quad and 0 < j < len(t) - 1:
        arc_step = math.degrees(alpha) * (t[1] - t[0])
        offset = quad_interp_peak(scores[j - 1], scores[j], scores[j + 1], arc_step)
        u = slerp(u1, u2, t[j] + offset / math.degrees(alpha))
    u = u / np.linalg.norm(u)
    if u[2] < 0.0:
        u = np.array([u[0], u[1], 0.0]) / math.hypot(u[0], u[1])
    return u, float(scores[j]), len(t)


def asap_search(ev, cfg=AsapConfig()):
    azimuth, top, top_scores, e1 = asap_stage1(ev, cfg)
    if cfg.variant == "MC":
        theta_hat = unit_to_dir(top[0]).elevation
        window = min(cfg.mc_half_window, cfg.stage2_window)
        az, el, score, e2 = mc_refine(ev, azimuth, theta_hat, window, cfg.mc_step, cfg.quad_refine)
        d = Direction(az, el)
        return SearchResult(d, dir_to_unit(d), score, e1 + e2, e1, e2)
    if len(top) < 2:
        top = np.vstack([top[0], top[0]])
    u, score, e2 = bp_refine(ev, top[0], top[1], cfg.bp_step, cfg.quad_refine)
    return _result(u, score, e1, e2)


METHODS = ("full_grid", "cfrc", "asap_mc", "asap_bp")


def method_configs(level, cfrc=None, asap=None):
    """Per-method settings for a maximum tessellation level."""
    cfrc = replace(cfrc or CfrcConfig(), max_level=level)
    asap = replace(asap or AsapConfig(), cfrc=cfrc)
    return {
        "full_grid": level,
        "cfrc": cfrc,
        "asap_mc": replace(asap, variant="MC"),
        "asap_bp": replace(asap, variant="BP"),
    }


def run_method(ev, name, setting):
    if name == "full_grid":
        return full_grid_search(ev, setting)
    if name == "cfrc":
        return cfrc_search(ev, setting)
    if name in ("asap_mc", "asap_bp"):
        return asap_search(ev, setting)
    raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
