"""Welfare (scalarization) functions over reward vectors.

Supported kinds are utilitarian (arithmetic mean), generalized-mean p-welfare,
egalitarian (leximin) and Nash social welfare (geometric mean, optionally
smoothed by ``lam``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

KINDS = ("utilitarian", "nsw", "p-welfare", "egalitarian")

DEFAULT_LAMBDA = 1e-2


class WelfareError(ValueError):
    pass


@dataclass(frozen=True)
class WelfareSpec:
    """Tagged welfare function choice.

    ``lam`` is the NSW smoothing term; ``lam=0`` selects the exact geometric
    mean. ``clamp`` controls how negative components are treated by NSW and
    p-welfare: clamped at zero (default) or mapped to ``-inf`` (strict mode).
    """

    kind: str
    lam: float = DEFAULT_LAMBDA
    p: float | None = None
    clamp: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise WelfareError(f"unknown welfare kind {self.kind!r}")
        if self.kind == "nsw" and not (self.lam >= 0 and math.isfinite(self.lam)):
            raise WelfareError("nsw smoothing lambda must be finite and >= 0")
        if self.kind == "p-welfare":
            if self.p is None or self.p == 0 or not math.isfinite(self.p):
                raise WelfareError("p-welfare needs a finite, non-zero p")

    @property
    def is_linear(self) -> bool:
        return self.kind == "utilitarian" or (self.kind == "p-welfare" and self.p == 1)

    def __str__(self) -> str:
        return format_spec(self)


def utilitarian() -> WelfareSpec:
    return WelfareSpec("utilitarian")


def nsw(lam: float = DEFAULT_LAMBDA, clamp: bool = True) -> WelfareSpec:
    return WelfareSpec("nsw", lam=lam, clamp=clamp)


def p_welfare(p: float) -> WelfareSpec:
    return WelfareSpec("p-welfare", p=p)


def egalitarian() -> WelfareSpec:
    return WelfareSpec("egalitarian")


def parse_spec(text: str) -> WelfareSpec:
    """Parse the compact form used on the command line.

    Accepted: ``util``, ``egal``, ``nsw``, ``nsw:lambda=0.01``,
    ``nsw:lambda=0.01,strict``, ``p:p=-0.5``.
    """
    head, _, tail = text.strip().partition(":")
    params: dict[str, str] = {}
    flags: set[str] = set()
    for item in filter(None, (s.strip() for s in tail.split(","))):
        if "=" in item:
            key, value = item.split("=", 1)
            params[key.strip()] = value.strip()
        else:
            flags.add(item)
    try:
        if head in ("util", "utilitarian"):
            return utilitarian()
        if head in ("egal", "egalitarian"):
            return egalitarian()
        if head == "nsw":
            lam = float(params.get("lambda", DEFAULT_LAMBDA))
            return nsw(lam, clamp="strict" not in flags)
        if head in ("p", "p-welfare"):
            if "p" not in params:
                raise WelfareError(f"missing p in {text!r}")
            return p_welfare(float(params["p"]))
    except ValueError as exc:
        raise WelfareError(f"bad welfare spec {text!r}: {exc}") from exc
    raise WelfareError(f"bad welfare spec {text!r}")


def format_spec(spec: WelfareSpec) -> str:
    if spec.kind == "utilitarian":
        return "util"
    if spec.kind == "egalitarian":
        return "egal"
    if spec.kind == "nsw":
        out = f"nsw:lambda={spec.lam!r}"
        return out if spec.clamp else out + ",strict"
    return f"p:p={spec.p!r}"


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise WelfareError("welfare needs a non-empty 1-d reward vector")
    return arr


def _generalized_mean(v: np.ndarray, p: float, clamp: bool) -> float:
    if np.any(v < 0):
        if not clamp:
            return -math.inf
        v = np.maximum(v, 0.0)
    if p < 0 and np.any(v == 0):
        return 0.0
    return float(np.mean(v**p) ** (1.0 / p))


def welfare(spec: WelfareSpec, v) -> float:
    """Scalar welfare of a reward vector.

    NSW returns the smoothed geometric mean ``exp(mean(log(v + lam))) - lam``,
    which is the exact geometric mean when ``lam == 0``. Egalitarian returns the
    minimum component; use :func:`compare_leximin` for the full ordering.
    """
    v = _as_vector(v)
    if spec.kind == "utilitarian":
        return float(np.mean(v))
    if spec.kind == "egalitarian":
        return float(np.min(v))
    if spec.kind == "p-welfare":
        if spec.p == 1:
            return float(np.mean(v))
        return _generalized_mean(v, spec.p, spec.clamp)
    # nsw
    if np.any(v < 0):
        if not spec.clamp:
            return -math.inf
        v = np.maximum(v, 0.0)
    if spec.lam == 0:
        if np.any(v == 0):
            return 0.0
        return float(np.exp(np.mean(np.log(v))))
    return float(np.exp(np.mean(np.log(v + spec.lam))) - spec.lam)


def exact_nsw(v) -> float:
    """Plain geometric mean; negative components count as zero."""
    return welfare(WelfareSpec("nsw", lam=0.0), v)


def log_nsw(v, lam: float = DEFAULT_LAMBDA, clamp: bool = True) -> float:
    """Sum of ``log(v_i + lam)``, with components clamped at zero by default."""
    v = _as_vector(v)
    if clamp:
        v = np.maximum(v, 0.0)
    shifted = v + lam
    if np.any(shifted <= 0):
        raise WelfareError("log_nsw domain error: v_i + lambda must be positive")
    return float(np.sum(np.log(shifted)))


def row_scores(spec: WelfareSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Return a vectorised scorer mapping a (k, n) array to k comparable scores.

    Scores are monotone-equivalent to :func:`welfare` row by row (NSW is
    scored in log space). Egalitarian scores only the minimum; leximin
    tie-breaking is handled by :func:`argmax_rows`.
    """
    if spec.is_linear:
        return lambda m: m.sum(axis=1)
    if spec.kind == "egalitarian":
        return lambda m: m.min(axis=1)
    if spec.kind == "nsw":
        lam, clamp = spec.lam, spec.clamp

        def score(m: np.ndarray) -> np.ndarray:
            if clamp:
                m = np.maximum(m, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.log(m + lam).sum(axis=1)
            if not clamp:
                out[(m < 0).any(axis=1)] = -np.inf
            return out

        return score

    p, clamp = spec.p, spec.clamp

    def score(m: np.ndarray) -> np.ndarray:
        neg = (m < 0).any(axis=1)
        m = np.maximum(m, 0.0)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.mean(m**p, axis=1) ** (1.0 / p)
        if p < 0:
            out[(m == 0).any(axis=1)] = 0.0
        if not clamp:
            out[neg] = -np.inf
        return out

    return score


def argmax_rows(spec: WelfareSpec, m: np.ndarray, score=None) -> int:
    """Index of the welfare-maximal row of ``m``; ties go to the lowest index."""
    if m.shape[0] == 0:
        raise WelfareError("argmax over an empty candidate list")
    if m.shape[0] == 1:
        return 0
    if spec.kind == "egalitarian":
        return _leximin_argmax(m)
    scores = (score or row_scores(spec))(m)
    best = int(np.argmax(scores))
    if scores[best] == -np.inf:
        # every candidate is -inf (strict NSW on non-positive vectors)
        return int(np.argmax(m.sum(axis=1)))
    return best


def _leximin_argmax(m: np.ndarray) -> int:
    keys = np.sort(m, axis=1)
    best = 0
    for i in range(1, keys.shape[0]):
        if _lex_cmp(keys[i], keys[best]) > 0:
            best = i
    return best


def _lex_cmp(a: np.ndarray, b: np.ndarray) -> int:
    diff = np.nonzero(a != b)[0]
    if diff.size == 0:
        return 0
    i = diff[0]
    return 1 if a[i] > b[i] else -1


def argmax_welfare(spec: WelfareSpec, candidates: Sequence) -> int:
    """Index of the welfare-maximal candidate vector (lowest index on ties)."""
    if len(candidates) == 0:
        raise WelfareError("argmax over an empty candidate list")
    m = np.asarray(candidates, dtype=float)
    if m.ndim != 2:
        raise WelfareError("candidates must share one length")
    return argmax_rows(spec, m)


def compare_leximin(u, v) -> int:
    """Leximin comparison: 1 if ``u`` is better, -1 if worse, 0 if equal."""
    u, v = _as_vector(u), _as_vector(v)
    if u.shape != v.shape:
        raise WelfareError("leximin comparison needs equal lengths")
    return _lex_cmp(np.sort(u), np.sort(v))
