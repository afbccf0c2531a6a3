"""Straight-line reference implementations of the two expert mixtures.

Plain Python lists and loops, deliberately sharing no code with the rest of
the package; used as an independent oracle for the vectorised pipeline.
"""
import math
from fractions import Fraction


def _window_sq_distance(y, t, n, k):
    # windows y_{t-k}..y_{t-1} and y_{n-k}..y_{n-1}, 1-based, oldest first
    total = 0.0
    for j in range(k, 0, -1):
        d = y[t - j - 1] - y[n - j - 1]
        total += d * d
    return total


def _successors(y, n, k, lbar):
    ranked = sorted((_window_sq_distance(y, t, n, k), t) for t in range(k + 1, n))
    return [y[t - 1] for _, t in ranked[:lbar]]


def _sorted_sample_quantile(values, tau):
    m = len(values)
    mt = m * Fraction(repr(float(tau)))
    r = int(mt) if mt.denominator == 1 else math.floor(mt) + 1
    return sorted(values)[r - 1]


def reference_mixture(y, k_max, lbar_max, tau=0.5, mean_experts=False):
    """Run the uniform-prior mixture over ``y`` and return ``(forecasts, average_loss)``.

    ``mean_experts=True`` gives the conditional-mean variant (successor
    means, squared loss); otherwise successor pinball quantiles and pinball
    loss.
    """
    tau = float(tau)
    y = [float(v) for v in y]
    keys = [(k, l) for k in range(1, k_max + 1) for l in range(1, lbar_max + 1)]
    prior = 1.0 / len(keys)
    cumulative = [0.0] * len(keys)

    def loss(residual):
        if mean_experts:
            return residual * residual
        return residual * (tau - 1.0) if residual <= 0 else residual * tau

    forecasts = []
    for n in range(1, len(y) + 1):
        eta = math.sqrt(1.0 / n)
        experts = []
        for k, l in keys:
            if n > k + l + 1:
                succ = _successors(y, n, k, l)
                if mean_experts:
                    experts.append(sum(succ) / l)
                else:
                    experts.append(_sorted_sample_quantile(succ, tau))
            else:
                experts.append(0.0)
        exponents = [eta * c for c in cumulative]
        low = min(exponents)
        w = [prior * math.exp(-(e - low)) for e in exponents]
        total = sum(w)
        g = sum(wi / total * h for wi, h in zip(w, experts))
        forecasts.append(g)
        for i, h in enumerate(experts):
            cumulative[i] += loss(y[n - 1] - h)
    avg = sum(loss(v - g) for v, g in zip(y, forecasts)) / len(y)
    return forecasts, avg
