"""Brute-force reference computations kept independent of the library code."""

import math
from fractions import Fraction


def pcc_exact(x, y):
    """Pearson correlation with exact rational sums; one sqrt at the end."""
    xs = [Fraction(v) for v in x]
    ys = [Fraction(v) for v in y]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    num = sum((a - mx) * (b - my) for a, b in zip(xs, ys))
    sxx = sum((a - mx) ** 2 for a in xs)
    syy = sum((b - my) ** 2 for b in ys)
    return float(num) / math.sqrt(float(sxx * syy))


def auc_pairs(scores, positive):
    """Share of (positive, negative) pairs ranked correctly, ties worth half."""
    pos = [s for s, p in zip(scores, positive) if p]
    neg = [s for s, p in zip(scores, positive) if not p]
    won = Fraction(0)
    for a in pos:
        for b in neg:
            won += 1 if a > b else Fraction(1, 2) if a == b else 0
    return won / (len(pos) * len(neg))


def normal_logpdf(x, mean, var):
    return -0.5 * (math.log(2 * math.pi * var) + (x - mean) ** 2 / var)


def mixture_loglik_1d(data, weights, means, variances):
    total = 0.0
    for x in data:
        total += math.log(sum(w * math.exp(normal_logpdf(x, m, v))
                              for w, m, v in zip(weights, means, variances)))
    return total
