"""Fixtures and independent brute-force oracles shared by the test modules."""
import math

import numpy as np

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record(number, status, detail):
    line = f"criterion {number}: {status} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def two_blob_mixture(seed=0, n=200, normalize=True):
    """200-point 2-D fixture: N((0,0), I) and N((3,3), 0.25 I), equal halves, z-scored."""
    rng = np.random.default_rng(seed)
    h = n // 2
    x = np.vstack([rng.normal([0.0, 0.0], 1.0, (h, 2)), rng.normal([3.0, 3.0], 0.5, (n - h, 2))])
    if normalize:
        x = (x - x.mean(0)) / x.std(0, ddof=1)
    return x


def heteroscedastic_mixture(seed, n, d=4):
    """Dense cluster plus a sparse, wide tail component."""
    rng = np.random.default_rng(seed)
    n_tail = n // 5
    dense = rng.normal(0.0, 0.3, (n - n_tail, d))
    tail = rng.normal(2.0, 1.5, (n_tail, d))
    x = np.vstack([dense, tail])
    return x[rng.permutation(n)]


def random_kde_instance(rng, n, d, weighted=True):
    x = rng.normal(size=(n, d))
    s = rng.uniform(0.1, 2.0, n)
    w = rng.dirichlet(np.ones(n)) if weighted else np.full(n, 1.0 / n)
    return x, s, w


def brute_log_kernel(x, c, s):
    d = len(x)
    sq = sum((a - b) ** 2 for a, b in zip(x, c))
    return -d * LOG_SQRT_2PI - d * math.log(s) - sq / (2 * s * s)


def brute_loo(x, s, w):
    total = 0.0
    n = len(x)
    for i in range(n):
        terms = [math.log(w[j]) + brute_log_kernel(x[i], x[j], s[j]) for j in range(n) if j != i]
        mx = max(terms)
        total += mx + math.log(sum(math.exp(t - mx) for t in terms))
    return total


def brute_energy(x, y):
    dist = lambda a, b: math.sqrt(sum((p - q) ** 2 for p, q in zip(a, b)))
    xy = sum(dist(a, b) for a in x for b in y) / (len(x) * len(y))
    xx = sum(dist(a, b) for a in x for b in x) / len(x) ** 2
    yy = sum(dist(a, b) for a in y for b in y) / len(y) ** 2
    return 2 * xy - xx - yy


def brute_mmd(x, y, h):
    k = lambda a, b: math.exp(-sum((p - q) ** 2 for p, q in zip(a, b)) / (2 * h * h))
    kxx = sum(k(a, b) for a in x for b in x) / len(x) ** 2
    kyy = sum(k(a, b) for a in y for b in y) / len(y) ** 2
    kxy = sum(k(a, b) for a in x for b in y) / (len(x) * len(y))
    return kxx + kyy - 2 * kxy


def brute_median_distance(z):
    d = sorted(
        math.sqrt(sum((p - q) ** 2 for p, q in zip(z[i], z[j])))
        for i in range(len(z)) for j in range(i + 1, len(z))
    )
    d = [v for v in d if v > 0]
    m = len(d)
    return d[m // 2] if m % 2 else 0.5 * (d[m // 2 - 1] + d[m // 2])


def brute_ecdf(sample, t):
    return sum(1 for v in sample if v <= t) / len(sample)


def brute_ks(a, b):
    pts = sorted(set(a) | set(b))
    return max(abs(brute_ecdf(a, t) - brute_ecdf(b, t)) for t in pts)


def brute_cvm_integral(a, b):
    """nm/(n+m) times the integral of (F_a - F_b)^2 against the pooled ECDF."""
    n, m = len(a), len(b)
    pooled = list(a) + list(b)
    return n * m / (n + m) ** 2 * sum((brute_ecdf(a, z) - brute_ecdf(b, z)) ** 2 for z in pooled)


def anderson_rank_cvm(a, b):
    """Rank form of the statistic; valid when there are no ties."""
    n, m = len(a), len(b)
    pooled = sorted(list(a) + list(b))
    rank = {v: k + 1 for k, v in enumerate(pooled)}
    u = n * sum((rank[v] - i) ** 2 for i, v in enumerate(sorted(a), 1))
    u += m * sum((rank[v] - j) ** 2 for j, v in enumerate(sorted(b), 1))
    return u / (n * m * (n + m)) - (4 * m * n - 1) / (6 * (m + n))


def exhaustive_matched_k(n, d, target):
    want = n if target == "a" else 2 * n - 1
    per = d + d * (d + 1) // 2 + 1
    best = None
    for k in range(1, 2 * want + 2):
        diff = abs(k * per - 1 - want)
        if best is None or diff < best[0]:
            best = (diff, k)
    return best[1]
