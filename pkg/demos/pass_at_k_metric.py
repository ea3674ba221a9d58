"""pass@k: product-form evaluation checked against simulation.

For a problem with n sampled answers of which c are correct, pass@k is
the chance that at least one of k drawn answers is correct. The table
compares the closed form with a hypergeometric Monte-Carlo estimate.
"""

import numpy as np

from instrefine.analysis import pass_at_k, pass_at_k_mean

rng = np.random.default_rng(0)

print(f"{'n':>5} {'c':>4} {'k':>4} {'pass@k':>10} {'monte carlo':>12}")
for n, c, k in [(5, 2, 1), (10, 3, 5), (50, 4, 10), (200, 7, 25), (400, 1, 100)]:
    exact = pass_at_k(n, c, k)
    draws = rng.hypergeometric(c, n - c, k, size=200_000)
    estimate = float(np.mean(draws > 0))
    print(f"{n:>5} {c:>4} {k:>4} {exact:>10.5f} {estimate:>12.5f}")

# Benchmark-style usage: average over problems with varying correct counts.
problems = [(20, int(c)) for c in rng.binomial(20, 0.3, size=40)]
print(f"\nmean pass@1 over {len(problems)} problems: {pass_at_k_mean(problems, 1):.4f}")
print(f"mean pass@5 over {len(problems)} problems: {pass_at_k_mean(problems, 5):.4f}")
