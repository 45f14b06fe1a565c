"""What a KL radius buys: confidence statements for a solved KL-RS instance.

A solution feasible at fragility lambda satisfies E_P[l] <= tau + lambda*KL(P||P_hat)
for every P.  The calculators below quantify how likely the true distribution
is to sit inside a KL ball of radius r around the empirical one.
"""
from klrs import guarantees as gt

K, N, r = 2, 100, 0.05
print(f"K={K} support points, N={N} samples, radius r={r}")
print(f"  asymptotic (chi-squared) confidence : {gt.asymptotic_discrete_confidence(K, N, r):.5f}")
print(f"  Chernoff finite-sample lower bound  : {gt.chernoff_confidence(K, N, r):.5f}")
print(f"  N needed for 99% via Chernoff       : {gt.chernoff_sample_size(K, r, 0.99)}")

print("\nTail bound: at most exp(-alpha/lambda) of the samples exceed tau + alpha")
for lam in (0.1, 0.5, 1.0):
    print(f"  lambda={lam:<4} alpha=0.5 -> {gt.tail_bound(lam, 0.5):.4f}")

value, k_star = gt.asymptotic_continuous_confidence(C=1.0, lam=0.5, N=1000, r=0.05)
print(f"\nBounded continuous losses (C=1, lambda=0.5, N=1000, r=0.05): {value:.4f} at K={k_star}")

print("\nMonte-Carlo check of the chi-squared prediction (p=(1/2,1/2), N=500):")
rq = 2.705543454095404 / (2 * 500)  # 90% quantile of chi2(1), halved per sample
cov = gt.validate_asymptotic_coverage([0.5, 0.5], 500, rq, trials=2000, seed=0)
print(f"  empirical coverage {cov:.4f} vs predicted {gt.chi2_cdf(1, 2 * 500 * rq):.4f}")

ekl = gt.monte_carlo_expected_kl([0.2, 0.3, 0.5], 200, trials=500)
print(f"\nLaplace-smoothed E[KL] at N=200: {ekl:.5f}; finite-sample radius at delta=0.05: "
      f"{gt.finite_sample_radius(3, 200, 0.05, ekl):.2f}  (loose, decays like 1/N)")
print(f"  at N=1e6: {gt.finite_sample_radius(3, 10**6, 0.05, ekl):.5f}")
