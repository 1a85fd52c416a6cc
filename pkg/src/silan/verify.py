"""Self-checks against independent oracles, one suite per component."""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import product

import numpy as np

from .augment import build_key_batch, make_positive_key, sample_noise
from .config import AdaptConfig
from .contrastive import ContrastiveBatch, infonce_loss, normalized_batch, prop1_lower_bound
from .data import gen_moons
from .diagnostics import beam_condition, optimal_radius, solve_beam_condition
from .neighborhood import FeatureBank, build_bank, cosine_sim, knn
from .nn import MlpSpec, extract_features, grad_check, init_model

SUITES = ("gradcheck", "prop1", "beam", "knn", "silan-stats")


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def check_gradients(tol: float = 1e-4, eps: float = 1e-5) -> list[Check]:
    # saturated softmax rows make the probability-space loss flat enough that
    # round-off dominates the difference quotient at 1e-5; a wider step is used there
    cases = [("cross_entropy", (2, 4, 2), "logit", eps)] + [
        ("infonce", (2, 4, 4, 2), space, 1e-4 if space == "probability" else eps)
        for space in ("logit", "cosine", "probability")]
    checks = []
    for activation in ("tanh", "relu"):
        for kind, widths, space, step in cases:
            worst = max(grad_check(MlpSpec(widths, activation, seed=s), kind, step, seed=s, space=space)
                        for s in range(3))
            name = kind if kind == "cross_entropy" else f"{kind}-{space}"
            checks.append(Check(f"{name}/{activation}", worst <= tol, f"max rel err {worst:.3e} (eps {step:g})"))
    return checks


def check_prop1(trials: int = 1000, seed: int = 0, slack: float = 1e-9) -> list[Check]:
    rng = np.random.default_rng(seed)
    grid = list(product((2, 4, 8), (2, 5), (0.11, 1.0)))
    held = 0
    for t in range(trials):
        m, z, tau = grid[t % len(grid)]
        batch = ContrastiveBatch(rng.normal(size=(m, z)), rng.normal(size=(m, z)), tau)
        if prop1_lower_bound(batch, normalize=True) <= infonce_loss(normalized_batch(batch))[0] + slack:
            held += 1
    return [Check("prop1", held == trials, f"{held}/{trials} inequalities hold")]


def check_beam() -> list[Check]:
    u, ratio = solve_beam_condition()
    residual = abs(beam_condition(u))
    numeric = optimal_radius(1.0, 10.0)
    return [
        Check("beam-root", abs(ratio - 1.5852) <= 5e-4 and residual <= 1e-9,
              f"u* = {u:.6f}, radius_over_sigma = {ratio:.5f}, residual {residual:.1e}"),
        Check("beam-golden-section", abs(numeric - 1.5852) <= 0.01 * 1.5852,
              f"argmax T/N at sigma=1, sigma_ext=10: R = {numeric:.5f}"),
    ]


def check_knn(n: int = 200, dim: int = 4, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(n, dim))
    bank = FeatureBank(feats)
    sims = [[cosine_sim(feats[i], feats[j]) for j in range(n)] for i in range(n)]
    checks = []
    for k in (1, 3, 5):
        mismatches = 0
        for i in range(n):
            oracle = sorted((j for j in range(n) if j != i), key=lambda j: (-sims[i][j], j))[:k]
            mismatches += knn(bank, feats[i], i, k).tolist() != oracle
        checks.append(Check(f"knn-K{k}", mismatches == 0, f"{n - mismatches}/{n} exact index matches"))
    return checks


def check_silan_stats(draws: int = 100_000, seed: int = 0) -> list[Check]:
    spec = MlpSpec((2, 16, 16, 8, 2), "tanh", seed=seed)
    model_s, model_t = init_model(spec), init_model(MlpSpec(spec.layer_widths, "tanh", seed=seed + 1))
    ds = gen_moons(60, 0.1, seed)
    bank_s, bank_t = build_bank(model_s, ds, frozen=True), build_bank(model_t, ds)
    kb = build_key_batch(model_t, bank_t, bank_s, ds, [7, 8], AdaptConfig(k_t=3, k_s=5),
                         np.random.default_rng(seed))
    var = kb.variance_s[0]
    centre = extract_features(model_t, kb.centroid_input[:1])[0]

    rng = np.random.default_rng([seed, 1])
    H = centre + sample_noise(np.broadcast_to(var, (draws, len(var))), rng)
    big = var > 1e-6
    rel = np.abs(H.var(axis=0)[big] - var[big]) / var[big]
    mean_err = np.abs(H.mean(axis=0) - centre)

    zero = np.zeros_like(var)
    keys = {make_positive_key(model_t, kb.centroid_input[0], None, zero, "input", rng).augmented_features.tobytes()
            for _ in range(100)}
    return [
        Check("silan-variance", bool(np.all(rel <= 0.05)),
              f"max relative variance error {rel.max():.4f} over {int(big.sum())} dims, {draws} draws"),
        Check("silan-mean", bool(np.all(mean_err <= 0.02)), f"max |mean - centroid encoding| {mean_err.max():.4f}"),
        Check("silan-zero-variance", len(keys) == 1, f"{len(keys)} distinct key(s) over 100 zero-variance draws"),
    ]


RUNNERS = {
    "gradcheck": check_gradients,
    "prop1": check_prop1,
    "beam": check_beam,
    "knn": check_knn,
    "silan-stats": check_silan_stats,
}


def run_suite(name: str, out=print) -> bool:
    if name not in RUNNERS:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    start = time.perf_counter()
    checks = RUNNERS[name]()
    for check in checks:
        out(check.line())
    ok = all(c.passed for c in checks)
    out(f"{'PASS' if ok else 'FAIL'} {name} ({time.perf_counter() - start:.2f}s)")
    return ok
