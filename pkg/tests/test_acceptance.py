"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the summary lines.
"""

import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from realism.bench import builtin_scenarios, roc, run_scenario
from realism.cli import main
from realism.complexity import Codec, compress, compression_deficiency, decompress
from realism.continuous import (
    FlowState,
    GaussianMixtureDensity,
    deterministic_flow_step,
    posterior_weighted_grad,
    typicality_gradient,
)
from realism.critic import batched_critic, sequential_scores
from realism.divergence import f_div_bound, kl_exact, optimal_critic, sandwich_verify
from realism.mixture import default_zoo, prior_from_description_bits
from realism.models import IIDCategorical, MarkovChain, Sequence, Uniform, all_sequences, bernoulli
from realism.typicality import enumerate_typical_set, strong_typicality_distance, weak_deviation_many

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
FAIR = bernoulli(0.5)


def report(number: int, title: str, ok: bool, detail: str = "") -> None:
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title}" + (f" [{detail}]" if detail else ""))
    assert ok, detail


def bernoulli_kl(q: float, p: float) -> float:
    return q * math.log(q / p) + (1 - q) * math.log((1 - q) / (1 - p))


def test_01_fair_coin_degeneracy():
    start = time.perf_counter()
    nonzero = 0
    for n in range(1, 17):
        nonzero += int(np.count_nonzero(weak_deviation_many(FAIR, all_sequences(2, n))))
    elapsed = time.perf_counter() - start
    report(1, "fair-coin weak deviation identically zero, N <= 16", nonzero == 0 and elapsed < 10, f"nonzero={nonzero} time={elapsed:.2f}s")


def test_02_most_probable_sequence():
    P = bernoulli(0.51)
    lp = P.log_prob_many(all_sequences(2, 10))
    best = np.flatnonzero(lp == lp.max())
    ok = len(best) == 1 and best[0] == 2**10 - 1
    report(2, "all-ones is the unique argmax under Bernoulli(0.51), N = 10", ok, f"argmax={best.tolist()}")


def test_03_typical_set_bound():
    violations = 0
    cells = 0
    for p in (0.5, 0.7, 0.9):
        P = bernoulli(p)
        h = -sum(q * math.log(q) for q in (p, 1 - p))
        for n in range(1, 17):
            for delta in (0.01, 0.05, 0.1):
                count, bound = enumerate_typical_set(P, n, delta)
                independent = math.exp(n * h + n * delta)
                violations += int(count > bound or count > independent * (1 + 1e-12))
                violations += int(not math.isclose(bound, independent, rel_tol=1e-12))
                cells += 1
    report(3, "typical-set count within its size bound", violations == 0, f"cells={cells} violations={violations}")


def test_04_strong_typicality_single_symbol():
    rng = np.random.default_rng(4)
    p = rng.dirichlet(np.ones(12))
    P = IIDCategorical(tuple(p))
    err = max(abs(strong_typicality_distance(P, Sequence((s,), 12)) - (2 - 2 * P.probs[s])) for s in range(12))
    report(4, "strong-typicality distance equals 2 - 2P(x) at N = 1", err <= 1e-12, f"max_err={err:.2e}")


def test_05_sandwich_bounds():
    start = time.perf_counter()
    n = 20
    kl = n * bernoulli_kl(0.8, 0.5)
    failures = []
    for q_bits in (0, 4, 12):
        Q = bernoulli(0.8, q_bits)
        models = [Q] if q_bits == 0 else [Q, bernoulli(0.5, 1)]
        S = prior_from_description_bits(models)
        for B in (1, 4, 16, 64):
            r = sandwich_verify(Q, FAIR, S, B, 10_000, 1000 * q_bits + B, n, workers=4)
            lo = kl - q_bits * math.log(2) / B
            ok = abs(r.kl - kl) < 1e-12 and lo - 3 * r.std_error <= r.estimate <= kl + 3 * r.std_error
            if not ok:
                failures.append((q_bits, B, r.estimate, lo, kl, r.std_error))
    elapsed = time.perf_counter() - start
    report(5, "sandwich bounds hold for 12 (B, prior) cells", not failures and elapsed < 60, f"time={elapsed:.1f}s failures={failures}")


def test_06_dominance():
    violations = 0
    checked = 0
    for P in (FAIR, MarkovChain(((0.7, 0.3), (0.2, 0.8)))):
        S = prior_from_description_bits(default_zoo(2))
        for n in range(1, 5):
            rows = all_sequences(2, n)
            comp = np.array([m.log_prob_many(rows) for m in S.models])
            lp_rows = P.log_prob_many(rows)
            for b in range(1, 4):
                for idx in itertools.product(range(len(rows)), repeat=b):
                    batch = [Sequence(tuple(rows[i])) for i in idx]
                    u = batched_critic(P, S, batch).u
                    lr = comp[:, list(idx)].sum(axis=1) - lp_rows[list(idx)].sum() + S.log_priors
                    violations += int(np.sum(u < lr - 1e-12))
                    checked += len(lr)
    report(6, "batched critic dominates every component likelihood ratio", violations == 0, f"checks={checked} violations={violations}")


def test_07_chain_decomposition():
    rng = np.random.default_rng(7)
    S = prior_from_description_bits(default_zoo(2))
    P = MarkovChain(((0.6, 0.4), (0.45, 0.55)))
    worst = 0.0
    sizes = [64] + [int(v) for v in rng.integers(1, 65, 99)]
    for b in sizes:
        n = int(rng.integers(1, 33))
        source = S.models[int(rng.integers(len(S)))]
        arr = source.sample_many(rng, b, n) if rng.random() < 0.5 else rng.integers(0, 2, (b, n))
        batch = [Sequence(tuple(r)) for r in arr.tolist()]
        u = batched_critic(P, S, batch).u
        # Independent route: log-sum-exp of full-batch component likelihoods.
        lq = np.array([m.log_prob_many(arr).sum() for m in S.models])
        u_direct = logsumexp(S.log_priors + lq) - P.log_prob_many(arr).sum()
        steps = sequential_scores(P, S, batch)
        worst = max(worst, abs(math.fsum(steps) - u), abs(u - u_direct))
    report(7, "sequential scores sum to the batched score, 100 batches up to B = 64", worst <= 1e-9, f"max_err={worst:.2e}")


def test_08_gradient_identity():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 5))
        d = int(rng.integers(1, 6))
        w = rng.dirichlet(np.ones(k))
        q = GaussianMixtureDensity.from_components(w, rng.normal(0, 2, (k, d)), rng.uniform(0.3, 3.0, (k, d)))
        x = rng.normal(0, 1.5, d)
        g = posterior_weighted_grad(q, x)
        h = 1e-5
        fd = np.array([(q.log_density(x + h * e) - q.log_density(x - h * e)) / (2 * h) for e in np.eye(d)])
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-3))
    report(8, "posterior-weighted gradient matches finite differences", worst <= 1e-5, f"max_rel_err={worst:.2e}")


def test_09_gaussian_flow():
    sp2, eps = 2.0, 0.05
    m, s = 3.0, 0.5
    P = GaussianMixtureDensity.gaussian([0.0], sp2)
    z = np.random.default_rng(9).standard_normal(10_000)
    x = (m + s * (z - z.mean()) / z.std())[:, None]
    worst = 0.0
    for _ in range(100):
        q_t = GaussianMixtureDensity.gaussian([m], s * s)
        x = deterministic_flow_step(P, q_t, FlowState(x, eps)).position
        # Closed-form recursion for a Gaussian ensemble under a Gaussian target.
        m = m * (1 - eps / sp2)
        s = s * (1 - eps / sp2 + eps / (s * s))
        worst = max(worst, abs(x.mean() - m), abs(x.std() - s))
    report(9, "particle flow follows the affine mean/std recursion", worst <= 1e-6, f"max_err={worst:.2e}")


def test_10_typicality_gradient_pathology():
    d = 256
    rng = np.random.default_rng(10)
    pts = rng.normal(size=(1000, d)) * rng.uniform(0.2, 2.0, (1000, 1))
    g = typicality_gradient(pts)
    cos = np.sum(g * pts, axis=1) / (np.linalg.norm(g, axis=1) * np.linalg.norm(pts, axis=1))
    cos_err = float(np.max(np.abs(np.abs(cos) - 1)))

    x = np.cumsum(rng.normal(size=d)) / math.sqrt(d)
    lag1 = lambda v: np.corrcoef(v[:-1], v[1:])[0, 1]
    r0 = lag1(x)
    drift = 0.0
    for _ in range(1000):
        x = x - 1e-4 * typicality_gradient(x)
        drift = max(drift, abs(lag1(x) - r0))
    ok = cos_err <= 1e-12 and drift <= 1e-6
    report(10, "typicality gradient is radial and leaves structure untouched", ok, f"cos_err={cos_err:.2e} lag1_drift={drift:.2e}")


def _structured_corpus(rng, count, size=1024):
    items = []
    for i in range(count):
        kind = i % 3
        if kind == 0:
            out = bytearray()
            while len(out) < size:
                out += bytes([int(rng.integers(256))]) * int(rng.integers(1, 64))
        elif kind == 1:
            pattern = rng.integers(0, 256, int(rng.integers(1, 17)), dtype=np.uint8).tobytes()
            out = pattern * (size // len(pattern) + 1)
        else:
            letters = np.frombuffer(b"etaoinshrdlu ", dtype=np.uint8)
            T = rng.dirichlet(np.full(len(letters), 0.3), size=len(letters))
            s = int(rng.integers(len(letters)))
            seq = []
            for _ in range(size):
                s = int(rng.choice(len(letters), p=T[s]))
                seq.append(letters[s])
            out = bytes(seq)
        items.append(bytes(out[:size]))
    return items


def test_11_compression_separation():
    rng = np.random.default_rng(11)
    codec = Codec("arith", 2)
    P = Uniform(256)
    structured = _structured_corpus(rng, 200)
    rand = [rng.integers(0, 256, 1024, dtype=np.uint8).tobytes() for _ in range(200)]
    d_struct = [compression_deficiency(P, x, codec).deficiency_bits for x in structured]
    d_rand = [compression_deficiency(P, x, codec).deficiency_bits for x in rand]
    auc = roc(d_struct, d_rand).auc

    codecs = [Codec("store"), Codec("rle"), Codec("lz", window=256), Codec("lz"), Codec("arith", 0), Codec("arith", 1), Codec("arith", 2)]
    failures = 0
    for i in range(10_000):
        n = int(rng.integers(1, 400))
        mode = i % 4
        if mode == 0:
            data = rng.integers(0, 256, n, dtype=np.uint8).tobytes()
        elif mode == 1:
            data = rng.integers(0, 3, n, dtype=np.uint8).tobytes()
        elif mode == 2:
            data = bytes(np.repeat(rng.integers(0, 256, 4, dtype=np.uint8), n))
        else:
            data = (rng.integers(0, 256, int(rng.integers(1, 9)), dtype=np.uint8).tobytes() * n)[:n]
        codec_i = codecs[i % len(codecs)]
        failures += int(decompress(compress(codec_i, data).code) != data)
    ok = auc >= 0.99 and failures == 0
    report(11, "compression deficiency separates structured from random bytes", ok, f"auc={auc:.4f} roundtrip_failures={failures}")


def test_12_detection_suite():
    detectors = ["neg_log_p", "weak_typicality", "universal_critic", "batched_critic:1", "batched_critic:8"]
    res = {sc.corruption: {r.detector: r.auc for r in run_scenario(sc, detectors, 200, seed=12)} for sc in builtin_scenarios(128)}
    problems = []
    for name in ("constant", "periodic", "alternating-01"):
        if res[name]["universal_critic"] != 1.0:
            problems.append((name, "universal_critic", res[name]["universal_critic"]))
    for name in res:
        for det in ("neg_log_p", "weak_typicality"):
            if res[name][det] != 0.5:
                problems.append((name, det, res[name][det]))
    mem = res["memorized-duplicate"]
    if mem["batched_critic:8"] < 0.99 or mem["batched_critic:1"] > 0.6:
        problems.append(("memorized-duplicate", mem))
    report(12, "detection suite AUCs", not problems, f"problems={problems}")


def test_13_f_divergence_tightness():
    pairs = [
        (bernoulli(0.8), FAIR),
        (bernoulli(0.3), MarkovChain(((0.6, 0.4), (0.45, 0.55)))),
        (MarkovChain(((0.9, 0.1), (0.2, 0.8))), bernoulli(0.4)),
    ]
    worst = 0.0
    for Q, P in pairs:
        for n in range(1, 9):
            worst = max(worst, abs(f_div_bound(optimal_critic(Q, P), Q, P, n) - kl_exact(Q, P, n)))

    Q, P, n = bernoulli(0.8), FAIR, 8
    kl = kl_exact(Q, P, n)
    T = optimal_critic(Q, P)
    rng = np.random.default_rng(13)
    rows = all_sequences(2, n)
    index = {tuple(r): i for i, r in enumerate(rows.tolist())}
    not_smaller = 0
    for _ in range(100):
        noise = rng.normal(0, rng.uniform(0.01, 1.0), len(rows))
        critic = lambda a, e=noise: T(a) + e[[index[tuple(r)] for r in a.tolist()]]
        not_smaller += int(f_div_bound(critic, Q, P, n) >= kl)
    ok = worst <= 1e-12 and not_smaller == 0
    report(13, "variational bound is tight at the optimal critic and only there", ok, f"max_err={worst:.2e} not_smaller={not_smaller}")


def _run(capsys, argv):
    code = main([str(a) for a in argv])
    out, _ = capsys.readouterr()
    return code, out


def test_14_cli_determinism(capsys, tmp_path):
    bounds = json.loads((CONFIGS / "bounds.json").read_text())
    bounds["bounds"]["num_batches"] = 2000
    (tmp_path / "bounds.json").write_text(json.dumps(bounds))
    blob = tmp_path / "blob.bin"
    blob.write_bytes(b"determinism " * 200 + bytes(range(256)))
    commands = {
        "score": ["score", "--config", CONFIGS / "score.json"],
        "bounds": ["bounds", "--config", tmp_path / "bounds.json"],
        "bench": ["bench", "--config", CONFIGS / "bench.json"],
        "optimize": ["optimize", "--config", CONFIGS / "optimize.json"],
        "typicality": ["typicality", "--config", CONFIGS / "typicality.json"],
        "deficiency": ["deficiency", "--config", CONFIGS / "deficiency.json", blob],
        "compress": ["compress", blob, "--codec", "arith2"],
        "enumerate": ["enumerate", "--config", CONFIGS / "enumerate.json"],
    }
    unstable = []
    for name, argv in commands.items():
        outputs = [_run(capsys, argv)]
        outputs.append(_run(capsys, argv))
        if name != "compress":
            outputs.append(_run(capsys, argv + ["--workers", 4]))
        if any(o != (0, outputs[0][1]) for o in outputs) or not outputs[0][1]:
            unstable.append(name)
    packed = [tmp_path / "a.z", tmp_path / "b.z"]
    for p in packed:
        _run(capsys, ["compress", blob, "--out", p])
    if packed[0].read_bytes() != packed[1].read_bytes():
        unstable.append("compress-stream")
    report(14, "every subcommand is byte-identical across runs and worker counts", not unstable, f"unstable={unstable}")
