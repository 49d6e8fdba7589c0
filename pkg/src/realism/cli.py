"""``critic`` command-line front end.

Every subcommand writes CSV: a ``# ...`` metadata line carrying the
subcommand, master seed and units, then a header row, then data rows with
floats printed to 12 significant digits. Output is assembled in memory and
written only on success.

Exit codes: 0 ok, 2 config error, 3 input error, 4 runtime divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from . import bench as bn
from . import complexity as cx
from . import config as cf
from . import critic as cr
from . import divergence as dv
from . import typicality as ty
from .continuous import realism_descent
from .mixture import log_mix_prob_many, prior_from_description_bits
from .models import AlphabetError, IIDCategorical, Sequence, iter_all_sequences

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_DIVERGED = 0, 2, 3, 4
LN2 = math.log(2.0)


class InputError(ValueError):
    pass


class Diverged(RuntimeError):
    def __init__(self, text: str, message: str):
        super().__init__(message)
        self.text = text


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


class Table:
    def __init__(self, command: str, seed, units: str, header: list[str]):
        self.lines = [f"# critic {command} seed={seed} units={units}", ",".join(header)]

    def row(self, *values) -> None:
        self.lines.append(",".join(fmt(v) for v in values))

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _scale(units: str) -> float:
    return 1.0 / LN2 if units == "bits" else 1.0


def _section(cfg: cf.ExperimentConfig, name: str):
    sec = getattr(cfg, name)
    if sec is None:
        raise cf.ConfigError(f"field '{name}': section required for this subcommand")
    return sec


def _settings(args) -> tuple[cf.ExperimentConfig, int, str]:
    if not args.config:
        raise cf.ConfigError("--config is required")
    cfg = cf.load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    units = args.units or cfg.units
    return cfg, seed, units


def _parse_sequence(text: str, alphabet: int) -> Sequence:
    try:
        return Sequence.from_string(text.strip(), alphabet)
    except ValueError as exc:
        raise InputError(f"sequence {text.strip()[:32]!r}: {exc}") from exc


def cmd_score(args) -> str:
    cfg, seed, units = _settings(args)
    P = cf.require_p_model(cfg)
    S = cf.build_mixture(cfg, P.alphabet)
    texts = list(args.sequences)
    if args.input:
        try:
            texts += [ln for ln in Path(args.input).read_text().splitlines() if ln.strip()]
        except OSError as exc:
            raise InputError(str(exc)) from exc
    if not texts and cfg.score is not None:
        texts = list(cfg.score.sequences)
    if not texts:
        raise InputError("no input sequences")
    seqs = [_parse_sequence(t, P.alphabet) for t in texts]
    k = _scale(units)
    if not args.batch:
        tab = Table("score", seed, units, ["index", "length", f"log_p_{units}", f"log_s_{units}", f"u_{units}"])
        for i, x in enumerate(seqs):
            rep = cr.universal_critic(P, S, x)
            tab.row(i, len(x), rep.log_p * k, rep.log_s * k, rep.u * k)
        return tab.text()
    b = args.batch
    tab = Table("score", seed, units, ["batch", "step", f"log_p_{units}", f"log_s_{units}", f"u_{units}"])
    lengths = {len(x) for x in seqs}
    if len(lengths) != 1:
        raise InputError("batched scoring needs sequences of one length")
    for j in range(0, len(seqs), b):
        group = seqs[j : j + b]
        rep = cr.batched_critic(P, S, group, steps=True)
        lp_each = P.log_prob_many(group)
        for t, (lp, step_u) in enumerate(zip(lp_each, rep.per_step)):
            tab.row(j // b, t, lp * k, (step_u + lp) * k if math.isfinite(lp) else -math.inf, step_u * k)
        tab.row(j // b, "total", rep.log_p * k, rep.log_s * k, rep.u * k)
    return tab.text()


def bounds_mixture(Q, q_bits: float, fill):
    """S holds Q at prior 2^-q_bits, plus each fill model while total mass stays <= 1."""
    q = dataclasses.replace(Q, description_bits=q_bits)
    models = [q]
    mass = 2.0**-q_bits
    for f in fill:
        w = 2.0**-f.description_bits
        if mass + w <= 1.0 + 1e-12:
            models.append(f)
            mass += w
    return q, prior_from_description_bits(models)


def cmd_bounds(args) -> str:
    cfg, seed, units = _settings(args)
    sec = _section(cfg, "bounds")
    P = cf.require_p_model(cfg)
    Q = cf.build_model(sec.q_model)
    fill = [cf.build_model(s) for s in sec.fill]
    if any(m.alphabet != P.alphabet for m in [Q, *fill]):
        raise InputError("bounds models must share the alphabet of p_model")
    k = _scale(units)
    tab = Table(
        "bounds", seed, units,
        ["q_bits", "B", f"kl_{units}", f"lower_{units}", f"estimate_{units}", f"std_error_{units}"],
    )
    for qb in sec.q_bits:
        q, S = bounds_mixture(Q, qb, fill)
        for B in args.batch_sizes or sec.batch_sizes:
            r = dv.sandwich_verify(q, P, S, B, sec.num_batches, seed, sec.length, workers=args.workers)
            tab.row(qb, B, r.kl * k, r.lower * k, r.estimate * k, r.std_error * k)
    return tab.text()


def cmd_bench(args) -> str:
    cfg, seed, units = _settings(args)
    sec = cfg.bench or cf.BenchSection()
    P = cf.require_p_model(cfg)
    zoo = tuple(cf.mixture_models(cfg, P.alphabet))
    try:
        codec = cx.Codec.parse(sec.codec)
    except ValueError as exc:
        raise cf.ConfigError(f"field 'bench.codec': {exc}") from exc
    batch = args.batch or sec.batch
    tab = Table("bench", seed, units, ["scenario", "detector", "auc"])
    roc_tab = Table("bench-roc", seed, units, ["scenario", "detector", "fpr", "tpr"])
    for name in sec.scenarios:
        try:
            sc = bn.Scenario(name, P, name, sec.length, sec.bias, sec.memorized_size, zoo)
            results = bn.run_scenario(sc, sec.detectors, sec.n_per_class, seed, batch=batch, codec=codec, workers=args.workers)
        except AlphabetError as exc:
            raise InputError(f"scenario '{name}': {exc}") from exc
        except ValueError as exc:
            raise cf.ConfigError(f"field 'bench': {exc}") from exc
        for r in results:
            tab.row(name, r.detector, r.auc)
            for fpr, tpr in r.points:
                roc_tab.row(name, r.detector, fpr, tpr)
    if args.roc_out:
        Path(args.roc_out).write_text(roc_tab.text())
    return tab.text()


def cmd_optimize(args) -> str:
    cfg, seed, units = _settings(args)
    sec = _section(cfg, "optimize")
    P = cf.build_density(sec.p)
    S = cf.build_density(sec.s)
    if P.dim != S.dim or len(sec.x0) != P.dim:
        raise InputError("field 'optimize.x0': dimension must match both densities")
    traj = realism_descent(P, S, sec.x0, sec.step, sec.steps)
    k = _scale(units)
    d = P.dim
    tab = Table("optimize", seed, units, ["t", *[f"x{j}" for j in range(d)], f"u_{units}", f"log_p_{units}", f"log_s_{units}"])
    for t in range(len(traj.positions)):
        tab.row(t, *traj.positions[t], traj.u[t] * k, traj.log_p[t] * k, traj.log_s[t] * k)
    if traj.diverged:
        raise Diverged(tab.text(), f"descent diverged after {traj.steps} steps")
    return tab.text()


def cmd_typicality(args) -> str:
    cfg, seed, units = _settings(args)
    sec = _section(cfg, "typicality")
    P = cf.require_p_model(cfg)
    tab = Table("typicality", seed, units, ["N", f"delta_{units}", "count", "bound", "membership_rate"])
    to_nats = LN2 if units == "bits" else 1.0
    ss = np.random.SeedSequence(seed).spawn(len(sec.lengths) * len(sec.deltas))
    it = iter(ss)
    for n in sec.lengths:
        for delta in sec.deltas:
            child = int(next(it).generate_state(1)[0])
            try:
                count, bound = ty.enumerate_typical_set(P, n, delta * to_nats, workers=args.workers)
                rate = ty.membership_rate(P, n, delta * to_nats, sec.mc_samples, child)
            except ValueError as exc:
                raise InputError(f"typicality N={n}: {exc}") from exc
            tab.row(n, delta, count, bound, rate)
    return tab.text()


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError(str(exc)) from exc


def cmd_deficiency(args) -> str:
    cfg, seed, units = _settings(args)
    sec = cfg.deficiency or cf.DeficiencySection()
    P = cf.require_p_model(cfg) if cfg.p_model is not None else IIDCategorical((1 / 256,) * 256)
    if P.alphabet != 256:
        raise InputError("field 'p_model': deficiency on raw files needs a 256-symbol model")
    try:
        codec = cx.Codec.parse(args.codec or sec.codec)
    except ValueError as exc:
        raise cf.ConfigError(f"field 'deficiency.codec': {exc}") from exc
    if not args.files:
        raise InputError("no input files")
    k = LN2 * _scale(units)
    tab = Table("deficiency", seed, units, ["file", f"neg_log_p_{units}", f"code_{units}", f"deficiency_{units}"])
    for f in args.files:
        data = _read_bytes(f)
        if not data:
            raise InputError(f"{f}: empty file")
        r = cx.compression_deficiency(P, data, codec)
        tab.row(Path(f).name, r.neg_log_p_bits * k, r.code_bits * k, r.deficiency_bits * k)
    return tab.text()


def cmd_compress(args) -> str:
    data = _read_bytes(args.file)
    if args.decompress:
        try:
            out = cx.decompress(data)
        except ValueError as exc:
            raise InputError(f"{args.file}: {exc}") from exc
        if args.out:
            Path(args.out).write_bytes(out)
            return ""
        sys.stdout.buffer.write(out)
        return ""
    try:
        codec = cx.Codec.parse(args.codec or "arith2")
    except ValueError as exc:
        raise cf.ConfigError(str(exc)) from exc
    if not data:
        raise InputError(f"{args.file}: empty file")
    res = cx.compress(codec, data)
    if args.out:
        Path(args.out).write_bytes(res.code)
    return f"{res.bits}\n"


def cmd_enumerate(args) -> str:
    cfg, seed, units = _settings(args)
    P = cf.require_p_model(cfg)
    S = cf.build_mixture(cfg, P.alphabet)
    n = args.length or (cfg.enumerate.length if cfg.enumerate else None)
    if not n:
        raise cf.ConfigError("field 'enumerate.length': required")
    if P.alphabet**n > 1 << 20:
        raise InputError(f"{P.alphabet}^{n} sequences exceed the 2^20 listing limit")
    k = _scale(units)
    iid = hasattr(P, "marginal")
    tab = Table(
        "enumerate", seed, units,
        ["sequence", f"log_p_{units}", f"u_{units}", f"weak_deviation_{units}", "strong_distance"],
    )
    for arr in iter_all_sequences(P.alphabet, n):
        lp = P.log_prob_many(arr)
        ls = log_mix_prob_many(S, arr)
        dev = ty.weak_deviation_many(P, arr)
        for i, row in enumerate(arr):
            seq = Sequence.from_array(row, P.alphabet)
            u = cr.deficiency(float(ls[i]), float(lp[i]))
            strong = ty.strong_typicality_distance(P, seq) if iid else ""
            tab.row(seq.to_string(), lp[i] * k, u * k, dev[i] * k, strong)
    return tab.text()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="override the config's master seed")
    common.add_argument("--units", choices=["bits", "nats"], help="override the config's units")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--workers", type=int, default=1, help="worker threads (results do not depend on this)")

    parser = argparse.ArgumentParser(prog="critic", description="Realism scores from randomness deficiency.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="score sequences with the universal critic")
    p.add_argument("sequences", nargs="*", help="base-36 digit strings")
    p.add_argument("--input", help="file with one sequence per line")
    p.add_argument("--batch", type=int, help="score consecutive groups of B sequences as batches")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bounds", parents=[common], help="sandwich bound verification")
    p.add_argument("--batch", dest="batch_sizes", type=int, action="append", help="batch size (repeatable)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("bench", parents=[common], help="detection benchmark AUCs")
    p.add_argument("--batch", type=int, help="default batch size for batched_critic")
    p.add_argument("--roc-out", help="also write every ROC point here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("optimize", parents=[common], help="gradient descent on the continuous critic")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("typicality", parents=[common], help="typical-set counts, bounds and membership rates")
    p.set_defaults(func=cmd_typicality)

    p = sub.add_parser("deficiency", parents=[common], help="compression deficiency of raw files")
    p.add_argument("files", nargs="*")
    p.add_argument("--codec", help="store, rle, lz[:window], arith0, arith1 or arith2")
    p.set_defaults(func=cmd_deficiency)

    p = sub.add_parser("compress", help="compress a file and print its code length in bits")
    p.add_argument("file")
    p.add_argument("--codec", help="store, rle, lz[:window], arith0, arith1 or arith2")
    p.add_argument("-d", "--decompress", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("enumerate", parents=[common], help="list every sequence of a length with its scores")
    p.add_argument("--length", type=int)
    p.set_defaults(func=cmd_enumerate)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.func(args)
    except cf.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Diverged as exc:
        _emit(exc.text, getattr(args, "out", None))
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (InputError, AlphabetError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "compress":
        if text:
            sys.stdout.write(text)
    else:
        _emit(text, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
