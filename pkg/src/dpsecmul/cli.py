"""Command-line entry point: ``dpsecmul <experiment> [options]`` and ``dpsecmul eval``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

from . import experiments
from .schemes import LinearCode

log = logging.getLogger("dpsecmul")


def _jsonable(v):
    if isinstance(v, float) and v != v:
        return "nan"
    if isinstance(v, float) and v in (float("inf"), float("-inf")):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        return _jsonable(v.item())
    return v


def read_config_file(path: str) -> dict:
    """Parse a flat ``key=value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def parse_sets(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def render_csv(outcome: experiments.Outcome, cfg: dict) -> str:
    """CSV text with a leading ``# config_sha256=...`` comment line."""
    buf = io.StringIO()
    buf.write(f"# config_sha256={experiments.config_hash(cfg)} config={json.dumps(cfg, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(outcome.columns)
    for row in outcome.rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _default_seed() -> int:
    env = os.environ.get("DPSECMUL_SEED")
    return int(env) if env else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpsecmul", description="Private distributed multiplication experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in experiments.EXPERIMENTS.items():
        sp = sub.add_parser(name, help=fn.__doc__.splitlines()[0] if fn.__doc__ else None)
        sp.add_argument("--seed", type=int, default=None, help="default: $DPSECMUL_SEED or 0")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", help="CSV path (default: stdout)")
        sp.add_argument("--summary", help="write the JSON summary here instead of stdout")
        sp.add_argument("--config", help="flat key=value file; --set wins on conflicts")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ev = sub.add_parser("eval", help="analyse a serialized scheme")
    ev.add_argument("path")
    ev.add_argument("--t", type=int, required=True)
    ev.add_argument("--out", help="JSON path (default: stdout)")
    return p


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run_experiment(args) -> int:
    overrides = read_config_file(args.config) if args.config else {}
    overrides.update(parse_sets(args.set))
    cfg = experiments.resolve(args.command, overrides)
    seed = _default_seed() if args.seed is None else args.seed
    resolved = {"experiment": args.command, "seed": seed, "workers": args.workers, **cfg}
    log.info("resolved config: %s", json.dumps(resolved, sort_keys=True))
    outcome = experiments.EXPERIMENTS[args.command](cfg, seed=seed, workers=args.workers)
    _emit(render_csv(outcome, resolved), args.out)
    summary = {"experiment": args.command, "config": resolved, "checks": outcome.checks,
               "passed": outcome.passed, **outcome.summary}
    text = json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n"
    if args.summary:
        _emit(text, args.summary)
    elif args.out:
        sys.stdout.write(text)
    else:
        sys.stderr.write(text)
    for name, ok in outcome.checks.items():
        log.info("%s %s", "PASS" if ok else "FAIL", name)
    return 0 if outcome.passed else 1


def run_eval(args) -> int:
    try:
        with open(args.path) as fh:
            text = fh.read()
    except OSError as exc:
        log.error("cannot read %s: %s", args.path, exc)
        return 2
    try:
        code = LinearCode.from_json(text)
    except json.JSONDecodeError as exc:
        log.error("%s: parse error at line %d, column %d: %s", args.path, exc.lineno, exc.colno, exc.msg)
        return 2
    except (KeyError, TypeError, ValueError) as exc:
        log.error("%s: invalid scheme: %s", args.path, exc)
        return 2
    if not 1 <= args.t <= code.n_nodes:
        log.error("need 1 <= t <= N=%d, got t=%d", code.n_nodes, args.t)
        return 2
    report = experiments.eval_scheme(code, args.t)
    _emit(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n", args.out)
    return 0


def main(argv=None) -> int:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    log.propagate = False
    try:
        args = build_parser().parse_args(argv)
        if args.command == "eval":
            return run_eval(args)
        try:
            return run_experiment(args)
        except (KeyError, ValueError) as exc:
            log.error("%s", exc.args[0] if exc.args else exc)
            return 2
    finally:
        log.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
