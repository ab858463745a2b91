"""Command line: ``multibath <kind> --config <path> [--check] [--out dir] [--sweep key=v1,v2]``.

``multibath replay <manifest.json>`` reruns a recorded experiment into a fresh directory and
compares output checksums.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .config import KINDS, ConfigError, ExperimentConfig, from_text, load, parse_value
from .pipelines import PIPELINES, PipelineResult, _jsonable, fmt, write_csv

log = logging.getLogger("multibath")


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _seeds(cfg: ExperimentConfig) -> dict:
    out = {}
    for key in ("sim.seed", "potential.seed_disorder", "spin.seed0", "spin.seed", "rank.seed", "lsi.seed"):
        v = cfg.get(key)
        if v is not None:
            out[key] = v
    return out


def write_manifest(out: Path, cfg: ExperimentConfig, res: PipelineResult, wall: float, extra=None) -> dict:
    man = dict(kind=cfg.kind, version=__version__, config=cfg.to_text(), seeds={**_seeds(cfg), **res.seeds},
               wall_clock_s=wall, started=time.strftime("%Y-%m-%dT%H:%M:%S"),
               outputs={Path(p).name: sha256(p) for p in res.files.values()},
               checks=[dict(name=c.name, passed=c.passed, detail=c.detail) for c in res.checks])
    if extra:
        man.update(extra)
    (out / "manifest.json").write_text(json.dumps(_jsonable(man), indent=2, sort_keys=True) + "\n")
    return man


def run(cfg: ExperimentConfig, out: Path, compare=None) -> PipelineResult:
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    fn = PIPELINES[cfg.kind]
    try:
        res = fn(cfg, out, compare=compare) if cfg.kind == "simulate" else fn(cfg, out)
    except ConfigError:
        raise
    except Exception as exc:
        raise RuntimeError(f"{cfg.kind} pipeline failed in {type(exc).__module__}: {exc}") from exc
    write_manifest(out, cfg, res, time.perf_counter() - t0, dict(compare=compare))
    return res


def parse_sweep(spec: str):
    if "=" not in spec:
        raise ConfigError("sweep must look like key=v1,v2,...")
    key, vals = spec.split("=", 1)
    key = key.strip()
    if key == "lambda":
        key = "sim.lambda"
    values = parse_value(vals)
    values = values if isinstance(values, list) else [values]
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        raise ConfigError("sweep values must be numeric", key=key)
    return key, values


def sweep(cfg: ExperimentConfig, key: str, values, out: Path, compare=None):
    """One pipeline run per value in out/<key>=<value>/ plus sweep.csv with the summaries."""
    out.mkdir(parents=True, exist_ok=True)
    rows, results = [], []
    for v in values:
        c = cfg.copy()
        c.set(key, v)
        res = run(c, out / f"{key}={fmt(v)}", compare)
        results.append(res)
        rows.append((v, res.summary))
    cols = sorted({k for _, s in rows for k in s})
    write_csv(out / "sweep.csv", [key] + cols, [[v] + [s.get(k, "") for k in cols] for v, s in rows])
    return rows, results


def replay(manifest_path, out: Path) -> bool:
    man = json.loads(Path(manifest_path).read_text())
    cfg = from_text(man["config"], man["kind"])
    run(cfg, out, man.get("compare"))
    fresh = json.loads((out / "manifest.json").read_text())["outputs"]
    same = True
    for name, digest in sorted(man["outputs"].items()):
        ok = fresh.get(name) == digest
        same &= ok
        print(f"{'same' if ok else 'DIFFERS'} {name}")
    return same


def build_parser():
    ap = argparse.ArgumentParser(prog="multibath", description=__doc__.splitlines()[0])
    ap.add_argument("kind", choices=KINDS + ("replay",))
    ap.add_argument("manifest", nargs="?", help="manifest.json (replay only)")
    ap.add_argument("--config", help="flat section.key = value config file")
    ap.add_argument("--out", help="output directory (default: out.dir from the config)")
    ap.add_argument("--check", action="store_true", help="exit nonzero if any named check fails")
    ap.add_argument("--sweep", help="key=v1,v2,... over a numeric config key")
    ap.add_argument("--compare", choices=("ou-exact",), help="simulate only: compare with exact OU")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.kind == "replay":
            if not args.manifest:
                print("error: replay needs a manifest path", file=sys.stderr)
                return 2
            out = Path(args.out or Path(args.manifest).parent / "replay")
            return 0 if replay(args.manifest, out) else 1
        if not args.config:
            print("error: --config is required", file=sys.stderr)
            return 2
        cfg = load(args.config, args.kind)
        out = Path(args.out or cfg.out_dir)
        if args.sweep:
            key, values = parse_sweep(args.sweep)
            _, results = sweep(cfg, key, values, out, args.compare)
        else:
            results = [run(cfg, out, args.compare)]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    ok = True
    for res in results:
        for c in res.checks:
            print(c.line())
        ok &= res.ok
    print(f"wrote {out}")
    return 0 if (ok or not args.check) else 1


if __name__ == "__main__":
    sys.exit(main())
