"""Command-line entry point: ``weakcoupling <experiment> [--config F] [--set k=v ...]``.

Every run writes ``<name>.csv`` (plus any extra CSVs), ``<name>.json`` with
the full report, and ``<name>.manifest.json`` recording the resolved config,
its content hash and the sha256 of every output. ``rerun`` re-executes a
manifest and compares output hashes.
"""

from __future__ import annotations

import argparse
import importlib
import json
import os
import sys
import time

from . import __version__
from . import config as cfgmod
from . import experiments

MANIFEST_SCHEMA = 1


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def run(name: str, cfg: dict, out_dir: str):
    """Run a resolved config and write outputs; returns (report, manifest dict)."""
    exp = experiments.get(name)
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    report, extra = exp.run(cfg)
    runtime = time.perf_counter() - t0
    report.meta["config_hash"] = cfgmod.content_hash(cfg)
    files = {f"{name}.csv": report.to_csv(), f"{name}.json": report.to_json()}
    for stem, text in extra.items():
        files[f"{name}-{stem}.csv"] = text
    outputs = {}
    for fname, text in files.items():
        path = os.path.join(out_dir, fname)
        _write(path, text)
        outputs[fname] = cfgmod.file_hash(path)
    manifest = {"schema_version": MANIFEST_SCHEMA, "experiment": name, "version": __version__,
                "config": cfg, "input_hash": cfgmod.content_hash({"experiment": name, "config": cfg}),
                "outputs": outputs, "checks": {k: bool(v) for k, v in report.checks.items()},
                "passed": report.passed, "runtime_s": round(runtime, 3)}
    _write(os.path.join(out_dir, f"{name}.manifest.json"),
           json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return report, manifest


def _load_plugins(mods):
    for m in mods or ():
        importlib.import_module(m)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weakcoupling",
                                description="Weak-coupling kinetic limit experiments.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--plugin", action="append", default=[],
                   help="import MODULE before dispatch (it may register experiments)")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True
    ls = sub.add_parser("list", help="list experiments")
    ls.add_argument("--json", action="store_true", help="machine-readable output")
    sub.add_parser("defaults", help="print the defaults table as YAML")
    rr = sub.add_parser("rerun", help="re-execute a run manifest and compare output hashes")
    rr.add_argument("manifest")
    rr.add_argument("--output-dir", default=None)
    for exp in experiments.list_experiments():
        sp = sub.add_parser(exp.name, help=exp.description, description=exp.description)
        sp.add_argument("--config", help="YAML key-tree with overrides of the defaults")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (dotted path, YAML value); repeatable")
        sp.add_argument("--output-dir", default=None,
                        help=f"output directory (default ${cfgmod.OUTPUT_ENV} or ./weakcoupling-out)")
        sp.add_argument("--quiet", action="store_true")
    return p


def _pre_plugins(argv):
    mods = []
    for i, a in enumerate(argv):
        if a == "--plugin" and i + 1 < len(argv):
            mods.append(argv[i + 1])
        elif a.startswith("--plugin="):
            mods.append(a.split("=", 1)[1])
    return mods


def _report_failure(report, err):
    for name in report.failed_checks():
        print(f"FAILED check: {name}", file=err)


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        _load_plugins(_pre_plugins(argv))
    except ImportError as exc:
        print(f"usage error: cannot import plugin: {exc}", file=err)
        return 2
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "list":
        items = [{"name": e.name, "description": e.description} for e in experiments.list_experiments()]
        if args.json:
            out.write(json.dumps(items, indent=2) + "\n")
        else:
            for it in items:
                out.write(f"{it['name']:14s} {it['description']}\n")
        return 0
    if args.command == "defaults":
        out.write(cfgmod.defaults_yaml())
        return 0
    if args.command == "rerun":
        with open(args.manifest) as fh:
            man = json.load(fh)
        name = man["experiment"]
        dest = args.output_dir or os.path.join(os.path.dirname(os.path.abspath(args.manifest)), "rerun")
        try:
            cfgmod.validate(name, man["config"])
            _, new = run(name, man["config"], dest)
        except (cfgmod.ConfigError, KeyError) as exc:
            print(f"usage error: {exc}", file=err)
            return 2
        bad = [f for f, h in man["outputs"].items() if new["outputs"].get(f) != h]
        for f in man["outputs"]:
            out.write(f"{'identical' if f not in bad else 'DIFFERS  '} {f}\n")
        return 0 if not bad else 1

    try:
        user = cfgmod.load_file(args.config) if args.config else {}
        cfg = cfgmod.resolve(args.command, user, args.overrides)
    except (cfgmod.ConfigError, OSError) as exc:
        print(f"usage error: {exc}", file=err)
        return 2
    out_dir = args.output_dir or cfgmod.default_output_dir()
    try:
        report, _ = run(args.command, cfg, out_dir)
    except ValueError as exc:
        print(f"usage error: {exc}", file=err)
        return 2
    if not args.quiet:
        out.write(report.summary() + "\n")
        out.write(f"outputs in {out_dir}\n")
    if not report.passed:
        _report_failure(report, err)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
