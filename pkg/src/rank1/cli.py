"""Command-line front end.

    rank1 build | theorem1 | nonrecurrence | oracle | check  [options]

Options may also come from an INI file (``--config``, section ``[rank1]``,
keys named like the long options); flags given on the command line win.
Errors are reported on stderr as one JSON object and mapped to exit codes.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .conjugator import DEFAULT_MAX_WINDOW, InvolutionR, build_plan
from .errors import ConfigInvalid, EmptyCheckpoint, GapConditionFailed, Rank1Error
from .experiments import (checkpoints, gap_condition_check, nonrecurrence_run, oracle_run,
                          theorem1_run)
from .sequences import SequencePair
from .tower import ConstructionParams, TowerSchedule, build_schedule

log = logging.getLogger("rank1")

COMMANDS = ("build", "theorem1", "nonrecurrence", "oracle", "check")
SWAP_AUDIT_LIMIT = 100_000

DEFAULTS = {
    "preset": "halving",
    "p": "n^2",
    "q": "n^3",
    "jmax": 4,
    "spacer_margin": "checkpoint",
    "stretch": "",
    "modification_stages": "",
    "cap": 2000,
    "secondary_cap": 100_000,
    "max_window": DEFAULT_MAX_WINDOW,
    "mc_samples": 100_000,
    "events": 10,
    "seed": 0,
    "out": None,
    "precision": 20,
    "workers": 1,
    "schedule": None,
    "n_max": 200,
    "floor_stage": 2,
    "e_floor": 1,
    "re_floor": 3,
    "probe_max": 1000,
    "swaps": None,
}
INT_KEYS = {"jmax", "cap", "secondary_cap", "max_window", "mc_samples", "events", "seed",
            "precision", "workers", "n_max", "floor_stage", "e_floor", "re_floor", "probe_max"}


@dataclass
class RunConfig:
    command: str
    preset: str = "halving"
    p: str = "n^2"
    q: str = "n^3"
    jmax: int = 4
    spacer_margin: str = "checkpoint"
    stretch: dict = field(default_factory=dict)
    modification_stages: frozenset = frozenset()
    cap: int = 2000
    secondary_cap: int = 100_000
    max_window: int = DEFAULT_MAX_WINDOW
    mc_samples: int = 100_000
    events: int = 10
    seed: int = 0
    out: str | None = None
    precision: int = 20
    workers: int = 1
    schedule: str | None = None
    n_max: int = 200
    floor_stage: int = 2
    e_floor: int = 1
    re_floor: int = 3
    probe_max: int = 1000
    swaps: bool | None = None

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigInvalid(f"unknown command {self.command!r}")
        for key in ("jmax", "cap", "secondary_cap", "max_window", "mc_samples", "events",
                    "workers", "n_max", "floor_stage", "probe_max"):
            if getattr(self, key) < 1:
                raise ConfigInvalid(f"{key} must be positive")
        if not 1 <= self.precision <= 50:
            raise ConfigInvalid("precision must lie in 1..50")
        if self.seed < 0:
            raise ConfigInvalid("seed must be nonnegative")
        return self


def _parse_stretch(text: str) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in str(text).split(","))):
        try:
            j, k = item.split(":")
            out[int(j)] = int(k)
        except ValueError as exc:
            raise ConfigInvalid(f"bad stretch entry {item!r}, expected stage:factor") from exc
    return out


def _parse_stages(text: str) -> frozenset:
    try:
        return frozenset(int(s) for s in str(text).split(",") if s.strip())
    except ValueError as exc:
        raise ConfigInvalid(f"bad stage list {text!r}") from exc


def _read_ini(path: str) -> dict:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigInvalid(f"cannot read config {path}")
    if not parser.has_section("rank1"):
        raise ConfigInvalid(f"{path} has no [rank1] section")
    out = {}
    for key, value in parser.items("rank1"):
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigInvalid(f"unknown config key {key!r}")
        out[key] = value
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigInvalid(message)


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rank1", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="INI file with a [rank1] section")
    ap.add_argument("--preset", choices=("halving", "katok"))
    ap.add_argument("--p", help="sequence p: polynomial in n, 'poly:c0,c1,..' or 'mild'")
    ap.add_argument("--q", help="sequence q, same forms as --p")
    ap.add_argument("--jmax", type=int)
    ap.add_argument("--spacer-margin", choices=("minimal", "checkpoint"))
    ap.add_argument("--stretch", help="top-spacer stretch factors, e.g. '4:2'")
    ap.add_argument("--modification-stages", help="comma-separated Katok stages")
    ap.add_argument("--schedule", help="schedule JSON written by 'build'")
    ap.add_argument("--cap", type=int, help="per-term cap")
    ap.add_argument("--secondary-cap", type=int)
    ap.add_argument("--max-window", type=int)
    ap.add_argument("--mc-samples", type=int)
    ap.add_argument("--events", type=int, help="oracle: number of random events")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--precision", type=int, help="decimal digits in rendered floats")
    ap.add_argument("--workers", type=int, help="threads for the Monte-Carlo oracle")
    ap.add_argument("--n-max", type=int)
    ap.add_argument("--floor-stage", type=int)
    ap.add_argument("--e-floor", type=int)
    ap.add_argument("--re-floor", type=int)
    ap.add_argument("--probe-max", type=int)
    ap.add_argument("--swaps", action=argparse.BooleanOptionalAction, default=None,
                    help="include every block swap in the build audit")
    return ap


def config_from_args(argv: list[str] | None = None) -> RunConfig:
    ns = make_parser().parse_args(argv)
    merged = dict(DEFAULTS)
    if ns.config:
        merged.update(_read_ini(ns.config))
    for key in DEFAULTS:
        value = getattr(ns, key, None)
        if value is not None:
            merged[key] = value
    try:
        for key in INT_KEYS:
            merged[key] = int(merged[key])
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from exc
    if isinstance(merged["swaps"], str):
        merged["swaps"] = merged["swaps"].lower() in ("1", "true", "yes", "on")
    merged["stretch"] = _parse_stretch(merged["stretch"])
    merged["modification_stages"] = _parse_stages(merged["modification_stages"])
    return RunConfig(command=ns.command, **merged).validate()


# ---------------------------------------------------------------------------


def _sequences(cfg: RunConfig, schedule: TowerSchedule | None = None) -> SequencePair:
    seq = SequencePair.parse(cfg.p, cfg.q)
    stored = (schedule.meta.get("sequences") if schedule else None)
    if stored and stored != seq.spec:
        raise ConfigInvalid(f"schedule was built for {stored}, not {seq.spec}")
    return seq


def _schedule(cfg: RunConfig) -> tuple[TowerSchedule, SequencePair]:
    if cfg.schedule:
        try:
            data = json.loads(Path(cfg.schedule).read_text())
            # accept a bare schedule or a full 'build' report
            sched = TowerSchedule.from_dict(data.get("schedule", data))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigInvalid(f"cannot load schedule {cfg.schedule}: {exc}") from exc
        stored = sched.meta.get("sequences")
        if stored and cfg.p == DEFAULTS["p"] and cfg.q == DEFAULTS["q"]:
            cfg.p, cfg.q = stored["p"], stored["q"]
        return sched, _sequences(cfg, sched)
    seq = _sequences(cfg)
    params = ConstructionParams(preset=cfg.preset, spacer_margin=cfg.spacer_margin,
                                stretch=cfg.stretch, modification_stages=cfg.modification_stages)
    return build_schedule(params, seq, cfg.jmax), seq


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def cmd_build(cfg: RunConfig) -> int:
    sched, seq = _schedule(cfg)
    plan = build_plan(sched, seq, max_window=cfg.max_window)
    n_swaps = sum(p.n_swaps for p in plan.perms.values())
    swaps = cfg.swaps if cfg.swaps is not None else n_swaps <= SWAP_AUDIT_LIMIT
    try:
        cps = [{"j": c.j, "N": str(c.N), "parity": c.parity, "exceeds_jh": c.exceeds_jh,
                "prev_below_h": c.prev_below_h} for c in checkpoints(sched, seq)]
    except EmptyCheckpoint as exc:
        cps = {"error": "EmptyCheckpoint", "message": str(exc)}
    report = {
        "schedule": sched.to_dict(),
        "heights": [str(h) for h in sched.heights],
        "digest": sched.digest(),
        "plan": plan.to_dict(include_swaps=swaps),
        "checkpoints": cps,
    }
    _emit(_dump(report), cfg.out)
    return 0


def _summary(summary: dict, cfg: RunConfig):
    # CSV owns stdout when no --out is given
    stream = sys.stdout if cfg.out else sys.stderr
    stream.write(_dump(summary))


def cmd_theorem1(cfg: RunConfig) -> int:
    sched, seq = _schedule(cfg)
    plan = build_plan(sched, seq, max_window=cfg.max_window)
    trace = theorem1_run(sched, plan, seq, per_term_cap=cfg.cap,
                         secondary_cap=cfg.secondary_cap, keep_terms=False)
    _emit(trace.to_csv(cfg.precision), cfg.out)
    _summary(trace.summary(cfg.precision), cfg)
    return 0


def cmd_nonrecurrence(cfg: RunConfig) -> int:
    sched, _ = _schedule(cfg)
    try:
        R = InvolutionR(sched, cfg.floor_stage, cfg.e_floor, cfg.re_floor)
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from exc
    trace = nonrecurrence_run(sched, R, cfg.n_max)
    _emit(trace.to_csv(cfg.precision), cfg.out)
    _summary(trace.summary(cfg.precision), cfg)
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    sched, _ = _schedule(cfg)
    log.info("oracle seed %d, %d samples per event", cfg.seed, cfg.mc_samples)
    report = oracle_run(sched, cfg.events, cfg.mc_samples, cfg.seed, cfg.workers,
                        precision=cfg.precision)
    _emit(_dump(report), cfg.out)
    return 0 if report["all_agree"] else 1


def cmd_check(cfg: RunConfig) -> int:
    report = gap_condition_check(_sequences(cfg), cfg.probe_max)
    _emit(_dump(report.to_dict()), cfg.out)
    if not report.passed:
        raise GapConditionFailed("differences of p or q do not tend to infinity")
    return 0


HANDLERS = {"build": cmd_build, "theorem1": cmd_theorem1, "nonrecurrence": cmd_nonrecurrence,
            "oracle": cmd_oracle, "check": cmd_check}


def _fail(exc: Exception, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("RANK1_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(argv)
        return HANDLERS[cfg.command](cfg)
    except Rank1Error as exc:
        return _fail(exc, exc.exit_code)
    except MemoryError as exc:
        return _fail(exc, 12)


if __name__ == "__main__":
    sys.exit(main())
