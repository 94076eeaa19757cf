"""Command-line entry points.

Backend wiring comes from a JSON file (--backends) holding one backend config
per role, e.g. {"actor": {...}, "user": {...}, "manager": {...}, "judge": {...},
"extraction": {...}}; each entry follows gateway.backend_config_from_dict.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Any, Optional

from .errors import SceneweaverError
from .evaluation import (
    aggregate,
    arena_matrix,
    judge_actor,
    judge_manager,
    load_arena_verdicts,
    report_to_dict,
)
from .forge.chunking import DEFAULT_BUDGET, chunk_book
from .forge.extract import build_profiles, extract_book, plot_from_dict, plot_to_dict
from .forge.samples import build_smset, format_actor_samples, sample_to_jsonl_line
from .forge.stats import corpus_stats, stats_to_json
from .forge.synthesis import (
    THEMES,
    filter_records,
    generate_synthesis,
    load_records,
    save_records,
)
from .gateway import BackendConfig, BackendKind, backend_config_from_dict, make_backend
from .model import load_trajectory, role_profile_from_dict, role_profile_to_dict
from .protocol import Mode, audit_trajectory
from .simulation import EpisodeSettings, load_seed_set, run_bench

log = logging.getLogger(__name__)


def _load_backends_file(path: Optional[str]) -> dict[str, BackendConfig]:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    return {name: backend_config_from_dict(entry) for name, entry in data.items()}


def _backend(backends: dict[str, BackendConfig], name: str) -> BackendConfig:
    if name in backends:
        return backends[name]
    log.warning("no %r backend configured; using an empty scripted backend", name)
    return BackendConfig(kind=BackendKind.SCRIPTED)


def _mode(value: str) -> Mode:
    return Mode(value.lower())


def _write_jsonl(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for line in lines:
            handle.write(line + "\n")


def _cmd_simulate(args: argparse.Namespace) -> int:
    backends = _load_backends_file(args.backends)
    settings = EpisodeSettings(
        horizon=args.horizon,
        actor_backend=_backend(backends, "actor"),
        user_backend=_backend(backends, "user"),
        manager_backend=_backend(backends, "manager"),
        actor_mode=_mode(args.actor_mode),
        manager_mode=_mode(args.manager_mode),
        persist_pick_speaker=args.persist_pick_speaker,
    )
    configs = load_seed_set(args.seeds, settings)
    result = run_bench(configs, args.out, parallelism=args.parallel)
    ok = result.manifest["ok"]
    failed = result.manifest["failed"]
    print(f"simulated {len(configs)} episodes: {ok} ok, {failed} failed -> {args.out}")
    return 0 if failed == 0 else 1


def _cmd_forge_chunk(args: argparse.Namespace) -> int:
    with open(args.infile, "r", encoding="utf-8") as handle:
        text = handle.read()
    chunks = chunk_book(text, budget=args.budget, book_id=args.book_id)
    lines = [
        json.dumps(
            {
                "book_id": c.book_id,
                "index": c.index,
                "token_estimate": c.token_estimate,
                "oversize": c.oversize,
                "chapter_spans": list(c.chapter_spans),
                "text": c.text,
            },
            ensure_ascii=False,
        )
        for c in chunks
    ]
    _write_jsonl(args.out, lines)
    print(f"wrote {len(chunks)} chunks -> {args.out}")
    return 0


def _cmd_forge_extract(args: argparse.Namespace) -> int:
    backends = _load_backends_file(args.backends)
    backend = make_backend(_backend(backends, "extraction"))
    from .forge.chunking import Chunk

    chunks = []
    with open(args.chunks, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                entry = json.loads(line)
                chunks.append(
                    Chunk(
                        book_id=entry.get("book_id", ""),
                        index=entry["index"],
                        text=entry["text"],
                        token_estimate=entry.get("token_estimate", 0),
                        chapter_spans=tuple(tuple(s) for s in entry.get("chapter_spans", [])),
                        oversize=entry.get("oversize", False),
                    )
                )
    plots = extract_book(chunks, backend, book_title=args.book_title, author=args.author)
    _write_jsonl(args.out, [json.dumps(plot_to_dict(p), ensure_ascii=False) for p in plots])
    print(f"extracted {len(plots)} plots -> {args.out}")
    return 0


def _cmd_forge_profiles(args: argparse.Namespace) -> int:
    backends = _load_backends_file(args.backends)
    backend = make_backend(_backend(backends, "extraction"))
    plots = []
    with open(args.plots, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                plots.append(plot_from_dict(json.loads(line)))
    profiles = build_profiles(plots, backend, book_title=args.book_title)
    _write_jsonl(
        args.out,
        [json.dumps(role_profile_to_dict(p), ensure_ascii=False) for p in profiles],
    )
    print(f"built {len(profiles)} profiles -> {args.out}")
    return 0


def _cmd_forge_synthesize(args: argparse.Namespace) -> int:
    backends = _load_backends_file(args.backends)
    backend = make_backend(_backend(backends, "synthesis"))
    theme = args.theme
    if theme not in THEMES:
        print(f"unknown theme {theme!r}; choose from: {', '.join(THEMES)}", file=sys.stderr)
        return 2
    existing: set[str] = set()
    records = []
    rejected = 0
    for _ in range(args.count):
        try:
            record = generate_synthesis(theme, THEMES[theme], existing, backend)
        except SceneweaverError as exc:
            log.warning("record rejected: %s", exc)
            rejected += 1
            continue
        existing.add(record.main_profile.name)
        records.append(record)
    save_records(records, args.out)
    print(f"synthesized {len(records)} records ({rejected} rejected) -> {args.out}")
    return 0


def _cmd_forge_smset(args: argparse.Namespace) -> int:
    backends = _load_backends_file(args.backends)
    backend = make_backend(_backend(backends, "reason"))
    records = load_records(args.records)
    accepted, rejections = filter_records(records)
    samples = [build_smset(record, backend) for record in accepted]
    _write_jsonl(args.out, [sample_to_jsonl_line(s) for s in samples])
    print(
        f"built {len(samples)} manager samples ({len(rejections)} records rejected) -> {args.out}"
    )
    return 0


def _cmd_forge_format_actor(args: argparse.Namespace) -> int:
    samples = []
    if args.records:
        for record in load_records(args.records):
            samples.extend(format_actor_samples(record))
    if args.plots:
        profiles = {}
        if args.profiles:
            with open(args.profiles, "r", encoding="utf-8") as handle:
                for line in handle:
                    if line.strip():
                        profile = role_profile_from_dict(json.loads(line))
                        profiles[profile.name] = profile
        with open(args.plots, "r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    plot = plot_from_dict(json.loads(line))
                    samples.extend(format_actor_samples(plot, profiles))
    _write_jsonl(args.out, [sample_to_jsonl_line(s) for s in samples])
    print(f"formatted {len(samples)} actor samples -> {args.out}")
    return 0


def _load_trajdir(trajdir: str):
    paths = sorted(
        os.path.join(trajdir, name) for name in os.listdir(trajdir) if name.endswith(".traj")
    )
    return [load_trajectory(path) for path in paths]


def _cmd_eval(args: argparse.Namespace) -> int:
    if args.which == "arena":
        matrix = arena_matrix(load_arena_verdicts(args.verdicts))
        print(matrix.to_text())
        return 0
    backends = _load_backends_file(args.judge)
    backend = make_backend(_backend(backends, "judge"))
    trajectories = _load_trajdir(args.trajdir)
    judge = judge_actor if args.which == "actor" else judge_manager
    reports = []
    failures = 0
    for trajectory in trajectories:
        try:
            reports.append(judge(trajectory, backend, repeats=args.repeats))
        except SceneweaverError as exc:
            log.warning("judging failed: %s", exc)
            failures += 1
    if args.out and reports:
        _write_jsonl(
            args.out, [json.dumps(report_to_dict(r), ensure_ascii=False) for r in reports]
        )
    if reports:
        agg = aggregate(reports)
        for metric, ma in agg.metrics.items():
            print(f"{metric:<34}{ma.cell}")
        print(f"{'overall':<34}{agg.overall:.2f}")
    print(f"judged {len(reports)} trajectories, {failures} failures")
    return 0 if failures == 0 else 1


def _cmd_stats(args: argparse.Namespace) -> int:
    items: list[Any] = []
    with open(args.infile, "r", encoding="utf-8") as handle:
        raw = handle.read()
    entries = (
        json.loads(raw)
        if raw.lstrip().startswith("[")
        else [json.loads(line) for line in raw.splitlines() if line.strip()]
    )
    from .forge.samples import ManagerSample
    from .forge.synthesis import record_from_dict

    for entry in entries:
        if "main_profile" in entry:
            items.append(record_from_dict(entry))
        elif "messages" in entry and entry.get("messages") and "role" in entry["messages"][0]:
            items.append(
                ManagerSample(
                    messages=tuple((m["role"], m["content"]) for m in entry["messages"]),
                    flags=tuple(entry.get("flags", ())),
                )
            )
        elif "first_sentence" in entry:
            items.append(plot_from_dict(entry))
        else:
            raise SceneweaverError(f"unrecognized stats input record: {list(entry)[:5]}")
    report = corpus_stats(items)
    print(report.to_text())
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as handle:
            handle.write(stats_to_json(report) + "\n")
    return 0


def _cmd_audit(args: argparse.Namespace) -> int:
    trajectory = load_trajectory(args.traj)
    verdict = audit_trajectory(trajectory, _mode(args.mode))
    if verdict.ok:
        print(f"{args.traj}: ok")
        return 0
    for violation in verdict.violations:
        step = f" at step {violation.step}" if violation.step is not None else ""
        print(f"{violation.code.value}{step}: {violation.message}")
    return 1


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    backends = _load_backends_file(args.backends)
    settings = EpisodeSettings(
        horizon=args.horizon,
        actor_backend=_backend(backends, "actor"),
        user_backend=_backend(backends, "user"),
        manager_backend=_backend(backends, "manager"),
        actor_mode=_mode(args.actor_mode),
        manager_mode=_mode(args.manager_mode),
    )
    app = create_app(settings, trajectory_dir=args.trajectory_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sceneweaver")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a seed set to trajectories")
    sim.add_argument("--seeds", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--horizon", type=int, default=20)
    sim.add_argument("--parallel", type=int, default=1)
    sim.add_argument("--actor-mode", default="enhance", choices=["basic", "enhance"])
    sim.add_argument("--manager-mode", default="enhance", choices=["basic", "enhance"])
    sim.add_argument("--persist-pick-speaker", action="store_true")
    sim.add_argument("--backends", help="JSON file of backend configs")
    sim.set_defaults(func=_cmd_simulate)

    forge = sub.add_parser("forge", help="dataset construction stages")
    forge_sub = forge.add_subparsers(dest="stage", required=True)

    chunk = forge_sub.add_parser("chunk")
    chunk.add_argument("--in", dest="infile", required=True)
    chunk.add_argument("--out", required=True)
    chunk.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    chunk.add_argument("--book-id", default="")
    chunk.set_defaults(func=_cmd_forge_chunk)

    extract = forge_sub.add_parser("extract")
    extract.add_argument("--chunks", required=True)
    extract.add_argument("--out", required=True)
    extract.add_argument("--backends")
    extract.add_argument("--book-title", default="")
    extract.add_argument("--author", default="")
    extract.set_defaults(func=_cmd_forge_extract)

    profiles = forge_sub.add_parser("profiles")
    profiles.add_argument("--plots", required=True)
    profiles.add_argument("--out", required=True)
    profiles.add_argument("--backends")
    profiles.add_argument("--book-title", default="")
    profiles.set_defaults(func=_cmd_forge_profiles)

    synthesize = forge_sub.add_parser("synthesize")
    synthesize.add_argument("--theme", required=True)
    synthesize.add_argument("--count", type=int, default=1)
    synthesize.add_argument("--out", required=True)
    synthesize.add_argument("--backends")
    synthesize.set_defaults(func=_cmd_forge_synthesize)

    smset = forge_sub.add_parser("smset")
    smset.add_argument("--records", required=True)
    smset.add_argument("--out", required=True)
    smset.add_argument("--backends")
    smset.set_defaults(func=_cmd_forge_smset)

    format_actor = forge_sub.add_parser("format-actor")
    format_actor.add_argument("--records")
    format_actor.add_argument("--plots")
    format_actor.add_argument("--profiles")
    format_actor.add_argument("--out", required=True)
    format_actor.set_defaults(func=_cmd_forge_format_actor)

    evaluate = sub.add_parser("eval", help="judge trajectories or build arenas")
    eval_sub = evaluate.add_subparsers(dest="which", required=True)
    for which in ("actor", "manager"):
        j = eval_sub.add_parser(which)
        j.add_argument("--trajdir", required=True)
        j.add_argument("--judge", required=True, help="JSON backend config file")
        j.add_argument("--out")
        j.add_argument("--repeats", type=int, default=1)
        j.set_defaults(func=_cmd_eval, which=which)
    arena = eval_sub.add_parser("arena")
    arena.add_argument("--verdicts", required=True)
    arena.set_defaults(func=_cmd_eval, which="arena")

    stats = sub.add_parser("stats", help="corpus statistics")
    stats.add_argument("--in", dest="infile", required=True)
    stats.add_argument("--json-out")
    stats.set_defaults(func=_cmd_stats)

    audit = sub.add_parser("audit", help="replay a trajectory through the rules")
    audit.add_argument("--traj", required=True)
    audit.add_argument("--mode", default="basic", choices=["basic", "enhance"])
    audit.set_defaults(func=_cmd_audit)

    serve = sub.add_parser("serve", help="run the session service")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--backends")
    serve.add_argument("--horizon", type=int, default=20)
    serve.add_argument("--actor-mode", default="enhance", choices=["basic", "enhance"])
    serve.add_argument("--manager-mode", default="enhance", choices=["basic", "enhance"])
    serve.add_argument("--trajectory-dir")
    serve.add_argument("--ui-dir", help="serve a built browser client under /ui")
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SceneweaverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
