"""Command-line client for the pipeline service.

Every subcommand is a single HTTP request. With `--server URL` it talks to
a running service instance; otherwise it mounts the service in-process
over an ASGI transport, so batch usage needs no server at all. Either way
the request/response shapes are identical.
"""

from __future__ import annotations

import argparse
import asyncio
import sys
from dataclasses import replace

import httpx

from . import __version__
from .service.app import create_app
from .synthgen import SynthConfig, parse_config_file
from .tensorio import format_real
from .thresholding import THRESHOLD_NAMES

_SYNTH_FIELDS = (
    "height",
    "width",
    "channels",
    "n_normal_mon",
    "n_normal_eval",
    "n_anomalous",
    "noise_sigma",
    "bump_amplitude",
    "bump_height",
    "bump_width",
    "seed",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mondet",
        description="Model-of-normality anomaly detection over feature tensors.",
    )
    parser.add_argument("--version", action="version", version=f"mondet {__version__}")
    parser.add_argument(
        "--server",
        metavar="URL",
        default=None,
        help="send requests to a running service instead of running in-process",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="flat key=value config file; flags win over file")
    p.add_argument("--seed", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--channels", type=int)
    p.add_argument("--n-normal-mon", type=int, dest="n_normal_mon")
    p.add_argument("--n-normal-eval", type=int, dest="n_normal_eval")
    p.add_argument("--n-anomalous", type=int, dest="n_anomalous")
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--bump-amplitude", type=float, dest="bump_amplitude")
    p.add_argument("--bump-height", type=int, dest="bump_height")
    p.add_argument("--bump-width", type=int, dest="bump_width")

    p = sub.add_parser("build-mon", help="build the model of normality and thresholds")
    p.add_argument("--manifest", required=True)
    p.add_argument("--artifact", required=True, help="output artifact directory")

    p = sub.add_parser("score", help="score evaluate rows against an artifact")
    p.add_argument("--artifact", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output score CSV")
    p.add_argument("--threads", default="1", help="worker count, or 'auto'")

    p = sub.add_parser("evaluate", help="write the evaluation report and scatter CSV")
    p.add_argument("--scores", help="score CSV from a previous run")
    p.add_argument("--artifact")
    p.add_argument("--manifest")
    p.add_argument("--out", required=True, help="output report CSV")
    p.add_argument("--scatter", required=True, help="output scatter CSV")

    return parser


def _synth_payload(args: argparse.Namespace) -> dict:
    config = SynthConfig()
    if args.config:
        config = SynthConfig.from_mapping(parse_config_file(args.config))
    overrides = {
        name: getattr(args, name) for name in _SYNTH_FIELDS if getattr(args, name) is not None
    }
    config = replace(config, **overrides)
    payload = {name: getattr(config, name) for name in _SYNTH_FIELDS}
    payload["out_dir"] = args.out
    return payload


def _request(args: argparse.Namespace, parser: argparse.ArgumentParser) -> tuple[str, dict]:
    if args.subcommand == "synth":
        return "/synth", _synth_payload(args)
    if args.subcommand == "build-mon":
        return "/build-mon", {"manifest": args.manifest, "artifact": args.artifact}
    if args.subcommand == "score":
        if args.threads == "auto":
            threads = None
        else:
            try:
                threads = int(args.threads)
            except ValueError:
                parser.error(f"--threads must be an integer or 'auto', got {args.threads!r}")
        return "/score", {
            "artifact": args.artifact,
            "manifest": args.manifest,
            "out": args.out,
            "threads": threads,
        }
    if args.subcommand == "evaluate":
        from_csv = args.scores is not None
        from_artifact = args.artifact is not None and args.manifest is not None
        if from_csv == from_artifact:
            parser.error("provide either --scores, or --artifact with --manifest")
        return "/evaluate", {
            "report_out": args.out,
            "scatter_out": args.scatter,
            "scores": args.scores,
            "artifact": args.artifact,
            "manifest": args.manifest,
        }
    raise AssertionError(f"unhandled subcommand {args.subcommand}")


def _post(server: str | None, path: str, payload: dict) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.post(path, json=payload)

    async def in_process() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://mondet.internal", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(in_process())


def _print_result(subcommand: str, body: dict) -> None:
    if subcommand == "synth":
        print(f"wrote {body['n_tensors']} tensor files and {body['manifest_csv']}")
    elif subcommand == "build-mon":
        dims = f"{body['height']}x{body['width']}x{body['channels']}"
        print(f"model of normality: N={body['n']} dims={dims} (calibration N={body['n_calibration']})")
        for name in THRESHOLD_NAMES:
            print(f"  {name} = {format_real(body['thresholds'][name])}")
        print(f"artifact written to {body['artifact']}")
    elif subcommand == "score":
        mean = body["seconds_per_image_mean"]
        std = body["seconds_per_image_std"]
        print(f"scored {body['n_scored']} images -> {body['out']}")
        print(f"per-image {mean:.6f}±{std:.6f} (mean±std) seconds, post-feature stage")
    elif subcommand == "evaluate":
        for name in THRESHOLD_NAMES:
            print(f"  {name} auc = {format_real(body['per_threshold_auc'][name])}")
        print(f"max_auc = {format_real(body['max_auc'])}")
        print(f"sweep_auc_max = {format_real(body['sweep_auc_max'])}")
        print(f"sweep_auc_mean = {format_real(body['sweep_auc_mean'])}")
        print(f"report -> {body['report']}")
        print(f"scatter -> {body['scatter']}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    path, payload = _request(args, parser)
    try:
        response = _post(args.server, path, payload)
    except httpx.HTTPError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if response.status_code != 200:
        try:
            body = response.json()
            name = body.get("error", f"HTTP {response.status_code}")
            detail = body.get("detail", response.text)
        except ValueError:
            name, detail = f"HTTP {response.status_code}", response.text
        print(f"error: {name}: {detail}", file=sys.stderr)
        return 1
    _print_result(args.subcommand, response.json())
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
