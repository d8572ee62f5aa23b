"""Command-line surface: keygen, embed, verify, inspect, sweep, attack, wipe-demo.

Exit codes are a stable contract: 0 verification pass / success, 1
tamper detected, 2 usage error, 3 I/O or file-format error, 4 capacity
or embedding-feasibility error. No command mutates its input file;
outputs always go to --out.
"""

from __future__ import annotations

import argparse
import os
import secrets
import sys

import numpy as np

from . import analysis
from .attacksim import KINDS, AttackSpec, apply_attack
from .container import (
    DEFAULT_CHUNK_LENGTH,
    ROLE_HIDDEN,
    load_container,
    save_container,
)
from .errors import (
    BadSeedLength,
    CoefficientOutOfRange,
    EmptyClassMap,
    EmptyTensor,
    FormatError,
    InsufficientCapacity,
    InvalidChunkLength,
    MalformedGrid,
    MissingEmbedRecords,
    NoEligibleLayers,
    SecretTooLarge,
    ShapeMismatch,
    UnknownLayer,
    UnsupportedVersion,
    WrongLength,
)
from .keying import load_seed_hex
from .marker import ScalingParams, embed_model, records_from_container, verify_model
from .wavelet import wipe_details, wpt_forward

EXIT_PASS = 0
EXIT_TAMPER = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CAPACITY = 4

KEY_ENV = "TENSORSEAL_KEY"

_EPILOG = """exit codes:
  0  success / all layers verified
  1  tamper detected (or no embedding records present)
  2  usage error
  3  I/O or container-format error
  4  capacity or embedding-feasibility error

The key file holds one line: 64 hex characters (32 bytes). Pass it with
--key or point the %s environment variable at it.
""" % KEY_ENV


def _read_seed(args) -> bytes:
    path = args.key or os.environ.get(KEY_ENV)
    if not path:
        raise BadSeedLength(f"no key file: pass --key or set {KEY_ENV}")
    with open(path, "r", encoding="ascii") as f:
        return load_seed_hex(f.read())


def _read_secret(args) -> bytes:
    if getattr(args, "secret_file", None):
        with open(args.secret_file, "rb") as f:
            return f.read()
    if getattr(args, "secret", None):
        return args.secret.encode("utf-8")
    return b""


def cmd_keygen(args) -> int:
    seed = secrets.token_bytes(32)
    with open(args.out, "w", encoding="ascii") as f:
        f.write(seed.hex() + "\n")
    os.chmod(args.out, 0o600)
    print(f"wrote 32-byte key to {args.out} (mode 600)")
    print("keep it private: the key alone locates and re-creates the hidden payload")
    return EXIT_PASS


def cmd_embed(args) -> int:
    seed = _read_seed(args)
    container = load_container(args.model)
    params = ScalingParams(watermark_level=args.level)
    marked = embed_model(container, seed, _read_secret(args), params,
                         chunk_length=args.chunk, max_workers=args.workers)
    save_container(marked, args.out)
    names = [r.layer_name for r in records_from_container(marked)]
    print(f"embedded {len(names)} layer(s): {', '.join(names)}")
    print(f"marked container written to {args.out}")
    return EXIT_PASS


def cmd_verify(args) -> int:
    seed = _read_seed(args)
    container = load_container(args.model)
    expected = _read_secret(args) if (args.secret or args.secret_file) else None
    try:
        report = verify_model(container, seed, expected_secret=expected,
                              max_workers=args.workers)
    except MissingEmbedRecords:
        print("tamper: container carries no embedding records")
        return EXIT_TAMPER

    if args.report == "tabular":
        print("layer_name,hash_match,digest_match,ber")
        for v in report.layers:
            ber = "" if v.ber is None else f"{v.ber:.6f}"
            print(f"{v.layer_name},{str(v.hash_match).lower()},"
                  f"{str(v.digest_match).lower()},{ber}")
    else:
        for v in report.layers:
            ber = "" if v.ber is None else f"  ber {v.ber:.4f}"
            status = "ok" if v.ok else "TAMPERED"
            print(f"layer {v.layer_name}: hash {'ok' if v.hash_match else 'MISMATCH'}, "
                  f"digest {'ok' if v.digest_match else 'MISMATCH'}{ber}  [{status}]")
    if report.overall_verdict:
        print("all layers verified")
        return EXIT_PASS
    print(f"tamper detected in layers: {', '.join(report.failing_layers)}")
    return EXIT_TAMPER


def cmd_inspect(args) -> int:
    container = load_container(args.model)
    if args.report == "tabular":
        print("layer_name,shape,dtype,role,scalars")
        for t in container.layers:
            print(f"{t.name},{'x'.join(map(str, t.shape))},{t.dtype},{t.role_tag},{t.size}")
        return EXIT_PASS
    print(f"container: {args.model}")
    print(f"layers ({len(container.layers)}):")
    for i, t in enumerate(container.layers):
        print(f"  [{i}] {t.name}  shape {t.shape}  {t.dtype}  role={t.role_tag}")
    if container.class_map:
        print(f"class_map ({len(container.class_map)}): {', '.join(container.class_map)}")
    plain = {k: v for k, v in container.metadata.items()
             if not k.startswith("tseal.record.")}
    if plain:
        print("metadata:")
        for k in sorted(plain):
            print(f"  {k}: {plain[k]}")
    records = records_from_container(container)
    if records:
        print(f"embed records ({len(records)}):")
        for r in records:
            print(f"  {r.layer_name}: chunks {r.chunk_plan.chunk_count}x"
                  f"{r.chunk_plan.chunk_length}, level {r.scaling.watermark_level}, "
                  f"delta {r.scaling.delta}, payload {r.payload_bits} bits, "
                  f"digest {r.embed_digest[:16]}..")
    else:
        print("embed records: none")
    return EXIT_PASS


def cmd_sweep(args) -> int:
    rng = np.random.default_rng(args.sweep_seed)
    weights = rng.normal(0.0, 0.05, size=args.size)
    levels = sorted(int(x) for x in args.levels.split(","))
    chunk_lengths = [int(x) for x in args.chunks.split(",")]
    points = analysis.sweep_distortion(weights, levels=levels,
                                       chunk_lengths=chunk_lengths,
                                       rng_seed=args.sweep_seed)
    table = analysis.distortion_table(points)
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="ascii") as f:
            f.write(table)
        print(f"sweep table ({len(points)} points) written to {args.out}")
    else:
        sys.stdout.write(table)
    return EXIT_PASS


def cmd_attack(args) -> int:
    container = load_container(args.model)
    targets = tuple(args.layers.split(",")) if args.layers else None
    labels = tuple(args.labels.split(",", 1)) if args.labels else None
    spec = AttackSpec(kind=args.kind, target_layers=targets,
                      magnitude=args.magnitude, fraction=args.fraction,
                      rng_seed=args.rng_seed, labels=labels)
    tampered = apply_attack(container, spec)
    save_container(tampered, args.out)
    print(f"applied {args.kind} -> {args.out}")
    return EXIT_PASS


def cmd_wipe_demo(args) -> int:
    if args.model:
        container = load_container(args.model)
        carriers = [t for t in container.layers if t.role_tag == ROLE_HIDDEN
                    and t.size >= args.chunk]
        if not carriers:
            raise NoEligibleLayers(f"no hidden layer with >= {args.chunk} scalars")
        flat = carriers[0].data.astype(np.float64)
        source = f"layer {carriers[0].name!r}"
    else:
        rng = np.random.default_rng(args.sweep_seed)
        flat = rng.normal(0.0, 0.05, size=4 * args.chunk)
        source = "synthetic Gaussian weights"
    count = min(flat.size // args.chunk, 8)
    chunks = flat[: count * args.chunk].reshape(count, args.chunk)

    grid = wpt_forward(chunks)
    total = float(np.sum(grid.coeffs ** 2))
    detail = float(np.sum(grid.detail_view() ** 2))
    smooth = wipe_details(chunks)
    wipe_err = np.abs(chunks - smooth)

    # Contrast: actually embedding in those same detail bands.
    from .keying import derive_nu, schedule_for_layer
    from .marker import ScalingParams, _detail_space, embed_layer
    from .container import LayerTensor
    from .payload import PAYLOAD_BITS
    rng = np.random.default_rng(args.sweep_seed)
    params = ScalingParams()
    layer = LayerTensor("demo", (chunks.size,), "float64", chunks.reshape(-1))
    schedule = schedule_for_layer(derive_nu(bytes(32)), 0,
                                  _detail_space(layer.size, args.chunk),
                                  params.fragment_count, args.chunk)
    marked, _ = embed_layer(layer, rng.integers(0, 2, PAYLOAD_BITS).astype(np.uint8),
                            schedule, params)
    embed_err = np.abs(marked.data - layer.data)

    print(f"detail sub-bands 17-32 of {source}, {count} chunk(s) of {args.chunk}:")
    print(f"  energy share of detail bands:        {detail / total:.4f}")
    print(f"  zeroing them: max weight change      {wipe_err.max():.6e}")
    print(f"  embedding a payload in them instead: max weight change "
          f"{embed_err.max():.6e}")
    print("embedding touches the same bands a wipe destroys, but only nudges")
    print("scheduled coefficients onto a 1e-4 grid, so the weights barely move")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensorseal",
        description="Embed a keyed fragile watermark in neural-network weight "
                    "containers and verify their integrity.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(p, model=True, key=True, out=False, secret=True):
        if model:
            p.add_argument("--model", required=True, help="input container file")
        if key:
            p.add_argument("--key", help=f"key file (fallback: ${KEY_ENV})")
        if out:
            p.add_argument("--out", required=True, help="output path")
        if secret:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--secret", help="user secret as a UTF-8 string")
            g.add_argument("--secret-file", help="user secret read as raw bytes")
        p.add_argument("--workers", type=int, default=1,
                       help="worker threads for per-layer work (default 1)")

    p = sub.add_parser("keygen", help="generate a fresh 32-byte key file")
    p.add_argument("--out", required=True, help="key file to write")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("embed", help="embed payloads into every eligible layer")
    common(p, out=True)
    p.add_argument("--level", type=int, default=2, choices=(1, 2, 3, 4),
                   help="bits hidden per coefficient (default 2)")
    p.add_argument("--chunk", type=int, default=DEFAULT_CHUNK_LENGTH,
                   help="weights per transform chunk, multiple of 32 (default 8192)")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("verify", help="verify a marked container")
    common(p)
    p.add_argument("--report", choices=("text", "tabular"), default="text")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("inspect", help="print container manifest and embed records")
    common(p, key=False, secret=False)
    p.add_argument("--report", choices=("text", "tabular"), default="text")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("sweep", help="distortion sweep over levels and chunk lengths")
    p.add_argument("--out", default="-", help="CSV output path, or - for stdout")
    p.add_argument("--levels", default="1,2,3,4", help="comma list (default 1,2,3,4)")
    p.add_argument("--chunks", default="4000,8192,12000",
                   help="comma list of chunk lengths; rounded up to multiples of 32")
    p.add_argument("--size", type=int, default=65536,
                   help="synthetic layer size in weights (default 65536)")
    p.add_argument("--sweep-seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("attack", help="apply a tampering simulation to a container")
    common(p, key=False, secret=False, out=True)
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--layers", help="comma list of target layers (default: all hidden)")
    p.add_argument("--magnitude", type=float, default=1e-3)
    p.add_argument("--fraction", type=float, default=1e-3)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--labels", help="class_flip: the two labels to swap, as a,b")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("wipe-demo",
                       help="show that zeroing detail sub-bands barely moves weights")
    p.add_argument("--model", help="use the first eligible layer of this container")
    p.add_argument("--chunk", type=int, default=DEFAULT_CHUNK_LENGTH)
    p.add_argument("--sweep-seed", type=int, default=0)
    p.set_defaults(func=cmd_wipe_demo)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        return args.func(args)
    except MissingEmbedRecords as exc:
        print(f"tamper: {exc}", file=sys.stderr)
        return EXIT_TAMPER
    except (InsufficientCapacity, NoEligibleLayers, SecretTooLarge,
            CoefficientOutOfRange) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (FormatError, UnsupportedVersion, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (BadSeedLength, InvalidChunkLength, WrongLength, ShapeMismatch,
            EmptyTensor, UnknownLayer, EmptyClassMap, MalformedGrid, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(run(sys.argv[1:]))
