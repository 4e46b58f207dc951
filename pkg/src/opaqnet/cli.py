"""Command-line entry point: ``opaqnet verify|enforce|bench|oracle|certify|check-cert|fmt``.

Exit codes: 0 success, 1 error, 2 opacity violation (verify), 3 synthesis failure (enforce).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from . import __version__
from . import baseline, certificates, enforcement, randomized, verifier
from .model import ModelError, NetModel, model_from_dict, serialize
from .stabilizer import kernels
from .stabilizer.pauli import PauliCoefficients
from .unfolding import DEFAULT_TAU_BOUND, DivergenceError, TargetFamily

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2
EXIT_SYNTHESIS = 3

BUNDLED = {"repeater": "repeater.json"}


class CliError(Exception):
    pass


@dataclass
class RunConfig:
    model_path: str
    targets: list = field(default_factory=list)
    epsilon: float = 0.0
    cut: bool = True
    tau_bound: int = DEFAULT_TAU_BOUND
    out: str | None = None
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise CliError(f"epsilon must lie in [0, 1], got {self.epsilon}")


# ---------------------------------------------------------------- helpers


def read_model_bytes(ref: str) -> tuple:
    """``(bytes, display name)`` for a path or a bundled model name."""
    p = Path(ref)
    if p.exists():
        return p.read_bytes(), str(p)
    if ref in BUNDLED:
        return resources.files("opaqnet").joinpath("data", BUNDLED[ref]).read_bytes(), f"<bundled {ref}>"
    raise CliError(f"model file not found: {ref}")


def load(ref: str, overrides=None) -> tuple:
    """Parse a model, applying dictionary ``overrides(d)`` first; returns ``(model, sha256)``."""
    raw, _ = read_model_bytes(ref)
    digest = hashlib.sha256(raw).hexdigest()
    try:
        d = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot parse {ref}: {exc}") from None
    if not isinstance(d, dict):
        raise ModelError("model must be a JSON object")
    if overrides is not None:
        overrides(d)
    try:
        return model_from_dict(d), digest
    except (KeyError, TypeError, AttributeError) as exc:
        raise ModelError(f"malformed model: {exc!r}") from None


def target_family(model: NetModel, specs) -> TargetFamily:
    items = []
    for s in specs or sorted(model.targets):
        if s in model.targets:
            items.append(s)
        else:
            items.append(s.replace("≺", "<"))
    if not items:
        raise CliError("no targets given and the model declares none")
    fam = TargetFamily.from_spec(items, model)
    for p, name in zip(fam.pomsets, fam.names):
        unknown = set(p.labels) - model.observable_alphabet
        if unknown:
            raise CliError(f"target {name!r} uses labels outside the observable alphabet: {sorted(unknown)}")
    return fam


def envelope(command: str, digest: str | None, body: dict) -> dict:
    out = {"tool": "opaqnet", "version": __version__, "command": command}
    if digest is not None:
        out["model_sha256"] = digest
    out["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    out.update(body)
    return out


def dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, ensure_ascii=False) + "\n"


def emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def resolve_jobs(arg) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("OPAQNET_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"OPAQNET_JOBS must be an integer, got {env!r}") from None
    return 1


def config_from(args) -> RunConfig:
    return RunConfig(
        args.model,
        list(args.target or []),
        args.epsilon,
        not args.no_cut,
        args.tau_bound,
        args.out,
        args.seed,
        resolve_jobs(args.jobs),
    )


# ---------------------------------------------------------------- subcommands


def run_verify(cfg: RunConfig) -> int:
    model, digest = load(cfg.model_path)
    fam = target_family(model, cfg.targets)
    rep = verifier.report(model, fam, cfg.epsilon, cut=cfg.cut, tau_bound=cfg.tau_bound)
    body = {"model": model.name or cfg.model_path, "evaluation_cut": cfg.cut, "report": rep.to_json()}
    emit(dump(envelope("verify", digest, body)), cfg.out)
    ok = rep.structural_opaque and rep.epsilon_opaque
    w = rep.worst
    print(
        f"structural_opaque={rep.structural_opaque} max_leakage={rep.max_leakage:.12g}"
        f" worst={w.name if w else '-'} verdict={'opaque' if ok else 'violation'}",
        file=sys.stderr,
    )
    return EXIT_OK if ok else EXIT_VIOLATION


def _enforce_overrides(args):
    def apply(d):
        if args.arch:
            with open(args.arch, encoding="utf-8") as fh:
                d["architecture"] = {**(d.get("architecture") or {}), **json.load(fh)}
        if args.catalog == "none":
            d["architecture"] = {**(d.get("architecture") or {}), "masking_catalog": []}
        for tid in args.uncontrollable or []:
            hits = [t for t in d.get("transitions", []) if t.get("id") == tid]
            if not hits:
                raise CliError(f"--uncontrollable names an unknown transition {tid!r}")
            for t in hits:
                t["controllable"] = False

    return apply


def run_enforce(cfg: RunConfig, args) -> int:
    model, digest = load(cfg.model_path, _enforce_overrides(args))
    if model.architecture is None and not args.arch:
        raise CliError("enforcement needs architecture fields in the model or an --arch file")
    fam = target_family(model, cfg.targets)
    arch = enforcement.ControlledArchitecture.from_model(model)
    res = enforcement.synthesize(arch, fam, cfg.epsilon, args.K, jobs=cfg.jobs)
    audit = envelope("enforce", digest, {"epsilon": cfg.epsilon, "K": args.K, **res.to_json()})
    policy = envelope(
        "enforce", digest, {"success": res.success, "policy": res.policy.to_json() if res.policy else None}
    )
    if cfg.out is None:
        sys.stdout.write(dump(audit))
    else:
        emit(dump(policy), str(Path(cfg.out) / "policy.json"))
        emit(dump(audit), str(Path(cfg.out) / "audit.json"))
    if res.success:
        print(f"policy: {res.policy.describe()} (max leakage {res.report.max_leakage:.6g})", file=sys.stderr)
        return EXIT_OK
    print(f"synthesis failed: {res.reason}", file=sys.stderr)
    return EXIT_SYNTHESIS


def run_bench(args) -> int:
    if args.kernels:
        rows = kernels.benchmark(n=args.qubits, rounds=args.rounds, seed=args.seed)
        for r in rows:
            print(f"{r['kernel']:>7}  n={r['n']}  {r['seconds'] * 1e3:9.2f} ms  x{r['speedup_vs_python']:.2f}")
        if args.out:
            emit(dump(envelope("bench-kernels", None, {"rows": rows})), str(Path(args.out) / "kernels.json"))
        return EXIT_OK
    try:
        ms = [int(x) for x in args.m.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"--m expects a comma-separated list of integers, got {args.m!r}") from None
    if any(m < 0 for m in ms):
        raise CliError("--m values must be nonnegative")
    model, digest = load(args.model)
    records = baseline.bench(model, ms, repeat=args.repeat, min_time=args.min_time)
    csv = baseline.bench_csv(records)
    sys.stdout.write(csv)
    if args.out:
        emit(csv, str(Path(args.out) / "bench.csv"))
        emit(dump(envelope("bench", digest, baseline.bench_plot_data(records))), str(Path(args.out) / "bench_plot.json"))
    if not all(r.agree for r in records):
        print("quotient and interleaving aggregates disagree", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def run_oracle(args) -> int:
    if args.cases < 0 or args.max_qubits < 1:
        raise CliError("--cases must be nonnegative and --max-qubits positive")
    cases = randomized.oracle_suite(args.cases, args.max_qubits, seed=args.seed)
    passed = sum(c.ok for c in cases)
    print(f"{passed}/{len(cases)} pass")
    for i, c in enumerate(cases):
        if not c.ok:
            print(f"case {i} (n={c.n}): {c.detail}", file=sys.stderr)
    failed = len(cases) - passed
    if args.toy_nets:
        rng = random.Random(args.seed)
        bad = 0
        for i in range(args.toy_nets):
            m = model_from_dict(randomized.random_toy_net(rng))
            fam = TargetFamily.from_spec(["all"], m)
            gap = baseline.max_discrepancy(
                baseline.interleaving_aggregate(m, fam), verifier.aggregate(verifier.explore(m, fam))
            )
            if gap > 1e-10:
                bad += 1
                print(f"toy net {i}: quotient/interleaving gap {gap:.3e}", file=sys.stderr)
        print(f"{args.toy_nets - bad}/{args.toy_nets} toy nets agree")
        failed += bad
    return EXIT_OK if failed == 0 else EXIT_ERROR


def _load_policy(path: str, model: NetModel):
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if "policy" in d:
        d = d["policy"]
    if d is None:
        raise CliError(f"{path} holds no policy")
    return enforcement.policy_from_json(d, model)


def run_certify(cfg: RunConfig, args) -> int:
    model, digest = load(cfg.model_path)
    fam = target_family(model, cfg.targets)
    if args.policy:
        pol = _load_policy(args.policy, model)
        rep, _ = enforcement.closed_loop(model, pol).analyze(fam, cfg.epsilon, cut=cfg.cut)
    else:
        rep = verifier.report(model, fam, cfg.epsilon, cut=cfg.cut, tau_bound=cfg.tau_bound)
    certs, zero = [], []
    for v in rep.verdicts:
        c0, c1 = certificates.emit_certificate(v.a0), certificates.emit_certificate(v.a1)
        for c, a in ((c0, v.a0), (c1, v.a1)):
            if not certificates.check_certificate(c, a):  # pragma: no cover - emitter invariant
                raise CliError(f"emitted certificate for {v.name} fails its own check")
        certs += [c0.to_json(), c1.to_json()]
        alpha = None
        if c0.weight > 0 and c1.weight > 0:
            a = certificates.check_zero_leakage(c1, c0)
            alpha = None if a is None else f"{a.numerator}/{a.denominator}"
        zero.append({"obs": v.name, "alpha": alpha})
    out = Path(cfg.out or ".")
    emit(dump(envelope("certify", digest, {"certificates": certs, "zero_leakage": zero})), str(out / "cert.json"))
    emit(dump(envelope("verify", digest, {"model": model.name, "report": rep.to_json()})), str(out / "report.json"))
    for c in certs:
        print(f"{c['observation']} b={c['secret_bit']}: {c['class']} weight {c['weight']}")
    for z in zero:
        print(f"{z['obs']}: zero leakage {'alpha=' + z['alpha'] if z['alpha'] else 'not certified'}")
    return EXIT_OK


def run_check_cert(args) -> int:
    with open(args.cert, encoding="utf-8") as fh:
        cd = json.load(fh)
    with open(args.report, encoding="utf-8") as fh:
        rd = json.load(fh)
    per = {v["obs"]: v for v in rd.get("report", rd).get("per_observation", [])}
    entries = cd.get("certificates", cd if isinstance(cd, list) else [cd])
    bad = 0
    for e in entries:
        cert = certificates.PosteriorCertificate.from_json(e)
        v = per.get(cert.observation)
        if v is None or "omega0" not in v:
            print(f"{cert.observation}: no exact posterior in report", file=sys.stderr)
            bad += 1
            continue
        omega = PauliCoefficients.from_strings(v["interface"], v[f"omega{cert.secret_bit}"])
        try:
            ok = certificates.check_certificate(cert, omega)
        except certificates.CertificateError as exc:
            ok = False
            print(f"{cert.observation}: {exc}", file=sys.stderr)
        print(f"{cert.observation} b={cert.secret_bit}: {'ok' if ok else 'MISMATCH'}")
        bad += not ok
    return EXIT_OK if bad == 0 else EXIT_ERROR


def run_fmt(args) -> int:
    model, _ = load(args.model)
    text = serialize(model)
    if args.check:
        raw, _ = read_model_bytes(args.model)
        same = raw.decode("utf-8") == text
        print("canonical" if same else "not canonical", file=sys.stderr)
        return EXIT_OK if same else EXIT_ERROR
    emit(text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opaqnet", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"opaqnet {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, epsilon=0.0):
        p.add_argument("model", help="model JSON path, or 'repeater' for the bundled case study")
        p.add_argument("--target", action="append", help="target name or chain such as 'req<fail' (repeatable)")
        p.add_argument("--epsilon", type=float, default=epsilon)
        p.add_argument("--no-cut", action="store_true", help="also explore evaluation-cut transitions")
        p.add_argument("--tau-bound", type=int, default=DEFAULT_TAU_BOUND)
        p.add_argument("--out")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, help="worker cap (default: $OPAQNET_JOBS or 1)")

    common(sub.add_parser("verify", help="verify structural and epsilon-opacity"))

    p = sub.add_parser("enforce", help="synthesize a disabling/masking policy")
    common(p, epsilon=0.05)
    p.add_argument("--K", type=int, default=8, help="verification budget")
    p.add_argument("--arch", help="JSON sidecar with architecture fields")
    p.add_argument("--catalog", choices=("model", "none"), default="model")
    p.add_argument("--uncontrollable", action="append", metavar="TID")

    p = sub.add_parser("bench", help="quotient vs interleaving timing on the calibration family")
    p.add_argument("--model", default="repeater")
    p.add_argument("--m", default="0,2,4,6,8")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--min-time", type=float, default=0.5)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int)
    p.add_argument("--kernels", action="store_true", help="time the compiled and Python stabilizer kernels instead")
    p.add_argument("--qubits", type=int, default=16)
    p.add_argument("--rounds", type=int, default=2000)

    p = sub.add_parser("oracle", help="randomized dense-vs-tableau equivalence suite")
    p.add_argument("--cases", type=int, default=200)
    p.add_argument("--max-qubits", type=int, default=4)
    p.add_argument("--toy-nets", type=int, default=0, help="also compare quotient and interleaving on N toy nets")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("certify", help="emit posterior certificates (writes cert.json and report.json)")
    common(p)
    p.add_argument("--policy", help="certify the closed loop under this policy JSON")

    p = sub.add_parser("check-cert", help="check certificates against a report")
    p.add_argument("cert")
    p.add_argument("report")

    p = sub.add_parser("fmt", help="print a model in canonical form")
    p.add_argument("model")
    p.add_argument("--out")
    p.add_argument("--check", action="store_true", help="exit 1 unless the file is already canonical")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return run_verify(config_from(args))
        if args.command == "enforce":
            return run_enforce(config_from(args), args)
        if args.command == "bench":
            resolve_jobs(args.jobs)
            return run_bench(args)
        if args.command == "oracle":
            resolve_jobs(args.jobs)
            return run_oracle(args)
        if args.command == "certify":
            return run_certify(config_from(args), args)
        if args.command == "check-cert":
            return run_check_cert(args)
        return run_fmt(args)
    except (
        CliError,
        ModelError,
        DivergenceError,
        verifier.ExplorationLimit,
        enforcement.PolicyError,
        certificates.CertificateError,
        OSError,
        json.JSONDecodeError,
        ValueError,
    ) as exc:
        print(f"opaqnet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
