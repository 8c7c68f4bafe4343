"""Command-line front end: ``pulseforge <command> ...``.

Exit codes: 0 ok, 2 validation, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from . import quantum as qm
from .ir.serialize import dump_value, format_float
from .ir.serialize import loads as loads_schedule
from .ir.serialize import dumps as dumps_schedule

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.code = code


# --- artifact plumbing ------------------------------------------------------------------


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_atomic(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


@dataclass
class RunManifest:
    command: str
    seed: Optional[int] = None
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    parameters: Dict[str, object] = field(default_factory=dict)

    def add_input(self, path) -> None:
        if path is not None:
            self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path, base: Optional[Path] = None) -> None:
        key = os.path.relpath(path, base) if base is not None else str(path)
        self.outputs[key] = sha256_file(path)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "seed": self.seed,
            "parameters": self.parameters,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "versions": {
                "pulseforge": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        }

    def write(self, path) -> None:
        write_atomic(path, dump_value(self.to_dict()) + "\n")


def _emit(path, text: str, manifest: RunManifest, base: Optional[Path] = None) -> None:
    write_atomic(path, text)
    manifest.add_output(path, base)


def _finish(manifest: RunManifest, out_path) -> None:
    manifest.write(str(out_path) + ".manifest.json")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"{path} is not valid JSON: {exc}") from exc


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from exc


def _load_backend(path):
    from .sim.backend import BackendModel
    from .sim.devices import cr_demo_backend

    if path is None:
        return cr_demo_backend()
    return BackendModel.from_dict(_read_json(path))


def _load_instmap(path, backend):
    from .gates import default_instmap
    from .scheduler import InstructionScheduleMap

    base = default_instmap(backend) if backend is not None else InstructionScheduleMap()
    if path is None:
        return base
    return InstructionScheduleMap.from_dict(_read_json(path), base)


def parse_range(text: str) -> np.ndarray:
    """``"lo:hi:step"`` (inclusive of ``hi``) or a comma list."""
    try:
        if ":" in text:
            lo, hi, step = (float(x) for x in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(np.floor((hi - lo) / step + 1e-9)) + 1
            return np.round(lo + step * np.arange(n), 12)
        return np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError:
        raise CLIError(f"bad amplitude range {text!r}; use lo:hi:step or a comma list") from None


# --- commands ----------------------------------------------------------------------------


def cmd_validate(args) -> int:
    from .ir.schedule import validate

    sched = loads_schedule(_read_text(args.sched))
    diags = validate(sched)
    if args.backend:
        from .codegen import lower

        backend = _load_backend(args.backend)
        missing = [ch for ch in sched.channels if ch.is_pulse_channel and ch not in backend.frequencies]
        for ch in missing:
            print(f"error: UnboundChannel: {ch.name} has no frequency in the backend")
        if not missing:
            lower(sched, backend.dt, backend.frequencies)
        if missing:
            return EXIT_VALIDATION
    for d in diags:
        print(d)
    return EXIT_VALIDATION if any(d.severity == "error" for d in diags) else EXIT_OK


def cmd_schedule(args) -> int:
    from .scheduler import MiniCircuit, schedule_circuit

    manifest = RunManifest("schedule", parameters={"policy": args.policy})
    backend = _load_backend(args.backend) if args.backend else None
    imap = _load_instmap(args.instmap, backend)
    circ = MiniCircuit.from_dict(_read_json(args.circuit))
    sched = schedule_circuit(circ, imap, args.policy, name=Path(args.circuit).stem)
    for p in (args.circuit, args.instmap, args.backend):
        manifest.add_input(p)
    _emit(args.output, dumps_schedule(sched) + "\n", manifest)
    _finish(manifest, args.output)
    return EXIT_OK


def cmd_render(args) -> int:
    from .codegen import lower

    manifest = RunManifest("render")
    backend = _load_backend(args.backend)
    sched = loads_schedule(_read_text(args.sched))
    progs = lower(sched, backend.dt, backend.frequencies)
    rows = []
    for ch, prog in progs.items():
        if not ch.is_pulse_channel:
            continue
        for k in range(prog.samples.size):
            s = prog.samples[k]
            rows.append((ch.name, k, float(s.real), float(s.imag), float(prog.output[k])))
    for p in (args.sched, args.backend):
        manifest.add_input(p)
    _emit(args.output, csv_text(("channel", "cycle", "re", "im", "D"), rows), manifest)
    _finish(manifest, args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .sim.engine import simulate

    manifest = RunManifest("simulate", seed=args.seed, parameters={"shots": args.shots, "level": args.level})
    backend = _load_backend(args.backend)
    sched = loads_schedule(_read_text(args.sched))
    res = simulate(sched, backend, shots=args.shots, seed=args.seed)
    out = {"shots": res.shots, "n_slots": res.n_slots, "probabilities": res.probabilities.tolist()}
    if args.level == 1:
        out["iq"] = {str(s): [[float(z.real), float(z.imag)] for z in v] for s, v in sorted(res.iq.items())}
    else:
        out["counts"] = dict(sorted(res.counts.items()))
        out["memory"] = res.memory
    for p in (args.sched, args.backend):
        manifest.add_input(p)
    _emit(args.output, dump_value(out) + "\n", manifest)
    _finish(manifest, args.output)
    return EXIT_OK


def cmd_qpt(args) -> int:
    from .tomography import dumps_choi, reconstruct, run_qpt

    manifest = RunManifest("qpt", seed=args.seed, parameters={"shots": args.shots})
    backend = _load_backend(args.backend)
    imap = _load_instmap(args.instmap, backend)
    gate = loads_schedule(_read_text(args.gate))
    data = run_qpt(gate, backend, imap, shots=args.shots or None, seed=args.seed)
    choi = reconstruct(data)
    for p in (args.gate, args.instmap, args.backend):
        manifest.add_input(p)
    _emit(args.output, dumps_choi(choi) + "\n", manifest)
    _finish(manifest, args.output)
    return EXIT_OK


REPORT_COLUMNS = ("ZI", "ZX", "ZY", "ZZ", "IX", "IY", "IZ")


def cmd_fit_hamiltonian(args) -> int:
    from .hamiltonian import coefficients_from_superop, fit_third_order, solve_pi_half_amplitude
    from .tomography import choi_from_dict

    manifest = RunManifest("fit-hamiltonian", parameters={"tcr": args.tcr, "dt": args.dt, "ncr": args.ncr})
    files = sorted(Path(args.choi_dir).glob("*.json"))
    files = [f for f in files if not f.name.endswith(".manifest.json")]
    if not files:
        raise CLIError(f"no Choi files in {args.choi_dir}", EXIT_IO)
    t = args.ncr * args.tcr * args.dt
    rows, points = [], []
    for f in files:
        data = _read_json(f)
        if "A_bar" not in data:
            raise CLIError(f"{f} lacks the A_bar field")
        superop = qm.choi_to_superop(choi_from_dict(data))
        coeffs = coefficients_from_superop(superop, t)
        rows.append([float(data["A_bar"])] + [coeffs[k] for k in REPORT_COLUMNS])
        points.append((float(data["A_bar"]), coeffs["ZX"]))
        manifest.add_input(f)
    rows.sort(key=lambda r: r[0])
    fit = fit_third_order(points, args.delta, args.anharm)
    out = {"fit": fit.to_dict(), "n_cr": args.ncr, "t_cr": args.tcr * args.dt}
    try:
        out["A_pi2"] = solve_pi_half_amplitude(fit, args.tcr * args.dt, args.ncr)
    except Exception as exc:  # root outside range is reported, not fatal
        out["A_pi2"] = None
        out["A_pi2_error"] = str(exc)
    out["table"] = [dict(zip(("A_bar",) + tuple("w" + k for k in REPORT_COLUMNS), r)) for r in rows]
    _emit(args.output, dump_value(out) + "\n", manifest)
    csv_path = Path(args.output).with_suffix(".csv")
    _emit(csv_path, csv_text(("A_bar",) + tuple("w" + k for k in REPORT_COLUMNS), rows), manifest)
    _finish(manifest, args.output)
    return EXIT_OK


def cmd_calibrate_cnot(args) -> int:
    from .fidelity import optimize_local
    from .tomography import choi_from_dict

    orientation = tuple(int(x) for x in args.orientation.split(","))
    manifest = RunManifest("calibrate-cnot", seed=args.seed, parameters={"target": args.target, "restarts": args.restarts})
    choi = choi_from_dict(_read_json(args.choi))
    manifest.add_input(args.choi)
    report = optimize_local(qm.choi_to_superop(choi), args.target, args.restarts, args.seed, orientation)
    _emit(args.output, dump_value(report.to_dict()) + "\n", manifest)
    _finish(manifest, args.output)
    return EXIT_OK


def _iq_records(data) -> List[dict]:
    recs = data if isinstance(data, list) else data.get("records", [data])
    for r in recs:
        if not {"schedule", "qubit", "shots"} <= set(r):
            raise CLIError("IQ records need 'schedule', 'qubit' and 'shots'")
    return recs


def _prepared_bit(schedule: str, qubit: int, qubits: Sequence[int]) -> int:
    state = schedule.split("_", 1)[1]
    rank = sorted(qubits).index(qubit)
    if len(state) != len(qubits):
        raise CLIError(f"{schedule} does not match {len(qubits)} calibrated qubits")
    return int(state[-1 - rank])


def cmd_discriminate(args) -> int:
    from .readout import assignment_fidelity, fit_lda

    manifest = RunManifest("discriminate")
    cal = _iq_records(_read_json(args.cal))
    data = _iq_records(_read_json(args.data))
    manifest.add_input(args.cal)
    manifest.add_input(args.data)
    qubits = sorted({int(r["qubit"]) for r in cal})
    report = {"qubits": {}, "data": []}
    discs = {}
    for q in qubits:
        pts, labels = [], []
        for r in cal:
            if int(r["qubit"]) != q:
                continue
            z = [complex(i, qq) for i, qq in r["shots"]]
            pts += z
            labels += [_prepared_bit(r["schedule"], q, qubits)] * len(z)
        disc = fit_lda(pts, labels)
        discs[q] = disc
        fid = assignment_fidelity(disc, pts, labels)
        report["qubits"][str(q)] = {"discriminator": disc.to_dict(), "assignment": fid.to_dict()}
    for r in data:
        q = int(r["qubit"])
        if q not in discs:
            raise CLIError(f"no calibration for qubit {q}")
        bits = discs[q].classify([complex(i, qq) for i, qq in r["shots"]])
        report["data"].append({"schedule": r["schedule"], "qubit": q, "ones": int(np.sum(bits)), "shots": int(len(bits))})
    _emit(args.output, dump_value(report) + "\n", manifest)
    _finish(manifest, args.output)
    return EXIT_OK


def cmd_demo_cr(args) -> int:
    from .demo import DemoConfig, run_demo

    cfg = DemoConfig(
        seed=args.seed,
        shots=args.shots,
        amplitudes=tuple(float(a) for a in parse_range(args.amplitudes)),
        echo=args.echo,
        restarts=args.restarts,
    )
    backend = _load_backend(args.backend) if args.backend else None
    run_demo(cfg, Path(args.out_dir), backend=backend, backend_path=args.backend)
    return EXIT_OK


# --- parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pulseforge", description="Pulse-level programming and CR characterization.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a schedule for overlaps and misaligned acquires")
    s.add_argument("--sched", required=True)
    s.add_argument("--backend")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("schedule", help="lower a MiniCircuit to a schedule")
    s.add_argument("--circuit", required=True)
    s.add_argument("--instmap")
    s.add_argument("--backend")
    s.add_argument("--policy", choices=("alap", "asap"), default="alap")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_schedule)

    s = sub.add_parser("render", help="sample channel waveforms to CSV")
    s.add_argument("--sched", required=True)
    s.add_argument("--backend")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("simulate", help="run a schedule on the simulator")
    s.add_argument("--sched", required=True)
    s.add_argument("--backend")
    s.add_argument("--shots", type=int, default=1024)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--level", type=int, choices=(1, 2), default=2)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("qpt", help="process tomography of a gate schedule")
    s.add_argument("--gate", required=True)
    s.add_argument("--instmap")
    s.add_argument("--backend")
    s.add_argument("--shots", type=int, default=2048)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_qpt)

    s = sub.add_parser("fit-hamiltonian", help="CR Hamiltonian coefficients and third-order fit")
    s.add_argument("--choi-dir", required=True)
    s.add_argument("--tcr", type=float, default=848)
    s.add_argument("--ncr", type=int, default=1)
    s.add_argument("--dt", type=float, default=2.22e-10)
    s.add_argument("--delta", type=float, default=115e6)
    s.add_argument("--anharm", type=float, default=-319.7e6)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_fit_hamiltonian)

    s = sub.add_parser("calibrate-cnot", help="local-rotation optimization of a measured process")
    s.add_argument("--choi", required=True)
    s.add_argument("--target", choices=("cx", "zx"), default="cx")
    s.add_argument("--orientation", default="1,0", help="control,target")
    s.add_argument("--restarts", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_calibrate_cnot)

    s = sub.add_parser("discriminate", help="fit LDA discriminators and classify IQ shots")
    s.add_argument("--cal", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_discriminate)

    s = sub.add_parser("demo-cr", help="end-to-end cross-resonance characterization on the simulator")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--shots", type=int, default=2048)
    s.add_argument("--amplitudes", default="0.05:0.30:0.025")
    s.add_argument("--echo", action="store_true", help="use the echoed CR2 sequence")
    s.add_argument("--restarts", type=int, default=20)
    s.add_argument("--backend")
    s.add_argument("--out-dir", default="demo-cr")
    s.set_defaults(func=cmd_demo_cr)
    return p


def _exit_code(exc: BaseException) -> int:
    from .codegen import CodegenError
    from .cr import CalibrationError
    from .hamiltonian import BranchCutError, FitError
    from .scheduler import InvalidTemplate, MissingDefinition
    from .sim.backend import BackendError

    exc = getattr(exc, "cause", exc)
    if isinstance(exc, CLIError):
        return exc.code
    if isinstance(exc, (BranchCutError, FitError, CalibrationError, np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (MissingDefinition, InvalidTemplate, BackendError, CodegenError, KeyError, ValueError, TypeError)):
        return EXIT_VALIDATION
    return EXIT_NUMERIC


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except Exception as exc:  # mapped to documented exit codes
        code = _exit_code(exc)
        stage = getattr(exc, "stage", None)
        prefix = f"[{stage}] " if stage else ""
        print(f"pulseforge {args.command}: {prefix}{type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
