"""End-to-end cross-resonance workflow on the simulated device.

Amplitude sweep -> process tomography per amplitude -> Hamiltonian
coefficients -> third-order fit -> pi/2 amplitude -> local-rotation
optimization -> tomography of the optimized CNOT -> readout calibration.
Every stage draws its randomness from one seed; outputs are byte stable.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from . import quantum as qm
from .cli import REPORT_COLUMNS, RunManifest, csv_text, write_atomic
from .ir.serialize import dump_value


@dataclass
class DemoConfig:
    seed: int = 7
    shots: int = 2048
    amplitudes: Tuple[float, ...] = tuple(np.round(np.arange(0.05, 0.30 + 1e-9, 0.025), 12))
    echo: bool = False
    restarts: int = 20
    channel: str = "u1"
    iq_shots: int = 1024


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, typ, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _readout_stage(backend, cfg: DemoConfig, seed_seq, qubits=(0, 1)):
    from .gates import default_instmap
    from .readout import assignment_fidelity, crosstalk_test, fit_lda
    from .scheduler import MiniCircuit, schedule_circuit
    from .sim.engine import simulate

    imap = default_instmap(backend, with_cx=False)
    seeds = seed_seq.spawn(4)
    data, rows = {}, []
    for k, state in enumerate(("00", "01", "10", "11")):
        circ = MiniCircuit(backend.n_qubits)
        for q, bit in zip((qubits[1], qubits[0]), state):
            if bit == "1":
                circ = circ.gate("x", q)
        circ = circ.measure(qubits[0], 0).measure(qubits[1], 1)
        res = simulate(schedule_circuit(circ, imap), backend, shots=cfg.iq_shots, seed=seeds[k])
        label = f"cal_{state}"
        data[label] = {qubits[0]: res.iq[0], qubits[1]: res.iq[1]}
    out = {"qubits": {}, "crosstalk": []}
    boundary_rows = []
    for rank, q in enumerate(qubits):
        pts, labels = [], []
        for label, by_q in data.items():
            bit = int(label[-1 - rank])
            pts.append(by_q[q])
            labels.append(np.full(by_q[q].size, bit))
        pts, labels = np.concatenate(pts), np.concatenate(labels)
        disc = fit_lda(pts, labels)
        fid = assignment_fidelity(disc, pts, labels)
        assigned = disc.classify(pts)
        offset = 0
        for label, by_q in data.items():
            z = by_q[q]
            for j in range(z.size):
                rows.append((label, q, int(label[-1 - rank]), float(z[j].real), float(z[j].imag), int(assigned[offset + j])))
            offset += z.size
        xs = np.linspace(pts.real.min(), pts.real.max(), 2)
        for x, y in zip(xs, disc.boundary(xs)):
            boundary_rows.append((q, float(x), float(y)))
        out["qubits"][str(q)] = {"discriminator": disc.to_dict(), "assignment": fid.to_dict()}
    for t in crosstalk_test(data, qubits):
        out["crosstalk"].append({"qubit": t.qubit, "state": t.state, "x": t.x, "y": t.y, "r": t.r, "t": t.t, "p": t.p, "n": t.n})
    return out, rows, boundary_rows


def run_demo(cfg: DemoConfig, out_dir: Path, backend=None, backend_path: Optional[str] = None) -> dict:
    from .cr import average_amplitude, build_cr, cr_rotation_time
    from .fidelity import average_gate_fidelity, build_optimized_cnot, optimize_local
    from .gates import cr_entry, default_instmap
    from .hamiltonian import coefficients_from_superop, fit_third_order, solve_pi_half_amplitude
    from .sim.devices import cr_demo_backend
    from .sim.engine import evolve_superoperator
    from .tomography import dumps_choi, gate_start, reconstruct, run_qpt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    backend = backend or cr_demo_backend()
    manifest = RunManifest("demo-cr", seed=cfg.seed, parameters=dict(asdict(cfg), amplitudes=list(cfg.amplitudes)))
    if backend_path:
        manifest.add_input(backend_path)

    entry = cr_entry(backend, cfg.channel)
    n_cr = 2 if cfg.echo else 1
    t_cr = int(entry.get("duration", 848)) * backend.dt
    t_rot = cr_rotation_time(entry, backend.dt, cfg.echo)
    sequence = "CR2" if cfg.echo else "CR1"
    imap = default_instmap(backend, with_cx=False)
    s_sweep, s_pi2, s_opt, s_cnot, s_iq = np.random.SeedSequence(cfg.seed).spawn(5)
    sweep_seeds = s_sweep.spawn(len(cfg.amplitudes))

    def emit(rel: str, text: str):
        path = out_dir / rel
        write_atomic(path, text)
        manifest.add_output(path, out_dir)

    report = {"sequence": sequence, "n_cr": n_cr, "t_cr": t_cr, "seed": cfg.seed, "shots": cfg.shots}

    rows, points = [], []
    with _Stage("sweep"):
        for k, amp in enumerate(cfg.amplitudes):
            sched = build_cr(backend, entry, amp=amp, echo=cfg.echo)
            choi = reconstruct(run_qpt(sched, backend, imap, cfg.shots, sweep_seeds[k]))
            a_bar = average_amplitude(entry, amp)
            coeffs = coefficients_from_superop(qm.choi_to_superop(choi), t_rot)
            emit(f"qpt/choi_{k:02d}.json", dumps_choi(choi, A=float(amp), A_bar=a_bar, sequence=sequence) + "\n")
            rows.append([sequence, a_bar] + [coeffs[c] for c in REPORT_COLUMNS])
            points.append((a_bar, coeffs["ZX"]))
    emit("coefficients.csv", csv_text(("sequence", "A_bar") + tuple("w" + c for c in REPORT_COLUMNS), rows))

    with _Stage("fit"):
        cal = backend.calibration
        fit = fit_third_order(points, cal["detuning"], cal["anharmonicity"])
        a_bar_pi2 = solve_pi_half_amplitude(fit, t_cr, n_cr)
        amp_pi2 = a_bar_pi2 / average_amplitude(entry, 1.0)
    report["fit"] = fit.to_dict()
    report["A_bar_pi2"] = a_bar_pi2
    report["amp_pi2"] = amp_pi2

    with _Stage("optimize"):
        cr_sched = build_cr(backend, entry, amp=amp_pi2, echo=cfg.echo)
        choi_pi2 = reconstruct(run_qpt(cr_sched, backend, imap, cfg.shots, s_pi2))
        emit("qpt/choi_pi2.json", dumps_choi(choi_pi2, A=amp_pi2, A_bar=a_bar_pi2, sequence=sequence) + "\n")
        opt = optimize_local(qm.choi_to_superop(choi_pi2), "cx", cfg.restarts, s_opt, (1, 0))
    report["local_optimization"] = opt.to_dict()

    with _Stage("cnot"):
        cnot = build_optimized_cnot(imap, cr_sched, opt.theta, (1, 0), backend.n_qubits)
        choi_cx = reconstruct(run_qpt(cnot, backend, imap, cfg.shots, s_cnot))
        emit("qpt/choi_cnot.json", dumps_choi(choi_cx, sequence=sequence) + "\n")
        f_qpt = average_gate_fidelity(qm.choi_to_superop(choi_cx), qm.cx(1, 0))
        exact = evolve_superoperator(cnot.shift(gate_start(imap, backend)), backend, virtual_z_correction=True)
        f_exact = average_gate_fidelity(exact, qm.cx(1, 0))
    report["cnot"] = {"duration": cnot.duration, "F_qpt": f_qpt, "F_simulated": f_exact}

    with _Stage("readout"):
        readout, iq_rows, boundary_rows = _readout_stage(backend, cfg, s_iq)
    emit("iq_scatter.csv", csv_text(("schedule", "qubit", "prepared", "i", "q", "assigned"), iq_rows))
    emit("iq_boundary.csv", csv_text(("qubit", "i", "q"), boundary_rows))
    report["readout"] = readout

    emit("report.json", dump_value(report) + "\n")
    manifest.write(out_dir / "manifest.json")
    return report
