#!/usr/bin/env python3
"""Run the desk-scale acceptance gates and write a markdown summary."""

import logging
import math
import sys
import time
from datetime import datetime
from typing import Callable, Dict, List, Tuple

import numpy as np

from casimir_dipoles.defaults import HBAR_C_EV_UM
from casimir_dipoles.geometry import preset_scene
from casimir_dipoles.materials import ConstantDielectric, PerfectMetal, SphereRadiative, SphereStatic, material
from casimir_dipoles.models import (
    Body,
    ImagFrequency,
    InteractionMode,
    QuadratureSpec,
    Scene,
    SeparationKind,
    SweepParameter,
    SweepSpec,
    TwoDipoleConfig,
)
from casimir_dipoles.observables import fit_power_law, sweep
from casimir_dipoles.oracle import casimir_polder_u, london_c6, two_dipole_delta_logdet
from casimir_dipoles.spectrum import delta_logdet, interaction_energy

Z = np.array([0.0, 0.0, 1.0])
DESK_L = 0.5
# Central-difference truncation allowed between torques taken with different steps.
TORQUE_FD_REL_TOL = 1e-3


def pair(inclusion, r: float, mode: InteractionMode) -> Scene:
    """Two single-particle bodies a centre distance ``r`` apart along z."""
    first = Body(positions=np.zeros((1, 3)), inclusions=(inclusion,))
    second = Body(positions=np.zeros((1, 3)), inclusions=(inclusion,), translation=r * Z)
    return Scene(bodies=(first, second), mode=mode)


def cubes(n: int, mode: str, inclusion: str = "static") -> Scene:
    return preset_scene(
        "fig1_cubes",
        {"L_um": DESK_L, "n": n, "z_over_L": 0.5, "mode": mode, "inclusion": inclusion},
    )


def fig4(variant: str) -> Scene:
    """fig4_aniso_torque cylinders, two layers thick, at r/d = 1/3 and d = sqrt(A)/10."""
    return preset_scene(
        "fig4_aniso_torque",
        {
            "variant": variant,
            "height_um": 0.2,
            "lattice_over_sqrtA": 0.1,
            "radius_over_sqrtA": 0.1 / 3.0,
            "mode": "nonretarded",
            "inclusion": "static",
        },
    )


def forces(scene: Scene, grid, kind: SeparationKind = SeparationKind.SURFACE) -> np.ndarray:
    spec = SweepSpec(parameter=SweepParameter.SEPARATION, grid=tuple(grid), separation_kind=kind)
    return sweep(scene, spec, workers=4).derivatives()


class AcceptanceVerifier:
    """Runs each gate, records pass/fail with a one-line detail."""

    def __init__(self):
        self.results: List[Dict] = []
        self.gates: Dict[int, Tuple[str, Callable[[], Tuple[bool, str]]]] = {
            1: ("London equivalence", self.gate_london),
            2: ("Casimir-Polder equivalence", self.gate_casimir_polder),
            3: ("Non-retarded far-field exponent", self.gate_nonretarded_exponent),
            4: ("Slab-limit trend", self.gate_slab_limit),
            5: ("Retardation weakens", self.gate_retardation),
            6: ("Filling-fraction collapse", self.gate_filling_fraction),
            7: ("Scale invariance", self.gate_scale_invariance),
            8: ("Torque structure", self.gate_torque),
            9: ("Cross-oracle determinants", self.gate_cross_oracle),
            10: ("Performance", self.gate_performance),
        }

    def gate_london(self) -> Tuple[bool, str]:
        a = 0.05
        sphere = SphereRadiative(a, material("gold"))
        c6 = london_c6(sphere, sphere)
        start = time.perf_counter()
        worst = 0.0
        for ratio in (10, 20, 50):
            r = ratio * a
            energy = interaction_energy(pair(sphere, r, InteractionMode.NONRETARDED)).energy
            worst = max(worst, abs(energy / (-c6 / r ** 6) - 1.0))
        elapsed = time.perf_counter() - start
        return worst < 0.01 and elapsed < 10.0, f"max deviation {worst:.2e}, {elapsed:.2f} s"

    def gate_casimir_polder(self) -> Tuple[bool, str]:
        a = 0.02
        sphere = SphereRadiative(a, PerfectMetal())
        energy = interaction_energy(pair(sphere, 5.0, InteractionMode.RETARDED)).energy
        deviation = abs(energy / casimir_polder_u(a ** 3, a ** 3, 5.0) - 1.0)
        grid = np.linspace(3.0, 8.0, 6)
        spec = SweepSpec(parameter=SweepParameter.SEPARATION, grid=tuple(grid), separation_kind=SeparationKind.CENTER)
        result = sweep(pair(sphere, 5.0, InteractionMode.RETARDED), spec)
        exponent, _ = fit_power_law(result, (3.0, 8.0))
        passed = deviation < 0.02 and abs(exponent + 8.0) <= 0.1
        return passed, f"energy deviation {deviation:.2e}, force exponent {exponent:.4f}"

    def gate_nonretarded_exponent(self) -> Tuple[bool, str]:
        sphere = SphereRadiative(0.02, PerfectMetal())
        spec = SweepSpec(
            parameter=SweepParameter.SEPARATION,
            grid=tuple(np.linspace(3.0, 8.0, 6)),
            separation_kind=SeparationKind.CENTER,
        )
        result = sweep(pair(sphere, 5.0, InteractionMode.NONRETARDED), spec)
        exponent, _ = fit_power_law(result, (3.0, 8.0))
        return abs(exponent + 7.0) <= 0.05, f"force exponent {exponent:.4f}"

    def gate_slab_limit(self) -> Tuple[bool, str]:
        grid = DESK_L * np.linspace(0.05, 0.15, 5)
        spec = SweepSpec(parameter=SweepParameter.SEPARATION, grid=tuple(grid))
        result = sweep(cubes(8, "nonretarded"), spec, workers=4)
        exponent, _ = fit_power_law(result, (grid[0], grid[-1]))
        return -3.6 <= exponent <= -2.6, f"force exponent {exponent:.4f}"

    def gate_retardation(self) -> Tuple[bool, str]:
        grid = DESK_L * np.array([0.2, 0.5, 1.0, 2.0, 3.0])
        retarded = forces(cubes(4, "retarded"), grid)
        nonretarded = forces(cubes(4, "nonretarded"), grid)
        ratios = np.abs(retarded) / np.abs(nonretarded)
        return bool(np.all(ratios <= 1.0)), f"|F_ret|/|F_nonret| in [{ratios.min():.4f}, {ratios.max():.4f}]"

    def gate_filling_fraction(self) -> Tuple[bool, str]:
        # both discretizations compared at the same cube-centre distance L + gap
        z_over_l = np.array([0.1, 0.2, 0.3, 1.5, 2.0, 3.0])
        grid = DESK_L * (1.0 + z_over_l)
        fine = forces(cubes(6, "nonretarded"), grid, SeparationKind.CENTER)
        coarse = forces(cubes(4, "nonretarded"), grid, SeparationKind.CENTER)
        spread = np.abs(fine / coarse - 1.0)
        far = spread[z_over_l >= 1.5].max()
        near = spread[z_over_l <= 0.3].max()
        return far < 0.05 and near > 0.05, f"far spread {far:.2%}, near spread {near:.2%}"

    def gate_scale_invariance(self) -> Tuple[bool, str]:
        scene = cubes(4, "nonretarded")
        base = interaction_energy(scene).energy
        worst = max(abs(interaction_energy(scene.scaled(s)).energy / base - 1.0) for s in (0.1, 10.0))
        return worst < 1e-10, f"max relative change {worst:.2e}"

    def gate_torque(self) -> Tuple[bool, str]:
        scene = preset_scene("fig3_rect_torque", {"counts": [5, 10, 3], "mode": "nonretarded"})
        angles = (0.0, math.pi / 8, math.pi / 4, math.pi / 2, math.pi / 8 + math.pi)
        spec = SweepSpec(parameter=SweepParameter.ANGLE, grid=angles)
        rows = sweep(scene, spec, workers=4).rows
        aligned = rows[0]
        zero_torque = abs(aligned.derivative) <= 3.0 * aligned.quad_error + 1e-9 * abs(aligned.energy)
        # steps scale with the angle, so the two torques carry different O(h^2) truncation
        periodic = math.isclose(rows[1].energy, rows[4].energy, rel_tol=1e-10) and math.isclose(
            rows[1].derivative, rows[4].derivative, rel_tol=TORQUE_FD_REL_TOL
        )
        minimum = all(aligned.energy < r.energy for r in rows[1:4])

        peaks = {}
        grid = (math.pi / 8, math.pi / 4, 3 * math.pi / 8)
        for variant in ("prolates_symmetric", "spheres_asymmetric"):
            result = sweep(fig4(variant), SweepSpec(SweepParameter.ANGLE, grid), workers=4)
            peaks[variant] = float(np.max(np.abs(result.derivatives())))
        ranked = peaks["prolates_symmetric"] > peaks["spheres_asymmetric"]
        detail = (
            f"tau(0) = {aligned.derivative:.2e}, periodic {periodic}, minimum at 0 {minimum}, "
            f"|tau_max| prolates {peaks['prolates_symmetric']:.3e} vs spheres {peaks['spheres_asymmetric']:.3e}"
        )
        return zero_torque and periodic and minimum and ranked, detail

    def gate_cross_oracle(self) -> Tuple[bool, str]:
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(40):
            a = rng.uniform(0.01, 0.2)
            eps = rng.uniform(1.5, 20.0)
            r = 10.0 ** rng.uniform(math.log10(2.5), 4.0) * a
            mode = InteractionMode.RETARDED if rng.random() < 0.5 else InteractionMode.NONRETARDED
            xi = ImagFrequency.for_mode(rng.uniform(0.0, 2.0) * HBAR_C_EV_UM / r, mode)
            alpha = a ** 3 * (eps - 1.0) / (eps + 2.0)
            reference = two_dipole_delta_logdet(TwoDipoleConfig(alpha, alpha, r, mode), xi)
            value = delta_logdet(pair(SphereStatic(a, ConstantDielectric(eps)), r, mode), xi)
            worst = max(worst, abs(value / reference - 1.0))
        return worst < 1e-12, f"max relative difference {worst:.2e}"

    def gate_performance(self) -> Tuple[bool, str]:
        scene = cubes(6, "nonretarded")
        quad = QuadratureSpec(nodes=40)
        start = time.perf_counter()
        four = interaction_energy(scene, quad, workers=4)
        elapsed = time.perf_counter() - start
        one = interaction_energy(scene, quad, workers=1)
        identical = one.energy == four.energy and one.integrand_samples == four.integrand_samples
        return elapsed < 60.0 and identical, f"{elapsed:.1f} s on 4 threads, bit-identical {identical}"

    def run(self, selected: List[int]) -> None:
        for number in selected:
            name, gate = self.gates[number]
            print(f"\n[{number}] {name}...")
            start = time.perf_counter()
            try:
                passed, detail = gate()
                status = "passed" if passed else "failed"
            except Exception as e:
                status, detail = "error", f"{type(e).__name__}: {e}"
            seconds = time.perf_counter() - start
            icon = {"passed": "✅", "failed": "❌"}.get(status, "⚠️")
            print(f"{icon} {status.upper()}: {detail} ({seconds:.1f} s)")
            self.results.append(
                {"gate": number, "name": name, "status": status, "detail": detail, "seconds": seconds}
            )

    def generate_summary_report(self, output_path: str = "acceptance_summary.md"):
        """Write the gate table and statistics as markdown."""
        with open(output_path, "w", encoding="utf-8") as f:
            f.write("# 验收检查汇总报告\n\n")
            f.write(f"**生成时间**: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n\n")
            f.write("| 编号 | 检查项 | 状态 | 耗时 (s) | 详情 |\n")
            f.write("|------|--------|------|----------|------|\n")
            for r in self.results:
                icon = {"passed": "✅", "failed": "❌"}.get(r["status"], "⚠️")
                f.write(f"| {r['gate']} | {r['name']} | {icon} {r['status'].upper()} | {r['seconds']:.1f} | {r['detail']} |\n")

            counts = {s: sum(1 for r in self.results if r["status"] == s) for s in ("passed", "failed", "error")}
            f.write("\n## 统计信息\n\n")
            f.write(f"- ✅ 通过: {counts['passed']}\n")
            f.write(f"- ❌ 失败: {counts['failed']}\n")
            f.write(f"- ⚠️ 错误: {counts['error']}\n")
            f.write(f"- 📊 总计: {len(self.results)}\n\n")
            f.write("---\n\n")
            f.write("*报告由验收脚本自动生成*\n")

        print(f"\n📄 Summary report saved to: {output_path}")


def main():
    """Main function."""
    verifier = AcceptanceVerifier()
    args = sys.argv[1:]
    if args and args[0] in ("-h", "--help"):
        print("Usage: python3 verify_acceptance.py [gate ...]")
        print("Example: python3 verify_acceptance.py 1 2 9")
        sys.exit(0)
    try:
        selected = [int(a) for a in args] or sorted(verifier.gates)
    except ValueError:
        print(f"Error: gates are numbers 1-{len(verifier.gates)}")
        sys.exit(1)
    unknown = [g for g in selected if g not in verifier.gates]
    if unknown:
        print(f"Error: unknown gate(s) {unknown}")
        sys.exit(1)

    logging.basicConfig(level=logging.WARNING, format="%(message)s")
    verifier.run(selected)

    print("\n" + "=" * 80)
    print("ACCEPTANCE CHECK COMPLETE")
    print("=" * 80)
    verifier.generate_summary_report()

    failed_count = sum(1 for r in verifier.results if r["status"] != "passed")
    sys.exit(0 if failed_count == 0 else 1)


if __name__ == "__main__":
    main()
