#!/usr/bin/env python3
"""
Controller Comparison Script
Runs one scenario with the adaptive and the PI secondary controller and prints ISE per window
"""

import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.core.runner import run_scenario
from app.models.schemas import ControllerKind
from app.services.scenario_loader import load_scenario
from app.services.trace import write_trace


class Colors:
    """Terminal colors"""
    HEADER = '\033[95m'
    CYAN = '\033[96m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    RED = '\033[91m'
    END = '\033[0m'
    BOLD = '\033[1m'


def print_section(title: str):
    print(f"\n{Colors.HEADER}{'=' * 60}{Colors.END}")
    print(f"{Colors.BOLD}{title}{Colors.END}")
    print(f"{Colors.HEADER}{'=' * 60}{Colors.END}\n")


def print_ratio(label: str, ratio: float, target: float):
    color = Colors.GREEN if ratio <= target else Colors.RED
    print(f"{color}{'✓' if ratio <= target else '✗'}{Colors.END} {label}: {ratio:.3f} (target ≤ {target})")


def compare(scenario_path: Path, out_dir: Path):
    """Run both controllers and report final/first window ISE ratios"""
    summaries = {}
    for kind in (ControllerKind.ADAPTIVE, ControllerKind.PI):
        scenario = load_scenario(scenario_path, controller=kind)
        print(f"{Colors.CYAN}ℹ{Colors.END} Running {scenario.name} with the {kind.value} controller...")
        result = run_scenario(scenario)
        write_trace(result.trace, out_dir / f"{scenario.name}_{kind.value}.csv")
        if result.fault is not None:
            print(f"{Colors.RED}✗{Colors.END} {result.fault}")
            return False
        summaries[kind] = result.summary

    print_section("ISE per window")
    print(f"{'window':>12} {'adaptive V':>12} {'adaptive I':>12} {'PI V':>10} {'PI I':>10}")
    rows = zip(summaries[ControllerKind.ADAPTIVE].ise, summaries[ControllerKind.PI].ise)
    for a, p in rows:
        span = f"{a.t_start:g}-{a.t_end:g}"
        print(f"{span:>12} {a.ise_v:12.4f} {a.ise_i:12.4f} {p.ise_v:10.4f} {p.ise_i:10.4f}")

    print_section("Final / first window")
    adaptive = summaries[ControllerKind.ADAPTIVE].ise
    pi = summaries[ControllerKind.PI].ise
    if len(adaptive) < 2:
        print(f"{Colors.YELLOW}⚠{Colors.END} Scenario has fewer than two ISE windows")
        return False
    print_ratio("adaptive ISE_I", adaptive[-1].ise_i / adaptive[0].ise_i, 0.5)
    print_ratio("adaptive ISE_V", adaptive[-1].ise_v / adaptive[0].ise_v, 0.9)
    print(f"   PI ISE_I: {pi[-1].ise_i / pi[0].ise_i:.3f}, PI ISE_V: {pi[-1].ise_v / pi[0].ise_v:.3f}")
    return True


def main():
    """Main function"""
    scenario = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "scenarios" / "cyclic.toml"
    out_dir = Path(sys.argv[2]) if len(sys.argv) > 2 else Path("out")
    sys.exit(0 if compare(scenario, out_dir) else 1)


if __name__ == "__main__":
    main()
