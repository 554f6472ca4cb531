"""
Command line: subcommands, output files and exit codes.
"""

import orjson
import pytest
import toml

from app.api.cli import main
from app.core import exception_handlers
from app.core import runner as runner_module
from app.core.exception_handlers import EXIT_CONFIG, EXIT_FAULT, EXIT_OK, EXIT_TRACE, handle_errors
from app.core.exceptions import ControllerFault
from app.services.secondary import DscNode
from app.services.trace import trace_columns


@pytest.fixture
def scenario_file(tmp_path, short_scenario):
    def write(data=None, name="short.toml"):
        path = tmp_path / name
        path.write_text(toml.dumps(data if data is not None else short_scenario))
        return path

    return write


def test_validate_bundled_scenario(scenario_dir, capsys):
    assert main(["validate", str(scenario_dir / "activation.toml")]) == EXIT_OK
    assert "activation" in capsys.readouterr().out


def test_validate_invalid_scenario(scenario_file, short_scenario):
    short_scenario["duration"] = -1.0
    assert main(["validate", str(scenario_file(short_scenario))]) == EXIT_CONFIG


def test_validate_syntax_error(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("duration = 1.0\nthis is not toml\n")
    assert main(["validate", str(path)]) == EXIT_CONFIG


def test_run_writes_trace_and_summary(scenario_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(scenario_file()), "--out", str(out), "--quiet"]) == EXIT_OK

    trace = (out / "short_adaptive.csv").read_text().splitlines()
    assert trace[0].split(",") == trace_columns(2)
    summary = orjson.loads((out / "short_adaptive_summary.json").read_bytes())
    assert summary["scenario"] == "short"
    assert summary["fault"] is None


def test_run_controller_override(scenario_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(scenario_file()), "--out", str(out), "--controller", "pi", "--quiet"]) == EXIT_OK
    assert (out / "short_pi.csv").is_file()


def test_run_infeasible_load_is_a_fault(scenario_file, short_scenario, tmp_path):
    short_scenario["plant"]["load"] = {"kind": "constant_power", "p": 1e6}
    code = main(["run", str(scenario_file(short_scenario)), "--out", str(tmp_path / "out"), "--quiet"])
    assert code == EXIT_FAULT


def test_plot_empty_trace(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text(",".join(trace_columns(2)) + "\n")
    assert main(["plot", str(path)]) == EXIT_TRACE


def test_unknown_subcommand_exits():
    with pytest.raises(SystemExit):
        main(["simulate"])


def test_run_fault_is_logged_once(scenario_file, short_scenario, tmp_path, monkeypatch):
    errors = []
    for module in (runner_module, exception_handlers):
        monkeypatch.setattr(module.logger, "error", lambda msg, **kwargs: errors.append(msg))

    def broken(self, *args, **kwargs):
        raise ControllerFault("non-finite droop nan", f"node{self.node_id + 1}")

    monkeypatch.setattr(DscNode, "dsc_step", broken)
    out = tmp_path / "out"
    assert main(["run", str(scenario_file(short_scenario)), "--out", str(out), "--quiet"]) == EXIT_FAULT
    assert len(errors) == 1
    summary = orjson.loads((out / "short_adaptive_summary.json").read_bytes())
    assert summary["fault_time"] == 0.0


def test_controller_fault_maps_to_fault_exit_code():
    @handle_errors
    def command():
        raise ControllerFault("non-finite droop inf", "node2")

    assert command() == EXIT_FAULT
